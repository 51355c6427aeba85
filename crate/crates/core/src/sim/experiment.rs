use std::borrow::Cow;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ScenarioConfig;
use crate::channel::Trajectory;
use crate::context::{build_user_context, estimate_occupancy, scale_for_multiuser, NetworkContext, UserContext};
use crate::error::{Error, Result};
use crate::layout::{build_layout, CellLayout};
use crate::seed::{rng_for, stream};
use crate::traffic::{generate_delivery_requests, sample_user_subset, UserInterestProfile};
use crate::waterfill::{solve_plan, PushTarget, SolverTolerance, WaterfillPlan};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Unicast,
    Broadcast,
    Baseline,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::Unicast, Strategy::Broadcast, Strategy::Baseline];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Unicast => "unicast",
            Strategy::Broadcast => "broadcast",
            Strategy::Baseline => "baseline",
        }
    }
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Strategy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::invalid("strategy", format!("unknown strategy `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UserPlan {
    pub plan: WaterfillPlan,
    /// `false` when the planner failed and a saturating plan stands in.
    pub solved: bool,
    pub nu_above_p_max: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UserSetup {
    pub home_cell: usize,
    pub offpeak_trajectory: Trajectory,
    pub peak_trajectory: Trajectory,
    pub offpeak_context: UserContext,
    pub peak_context: UserContext,
}

/// Everything fixed per experiment that does not depend on content demand:
/// geometry, trajectories, occupancy statistics and push plans.
#[derive(Debug, Clone)]
pub struct Deployment {
    pub config: ScenarioConfig,
    pub layout: CellLayout,
    pub network: NetworkContext,
    pub users: Vec<UserSetup>,
    pub cell_users: Vec<Vec<usize>>,
    pub plans: Vec<UserPlan>,
}

/// Config with every demand-side field reset, so that two configs compare
/// equal exactly when they share a deployment.
fn deployment_key(config: &ScenarioConfig) -> ScenarioConfig {
    let d = ScenarioConfig::default();
    ScenarioConfig {
        catalog: crate::traffic::ContentCatalog {
            file_size_bits: config.catalog.file_size_bits,
            ..d.catalog
        },
        delivery: crate::traffic::DeliveryProcess {
            peak_duration: config.delivery.peak_duration,
            ..d.delivery
        },
        beta_s: d.beta_s,
        n_s: d.n_s,
        cache_files_broadcast: d.cache_files_broadcast,
        n_trials: d.n_trials,
        requests_per_trial: d.requests_per_trial,
        ..config.clone()
    }
}

impl Deployment {
    pub fn new(config: &ScenarioConfig) -> Result<Self> {
        config.validate()?;
        let layout = build_layout(config.n_cells, config.cell_radius, config.macro_radius)?;
        let seed = config.master_seed;
        let n_frames = config.offpeak_frames();
        let network = estimate_occupancy(
            &config.rt_traffic,
            n_frames,
            config.occupancy_slots,
            &mut rng_for(seed, &[stream::OCCUPANCY]),
        )?;

        let range = (config.min_distance_range[0], config.min_distance_range[1]);
        let users: Vec<UserSetup> = (0..config.n_users())
            .map(|u| {
                let home_cell = u / config.users_per_cell as usize;
                let cell = layout.cell(home_cell);
                let off = Trajectory::random_in_cell(&cell, range, config.user_speed, &mut rng_for(seed, &[stream::USERS, u as u64, 0]));
                let peak = Trajectory::random_in_cell(&cell, range, config.user_speed, &mut rng_for(seed, &[stream::USERS, u as u64, 1]));
                let ctx = |t: &Trajectory, frames| {
                    build_user_context(t, home_cell, &layout, &config.path_loss, config.n_antennas, frames, config.frame_duration())
                };
                Ok(UserSetup {
                    home_cell,
                    offpeak_trajectory: off,
                    peak_trajectory: peak,
                    offpeak_context: ctx(&off, n_frames)?,
                    peak_context: ctx(&peak, config.peak_frames())?,
                })
            })
            .collect::<Result<_>>()?;

        let mut cell_users = vec![Vec::new(); config.n_cells];
        for (u, s) in users.iter().enumerate() {
            cell_users[s.home_cell].push(u);
        }

        let target = PushTarget {
            bits: config.push_bits_per_user(),
            n_slots: config.offpeak_slots(),
            slot_duration: config.slot_duration,
        };
        let tol = SolverTolerance::default();
        let plans = users
            .par_iter()
            .map(|s| {
                let counts: Vec<u32> = (0..n_frames)
                    .map(|j| {
                        let cell = s.offpeak_context.serving_cells[j];
                        users
                            .iter()
                            .filter(|o| o.offpeak_context.serving_cells[j] == cell)
                            .count() as u32
                    })
                    .collect();
                let scaled = scale_for_multiuser(&network, &counts)?;
                Ok(
                    match solve_plan(&scaled, &s.offpeak_context, &target, &config.power, config.path_loss.max_bandwidth, &tol) {
                        Ok(sol) => UserPlan {
                            plan: sol.plan,
                            solved: true,
                            nu_above_p_max: sol.nu_above_p_max,
                        },
                        Err(Error::Infeasible(_) | Error::Bisection(_)) => UserPlan {
                            plan: WaterfillPlan::saturating(config.power.p_max),
                            solved: false,
                            nu_above_p_max: true,
                        },
                        Err(e) => return Err(e),
                    },
                )
            })
            .collect::<Result<Vec<_>>>()?;

        Ok(Deployment {
            config: config.clone(),
            layout,
            network,
            users,
            cell_users,
            plans,
        })
    }

    /// Whether this deployment is the one `config` would build.
    pub fn matches(&self, config: &ScenarioConfig) -> bool {
        deployment_key(&self.config) == deployment_key(config)
    }
}

/// Per-user delivery requests regrouped per cell as `(arrival_slot, user,
/// file)` in arrival order.
pub type CellRequests = Vec<Vec<(u32, usize, u32)>>;

/// Interest profiles, drawn once per experiment like the trajectories, and
/// delivery requests, either fixed per experiment or redrawn every trial.
#[derive(Debug, Clone)]
pub struct Demand {
    pub profiles: Vec<UserInterestProfile>,
    /// Present when requests are fixed per experiment.
    pub fixed_requests: Option<CellRequests>,
}

impl Demand {
    pub fn new(config: &ScenarioConfig, deployment: &Deployment) -> Result<Self> {
        config.validate()?;
        let seed = config.master_seed;
        let profiles = (0..deployment.users.len())
            .map(|u| {
                sample_user_subset(
                    &config.catalog,
                    config.n_s,
                    config.beta_s,
                    &mut rng_for(seed, &[stream::USERS, u as u64, 2]),
                )
            })
            .collect::<Result<Vec<_>>>()?;
        let mut demand = Demand {
            profiles,
            fixed_requests: None,
        };
        if !config.requests_per_trial {
            demand.fixed_requests = Some(demand.draw_requests(config, deployment, &[stream::REQUESTS])?);
        }
        Ok(demand)
    }

    /// Requests of every user, user `u` drawn from stream `prefix ++ [u]`.
    fn draw_requests(&self, config: &ScenarioConfig, deployment: &Deployment, prefix: &[u64]) -> Result<CellRequests> {
        let mut cells: CellRequests = vec![Vec::new(); config.n_cells];
        let mut path = prefix.to_vec();
        path.push(0);
        for (u, profile) in self.profiles.iter().enumerate() {
            *path.last_mut().unwrap() = u as u64;
            let reqs = generate_delivery_requests(
                profile,
                &config.delivery,
                config.catalog.file_size_bits,
                config.slot_duration,
                &mut rng_for(config.master_seed, &path),
            )?;
            let cell = deployment.users[u].home_cell;
            cells[cell].extend(reqs.iter().map(|r| (r.arrival_slot, u, r.file)));
        }
        for list in &mut cells {
            // Stable: equal slots keep user order, then per-user order.
            list.sort_by_key(|&(slot, u, _)| (slot, u));
        }
        Ok(cells)
    }
}

#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ScenarioConfig,
    pub deployment: Arc<Deployment>,
    pub demand: Demand,
}

impl Experiment {
    pub fn new(config: &ScenarioConfig) -> Result<Self> {
        Self::with_deployment(config, None)
    }

    /// Reuses `previous` when `config` only changes demand-side parameters.
    pub fn with_deployment(config: &ScenarioConfig, previous: Option<Arc<Deployment>>) -> Result<Self> {
        let deployment = match previous {
            Some(d) if d.matches(config) => d,
            _ => Arc::new(Deployment::new(config)?),
        };
        let demand = Demand::new(config, &deployment)?;
        Ok(Experiment {
            config: config.clone(),
            deployment,
            demand,
        })
    }

    /// The delivery requests seen in `trial`, shared by every strategy.
    pub fn requests(&self, trial: u64) -> Result<Cow<'_, CellRequests>> {
        match &self.demand.fixed_requests {
            Some(r) => Ok(Cow::Borrowed(r)),
            None => self
                .demand
                .draw_requests(&self.config, &self.deployment, &[stream::TRIAL, trial, stream::REQUESTS])
                .map(Cow::Owned),
        }
    }
}
