use std::f64::consts::LN_2;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ScenarioConfig;
use crate::channel::Trajectory;
use crate::context::{build_user_context, estimate_occupancy, scale_for_multiuser, ScaledContext};
use crate::error::{Error, Result};
use crate::layout::{build_layout, CellLayout};
use crate::seed::{rng_for, stream};
use crate::waterfill::{
    allocate_slot_power, slot_push_power_total, slot_rate, solve_offline_oracle, solve_plan, PushTarget,
    SlotState, SolverTolerance,
};

/// One push episode: the context plan against the offline oracle on the
/// same realised slots.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub episode: u64,
    pub min_distance: f64,
    pub nu_hat: f64,
    pub ln_gth_hat: f64,
    pub nu_star: f64,
    /// `+∞` when the oracle wakes no idle slot.
    pub ln_gth_star: f64,
    pub idle_slots_used: usize,
    pub nu_above_p_max: bool,
    /// J spent by the context plan until the target is met or time runs out.
    pub context_energy: f64,
    pub context_bits: f64,
    /// Oracle energy for the full target.
    pub oracle_energy: f64,
    /// Oracle energy for the bits the context plan actually delivered.
    pub oracle_energy_matched: f64,
}

impl EpisodeResult {
    pub fn nu_rel_error(&self) -> f64 {
        (self.nu_star - self.nu_hat).abs() / self.nu_hat
    }

    pub fn gth_rel_error(&self) -> f64 {
        if self.ln_gth_star.is_infinite() {
            return f64::INFINITY;
        }
        ((self.ln_gth_star - self.ln_gth_hat).exp() - 1.0).abs()
    }
}

/// A single user in the centre cell pushing `bits` over the off-peak
/// stretch. The user shares its SBS with `users_per_cell − 1` others, so a
/// slot is offered to it with probability `1/users_per_cell`; the plan is
/// solved on the correspondingly scaled occupancy statistics.
#[derive(Debug, Clone)]
pub struct PushEpisodes {
    pub config: ScenarioConfig,
    pub target: PushTarget,
    layout: CellLayout,
    network: ScaledContext,
}

impl PushEpisodes {
    pub fn new(config: &ScenarioConfig, bits: f64) -> Result<Self> {
        config.validate()?;
        let target = PushTarget {
            bits,
            n_slots: config.offpeak_slots(),
            slot_duration: config.slot_duration,
        };
        target.validate()?;
        let layout = build_layout(config.n_cells, config.cell_radius, config.macro_radius)?;
        let n_frames = config.offpeak_frames();
        let network = estimate_occupancy(
            &config.rt_traffic,
            n_frames,
            config.occupancy_slots,
            &mut rng_for(config.master_seed, &[stream::OCCUPANCY]),
        )?;
        let network = scale_for_multiuser(&network, &vec![config.users_per_cell; n_frames])?;
        Ok(PushEpisodes {
            config: config.clone(),
            target,
            layout,
            network,
        })
    }

    pub fn run(&self, episode: u64) -> Result<EpisodeResult> {
        let cfg = &self.config;
        let seed = cfg.master_seed;
        let power = &cfg.power;
        let w_max = cfg.path_loss.max_bandwidth;
        let dt = cfg.slot_duration;
        let k = cfg.users_per_cell;

        let cell = self.layout.cell(0);
        let range = (cfg.min_distance_range[0], cfg.min_distance_range[1]);
        let traj = Trajectory::random_in_cell(
            &cell,
            range,
            cfg.user_speed,
            &mut rng_for(seed, &[stream::EPISODE, episode, 0]),
        );
        let user = build_user_context(
            &traj,
            0,
            &self.layout,
            &cfg.path_loss,
            cfg.n_antennas,
            cfg.offpeak_frames(),
            cfg.frame_duration(),
        )?;
        let sol = solve_plan(&self.network, &user, &self.target, power, w_max, &SolverTolerance::default())?;

        let mut rng = rng_for(seed, &[stream::EPISODE, episode, 1]);
        let mut active = 0;
        let slots: Vec<SlotState> = (0..self.target.n_slots)
            .map(|t| {
                active = cfg.rt_traffic.step(active, &mut rng);
                let mut res = cfg.rt_traffic.reservation(active, power.p_max, w_max);
                if k > 1 && rng.random_range(0..k) != 0 {
                    res.w_available = 0.0;
                }
                let g = user.channel_dists[(t / cfg.slots_per_frame) as usize].sample(&mut rng);
                SlotState::new(g, &res, w_max)
            })
            .collect();

        let oracle = solve_offline_oracle(&slots, &self.target, power)?;
        let (mut bits, mut energy) = (0.0, 0.0);
        for s in &slots {
            if bits >= self.target.bits {
                break;
            }
            let p = allocate_slot_power(s, &sol.plan, power);
            bits += slot_rate(s, p) * dt / LN_2;
            energy += slot_push_power_total(p, s, power) * dt;
        }
        let matched = if bits >= self.target.bits {
            oracle.energy
        } else if bits > 0.0 {
            let partial = PushTarget { bits, ..self.target };
            solve_offline_oracle(&slots, &partial, power)?.energy
        } else {
            0.0
        };

        Ok(EpisodeResult {
            episode,
            min_distance: traj.min_sbs_distance,
            nu_hat: sol.plan.nu,
            ln_gth_hat: sol.plan.ln_g_th,
            nu_star: oracle.plan.nu,
            ln_gth_star: oracle.plan.ln_g_th,
            idle_slots_used: oracle.idle_slots_used,
            nu_above_p_max: sol.nu_above_p_max,
            context_energy: energy,
            context_bits: bits,
            oracle_energy: oracle.energy,
            oracle_energy_matched: matched,
        })
    }

    /// Episodes `0..n` in order, on `threads` workers.
    pub fn run_many(&self, n: u64, threads: usize) -> Result<Vec<EpisodeResult>> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads.max(1))
            .build()
            .map_err(|e| Error::invalid("threads", e.to_string()))?;
        pool.install(|| (0..n).into_par_iter().map(|e| self.run(e)).collect())
    }
}
