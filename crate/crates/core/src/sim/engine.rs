use std::collections::VecDeque;
use std::f64::consts::LN_2;

use rand::Rng;
use rayon::prelude::*;

use super::experiment::{CellRequests, Experiment, Strategy};
use super::metrics::{EnergyLedger, Metrics, StrategySummary};
use crate::channel::sample_h_norm_sq;
use crate::error::{Error, Result};
use crate::seed::{rng_for, stream, SimRng};
use crate::waterfill::{allocate_slot_power, slot_push_power_total, slot_rate, SlotState};

/// RT chains start empty and run this many slots before the window opens.
const RT_BURN_IN: u32 = 64;

fn trial_rng(exp: &Experiment, trial: u64, tag: u64, index: usize) -> SimRng {
    rng_for(exp.config.master_seed, &[stream::TRIAL, trial, tag, index as u64])
}

fn burned_in_rt(exp: &Experiment, rng: &mut SimRng) -> u32 {
    let rt = &exp.config.rt_traffic;
    (0..RT_BURN_IN).fold(0, |n, _| rt.step(n, rng))
}

/// One transmission by one SBS in one slot, as reported to an observer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlotEvent {
    pub slot: u32,
    pub cell: usize,
    pub user: usize,
    /// Transmit power, W.
    pub power: f64,
    /// `p_max − p_RT` in this slot, W.
    pub cap: f64,
    /// Electrical power charged for the slot, W.
    pub charged: f64,
    pub bits: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OffpeakOutcome {
    pub pushed_bits: Vec<f64>,
    /// Fully transferred files per user, most likely request first.
    pub caches: Vec<Vec<u32>>,
    pub ledger: EnergyLedger,
    /// Share of users whose push volume was met.
    pub feasible_fraction: f64,
}

/// Unicast pushing over the simulated off-peak stretch. Each slot, every
/// SBS computes the planned power of each of its users; among those with
/// positive power one is picked uniformly at random and served. Users leave
/// contention once their push volume is complete.
pub fn run_offpeak_unicast(exp: &Experiment, trial: u64) -> OffpeakOutcome {
    run_offpeak_unicast_observed(exp, trial, |_| {})
}

/// As [`run_offpeak_unicast`], reporting every transmission to `observe`.
pub fn run_offpeak_unicast_observed(exp: &Experiment, trial: u64, mut observe: impl FnMut(&SlotEvent)) -> OffpeakOutcome {
    let cfg = &exp.config;
    let dep = &exp.deployment;
    let n_users = dep.users.len();
    let target = cfg.push_bits_per_user();
    let w_max = cfg.path_loss.max_bandwidth;
    let noise = cfg.path_loss.noise_power();
    let power = &cfg.power;
    let dt = cfg.slot_duration;

    let mut fade: Vec<SimRng> = (0..n_users)
        .map(|u| trial_rng(exp, trial, stream::OFFPEAK_FADING, u))
        .collect();
    let mut cells: Vec<(SimRng, SimRng, u32)> = (0..cfg.n_cells)
        .map(|c| {
            let mut rt_rng = trial_rng(exp, trial, stream::OFFPEAK_RT, c);
            let n = burned_in_rt(exp, &mut rt_rng);
            (rt_rng, trial_rng(exp, trial, stream::OFFPEAK_SCHEDULER, c), n)
        })
        .collect();

    let mut bits = vec![0.0; n_users];
    let mut done = vec![false; n_users];
    let mut ledger = EnergyLedger::default();
    let mut conflict: Vec<(usize, f64, SlotState)> = Vec::new();

    for t in 0..cfg.offpeak_slots() {
        let frame = (t / cfg.slots_per_frame) as usize;
        for (c, (rt_rng, sched_rng, active)) in cells.iter_mut().enumerate() {
            *active = cfg.rt_traffic.step(*active, rt_rng);
            let res = cfg.rt_traffic.reservation(*active, power.p_max, w_max);
            conflict.clear();
            for &u in &dep.cell_users[c] {
                let h = sample_h_norm_sq(cfg.n_antennas, &mut fade[u]);
                if done[u] || res.w_available <= 0.0 {
                    continue;
                }
                let alpha = dep.users[u].offpeak_context.frame_gains[frame];
                let slot = SlotState::new(alpha * h / noise, &res, w_max);
                let p = allocate_slot_power(&slot, &dep.plans[u].plan, power);
                if p > 0.0 {
                    conflict.push((u, p, slot));
                }
            }
            if conflict.is_empty() {
                continue;
            }
            let (u, p, slot) = conflict[sched_rng.random_range(0..conflict.len())];
            assert!(p <= power.p_max - res.p_rt + 1e-12, "push power exceeds the RT residual");
            let sent = slot_rate(&slot, p) * dt / LN_2;
            let charged = slot_push_power_total(p, &slot, power);
            bits[u] += sent;
            ledger.add_push(charged * dt);
            observe(&SlotEvent {
                slot: t,
                cell: c,
                user: u,
                power: p,
                cap: slot.power_cap(power),
                charged,
                bits: sent,
            });
            if bits[u] >= target {
                done[u] = true;
            }
        }
    }

    let caches = bits
        .iter()
        .zip(&exp.demand.profiles)
        .map(|(&b, profile)| {
            let share = (b / target).min(1.0);
            let n_files = (cfg.cache_files_unicast as f64 * share + 1e-9).floor() as usize;
            profile.top_files(n_files).to_vec()
        })
        .collect();
    let feasible = done.iter().filter(|&&d| d).count() as f64 / n_users.max(1) as f64;
    OffpeakOutcome {
        pushed_bits: bits,
        caches,
        ledger,
        feasible_fraction: feasible,
    }
}

/// Broadcast pre-caching: every user holds the globally most popular files.
/// Its energy is not counted.
pub fn run_offpeak_broadcast(exp: &Experiment) -> Vec<Vec<u32>> {
    let files = exp.config.catalog.top_files(exp.config.cache_files_broadcast);
    vec![files; exp.deployment.users.len()]
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PeakOutcome {
    pub delivered_bits: f64,
    pub n_requests: u64,
    pub n_hits: u64,
    pub delivery_energy: f64,
}

/// Peak-time delivery. Hits are served from the local cache at once; misses
/// queue first-come-first-served at the user's SBS, which serves the head of
/// its queue each slot at the full power and bandwidth left by RT traffic.
/// Bits still in flight when the window closes count as delivered so far.
pub fn run_peak_delivery(
    exp: &Experiment,
    requests: &CellRequests,
    caches: Option<&[Vec<u32>]>,
    trial: u64,
) -> PeakOutcome {
    run_peak_delivery_observed(exp, requests, caches, trial, |_| {})
}

/// As [`run_peak_delivery`], reporting every transmission to `observe`.
pub fn run_peak_delivery_observed(
    exp: &Experiment,
    requests: &CellRequests,
    caches: Option<&[Vec<u32>]>,
    trial: u64,
    mut observe: impl FnMut(&SlotEvent),
) -> PeakOutcome {
    let cfg = &exp.config;
    let dep = &exp.deployment;
    let file_bits = cfg.catalog.file_size_bits;
    let w_max = cfg.path_loss.max_bandwidth;
    let noise = cfg.path_loss.noise_power();
    let power = &cfg.power;
    let dt = cfg.slot_duration;
    let is_hit = |u: usize, file: u32| caches.is_some_and(|c| c[u].contains(&file));

    let mut out = PeakOutcome::default();
    for (c, events) in requests.iter().enumerate() {
        let mut rt_rng = trial_rng(exp, trial, stream::PEAK_RT, c);
        let mut fade = trial_rng(exp, trial, stream::PEAK_FADING, c);
        let mut active = burned_in_rt(exp, &mut rt_rng);
        let mut queue: VecDeque<(usize, f64)> = VecDeque::new();
        let mut next = 0;
        for t in 0..cfg.peak_slots() {
            active = cfg.rt_traffic.step(active, &mut rt_rng);
            let res = cfg.rt_traffic.reservation(active, power.p_max, w_max);
            let h = sample_h_norm_sq(cfg.n_antennas, &mut fade);
            while next < events.len() && events[next].0 == t {
                let (_, u, file) = events[next];
                out.n_requests += 1;
                if is_hit(u, file) {
                    out.n_hits += 1;
                    out.delivered_bits += file_bits;
                } else {
                    queue.push_back((u, file_bits));
                }
                next += 1;
            }
            let Some(head) = queue.front_mut() else {
                continue;
            };
            if res.w_available <= 0.0 {
                continue;
            }
            let u = head.0;
            let frame = (t / cfg.slots_per_frame) as usize;
            let alpha = dep.users[u].peak_context.frame_gains[frame];
            let slot = SlotState::new(alpha * h / noise, &res, w_max);
            let p = slot.power_cap(power);
            let sent = (slot_rate(&slot, p) * dt / LN_2).min(head.1);
            let charged = slot_push_power_total(p, &slot, power);
            head.1 -= sent;
            out.delivered_bits += sent;
            out.delivery_energy += charged * dt;
            observe(&SlotEvent {
                slot: t,
                cell: c,
                user: u,
                power: p,
                cap: slot.power_cap(power),
                charged,
                bits: sent,
            });
            if head.1 <= 0.0 {
                queue.pop_front();
            }
        }
        out.n_requests += (events.len() - next) as u64;
    }
    out
}

pub fn run_trial(exp: &Experiment, strategy: Strategy, trial: u64) -> Result<Metrics> {
    let (caches, ledger, feasible) = match strategy {
        Strategy::Unicast => {
            let off = run_offpeak_unicast(exp, trial);
            (Some(off.caches), off.ledger, off.feasible_fraction)
        }
        Strategy::Broadcast => (Some(run_offpeak_broadcast(exp)), EnergyLedger::default(), 1.0),
        Strategy::Baseline => (None, EnergyLedger::default(), 1.0),
    };
    let requests = exp.requests(trial)?;
    let peak = run_peak_delivery(exp, &requests, caches.as_deref(), trial);
    let max_bits = peak.n_requests as f64 * exp.config.catalog.file_size_bits;
    if peak.delivered_bits > max_bits * (1.0 + 1e-12) {
        return Err(Error::invalid(
            "delivered_bits",
            format!("{} exceeds the {max_bits} bits requested", peak.delivered_bits),
        ));
    }
    let mut ledger = ledger;
    ledger.add_delivery(peak.delivery_energy);
    Ok(Metrics {
        delivered_bits: peak.delivered_bits,
        throughput: peak.delivered_bits / exp.config.delivery.peak_duration,
        energy: ledger,
        total_energy: ledger.total(),
        cache_hit_rate: if peak.n_requests > 0 {
            peak.n_hits as f64 / peak.n_requests as f64
        } else {
            0.0
        },
        plan_feasible_fraction: feasible,
        n_requests: peak.n_requests,
        n_hits: peak.n_hits,
    })
}

/// Runs `n_trials` independent trials of every strategy on a pool of
/// `threads` workers. Trial `i` uses the same random streams for every
/// strategy, and results are reduced in trial order, so the output does not
/// depend on the number of workers.
pub fn monte_carlo(
    exp: &Experiment,
    strategies: &[Strategy],
    n_trials: usize,
    threads: usize,
) -> Result<Vec<StrategySummary>> {
    let per_trial = run_trials(exp, strategies, n_trials, threads)?;
    Ok(strategies
        .iter()
        .enumerate()
        .map(|(k, &s)| {
            let column: Vec<Metrics> = per_trial.iter().map(|row| row[k]).collect();
            StrategySummary::from_trials(s, &column)
        })
        .collect())
}

/// Per-trial metrics, `[trial][strategy]`.
pub fn run_trials(
    exp: &Experiment,
    strategies: &[Strategy],
    n_trials: usize,
    threads: usize,
) -> Result<Vec<Vec<Metrics>>> {
    if n_trials == 0 {
        return Err(Error::invalid("n_trials", "must be >= 1"));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::invalid("threads", e.to_string()))?;
    pool.install(|| {
        (0..n_trials as u64)
            .into_par_iter()
            .map(|t| strategies.iter().map(|&s| run_trial(exp, s, t)).collect())
            .collect()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::ScenarioConfig;

    fn small_config() -> ScenarioConfig {
        let mut c = ScenarioConfig {
            n_cells: 1,
            users_per_cell: 3,
            offpeak_duration: 12.0,
            placement_duration: 120.0,
            occupancy_slots: 20_000,
            n_trials: 4,
            ..Default::default()
        };
        c.delivery.peak_duration = 6.0;
        c.delivery.mean_rate_bps = 2e7;
        c
    }

    #[test]
    fn broadcast_caches_are_catalog_top_files() {
        let exp = Experiment::new(&small_config()).unwrap();
        let caches = run_offpeak_broadcast(&exp);
        assert_eq!(caches.len(), 3);
        assert!(caches.iter().all(|c| *c == (1..=10).collect::<Vec<u32>>()));
    }

    #[test]
    fn baseline_has_no_push_energy_and_bounded_bits() {
        let exp = Experiment::new(&small_config()).unwrap();
        for t in 0..3 {
            let m = run_trial(&exp, Strategy::Baseline, t).unwrap();
            assert_eq!(m.energy.push_energy, 0.0);
            assert_eq!(m.n_hits, 0);
            assert!(m.n_requests > 0);
            assert!(m.delivered_bits <= m.n_requests as f64 * exp.config.catalog.file_size_bits);
        }
    }

    #[test]
    fn no_demand_no_delivery() {
        let mut c = small_config();
        c.delivery.mean_rate_bps = 0.0;
        let exp = Experiment::new(&c).unwrap();
        let m = run_trial(&exp, Strategy::Baseline, 0).unwrap();
        assert_eq!((m.delivered_bits, m.energy.delivery_energy, m.n_requests), (0.0, 0.0, 0));
    }

    #[test]
    fn full_caches_cost_nothing_to_deliver() {
        let exp = Experiment::new(&small_config()).unwrap();
        let caches: Vec<Vec<u32>> = exp.demand.profiles.iter().map(|p| p.subset.clone()).collect();
        let requests = exp.requests(0).unwrap();
        let n: usize = requests.iter().map(Vec::len).sum();
        let out = run_peak_delivery(&exp, &requests, Some(&caches), 0);
        assert_eq!(out.delivery_energy, 0.0);
        assert_eq!(out.n_hits as usize, n);
        assert_eq!(out.delivered_bits, n as f64 * exp.config.catalog.file_size_bits);
    }

    #[test]
    fn push_caches_a_prefix_of_the_top_files() {
        let mut c = small_config();
        c.users_per_cell = 1;
        c.rt_traffic.arrival_rate = 0.0;
        // 30 Mbit over the 12 s window
        c.placement_duration = 12.0 * 2.4e9 / 3e7;
        let exp = Experiment::new(&c).unwrap();
        let top = exp.demand.profiles[0].top_files(10);
        let mut completed = 0;
        for t in 0..6 {
            let off = run_offpeak_unicast(&exp, t);
            let cache = &off.caches[0];
            assert_eq!(cache[..], top[..cache.len()]);
            if off.pushed_bits[0] >= c.push_bits_per_user() {
                assert_eq!(cache[..], top[..]);
                completed += 1;
            }
        }
        assert!(completed > 0);
    }

    #[test]
    fn one_transmission_per_cell_within_the_residual() {
        let exp = Experiment::new(&small_config()).unwrap();
        let mut seen = std::collections::HashSet::new();
        let mut charged = 0.0;
        let off = run_offpeak_unicast_observed(&exp, 1, |e| {
            assert!(seen.insert((e.slot, e.cell)), "two users served in one slot");
            assert!(e.power > 0.0 && e.power <= e.cap + 1e-12);
            charged += e.charged * exp.config.slot_duration;
        });
        assert!(!seen.is_empty());
        assert!((charged - off.ledger.push_energy).abs() <= 1e-9 * off.ledger.push_energy);
    }
}
