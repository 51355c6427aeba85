//! Exit criteria. Prints one PASS/FAIL line per check and exits non-zero if
//! any check fails.

use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use pushsim_cli::{fig2_episodes, run_fig2, run_preset, summarize_fig2, ExperimentPreset, PresetName, RunRecord, FIG2_BITS, FIG2_EPISODES};
use pushsim_core::channel::{sample_h_norm_sq, PathLossParams};
use pushsim_core::context::{scale_for_multiuser, NetworkContext, OccupancyProbs, ScaledContext, UserContext};
use pushsim_core::seed::{rng_for, SimRng};
use pushsim_core::sim::{EpisodeResult, ScenarioConfig, StrategySummary, EFFECTIVE_NOISE_PSD};
use pushsim_core::traffic::RtTrafficModel;
use pushsim_core::waterfill::{
    allocate_slot_power, plan_terms, scaled_kkt_residual, slot_push_power_total, slot_rate, solve_nu_given_ln_gth, solve_plan,
    PowerModel, PushTarget, SlotState, SolverTolerance, WaterfillPlan,
};
use rand::Rng;
use statrs::function::gamma::gamma_ur;

#[derive(Default)]
struct Report {
    failed: usize,
}

impl Report {
    fn check(&mut self, id: &str, ok: bool, detail: impl AsRef<str>) {
        println!("{} {id:<4} {}", if ok { "PASS" } else { "FAIL" }, detail.as_ref());
        if !ok {
            self.failed += 1;
        }
    }
}

fn threads() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

/// `[unicast, broadcast, baseline]` at one sweep value.
fn at(record: &RunRecord, value: f64) -> &[StrategySummary] {
    &record
        .points
        .iter()
        .find(|p| p.sweep_value == value)
        .unwrap_or_else(|| panic!("no point at {value}"))
        .summaries
}

fn fig2(report: &mut Report) -> Vec<EpisodeResult> {
    let config = ScenarioConfig::default();
    let start = Instant::now();
    let (results, failed) = fig2_episodes(&config, FIG2_BITS, FIG2_EPISODES, threads()).expect("fig2 episodes");
    let secs = start.elapsed().as_secs_f64();
    let s = summarize_fig2(&results, FIG2_BITS, failed);
    report.check(
        "1",
        results.len() as u64 >= 100 && s.median_nu_rel_error < 0.05 && s.median_gth_rel_error < 0.15 && secs < 120.0,
        format!(
            "threshold estimates over {} episodes ({failed} failed): median nu error {:.4} (< 0.05), median g_th error {:.4} (< 0.15), {secs:.1} s (< 120)",
            results.len(),
            s.median_nu_rel_error,
            s.median_gth_rel_error
        ),
    );
    results
}

fn oracle_dominance(report: &mut Report, results: &[EpisodeResult]) {
    let n = results.len() as f64;
    let context = results.iter().map(|r| r.context_energy).sum::<f64>() / n;
    let oracle = results.iter().map(|r| r.oracle_energy_matched).sum::<f64>() / n;
    report.check(
        "5",
        context >= oracle && context <= 2.0 * oracle,
        format!("mean push energy over {n} episodes: context {context:.4} J, offline oracle {oracle:.4} J, ratio {:.3} (in [1, 2])", context / oracle),
    );
}

fn figures(report: &mut Report) {
    let dir = tempfile::tempdir().unwrap();
    let base = ScenarioConfig::default();
    let timed = |name| {
        let start = Instant::now();
        let record = run_preset(&ExperimentPreset::new(name, base.clone()), dir.path(), threads()).expect("preset run");
        (record, start.elapsed().as_secs_f64())
    };
    let (rate, t_rate) = timed(PresetName::Fig4a);
    let (beta, t_beta) = timed(PresetName::Fig4b);
    let (size, t_size) = timed(PresetName::Fig5a);

    let s = at(&rate, 1.2e6);
    let (u, b, o) = (&s[0].throughput, &s[1].throughput, &s[2].throughput);
    report.check(
        "2.1",
        u.ci_lo > b.ci_hi && b.ci_lo > o.ci_hi,
        format!(
            "beta 1, 1.2 Mbps throughput: unicast [{:.4e}, {:.4e}] > broadcast [{:.4e}, {:.4e}] > baseline [{:.4e}, {:.4e}]",
            u.ci_lo, u.ci_hi, b.ci_lo, b.ci_hi, o.ci_lo, o.ci_hi
        ),
    );
    let gaps: Vec<f64> = rate
        .points
        .iter()
        .map(|p| p.summaries[0].throughput.mean - p.summaries[1].throughput.mean)
        .collect();
    report.check(
        "2.2",
        gaps.windows(2).all(|w| w[1] >= w[0]),
        format!("unicast minus broadcast throughput over the load grid (Mbit/s): {:.3?}, non-decreasing", gaps.iter().map(|g| g / 1e6).collect::<Vec<_>>()),
    );
    let s = at(&beta, 0.0);
    let (u, b, o) = (&s[0].throughput, &s[1].throughput, &s[2].throughput);
    report.check(
        "2.3",
        b.overlaps(o) && u.mean > o.mean,
        format!(
            "beta 0 throughput: broadcast [{:.4e}, {:.4e}] overlaps baseline [{:.4e}, {:.4e}], unicast {:.4e} > baseline {:.4e}",
            b.ci_lo, b.ci_hi, o.ci_lo, o.ci_hi, u.mean, o.mean
        ),
    );
    report.check("2.4", t_rate + t_beta < 1800.0, format!("throughput sweeps took {:.1} s (< 1800)", t_rate + t_beta));

    let s = at(&size, 100.0);
    let (u, b, o) = (&s[0].total_energy, &s[1].total_energy, &s[2].total_energy);
    report.check(
        "3.1",
        u.mean < b.mean && b.mean < o.mean,
        format!("beta 1, N_s 100 energy: unicast {:.2} < broadcast {:.2} < baseline {:.2} J", u.mean, b.mean, o.mean),
    );
    let savings: Vec<f64> = size
        .points
        .iter()
        .map(|p| {
            let (u, b) = (p.summaries[0].total_energy.mean, p.summaries[1].total_energy.mean);
            (b - u) / b
        })
        .collect();
    report.check(
        "3.2",
        savings.windows(2).all(|w| w[1] <= w[0]),
        format!("saving over broadcast at N_s 50, 100, 200, 400: {savings:.4?}, non-increasing"),
    );
    let s = at(&beta, 0.0);
    let (b, o) = (&s[1].total_energy, &s[2].total_energy);
    report.check(
        "3.3",
        b.overlaps(o),
        format!("beta 0 energy: broadcast [{:.2}, {:.2}] overlaps baseline [{:.2}, {:.2}] J", b.ci_lo, b.ci_hi, o.ci_lo, o.ci_hi),
    );
    report.check("3.4", t_size + t_beta < 1800.0, format!("energy sweeps took {:.1} s (< 1800)", t_size + t_beta));
}

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Exponential integral `E1(x)`, by its power series below 1 and a
/// continued fraction above.
fn e1(x: f64) -> f64 {
    if x <= 1.0 {
        let mut term = 1.0;
        let mut sum = 0.0;
        for k in 1..60 {
            term *= -x / k as f64;
            sum += term / k as f64;
        }
        -EULER_GAMMA - x.ln() - sum
    } else {
        let mut b = x + 1.0;
        let mut c = 1e300;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..500 {
            let a = -((i * i) as f64);
            b += 2.0;
            d = 1.0 / (a * d + b);
            c = b + a / c;
            let step = c * d;
            h *= step;
            if (step - 1.0).abs() < 1e-16 {
                break;
            }
        }
        h * (-x).exp()
    }
}

/// Closed-form expectations for `x ~ Gamma(n, rate θ)` above `c`:
/// `(P[x > c], E[1/x; x > c], E[ln x; x > c])`.
fn gamma_tail(n: u32, theta: f64, c: f64) -> (f64, f64, f64) {
    let d = theta * c;
    let prob = gamma_ur(n as f64, d);
    let inv = theta * if n > 1 { gamma_ur((n - 1) as f64, d) / (n - 1) as f64 } else { e1(d) };
    let ln_y = d.ln() * prob + e1(d) + (1..n).map(|k| gamma_ur(k as f64, d) / k as f64).sum::<f64>();
    (prob, inv, ln_y - theta.ln() * prob)
}

/// Expected push rate (nats/s) and electrical power (W) of a plan, written
/// out from the slot rules rather than taken from the library.
struct ClosedForm<'a> {
    net: &'a ScaledContext,
    thetas: Vec<f64>,
    shape: u32,
    w_max: f64,
    power: PowerModel,
}

impl ClosedForm<'_> {
    /// `(rate, power, wake probability)`
    fn eval(&self, nu: f64, g_th: f64) -> (f64, f64, f64) {
        let cap = self.net.capacity();
        let (mut rate, mut tx, mut wake) = (0.0, 0.0, 0.0);
        for (j, &theta) in self.thetas.iter().enumerate() {
            let share: f64 = (1..cap).map(|l| self.net.prob(j, l) * l as f64 / cap as f64).sum();
            let (p, inv, ln) = gamma_tail(self.shape, theta, 1.0 / nu);
            rate += share * self.w_max * (nu.ln() * p + ln);
            tx += share * (nu * p - inv);
            let q = self.net.prob(j, cap);
            let (p, inv, ln) = gamma_tail(self.shape, theta, g_th.max(1.0 / nu));
            rate += q * self.w_max * (nu.ln() * p + ln);
            tx += q * (nu * p - inv);
            wake += q * p;
        }
        let n = self.thetas.len() as f64;
        let wake = wake / n;
        (rate / n, tx / n / self.power.amp_efficiency + self.power.wake_cost() * wake, wake)
    }
}

fn random_network(rng: &mut SimRng, n_frames: usize, cap: u32) -> ScaledContext {
    let rows = (0..n_frames)
        .map(|_| {
            let w: Vec<f64> = (0..=cap).map(|_| rng.random::<f64>()).collect();
            let total: f64 = w.iter().sum();
            w.iter().map(|x| x / total).collect()
        })
        .collect();
    let users: Vec<u32> = (0..n_frames).map(|_| rng.random_range(1..=10)).collect();
    scale_for_multiuser(&NetworkContext::new(rows).unwrap(), &users).unwrap()
}

fn setup() -> (PowerModel, PathLossParams, RtTrafficModel, SolverTolerance) {
    let params = PathLossParams {
        noise_psd: EFFECTIVE_NOISE_PSD,
        ..Default::default()
    };
    (PowerModel::default(), params, RtTrafficModel::default(), SolverTolerance::default())
}

fn quadrature_vs_monte_carlo(report: &mut Report) {
    let (power, params, rt, tol) = setup();
    let w_max = params.max_bandwidth;
    let cap = rt.capacity;
    let mut rng = rng_for(0xACCE, &[1]);
    let mut worst: f64 = 0.0;
    let mut worst_z: f64 = 0.0;
    let mut contexts = 0;
    while contexts < 20 {
        let ln_g_th = rng.random_range(-2.0..8.0);
        let nu = solve_nu_given_ln_gth(ln_g_th, &power, &tol).unwrap();
        if nu > power.p_max {
            continue;
        }
        contexts += 1;
        let n_frames = rng.random_range(1..=4);
        let net = random_network(&mut rng, n_frames, cap);
        // mean g̃ between 0.5/ν and 30/ν
        let gains: Vec<f64> = (0..n_frames)
            .map(|_| 10f64.powf(rng.random_range(-0.3..1.5)) / nu * params.noise_power() / 4.0)
            .collect();
        let user = UserContext::from_gains(gains, &params, 4).unwrap();
        let plan = WaterfillPlan { nu, ln_g_th };
        let terms = plan_terms(&plan, &net, &user, w_max, true).unwrap();

        let per_frame = 1_000_000 / n_frames;
        // per frame: sums and squared sums of the slot power and rate
        let mut mc = [0.0; 2];
        let mut var = [0.0; 2];
        for j in 0..n_frames {
            let mut acc = [0.0; 4];
            for _ in 0..per_frame {
                let g = params.equivalent_gain_tilde(user.frame_gains[j], sample_h_norm_sq(4, &mut rng));
                let (mut pw, mut rate) = (0.0, 0.0);
                for level in 1..=cap {
                    let slot = SlotState::new(g, &rt.reservation(cap - level, power.p_max, w_max), w_max);
                    let p = allocate_slot_power(&slot, &plan, &power);
                    let q = net.prob(j, level);
                    pw += q * slot_push_power_total(p, &slot, &power);
                    rate += q * slot_rate(&slot, p);
                }
                acc[0] += pw;
                acc[1] += pw * pw;
                acc[2] += rate;
                acc[3] += rate * rate;
            }
            let m = per_frame as f64;
            let f = n_frames as f64;
            for k in 0..2 {
                let mean = acc[2 * k] / m;
                mc[k] += mean / f;
                var[k] += (acc[2 * k + 1] / m - mean * mean) / m / (f * f);
            }
        }
        let want = [terms.push_power(&power), terms.rate];
        for k in 0..2 {
            worst = worst.max((want[k] - mc[k]).abs() / mc[k]);
            worst_z = worst_z.max((want[k] - mc[k]).abs() / var[k].sqrt());
        }
    }
    report.check(
        "4a",
        worst < 5e-3,
        format!("expected power and rate vs 10^6-sample Monte Carlo on 20 contexts: worst relative gap {worst:.2e} (< 5e-3), at most {worst_z:.2} standard errors"),
    );
}

fn grid_search_oracle(report: &mut Report) -> Vec<f64> {
    let (power, params, rt, tol) = setup();
    let w_max = params.max_bandwidth;
    let mut rng = rng_for(0xACCE, &[2]);
    let mut kkt = Vec::new();
    let mut worst = (0.0f64, 0.0f64);
    let mut instances = 0;
    let mut skipped = 0;
    while instances < 10 {
        let n_frames = rng.random_range(1..=3);
        let net = random_network(&mut rng, n_frames, rt.capacity);
        let gains: Vec<f64> = (0..n_frames).map(|_| params.large_scale_gain(rng.random_range(5.0..40.0))).collect();
        let user = UserContext::from_gains(gains, &params, 4).unwrap();
        let oracle = ClosedForm {
            net: &net,
            thetas: user.frame_gains.iter().map(|a| params.noise_power() / a).collect(),
            shape: 4,
            w_max,
            power,
        };
        let goal = rng.random_range(0.05..0.6) * oracle.eval(power.p_max, 1e-300).0;
        let target = PushTarget {
            bits: goal * (100 * n_frames) as f64 * 0.01 / std::f64::consts::LN_2,
            n_slots: 100 * n_frames as u32,
            slot_duration: 0.01,
        };
        let Ok(sol) = solve_plan(&net, &user, &target, &power, w_max, &tol) else {
            skipped += 1;
            continue;
        };

        let means = oracle.thetas.iter().map(|t| (4.0 / t).ln());
        let g_lo = means.clone().fold(f64::INFINITY, f64::min) - 4.0;
        let g_hi = means.fold(f64::NEG_INFINITY, f64::max) + 3.0;
        let (nu_lo, nu_hi) = ((power.p_max * 1e-3).ln(), power.p_max.ln());
        let dg = (g_hi - g_lo) / 199.0;
        let dnu = (nu_hi - nu_lo) / 199.0;
        if sol.nu_above_p_max || !(g_lo..=g_hi).contains(&sol.plan.ln_g_th) || !(nu_lo..=nu_hi).contains(&sol.plan.nu.ln()) {
            skipped += 1;
            continue;
        }

        // Cheapest rate-feasible ν in each g_th column, then a golden-section
        // refinement around the best column.
        let column = |ln_g: f64| -> Option<(f64, f64)> {
            let g = ln_g.exp();
            let rate = |ln_nu: f64| oracle.eval(ln_nu.exp(), g).0;
            let k = (0..200).find(|&k| rate(nu_lo + k as f64 * dnu) >= goal)?;
            let (mut lo, mut hi) = (nu_lo + (k as f64 - 1.0) * dnu, nu_lo + k as f64 * dnu);
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                if rate(mid) >= goal {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            Some((oracle.eval(hi.exp(), g).1, hi))
        };
        let best = (0..200)
            .filter_map(|i| column(g_lo + i as f64 * dg).map(|c| (i, c.0)))
            .min_by(|x, y| x.1.total_cmp(&y.1))
            .unwrap()
            .0;
        let (mut a, mut b) = (g_lo + (best.max(1) - 1) as f64 * dg, g_lo + (best + 1).min(199) as f64 * dg);
        let energy = |lg: f64| column(lg).map_or(f64::INFINITY, |c| c.0);
        let phi = 0.5 * (5f64.sqrt() - 1.0);
        for _ in 0..80 {
            let (x1, x2) = (b - phi * (b - a), a + phi * (b - a));
            if energy(x1) <= energy(x2) {
                b = x2;
            } else {
                a = x1;
            }
        }
        let ln_g_opt = 0.5 * (a + b);
        let ln_nu_opt = column(ln_g_opt).unwrap().1;
        if oracle.eval(ln_nu_opt.exp(), ln_g_opt.exp()).2 < 1e-6 {
            // idle slots play no part and g_th is not identifiable
            skipped += 1;
            continue;
        }
        instances += 1;
        kkt.push(sol.kkt_residual);
        worst.0 = worst.0.max((sol.plan.ln_g_th - ln_g_opt).abs() / dg);
        worst.1 = worst.1.max((sol.plan.nu.ln() - ln_nu_opt).abs() / dnu);
    }
    report.check(
        "4b",
        worst.0 <= 1.0 && worst.1 <= 1.0,
        format!(
            "plan vs 200x200 grid search on 10 instances ({skipped} redrawn): worst offset {:.1e} g_th cells, {:.1e} nu cells (<= 1)",
            worst.0, worst.1
        ),
    );
    kkt
}

fn kkt_and_monotonicity(report: &mut Report, mut residuals: Vec<f64>) {
    let (power, _, _, tol) = setup();
    let grid: Vec<f64> = (0..100).map(|i| -6.0 + 16.0 * i as f64 / 99.0).collect();
    let nus: Vec<f64> = grid.iter().map(|&g| solve_nu_given_ln_gth(g, &power, &tol).unwrap()).collect();
    residuals.extend(
        grid.iter()
            .zip(&nus)
            .map(|(&ln_g_th, &nu)| scaled_kkt_residual(&WaterfillPlan { nu, ln_g_th }, &power)),
    );
    let worst = residuals.iter().fold(0.0f64, |m, r| m.max(r.abs()));
    report.check("4c", worst < 1e-6, format!("scaled KKT residual over {} solutions: {worst:.2e} (< 1e-6)", residuals.len()));
    report.check(
        "4d",
        nus.windows(2).all(|w| w[1] < w[0]),
        format!("nu(g_th) strictly decreasing on 100 points from {:.4e} to {:.4e}", nus[0], nus[99]),
    );
}

fn fuzz_slot_power(report: &mut Report) {
    let (power, _, rt, _) = setup();
    let mut rng = rng_for(0xACCE, &[3]);
    let mut bad = 0;
    for _ in 0..1_000_000 {
        let res = rt.reservation(rng.random_range(0..=rt.capacity), power.p_max, 10e6);
        let slot = SlotState::new(10f64.powf(rng.random_range(-4.0..6.0)), &res, 10e6);
        let plan = WaterfillPlan {
            nu: 10f64.powf(rng.random_range(-5.0..1.0)),
            ln_g_th: rng.random_range(-10.0..15.0),
        };
        let p = allocate_slot_power(&slot, &plan, &power);
        if !(p >= 0.0 && p <= power.p_max - res.p_rt) {
            bad += 1;
        }
    }
    report.check("4e", bad == 0, format!("slot power in [0, p_max - p_RT] on 10^6 fuzzed slots: {bad} violations"));
}

fn same_bytes(a: &Path, b: &Path, name: &str) -> bool {
    fs::read(a.join(name)).unwrap() == fs::read(b.join(name)).unwrap()
}

fn determinism(report: &mut Report) {
    let dirs: Vec<_> = (0..3).map(|_| tempfile::tempdir().unwrap()).collect();
    let mut base = ScenarioConfig::default();
    base.n_trials = 6;
    let mut preset = ExperimentPreset::new(PresetName::Fig4a, base.clone());
    preset.sweep.as_mut().unwrap().values.truncate(2);
    for (dir, t) in dirs.iter().zip([1, 4, 4]) {
        run_preset(&preset, dir.path(), t).unwrap();
        run_fig2(&base, dir.path(), FIG2_BITS, 8, t).unwrap();
    }
    let ok = ["fig4a.csv", "fig2.csv", "fig2_cdf.csv"]
        .iter()
        .all(|f| same_bytes(dirs[0].path(), dirs[1].path(), f) && same_bytes(dirs[1].path(), dirs[2].path(), f));
    report.check("6", ok, "fig4a and fig2 CSVs identical across reruns and 1 vs 4 threads");
}

/// Optional section filter: `cargo test --test acceptance -- solver fig2`.
fn main() -> ExitCode {
    let only: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let wanted = |s: &str| only.is_empty() || only.iter().any(|o| o == s);
    let mut report = Report::default();
    println!("acceptance on {} threads", threads());

    if wanted("solver") {
        let start = Instant::now();
        quadrature_vs_monte_carlo(&mut report);
        let residuals = grid_search_oracle(&mut report);
        kkt_and_monotonicity(&mut report, residuals);
        fuzz_slot_power(&mut report);
        let secs = start.elapsed().as_secs_f64();
        report.check("4", secs < 300.0, format!("solver checks took {secs:.1} s (< 300)"));
    }
    if wanted("fig2") {
        let episodes = fig2(&mut report);
        oracle_dominance(&mut report, &episodes);
    }
    if wanted("determinism") {
        determinism(&mut report);
    }
    if wanted("figures") {
        figures(&mut report);
    }

    println!("{} check(s) failed", report.failed);
    if report.failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
