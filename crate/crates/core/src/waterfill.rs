//! Multi-level water-filling for pushing.
//!
//! A plan `(ν, g_th)` sets the power of every slot: occupied slots get
//! `(W/W_max)·ν − 1/g`, idle slots the same but only when `g ≥ g_th`, since
//! waking a sleeping SBS costs circuit power. In terms of the full-band gain
//! `g̃ = (W/W_max)·g` this reads `(W/W_max)·(ν − 1/g̃)` with rate
//! `W·ln(ν·g̃)`, which is what the expected-value functionals integrate.
//!
//! Thresholds are carried as `ln g_th`: at high SNR the optimal threshold
//! can exceed the range of an `f64`.

use serde::{Deserialize, Serialize};

use crate::channel::GammaChannelDist;
use crate::context::{OccupancyProbs, UserContext};
use crate::error::{Error, Result};
use crate::quadrature::{integrate_to_infinity, Tolerance};
use crate::traffic::RtReservation;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PowerModel {
    pub amp_efficiency: f64,
    /// W
    pub p_active: f64,
    /// W
    pub p_sleep: f64,
    /// W
    pub p_max: f64,
}

impl Default for PowerModel {
    fn default() -> Self {
        PowerModel {
            amp_efficiency: 0.08,
            p_active: 3.0,
            p_sleep: 1.0,
            p_max: 0.2,
        }
    }
}

impl PowerModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.amp_efficiency > 0.0 && self.amp_efficiency <= 1.0) {
            return Err(Error::invalid("power.amp_efficiency", "must lie in (0, 1]"));
        }
        if !(self.p_sleep >= 0.0 && self.p_active > self.p_sleep) {
            return Err(Error::invalid("power.p_active", "need p_active > p_sleep >= 0"));
        }
        if !(self.p_max > 0.0 && self.p_max.is_finite()) {
            return Err(Error::invalid("power.p_max", "must be > 0"));
        }
        Ok(())
    }

    /// Extra circuit power of an awake SBS, `p_act − p_sle`.
    pub fn wake_cost(&self) -> f64 {
        self.p_active - self.p_sleep
    }

    /// Wake cost in transmit-power units, `ξ·(p_act − p_sle)`.
    pub fn scaled_wake_cost(&self) -> f64 {
        self.amp_efficiency * self.wake_cost()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlotState {
    /// Gain at the available bandwidth, 1/W.
    pub g: f64,
    /// Hz
    pub w: f64,
    pub w_max: f64,
    /// W
    pub p_rt: f64,
    pub idle: bool,
}

impl SlotState {
    pub fn new(g_tilde: f64, reservation: &RtReservation, w_max: f64) -> SlotState {
        let w = reservation.w_available;
        SlotState {
            g: if w > 0.0 { g_tilde * w_max / w } else { 0.0 },
            w,
            w_max,
            p_rt: reservation.p_rt,
            idle: reservation.idle(),
        }
    }

    pub fn power_cap(&self, power: &PowerModel) -> f64 {
        (power.p_max - self.p_rt).max(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaterfillPlan {
    /// W
    pub nu: f64,
    /// `ln g_th`, `+∞` when idle slots are never used.
    pub ln_g_th: f64,
}

impl WaterfillPlan {
    pub fn new(nu: f64, g_th: f64) -> Self {
        WaterfillPlan {
            nu,
            ln_g_th: g_th.ln(),
        }
    }

    pub fn g_th(&self) -> f64 {
        self.ln_g_th.exp()
    }

    /// Transmit whenever there is anything to gain, at up to `p_max`.
    pub fn saturating(p_max: f64) -> Self {
        WaterfillPlan {
            nu: p_max,
            ln_g_th: -p_max.ln(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PushTarget {
    pub bits: f64,
    pub n_slots: u32,
    /// s
    pub slot_duration: f64,
}

impl PushTarget {
    pub fn validate(&self) -> Result<()> {
        if !(self.bits > 0.0 && self.bits.is_finite()) {
            return Err(Error::invalid("target.bits", "must be > 0"));
        }
        if self.n_slots == 0 {
            return Err(Error::invalid("target.n_slots", "must be >= 1"));
        }
        if !(self.slot_duration > 0.0) {
            return Err(Error::invalid("target.slot_duration", "must be > 0"));
        }
        Ok(())
    }

    /// Required average rate in nats/s.
    pub fn rate_nats(&self) -> f64 {
        self.bits * std::f64::consts::LN_2 / (self.n_slots as f64 * self.slot_duration)
    }
}

pub fn allocate_slot_power(slot: &SlotState, plan: &WaterfillPlan, power: &PowerModel) -> f64 {
    if !(slot.w > 0.0 && slot.g > 0.0) {
        return 0.0;
    }
    if slot.idle && slot.g.ln() < plan.ln_g_th {
        return 0.0;
    }
    let p = slot.w / slot.w_max * plan.nu - 1.0 / slot.g;
    if p > 0.0 {
        p.min(slot.power_cap(power))
    } else {
        0.0
    }
}

/// Achievable rate in nats/s.
pub fn slot_rate(slot: &SlotState, p: f64) -> f64 {
    if p > 0.0 && slot.w > 0.0 {
        slot.w * (slot.g * p).ln_1p()
    } else {
        0.0
    }
}

/// Electrical power drawn for pushing: amplifier input plus the wake cost
/// when an otherwise sleeping SBS transmits.
pub fn slot_push_power_total(p: f64, slot: &SlotState, power: &PowerModel) -> f64 {
    if p > 0.0 {
        let wake = if slot.idle { power.wake_cost() } else { 0.0 };
        p / power.amp_efficiency + wake
    } else {
        0.0
    }
}

pub fn kkt_residual(nu: f64, g_th: f64, power: &PowerModel) -> f64 {
    kkt_residual_ln(nu, g_th.ln(), power)
}

/// `(ν − 1/g_th) + ξ·Δp − ν·ln(ν·g_th)`, written with `u = ln(ν·g_th)` so
/// that it stays finite for any representable `ν` and `ln g_th`.
pub fn kkt_residual_ln(nu: f64, ln_g_th: f64, power: &PowerModel) -> f64 {
    let u = nu.ln() + ln_g_th;
    nu * (1.0 - u - (-u).exp()) + power.scaled_wake_cost()
}

/// The residual relative to the wake cost it balances (or to `ν` when the
/// wake cost is zero).
pub fn scaled_kkt_residual(plan: &WaterfillPlan, power: &PowerModel) -> f64 {
    let c = power.scaled_wake_cost();
    let scale = if c > 0.0 { c } else { plan.nu };
    kkt_residual_ln(plan.nu, plan.ln_g_th, power) / scale
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverTolerance {
    /// Bracket width on `ν`, relative.
    pub nu_rel: f64,
    /// Bracket width on `g_th`, relative.
    pub gth_rel: f64,
    /// Accepted relative miss of the rate target.
    pub rate_rel: f64,
    pub max_iter: usize,
}

impl Default for SolverTolerance {
    fn default() -> Self {
        SolverTolerance {
            nu_rel: 1e-13,
            gth_rel: 1e-10,
            rate_rel: 1e-9,
            max_iter: 200,
        }
    }
}

pub fn solve_nu_given_gth(g_th: f64, power: &PowerModel, tol: &SolverTolerance) -> Result<f64> {
    if !(g_th > 0.0) {
        return Err(Error::invalid("g_th", "must be > 0"));
    }
    solve_nu_given_ln_gth(g_th.ln(), power, tol)
}

/// Root of the KKT equation in `ν > 1/g_th`. Bisects on `u = ln(ν·g_th)`,
/// i.e. on `ln ν`, so the bracket width is a relative width in `ν`.
pub fn solve_nu_given_ln_gth(ln_g_th: f64, power: &PowerModel, tol: &SolverTolerance) -> Result<f64> {
    if ln_g_th.is_nan() || ln_g_th == f64::NEG_INFINITY {
        return Err(Error::invalid("g_th", "must be > 0"));
    }
    if ln_g_th == f64::INFINITY {
        return Ok(0.0);
    }
    let c = power.scaled_wake_cost();
    if c == 0.0 {
        return Ok((-ln_g_th).exp());
    }
    let resid = |u: f64| (u - ln_g_th).exp() * (1.0 - u - (-u).exp()) + c;
    assert!(resid(0.0) >= 0.0, "KKT residual negative at the lower bracket");

    let mut lo = 0.0;
    let mut hi = 1.0;
    let mut grown = 0;
    while resid(hi) > 0.0 {
        lo = hi;
        hi *= 2.0;
        grown += 1;
        if grown > tol.max_iter {
            return Err(Error::Bisection(format!(
                "no sign change for ln g_th = {ln_g_th} (nu underflows)"
            )));
        }
    }
    for _ in 0..tol.max_iter {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= tol.nu_rel || mid <= lo || mid >= hi {
            break;
        }
        if resid(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((0.5 * (lo + hi) - ln_g_th).exp())
}

/// Integrals over `g̃ ∈ [lower, ∞)` for one frame's gain law, with
/// `lower ≥ 1/ν`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
struct TailTerms {
    /// `Pr(g̃ ≥ lower)`
    prob: f64,
    /// `∫ (ν − 1/g̃) f dg̃`
    power: f64,
    /// `∫ ln(ν·g̃) f dg̃`
    rate: f64,
}

const QUAD_TOL: Tolerance = Tolerance {
    abs: 1e-300,
    rel: 1e-11,
    max_intervals: 400,
};

/// Works in the standardised variable `x = r·g̃`. Both integrands are split
/// so the quadrature only sees parts vanishing at the lower limit:
/// `ln(x/a₀) = ln(a/a₀) + ln(x/a)` and `1 − a₀/x = (1 − ρ) + ρ(1 − a/x)` with
/// `ρ = a₀/a`.
fn tail_terms(dist: &GammaChannelDist, ln_lower: f64, nu: f64, with_power: bool) -> Result<TailTerms> {
    let ln_r = dist.rate_scale.ln();
    let ln_a = ln_r + ln_lower;
    let ln_a0 = ln_r - nu.ln();
    debug_assert!(ln_a >= ln_a0 - 1e-12);
    let a = ln_a.exp();
    let shape = dist.shape as f64;
    // Beyond this the density has underflowed everywhere past `a`.
    if a > shape + 800.0 {
        return Ok(TailTerms::default());
    }
    let prob = dist.std_sf(a);
    let scale = (shape - a).max(1.0);

    let log_part = integrate_to_infinity(
        |x| {
            let f = dist.std_pdf(x);
            if f == 0.0 {
                0.0
            } else {
                (x / a).ln() * f
            }
        },
        a,
        scale,
        QUAD_TOL,
    )?;
    let rate = (ln_a - ln_a0).max(0.0) * prob + log_part.value;

    let power = if with_power {
        let rho = (ln_a0 - ln_a).exp().min(1.0);
        let frac = integrate_to_infinity(
            |x| {
                let f = dist.std_pdf(x);
                if f == 0.0 {
                    0.0
                } else {
                    (1.0 - a / x) * f
                }
            },
            a,
            scale,
            QUAD_TOL,
        )?;
        nu * ((1.0 - rho) * prob + rho * frac.value)
    } else {
        0.0
    };
    Ok(TailTerms { prob, power, rate })
}

/// Frame-averaged expectations of one plan.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PlanTerms {
    /// Transmit power in occupied slots, W.
    pub occupied_transmit: f64,
    /// Transmit power in idle slots, W.
    pub idle_transmit: f64,
    /// Probability that a slot wakes an idle SBS.
    pub wake_probability: f64,
    /// nats/s
    pub rate: f64,
}

impl PlanTerms {
    /// Expected electrical push power per slot.
    pub fn push_power(&self, power: &PowerModel) -> f64 {
        (self.occupied_transmit + self.idle_transmit) / power.amp_efficiency
            + power.wake_cost() * self.wake_probability
    }
}

pub fn plan_terms<C: OccupancyProbs + ?Sized>(
    plan: &WaterfillPlan,
    net: &C,
    user: &UserContext,
    w_max: f64,
    with_power: bool,
) -> Result<PlanTerms> {
    let n_frames = user.n_frames();
    if net.n_frames() < n_frames {
        return Err(Error::invalid(
            "net",
            format!("{} occupancy frames for {n_frames} user frames", net.n_frames()),
        ));
    }
    if !(plan.nu > 0.0) {
        return Ok(PlanTerms::default());
    }
    let cap = net.capacity();
    let ln_on = -plan.nu.ln();
    let ln_idle = plan.ln_g_th.max(ln_on);
    let mut acc = PlanTerms::default();
    for (j, dist) in user.channel_dists.iter().enumerate() {
        let occupied_weight: f64 = (1..cap)
            .map(|l| net.prob(j, l) * l as f64 / cap as f64)
            .sum();
        let idle_weight = net.prob(j, cap);
        if occupied_weight > 0.0 {
            let t = tail_terms(dist, ln_on, plan.nu, with_power)?;
            acc.occupied_transmit += occupied_weight * t.power;
            acc.rate += occupied_weight * w_max * t.rate;
        }
        if idle_weight > 0.0 && ln_idle.is_finite() {
            let t = tail_terms(dist, ln_idle, plan.nu, with_power)?;
            acc.idle_transmit += idle_weight * t.power;
            acc.wake_probability += idle_weight * t.prob;
            acc.rate += idle_weight * w_max * t.rate;
        }
    }
    let n = n_frames as f64;
    acc.occupied_transmit /= n;
    acc.idle_transmit /= n;
    acc.wake_probability /= n;
    acc.rate /= n;
    Ok(acc)
}

/// Expected electrical push power per slot, W.
pub fn expected_push_power<C: OccupancyProbs + ?Sized>(
    plan: &WaterfillPlan,
    net: &C,
    user: &UserContext,
    power: &PowerModel,
    w_max: f64,
) -> Result<f64> {
    Ok(plan_terms(plan, net, user, w_max, true)?.push_power(power))
}

/// Expected push rate per slot, nats/s.
pub fn expected_rate<C: OccupancyProbs + ?Sized>(
    plan: &WaterfillPlan,
    net: &C,
    user: &UserContext,
    w_max: f64,
) -> Result<f64> {
    Ok(plan_terms(plan, net, user, w_max, false)?.rate)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanSolution {
    pub plan: WaterfillPlan,
    /// The unclipped analysis assumed by the planner does not hold.
    pub nu_above_p_max: bool,
    /// `(expected_rate − target)/target`
    pub rate_residual: f64,
    pub kkt_residual: f64,
    pub outer_iterations: usize,
}

/// Quantile of the frame-averaged gain law.
fn mixture_quantile(user: &UserContext, q: f64) -> f64 {
    let cdf = |ln_g: f64| {
        let g = ln_g.exp();
        user.channel_dists.iter().map(|d| d.cdf(g)).sum::<f64>() / user.n_frames() as f64
    };
    let means = user.channel_dists.iter().map(|d| d.mean().ln());
    let mut lo = means.clone().fold(f64::INFINITY, f64::min) - 40.0;
    let mut hi = means.fold(f64::NEG_INFINITY, f64::max) + 10.0;
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if cdf(mid) < q {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Two-tier bisection: the outer tier searches `ln g_th` so that the
/// expected rate meets the target, the inner tier gives `ν(g_th)` from the
/// KKT equation. The expected rate decreases in `g_th` along that curve.
pub fn solve_plan<C: OccupancyProbs + ?Sized>(
    net: &C,
    user: &UserContext,
    target: &PushTarget,
    power: &PowerModel,
    w_max: f64,
    tol: &SolverTolerance,
) -> Result<PlanSolution> {
    target.validate()?;
    power.validate()?;
    let goal = target.rate_nats();
    let eval = |ln_g: f64| -> Result<(WaterfillPlan, f64)> {
        let nu = solve_nu_given_ln_gth(ln_g, power, tol)?;
        let plan = WaterfillPlan { nu, ln_g_th: ln_g };
        Ok((plan, expected_rate(&plan, net, user, w_max)? - goal))
    };

    let mut lo = mixture_quantile(user, 1e-3);
    let mut hi = mixture_quantile(user, 1.0 - 1e-3).max(lo + 1.0);

    let mut step = 1.0;
    let mut f_lo = eval(lo)?.1;
    let mut tries = 0;
    while f_lo < 0.0 {
        hi = lo;
        lo -= step;
        step *= 2.0;
        tries += 1;
        if tries > 64 {
            return Err(Error::Infeasible(format!(
                "expected rate stays below {goal:.6e} nats/s even at g_th = exp({lo:.3})"
            )));
        }
        f_lo = eval(lo)?.1;
    }
    step = 1.0;
    tries = 0;
    while eval(hi)?.1 > 0.0 {
        lo = hi;
        hi += step;
        step *= 2.0;
        tries += 1;
        if tries > 64 {
            return Err(Error::Bisection(format!(
                "expected rate stays above target up to g_th = exp({hi:.3})"
            )));
        }
    }

    let mut best: Option<(WaterfillPlan, f64)> = None;
    let mut iterations = 0;
    for _ in 0..tol.max_iter {
        iterations += 1;
        let mid = 0.5 * (lo + hi);
        let (plan, f) = eval(mid)?;
        if best.is_none_or(|(_, bf)| f.abs() < bf.abs()) {
            best = Some((plan, f));
        }
        if f.abs() <= tol.rate_rel * goal || hi - lo <= tol.gth_rel || mid <= lo || mid >= hi {
            break;
        }
        if f > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (plan, f) = best.expect("at least one outer iteration");
    Ok(PlanSolution {
        plan,
        nu_above_p_max: plan.nu > power.p_max,
        rate_residual: f / goal,
        kkt_residual: scaled_kkt_residual(&plan, power),
        outer_iterations: iterations,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleSolution {
    pub plan: WaterfillPlan,
    pub powers: Vec<f64>,
    /// J, transmit over `ξ` plus wake costs.
    pub energy: f64,
    pub idle_slots_used: usize,
}

/// Per-slot pieces of the total rate as a function of `y = ln ν`, which is
/// piecewise linear: zero below `on`, `w·(y + ln(a·g))` in between, and
/// constant once the power cap binds at `clip`.
#[derive(Debug, Clone, Copy)]
struct RatePiece {
    index: usize,
    w: f64,
    /// `W/W_max`
    a: f64,
    inv_g: f64,
    ln_ag: f64,
    on: f64,
    clip: f64,
    capped_rate: f64,
}

impl RatePiece {
    fn new(index: usize, s: &SlotState, power: &PowerModel) -> Option<Self> {
        let cap = s.power_cap(power);
        if !(s.w > 0.0 && s.g > 0.0 && cap > 0.0) {
            return None;
        }
        let a = s.w / s.w_max;
        let ln_ag = (a * s.g).ln();
        Some(RatePiece {
            index,
            w: s.w,
            a,
            inv_g: 1.0 / s.g,
            ln_ag,
            on: -ln_ag,
            clip: ((cap + 1.0 / s.g) / a).ln(),
            capped_rate: s.w * (s.g * cap).ln_1p(),
        })
    }

    /// (rate, d rate / dy)
    fn rate(&self, y: f64) -> (f64, f64) {
        if y <= self.on {
            (0.0, 0.0)
        } else if y >= self.clip {
            (self.capped_rate, 0.0)
        } else {
            (self.w * (y + self.ln_ag), self.w)
        }
    }

    fn power(&self, y: f64, cap: f64) -> f64 {
        if y <= self.on {
            0.0
        } else {
            (self.a * y.exp() - self.inv_g).clamp(0.0, cap)
        }
    }
}

/// Finds `y = ln ν` with `Σ rate(y) = need` by Newton steps kept inside a
/// sign-change bracket. Returns `None` when the capped total falls short.
fn solve_water_level(pieces: &[RatePiece], need: f64, start: f64) -> Option<f64> {
    let total = |y: f64| {
        pieces.iter().fold((-need, 0.0), |(r, d), p| {
            let (pr, pd) = p.rate(y);
            (r + pr, d + pd)
        })
    };
    let mut lo = pieces.iter().map(|p| p.on).fold(f64::INFINITY, f64::min);
    let mut hi = pieces.iter().map(|p| p.clip).fold(f64::NEG_INFINITY, f64::max);
    if !(lo.is_finite() && hi.is_finite()) {
        return None;
    }
    let (f_hi, _) = total(hi);
    if f_hi < 0.0 {
        return None;
    }
    let tol = 1e-13 * need;
    let mut y = if start > lo && start < hi { start } else { 0.5 * (lo + hi) };
    for _ in 0..400 {
        let (f, d) = total(y);
        if f.abs() <= tol {
            return Some(y);
        }
        if f < 0.0 {
            lo = y;
        } else {
            hi = y;
        }
        let newton = if d > 0.0 { y - f / d } else { f64::NAN };
        let next = if newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if next == y || hi - lo <= 1e-15 * (1.0 + y.abs()) {
            return Some(if f < 0.0 { hi } else { y });
        }
        y = next;
    }
    Some(hi)
}

/// Exhaustive threshold search with full knowledge of every slot. Idle slots
/// are admitted in descending gain order; for each count the water level is
/// solved exactly and the total energy compared. The search stops once the
/// wake cost alone exceeds the best energy found, or once the next idle slot
/// would not be powered at the current level.
pub fn solve_offline_oracle(
    slots: &[SlotState],
    target: &PushTarget,
    power: &PowerModel,
) -> Result<OracleSolution> {
    target.validate()?;
    power.validate()?;
    let dt = target.slot_duration;
    let need = target.bits * std::f64::consts::LN_2 / dt;
    let wake_energy = dt * power.wake_cost();

    let mut pieces: Vec<RatePiece> = slots
        .iter()
        .enumerate()
        .filter(|(_, s)| !s.idle)
        .filter_map(|(i, s)| RatePiece::new(i, s, power))
        .collect();
    let mut idle: Vec<(usize, &SlotState)> = slots
        .iter()
        .enumerate()
        .filter(|(_, s)| s.idle && s.g > 0.0 && s.w > 0.0)
        .collect();
    idle.sort_by(|x, y| y.1.g.total_cmp(&x.1.g).then(x.0.cmp(&y.0)));

    let energy_at = |pieces: &[RatePiece], y: f64| -> (f64, usize) {
        let mut e = 0.0;
        let mut woken = 0;
        for p in pieces {
            let s = &slots[p.index];
            let pw = p.power(y, s.power_cap(power));
            if pw > 0.0 {
                e += dt * pw / power.amp_efficiency;
                if s.idle {
                    woken += 1;
                }
            }
        }
        (e + woken as f64 * wake_energy, woken)
    };

    let mut best: Option<(f64, f64, usize)> = None; // (energy, y, n)
    let mut y_prev = f64::NAN;
    for n in 0..=idle.len() {
        if n > 0 {
            if let Some((best_e, _, _)) = best {
                if n as f64 * wake_energy >= best_e {
                    break;
                }
            }
            let (i, s) = idle[n - 1];
            if y_prev.is_finite() && s.g * y_prev.exp() <= 1.0 {
                break;
            }
            match RatePiece::new(i, s, power) {
                Some(p) => pieces.push(p),
                None => continue,
            }
        }
        if pieces.is_empty() {
            continue;
        }
        let Some(y) = solve_water_level(&pieces, need, y_prev) else {
            continue;
        };
        y_prev = y;
        let (e, _) = energy_at(&pieces, y);
        if best.is_none_or(|(be, _, _)| e < be) {
            best = Some((e, y, n));
        }
    }

    let (energy, y, n) = best.ok_or_else(|| {
        Error::Infeasible(format!(
            "{} bits do not fit in {} slots even at full power",
            target.bits,
            slots.len()
        ))
    })?;
    let mut powers = vec![0.0; slots.len()];
    let mut used = 0;
    for s in slots.iter().enumerate().filter(|(_, s)| !s.idle) {
        if let Some(p) = RatePiece::new(s.0, s.1, power) {
            powers[s.0] = p.power(y, s.1.power_cap(power));
        }
    }
    for &(i, s) in &idle[..n] {
        if let Some(p) = RatePiece::new(i, s, power) {
            powers[i] = p.power(y, s.power_cap(power));
            used += usize::from(powers[i] > 0.0);
        }
    }
    let ln_g_th = if n == 0 { f64::INFINITY } else { idle[n - 1].1.g.ln() };
    Ok(OracleSolution {
        plan: WaterfillPlan { nu: y.exp(), ln_g_th },
        powers,
        energy,
        idle_slots_used: used,
    })
}
