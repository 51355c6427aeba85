//! Path loss, Rayleigh fading and user mobility.
//!
//! With maximum-ratio transmission the beamforming gain collapses into
//! `‖h‖²`, the sum of `N_t` unit-mean exponentials. The equivalent gain at
//! full bandwidth, `g̃ = α‖h‖²/(N₀·W_max)`, is therefore Gamma distributed
//! with shape `N_t` and rate `N₀·W_max/α`.

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layout::{Hexagon, Point};

/// Noise power spectral density of -165 dBm/Hz, in W/Hz.
pub const DEFAULT_NOISE_PSD: f64 = 3.162_277_660_168_379_5e-20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathLossParams {
    pub intercept_db: f64,
    pub slope_db_per_decade: f64,
    /// W/Hz
    pub noise_psd: f64,
    /// Hz
    pub max_bandwidth: f64,
}

impl Default for PathLossParams {
    fn default() -> Self {
        PathLossParams {
            intercept_db: 30.5,
            slope_db_per_decade: 36.7,
            noise_psd: DEFAULT_NOISE_PSD,
            max_bandwidth: 10e6,
        }
    }
}

impl PathLossParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.slope_db_per_decade > 0.0) {
            return Err(Error::invalid("path_loss.slope_db_per_decade", "must be > 0"));
        }
        if !(self.noise_psd > 0.0) {
            return Err(Error::invalid("path_loss.noise_psd", "must be > 0"));
        }
        if !(self.max_bandwidth > 0.0) {
            return Err(Error::invalid("path_loss.max_bandwidth", "must be > 0"));
        }
        if !self.intercept_db.is_finite() {
            return Err(Error::invalid("path_loss.intercept_db", "must be finite"));
        }
        Ok(())
    }

    /// Path loss in dB; distances below 1 m are clamped to 1 m.
    pub fn path_loss_db(&self, distance: f64) -> f64 {
        self.intercept_db + self.slope_db_per_decade * distance.max(1.0).log10()
    }

    /// Linear large-scale gain `α = 10^(−PL/10)`.
    pub fn large_scale_gain(&self, distance: f64) -> f64 {
        10f64.powf(-self.path_loss_db(distance) / 10.0)
    }

    /// Noise power over the full band, `N₀·W_max`.
    pub fn noise_power(&self) -> f64 {
        self.noise_psd * self.max_bandwidth
    }

    /// `g̃ = α·‖h‖² / (N₀·W_max)`, in 1/W.
    pub fn equivalent_gain_tilde(&self, alpha: f64, h_norm_sq: f64) -> f64 {
        alpha * h_norm_sq / self.noise_power()
    }

    pub fn channel_dist(&self, alpha: f64, n_antennas: u32) -> GammaChannelDist {
        GammaChannelDist::new(n_antennas, self.noise_power() / alpha)
    }
}

/// Gain at the bandwidth actually available, `g = (W_max/W)·g̃`.
pub fn gain_at_bandwidth(g_tilde: f64, w: f64, w_max: f64) -> Result<f64> {
    if !(w > 0.0) {
        return Err(Error::invalid("w", "slot has no available bandwidth"));
    }
    Ok(g_tilde * w_max / w)
}

/// `‖h‖²` for `n_antennas` i.i.d. unit-variance complex Gaussian entries.
pub fn sample_h_norm_sq<R: Rng + ?Sized>(n_antennas: u32, rng: &mut R) -> f64 {
    (0..n_antennas.max(1))
        .map(|_| -> f64 { Exp1.sample(rng) })
        .sum()
}

/// Gamma law of `g̃` within one frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaChannelDist {
    pub shape: u32,
    /// `N₀·W_max/α`, in W.
    pub rate_scale: f64,
}

impl GammaChannelDist {
    pub fn new(shape: u32, rate_scale: f64) -> Self {
        debug_assert!(shape >= 1);
        debug_assert!(rate_scale > 0.0);
        GammaChannelDist { shape, rate_scale }
    }

    pub fn mean(&self) -> f64 {
        self.shape as f64 / self.rate_scale
    }

    fn ln_norm(&self) -> f64 {
        // ln Γ(N) = ln (N-1)!
        (1..self.shape).map(|k| (k as f64).ln()).sum()
    }

    pub fn pdf(&self, g: f64) -> f64 {
        if g < 0.0 {
            return 0.0;
        }
        let r = self.rate_scale;
        let x = r * g;
        if x == 0.0 {
            return if self.shape == 1 { r } else { 0.0 };
        }
        (r.ln() + (self.shape as f64 - 1.0) * x.ln() - x - self.ln_norm()).exp()
    }

    /// Density of the standardised variable `x = r·g` (unit rate).
    pub(crate) fn std_pdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return if x == 0.0 && self.shape == 1 { 1.0 } else { 0.0 };
        }
        ((self.shape as f64 - 1.0) * x.ln() - x - self.ln_norm()).exp()
    }

    /// Upper tail `Pr(g̃ ≥ g)`, exact for integer shape.
    pub fn sf(&self, g: f64) -> f64 {
        self.std_sf(self.rate_scale * g)
    }

    pub(crate) fn std_sf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 1.0;
        }
        if x == f64::INFINITY {
            return 0.0;
        }
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..self.shape {
            term *= x / k as f64;
            sum += term;
        }
        (-x).exp() * sum
    }

    pub fn cdf(&self, g: f64) -> f64 {
        1.0 - self.sf(g)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        sample_h_norm_sq(self.shape, rng) / self.rate_scale
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub start_position: Point,
    /// Unit vector.
    pub direction: Point,
    /// m/s
    pub speed: f64,
    /// Closest approach of the initial line to the serving site, in m.
    pub min_sbs_distance: f64,
}

impl Trajectory {
    /// A straight line passing `min_distance` from the cell centre with a
    /// uniformly random heading, started at a uniform point of its chord.
    pub fn random_in_cell<R: Rng + ?Sized>(
        cell: &Hexagon,
        min_distance_range: (f64, f64),
        speed: f64,
        rng: &mut R,
    ) -> Trajectory {
        let (lo, hi) = min_distance_range;
        let d = if hi > lo { rng.random_range(lo..hi) } else { lo };
        let theta = rng.random_range(0.0..std::f64::consts::TAU);
        let direction = Point::new(theta.cos(), theta.sin());
        let foot = cell
            .center
            .add(Point::new(-direction.y, direction.x).scale(d));
        let start_position = match cell.chord(foot, direction) {
            Some((s_lo, s_hi)) if s_hi > s_lo => {
                foot.add(direction.scale(rng.random_range(s_lo..s_hi)))
            }
            _ => foot,
        };
        Trajectory {
            start_position,
            direction,
            speed,
            min_sbs_distance: d,
        }
    }

    pub fn stationary(position: Point) -> Trajectory {
        Trajectory {
            start_position: position,
            direction: Point::new(1.0, 0.0),
            speed: 0.0,
            min_sbs_distance: 0.0,
        }
    }
}

/// Position after `time` seconds, reflecting specularly off the cell edges.
pub fn position_at(trajectory: &Trajectory, time: f64, cell: &Hexagon) -> Point {
    let mut p = trajectory.start_position;
    let mut dir = trajectory.direction;
    let mut remaining = trajectory.speed * time.max(0.0);
    let h = cell.inradius();
    let normals = Hexagon::normals();

    // A path of a few hundred metres crosses a 50 m cell a handful of times;
    // the cap only guards against degenerate corner ping-pong.
    for _ in 0..10_000 {
        if remaining <= 0.0 {
            break;
        }
        let rel = p.sub(cell.center);
        let mut hit = f64::INFINITY;
        for n in &normals {
            let nd = n.dot(dir);
            if nd > 1e-15 {
                let s = ((h - n.dot(rel)) / nd).max(0.0);
                hit = hit.min(s);
            }
        }
        if remaining <= hit {
            p = p.add(dir.scale(remaining));
            break;
        }
        p = p.add(dir.scale(hit));
        remaining -= hit;
        let rel = p.sub(cell.center);
        // Reflect off every edge we are sitting on (two at a corner).
        for n in &normals {
            if n.dot(rel) >= h - 1e-9 && n.dot(dir) > 0.0 {
                dir = dir.sub(n.scale(2.0 * n.dot(dir)));
            }
        }
    }
    p
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_for;

    #[test]
    fn path_loss_reference_points() {
        let pl = PathLossParams::default();
        assert_eq!(pl.path_loss_db(1.0), 30.5);
        assert!((pl.path_loss_db(10.0) - 67.2).abs() < 1e-12);
        // 30.5 + 36.7·log10(50)
        assert!((pl.path_loss_db(50.0) - 92.852_199_159_1).abs() < 1e-9);
        assert_eq!(pl.path_loss_db(0.0), 30.5);
        assert_eq!(pl.path_loss_db(0.3), 30.5);
    }

    #[test]
    fn gain_strictly_decreasing_beyond_clamp() {
        let pl = PathLossParams::default();
        let mut prev = pl.large_scale_gain(1.0);
        for i in 1..500 {
            let g = pl.large_scale_gain(1.0 + i as f64 * 0.5);
            assert!(g < prev);
            prev = g;
        }
    }

    #[test]
    fn equivalent_gain_is_linear() {
        let pl = PathLossParams {
            noise_psd: 1e-19,
            max_bandwidth: 1e7,
            ..Default::default()
        };
        let g = pl.equivalent_gain_tilde(1.0, 1.0);
        assert!((g - 1e12).abs() / 1e12 < 1e-12);
        assert!((pl.equivalent_gain_tilde(2.0, 1.0) - 2.0 * g).abs() / g < 1e-12);
        assert_eq!(gain_at_bandwidth(g, 5e6, 1e7).unwrap(), 2.0 * g);
        assert!(gain_at_bandwidth(g, 0.0, 1e7).is_err());
    }

    #[test]
    fn fading_draws_nonnegative() {
        let mut rng = rng_for(1, &[]);
        for n in 1..=8 {
            for _ in 0..1000 {
                assert!(sample_h_norm_sq(n, &mut rng) >= 0.0);
            }
        }
    }

    #[test]
    fn gamma_single_antenna_is_exponential() {
        let d = GammaChannelDist::new(1, 3.0);
        for &g in &[0.0, 0.1, 1.0, 2.5] {
            assert!((d.pdf(g) - 3.0 * (-3.0 * g).exp()).abs() < 1e-14);
        }
        assert!((d.sf(0.5) - (-1.5f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn trajectory_starts_at_start() {
        let cell = Hexagon::new(Point::ORIGIN, 50.0);
        let mut rng = rng_for(3, &[]);
        let t = Trajectory::random_in_cell(&cell, (5.0, 40.0), 1.0, &mut rng);
        assert_eq!(position_at(&t, 0.0, &cell), t.start_position);
        let s = Trajectory::stationary(Point::new(3.0, 4.0));
        assert_eq!(position_at(&s, 1e4, &cell), Point::new(3.0, 4.0));
    }

    #[test]
    fn straight_segment_length() {
        let cell = Hexagon::new(Point::ORIGIN, 500.0);
        let t = Trajectory {
            start_position: Point::new(-200.0, 0.0),
            direction: Point::new(1.0, 0.0),
            speed: 1.0,
            min_sbs_distance: 0.0,
        };
        let p = position_at(&t, 120.0, &cell);
        assert!((p.distance(t.start_position) - 120.0).abs() < 1e-9);
    }

    #[test]
    fn reflection_off_flat_edge() {
        let cell = Hexagon::new(Point::ORIGIN, 50.0);
        let h = cell.inradius();
        let t = Trajectory {
            start_position: Point::new(h - 10.0, 0.0),
            direction: Point::new(1.0, 0.0),
            speed: 1.0,
            min_sbs_distance: 0.0,
        };
        let p = position_at(&t, 15.0, &cell);
        assert!((p.x - (h - 5.0)).abs() < 1e-9, "{p:?}");
        assert!(p.y.abs() < 1e-9);
    }

    #[test]
    fn random_start_lies_inside_cell() {
        let cell = Hexagon::new(Point::new(100.0, -20.0), 50.0);
        let mut rng = rng_for(11, &[]);
        for _ in 0..200 {
            let t = Trajectory::random_in_cell(&cell, (5.0, 40.0), 1.0, &mut rng);
            assert!(cell.contains(t.start_position, 1e-9));
            assert!((5.0..40.0).contains(&t.min_sbs_distance));
            assert!((t.direction.norm() - 1.0).abs() < 1e-12);
        }
    }
}
