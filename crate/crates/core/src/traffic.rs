//! Real-time occupancy, content popularity and delivery requests.

use rand::distr::weighted::WeightedIndex;
use rand::Rng;
use rand_distr::{Bernoulli, Distribution, Exp1, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Real-time (RT) service with strict priority. Each active request reserves
/// a fixed fraction of the band and of the transmit power.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RtTrafficModel {
    /// requests per slot
    pub arrival_rate: f64,
    /// slots
    pub mean_service: f64,
    pub capacity: u32,
    pub bandwidth_fraction_per_request: f64,
    pub power_fraction_per_request: f64,
}

impl Default for RtTrafficModel {
    fn default() -> Self {
        RtTrafficModel {
            arrival_rate: 0.2,
            mean_service: 2.0,
            capacity: 5,
            bandwidth_fraction_per_request: 0.2,
            power_fraction_per_request: 0.2,
        }
    }
}

/// Resources left for pushing in one slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RtReservation {
    pub p_rt: f64,
    pub w_available: f64,
    /// Availability level `l = L − active`.
    pub level: u32,
}

impl RtReservation {
    pub fn idle(&self) -> bool {
        self.p_rt == 0.0
    }
}

impl RtTrafficModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.arrival_rate >= 0.0 && self.arrival_rate.is_finite()) {
            return Err(Error::invalid("rt_traffic.arrival_rate", "must be >= 0"));
        }
        if !(self.mean_service >= 1.0) {
            return Err(Error::invalid(
                "rt_traffic.mean_service",
                "must be >= 1 slot (per-slot departure probability 1/mean_service)",
            ));
        }
        for (name, v) in [
            ("rt_traffic.bandwidth_fraction_per_request", self.bandwidth_fraction_per_request),
            ("rt_traffic.power_fraction_per_request", self.power_fraction_per_request),
        ] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::invalid(name, "must lie in (0, 1]"));
            }
        }
        let implied = (1.0 / self.bandwidth_fraction_per_request + 1e-9).floor() as u32;
        if self.capacity != implied || self.capacity == 0 {
            return Err(Error::invalid(
                "rt_traffic.capacity",
                format!("must equal floor(1/bandwidth_fraction) = {implied}"),
            ));
        }
        if self.capacity as f64 * self.power_fraction_per_request > 1.0 + 1e-12 {
            return Err(Error::invalid(
                "rt_traffic.power_fraction_per_request",
                "capacity x power fraction exceeds p_max",
            ));
        }
        Ok(())
    }

    pub fn departure_probability(&self) -> f64 {
        1.0 / self.mean_service
    }

    /// One slot of the birth–death chain: existing requests depart with
    /// probability `1/mean_service`, then Poisson arrivals are admitted up to
    /// capacity (the excess is blocked).
    pub fn step<R: Rng + ?Sized>(&self, active: u32, rng: &mut R) -> u32 {
        let stay = Bernoulli::new(1.0 - self.departure_probability()).expect("probability in [0,1]");
        let survivors = (0..active).filter(|_| stay.sample(rng)).count() as u32;
        let arrivals = if self.arrival_rate > 0.0 {
            let a: f64 = Poisson::new(self.arrival_rate)
                .expect("positive rate")
                .sample(rng);
            a as u32
        } else {
            0
        };
        (survivors + arrivals).min(self.capacity)
    }

    /// Bandwidth and power left after `active` RT reservations.
    pub fn reservation(&self, active: u32, p_max: f64, w_max: f64) -> RtReservation {
        let active = active.min(self.capacity);
        let level = self.capacity - active;
        RtReservation {
            p_rt: active as f64 * self.power_fraction_per_request * p_max,
            w_available: level as f64 / self.capacity as f64 * w_max,
            level,
        }
    }
}

pub fn step_rt_queue<R: Rng + ?Sized>(active: u32, model: &RtTrafficModel, rng: &mut R) -> u32 {
    model.step(active, rng)
}

pub fn rt_reservation(active: u32, model: &RtTrafficModel, p_max: f64, w_max: f64) -> RtReservation {
    model.reservation(active, p_max, w_max)
}

/// `p(i) ∝ i^(−β)` for ranks `i = 1..=n`, returned 0-indexed.
pub fn zipf_pmf(n: usize, beta: f64) -> Vec<f64> {
    let weights: Vec<f64> = (1..=n).map(|i| (i as f64).powf(-beta)).collect();
    let total: f64 = weights.iter().sum();
    weights.into_iter().map(|w| w / total).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContentCatalog {
    pub n_files: u32,
    pub file_size_bits: f64,
    pub zipf_beta: f64,
}

impl Default for ContentCatalog {
    fn default() -> Self {
        ContentCatalog {
            n_files: 10_000,
            // 30 MBytes
            file_size_bits: 30e6 * 8.0,
            zipf_beta: 1.0,
        }
    }
}

impl ContentCatalog {
    pub fn validate(&self) -> Result<()> {
        if self.n_files == 0 {
            return Err(Error::invalid("catalog.n_files", "must be >= 1"));
        }
        if !(self.file_size_bits > 0.0) {
            return Err(Error::invalid("catalog.file_size_bits", "must be > 0"));
        }
        check_beta("catalog.zipf_beta", self.zipf_beta)
    }

    pub fn pmf(&self) -> Vec<f64> {
        zipf_pmf(self.n_files as usize, self.zipf_beta)
    }

    /// Globally most popular files, ids `1..=k`.
    pub fn top_files(&self, k: u32) -> Vec<u32> {
        (1..=k.min(self.n_files)).collect()
    }
}

pub(crate) fn check_beta(name: &'static str, beta: f64) -> Result<()> {
    if (0.0..=1.0).contains(&beta) {
        Ok(())
    } else {
        Err(Error::invalid(name, format!("{beta} outside [0, 1]")))
    }
}

/// The files one user may request in the user's own preference order, with
/// a Zipf request law over that order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserInterestProfile {
    /// 1-based catalog ids, most preferred first.
    pub subset: Vec<u32>,
    pub zipf_beta: f64,
    pub pmf: Vec<f64>,
}

impl UserInterestProfile {
    pub fn new(subset: Vec<u32>, zipf_beta: f64) -> Self {
        let pmf = zipf_pmf(subset.len(), zipf_beta);
        UserInterestProfile {
            subset,
            zipf_beta,
            pmf,
        }
    }

    /// The `k` files this user is most likely to request.
    pub fn top_files(&self, k: usize) -> &[u32] {
        &self.subset[..k.min(self.subset.len())]
    }
}

/// Draws `n_s` distinct files by weighted sampling without replacement, with
/// weights following the catalog popularity. The draw order is the user's
/// preference order: popular files tend to rank high, but a user's top files
/// need not be the catalog's.
pub fn sample_user_subset<R: Rng + ?Sized>(
    catalog: &ContentCatalog,
    n_s: u32,
    beta_s: f64,
    rng: &mut R,
) -> Result<UserInterestProfile> {
    catalog.validate()?;
    check_beta("beta_s", beta_s)?;
    if n_s == 0 || n_s > catalog.n_files {
        return Err(Error::invalid(
            "n_s",
            format!("{n_s} must lie in 1..={}", catalog.n_files),
        ));
    }
    // Efraimidis–Spirakis: the n_s largest keys ln(u)/w are a successive
    // weighted draw, in draw order once sorted.
    let beta = catalog.zipf_beta;
    let mut keys: Vec<(f64, u32)> = (1..=catalog.n_files)
        .map(|f| {
            let u: f64 = rng.random();
            (u.ln() * (f as f64).powf(beta), f)
        })
        .collect();
    let n = n_s as usize;
    let by_key = |a: &(f64, u32), b: &(f64, u32)| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1));
    if n < keys.len() {
        keys.select_nth_unstable_by(n, by_key);
        keys.truncate(n);
    }
    keys.sort_unstable_by(by_key);
    Ok(UserInterestProfile::new(keys.into_iter().map(|(_, f)| f).collect(), beta_s))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeliveryProcess {
    /// Offered load per user, bits/s.
    pub mean_rate_bps: f64,
    /// s
    pub peak_duration: f64,
}

impl Default for DeliveryProcess {
    fn default() -> Self {
        DeliveryProcess {
            mean_rate_bps: 1.2e6,
            peak_duration: 60.0,
        }
    }
}

impl DeliveryProcess {
    pub fn validate(&self) -> Result<()> {
        if !(self.mean_rate_bps >= 0.0 && self.mean_rate_bps.is_finite()) {
            return Err(Error::invalid("delivery.mean_rate_bps", "must be >= 0"));
        }
        if !(self.peak_duration > 0.0) {
            return Err(Error::invalid("delivery.peak_duration", "must be > 0"));
        }
        Ok(())
    }

    /// Requests per second per user for files of `file_size_bits`.
    pub fn request_rate(&self, file_size_bits: f64) -> f64 {
        self.mean_rate_bps / file_size_bits
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeliveryRequest {
    pub arrival_slot: u32,
    pub file: u32,
}

/// Poisson request arrivals over the peak window. Inter-arrival times are
/// unit exponentials divided by the rate, so realisations at different
/// offered loads are coupled when drawn from the same stream.
pub fn generate_delivery_requests<R: Rng + ?Sized>(
    profile: &UserInterestProfile,
    process: &DeliveryProcess,
    file_size_bits: f64,
    slot_duration: f64,
    rng: &mut R,
) -> Result<Vec<DeliveryRequest>> {
    process.validate()?;
    let rate = process.request_rate(file_size_bits);
    if rate == 0.0 || profile.subset.is_empty() {
        return Ok(Vec::new());
    }
    let picker = WeightedIndex::new(&profile.pmf).map_err(|e| Error::invalid("profile.pmf", e.to_string()))?;
    let n_slots = (process.peak_duration / slot_duration).round() as u32;
    let mut out = Vec::new();
    let mut t = 0.0;
    loop {
        let gap: f64 = Exp1.sample(rng);
        let pick = picker.sample(rng);
        t += gap / rate;
        let slot = (t / slot_duration).floor();
        if t >= process.peak_duration || slot >= n_slots as f64 {
            break;
        }
        out.push(DeliveryRequest {
            arrival_slot: slot as u32,
            file: profile.subset[pick],
        });
    }
    Ok(out)
}
