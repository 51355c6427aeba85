use serde::{Deserialize, Serialize};

use super::experiment::Strategy;

/// Energy in J, split by phase.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EnergyLedger {
    pub push_energy: f64,
    pub delivery_energy: f64,
}

impl EnergyLedger {
    pub fn add_push(&mut self, joules: f64) {
        debug_assert!(joules >= 0.0);
        self.push_energy += joules;
    }

    pub fn add_delivery(&mut self, joules: f64) {
        debug_assert!(joules >= 0.0);
        self.delivery_energy += joules;
    }

    pub fn total(&self) -> f64 {
        self.push_energy + self.delivery_energy
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Metrics {
    pub delivered_bits: f64,
    /// bits/s over the peak window
    pub throughput: f64,
    pub energy: EnergyLedger,
    pub total_energy: f64,
    pub cache_hit_rate: f64,
    pub plan_feasible_fraction: f64,
    pub n_requests: u64,
    pub n_hits: u64,
}

/// Mean with its standard error and a 95% normal interval.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub se: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

impl Stat {
    pub fn from_samples(xs: &[f64]) -> Stat {
        let n = xs.len();
        if n == 0 {
            return Stat::default();
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        let se = if n > 1 {
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        } else {
            0.0
        };
        Stat {
            mean,
            se,
            ci_lo: mean - 1.96 * se,
            ci_hi: mean + 1.96 * se,
        }
    }

    pub fn overlaps(&self, other: &Stat) -> bool {
        self.ci_lo <= other.ci_hi && other.ci_lo <= self.ci_hi
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategySummary {
    pub strategy: Strategy,
    pub n_trials: usize,
    pub throughput: Stat,
    pub total_energy: Stat,
    pub push_energy: Stat,
    pub delivery_energy: Stat,
    pub cache_hit_rate: Stat,
    pub plan_feasible_fraction: Stat,
}

impl StrategySummary {
    pub fn from_trials(strategy: Strategy, trials: &[Metrics]) -> Self {
        let stat = |f: fn(&Metrics) -> f64| Stat::from_samples(&trials.iter().map(f).collect::<Vec<_>>());
        StrategySummary {
            strategy,
            n_trials: trials.len(),
            throughput: stat(|m| m.throughput),
            total_energy: stat(|m| m.total_energy),
            push_energy: stat(|m| m.energy.push_energy),
            delivery_energy: stat(|m| m.energy.delivery_energy),
            cache_hit_rate: stat(|m| m.cache_hit_rate),
            plan_feasible_fraction: stat(|m| m.plan_feasible_fraction),
        }
    }
}
