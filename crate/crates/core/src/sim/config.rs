use serde::{Deserialize, Serialize};

use crate::channel::PathLossParams;
use crate::error::{Error, Result};
use crate::traffic::{check_beta, ContentCatalog, DeliveryProcess, RtTrafficModel};
use crate::waterfill::PowerModel;

/// Noise PSD used by default, -135 dBm/Hz in W/Hz. See the README for why
/// this differs from a -165 dBm/Hz thermal floor.
pub const EFFECTIVE_NOISE_PSD: f64 = 3.162_277_660_168_379_5e-17;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub n_cells: usize,
    /// m
    pub cell_radius: f64,
    /// m
    pub macro_radius: f64,
    pub n_antennas: u32,
    pub users_per_cell: u32,
    /// s
    pub slot_duration: f64,
    pub slots_per_frame: u32,
    /// Simulated stretch of the off-peak period, s.
    pub offpeak_duration: f64,
    /// Whole off-peak period over which the pushed files are spread, s. The
    /// simulated stretch carries a pro-rata share of the push volume.
    pub placement_duration: f64,
    pub cache_files_broadcast: u32,
    pub cache_files_unicast: u32,
    /// m/s
    pub user_speed: f64,
    /// Range of the closest approach of a trajectory to its SBS, m.
    pub min_distance_range: [f64; 2],
    pub path_loss: PathLossParams,
    pub power: PowerModel,
    pub rt_traffic: RtTrafficModel,
    pub catalog: ContentCatalog,
    pub delivery: DeliveryProcess,
    pub beta_s: f64,
    pub n_s: u32,
    /// Redraw delivery requests every trial instead of once per experiment.
    pub requests_per_trial: bool,
    /// Slots the RT chain runs for when estimating occupancy.
    pub occupancy_slots: u64,
    pub n_trials: usize,
    pub master_seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            n_cells: 19,
            cell_radius: 50.0,
            macro_radius: 250.0,
            n_antennas: 4,
            users_per_cell: 10,
            slot_duration: 0.01,
            slots_per_frame: 100,
            offpeak_duration: 120.0,
            placement_duration: 8.0 * 3600.0,
            cache_files_broadcast: 10,
            cache_files_unicast: 10,
            user_speed: 1.0,
            min_distance_range: [5.0, 40.0],
            path_loss: PathLossParams {
                noise_psd: EFFECTIVE_NOISE_PSD,
                ..Default::default()
            },
            power: PowerModel::default(),
            rt_traffic: RtTrafficModel::default(),
            catalog: ContentCatalog::default(),
            delivery: DeliveryProcess::default(),
            beta_s: 1.0,
            n_s: 100,
            requests_per_trial: true,
            occupancy_slots: 1_000_000,
            n_trials: 200,
            master_seed: 20_150_101,
        }
    }
}

fn slots_in(duration: f64, slot: f64) -> Option<u32> {
    let n = duration / slot;
    let r = n.round();
    ((n - r).abs() < 1e-6 * r.max(1.0) && r >= 1.0 && r < u32::MAX as f64).then_some(r as u32)
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("n_cells", self.n_cells as u64),
            ("n_antennas", self.n_antennas as u64),
            ("users_per_cell", self.users_per_cell as u64),
            ("slots_per_frame", self.slots_per_frame as u64),
            ("cache_files_broadcast", self.cache_files_broadcast as u64),
            ("cache_files_unicast", self.cache_files_unicast as u64),
            ("n_s", self.n_s as u64),
            ("n_trials", self.n_trials as u64),
        ] {
            if v == 0 {
                return Err(Error::invalid(name, "must be >= 1"));
            }
        }
        if !(self.cell_radius > 0.0) {
            return Err(Error::invalid("cell_radius", "must be > 0"));
        }
        if !(self.slot_duration > 0.0) {
            return Err(Error::invalid("slot_duration", "must be > 0"));
        }
        let off = slots_in(self.offpeak_duration, self.slot_duration)
            .ok_or_else(|| Error::invalid("offpeak_duration", "must be a whole number of slots"))?;
        if off % self.slots_per_frame != 0 {
            return Err(Error::invalid(
                "offpeak_duration",
                format!("{off} slots is not a multiple of slots_per_frame"),
            ));
        }
        slots_in(self.delivery.peak_duration, self.slot_duration)
            .ok_or_else(|| Error::invalid("delivery.peak_duration", "must be a whole number of slots"))?;
        if !(self.placement_duration >= self.offpeak_duration) {
            return Err(Error::invalid(
                "placement_duration",
                "must be at least offpeak_duration",
            ));
        }
        if !(self.user_speed >= 0.0) {
            return Err(Error::invalid("user_speed", "must be >= 0"));
        }
        let [lo, hi] = self.min_distance_range;
        if !(lo >= 0.0 && hi >= lo && hi < self.cell_radius * 3f64.sqrt() / 2.0) {
            return Err(Error::invalid(
                "min_distance_range",
                "need 0 <= lo <= hi < cell inradius",
            ));
        }
        if self.occupancy_slots < 10_000 {
            return Err(Error::invalid("occupancy_slots", "must be >= 10000"));
        }
        self.path_loss.validate()?;
        self.power.validate()?;
        self.rt_traffic.validate()?;
        self.catalog.validate()?;
        self.delivery.validate()?;
        check_beta("beta_s", self.beta_s)?;
        if self.n_s > self.catalog.n_files {
            return Err(Error::invalid("n_s", "must not exceed catalog.n_files"));
        }
        if self.cache_files_unicast > self.n_s {
            return Err(Error::invalid("cache_files_unicast", "must not exceed n_s"));
        }
        if self.cache_files_broadcast > self.catalog.n_files {
            return Err(Error::invalid("cache_files_broadcast", "must not exceed catalog.n_files"));
        }
        Ok(())
    }

    pub fn n_users(&self) -> usize {
        self.n_cells * self.users_per_cell as usize
    }

    pub fn offpeak_slots(&self) -> u32 {
        slots_in(self.offpeak_duration, self.slot_duration).unwrap_or(0)
    }

    pub fn peak_slots(&self) -> u32 {
        slots_in(self.delivery.peak_duration, self.slot_duration).unwrap_or(0)
    }

    pub fn frame_duration(&self) -> f64 {
        self.slots_per_frame as f64 * self.slot_duration
    }

    pub fn offpeak_frames(&self) -> usize {
        (self.offpeak_slots() / self.slots_per_frame) as usize
    }

    pub fn peak_frames(&self) -> usize {
        self.peak_slots().div_ceil(self.slots_per_frame) as usize
    }

    /// Bits each user must receive during the simulated off-peak stretch.
    pub fn push_bits_per_user(&self) -> f64 {
        self.cache_files_unicast as f64 * self.catalog.file_size_bits * self.offpeak_duration
            / self.placement_duration
    }
}
