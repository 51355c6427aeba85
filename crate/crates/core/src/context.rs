//! Statistics the planner works from: RT occupancy per frame (network
//! level) and the per-frame channel law of each user (user level).

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{position_at, GammaChannelDist, PathLossParams, Trajectory};
use crate::error::{Error, Result};
use crate::layout::CellLayout;
use crate::traffic::RtTrafficModel;

/// Probability that `level` of `L` bandwidth units are free in a frame.
pub trait OccupancyProbs {
    fn n_frames(&self) -> usize;
    /// `L`
    fn capacity(&self) -> u32;
    fn prob(&self, frame: usize, level: u32) -> f64;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkContext {
    /// `[frame][level 0..=L]`
    pub occupancy_probs: Vec<Vec<f64>>,
}

impl NetworkContext {
    pub fn new(occupancy_probs: Vec<Vec<f64>>) -> Result<Self> {
        let width = occupancy_probs.first().map_or(0, Vec::len);
        if width < 2 {
            return Err(Error::invalid("occupancy_probs", "need at least one frame and two levels"));
        }
        for (j, row) in occupancy_probs.iter().enumerate() {
            if row.len() != width {
                return Err(Error::invalid("occupancy_probs", format!("frame {j} has {} levels, expected {width}", row.len())));
            }
            if row.iter().any(|p| !(0.0..=1.0).contains(p)) {
                return Err(Error::invalid("occupancy_probs", format!("frame {j} has an entry outside [0, 1]")));
            }
            let total: f64 = row.iter().sum();
            if (total - 1.0).abs() > 1e-9 {
                return Err(Error::invalid("occupancy_probs", format!("frame {j} sums to {total}")));
            }
        }
        Ok(NetworkContext { occupancy_probs })
    }

    /// The same level distribution in every frame.
    pub fn stationary(row: Vec<f64>, n_frames: usize) -> Result<Self> {
        Self::new(vec![row; n_frames])
    }
}

impl OccupancyProbs for NetworkContext {
    fn n_frames(&self) -> usize {
        self.occupancy_probs.len()
    }
    fn capacity(&self) -> u32 {
        self.occupancy_probs[0].len() as u32 - 1
    }
    fn prob(&self, frame: usize, level: u32) -> f64 {
        self.occupancy_probs[frame][level as usize]
    }
}

/// Occupancy as seen by one of `K` users sharing an SBS: every entry divided
/// by `K`. The missing mass `1 − 1/K` stands for slots given to other users.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaledContext {
    pub occupancy_probs: Vec<Vec<f64>>,
    pub users_per_frame: Vec<u32>,
}

impl OccupancyProbs for ScaledContext {
    fn n_frames(&self) -> usize {
        self.occupancy_probs.len()
    }
    fn capacity(&self) -> u32 {
        self.occupancy_probs[0].len() as u32 - 1
    }
    fn prob(&self, frame: usize, level: u32) -> f64 {
        self.occupancy_probs[frame][level as usize]
    }
}

/// Runs the RT chain from empty for `warmup_slots` slots and tallies the
/// free level `L − n`.
pub fn estimate_occupancy<R: Rng + ?Sized>(
    model: &RtTrafficModel,
    n_frames: usize,
    warmup_slots: u64,
    rng: &mut R,
) -> Result<NetworkContext> {
    model.validate()?;
    if warmup_slots < 10_000 {
        return Err(Error::invalid("warmup_slots", "must be >= 10000"));
    }
    if n_frames == 0 {
        return Err(Error::invalid("n_frames", "must be >= 1"));
    }
    let cap = model.capacity;
    let mut counts = vec![0u64; cap as usize + 1];
    let mut n = 0;
    for _ in 0..warmup_slots {
        n = model.step(n, rng);
        counts[(cap - n) as usize] += 1;
    }
    let row: Vec<f64> = counts
        .iter()
        .map(|&c| c as f64 / warmup_slots as f64)
        .collect();
    NetworkContext::stationary(row, n_frames)
}

pub fn scale_for_multiuser(ctx: &NetworkContext, users_per_frame: &[u32]) -> Result<ScaledContext> {
    if users_per_frame.len() != ctx.n_frames() {
        return Err(Error::invalid(
            "users_per_frame",
            format!("{} entries for {} frames", users_per_frame.len(), ctx.n_frames()),
        ));
    }
    if users_per_frame.contains(&0) {
        return Err(Error::invalid("users_per_frame", "counts must be >= 1"));
    }
    let occupancy_probs = ctx
        .occupancy_probs
        .iter()
        .zip(users_per_frame)
        .map(|(row, &k)| row.iter().map(|p| p / k as f64).collect())
        .collect();
    Ok(ScaledContext {
        occupancy_probs,
        users_per_frame: users_per_frame.to_vec(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserContext {
    /// Large-scale gain `α^j` at the start of each frame.
    pub frame_gains: Vec<f64>,
    pub channel_dists: Vec<GammaChannelDist>,
    pub serving_cells: Vec<usize>,
}

impl UserContext {
    pub fn n_frames(&self) -> usize {
        self.frame_gains.len()
    }

    pub fn from_gains(frame_gains: Vec<f64>, params: &PathLossParams, n_antennas: u32) -> Result<Self> {
        if n_antennas == 0 {
            return Err(Error::invalid("n_antennas", "must be >= 1"));
        }
        if frame_gains.is_empty() || frame_gains.iter().any(|a| !(*a > 0.0 && a.is_finite())) {
            return Err(Error::invalid("frame_gains", "need at least one positive gain"));
        }
        let channel_dists = frame_gains
            .iter()
            .map(|&a| params.channel_dist(a, n_antennas))
            .collect();
        let serving_cells = vec![0; frame_gains.len()];
        Ok(UserContext {
            frame_gains,
            channel_dists,
            serving_cells,
        })
    }
}

/// Reads the large-scale gain towards the closest SBS at each frame start
/// along the trajectory. `home_cell` bounds the motion.
pub fn build_user_context(
    trajectory: &Trajectory,
    home_cell: usize,
    layout: &CellLayout,
    params: &PathLossParams,
    n_antennas: u32,
    n_frames: usize,
    frame_duration: f64,
) -> Result<UserContext> {
    params.validate()?;
    if n_frames == 0 {
        return Err(Error::invalid("n_frames", "must be >= 1"));
    }
    if home_cell >= layout.n_cells() {
        return Err(Error::invalid("home_cell", format!("{home_cell} out of range")));
    }
    let cell = layout.cell(home_cell);
    let mut gains = Vec::with_capacity(n_frames);
    let mut serving = Vec::with_capacity(n_frames);
    for j in 0..n_frames {
        let pos = position_at(trajectory, j as f64 * frame_duration, &cell);
        let sbs = layout.nearest(pos);
        gains.push(params.large_scale_gain(pos.distance(layout.sbs_positions[sbs])));
        serving.push(sbs);
    }
    let mut ctx = UserContext::from_gains(gains, params, n_antennas)?;
    ctx.serving_cells = serving;
    Ok(ctx)
}
