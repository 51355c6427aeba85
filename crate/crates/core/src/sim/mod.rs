//! Slotted simulation of a small-cell network over an off-peak push window
//! and a peak delivery window.

mod config;
mod engine;
mod episode;
mod experiment;
mod metrics;

pub use config::{ScenarioConfig, EFFECTIVE_NOISE_PSD};
pub use engine::{
    monte_carlo, run_offpeak_broadcast, run_offpeak_unicast, run_offpeak_unicast_observed, run_peak_delivery,
    run_peak_delivery_observed, run_trial, run_trials, OffpeakOutcome, PeakOutcome, SlotEvent,
};
pub use episode::{EpisodeResult, PushEpisodes};
pub use experiment::{CellRequests, Demand, Deployment, Experiment, Strategy, UserPlan, UserSetup};
pub use metrics::{EnergyLedger, Metrics, Stat, StrategySummary};
