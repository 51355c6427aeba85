//! Experiment presets, config files and CSV output for the `pushsim` binary.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use anyhow::{bail, Context};
use pushsim_core::sim::{monte_carlo, Deployment, EpisodeResult, Experiment, PushEpisodes, ScenarioConfig, Strategy, StrategySummary};
use serde::{Deserialize, Serialize};

pub const VERSION: &str = concat!("pushsim ", env!("CARGO_PKG_VERSION"));

/// Push volume of the single-user threshold experiment, bits.
pub const FIG2_BITS: f64 = 1e8;
pub const FIG2_EPISODES: u64 = 100;

/// Reads a TOML config. Absent fields take their defaults; an empty file
/// gives the default scenario.
pub fn load_config(path: &Path) -> anyhow::Result<ScenarioConfig> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_config(&text).with_context(|| format!("in {}", path.display()))
}

pub fn parse_config(text: &str) -> anyhow::Result<ScenarioConfig> {
    let config: ScenarioConfig = toml::from_str(text)?;
    config.validate()?;
    Ok(config)
}

pub fn save_config(config: &ScenarioConfig, path: &Path) -> anyhow::Result<()> {
    fs::write(path, toml::to_string_pretty(config)?).with_context(|| format!("writing {}", path.display()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    /// Offered delivery load per user, bits/s.
    DeliveryRate,
    /// Common and personal Zipf exponents, set together.
    Beta,
    /// Interest-set size, with the catalog scaled to 100 files per entry.
    InterestSize,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::DeliveryRate => "delivery_rate",
            SweepParam::Beta => "beta",
            SweepParam::InterestSize => "interest_size",
        }
    }

    pub fn apply(self, base: &ScenarioConfig, value: f64) -> anyhow::Result<ScenarioConfig> {
        let mut c = base.clone();
        match self {
            SweepParam::DeliveryRate => c.delivery.mean_rate_bps = value,
            SweepParam::Beta => {
                c.catalog.zipf_beta = value;
                c.beta_s = value;
            }
            SweepParam::InterestSize => {
                if value.fract() != 0.0 || value < 1.0 {
                    bail!("interest_size must be a positive integer, got {value}");
                }
                c.n_s = value as u32;
                c.catalog.n_files = 100 * c.n_s;
            }
        }
        c.validate()?;
        Ok(c)
    }
}

impl FromStr for SweepParam {
    type Err = anyhow::Error;
    fn from_str(s: &str) -> anyhow::Result<Self> {
        [SweepParam::DeliveryRate, SweepParam::Beta, SweepParam::InterestSize]
            .into_iter()
            .find(|p| p.name() == s)
            .with_context(|| format!("unknown sweep parameter `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum PresetName {
    Fig2,
    Fig4a,
    Fig4b,
    Fig5a,
    Fig5b,
    Custom,
}

impl PresetName {
    pub fn as_str(self) -> &'static str {
        match self {
            PresetName::Fig2 => "fig2",
            PresetName::Fig4a => "fig4a",
            PresetName::Fig4b => "fig4b",
            PresetName::Fig5a => "fig5a",
            PresetName::Fig5b => "fig5b",
            PresetName::Custom => "custom",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub param: SweepParam,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPreset {
    pub name: PresetName,
    /// `None` runs a single point at the base config.
    pub sweep: Option<Sweep>,
    pub base: ScenarioConfig,
}

const BETAS: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];

impl ExperimentPreset {
    /// The experiment presets on top of `base`. `Fig2` and `Custom` carry no sweep.
    pub fn new(name: PresetName, base: ScenarioConfig) -> Self {
        let sweep = |param, values: &[f64]| {
            Some(Sweep {
                param,
                values: values.to_vec(),
            })
        };
        let (sweep, base) = match name {
            PresetName::Fig4a => {
                let mut b = base;
                b.catalog.zipf_beta = 1.0;
                b.beta_s = 1.0;
                (sweep(SweepParam::DeliveryRate, &[0.4e6, 0.8e6, 1.2e6, 1.6e6, 2.0e6]), b)
            }
            PresetName::Fig4b | PresetName::Fig5b => (sweep(SweepParam::Beta, &BETAS), base),
            PresetName::Fig5a => {
                let mut b = base;
                b.catalog.zipf_beta = 1.0;
                b.beta_s = 1.0;
                (sweep(SweepParam::InterestSize, &[50.0, 100.0, 200.0, 400.0]), b)
            }
            PresetName::Fig2 | PresetName::Custom => (None, base),
        };
        ExperimentPreset { name, sweep, base }
    }

    /// `(sweep_value, config)` per point. A preset without a sweep yields one
    /// point with value 0.
    pub fn points(&self) -> anyhow::Result<Vec<(f64, ScenarioConfig)>> {
        match &self.sweep {
            None => {
                self.base.validate()?;
                Ok(vec![(0.0, self.base.clone())])
            }
            Some(s) => s.values.iter().map(|&v| Ok((v, s.param.apply(&self.base, v)?))).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub sweep_value: f64,
    pub summaries: Vec<StrategySummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fig2Summary {
    pub bits: f64,
    pub episodes: u64,
    /// Episodes whose planner or oracle failed; excluded from the CSV.
    pub failed: u64,
    pub median_nu_rel_error: f64,
    pub median_gth_rel_error: f64,
    pub nu_above_p_max: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub version: String,
    pub preset: PresetName,
    pub config: ScenarioConfig,
    pub sweep: Option<Sweep>,
    pub master_seed: u64,
    pub n_trials: usize,
    pub points: Vec<SweepPoint>,
    pub fig2: Option<Fig2Summary>,
    pub wall_clock_s: f64,
}

#[derive(Debug, Serialize)]
struct PanelRow {
    sweep_value: f64,
    strategy: Strategy,
    mean_throughput_bps: f64,
    se_throughput: f64,
    #[serde(rename = "mean_energy_J")]
    mean_energy_j: f64,
    se_energy: f64,
    cache_hit_rate: f64,
}

#[derive(Debug, Serialize)]
struct Fig2Row {
    episode: u64,
    nu_star: f64,
    nu_hat: f64,
    gth_star: f64,
    gth_hat: f64,
    min_distance: f64,
    idle_slots_used: usize,
    nu_above_p_max: bool,
}

#[derive(Debug, Serialize)]
struct CdfRow {
    probability: f64,
    nu_star: f64,
    nu_hat: f64,
    gth_star: f64,
    gth_hat: f64,
}

fn write_record(record: &RunRecord, out_dir: &Path) -> anyhow::Result<PathBuf> {
    let path = out_dir.join(format!("{}.json", record.preset.as_str()));
    fs::write(&path, serde_json::to_string_pretty(record)?).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

/// Runs every sweep point of `preset` with `threads` workers and writes
/// `<preset>.csv` plus a `<preset>.json` run record to `out_dir`. Rows are
/// flushed after each point.
pub fn run_preset(preset: &ExperimentPreset, out_dir: &Path, threads: usize) -> anyhow::Result<RunRecord> {
    if preset.name == PresetName::Fig2 {
        return run_fig2(&preset.base, out_dir, FIG2_BITS, FIG2_EPISODES, threads);
    }
    let start = Instant::now();
    fs::create_dir_all(out_dir)?;
    let points = preset.points()?;
    let csv_path = out_dir.join(format!("{}.csv", preset.name.as_str()));
    let mut csv = csv::Writer::from_path(&csv_path).with_context(|| format!("creating {}", csv_path.display()))?;

    let mut deployment: Option<Arc<Deployment>> = None;
    let mut done = Vec::with_capacity(points.len());
    for (value, config) in points {
        let exp = Experiment::with_deployment(&config, deployment.take())?;
        let summaries = monte_carlo(&exp, &Strategy::ALL, config.n_trials, threads)?;
        for s in &summaries {
            csv.serialize(PanelRow {
                sweep_value: value,
                strategy: s.strategy,
                mean_throughput_bps: s.throughput.mean,
                se_throughput: s.throughput.se,
                mean_energy_j: s.total_energy.mean,
                se_energy: s.total_energy.se,
                cache_hit_rate: s.cache_hit_rate.mean,
            })?;
        }
        csv.flush()?;
        deployment = Some(exp.deployment);
        done.push(SweepPoint {
            sweep_value: value,
            summaries,
        });
    }

    let record = RunRecord {
        version: VERSION.to_string(),
        preset: preset.name,
        config: preset.base.clone(),
        sweep: preset.sweep.clone(),
        master_seed: preset.base.master_seed,
        n_trials: preset.base.n_trials,
        points: done,
        fig2: None,
        wall_clock_s: start.elapsed().as_secs_f64(),
    };
    write_record(&record, out_dir)?;
    Ok(record)
}

fn median(mut xs: Vec<f64>) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

/// Runs `episodes` single-user push episodes and returns the successful
/// ones with the number that failed.
pub fn fig2_episodes(config: &ScenarioConfig, bits: f64, episodes: u64, threads: usize) -> anyhow::Result<(Vec<EpisodeResult>, u64)> {
    let runner = PushEpisodes::new(config, bits)?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads.max(1)).build()?;
    let results: Vec<_> = pool.install(|| {
        use rayon::prelude::*;
        (0..episodes).into_par_iter().map(|e| runner.run(e)).collect()
    });
    let failed = results.iter().filter(|r| r.is_err()).count() as u64;
    Ok((results.into_iter().filter_map(Result::ok).collect(), failed))
}

pub fn summarize_fig2(results: &[EpisodeResult], bits: f64, failed: u64) -> Fig2Summary {
    Fig2Summary {
        bits,
        episodes: results.len() as u64 + failed,
        failed,
        median_nu_rel_error: median(results.iter().map(EpisodeResult::nu_rel_error).collect()),
        median_gth_rel_error: median(results.iter().map(EpisodeResult::gth_rel_error).collect()),
        nu_above_p_max: results.iter().filter(|r| r.nu_above_p_max).count() as u64,
    }
}

/// Writes `fig2.csv` with the paired estimates per episode, `fig2_cdf.csv`
/// with their empirical CDFs and a `fig2.json` run record.
pub fn run_fig2(config: &ScenarioConfig, out_dir: &Path, bits: f64, episodes: u64, threads: usize) -> anyhow::Result<RunRecord> {
    let start = Instant::now();
    fs::create_dir_all(out_dir)?;
    let (results, failed) = fig2_episodes(config, bits, episodes, threads)?;

    let mut csv = csv::Writer::from_path(out_dir.join("fig2.csv"))?;
    for r in &results {
        csv.serialize(Fig2Row {
            episode: r.episode,
            nu_star: r.nu_star,
            nu_hat: r.nu_hat,
            gth_star: r.ln_gth_star.exp(),
            gth_hat: r.ln_gth_hat.exp(),
            min_distance: r.min_distance,
            idle_slots_used: r.idle_slots_used,
            nu_above_p_max: r.nu_above_p_max,
        })?;
    }
    csv.flush()?;

    let sorted = |f: fn(&EpisodeResult) -> f64| {
        let mut v: Vec<f64> = results.iter().map(f).collect();
        v.sort_by(f64::total_cmp);
        v
    };
    let cols = [
        sorted(|r| r.nu_star),
        sorted(|r| r.nu_hat),
        sorted(|r| r.ln_gth_star.exp()),
        sorted(|r| r.ln_gth_hat.exp()),
    ];
    let mut cdf = csv::Writer::from_path(out_dir.join("fig2_cdf.csv"))?;
    let n = results.len();
    for i in 0..n {
        cdf.serialize(CdfRow {
            probability: (i + 1) as f64 / n as f64,
            nu_star: cols[0][i],
            nu_hat: cols[1][i],
            gth_star: cols[2][i],
            gth_hat: cols[3][i],
        })?;
    }
    cdf.flush()?;

    let record = RunRecord {
        version: VERSION.to_string(),
        preset: PresetName::Fig2,
        config: config.clone(),
        sweep: None,
        master_seed: config.master_seed,
        n_trials: episodes as usize,
        points: Vec::new(),
        fig2: Some(summarize_fig2(&results, bits, failed)),
        wall_clock_s: start.elapsed().as_secs_f64(),
    };
    write_record(&record, out_dir)?;
    Ok(record)
}

/// One line per point and strategy, for the terminal.
pub fn describe(record: &RunRecord, mut out: impl Write) -> std::io::Result<()> {
    if let Some(f) = &record.fig2 {
        writeln!(
            out,
            "fig2: {} episodes ({} failed), median |nu*-nu^|/nu^ = {:.4}, median |g*-g^|/g^ = {:.4}, nu^ > p_max in {}",
            f.episodes, f.failed, f.median_nu_rel_error, f.median_gth_rel_error, f.nu_above_p_max
        )?;
    }
    for p in &record.points {
        for s in &p.summaries {
            writeln!(
                out,
                "{} {:>10} {:<9} throughput {:.4e} ± {:.2e} bit/s  energy {:.4e} ± {:.2e} J  hit {:.3}",
                record.preset.as_str(),
                p.sweep_value,
                s.strategy.name(),
                s.throughput.mean,
                1.96 * s.throughput.se,
                s.total_energy.mean,
                1.96 * s.total_energy.se,
                s.cache_hit_rate.mean
            )?;
        }
    }
    writeln!(out, "wall clock {:.1} s", record.wall_clock_s)
}
