use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::Parser;
use pushsim_cli::{describe, load_config, run_fig2, run_preset, save_config, ExperimentPreset, PresetName, Sweep, SweepParam};
use pushsim_core::sim::ScenarioConfig;

/// Energy-saving content pushing: run an experiment preset or a custom sweep.
#[derive(Debug, Parser)]
#[command(name = "pushsim", version)]
struct Args {
    #[arg(long, value_enum, default_value = "custom")]
    preset: PresetName,
    /// TOML scenario file; absent fields keep their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Monte Carlo trials per point (episodes for fig2).
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long)]
    threads: Option<usize>,
    /// Custom sweep parameter: delivery_rate, beta or interest_size.
    #[arg(long, requires = "values")]
    sweep: Option<SweepParam>,
    /// Comma-separated custom sweep values.
    #[arg(long, value_delimiter = ',', requires = "sweep")]
    values: Vec<f64>,
    /// Push volume for fig2, bits.
    #[arg(long, default_value_t = pushsim_cli::FIG2_BITS)]
    bits: f64,
    /// Write the resolved config to this path and exit.
    #[arg(long)]
    dump_config: Option<PathBuf>,
}

fn run(args: Args) -> anyhow::Result<()> {
    let mut config = match &args.config {
        Some(p) => load_config(p)?,
        None => ScenarioConfig::default(),
    };
    if let Some(t) = args.trials {
        config.n_trials = t;
    }
    if let Some(s) = args.seed {
        config.master_seed = s;
    }
    config.validate()?;
    if let Some(p) = &args.dump_config {
        return save_config(&config, p);
    }
    let threads = args
        .threads
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));

    let record = if args.preset == PresetName::Fig2 {
        let episodes = args.trials.map_or(pushsim_cli::FIG2_EPISODES, |t| t as u64);
        run_fig2(&config, &args.out, args.bits, episodes, threads)?
    } else {
        let mut preset = ExperimentPreset::new(args.preset, config);
        if let Some(param) = args.sweep {
            anyhow::ensure!(args.preset == PresetName::Custom, "--sweep only applies to the custom preset");
            preset.sweep = Some(Sweep {
                param,
                values: args.values.clone(),
            });
        }
        run_preset(&preset, &args.out, threads).context("running preset")?
    };
    describe(&record, std::io::stdout().lock())?;
    Ok(())
}

fn main() -> ExitCode {
    match run(Args::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
