use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};
use traffic_cli::config::ExperimentConfig;
use traffic_cli::{commands, write_artifacts};

/// Fuzzy cellular traffic model experiments with a NaSch Monte Carlo
/// reference.
#[derive(Parser, Debug)]
#[command(name = "fcmsim", version, about)]
struct Args {
    /// TOML experiment configuration; defaults apply when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Master seed, overriding the configuration.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,

    /// Output directory, overriding the configuration.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Use paper-scale run counts and sweep resolution.
    #[arg(long, global = true)]
    full_scale: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Saturation flow of the deterministic rules.
    Table1,
    /// Saturation percentiles over the deceleration probability.
    Sweep,
    /// Fit the fuzzy saturation target to the NaSch distribution.
    Calibrate,
    /// Probe trajectories, travel times and counts on the arterial.
    Arterial,
    /// Cost of one fuzzy run against a NaSch Monte Carlo.
    Bench,
}

fn load(args: &Args) -> Result<ExperimentConfig> {
    let mut config = match &args.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if args.full_scale {
        config = config.full_scale();
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(out) = &args.out {
        config.output_dir = out.clone();
    }
    config.validate()?;
    Ok(config)
}

fn run(args: &Args) -> Result<()> {
    let config = load(args)?;
    let artifacts = match args.command {
        Command::Table1 => commands::table1(&config)?,
        Command::Sweep => commands::sweep(&config)?,
        Command::Calibrate => commands::calibrate(&config)?.1,
        Command::Arterial => commands::arterial(&config)?.1,
        Command::Bench => commands::bench(&config)?.1,
    };
    write_artifacts(&config.output_dir, &artifacts)?;
    for a in &artifacts {
        log::info!("wrote {}", config.output_dir.join(&a.name).display());
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = Args::parse();
    match run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
