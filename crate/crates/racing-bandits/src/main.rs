//! Command-line experiment runner.
//!
//! Resolves a configuration (`preset < config file < CLI flags`), runs the
//! experiment, writes the result table to stdout or `--out`, prints the
//! per-agent aggregate to stderr, and — when writing to a file — drops a
//! `<out>.meta.json` reproducibility sidecar next to the table.
//!
//! Exit codes: 0 on success, 2 on configuration errors, 1 on runtime
//! failures.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use racing_bandits::error::Error;
use racing_bandits::harness::{
    render_summary, run_experiment, summarize, to_csv, to_json, ExperimentConfig, OutputFormat,
    Overrides,
};

/// Bayesian multi-armed-bandit experiments: Thompson sampling with
/// non-conjugate priors decided by racing best-arm identification, against
/// exact conjugate sampling, an SMC baseline, and a random control.
#[derive(Debug, Parser)]
#[command(name = "racing-bandits", version)]
struct Cli {
    /// Experiment preset: sensitivity, conjugate, nonconjugate, dependent,
    /// or custom.
    #[arg(long)]
    experiment: Option<String>,

    /// Flat key=value config file (keys mirror the flags, plus k,
    /// batch_size, absolute_cap, smc_particles).
    #[arg(long)]
    config: Option<PathBuf>,

    /// Master seed; replication r runs on seed XOR r.
    #[arg(long)]
    seed: Option<u64>,

    /// Write the table here instead of stdout (adds a .meta.json sidecar).
    #[arg(long)]
    out: Option<PathBuf>,

    /// Number of independent replications.
    #[arg(long)]
    replications: Option<usize>,

    /// Steps per replication.
    #[arg(long)]
    horizon: Option<usize>,

    /// Racing error tolerance for plain racing-ts agents.
    #[arg(long)]
    delta: Option<f64>,

    /// Racing slack for plain racing-ts agents.
    #[arg(long)]
    sigma: Option<f64>,

    /// Comma-separated agents: vanilla-ts[:A/B], racing-ts[:D/S],
    /// smc-ts[:N], random.
    #[arg(long)]
    agents: Option<String>,

    /// Table format: csv or json.
    #[arg(long)]
    format: Option<String>,
}

impl Cli {
    fn into_overrides(self) -> Result<(Option<PathBuf>, Overrides), Error> {
        let Cli {
            experiment,
            config,
            seed,
            out,
            replications,
            horizon,
            delta,
            sigma,
            agents,
            format,
        } = self;
        let overrides = Overrides {
            experiment: experiment.as_deref().map(str::parse).transpose()?,
            seed,
            k: None,
            replications,
            horizon,
            delta,
            sigma,
            batch_size: None,
            absolute_cap: None,
            smc_particles: None,
            agents,
            format: format.as_deref().map(str::parse).transpose()?,
            out,
        };
        Ok((config, overrides))
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    let (config_path, cli_overrides) = cli.into_overrides()?;
    let file_overrides = config_path
        .as_deref()
        .map(Overrides::from_file)
        .transpose()?;
    let config = ExperimentConfig::resolve(file_overrides.as_ref(), &cli_overrides)?;

    let result = run_experiment(&config)?;
    let table = match config.format {
        OutputFormat::Csv => to_csv(&result),
        OutputFormat::Json => to_json(&result)?,
    };

    match &config.out {
        Some(path) => {
            std::fs::write(path, table)?;
            let sidecar = PathBuf::from(format!("{}.meta.json", path.display()));
            let file = std::fs::File::create(&sidecar)?;
            racing_bandits::harness::output::write_metadata(file, &result)?;
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(table.as_bytes())?;
        }
    }

    eprint!("{}", render_summary(&summarize(&result)));
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) | Error::InvalidParameter(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
