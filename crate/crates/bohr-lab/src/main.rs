//! `bohr-lab <experiment> --config run.json [--seed U64] [--workers K]
//! [--out DIR] [--plot]`
//!
//! Exit codes: 0 success, 2 validation error, 3 capacity error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use bohr_lab::harness::{
    self, ExperimentConfig, EXPERIMENT_NAMES, OUT_DIR_ENV,
};
use bohr_lab::Error;

#[derive(Parser, Debug)]
#[command(
    name = "bohr-lab",
    version,
    about = "Reproducible experiments on randomly selected integer sequences"
)]
struct Cli {
    /// Experiment to run; must match the config file's `experiment` field.
    experiment: String,

    /// Path to the JSON run configuration.
    #[arg(long)]
    config: PathBuf,

    /// Master seed override (takes precedence over the config file).
    #[arg(long)]
    seed: Option<u64>,

    /// Worker thread count (default: one per CPU).
    #[arg(long)]
    workers: Option<usize>,

    /// Output directory override (falls back to the config file, then to
    /// the BOHR_LAB_OUT environment variable).
    #[arg(long)]
    out: Option<PathBuf>,

    /// Also emit one SVG plot per table.
    #[arg(long)]
    plot: bool,
}

fn exit_code_for(err: &Error) -> ExitCode {
    match err {
        Error::Capacity(_) => ExitCode::from(3),
        Error::Io(_) => ExitCode::from(1),
        _ => ExitCode::from(2),
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    if !EXPERIMENT_NAMES.contains(&cli.experiment.as_str()) {
        return Err(Error::UnknownExperiment(cli.experiment));
    }
    let text = std::fs::read_to_string(&cli.config)?;
    let mut config: ExperimentConfig = serde_json::from_str(&text)?;
    if config.spec.name() != cli.experiment {
        return Err(Error::InvalidParameter(format!(
            "config describes experiment '{}' but '{}' was requested",
            config.spec.name(),
            cli.experiment
        )));
    }
    if let Some(seed) = cli.seed {
        config.master_seed = seed;
    }
    // Precedence: --out flag, then config file, then environment.
    let out_dir = cli
        .out
        .or_else(|| config.out_dir.as_ref().map(PathBuf::from))
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .ok_or_else(|| {
            Error::InvalidParameter(format!(
                "no output directory: pass --out, set out_dir in the config, or set {OUT_DIR_ENV}"
            ))
        })?;

    let envelope = harness::run(&config, cli.workers)?;
    let written = harness::write_envelope(&envelope, &out_dir)?;
    let plots = if cli.plot {
        harness::write_plots(&envelope, &out_dir)?
    } else {
        Vec::new()
    };
    println!(
        "{}: wrote {} files to {} in {} ms (digest {})",
        envelope.experiment,
        written.len() + plots.len(),
        out_dir.display(),
        envelope.wall_clock_ms,
        &envelope.config_digest[..12],
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            exit_code_for(&err)
        }
    }
}
