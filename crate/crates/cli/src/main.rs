//! `lab`: runs the cat1lab experiments from a TOML configuration.

mod config;
mod error;
mod runner;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{Config, Experiment};
use error::LabError;

/// Exit status when an experiment ran but its verdict failed.
const EXPERIMENT_FAILED: u8 = 4;

#[derive(Parser)]
#[command(
    name = "lab",
    version,
    about = "Boundary-representation experiments on Schottky groups"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiments selected in a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Orbit growth and critical exponent.
    Orbit(Overrides),
    /// Patterson measure and its conformality, invariance and shadow audits.
    Measure(Overrides),
    /// Harish-Chandra estimate table.
    Hc(Overrides),
    /// Matrix coefficients of the cone averages against their limits.
    #[command(name = "thmA", alias = "thm-a")]
    ThmA(Overrides),
    /// Coefficient matrix of the normalized averages on a small basis.
    #[command(name = "corB", alias = "cor-b")]
    CorB(Overrides),
    /// Averaged orbital measures against the conformal and Poisson targets.
    #[command(name = "thmD", alias = "thm-d")]
    ThmD(Overrides),
    /// Equidistribution of orbit pairs in arcs.
    Roblin(Overrides),
    /// Invariant suite: geometry, unitarity, density audits, shadow lemma, kernels.
    Checks(Overrides),
}

/// Shared flags; without `--config` the shipped reference group is used.
#[derive(Args)]
struct Overrides {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    max_dist: Option<f64>,
    #[arg(long)]
    bins: Option<usize>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Overrides {
    fn resolve(&self) -> Result<Config, LabError> {
        let mut c = match &self.config {
            Some(path) => Config::load(path)?,
            None => Config::reference(),
        };
        if let Some(d) = self.max_dist {
            c.orbit.max_dist = d;
        }
        if let Some(b) = self.bins {
            c.measure.bin_count = b;
        }
        if let Some(r) = self.rho {
            c.representation.rho = vec![r];
        }
        if let Some(out) = &self.out {
            c.run.output_dir = out.display().to_string();
        }
        c.validate()?;
        Ok(c)
    }
}

fn configure_threads() -> Result<(), LabError> {
    let Ok(value) = std::env::var("LAB_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| {
            LabError::Config(format!(
                "LAB_THREADS must be a positive integer, got {value:?}"
            ))
        })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| LabError::Config(format!("cannot start {threads} worker threads: {e}")))
}

fn dispatch(cli: Cli) -> Result<runner::RunOutcome, LabError> {
    configure_threads()?;
    let single = |o: &Overrides, e: Experiment| -> Result<runner::RunOutcome, LabError> {
        runner::execute(o.resolve()?, Some(vec![e]))
    };
    match cli.command {
        Command::Run { config, out } => {
            let mut c = Config::load(&config)?;
            if let Some(out) = out {
                c.run.output_dir = out.display().to_string();
            }
            let list = c.ordered_experiments();
            runner::execute(c, Some(list))
        }
        Command::Orbit(o) => single(&o, Experiment::Orbit),
        Command::Measure(o) => single(&o, Experiment::Measure),
        Command::Hc(o) => single(&o, Experiment::Hc),
        Command::ThmA(o) => single(&o, Experiment::ThmA),
        Command::CorB(o) => single(&o, Experiment::CorB),
        Command::ThmD(o) => single(&o, Experiment::ThmD),
        Command::Roblin(o) => single(&o, Experiment::Roblin),
        Command::Checks(o) => runner::execute(o.resolve()?, None),
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(outcome) => {
            println!("{}", outcome.dir.display());
            if outcome.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXPERIMENT_FAILED)
            }
        }
        Err(e) => {
            eprintln!("lab: {e}");
            e.exit_code()
        }
    }
}
