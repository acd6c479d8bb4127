//! Command-line front end. `spinjj run` executes one configured experiment
//! and writes `<out>/<experiment>.csv` plus `<out>/<experiment>.summary.json`;
//! `spinjj validate` parses and checks a configuration without running it.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical-check failure.

pub mod config;
mod experiments;
mod output;

pub use config::{
    linspace, load_config, parse_overrides, EstimateInputs, Experiment, RunConfig, SweepSpec,
};
pub use experiments::{preflight, run_experiment, ExperimentOutput, WORKERS_ENV};
pub use output::CsvTable;

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use thiserror::Error;

use crate::dynamics::DynamicsError;
use crate::gates::GatesError;
use crate::metrics::MetricsError;
use crate::model::ModelError;
use crate::qcore::QcoreError;

/// CLI failure modes, mapped to process exit codes.
#[derive(Debug, Error)]
pub enum CliError {
    /// Unusable configuration or inputs (exit status 2).
    #[error("configuration error: {0}")]
    Config(String),
    /// A numerical check failed mid-run (exit status 3).
    #[error("numerical check failed: {0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<QcoreError> for CliError {
    fn from(e: QcoreError) -> Self {
        CliError::Numerical(e.to_string())
    }
}

impl From<DynamicsError> for CliError {
    fn from(e: DynamicsError) -> Self {
        match e {
            DynamicsError::Instability { .. }
            | DynamicsError::TraceDeviation { .. }
            | DynamicsError::ConvergenceFailure { .. } => CliError::Numerical(e.to_string()),
            DynamicsError::Qcore(inner) => CliError::from(inner),
            DynamicsError::Model(inner) => CliError::from(inner),
            DynamicsError::InvalidArgument(_) | DynamicsError::InvalidState(_) => {
                CliError::Config(e.to_string())
            }
        }
    }
}

impl From<MetricsError> for CliError {
    fn from(e: MetricsError) -> Self {
        match e {
            MetricsError::InvalidArgument(_) => CliError::Config(e.to_string()),
            MetricsError::Dynamics(inner) => CliError::from(inner),
            MetricsError::Qcore(inner) => CliError::from(inner),
            MetricsError::InvalidDensityMatrix(_)
            | MetricsError::NotTracePreserving { .. }
            | MetricsError::NotHermiticityPreserving { .. } => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<GatesError> for CliError {
    fn from(e: GatesError) -> Self {
        match e {
            GatesError::InvalidArgument(_) | GatesError::Infeasible(_) => {
                CliError::Config(e.to_string())
            }
            GatesError::Model(inner) => CliError::from(inner),
            GatesError::Dynamics(inner) => CliError::from(inner),
            GatesError::Metrics(inner) => CliError::from(inner),
            GatesError::Qcore(inner) => CliError::from(inner),
        }
    }
}

/// Paths written by a successful run.
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub csv_path: PathBuf,
    pub summary_path: PathBuf,
}

/// Executes the configured experiment and writes the CSV and summary files
/// into the configured output directory.
pub fn run(config: &RunConfig) -> Result<RunArtifacts, CliError> {
    let output = run_experiment(config)?;
    let dir = PathBuf::from(&config.output_path);
    std::fs::create_dir_all(&dir).map_err(|e| {
        CliError::Config(format!(
            "cannot create output directory {}: {e}",
            dir.display()
        ))
    })?;
    let stem = config.experiment.name();
    let csv_path = dir.join(format!("{stem}.csv"));
    let summary_path = dir.join(format!("{stem}.summary.json"));
    let csv_text = output.csv.render()?;
    let mut summary_text = serde_json::to_string_pretty(&output.summary)
        .map_err(|e| CliError::Numerical(format!("cannot serialize the summary: {e}")))?;
    summary_text.push('\n');
    std::fs::write(&csv_path, csv_text)
        .map_err(|e| CliError::Config(format!("cannot write {}: {e}", csv_path.display())))?;
    std::fs::write(&summary_path, summary_text)
        .map_err(|e| CliError::Config(format!("cannot write {}: {e}", summary_path.display())))?;
    Ok(RunArtifacts {
        csv_path,
        summary_path,
    })
}

#[derive(Parser)]
#[command(
    name = "spinjj",
    version,
    about = "Simulation toolkit for junction-mediated spin-ensemble gates"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute an experiment described by a JSON configuration file.
    Run {
        /// Path to the JSON configuration file.
        #[arg(long)]
        config: PathBuf,
        /// Scalar override as a dotted.path=value pair (value parsed as JSON);
        /// repeatable.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        /// Output directory (overrides output_path from the file).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Parse and validate a configuration without running it.
    Validate {
        /// Path to the JSON configuration file.
        #[arg(long)]
        config: PathBuf,
    },
}

/// Process entry point; returns the exit status.
pub fn main_entry() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run { config, set, out } => {
            let overrides = parse_overrides(&set)?;
            let mut run_config = load_config(&config, &overrides)?;
            if let Some(dir) = out {
                run_config.output_path = dir.to_string_lossy().into_owned();
            }
            let artifacts = run(&run_config)?;
            println!("wrote {}", artifacts.csv_path.display());
            println!("wrote {}", artifacts.summary_path.display());
            Ok(())
        }
        Command::Validate { config } => {
            let run_config = load_config(&config, &[])?;
            preflight(&run_config)?;
            println!(
                "configuration valid: experiment '{}'",
                run_config.experiment.name()
            );
            Ok(())
        }
    }
}
