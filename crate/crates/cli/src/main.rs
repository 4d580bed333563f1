use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rdl_cli::compare::compare;
use rdl_cli::config::LoadedConfig;
use rdl_cli::error::CliError;
use rdl_cli::export::{rdm_export, ExportRequest};
use rdl_cli::run::{output_root, train};
use rdl_core::rdm::PairwiseMetric;
use serde_json::json;

/// Representational distance learning experiments.
///
/// Results are written below $RDL_OUTPUT_ROOT (default `runs`).
#[derive(Parser)]
#[command(name = "rdl", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one configured run.
    Train { config: PathBuf },
    /// Check a configuration without running it.
    Validate { config: PathBuf },
    /// Pairwise McNemar tests and RDM distances between finished runs.
    Compare {
        #[arg(required = true)]
        runs: Vec<PathBuf>,
    },
    /// Export the RDM of one tap of a checkpoint on a dataset.
    RdmExport {
        checkpoint: PathBuf,
        /// `.rdld` cache or IDX images file
        dataset: PathBuf,
        tap: String,
        #[arg(long, default_value_t = 10)]
        per_class: usize,
        #[arg(long, default_value = "euclidean")]
        metric: String,
    },
}

fn run(cli: Cli) -> Result<serde_json::Value, CliError> {
    let root = output_root();
    match cli.command {
        Command::Train { config } => {
            let cfg = LoadedConfig::read(&config)?;
            let rec = train(&cfg, &root)?;
            Ok(json!({
                "run": root.join(&rec.name),
                "method": rec.method,
                "final_test_error": rec.final_test_error,
                "wall_clock_seconds": rec.wall_clock_seconds,
            }))
        }
        Command::Validate { config } => {
            let cfg = LoadedConfig::read(&config)?;
            cfg.config.validate()?;
            Ok(json!({ "valid": true, "name": cfg.config.name }))
        }
        Command::Compare { runs } => {
            let (dir, report) = compare(&runs, &root)?;
            Ok(json!({ "output": dir, "models": report.models, "test_errors": report.test_errors }))
        }
        Command::RdmExport {
            checkpoint,
            dataset,
            tap,
            per_class,
            metric,
        } => {
            let metric: PairwiseMetric = metric.parse()?;
            let req = ExportRequest {
                checkpoint: &checkpoint,
                dataset: &dataset,
                tap: &tap,
                per_class,
                metric,
            };
            let csv = rdm_export(&req, &root)?;
            Ok(json!({ "rdm": csv }))
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(v) => {
            println!("{}", v);
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::FAILURE
        }
    }
}
