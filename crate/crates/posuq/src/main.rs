use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use posuq::config::{Overrides, RunConfig};
use posuq::pipeline;

/// ToA positioning with uncertainty assessment: simulate an indoor
/// deployment, train GP / RF models, and evaluate position estimates
/// together with their uncertainty.
#[derive(Parser)]
#[command(name = "posuq", version)]
struct Cli {
    /// TOML configuration file (defaults apply when omitted).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Root RNG seed, overriding the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Number of Monte-Carlo samples for the GP uncertainty.
    #[arg(long = "num-samples", global = true)]
    num_samples: Option<usize>,
    /// Position solver iteration cap.
    #[arg(long = "max-iter", global = true)]
    max_iter: Option<usize>,
    /// Position solver step tolerance in meters.
    #[arg(long = "pos-tol", global = true)]
    pos_tol: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the ToA dataset and write the train/test CSVs.
    Simulate,
    /// Train the per-BS GP models and the random forest.
    Train {
        /// Select RF size/depth by 5-fold cross-validation.
        #[arg(long)]
        cv: bool,
    },
    /// Run all three estimators over the test split and write report CSVs.
    Evaluate,
    /// Pretty-print summary.csv.
    Report,
}

fn run() -> anyhow::Result<()> {
    let cli = Cli::parse();
    let mut overrides = Overrides {
        seed: cli.seed,
        num_samples: cli.num_samples,
        max_iterations: cli.max_iter,
        position_tolerance: cli.pos_tol,
        cross_validate: None,
    };
    if let Command::Train { cv: true } = cli.command {
        overrides.cross_validate = Some(true);
    }
    let cfg = RunConfig::load(cli.config.as_deref(), &overrides)?;
    match cli.command {
        Command::Simulate => {
            let (n_train, n_test) = pipeline::cmd_simulate(&cfg)?;
            println!("wrote {n_train} train rows, {n_test} test rows");
        }
        Command::Train { .. } => {
            let n_gp = pipeline::cmd_train(&cfg)?;
            println!("trained {n_gp} GP models and 1 random forest");
        }
        Command::Evaluate => {
            let out = pipeline::cmd_evaluate(&cfg)?;
            println!(
                "evaluated {} test UEs over {} methods",
                out.ue_indices.len(),
                out.report.per_method.len()
            );
        }
        Command::Report => {
            print!("{}", pipeline::cmd_report(&cfg)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
