//! Batch CLI for effort-aware fairness audits.

mod commands;
mod common;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "eaf",
    version,
    about = "Effort-aware fairness auditing over longitudinal panels",
    long_about = "Computes per-subject effort from trajectory kinematics, audits risk models \
                  for effort-aware individual and group fairness, trains a built-in logistic \
                  predictor, generates synthetic datasets, and runs the accompanying \
                  statistical analyses."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full audit: effort, individual fairness, parity curves, baselines
    Audit(commands::audit::AuditArgs),
    /// Effort-aware individual fairness scores per model
    Eaif(commands::eaif::EaifArgs),
    /// Effort-aware group parity curves per attribute
    Eagf(commands::eagf::EagfArgs),
    /// Train the built-in logistic model with k-fold out-of-sample scoring
    Train(commands::train::TrainArgs),
    /// Generate a seeded synthetic dataset (panel, demographics, labels, risks)
    Synth(commands::synth::SynthArgs),
    /// Statistical analyses (correlation report, truth-serum scoring)
    #[command(subcommand)]
    Stats(commands::stats::StatsCommand),
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Audit(args) => commands::audit::run(args),
        Command::Eaif(args) => commands::eaif::run(args),
        Command::Eagf(args) => commands::eagf::run(args),
        Command::Train(args) => commands::train::run(args),
        Command::Synth(args) => commands::synth::run(args),
        Command::Stats(command) => commands::stats::run(command),
    };
    if let Err(err) = result {
        eprintln!("error: {err:#}");
        // input-validation failures exit 2, everything else 1
        let validation = err.chain().any(|cause| {
            cause
                .downcast_ref::<eaf_core::Error>()
                .is_some_and(eaf_core::Error::is_validation)
        });
        std::process::exit(if validation { 2 } else { 1 });
    }
}
