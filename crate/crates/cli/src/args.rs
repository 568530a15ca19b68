use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Robustness certification for LSTM sequence classifiers.
#[derive(Debug, Parser)]
#[command(name = "polycert", version, about)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Certify every example under a fixed perturbation.
    Certify {
        #[command(flatten)]
        io: IoArgs,
        #[command(flatten)]
        threat: ThreatArgs,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long, value_enum, default_value_t = MethodArg::Opt)]
        method: MethodArg,
    },
    /// Binary-search the largest certifiable perturbation per example.
    MaxEps {
        #[command(flatten)]
        io: IoArgs,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long, value_enum, default_value_t = MethodArg::Opt)]
        method: MethodArg,
        /// Perturb only this frame (1-based).
        #[arg(long)]
        frame: Option<usize>,
        /// Search over decibels relative to the signal peak instead of an
        /// absolute radius. Set --lo and --hi accordingly.
        #[arg(long)]
        decibel: bool,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        lo: f64,
        #[arg(long, default_value_t = 0.5, allow_hyphen_values = true)]
        hi: f64,
        #[arg(long, default_value_t = 1e-4)]
        tol: f64,
    },
    /// Search the perturbation region for a misclassified input.
    Falsify {
        #[command(flatten)]
        io: IoArgs,
        #[command(flatten)]
        threat: ThreatArgs,
        /// Random points tried before local search.
        #[arg(long, default_value_t = 200)]
        budget: usize,
        /// Coordinate-descent sweeps.
        #[arg(long, default_value_t = 20)]
        sweeps: usize,
    },
    /// Certify every example with both methods and compare.
    Bench {
        #[command(flatten)]
        io: IoArgs,
        #[command(flatten)]
        threat: ThreatArgs,
        #[command(flatten)]
        solver: SolverArgs,
    },
}

#[derive(Debug, Args)]
pub struct IoArgs {
    /// Model file (`polycert-model/1` JSON).
    #[arg(long)]
    pub model: PathBuf,
    /// Examples: a `polycert-input/1` JSON file or a `polycert-raw/1` header.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, env = "POLYCERT_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Examples processed concurrently.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// Write the JSON-lines report here instead of stdout.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Also write a CSV table.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Record wall time per example (makes reports nondeterministic).
    #[arg(long)]
    pub timing: bool,
}

#[derive(Debug, Args)]
pub struct ThreatArgs {
    /// L∞ radius.
    #[arg(long, conflicts_with = "db", required_unless_present = "db")]
    pub eps: Option<f64>,
    /// Radius in decibels relative to the signal peak.
    #[arg(long, allow_hyphen_values = true)]
    pub db: Option<f64>,
    /// Perturb only this frame (1-based).
    #[arg(long)]
    pub frame: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SolverArgs {
    /// Sample points per fitted plane.
    #[arg(long, default_value_t = 100)]
    pub samples: usize,
    #[arg(long, default_value_t = 100)]
    pub epochs: usize,
    #[arg(long, default_value_t = 100.0)]
    pub lr: f64,
    #[arg(long = "lr-decay", default_value_t = 0.98)]
    pub lr_decay: f64,
    #[arg(long, value_enum, default_value_t = OptimizerArg::Gd)]
    pub optimizer: OptimizerArg,
    /// Use plain interval arithmetic for the square and log stages.
    #[arg(long)]
    pub interval_preprocess: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Lp,
    Opt,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum OptimizerArg {
    Gd,
    Adam,
}
