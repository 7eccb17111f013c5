//! Command-line definitions.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::plan_file::DetectorKindSpec;

#[derive(Debug, Parser)]
#[command(name = "coherent-rx", version, about = "Binary coherent-state discrimination receivers")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Helstrom, Kennedy and homodyne error rates over a grid of m.
    Bounds(BoundsArgs),
    /// Single-channel error rate as a function of the displacement increment.
    SweepBeta(SweepArgs),
    /// Optimized feed-forward receivers over a grid of m.
    Optimize(OptimizeArgs),
    /// Error rate of one plan, exactly or by Monte Carlo.
    Simulate(SimulateArgs),
    /// Writes every receiver series and a manifest into a directory.
    Curves(CurvesArgs),
}

#[derive(Debug, Args)]
pub struct BoundsArgs {
    /// Mean photon numbers: VALUE, V1,V2,... or START:STOP:COUNT.
    #[arg(long)]
    pub m: String,
    /// Prior probability of the first state.
    #[arg(long, default_value_t = 0.5)]
    pub p1: f64,
    /// Line-delimited JSON instead of CSV.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StrategyArg {
    #[value(name = "onoff", alias = "on-off")]
    OnOff,
    Pnr,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub m: f64,
    #[arg(long, default_value_t = 0.5)]
    pub p1: f64,
    #[arg(long, value_enum, default_value = "pnr")]
    pub strategy: StrategyArg,
    /// Increment interval LO:HI.
    #[arg(long, default_value = "0:3")]
    pub beta_range: String,
    /// Number of evenly spaced increments, both ends included.
    #[arg(long, default_value_t = 600)]
    pub points: usize,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Clone, Args)]
pub struct DetectorArgs {
    #[arg(long, value_enum, default_value = "onoff")]
    pub detector: DetectorKindSpec,
    /// Detection efficiency in (0, 1].
    #[arg(long, default_value_t = 1.0)]
    pub efficiency: f64,
    /// Mean dark count per channel.
    #[arg(long, default_value_t = 0.0)]
    pub dark_mean: f64,
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    #[arg(long)]
    pub m: String,
    #[arg(long, default_value_t = 0.5)]
    pub p1: f64,
    /// Number of feed-forward channels.
    #[arg(long, default_value_t = 1)]
    pub channels: usize,
    /// Optimize the energy split as well as the increments.
    #[arg(long)]
    pub inhomogeneous: bool,
    #[command(flatten)]
    pub detector: DetectorArgs,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScheduleArg {
    /// Large-N increment schedule for equal priors.
    Asymptotic,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// JSON plan file; replaces the plan flags below.
    #[arg(long, conflicts_with_all = ["channels", "beta", "schedule", "fractions", "detector", "efficiency", "dark_mean"])]
    pub plan: Option<PathBuf>,
    #[arg(long)]
    pub m: f64,
    #[arg(long, default_value_t = 0.5)]
    pub p1: f64,
    #[arg(long)]
    pub channels: Option<usize>,
    /// Increments, one per channel or a single value for all.
    #[arg(long, conflicts_with = "schedule")]
    pub beta: Option<String>,
    #[arg(long, value_enum)]
    pub schedule: Option<ScheduleArg>,
    /// Energy fractions, one per channel; even split when omitted.
    #[arg(long)]
    pub fractions: Option<String>,
    #[command(flatten)]
    pub detector: DetectorArgs,
    #[arg(long, default_value_t = 1_000_000)]
    pub trials: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Work partitions; the result does not depend on this.
    #[arg(long, default_value_t = 1)]
    pub shards: u32,
    /// Enumerate the outcome tree instead of sampling.
    #[arg(long, conflicts_with = "mc")]
    pub exact: bool,
    /// Monte Carlo sampling (the default).
    #[arg(long)]
    pub mc: bool,
    /// Accepted for uniformity; the report is always one JSON object.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct CurvesArgs {
    #[arg(long, default_value = "0.05:1.5:30")]
    pub m: String,
    /// Channel counts of the feed-forward series.
    #[arg(long, default_value = "1,2,3")]
    pub channels: String,
    #[arg(long, default_value_t = 0.5)]
    pub p1: f64,
    #[arg(long)]
    pub inhomogeneous: bool,
    #[command(flatten)]
    pub detector: DetectorArgs,
    /// Recorded in the manifest; the series are deterministic.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory, created if missing.
    #[arg(long)]
    pub out: PathBuf,
    /// Line-delimited JSON series files instead of CSV.
    #[arg(long)]
    pub json: bool,
}
