//! Command-line arguments.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use protoselect::Method;
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(
    name = "protoselect",
    version,
    about = "Weighted prototype selection under MMD"
)]
pub struct Cli {
    /// Worker threads (overrides PROTOSELECT_THREADS).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Select weighted prototypes from SOURCE that represent TARGET.
    Select(SelectArgs),
    /// Select prototypes, then report the worst-represented source rows.
    Criticize(CriticizeArgs),
    /// Rank datasets by how well each one's prototypes represent the others.
    Rank(RankArgs),
    /// Check the approximation guarantees on seeded random instances.
    Verify(VerifyArgs),
    /// Time ProtoDash against ProtoGreedy over a size grid.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodArg {
    Dash,
    Greedy,
    L2c,
    #[value(name = "l2c-a")]
    #[serde(rename = "l2c-a")]
    L2cA,
    Random,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Dash => Method::ProtoDash,
            MethodArg::Greedy => Method::ProtoGreedy,
            MethodArg::L2c => Method::L2cEqual,
            MethodArg::L2cA => Method::L2cAdapted,
            MethodArg::Random => Method::RandomW,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelArg {
    Gaussian,
    Linear,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DataArgs {
    /// Skip the first row of every CSV file.
    #[arg(long)]
    pub header: bool,

    /// Z-score features using statistics pooled over all inputs.
    #[arg(long)]
    pub standardize: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct KernelArgs {
    #[arg(long, value_enum, default_value_t = KernelArg::Gaussian)]
    pub kernel: KernelArg,

    /// Gaussian bandwidth.
    #[arg(long, conflicts_with_all = ["median_bandwidth", "cv"])]
    pub sigma: Option<f64>,

    /// Use the median pairwise distance as bandwidth (the default).
    #[arg(long, conflicts_with = "cv")]
    pub median_bandwidth: bool,

    /// Comma-separated candidate bandwidths scored on a held-out half of the target.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub cv: Option<Vec<f64>>,

    /// Added to the Gram diagonal.
    #[arg(long, default_value_t = 1e-10)]
    pub jitter: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SelectArgs {
    pub target: PathBuf,
    pub source: PathBuf,

    #[arg(long, value_enum, default_value_t = MethodArg::Dash)]
    pub method: MethodArg,

    /// Number of prototypes.
    #[arg(long, required_unless_present = "epsilon", conflicts_with = "epsilon")]
    pub m: Option<usize>,

    /// Stop when the next prototype would raise the objective by less than this.
    #[arg(long)]
    pub epsilon: Option<f64>,

    /// Select OVERSAMPLE * m prototypes, then keep the m heaviest.
    #[arg(long, default_value_t = 1)]
    pub oversample: usize,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Solver KKT tolerance.
    #[arg(long, default_value_t = 1e-8)]
    pub kkt_tolerance: f64,

    /// Solver iteration cap per solve.
    #[arg(long)]
    pub max_iterations: Option<usize>,

    /// Record wall-clock timings (makes output run-dependent).
    #[arg(long)]
    pub timings: bool,

    /// Output file (stdout when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,

    #[command(flatten)]
    pub data: DataArgs,

    #[command(flatten)]
    pub kernel: KernelArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CriticizeArgs {
    /// Number of criticisms.
    #[arg(long, default_value_t = 5)]
    pub count: usize,

    #[command(flatten)]
    pub select: SelectArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct RankArgs {
    /// Two or more CSV files, one dataset each.
    #[arg(required = true, num_args = 2..)]
    pub datasets: Vec<PathBuf>,

    /// Prototypes per dataset.
    #[arg(long, default_value_t = 10)]
    pub m: usize,

    /// Dataset labels (defaults to file stems).
    #[arg(long, value_delimiter = ',')]
    pub names: Option<Vec<String>>,

    /// Evaluate self-fit weights as they are instead of re-solving per target.
    #[arg(long)]
    pub frozen_weights: bool,

    /// Graph edges per target.
    #[arg(long, default_value_t = 1)]
    pub top: usize,

    /// Directory receiving rank.json, averages.json, graph.dot and graph.json.
    #[arg(long)]
    pub out_dir: PathBuf,

    #[command(flatten)]
    pub data: DataArgs,

    /// Gaussian bandwidth (median of pooled pairwise distances when absent).
    #[arg(long)]
    pub sigma: Option<f64>,

    #[arg(long, default_value_t = 1e-10)]
    pub jitter: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct VerifyArgs {
    #[arg(long, default_value_t = 200)]
    pub instances: usize,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Use K = I with random mean maps instead of gaussian data.
    #[arg(long)]
    pub identity_kernel: bool,

    #[arg(long, default_value_t = 15)]
    pub max_n1: usize,

    #[arg(long, default_value_t = 10)]
    pub max_n2: usize,

    #[arg(long, default_value_t = 3)]
    pub max_m: usize,

    #[arg(long, default_value_t = 0.5)]
    pub min_sigma: f64,

    #[arg(long, default_value_t = 2.0)]
    pub max_sigma: f64,

    #[arg(long, default_value_t = 2)]
    pub dim: usize,

    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct BenchArgs {
    /// Source sizes.
    #[arg(long, value_delimiter = ',', default_value = "250,500,1000,2000")]
    pub sizes: Vec<usize>,

    /// Prototype counts.
    #[arg(long, value_delimiter = ',', default_value = "1,10,50,100")]
    pub ms: Vec<usize>,

    /// Target size (defaults to the source size).
    #[arg(long)]
    pub n1: Option<usize>,

    #[arg(long, default_value_t = 5)]
    pub dim: usize,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    #[arg(long)]
    pub out: Option<PathBuf>,
}
