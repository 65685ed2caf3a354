use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "tanhforge", version, about = "Build and verify explicit tanh networks with certified error bounds")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Assemble a network for a catalog function and write it with a manifest.
    Build(BuildArgs),
    /// Measure the W^{k,inf} error of a stored network against a catalog function.
    Verify(VerifyArgs),
    /// Tabulate closed-form widths and error bounds.
    Bounds(BoundsArgs),
    /// Build and verify over lists of s and N, fitting the convergence rate.
    Sweep(SweepArgs),
    /// Run the property ledger.
    LemmaCheck(LemmaArgs),
    /// List the built-in target functions.
    Catalog,
}

#[derive(Debug, Clone, Args)]
pub struct FunctionArgs {
    /// Catalog label (see `tanhforge catalog`).
    #[arg(long = "f")]
    pub function: String,
    /// Frequency or scale parameter; `bounds --figure2` accepts a list.
    #[arg(long, value_delimiter = ',', default_value = "1.0")]
    pub a: Vec<f64>,
    #[arg(long, default_value_t = 1)]
    pub d: usize,
    /// Polynomial coefficients c0,c1,... for `poly`.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub coeffs: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BuildMode {
    /// Two hidden layers: Taylor bank, partition of unity and products.
    Theorem,
    /// One hidden layer, a single Taylor polynomial (needs R > d/2).
    AnalyticShallow,
    /// The two-layer network at s = 1 with the Lipschitz bound.
    Lipschitz,
}

#[derive(Debug, Args)]
pub struct BuildArgs {
    #[command(flatten)]
    pub function: FunctionArgs,
    #[arg(long, default_value_t = 3)]
    pub s: u32,
    #[arg(long, default_value_t = 0)]
    pub k: u32,
    #[arg(long = "N", default_value_t = 8)]
    pub n: usize,
    #[arg(long, default_value_t = 0.5)]
    pub delta: f64,
    #[arg(long, value_enum, default_value_t = BuildMode::Theorem)]
    pub mode: BuildMode,
    /// `double`, `high:BITS`, or `auto` (double unless the build warns).
    #[arg(long, default_value = "auto")]
    pub precision: String,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Network document written by `build`.
    #[arg(long)]
    pub net: PathBuf,
    #[command(flatten)]
    pub function: FunctionArgs,
    #[arg(long, default_value_t = 0)]
    pub k: u32,
    /// Total grid points (default 10^4, or 30^3 for d = 3).
    #[arg(long)]
    pub grid: Option<usize>,
    #[arg(long, default_value = "auto")]
    pub precision: String,
    /// Directory for report.csv and manifest.txt; stdout only when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BoundsArgs {
    /// Minimal-width table over frequencies --a and tolerances --tolerances.
    #[arg(long)]
    pub figure2: bool,
    #[arg(long = "f")]
    pub function: Option<String>,
    #[arg(long, value_delimiter = ',', default_value = "1.0")]
    pub a: Vec<f64>,
    #[arg(long, default_value_t = 1)]
    pub d: usize,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub coeffs: Vec<f64>,
    #[arg(long, default_value_t = 3)]
    pub s: u32,
    #[arg(long, default_value_t = 0)]
    pub k: u32,
    #[arg(long = "N", value_delimiter = ',', default_value = "4,8,16")]
    pub n: Vec<usize>,
    #[arg(long, default_value_t = 0.5)]
    pub delta: f64,
    #[arg(long, value_delimiter = ',', default_value = "1e-1,1e-2,1e-3,1e-4,1e-5,1e-6,1e-7")]
    pub tolerances: Vec<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub function: FunctionArgs,
    #[arg(long, value_delimiter = ',', default_value = "3")]
    pub s: Vec<u32>,
    #[arg(long = "N", value_delimiter = ',', default_value = "4,8,16")]
    pub n: Vec<usize>,
    #[arg(long, default_value_t = 0)]
    pub k: u32,
    #[arg(long, default_value_t = 0.5)]
    pub delta: f64,
    #[arg(long)]
    pub grid: Option<usize>,
    #[arg(long, default_value = "high:256")]
    pub precision: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FaultArg {
    None,
    MonomialWeight,
}

#[derive(Debug, Args)]
pub struct LemmaArgs {
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Corrupt a construction on purpose to see the ledger catch it.
    #[arg(long, value_enum, default_value_t = FaultArg::None)]
    pub fault: FaultArg,
}
