//! Command-line surface of the `single-proxy` binary.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(
    name = "single-proxy",
    version,
    about = "Kernel-based causal dose-response estimation with a single confounding proxy"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a synthetic dataset and write it as CSV.
    Simulate(SimulateArgs),
    /// Fit an estimator on a CSV dataset and write the model as JSON.
    Fit(FitArgs),
    /// Evaluate a fitted model's dose-response curve on a treatment grid.
    Evaluate(EvaluateArgs),
    /// Run the full synthetic benchmark and write a JSON report.
    Benchmark(BenchmarkArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum TreatmentMapArg {
    /// Treatment mean is the standard normal CDF of the confounder.
    NormalCdf,
    /// Treatment mean is the error function of the confounder.
    Erf,
}

impl TreatmentMapArg {
    pub fn to_core(self) -> single_proxy::TreatmentMap {
        match self {
            TreatmentMapArg::NormalCdf => single_proxy::TreatmentMap::NormalCdf,
            TreatmentMapArg::Erf => single_proxy::TreatmentMap::ErrorFunction,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            TreatmentMapArg::NormalCdf => "normal-cdf",
            TreatmentMapArg::Erf => "erf",
        }
    }
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// Number of rows to generate.
    #[arg(long)]
    pub n: usize,
    /// Outcome noise scale sigma (0 for a noiseless outcome).
    #[arg(long, default_value_t = 1.0)]
    pub noise: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output CSV path (columns a,y,w).
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = TreatmentMapArg::NormalCdf)]
    pub treatment_map: TreatmentMapArg,
    /// Also write the latent confounder as a trailing `u` column.
    #[arg(long)]
    pub debug_u: bool,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum MethodArg {
    /// Kernel ridge regression of outcome on treatment (confounded baseline).
    Krr,
    /// Two-stage kernel bridge estimator.
    Skpv,
    /// Maximum-moment-restriction bridge estimator.
    Spmmr,
}

#[derive(Args, Debug)]
pub struct FitArgs {
    #[arg(long, value_enum)]
    pub method: MethodArg,
    /// Input CSV (columns a,y,w; a,y suffices for krr).
    #[arg(long)]
    pub data: PathBuf,
    /// Ridge weight for kernel ridge regression and the two-stage first
    /// stage.
    #[arg(long, default_value_t = 0.001)]
    pub lambda: f64,
    /// Ridge weight for the bridge-coefficient solve.
    #[arg(long, default_value_t = 0.001)]
    pub eta: f64,
    /// Treatment-kernel bandwidth; overrides the median heuristic.
    #[arg(long)]
    pub bandwidth_a: Option<f64>,
    /// Outcome-kernel bandwidth; overrides the median heuristic.
    #[arg(long)]
    pub bandwidth_y: Option<f64>,
    /// Proxy-kernel bandwidth; overrides the median heuristic.
    #[arg(long)]
    pub bandwidth_w: Option<f64>,
    /// Multiplier applied to median-heuristic bandwidths.
    #[arg(long, default_value_t = 1.0)]
    pub bandwidth_scale: f64,
    /// Fraction of rows assigned to the first stage (skpv only); without
    /// it both stages use the full sample.
    #[arg(long)]
    pub split: Option<f64>,
    /// Seed for the split shuffle.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output model JSON path.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum TruthArg {
    /// No reference curve; emit `a,f_hat` only.
    None,
    /// Compare against the synthetic benchmark's structural function
    /// `a^2 - 0.3` and print the curve MSE.
    Synthetic,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    /// Fitted model JSON path.
    #[arg(long)]
    pub model: PathBuf,
    /// CSV providing the proxy sample and default grid range.
    #[arg(long)]
    pub data: PathBuf,
    /// Grid lower edge; default is the 2.5th percentile of the data
    /// treatments.
    #[arg(long, allow_hyphen_values = true)]
    pub grid_min: Option<f64>,
    /// Grid upper edge; default is the 97.5th percentile of the data
    /// treatments.
    #[arg(long, allow_hyphen_values = true)]
    pub grid_max: Option<f64>,
    #[arg(long, default_value_t = 100)]
    pub grid_points: usize,
    #[arg(long, value_enum, default_value_t = TruthArg::None)]
    pub truth: TruthArg,
    /// Output curve CSV path.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum BenchMethodArg {
    /// Confounded kernel ridge regression baseline.
    Regression,
    /// Alias for `regression`.
    Krr,
    /// Two-stage kernel bridge estimator.
    Skpv,
    /// Maximum-moment-restriction bridge estimator.
    Spmmr,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum StdModeArg {
    /// Standard error: population std of per-replication MSEs over sqrt(reps).
    Se,
    /// Raw population standard deviation of per-replication MSEs.
    Raw,
}

#[derive(Args, Debug)]
pub struct BenchmarkArgs {
    /// Rows generated per replication.
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    /// Replications per noise level.
    #[arg(long, default_value_t = 20)]
    pub reps: usize,
    /// Comma-separated outcome noise levels.
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.0, 0.1, 0.5, 1.0])]
    pub noise: Vec<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Comma-separated subset of regression,skpv,spmmr.
    #[arg(
        long,
        value_enum,
        value_delimiter = ',',
        default_values_t = vec![BenchMethodArg::Regression, BenchMethodArg::Skpv, BenchMethodArg::Spmmr]
    )]
    pub methods: Vec<BenchMethodArg>,
    #[arg(long, default_value_t = 0.001)]
    pub lambda: f64,
    #[arg(long, default_value_t = 0.001)]
    pub eta: f64,
    /// Multiplier applied to the per-replication median-heuristic
    /// bandwidths.
    #[arg(long, default_value_t = 1.0)]
    pub bandwidth_scale: f64,
    /// Lower edge of the evaluation grid, as a treatment percentile.
    #[arg(long, default_value_t = 2.5)]
    pub grid_min_percentile: f64,
    /// Upper edge of the evaluation grid, as a treatment percentile.
    #[arg(long, default_value_t = 97.5)]
    pub grid_max_percentile: f64,
    #[arg(long, default_value_t = 100)]
    pub grid_points: usize,
    #[arg(long, value_enum, default_value_t = StdModeArg::Se)]
    pub std: StdModeArg,
    /// Worker threads for replications; 0 uses all cores. Does not affect
    /// report values.
    #[arg(long, default_value_t = 0)]
    pub parallelism: usize,
    #[arg(long, value_enum, default_value_t = TreatmentMapArg::NormalCdf)]
    pub treatment_map: TreatmentMapArg,
    /// Output report JSON path.
    #[arg(long)]
    pub out: PathBuf,
}
