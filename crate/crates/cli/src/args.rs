use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use swdgp::bench::{Design, Method, SyntheticFunction};
use swdgp::{BandOrder, PerturbationOrder};

#[derive(Debug, Parser)]
#[command(
    name = "swdgp",
    version,
    about = "Gaussian-process regression with standing-wave banded kernels"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a GP to targets observed on a regular 1-D grid and predict.
    FitGrid(FitGridArgs),
    /// Fit the latent-grid GP to scattered 1-D data and predict.
    FitLatent(FitLatentArgs),
    /// Run the synthetic accuracy/runtime benchmark.
    Bench(BenchArgs),
    /// Write a synthetic data set as CSV.
    Generate(GenerateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GridMethod {
    /// Standing-wave solve, direct transforms.
    Direct,
    /// Standing-wave solve, FFT transforms.
    Fft,
    /// Dense Cholesky on the same banded kernel.
    ExactBanded,
    /// Dense Cholesky on the full squared-exponential kernel.
    Exact,
}

#[derive(Debug, Args)]
#[group(multiple = false)]
pub struct LengthScaleArgs {
    /// Kernel length scale.
    #[arg(long)]
    pub length_scale: Option<f64>,
    /// Use 0.75 of the admissible maximum for the grid (the default).
    #[arg(long)]
    pub auto_length_scale: bool,
}

#[derive(Debug, Args)]
pub struct KernelArgs {
    /// Band order of the kernel approximation.
    #[arg(long, default_value = "3", value_parser = parse_band)]
    pub band: BandOrder,
    #[command(flatten)]
    pub length: LengthScaleArgs,
    /// Signal standard deviation sigma.
    #[arg(long, default_value_t = 1.0)]
    pub signal_std: f64,
}

#[derive(Debug, Args)]
pub struct GridArgs {
    /// Lower end of the grid (default: smallest input).
    #[arg(long, allow_negative_numbers = true)]
    pub grid_lo: Option<f64>,
    /// Upper end of the grid (default: largest input).
    #[arg(long, allow_negative_numbers = true)]
    pub grid_hi: Option<f64>,
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// Input CSV of x then y (header optional).
    #[arg(long)]
    pub input: PathBuf,
    /// Output path; standard output when omitted or `-`.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Number of evenly spaced test points.
    #[arg(long, default_value_t = 200)]
    pub test_points: usize,
    /// Lower end of the test range (default: grid start).
    #[arg(long, allow_negative_numbers = true)]
    pub test_lo: Option<f64>,
    /// Upper end of the test range (default: grid end).
    #[arg(long, allow_negative_numbers = true)]
    pub test_hi: Option<f64>,
}

#[derive(Debug, Args)]
pub struct FitGridArgs {
    #[command(flatten)]
    pub io: OutputArgs,
    #[command(flatten)]
    pub kernel: KernelArgs,
    #[command(flatten)]
    pub grid: GridArgs,
    #[arg(long, value_enum, default_value_t = GridMethod::Direct)]
    pub method: GridMethod,
    /// Expected number of grid points; must match the number of rows.
    #[arg(long)]
    pub grid_size: Option<usize>,
    /// Grid spacing for a single-point grid.
    #[arg(long)]
    pub spacing: Option<f64>,
    /// Observation noise standard deviation.
    #[arg(long, default_value_t = 0.0)]
    pub noise_std: f64,
}

#[derive(Debug, Args)]
pub struct FitLatentArgs {
    #[command(flatten)]
    pub io: OutputArgs,
    #[command(flatten)]
    pub kernel: KernelArgs,
    #[command(flatten)]
    pub grid: GridArgs,
    /// Number of inducing grid points.
    #[arg(long, default_value_t = 20)]
    pub grid_size: usize,
    /// Perturbation order.
    #[arg(long, default_value = "2", value_parser = parse_order)]
    pub order: PerturbationOrder,
    /// Observation noise standard deviation; must be positive.
    #[arg(long, default_value_t = 0.1)]
    pub noise_std: f64,
    /// Sidecar JSON path (default: the output path with `.latent.json` appended).
    #[arg(long)]
    pub sidecar: Option<PathBuf>,
    /// Threshold on the std/mean band ratios of the residual diagnostic.
    #[arg(long, default_value_t = swdgp::latent::DEFAULT_VALIDITY_THRESHOLD)]
    pub validity_threshold: f64,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// JSON benchmark configuration; flags below override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_parser = parse_function)]
    pub function: Option<SyntheticFunction>,
    /// Comma-separated methods: exact, swd-grid, lgswd-3, lgswd-5.
    #[arg(long, value_delimiter = ',', value_parser = parse_method)]
    pub methods: Vec<Method>,
    /// Alias of `--methods`.
    #[arg(long, value_delimiter = ',', value_parser = parse_method, hide = true)]
    pub method: Vec<Method>,
    /// Comma-separated training set sizes.
    #[arg(long = "n", value_delimiter = ',')]
    pub sizes: Vec<usize>,
    /// Comma-separated seeds.
    #[arg(long, alias = "seed", value_delimiter = ',')]
    pub seeds: Vec<u64>,
    /// Inducing grid size of the latent methods.
    #[arg(long)]
    pub grid_size: Option<usize>,
    #[command(flatten)]
    pub length: LengthScaleArgs,
    #[arg(long)]
    pub noise_std: Option<f64>,
    #[arg(long)]
    pub signal_std: Option<f64>,
    #[arg(long, value_parser = parse_order)]
    pub order: Option<PerturbationOrder>,
    #[arg(long)]
    pub test_points: Option<usize>,
    /// Timing repetitions per cell; the median is reported.
    #[arg(long)]
    pub repetitions: Option<usize>,
    /// Zero the timings so reruns produce identical files.
    #[arg(long)]
    pub deterministic: bool,
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long, value_parser = parse_function, default_value = "fig5")]
    pub function: SyntheticFunction,
    #[arg(long = "n", default_value_t = 1000)]
    pub n: usize,
    #[arg(long, default_value_t = 0.2)]
    pub noise_std: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Place inputs on the lattice i/(n-1) instead of drawing them uniformly.
    #[arg(long)]
    pub lattice: bool,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

impl GenerateArgs {
    pub fn design(&self) -> Design {
        if self.lattice {
            Design::Grid
        } else {
            Design::Uniform
        }
    }
}

fn parse_band(s: &str) -> Result<BandOrder, String> {
    let p: usize = s.parse().map_err(|_| format!("band order must be 3 or 5, got '{s}'"))?;
    BandOrder::try_from(p).map_err(|e| e.to_string())
}

fn parse_order(s: &str) -> Result<PerturbationOrder, String> {
    let p: usize = s
        .parse()
        .map_err(|_| format!("perturbation order must be 1 or 2, got '{s}'"))?;
    PerturbationOrder::try_from(p).map_err(|e| e.to_string())
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.trim().parse().map_err(|e: swdgp::Error| e.to_string())
}

fn parse_function(s: &str) -> Result<SyntheticFunction, String> {
    s.parse().map_err(|e: swdgp::Error| e.to_string())
}
