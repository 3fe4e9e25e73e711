//! Synthetic test problems, SMSE and the benchmark harness.
//!
//! SMSE is the mean squared error divided by the population variance of the
//! true function values at the test points. Region SMSEs use the variance of
//! the truths inside the region; region MSEs and counts are kept so the
//! overall figure can be rebuilt from them.

use std::f64::consts::PI;
use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{exact_fit, exact_predict};
use crate::gridgp::{grid_fit, grid_predict_fft};
use crate::kernel::{auto_length_scale, BandOrder, GridAxis, GridSpec, KernelParams};
use crate::latent::{latent_fit, latent_predict, residual_diagnostic, PerturbationOrder, ResidualDiagnostic};
use crate::PredictiveResult;

/// Number of equal-width regions of `[0, 1]` in region reports.
pub const N_REGIONS: usize = 5;
/// Largest training set the dense exact GP will accept.
pub const EXACT_LIMIT: usize = 5000;
/// Number of evenly spaced test points.
pub const DEFAULT_TEST_POINTS: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SyntheticFunction {
    /// `x cos(2 pi x) sin(4 pi (x + 0.03))`
    Fig2,
    /// `x cos(2 pi x) sin(24 pi (x + 0.03))`, the higher-frequency variant.
    Fig2Text,
    /// `cos(2 pi x) sin(12 pi x)`
    Fig4,
    /// `x cos(8 pi (x + 0.15)) cos(2 pi x)`
    Fig5,
    /// `sin(5 pi / (x + 0.1))`
    Sim7,
}

impl SyntheticFunction {
    pub const ALL: [SyntheticFunction; 5] = [
        SyntheticFunction::Fig2,
        SyntheticFunction::Fig2Text,
        SyntheticFunction::Fig4,
        SyntheticFunction::Fig5,
        SyntheticFunction::Sim7,
    ];

    pub fn eval(self, x: f64) -> f64 {
        match self {
            SyntheticFunction::Fig2 => x * (2.0 * PI * x).cos() * (4.0 * PI * (x + 0.03)).sin(),
            SyntheticFunction::Fig2Text => x * (2.0 * PI * x).cos() * (24.0 * PI * (x + 0.03)).sin(),
            SyntheticFunction::Fig4 => (2.0 * PI * x).cos() * (12.0 * PI * x).sin(),
            SyntheticFunction::Fig5 => x * (8.0 * PI * (x + 0.15)).cos() * (2.0 * PI * x).cos(),
            SyntheticFunction::Sim7 => (5.0 * PI / (x + 0.1)).sin(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SyntheticFunction::Fig2 => "fig2",
            SyntheticFunction::Fig2Text => "fig2-text",
            SyntheticFunction::Fig4 => "fig4",
            SyntheticFunction::Fig5 => "fig5",
            SyntheticFunction::Sim7 => "sim7",
        }
    }
}

impl fmt::Display for SyntheticFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SyntheticFunction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown function id '{s}' (fig2, fig2-text, fig4, fig5, sim7)")))
    }
}

/// How training abscissae are placed in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Design {
    /// Independent uniform draws.
    Uniform,
    /// `i / (N - 1)`, for on-grid methods.
    Grid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub function: SyntheticFunction,
    pub noise_std: f64,
    pub n: usize,
    pub seed: u64,
    pub design: Design,
    pub test_points: usize,
}

impl SyntheticSpec {
    pub fn new(function: SyntheticFunction, noise_std: f64, n: usize, seed: u64) -> Self {
        Self {
            function,
            noise_std,
            n,
            seed,
            design: Design::Uniform,
            test_points: DEFAULT_TEST_POINTS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub inputs: Vec<f64>,
    pub targets: Vec<f64>,
    pub test_inputs: Vec<f64>,
    pub test_truth: Vec<f64>,
}

/// Draws `N` noisy samples of the function on `[0, 1]` and the truth on an
/// evenly spaced test lattice.
pub fn generate(spec: &SyntheticSpec) -> Result<Dataset> {
    if !(spec.noise_std >= 0.0) || !spec.noise_std.is_finite() {
        return Err(Error::invalid("noise std must be finite and non-negative"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let inputs: Vec<f64> = match spec.design {
        Design::Uniform => (0..spec.n).map(|_| rng.random::<f64>()).collect(),
        Design::Grid => lattice(spec.n),
    };
    let targets = inputs
        .iter()
        .map(|&x| {
            let z: f64 = rng.sample(StandardNormal);
            spec.function.eval(x) + spec.noise_std * z
        })
        .collect();
    let test_inputs = lattice(spec.test_points);
    let test_truth = test_inputs.iter().map(|&x| spec.function.eval(x)).collect();
    Ok(Dataset {
        inputs,
        targets,
        test_inputs,
        test_truth,
    })
}

/// `n` evenly spaced points covering `[0, 1]`.
pub fn lattice(n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..n).map(|i| i as f64 / (n - 1) as f64).collect(),
    }
}

fn mean_squared_error(predictions: &[f64], truths: &[f64]) -> f64 {
    predictions
        .iter()
        .zip(truths)
        .map(|(p, t)| (p - t) * (p - t))
        .sum::<f64>()
        / truths.len() as f64
}

fn population_variance(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n
}

/// Mean squared error over the population variance of `truths`.
pub fn smse(predictions: &[f64], truths: &[f64]) -> Result<f64> {
    if predictions.len() != truths.len() {
        return Err(Error::DimensionMismatch {
            expected: truths.len(),
            found: predictions.len(),
        });
    }
    if truths.len() < 2 {
        return Err(Error::invalid("SMSE needs at least two points"));
    }
    let var = population_variance(truths);
    if !(var > 0.0) {
        return Err(Error::invalid("SMSE is undefined for constant truths"));
    }
    Ok(mean_squared_error(predictions, truths) / var)
}

/// Region index of `x`: `[0, 0.2), [0.2, 0.4), ..., [0.8, 1]`.
pub fn region_of(x: f64) -> usize {
    ((x * N_REGIONS as f64).floor().max(0.0) as usize).min(N_REGIONS - 1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionReport {
    pub index: usize,
    pub lo: f64,
    pub hi: f64,
    /// Training points falling in the region.
    pub n_train: usize,
    pub n_test: usize,
    pub mse: f64,
    /// Region MSE over the variance of the region's truths; `NaN` if undefined.
    pub smse: f64,
}

pub fn region_reports(
    train_inputs: &[f64],
    test_inputs: &[f64],
    predictions: &[f64],
    truths: &[f64],
) -> Vec<RegionReport> {
    let mut n_train = [0usize; N_REGIONS];
    for &x in train_inputs {
        n_train[region_of(x)] += 1;
    }
    (0..N_REGIONS)
        .map(|r| {
            let (pred, truth): (Vec<f64>, Vec<f64>) = test_inputs
                .iter()
                .zip(predictions.iter().zip(truths))
                .filter(|(x, _)| region_of(**x) == r)
                .map(|(_, (p, t))| (*p, *t))
                .unzip();
            let mse = if truth.is_empty() {
                0.0
            } else {
                mean_squared_error(&pred, &truth)
            };
            RegionReport {
                index: r,
                lo: r as f64 / N_REGIONS as f64,
                hi: (r + 1) as f64 / N_REGIONS as f64,
                n_train: n_train[r],
                n_test: truth.len(),
                mse,
                smse: smse(&pred, &truth).unwrap_or(f64::NAN),
            }
        })
        .collect()
}

/// Rebuilds the overall SMSE from region MSEs and counts.
pub fn aggregate_smse(regions: &[RegionReport], truths: &[f64]) -> f64 {
    let n: usize = regions.iter().map(|r| r.n_test).sum();
    let sse: f64 = regions.iter().map(|r| r.mse * r.n_test as f64).sum();
    sse / n as f64 / population_variance(truths)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Dense exact GP with the full SE kernel.
    Exact,
    /// On-grid standing-wave GP (tridiagonal) with training inputs on a regular lattice.
    SwdGrid,
    /// Latent-grid regression, tridiagonal kernel.
    #[serde(rename = "lgswd-3")]
    Lgswd3,
    /// Latent-grid regression, pentadiagonal kernel.
    #[serde(rename = "lgswd-5")]
    Lgswd5,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Exact, Method::SwdGrid, Method::Lgswd3, Method::Lgswd5];

    pub fn name(self) -> &'static str {
        match self {
            Method::Exact => "exact",
            Method::SwdGrid => "swd-grid",
            Method::Lgswd3 => "lgswd-3",
            Method::Lgswd5 => "lgswd-5",
        }
    }

    pub fn band(self) -> Option<BandOrder> {
        match self {
            Method::Exact => None,
            Method::SwdGrid | Method::Lgswd3 => Some(BandOrder::Tridiagonal),
            Method::Lgswd5 => Some(BandOrder::Pentadiagonal),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown method '{s}' (exact, swd-grid, lgswd-3, lgswd-5)")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchConfig {
    pub function: SyntheticFunction,
    pub methods: Vec<Method>,
    pub sizes: Vec<usize>,
    pub seeds: Vec<u64>,
    /// Inducing grid size for the latent methods.
    pub grid_size: usize,
    pub signal_variance: f64,
    pub noise_std: f64,
    /// Fixed length scale; when absent, `length_scale_fraction` of the
    /// admissible maximum on the inducing grid.
    pub length_scale: Option<f64>,
    pub length_scale_fraction: f64,
    pub order: PerturbationOrder,
    pub test_points: usize,
    /// Timing repetitions; the median is reported.
    pub repetitions: usize,
    /// Zero all timings so reports are reproducible byte for byte.
    pub deterministic: bool,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            function: SyntheticFunction::Sim7,
            methods: vec![Method::Lgswd3],
            sizes: vec![1000, 10_000, 100_000],
            seeds: vec![0],
            grid_size: 300,
            signal_variance: 0.25,
            noise_std: 0.2,
            length_scale: None,
            length_scale_fraction: 0.75,
            order: PerturbationOrder::First,
            test_points: DEFAULT_TEST_POINTS,
            repetitions: 3,
            deterministic: false,
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() || self.sizes.is_empty() || self.seeds.is_empty() {
            return Err(Error::invalid("benchmark needs at least one method, size and seed"));
        }
        if self.methods.contains(&Method::Exact) {
            if let Some(&n) = self.sizes.iter().find(|&&n| n > EXACT_LIMIT) {
                return Err(Error::invalid(format!(
                    "exact GP refused for N = {n}: dense O(N^3) inversion is limited to N <= {EXACT_LIMIT}"
                )));
            }
        }
        if self.grid_size < 2 {
            return Err(Error::invalid("inducing grid needs at least two points"));
        }
        if self.test_points < 2 {
            return Err(Error::invalid("need at least two test points"));
        }
        if !(self.signal_variance > 0.0) || !(self.noise_std > 0.0) {
            return Err(Error::invalid("signal variance and noise std must be positive"));
        }
        if !(self.length_scale_fraction > 0.0 && self.length_scale_fraction < 1.0) {
            return Err(Error::invalid("length scale fraction must lie in (0, 1)"));
        }
        if self.repetitions == 0 {
            return Err(Error::invalid("repetitions must be positive"));
        }
        Ok(())
    }

    /// Length scale used by `method` when training on `n` points.
    pub fn resolved_length_scale(&self, method: Method, n: usize) -> Result<f64> {
        if let Some(l) = self.length_scale {
            return Ok(l);
        }
        let (band, count) = match method {
            Method::SwdGrid => (BandOrder::Tridiagonal, n),
            Method::Lgswd5 => (BandOrder::Pentadiagonal, self.grid_size),
            // the exact GP shares the tridiagonal latent-grid length scale
            Method::Exact | Method::Lgswd3 => (BandOrder::Tridiagonal, self.grid_size),
        };
        let axis = GridAxis::spanning(0.0, 1.0, count.max(2))?;
        Ok(auto_length_scale(band, &axis, self.length_scale_fraction))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub method: Method,
    pub function: SyntheticFunction,
    pub n: usize,
    /// Grid points used by the method (`N` for exact and on-grid methods).
    pub m: usize,
    pub band: Option<usize>,
    pub seed: u64,
    pub length_scale: f64,
    pub smse: f64,
    pub regions: Vec<RegionReport>,
    pub fit_seconds: f64,
    pub predict_seconds: f64,
    pub clamped_variances: usize,
    pub clamped_noise: usize,
    pub diagnostic: Option<ResidualDiagnostic>,
}

impl BenchReport {
    pub fn total_seconds(&self) -> f64 {
        self.fit_seconds + self.predict_seconds
    }
}

struct CellOutcome {
    prediction: PredictiveResult,
    m: usize,
    clamped_noise: usize,
    diagnostic: Option<ResidualDiagnostic>,
}

fn median(mut values: Vec<f64>) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

fn run_once(
    config: &BenchConfig,
    method: Method,
    data: &Dataset,
    params: &KernelParams,
) -> Result<(CellOutcome, f64, f64)> {
    let n = data.inputs.len();
    let start = Instant::now();
    match method {
        Method::Exact => {
            let inputs: Vec<Vec<f64>> = data.inputs.iter().map(|&x| vec![x]).collect();
            let model = exact_fit(&inputs, &data.targets, params)?;
            let fit = start.elapsed().as_secs_f64();
            let start = Instant::now();
            let test: Vec<Vec<f64>> = data.test_inputs.iter().map(|&x| vec![x]).collect();
            let prediction = exact_predict(&model, &test)?;
            let predict = start.elapsed().as_secs_f64();
            let outcome = CellOutcome {
                prediction,
                m: n,
                clamped_noise: 0,
                diagnostic: None,
            };
            Ok((outcome, fit, predict))
        }
        Method::SwdGrid => {
            let grid = GridSpec::new(vec![GridAxis::spanning(0.0, 1.0, n)?])?;
            let model = grid_fit(&grid, &data.targets, params, BandOrder::Tridiagonal)?;
            let fit = start.elapsed().as_secs_f64();
            let start = Instant::now();
            let prediction = grid_predict_fft(&model, &data.test_inputs)?;
            let predict = start.elapsed().as_secs_f64();
            let outcome = CellOutcome {
                prediction,
                m: n,
                clamped_noise: 0,
                diagnostic: None,
            };
            Ok((outcome, fit, predict))
        }
        Method::Lgswd3 | Method::Lgswd5 => {
            let band = method.band().expect("latent methods are banded");
            let grid = GridSpec::unit_interval(config.grid_size)?;
            let model = latent_fit(&data.inputs, &data.targets, &grid, params, band, config.order)?;
            let fit = start.elapsed().as_secs_f64();
            let start = Instant::now();
            let prediction = latent_predict(&model, &data.test_inputs);
            let predict = start.elapsed().as_secs_f64();
            let outcome = CellOutcome {
                prediction,
                m: config.grid_size,
                clamped_noise: model.lambda_clamped(),
                diagnostic: Some(residual_diagnostic(&model)),
            };
            Ok((outcome, fit, predict))
        }
    }
}

/// Runs one benchmark cell. Data generation is not timed.
pub fn run_cell(config: &BenchConfig, method: Method, n: usize, seed: u64) -> Result<BenchReport> {
    if method == Method::Exact && n > EXACT_LIMIT {
        return Err(Error::invalid(format!(
            "exact GP refused for N = {n}: dense O(N^3) inversion is limited to N <= {EXACT_LIMIT}"
        )));
    }
    let mut spec = SyntheticSpec::new(config.function, config.noise_std, n, seed);
    spec.test_points = config.test_points;
    if method == Method::SwdGrid {
        spec.design = Design::Grid;
    }
    let data = generate(&spec)?;
    let length_scale = config.resolved_length_scale(method, n)?;
    let params = KernelParams::isotropic(
        config.signal_variance,
        length_scale,
        config.noise_std * config.noise_std,
    )?;

    let repetitions = if config.deterministic { 1 } else { config.repetitions };
    let mut fits = Vec::with_capacity(repetitions);
    let mut predicts = Vec::with_capacity(repetitions);
    let mut outcome = None;
    for _ in 0..repetitions {
        let (o, fit, predict) = run_once(config, method, &data, &params)?;
        fits.push(fit);
        predicts.push(predict);
        outcome = Some(o);
    }
    let outcome = outcome.expect("at least one repetition");
    let (fit_seconds, predict_seconds) = if config.deterministic {
        (0.0, 0.0)
    } else {
        (median(fits), median(predicts))
    };

    let mean = &outcome.prediction.mean;
    Ok(BenchReport {
        method,
        function: config.function,
        n,
        m: outcome.m,
        band: method.band().map(BandOrder::width),
        seed,
        length_scale,
        smse: smse(mean, &data.test_truth)?,
        regions: region_reports(&data.inputs, &data.test_inputs, mean, &data.test_truth),
        fit_seconds,
        predict_seconds,
        clamped_variances: outcome.prediction.clamped,
        clamped_noise: outcome.clamped_noise,
        diagnostic: outcome.diagnostic,
    })
}

/// One report per `(method, N, seed)`, in that nesting order.
pub fn run_benchmark(config: &BenchConfig) -> Result<Vec<BenchReport>> {
    config.validate()?;
    let mut reports = Vec::new();
    for &method in &config.methods {
        for &n in &config.sizes {
            for &seed in &config.seeds {
                reports.push(run_cell(config, method, n, seed)?);
            }
        }
    }
    Ok(reports)
}

/// Host description written into report headers.
pub fn machine_info() -> String {
    let threads = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    format!(
        "{}-{} threads={}",
        std::env::consts::ARCH,
        std::env::consts::OS,
        threads
    )
}

fn csv_header() -> Vec<String> {
    let mut cols: Vec<String> = [
        "method",
        "function",
        "n",
        "m",
        "band",
        "seed",
        "length_scale",
        "smse",
        "fit_seconds",
        "predict_seconds",
        "clamped_variances",
        "clamped_noise",
        "diag_a",
        "diag_b",
        "diag_ratio_a",
        "diag_ratio_b",
        "diag_residual_max",
        "diag_valid",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    for r in 0..N_REGIONS {
        for field in ["n_train", "n_test", "mse", "smse"] {
            cols.push(format!("region{r}_{field}"));
        }
    }
    cols
}

fn float(v: f64) -> String {
    format!("{v:.16e}")
}

fn csv_row(report: &BenchReport) -> Vec<String> {
    let mut row = vec![
        report.method.to_string(),
        report.function.to_string(),
        report.n.to_string(),
        report.m.to_string(),
        report.band.map(|b| b.to_string()).unwrap_or_default(),
        report.seed.to_string(),
        float(report.length_scale),
        float(report.smse),
        float(report.fit_seconds),
        float(report.predict_seconds),
        report.clamped_variances.to_string(),
        report.clamped_noise.to_string(),
    ];
    match &report.diagnostic {
        Some(d) => row.extend([
            float(d.diagonal_mean),
            float(d.off_diagonal_mean),
            float(d.diagonal_ratio),
            float(d.off_diagonal_ratio),
            float(d.residual_max),
            d.valid.to_string(),
        ]),
        None => row.extend(std::iter::repeat_n(String::new(), 6)),
    }
    for r in &report.regions {
        row.extend([r.n_train.to_string(), r.n_test.to_string(), float(r.mse), float(r.smse)]);
    }
    row
}

/// Writes one CSV row per report, preceded by a `#` comment line with the
/// resolved configuration and host.
pub fn write_csv<W: Write>(mut out: W, config: &BenchConfig, reports: &[BenchReport]) -> Result<()> {
    writeln!(
        out,
        "# config={} machine={}",
        serde_json::to_string(config)?,
        machine_info()
    )?;
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(csv_header())?;
    for report in reports {
        writer.write_record(csv_row(report))?;
    }
    writer.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct JsonReport<'a> {
    config: &'a BenchConfig,
    machine: String,
    reports: &'a [BenchReport],
}

pub fn write_json<W: Write>(out: W, config: &BenchConfig, reports: &[BenchReport]) -> Result<()> {
    let doc = JsonReport {
        config,
        machine: machine_info(),
        reports,
    };
    serde_json::to_writer_pretty(out, &doc)?;
    Ok(())
}
