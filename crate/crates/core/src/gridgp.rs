//! GP regression for targets observed on a regular grid.
//!
//! The banded kernel of a tensor grid is the Kronecker product of per-axis
//! banded kernels, so its eigenvectors are outer products of per-axis
//! standing waves and its eigenvalues are `sigma^2 prod_n (lambda_n / sigma^2)`.
//! Fitting projects the targets onto that basis; prediction needs only the
//! sparse cross-kernel row of each test point.

use rustfft::num_complex::Complex;

use crate::error::{Error, Result};
use crate::kernel::{AxisKernel, BandOrder, GridSpec, KernelParams};
use crate::swd::{SwdEigensystem, TransformPath};
use crate::PredictiveResult;

/// Negative predictive variances above this (relative to `sigma^2`) are
/// rounding noise and are not counted as clamps.
pub(crate) const CLAMP_TOLERANCE: f64 = 1e-10;

/// Largest supported grid dimension.
pub const MAX_GRID_DIM: usize = 2;

#[derive(Debug, Clone)]
pub struct GridGpModel {
    grid: GridSpec,
    params: KernelParams,
    band: BandOrder,
    kernels: Vec<AxisKernel>,
    eigensystems: Vec<SwdEigensystem>,
    targets: Vec<f64>,
    /// Targets in the standing-wave basis, row-major over mode tuples.
    projections: Vec<f64>,
    /// Eigenvalue of `K + sigma_N^2 I` for each mode tuple.
    eigenvalues: Vec<f64>,
}

/// Applies `f` to every 1-D fibre of a row-major tensor along `axis`.
fn map_along_axis(
    data: &[f64],
    shape: &[usize],
    axis: usize,
    mut f: impl FnMut(&[f64]) -> Result<Vec<f64>>,
) -> Result<Vec<f64>> {
    let n = shape[axis];
    let inner: usize = shape[axis + 1..].iter().product();
    let outer: usize = shape[..axis].iter().product();
    let mut out = vec![0.0; data.len()];
    let mut fibre = vec![0.0; n];
    for o in 0..outer {
        for i in 0..inner {
            let base = o * n * inner + i;
            for (j, v) in fibre.iter_mut().enumerate() {
                *v = data[base + j * inner];
            }
            let mapped = f(&fibre)?;
            for (j, v) in mapped.into_iter().enumerate() {
                out[base + j * inner] = v;
            }
        }
    }
    Ok(out)
}

pub fn grid_fit(grid: &GridSpec, targets: &[f64], params: &KernelParams, band: BandOrder) -> Result<GridGpModel> {
    grid_fit_with(grid, targets, params, band, TransformPath::Fast)
}

/// [`grid_fit`] with an explicit choice of sine-transform algorithm.
pub fn grid_fit_with(
    grid: &GridSpec,
    targets: &[f64],
    params: &KernelParams,
    band: BandOrder,
    path: TransformPath,
) -> Result<GridGpModel> {
    if grid.dim() > MAX_GRID_DIM {
        return Err(Error::Unsupported(format!(
            "grids of dimension {} (at most {MAX_GRID_DIM} supported)",
            grid.dim()
        )));
    }
    if params.dim() != grid.dim() {
        return Err(Error::DimensionMismatch {
            expected: grid.dim(),
            found: params.dim(),
        });
    }
    if targets.len() != grid.size() {
        return Err(Error::DimensionMismatch {
            expected: grid.size(),
            found: targets.len(),
        });
    }
    let s2 = params.signal_variance();
    let mut kernels = Vec::with_capacity(grid.dim());
    let mut eigensystems = Vec::with_capacity(grid.dim());
    for (d, axis) in grid.axes().iter().enumerate() {
        let kernel = AxisKernel::new(*axis, params.length_scale(d), band)?;
        eigensystems.push(SwdEigensystem::from_alpha(axis.count(), s2, kernel.alpha(), band)?);
        kernels.push(kernel);
    }

    let shape = grid.shape();
    let mut projections = targets.to_vec();
    for (d, eig) in eigensystems.iter().enumerate() {
        projections = map_along_axis(&projections, &shape, d, |fibre| eig.project(fibre, path))?;
    }

    let mut eigenvalues = vec![s2];
    for eig in &eigensystems {
        eigenvalues = eigenvalues
            .iter()
            .flat_map(|&outer| eig.eigenvalues().iter().map(move |&l| outer * l / s2))
            .collect();
    }
    // observation noise shifts every eigenvalue of K + sigma_N^2 I
    let noise = params.noise_variance();
    if noise > 0.0 {
        eigenvalues.iter_mut().for_each(|l| *l += noise);
    }

    Ok(GridGpModel {
        grid: grid.clone(),
        params: params.clone(),
        band,
        kernels,
        eigensystems,
        targets: targets.to_vec(),
        projections,
        eigenvalues,
    })
}

impl GridGpModel {
    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn params(&self) -> &KernelParams {
        &self.params
    }

    pub fn band(&self) -> BandOrder {
        self.band
    }

    pub fn eigensystems(&self) -> &[SwdEigensystem] {
        &self.eigensystems
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    /// `v^T y` for each mode tuple (row-major).
    pub fn projections(&self) -> &[f64] {
        &self.projections
    }

    /// Eigenvalue of each mode tuple (row-major).
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.grid.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.grid.dim(),
                found: x.len(),
            });
        }
        Ok(())
    }

    fn prior_variance(&self, x: &[f64]) -> f64 {
        self.params.signal_variance()
            * self
                .kernels
                .iter()
                .zip(x)
                .map(|(k, &xd)| k.self_value(xd))
                .product::<f64>()
    }

    /// `k*^T v` for every mode tuple.
    fn modal_cross(&self, x: &[f64]) -> Vec<f64> {
        let mut coeffs = vec![self.params.signal_variance()];
        for ((kernel, eig), &xd) in self.kernels.iter().zip(&self.eigensystems).zip(x) {
            let row = kernel.row(xd);
            let per_axis: Vec<f64> = (1..=eig.size())
                .map(|k| row.iter().map(|&(j, v)| v * eig.component(k, j + 1)).sum())
                .collect();
            coeffs = coeffs
                .iter()
                .flat_map(|&outer| per_axis.iter().map(move |&a| outer * a))
                .collect();
        }
        coeffs
    }
}

fn finish_variance(prior: f64, reduction: f64, signal_variance: f64, clamped: &mut usize) -> f64 {
    let var = prior - reduction;
    if var < -CLAMP_TOLERANCE * signal_variance {
        *clamped += 1;
    }
    var.max(0.0)
}

/// Predictive mean `sum_i (k*^T v_i)(v_i^T y) / lambda_i` and variance
/// `k(x*, x*) - sum_i (k*^T v_i)^2 / lambda_i`, clamped at zero.
pub fn grid_predict(model: &GridGpModel, test: &[Vec<f64>]) -> Result<PredictiveResult> {
    let s2 = model.params.signal_variance();
    let mut mean = Vec::with_capacity(test.len());
    let mut variance = Vec::with_capacity(test.len());
    let mut clamped = 0;
    for x in test {
        model.check_point(x)?;
        let a = model.modal_cross(x);
        let mut mu = 0.0;
        let mut reduction = 0.0;
        for ((ai, pi), li) in a.iter().zip(&model.projections).zip(&model.eigenvalues) {
            mu += ai * pi / li;
            reduction += ai * ai / li;
        }
        mean.push(mu);
        variance.push(finish_variance(model.prior_variance(x), reduction, s2, &mut clamped));
    }
    Ok(PredictiveResult {
        mean,
        variance,
        noise_variance: model.params.noise_variance(),
        clamped,
    })
}

/// Same contract as [`grid_predict`] for 1-D models, evaluated through
/// FFT-based sine transforms: the mean weights `K^{-1} y` are formed once
/// per call and each variance uses one transform of the dense `k*`.
pub fn grid_predict_fft(model: &GridGpModel, test: &[f64]) -> Result<PredictiveResult> {
    if model.grid.dim() != 1 {
        return Err(Error::Unsupported("FFT prediction is implemented for 1-D grids".into()));
    }
    let eig = &model.eigensystems[0];
    let kernel = &model.kernels[0];
    let m = eig.size();
    let s2 = model.params.signal_variance();

    let scaled: Vec<f64> = model
        .projections
        .iter()
        .zip(&model.eigenvalues)
        .map(|(p, l)| p / l)
        .collect();
    let weights = eig.project(&scaled, TransformPath::Fast)?;

    let scale = 2.0 / (m + 1) as f64;
    let mut buffer = vec![Complex::new(0.0, 0.0); 2 * (m + 1)];
    let mut dense = vec![0.0; m];
    let mut mean = Vec::with_capacity(test.len());
    let mut variance = Vec::with_capacity(test.len());
    let mut clamped = 0;
    for &x in test {
        let row = kernel.row(x);
        mean.push(row.iter().map(|&(j, v)| s2 * v * weights[j]).sum());
        for &(j, v) in &row {
            dense[j] = s2 * v;
        }
        let w = eig.transform().fast_with_buffer(&dense, &mut buffer);
        for &(j, _) in &row {
            dense[j] = 0.0;
        }
        let reduction: f64 = scale * w.iter().zip(&model.eigenvalues).map(|(wi, l)| wi * wi / l).sum::<f64>();
        variance.push(finish_variance(s2 * kernel.self_value(x), reduction, s2, &mut clamped));
    }
    Ok(PredictiveResult {
        mean,
        variance,
        noise_variance: model.params.noise_variance(),
        clamped,
    })
}
