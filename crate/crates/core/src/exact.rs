//! Dense exact GP regression, used as the reference for every approximation.
//!
//! Two covariance sources are supported: the full SE kernel over arbitrary
//! inputs, and the banded grid kernel (tensor product across dimensions)
//! with the matching sparse cross-kernel. The second separates truncation
//! error from decomposition error when checking the standing-wave path.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::gridgp::CLAMP_TOLERANCE;
use crate::kernel::{se_kernel, AxisKernel, BandOrder, GridSpec, KernelParams};
use crate::linalg::Cholesky;
use crate::PredictiveResult;

/// Gaussian conditioning on observed targets for a given joint covariance.
#[derive(Debug, Clone)]
pub struct GaussianConditioner {
    factor: Cholesky,
    weights: Vec<f64>,
}

impl GaussianConditioner {
    /// `covariance` must already include any observation noise.
    pub fn new(covariance: &DMatrix<f64>, targets: &[f64]) -> Result<Self> {
        if covariance.nrows() != targets.len() {
            return Err(Error::DimensionMismatch {
                expected: covariance.nrows(),
                found: targets.len(),
            });
        }
        let factor = Cholesky::factor(covariance)?;
        let weights = factor.solve(targets);
        Ok(Self { factor, weights })
    }

    /// Mean `k^T C^{-1} y` and variance `prior - k^T C^{-1} k`.
    pub fn condition(&self, cross: &[f64], prior_variance: f64) -> (f64, f64) {
        let mean = cross.iter().zip(&self.weights).map(|(a, b)| a * b).sum();
        let z = self.factor.forward(cross);
        let reduction: f64 = z.iter().map(|v| v * v).sum();
        (mean, prior_variance - reduction)
    }
}

#[derive(Debug, Clone)]
enum Covariance {
    Full,
    Banded { kernels: Vec<AxisKernel> },
}

/// Exact GP with a factorized `K + sigma_N^2 I`.
#[derive(Debug, Clone)]
pub struct DenseGpModel {
    inputs: Vec<Vec<f64>>,
    targets: Vec<f64>,
    params: KernelParams,
    covariance: Covariance,
    conditioner: GaussianConditioner,
}

fn check_dims(points: &[Vec<f64>], dim: usize) -> Result<()> {
    match points.iter().find(|p| p.len() != dim) {
        Some(p) => Err(Error::DimensionMismatch {
            expected: dim,
            found: p.len(),
        }),
        None => Ok(()),
    }
}

/// Fits an exact GP with the full SE kernel.
pub fn exact_fit(inputs: &[Vec<f64>], targets: &[f64], params: &KernelParams) -> Result<DenseGpModel> {
    if inputs.is_empty() {
        return Err(Error::invalid("exact GP needs at least one training point"));
    }
    if inputs.len() != targets.len() {
        return Err(Error::DimensionMismatch {
            expected: inputs.len(),
            found: targets.len(),
        });
    }
    check_dims(inputs, params.dim())?;
    let n = inputs.len();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let v = se_kernel(&inputs[i], &inputs[j], params)?;
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
        k[(i, i)] += params.noise_variance();
    }
    Ok(DenseGpModel {
        inputs: inputs.to_vec(),
        targets: targets.to_vec(),
        params: params.clone(),
        covariance: Covariance::Full,
        conditioner: GaussianConditioner::new(&k, targets)?,
    })
}

/// Fits an exact GP on grid data using the banded grid kernel, inverted
/// densely. Targets are in row-major grid order.
pub fn exact_fit_banded(
    grid: &GridSpec,
    targets: &[f64],
    params: &KernelParams,
    band: BandOrder,
) -> Result<DenseGpModel> {
    if grid.dim() != params.dim() {
        return Err(Error::DimensionMismatch {
            expected: params.dim(),
            found: grid.dim(),
        });
    }
    if targets.len() != grid.size() {
        return Err(Error::DimensionMismatch {
            expected: grid.size(),
            found: targets.len(),
        });
    }
    let kernels = grid
        .axes()
        .iter()
        .enumerate()
        .map(|(d, axis)| AxisKernel::new(*axis, params.length_scale(d), band))
        .collect::<Result<Vec<_>>>()?;
    let inputs = grid.points();
    let n = inputs.len();
    let covariance = Covariance::Banded { kernels };
    let mut k = DMatrix::zeros(n, n);
    for j in 0..n {
        let col = cross_row(&covariance, params, &inputs, &inputs[j]);
        for i in 0..n {
            k[(i, j)] = col[i];
        }
        k[(j, j)] += params.noise_variance();
    }
    Ok(DenseGpModel {
        inputs,
        targets: targets.to_vec(),
        params: params.clone(),
        conditioner: GaussianConditioner::new(&k, targets)?,
        covariance,
    })
}

/// Dense cross-covariance between one point and all training inputs.
fn cross_row(covariance: &Covariance, params: &KernelParams, inputs: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    match covariance {
        Covariance::Full => inputs
            .iter()
            .map(|xi| se_kernel(x, xi, params).expect("dimensions checked"))
            .collect(),
        Covariance::Banded { kernels } => {
            // tensor product of per-axis sparse rows; inputs are the grid in row-major order
            let shape: Vec<usize> = kernels.iter().map(|k| k.axis().count()).collect();
            let rows: Vec<Vec<(usize, f64)>> = kernels.iter().zip(x).map(|(k, &xd)| k.row(xd)).collect();
            let mut out = vec![0.0; inputs.len()];
            let mut stack = vec![(0usize, 0usize, params.signal_variance())];
            while let Some((d, flat, v)) = stack.pop() {
                if d == shape.len() {
                    out[flat] = v;
                    continue;
                }
                for &(j, w) in &rows[d] {
                    stack.push((d + 1, flat * shape[d] + j, v * w));
                }
            }
            out
        }
    }
}

fn prior_variance(covariance: &Covariance, params: &KernelParams, x: &[f64]) -> f64 {
    match covariance {
        Covariance::Full => params.signal_variance(),
        Covariance::Banded { kernels } => {
            params.signal_variance() * kernels.iter().zip(x).map(|(k, &xd)| k.self_value(xd)).product::<f64>()
        }
    }
}

impl DenseGpModel {
    pub fn inputs(&self) -> &[Vec<f64>] {
        &self.inputs
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn params(&self) -> &KernelParams {
        &self.params
    }
}

/// Predictive mean `k*^T (K + sigma_N^2 I)^{-1} y` and latent variance
/// `sigma^2 - k*^T (K + sigma_N^2 I)^{-1} k*`.
pub fn exact_predict(model: &DenseGpModel, test: &[Vec<f64>]) -> Result<PredictiveResult> {
    check_dims(test, model.params.dim())?;
    let mut mean = Vec::with_capacity(test.len());
    let mut variance = Vec::with_capacity(test.len());
    let mut clamped = 0;
    for x in test {
        let k = cross_row(&model.covariance, &model.params, &model.inputs, x);
        let prior = prior_variance(&model.covariance, &model.params, x);
        let (mu, var) = model.conditioner.condition(&k, prior);
        mean.push(mu);
        if var < -CLAMP_TOLERANCE * model.params.signal_variance() {
            clamped += 1;
        }
        variance.push(var.max(0.0));
    }
    Ok(PredictiveResult {
        mean,
        variance,
        noise_variance: model.params.noise_variance(),
        clamped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_datum_interpolates() {
        let p = KernelParams::isotropic(1.0, 0.2, 0.0).unwrap();
        let m = exact_fit(&[vec![0.0]], &[3.0], &p).unwrap();
        let r = exact_predict(&m, &[vec![0.0]]).unwrap();
        assert!((r.mean[0] - 3.0).abs() < 1e-14);
        assert!(r.variance[0].abs() < 1e-14);
    }

    #[test]
    fn far_point_recovers_prior() {
        let p = KernelParams::isotropic(0.7, 0.05, 0.01).unwrap();
        let xs: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64 * 0.1]).collect();
        let ys: Vec<f64> = (0..10).map(|i| (i as f64).sin()).collect();
        let m = exact_fit(&xs, &ys, &p).unwrap();
        let r = exact_predict(&m, &[vec![50.0]]).unwrap();
        assert!(r.mean[0].abs() < 1e-12);
        assert!((r.variance[0] - 0.7).abs() < 1e-12);
        assert!((r.observation_variance(0) - 0.71).abs() < 1e-12);
    }

    #[test]
    fn two_point_conditional() {
        for c in [-0.9, 0.0, 0.5] {
            let s2 = 1.7;
            let cov = DMatrix::from_element(1, 1, s2);
            let y2 = 0.8;
            let cond = GaussianConditioner::new(&cov, &[y2]).unwrap();
            let (mu, var) = cond.condition(&[c * s2], s2);
            assert!((mu - c * y2).abs() < 1e-14);
            assert!((var - (1.0 - c * c) * s2).abs() < 1e-14);
        }
    }

    #[test]
    fn duplicate_inputs_without_noise_fail_with_pivot() {
        let p = KernelParams::isotropic(1.0, 0.2, 0.0).unwrap();
        let err = exact_fit(&[vec![0.1], vec![0.1]], &[1.0, 1.0], &p).unwrap_err();
        assert!(matches!(err, Error::Factorization { index: 1, .. }));
    }

    #[test]
    fn input_errors() {
        let p = KernelParams::isotropic(1.0, 0.2, 0.0).unwrap();
        assert!(exact_fit(&[], &[], &p).is_err());
        assert!(exact_fit(&[vec![0.0]], &[1.0, 2.0], &p).is_err());
        assert!(exact_fit(&[vec![0.0, 1.0]], &[1.0], &p).is_err());
        let m = exact_fit(&[vec![0.0]], &[1.0], &p).unwrap();
        assert!(exact_predict(&m, &[vec![0.0, 0.0]]).is_err());
    }
}
