//! Latent-grid regression for arbitrary 1-D inputs.
//!
//! Data are projected onto a regular grid of inducing points. The posterior
//! over grid values needs `Q = K_gg + K_gx Lambda^{-1} K_xg`; `Q` is inverted
//! perturbatively in the standing-wave basis of `K_gg`, coupling only the
//! symmetric mode pairs `(k, M + 1 - k)`.
//!
//! Every sum of the form `sum_k g_k v_k[a] v_k[b]` is evaluated through
//! `v_k[a] v_k[b] = (cos((a - b) theta_k) - cos((a + b + 2) theta_k)) / (M + 1)`
//! and one FFT of the weights, so the grid side of a fit costs
//! `O(p M + M log M)` and the data side `O(p^2 N)`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gridgp::CLAMP_TOLERANCE;
use crate::kernel::{AxisKernel, BandOrder, GridAxis, GridSpec, KernelParams};
use crate::swd::{SwdEigensystem, TransformPath};
use crate::PredictiveResult;

/// Default std/mean threshold below which the pair perturbation is trusted.
pub const DEFAULT_VALIDITY_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PerturbationOrder {
    /// Eigenvalue shifts only (`delta = 0`).
    First,
    /// Eigenvalue shifts plus the pair rotation driven by `delta`.
    Second,
}

impl TryFrom<usize> for PerturbationOrder {
    type Error = Error;

    fn try_from(order: usize) -> Result<Self> {
        match order {
            1 => Ok(PerturbationOrder::First),
            2 => Ok(PerturbationOrder::Second),
            other => Err(Error::invalid(format!(
                "perturbation order must be 1 or 2, got {other}"
            ))),
        }
    }
}

/// Solution of the 2x2 problem `[[lambda + eps, delta], [delta, lambda' + eps']]`
/// for one mode pair. `u+ = cos(phi) v + sin(phi) v'` has eigenvalue
/// `chi_plus`, `u- = -sin(phi) v + cos(phi) v'` has `chi_minus`.
///
/// The middle mode of an odd grid has no partner; its partner fields are
/// zero and `chi_plus = lambda + epsilon`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairSolution {
    pub mode: usize,
    pub partner: Option<usize>,
    pub lambda: f64,
    pub lambda_partner: f64,
    pub epsilon: f64,
    pub epsilon_partner: f64,
    pub delta: f64,
    pub beta_plus: f64,
    pub beta_minus: f64,
    pub phi: f64,
    pub chi_plus: f64,
    pub chi_minus: f64,
}

impl PairSolution {
    /// Solves the pair problem for modes `mode < partner` (1-based).
    pub fn solve(mode: usize, partner: usize, lambda: [f64; 2], epsilon: [f64; 2], delta: f64) -> Self {
        let a = lambda[0] + epsilon[0];
        let b = lambda[1] + epsilon[1];
        let beta_plus = 0.5 * (a + b);
        let beta_minus = 0.5 * (a - b);
        let (phi, chi_plus, chi_minus) = if delta == 0.0 {
            // uncoupled: keep the unperturbed vectors so first order is reproduced exactly
            (0.0, a, b)
        } else {
            let s = beta_minus.hypot(delta);
            (0.5 * delta.atan2(beta_minus), beta_plus + s, beta_plus - s)
        };
        Self {
            mode,
            partner: Some(partner),
            lambda: lambda[0],
            lambda_partner: lambda[1],
            epsilon: epsilon[0],
            epsilon_partner: epsilon[1],
            delta,
            beta_plus,
            beta_minus,
            phi,
            chi_plus,
            chi_minus,
        }
    }

    fn single(mode: usize, lambda: f64, epsilon: f64) -> Self {
        Self {
            mode,
            partner: None,
            lambda,
            lambda_partner: 0.0,
            epsilon,
            epsilon_partner: 0.0,
            delta: 0.0,
            beta_plus: lambda + epsilon,
            beta_minus: 0.0,
            phi: 0.0,
            chi_plus: lambda + epsilon,
            chi_minus: 0.0,
        }
    }
}

/// Symmetric band `B[a][a + d]`, `d < width`.
#[derive(Debug, Clone)]
struct SymmetricBand {
    size: usize,
    width: usize,
    data: Vec<f64>,
}

impl SymmetricBand {
    fn zeros(size: usize, width: usize) -> Self {
        Self {
            size,
            width,
            data: vec![0.0; size * width],
        }
    }

    fn get(&self, a: usize, d: usize) -> f64 {
        self.data[a * self.width + d]
    }

    fn add(&mut self, a: usize, d: usize, v: f64) {
        self.data[a * self.width + d] += v;
    }

    fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.size).flat_map(move |a| {
            (0..self.width)
                .take_while(move |d| a + d < self.size)
                .map(move |d| (a, d, self.get(a, d)))
        })
    }
}

/// Symmetric matrix `sum_k g_k v_k v_k^T + sum_{k < k'} c_k (v_k v_k'^T + v_k' v_k^T)`
/// held as cosine sums; `k'` is the pair partner of `k`.
#[derive(Debug, Clone)]
struct ModalMatrix {
    scale: f64,
    direct: Vec<f64>,
    cross: Vec<f64>,
}

impl ModalMatrix {
    fn new(eig: &SwdEigensystem, direct: &[f64], cross: &[f64]) -> Result<Self> {
        Ok(Self {
            scale: 1.0 / (eig.size() + 1) as f64,
            direct: eig.transform().modal_cosine_sums(direct)?,
            cross: eig.transform().modal_cosine_sums(cross)?,
        })
    }

    /// Zero-based entry.
    fn entry(&self, a: usize, b: usize) -> f64 {
        let diff = a.abs_diff(b);
        let sum = a + b + 2;
        let mut v = self.direct[diff] - self.direct[sum];
        // v_k'[a] = (-1)^a v_k[a]
        let parity = match (a % 2, b % 2) {
            (0, 0) => 2.0,
            (1, 1) => -2.0,
            _ => 0.0,
        };
        if parity != 0.0 {
            v += parity * (self.cross[diff] - self.cross[sum]);
        }
        self.scale * v
    }
}

/// Fitted latent-grid projection.
#[derive(Debug, Clone)]
pub struct LatentProjection {
    params: KernelParams,
    order: PerturbationOrder,
    kernel: AxisKernel,
    eig: SwdEigensystem,
    pairs: Vec<PairSolution>,
    projected_means: Vec<f64>,
    weights: Vec<f64>,
    noise_variances: Vec<f64>,
    interaction: SymmetricBand,
    kernel_inverse: ModalMatrix,
    q_inverse: ModalMatrix,
    posterior_diag: Vec<f64>,
    lambda_clamped: usize,
}

fn alternating(a: usize) -> f64 {
    if a.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// Projects `(inputs, targets)` onto `grid` and inverts `Q` perturbatively.
pub fn latent_fit(
    inputs: &[f64],
    targets: &[f64],
    grid: &GridSpec,
    params: &KernelParams,
    band: BandOrder,
    order: PerturbationOrder,
) -> Result<LatentProjection> {
    if grid.dim() != 1 || params.dim() != 1 {
        return Err(Error::Unsupported("latent grids are one-dimensional".into()));
    }
    if inputs.len() != targets.len() {
        return Err(Error::DimensionMismatch {
            expected: inputs.len(),
            found: targets.len(),
        });
    }
    let noise = params.noise_variance();
    if !(noise > 0.0) {
        return Err(Error::invalid("latent-grid regression needs a positive noise variance"));
    }
    let s2 = params.signal_variance();
    let kernel = AxisKernel::new(*grid.axis(0), params.length_scale(0), band)?;
    let eig = SwdEigensystem::from_alpha(grid.size(), s2, kernel.alpha(), band)?;
    let m = eig.size();
    let width = band.width();

    let inv_lambda: Vec<f64> = eig.eigenvalues().iter().map(|l| 1.0 / l).collect();
    let kernel_inverse = ModalMatrix::new(&eig, &inv_lambda, &vec![0.0; m])?;

    // data pass: Lambda, B = K_gx Lambda^-1 K_xg, and K_gx Lambda^-1 y
    let mut interaction = SymmetricBand::zeros(m, width);
    let mut rhs = vec![0.0; m];
    let mut noise_variances = Vec::with_capacity(inputs.len());
    let mut lambda_clamped = 0;
    for (&x, &y) in inputs.iter().zip(targets) {
        let row: Vec<(usize, f64)> = kernel.row(x).into_iter().map(|(j, v)| (j, s2 * v)).collect();
        let mut explained = 0.0;
        for &(i, ri) in &row {
            for &(j, rj) in &row {
                explained += ri * rj * kernel_inverse.entry(i, j);
            }
        }
        let residual = s2 * kernel.self_value(x) - explained;
        if residual < -CLAMP_TOLERANCE * s2 {
            lambda_clamped += 1;
        }
        let lam = residual.max(0.0) + noise;
        noise_variances.push(lam);
        for (p, &(i, ri)) in row.iter().enumerate() {
            rhs[i] += ri * y / lam;
            for &(j, rj) in &row[p..] {
                interaction.add(i, j - i, ri * rj / lam);
            }
        }
    }

    // epsilon_k = v_k^T B v_k and delta_k = v_k'^T B v_k as cosine series
    let len = 2 * (m + 1);
    let mut eps_series = vec![0.0; len];
    let mut delta_series = vec![0.0; len];
    for (a, d, v) in interaction.entries() {
        let w = if d == 0 { v } else { 2.0 * v };
        eps_series[d] += w;
        eps_series[2 * a + d + 2] -= w;
        if d % 2 == 0 {
            let wd = w * alternating(a);
            delta_series[d] += wd;
            delta_series[2 * a + d + 2] -= wd;
        }
    }
    let scale = 1.0 / (m + 1) as f64;
    let eps_all = eig.transform().cosine_sums(&eps_series)?;
    let delta_all = match order {
        PerturbationOrder::First => vec![0.0; len],
        PerturbationOrder::Second => eig.transform().cosine_sums(&delta_series)?,
    };
    let epsilon: Vec<f64> = (1..=m).map(|k| scale * eps_all[k]).collect();
    let lambda = eig.eigenvalues();

    let mut pairs = Vec::with_capacity(m.div_ceil(2));
    for k in 1..=m / 2 {
        let kb = m + 1 - k;
        pairs.push(PairSolution::solve(
            k,
            kb,
            [lambda[k - 1], lambda[kb - 1]],
            [epsilon[k - 1], epsilon[kb - 1]],
            scale * delta_all[k],
        ));
    }
    if m % 2 == 1 {
        let k = m.div_ceil(2);
        pairs.push(PairSolution::single(k, lambda[k - 1], epsilon[k - 1]));
    }
    for p in &pairs {
        let bad = !(p.chi_plus > 0.0) || (p.partner.is_some() && !(p.chi_minus > 0.0));
        if bad {
            return Err(Error::Fit(format!(
                "non-positive perturbed eigenvalue for mode {} (chi = {}, {})",
                p.mode, p.chi_plus, p.chi_minus
            )));
        }
    }

    // Q^-1 applied to K_gx Lambda^-1 y, in the standing-wave basis
    let rhs_modal = eig.project(&rhs, TransformPath::Fast)?;
    let mut z = vec![0.0; m];
    let mut q_direct = vec![0.0; m];
    let mut q_cross = vec![0.0; m];
    let mut a_direct = vec![0.0; m];
    let mut a_cross = vec![0.0; m];
    for p in &pairs {
        let k = p.mode - 1;
        match p.partner {
            Some(partner) => {
                let kb = partner - 1;
                let (s, c) = p.phi.sin_cos();
                let plus = c * rhs_modal[k] + s * rhs_modal[kb];
                let minus = -s * rhs_modal[k] + c * rhs_modal[kb];
                z[k] = c * plus / p.chi_plus - s * minus / p.chi_minus;
                z[kb] = s * plus / p.chi_plus + c * minus / p.chi_minus;
                q_direct[k] = c * c / p.chi_plus + s * s / p.chi_minus;
                q_direct[kb] = s * s / p.chi_plus + c * c / p.chi_minus;
                q_cross[k] = c * s * (1.0 / p.chi_plus - 1.0 / p.chi_minus);
                a_direct[k] = p.lambda * p.lambda * q_direct[k];
                a_direct[kb] = p.lambda_partner * p.lambda_partner * q_direct[kb];
                a_cross[k] = p.lambda * p.lambda_partner * q_cross[k];
            }
            None => {
                z[k] = rhs_modal[k] / p.chi_plus;
                q_direct[k] = 1.0 / p.chi_plus;
                a_direct[k] = p.lambda * p.lambda / p.chi_plus;
            }
        }
    }
    let weights = eig.project(&z, TransformPath::Fast)?;
    let scaled: Vec<f64> = z.iter().zip(lambda).map(|(z, l)| z * l).collect();
    let projected_means = eig.project(&scaled, TransformPath::Fast)?;
    let q_inverse = ModalMatrix::new(&eig, &q_direct, &q_cross)?;
    let posterior = ModalMatrix::new(&eig, &a_direct, &a_cross)?;
    let posterior_diag = (0..m).map(|a| posterior.entry(a, a)).collect();

    Ok(LatentProjection {
        params: params.clone(),
        order,
        kernel,
        eig,
        pairs,
        projected_means,
        weights,
        noise_variances,
        interaction,
        kernel_inverse,
        q_inverse,
        posterior_diag,
        lambda_clamped,
    })
}

impl LatentProjection {
    pub fn params(&self) -> &KernelParams {
        &self.params
    }

    pub fn order(&self) -> PerturbationOrder {
        self.order
    }

    pub fn band(&self) -> BandOrder {
        self.kernel.band()
    }

    pub fn axis(&self) -> &GridAxis {
        self.kernel.axis()
    }

    pub fn eigensystem(&self) -> &SwdEigensystem {
        &self.eig
    }

    pub fn pairs(&self) -> &[PairSolution] {
        &self.pairs
    }

    /// Most probable grid values `g = K_gg Q^-1 K_gx Lambda^-1 y`.
    pub fn projected_means(&self) -> &[f64] {
        &self.projected_means
    }

    /// `Q^-1 K_gx Lambda^-1 y` on the grid; predictive means are `k*^T` times this.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Per-datum variances `Lambda`, each at least the noise variance.
    pub fn noise_variances(&self) -> &[f64] {
        &self.noise_variances
    }

    /// Number of data points whose unexplained prior variance went negative.
    pub fn lambda_clamped(&self) -> usize {
        self.lambda_clamped
    }

    pub fn n_data(&self) -> usize {
        self.noise_variances.len()
    }

    /// Perturbed eigenvalues by mode: `chi+` at the lower mode of each pair,
    /// `chi-` at its partner.
    pub fn chi_spectrum(&self) -> Vec<f64> {
        let mut chi = vec![0.0; self.eig.size()];
        for p in &self.pairs {
            chi[p.mode - 1] = p.chi_plus;
            if let Some(partner) = p.partner {
                chi[partner - 1] = p.chi_minus;
            }
        }
        chi
    }

    /// `K_gx Lambda^-1 K_xg` as a dense matrix.
    pub fn interaction_matrix(&self) -> DMatrix<f64> {
        let m = self.eig.size();
        let mut out = DMatrix::zeros(m, m);
        for (a, d, v) in self.interaction.entries() {
            out[(a, a + d)] = v;
            out[(a + d, a)] = v;
        }
        out
    }

    /// Entry of the perturbative `Q^-1` (zero-based).
    pub fn q_inverse_entry(&self, a: usize, b: usize) -> f64 {
        self.q_inverse.entry(a, b)
    }

    /// Entry of `K_gg^-1` (zero-based).
    pub fn kernel_inverse_entry(&self, a: usize, b: usize) -> f64 {
        self.kernel_inverse.entry(a, b)
    }
}

/// Predictive mean `k*^T K_gg^-1 g` and variance
/// `max(k** - k*^T K_gg^-1 k*, 0) + k*^T Q^-1 k*`. The noise variance is
/// reported separately (see [`PredictiveResult::observation_variance`]).
pub fn latent_predict(model: &LatentProjection, test: &[f64]) -> PredictiveResult {
    let s2 = model.params.signal_variance();
    let mut mean = Vec::with_capacity(test.len());
    let mut variance = Vec::with_capacity(test.len());
    let mut clamped = 0;
    for &x in test {
        let row: Vec<(usize, f64)> = model.kernel.row(x).into_iter().map(|(j, v)| (j, s2 * v)).collect();
        mean.push(row.iter().map(|&(j, v)| v * model.weights[j]).sum());
        let mut explained = 0.0;
        let mut correction = 0.0;
        for &(i, ri) in &row {
            for &(j, rj) in &row {
                explained += ri * rj * model.kernel_inverse.entry(i, j);
                correction += ri * rj * model.q_inverse.entry(i, j);
            }
        }
        let residual = s2 * model.kernel.self_value(x) - explained;
        if residual < -CLAMP_TOLERANCE * s2 {
            clamped += 1;
        }
        variance.push(residual.max(0.0) + correction.max(0.0));
    }
    PredictiveResult {
        mean,
        variance,
        noise_variance: model.params.noise_variance(),
        clamped,
    }
}

/// Diagonal of the grid posterior covariance `K_gg Q^-1 K_gg`.
pub fn posterior_covariance_diag(model: &LatentProjection) -> Vec<f64> {
    model.posterior_diag.clone()
}

/// How far `K_gx Lambda^-1 K_xg` is from `a I + b (super + sub diagonal)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualDiagnostic {
    pub diagonal_mean: f64,
    pub off_diagonal_mean: f64,
    pub diagonal_ratio: f64,
    pub off_diagonal_ratio: f64,
    pub residual_max: f64,
    pub threshold: f64,
    pub valid: bool,
}

fn mean_and_ratio(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let ratio = if mean == 0.0 {
        if var == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        var.sqrt() / mean.abs()
    };
    (mean, ratio)
}

pub fn residual_diagnostic(model: &LatentProjection) -> ResidualDiagnostic {
    residual_diagnostic_with(model, DEFAULT_VALIDITY_THRESHOLD)
}

pub fn residual_diagnostic_with(model: &LatentProjection, threshold: f64) -> ResidualDiagnostic {
    let band = &model.interaction;
    let m = band.size;
    let diagonal: Vec<f64> = (0..m).map(|a| band.get(a, 0)).collect();
    let off: Vec<f64> = (0..m.saturating_sub(1)).map(|a| band.get(a, 1)).collect();
    let (a, diagonal_ratio) = mean_and_ratio(&diagonal);
    let (b, off_diagonal_ratio) = mean_and_ratio(&off);
    let residual_max = band
        .entries()
        .map(|(_, d, v)| match d {
            0 => (v - a).abs(),
            1 => (v - b).abs(),
            _ => v.abs(),
        })
        .fold(0.0, f64::max);
    ResidualDiagnostic {
        diagonal_mean: a,
        off_diagonal_mean: b,
        diagonal_ratio,
        off_diagonal_ratio,
        residual_max,
        threshold,
        valid: diagonal_ratio < threshold && off_diagonal_ratio < threshold,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(noise: f64) -> KernelParams {
        KernelParams::isotropic(1.0, 0.03, noise).unwrap()
    }

    #[test]
    fn rejects_zero_noise() {
        let grid = GridSpec::unit_interval(20).unwrap();
        let err = latent_fit(
            &[0.5],
            &[1.0],
            &grid,
            &params(0.0),
            BandOrder::Tridiagonal,
            PerturbationOrder::First,
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidInput(_)));
    }

    #[test]
    fn no_data_is_prior() {
        let grid = GridSpec::unit_interval(20).unwrap();
        for band in [BandOrder::Tridiagonal, BandOrder::Pentadiagonal] {
            let m = latent_fit(&[], &[], &grid, &params(0.01), band, PerturbationOrder::Second).unwrap();
            assert!(m.projected_means().iter().all(|g| *g == 0.0));
            let k = crate::kernel::banded_grid_kernel(&grid, &params(0.01), band).unwrap();
            for (a, d) in posterior_covariance_diag(&m).iter().enumerate() {
                assert!((d - k.get(a, a)).abs() < 1e-12);
            }
            let diag = residual_diagnostic(&m);
            assert_eq!(diag.diagonal_mean, 0.0);
            assert_eq!(diag.residual_max, 0.0);
            assert!(diag.valid);
        }
    }

    #[test]
    fn far_test_point_is_prior() {
        let grid = GridSpec::unit_interval(15).unwrap();
        let xs: Vec<f64> = (0..50).map(|i| i as f64 / 49.0).collect();
        let ys: Vec<f64> = xs.iter().map(|x| x.sin()).collect();
        let p = KernelParams::isotropic(0.25, 0.04, 0.04).unwrap();
        let m = latent_fit(&xs, &ys, &grid, &p, BandOrder::Tridiagonal, PerturbationOrder::First).unwrap();
        let r = latent_predict(&m, &[10.0]);
        assert_eq!(r.mean[0], 0.0);
        assert!((r.observation_variance(0) - 0.29).abs() < 1e-15);
    }

    #[test]
    fn modal_matrix_matches_dense_sum() {
        let eig = SwdEigensystem::from_alpha(9, 1.0, 0.3, BandOrder::Tridiagonal).unwrap();
        let g: Vec<f64> = (0..9).map(|i| 0.3 + i as f64 * 0.1).collect();
        let c: Vec<f64> = (0..9)
            .map(|i| if i < 4 { 0.05 * i as f64 - 0.07 } else { 0.0 })
            .collect();
        let mm = ModalMatrix::new(&eig, &g, &c).unwrap();
        for a in 0..9 {
            for b in 0..9 {
                let mut expect = 0.0;
                for k in 1..=9 {
                    expect += g[k - 1] * eig.component(k, a + 1) * eig.component(k, b + 1);
                    if k <= 4 {
                        let kb = 10 - k;
                        expect += c[k - 1]
                            * (eig.component(k, a + 1) * eig.component(kb, b + 1)
                                + eig.component(kb, a + 1) * eig.component(k, b + 1));
                    }
                }
                assert!((mm.entry(a, b) - expect).abs() < 1e-13, "{a} {b}");
            }
        }
    }
}
