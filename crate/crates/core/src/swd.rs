//! Standing-wave decomposition of banded grid kernels.
//!
//! The tridiagonal Toeplitz kernel on `M` points has eigenvectors
//! `[v_k]_j = sin(j theta_k) / sqrt((M + 1) / 2)` with `theta_k = k pi / (M + 1)`
//! and eigenvalues `sigma^2 (1 + 2 alpha cos theta_k)`. The same vectors
//! diagonalize the corner-corrected pentadiagonal kernel, whose eigenvalues
//! pick up `2 alpha^4 cos 2 theta_k`.
//!
//! Mode and grid indices in this module are 1-based where they appear as
//! arguments (`k`, `j`); vectors are stored 0-based.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::kernel::{admissible_alpha, normalized_eigenvalue, BandOrder, GridAxis, KernelParams};

/// `sin(n pi / (M + 1))` reduced to an argument in `[0, pi/2]` so that
/// symmetric mode pairs share bit-identical magnitudes.
fn reduced_sine(n: u64, m1: u64) -> f64 {
    let mut r = n % (2 * m1);
    let mut sign = 1.0;
    if r >= m1 {
        r -= m1;
        sign = -1.0;
    }
    if 2 * r > m1 {
        r = m1 - r;
    }
    sign * (r as f64 * PI / m1 as f64).sin()
}

/// Component `j` of standing wave `k` on an `M`-point grid (both 1-based).
pub fn eigenvector_component(k: usize, j: usize, m: usize) -> Result<f64> {
    if k == 0 || k > m || j == 0 || j > m {
        return Err(Error::invalid(format!(
            "mode {k} / grid index {j} out of range 1..={m}"
        )));
    }
    let m1 = (m + 1) as u64;
    Ok(reduced_sine((j * k) as u64, m1) * (2.0 / m1 as f64).sqrt())
}

/// Which algorithm evaluates the sine transform.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransformPath {
    /// O(M^2) summation over a precomputed sine table.
    Direct,
    /// O(M log M) via an FFT of length `2(M + 1)`.
    Fast,
}

/// The unnormalized sine transform `w_j = sum_k sin(j k pi / (M + 1)) y_k`
/// for a fixed size, with a cached sine table and FFT plan.
#[derive(Clone)]
pub struct SineTransform {
    size: usize,
    /// `sin(n pi / (M + 1))` for `n = 0..2(M + 1)`.
    table: Arc<Vec<f64>>,
    fft: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for SineTransform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SineTransform").field("size", &self.size).finish()
    }
}

impl SineTransform {
    pub fn new(size: usize) -> Self {
        let m1 = (size + 1) as u64;
        // one sine per quarter wave; the rest follows by symmetry, exactly as in `reduced_sine`
        let quarter: Vec<f64> = (0..=m1 / 2).map(|r| (r as f64 * PI / m1 as f64).sin()).collect();
        let table = (0..2 * m1)
            .map(|n| {
                let (r, sign) = if n >= m1 { (n - m1, -1.0) } else { (n, 1.0) };
                let r = if 2 * r > m1 { m1 - r } else { r };
                sign * quarter[r as usize]
            })
            .collect();
        let fft = FftPlanner::new().plan_fft_forward(2 * (size + 1));
        Self {
            size,
            table: Arc::new(table),
            fft,
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// `sin(j k pi / (M + 1))` for 1-based `j`, `k`.
    #[inline]
    pub(crate) fn sine(&self, j: usize, k: usize) -> f64 {
        self.table[(j * k) % self.table.len()]
    }

    fn check(&self, y: &[f64]) -> Result<()> {
        if y.len() != self.size {
            return Err(Error::DimensionMismatch {
                expected: self.size,
                found: y.len(),
            });
        }
        Ok(())
    }

    pub fn direct(&self, y: &[f64]) -> Result<Vec<f64>> {
        self.check(y)?;
        Ok((1..=self.size)
            .map(|j| y.iter().enumerate().map(|(k0, yk)| self.sine(j, k0 + 1) * yk).sum())
            .collect())
    }

    pub fn fast(&self, y: &[f64]) -> Result<Vec<f64>> {
        self.check(y)?;
        let mut buffer = vec![Complex::new(0.0, 0.0); 2 * (self.size + 1)];
        Ok(self.fast_with_buffer(y, &mut buffer))
    }

    /// Odd extension `z = [0, y, 0, -reverse(y)]`; its DFT is `-2i w`.
    pub(crate) fn fast_with_buffer(&self, y: &[f64], buffer: &mut [Complex<f64>]) -> Vec<f64> {
        let m = self.size;
        let n = 2 * (m + 1);
        debug_assert_eq!(buffer.len(), n);
        buffer.fill(Complex::new(0.0, 0.0));
        for (k0, &v) in y.iter().enumerate() {
            buffer[k0 + 1] = Complex::new(v, 0.0);
            buffer[n - 1 - k0] = Complex::new(-v, 0.0);
        }
        self.fft.process(buffer);
        buffer[1..=m].iter().map(|z| -0.5 * z.im).collect()
    }

    /// `C_k = sum_n c_n cos(n k pi / (M + 1))` for `n, k` in `0..2(M + 1)`,
    /// the real part of a length `2(M + 1)` DFT.
    pub fn cosine_sums(&self, c: &[f64]) -> Result<Vec<f64>> {
        let n = 2 * (self.size + 1);
        if c.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: c.len(),
            });
        }
        let mut buffer: Vec<Complex<f64>> = c.iter().map(|&v| Complex::new(v, 0.0)).collect();
        self.fft.process(&mut buffer);
        Ok(buffer.into_iter().map(|z| z.re).collect())
    }

    /// `H(n) = sum_{k=1}^{M} g_k cos(n theta_k)` for `n` in `0..2(M + 1)`.
    pub fn modal_cosine_sums(&self, g: &[f64]) -> Result<Vec<f64>> {
        self.check(g)?;
        let mut c = vec![0.0; 2 * (self.size + 1)];
        c[1..=self.size].copy_from_slice(g);
        self.cosine_sums(&c)
    }

    pub fn apply(&self, y: &[f64], path: TransformPath) -> Result<Vec<f64>> {
        match path {
            TransformPath::Direct => self.direct(y),
            TransformPath::Fast => self.fast(y),
        }
    }
}

/// `w_j = sum_k sin(k theta_j) y_k`, i.e. `sqrt((M + 1) / 2)` times the
/// projection of `y` onto standing wave `j`.
pub fn eigenvector_transform(y: &[f64], size: usize) -> Result<Vec<f64>> {
    SineTransform::new(size).fast(y)
}

pub fn eigenvector_transform_direct(y: &[f64], size: usize) -> Result<Vec<f64>> {
    SineTransform::new(size).direct(y)
}

/// Analytic eigensystem of a banded SE kernel on one grid axis.
#[derive(Debug, Clone)]
pub struct SwdEigensystem {
    band: BandOrder,
    alpha: f64,
    signal_variance: f64,
    angles: Vec<f64>,
    eigenvalues: Vec<f64>,
    transform: SineTransform,
}

impl SwdEigensystem {
    /// Eigensystem for a given `alpha`, bypassing the length-scale check
    /// except for eigenvalue positivity.
    pub fn from_alpha(size: usize, signal_variance: f64, alpha: f64, band: BandOrder) -> Result<Self> {
        if size == 0 {
            return Err(Error::invalid("grid size must be at least 1"));
        }
        if !(signal_variance > 0.0) || !(0.0..1.0).contains(&alpha) {
            return Err(Error::invalid(format!(
                "need signal variance > 0 and 0 <= alpha < 1, got {signal_variance}, {alpha}"
            )));
        }
        let angles: Vec<f64> = (1..=size).map(|k| k as f64 * PI / (size + 1) as f64).collect();
        let eigenvalues: Vec<f64> = (1..=size)
            .map(|k| signal_variance * normalized_eigenvalue(band, alpha, k, size))
            .collect();
        let min = eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
        if !(min > 0.0) {
            return Err(Error::Positivity {
                ratio: crate::kernel::ratio_from_alpha(alpha),
                bound: crate::kernel::max_length_scale_ratio(band, size),
                min_eigenvalue: min,
            });
        }
        Ok(Self {
            band,
            alpha,
            signal_variance,
            angles,
            eigenvalues,
            transform: SineTransform::new(size),
        })
    }

    pub fn for_axis(axis: &GridAxis, signal_variance: f64, length_scale: f64, band: BandOrder) -> Result<Self> {
        let alpha = admissible_alpha(axis, length_scale, band)?;
        Self::from_alpha(axis.count(), signal_variance, alpha, band)
    }

    pub fn size(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn band(&self) -> BandOrder {
        self.band
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn signal_variance(&self) -> f64 {
        self.signal_variance
    }

    /// `theta_k`, indexed by `k - 1`.
    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    /// `lambda_k` in mode order (not sorted by magnitude), indexed by `k - 1`.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn transform(&self) -> &SineTransform {
        &self.transform
    }

    pub(crate) fn norm(&self) -> f64 {
        (2.0 / (self.size() + 1) as f64).sqrt()
    }

    /// `[v_k]_j`, both 1-based.
    #[inline]
    pub fn component(&self, k: usize, j: usize) -> f64 {
        self.transform.sine(j, k) * self.norm()
    }

    pub fn eigenvector(&self, k: usize) -> Vec<f64> {
        (1..=self.size()).map(|j| self.component(k, j)).collect()
    }

    /// Coefficients `v_k^T y` for all `k`. The standing-wave matrix is
    /// symmetric and orthogonal, so the same call maps coefficients back.
    pub fn project(&self, y: &[f64], path: TransformPath) -> Result<Vec<f64>> {
        let norm = self.norm();
        let mut w = self.transform.apply(y, path)?;
        w.iter_mut().for_each(|v| *v *= norm);
        Ok(w)
    }

    /// `K^{-1} y = sum_k v_k (v_k^T y) / lambda_k`.
    pub fn apply_inverse(&self, y: &[f64]) -> Result<Vec<f64>> {
        self.apply_spectral(y, |lambda| 1.0 / lambda, TransformPath::Fast)
    }

    pub(crate) fn apply_spectral(&self, y: &[f64], f: impl Fn(f64) -> f64, path: TransformPath) -> Result<Vec<f64>> {
        let mut c = self.project(y, path)?;
        c.iter_mut().zip(&self.eigenvalues).for_each(|(c, &l)| *c *= f(l));
        self.project(&c, path)
    }
}

/// Eigensystem of the banded SE kernel of a 1-D grid with spacing `spacing`.
pub fn build_eigensystem(size: usize, params: &KernelParams, spacing: f64, band: BandOrder) -> Result<SwdEigensystem> {
    let axis = GridAxis::new(0.0, spacing, size)?;
    SwdEigensystem::for_axis(&axis, params.signal_variance(), params.length_scale(0), band)
}

pub fn apply_inverse(eig: &SwdEigensystem, y: &[f64]) -> Result<Vec<f64>> {
    eig.apply_inverse(y)
}

/// `a(p) = sum_{k=1}^{M} cos(k p pi / (M + 1))`: `M` when `p = 0 mod 2M+2`,
/// otherwise `(-1 - (-1)^p) / 2`, which is 0 for odd `p` and -1 for even `p`.
pub fn reconstruction_coefficient(p: i64, size: usize) -> f64 {
    let period = 2 * (size as i64 + 1);
    if p.rem_euclid(period) == 0 {
        size as f64
    } else if p.rem_euclid(2) == 1 {
        0.0
    } else {
        -1.0
    }
}

/// `sum_k cos(q theta_k) [v_k v_k^T]_{ij}` in closed form (1-based `i`, `j`).
pub fn reconstruction_identity(q: i64, i: usize, j: usize, size: usize) -> f64 {
    let (i, j) = (i as i64, j as i64);
    let a = |p| reconstruction_coefficient(p, size);
    (a(i - j + q) + a(i - j - q) - a(i + j + q) - a(i + j - q)) / (2.0 * (size + 1) as f64)
}

/// Dense matrix with eigenvalues `sum_q c_q cos(q theta_k)` on the standing
/// waves, assembled from [`reconstruction_identity`].
pub fn reconstruct_from_cosine_series(coefficients: &[f64], size: usize) -> DMatrix<f64> {
    DMatrix::from_fn(size, size, |i, j| {
        coefficients
            .iter()
            .enumerate()
            .filter(|(_, c)| **c != 0.0)
            .map(|(q, c)| c * reconstruction_identity(q as i64, i + 1, j + 1, size))
            .sum()
    })
}

/// The pentadiagonal kernel that the standing waves diagonalize exactly,
/// `sigma^2 (1 + 2 alpha cos theta + 2 alpha^4 cos 2 theta)`.
pub fn reconstructed_matrix(eig: &SwdEigensystem) -> Result<DMatrix<f64>> {
    if eig.band() != BandOrder::Pentadiagonal {
        return Err(Error::Unsupported(
            "reconstruction applies to the pentadiagonal band only".into(),
        ));
    }
    let s2 = eig.signal_variance();
    let a = eig.alpha();
    Ok(reconstruct_from_cosine_series(
        &[s2, 2.0 * s2 * a, 2.0 * s2 * a.powi(4)],
        eig.size(),
    ))
}
