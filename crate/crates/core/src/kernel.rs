//! Squared-exponential kernel, regular grids and the banded grid kernels
//! built from them.
//!
//! On a regular grid with spacing `delta` the SE kernel between neighbours
//! `n` steps apart is `sigma^2 * alpha^(n^2)` with
//! `alpha = exp(-delta^2 / (2 l^2))`. Keeping only `|i - j| <= 1` gives a
//! tridiagonal Toeplitz matrix; keeping `|i - j| <= 2` and correcting the two
//! corner entries gives the pentadiagonal matrix that the standing-wave basis
//! diagonalizes exactly.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance (in units of the grid spacing) used to break ties at the
/// truncation radius: a point exactly on the radius is excluded.
const TIE_TOLERANCE: f64 = 1e-9;

/// Relative tolerance used when deciding whether a point lies inside the
/// grid hull.
const HULL_TOLERANCE: f64 = 1e-9;

/// Squared-exponential hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    signal_variance: f64,
    length_scales: Vec<f64>,
    noise_variance: f64,
}

impl KernelParams {
    pub fn new(signal_variance: f64, length_scales: Vec<f64>, noise_variance: f64) -> Result<Self> {
        if !(signal_variance.is_finite() && signal_variance > 0.0) {
            return Err(Error::invalid(format!(
                "signal variance must be positive, got {signal_variance}"
            )));
        }
        if length_scales.is_empty() {
            return Err(Error::invalid("at least one length scale is required"));
        }
        if let Some(bad) = length_scales.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
            return Err(Error::invalid(format!("length scales must be positive, got {bad}")));
        }
        if !(noise_variance.is_finite() && noise_variance >= 0.0) {
            return Err(Error::invalid(format!(
                "noise variance must be nonnegative, got {noise_variance}"
            )));
        }
        Ok(Self {
            signal_variance,
            length_scales,
            noise_variance,
        })
    }

    /// One-dimensional parameters.
    pub fn isotropic(signal_variance: f64, length_scale: f64, noise_variance: f64) -> Result<Self> {
        Self::new(signal_variance, vec![length_scale], noise_variance)
    }

    pub fn signal_variance(&self) -> f64 {
        self.signal_variance
    }

    pub fn length_scales(&self) -> &[f64] {
        &self.length_scales
    }

    pub fn length_scale(&self, dim: usize) -> f64 {
        self.length_scales[dim]
    }

    pub fn noise_variance(&self) -> f64 {
        self.noise_variance
    }

    pub fn dim(&self) -> usize {
        self.length_scales.len()
    }

    pub fn with_noise_variance(&self, noise_variance: f64) -> Result<Self> {
        Self::new(self.signal_variance, self.length_scales.clone(), noise_variance)
    }
}

/// One axis of a regular grid: points `origin + j * spacing`, `j = 0..count`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridAxis {
    origin: f64,
    spacing: f64,
    count: usize,
}

impl GridAxis {
    pub fn new(origin: f64, spacing: f64, count: usize) -> Result<Self> {
        if !origin.is_finite() {
            return Err(Error::invalid("grid origin must be finite"));
        }
        if !(spacing.is_finite() && spacing > 0.0) {
            return Err(Error::invalid(format!("grid spacing must be positive, got {spacing}")));
        }
        if count == 0 {
            return Err(Error::invalid("grid must have at least one point"));
        }
        Ok(Self { origin, spacing, count })
    }

    /// `count` evenly spaced points covering `[lo, hi]`. A single point sits
    /// at `lo` with unit spacing.
    pub fn spanning(lo: f64, hi: f64, count: usize) -> Result<Self> {
        if count == 1 {
            return Self::new(lo, 1.0, 1);
        }
        if !(hi > lo) {
            return Err(Error::invalid(format!("empty grid span [{lo}, {hi}]")));
        }
        Self::new(lo, (hi - lo) / (count - 1) as f64, count)
    }

    pub fn origin(&self) -> f64 {
        self.origin
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// Zero-based grid point.
    pub fn point(&self, j: usize) -> f64 {
        self.origin + j as f64 * self.spacing
    }

    pub fn end(&self) -> f64 {
        self.point(self.count - 1)
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.count).map(|j| self.point(j)).collect()
    }

    /// Position of `x` in index units (grid point `j` maps to `j`).
    pub fn index_coordinate(&self, x: f64) -> f64 {
        (x - self.origin) / self.spacing
    }
}

/// A regular tensor-product grid. Flattened data is row-major: the last
/// dimension varies fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    axes: Vec<GridAxis>,
}

impl GridSpec {
    pub fn new(axes: Vec<GridAxis>) -> Result<Self> {
        if axes.is_empty() {
            return Err(Error::invalid("grid needs at least one dimension"));
        }
        Ok(Self { axes })
    }

    pub fn one_d(origin: f64, spacing: f64, count: usize) -> Result<Self> {
        Ok(Self {
            axes: vec![GridAxis::new(origin, spacing, count)?],
        })
    }

    /// `count` evenly spaced points in `[0, 1]`.
    pub fn unit_interval(count: usize) -> Result<Self> {
        Ok(Self {
            axes: vec![GridAxis::spanning(0.0, 1.0, count)?],
        })
    }

    pub fn axes(&self) -> &[GridAxis] {
        &self.axes
    }

    pub fn axis(&self, dim: usize) -> &GridAxis {
        &self.axes[dim]
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(GridAxis::count).collect()
    }

    pub fn size(&self) -> usize {
        self.axes.iter().map(GridAxis::count).product()
    }

    /// All grid points in row-major order.
    pub fn points(&self) -> Vec<Vec<f64>> {
        let shape = self.shape();
        (0..self.size())
            .map(|flat| {
                unravel(flat, &shape)
                    .into_iter()
                    .zip(&self.axes)
                    .map(|(j, axis)| axis.point(j))
                    .collect()
            })
            .collect()
    }
}

/// Row-major multi-index of a flat offset.
pub(crate) fn unravel(mut flat: usize, shape: &[usize]) -> Vec<usize> {
    let mut idx = vec![0; shape.len()];
    for d in (0..shape.len()).rev() {
        idx[d] = flat % shape[d];
        flat /= shape[d];
    }
    idx
}

/// Number of retained diagonals in a banded grid kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BandOrder {
    Tridiagonal,
    Pentadiagonal,
}

impl BandOrder {
    pub fn width(self) -> usize {
        match self {
            BandOrder::Tridiagonal => 3,
            BandOrder::Pentadiagonal => 5,
        }
    }

    /// Number of off-diagonals on each side.
    pub fn half_width(self) -> usize {
        (self.width() - 1) / 2
    }

    /// Cross-kernel truncation radius in units of the grid spacing.
    pub fn radius(self) -> f64 {
        self.width() as f64 / 2.0
    }
}

impl TryFrom<usize> for BandOrder {
    type Error = Error;

    fn try_from(p: usize) -> Result<Self> {
        match p {
            3 => Ok(BandOrder::Tridiagonal),
            5 => Ok(BandOrder::Pentadiagonal),
            other => Err(Error::invalid(format!("band order must be 3 or 5, got {other}"))),
        }
    }
}

impl std::fmt::Display for BandOrder {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.width())
    }
}

/// `sigma^2 * prod_i exp(-(x_i - x'_i)^2 / (2 l_i^2))`.
pub fn se_kernel(x: &[f64], x_prime: &[f64], params: &KernelParams) -> Result<f64> {
    if x.len() != params.dim() {
        return Err(Error::DimensionMismatch {
            expected: params.dim(),
            found: x.len(),
        });
    }
    if x_prime.len() != params.dim() {
        return Err(Error::DimensionMismatch {
            expected: params.dim(),
            found: x_prime.len(),
        });
    }
    let exponent: f64 = x
        .iter()
        .zip(x_prime)
        .zip(params.length_scales())
        .map(|((a, b), l)| (a - b) * (a - b) / (2.0 * l * l))
        .sum();
    Ok(params.signal_variance() * (-exponent).exp())
}

/// Nearest-neighbour correlation `exp(-delta^2 / (2 l^2))`.
pub fn alpha(length_scale: f64, spacing: f64) -> Result<f64> {
    if !(length_scale > 0.0 && length_scale.is_finite()) {
        return Err(Error::invalid(format!(
            "length scale must be positive, got {length_scale}"
        )));
    }
    if !(spacing > 0.0 && spacing.is_finite()) {
        return Err(Error::invalid(format!("grid spacing must be positive, got {spacing}")));
    }
    Ok(alpha_from_ratio(length_scale / spacing))
}

pub fn alpha_from_ratio(ratio: f64) -> f64 {
    (-1.0 / (2.0 * ratio * ratio)).exp()
}

/// Inverse of [`alpha_from_ratio`]; `alpha >= 1` maps to infinity.
pub fn ratio_from_alpha(alpha: f64) -> f64 {
    if alpha >= 1.0 {
        f64::INFINITY
    } else if alpha <= 0.0 {
        0.0
    } else {
        1.0 / (-2.0 * alpha.ln()).sqrt()
    }
}

/// Normalized eigenvalue of mode `k` (1-based) of an `m`-point grid kernel,
/// i.e. the eigenvalue divided by the signal variance.
pub(crate) fn normalized_eigenvalue(band: BandOrder, alpha: f64, k: usize, m: usize) -> f64 {
    let theta = k as f64 * PI / (m + 1) as f64;
    match band {
        BandOrder::Tridiagonal => 1.0 + 2.0 * alpha * theta.cos(),
        BandOrder::Pentadiagonal => 1.0 + 2.0 * alpha * theta.cos() + 2.0 * alpha.powi(4) * (2.0 * theta).cos(),
    }
}

/// Smallest normalized eigenvalue over all modes.
pub(crate) fn min_normalized_eigenvalue(band: BandOrder, alpha: f64, m: usize) -> f64 {
    (1..=m)
        .map(|k| normalized_eigenvalue(band, alpha, k, m))
        .fold(f64::INFINITY, f64::min)
}

/// First `alpha` in `(0, 1)` at which `1 + 2 c1 a + 2 c2 a^4` reaches zero,
/// or 1 if it stays positive. The quartic has at most one critical point on
/// `(0, inf)`, so it is monotone on each side of it.
fn first_root_alpha(c1: f64, c2: f64) -> f64 {
    let f = |a: f64| 1.0 + 2.0 * c1 * a + 2.0 * c2 * a.powi(4);
    let mut breaks = vec![0.0];
    if c1 * c2 < 0.0 {
        let critical = (-c1 / (4.0 * c2)).cbrt();
        if critical < 1.0 {
            breaks.push(critical);
        }
    }
    breaks.push(1.0);
    for w in breaks.windows(2) {
        let (mut lo, mut hi) = (w[0], w[1]);
        if f(hi) > 0.0 {
            continue;
        }
        // f(lo) > 0 here: either lo = 0 or the previous segment stayed positive
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= f64::EPSILON * hi {
                break;
            }
        }
        return lo;
    }
    1.0
}

/// Largest `alpha` such that every `alpha' < alpha` keeps all eigenvalues of
/// the `m`-point banded kernel positive.
pub fn max_alpha(band: BandOrder, m: usize) -> f64 {
    match band {
        BandOrder::Tridiagonal if m <= 1 => 1.0,
        // two points: eigenvalues sigma^2 (1 +- alpha) stay positive for alpha < 1
        BandOrder::Tridiagonal if m == 2 => 1.0,
        BandOrder::Tridiagonal => {
            // binding mode is k = M with cos(theta_M) = -cos(pi / (M + 1))
            let c = (PI / (m + 1) as f64).cos();
            (1.0 / (2.0 * c)).min(1.0)
        }
        BandOrder::Pentadiagonal => (1..=m)
            .map(|k| {
                let theta = k as f64 * PI / (m + 1) as f64;
                first_root_alpha(theta.cos(), (2.0 * theta).cos())
            })
            .fold(1.0, f64::min),
    }
}

/// Largest admissible `l / delta` for an `m`-point grid. Infinite when no
/// length scale makes the banded kernel indefinite (`m <= 2` tridiagonal).
pub fn max_length_scale_ratio(band: BandOrder, m: usize) -> f64 {
    ratio_from_alpha(max_alpha(band, m))
}

/// The `m -> infinity` limit of [`max_length_scale_ratio`]:
/// `1/sqrt(2 ln 2)` tridiagonal, `1/sqrt(ln 2)` pentadiagonal.
pub fn asymptotic_max_length_scale_ratio(band: BandOrder) -> f64 {
    match band {
        BandOrder::Tridiagonal => 1.0 / (2.0 * std::f64::consts::LN_2).sqrt(),
        BandOrder::Pentadiagonal => 1.0 / std::f64::consts::LN_2.sqrt(),
    }
}

/// `fraction` of the admissible maximum length scale for an axis, falling
/// back to the asymptotic bound where the finite-grid bound is infinite.
pub fn auto_length_scale(band: BandOrder, axis: &GridAxis, fraction: f64) -> f64 {
    let mut bound = max_length_scale_ratio(band, axis.count());
    if !bound.is_finite() {
        bound = asymptotic_max_length_scale_ratio(band);
    }
    fraction * bound * axis.spacing()
}

/// Checks admissibility of `length_scale` on `axis`, returning `alpha`.
pub(crate) fn admissible_alpha(axis: &GridAxis, length_scale: f64, band: BandOrder) -> Result<f64> {
    let a = alpha(length_scale, axis.spacing())?;
    let bound = max_alpha(band, axis.count());
    if a < bound {
        return Ok(a);
    }
    Err(Error::Positivity {
        ratio: length_scale / axis.spacing(),
        bound: ratio_from_alpha(bound),
        min_eigenvalue: min_normalized_eigenvalue(band, a, axis.count()),
    })
}

/// Symmetric banded matrix with up to two off-diagonals on each side.
#[derive(Debug, Clone, PartialEq)]
pub struct BandedMatrix {
    band: BandOrder,
    diagonal: Vec<f64>,
    first: Vec<f64>,
    second: Vec<f64>,
}

impl BandedMatrix {
    /// Banded SE kernel on one grid axis. The pentadiagonal variant carries
    /// the corner correction `K[0][0] = K[M-1][M-1] = sigma^2 (1 - alpha^4)`.
    pub fn for_axis(axis: &GridAxis, signal_variance: f64, length_scale: f64, band: BandOrder) -> Result<Self> {
        let a = admissible_alpha(axis, length_scale, band)?;
        Ok(Self::from_alpha(axis.count(), signal_variance, a, band))
    }

    /// Same matrix from `alpha` directly, without the admissibility check.
    pub fn from_alpha(m: usize, signal_variance: f64, alpha: f64, band: BandOrder) -> Self {
        let mut diagonal = vec![signal_variance; m];
        let first = vec![signal_variance * alpha; m.saturating_sub(1)];
        let second = match band {
            BandOrder::Tridiagonal => Vec::new(),
            BandOrder::Pentadiagonal => {
                let a4 = signal_variance * alpha.powi(4);
                diagonal[0] -= a4;
                diagonal[m - 1] -= a4;
                vec![a4; m.saturating_sub(2)]
            }
        };
        Self {
            band,
            diagonal,
            first,
            second,
        }
    }

    pub fn size(&self) -> usize {
        self.diagonal.len()
    }

    pub fn band(&self) -> BandOrder {
        self.band
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diagonal
    }

    pub fn first_off_diagonal(&self) -> &[f64] {
        &self.first
    }

    pub fn second_off_diagonal(&self) -> &[f64] {
        &self.second
    }

    /// Zero-based entry.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (lo, d) = if i <= j { (i, j - i) } else { (j, i - j) };
        match d {
            0 => self.diagonal[lo],
            1 => self.first[lo],
            2 if !self.second.is_empty() => self.second[lo],
            _ => 0.0,
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        let m = self.size();
        if x.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                found: x.len(),
            });
        }
        let hw = self.band.half_width();
        Ok((0..m)
            .map(|i| {
                let lo = i.saturating_sub(hw);
                let hi = (i + hw).min(m - 1);
                (lo..=hi).map(|j| self.get(i, j) * x[j]).sum()
            })
            .collect())
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let m = self.size();
        DMatrix::from_fn(m, m, |i, j| self.get(i, j))
    }
}

/// Banded SE kernel of a one-dimensional grid.
pub fn banded_grid_kernel(grid: &GridSpec, params: &KernelParams, band: BandOrder) -> Result<BandedMatrix> {
    if grid.dim() != 1 {
        return Err(Error::Unsupported(format!(
            "banded_grid_kernel takes a 1-D grid, got {} dimensions",
            grid.dim()
        )));
    }
    BandedMatrix::for_axis(grid.axis(0), params.signal_variance(), params.length_scale(0), band)
}

/// Truncated SE kernel between arbitrary points and the points of one grid
/// axis, normalized to unit signal variance.
///
/// For the pentadiagonal band the kernel is `k(x, g_j) - k(x, g'_j)` summed
/// over the mirror images `g'_j` of `g_j` about the virtual nodes one step
/// outside each end of the grid. On grid points this reproduces the corner
/// corrected matrix exactly; it is only applied inside the grid hull.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisKernel {
    axis: GridAxis,
    length_scale: f64,
    alpha: f64,
    band: BandOrder,
}

impl AxisKernel {
    pub fn new(axis: GridAxis, length_scale: f64, band: BandOrder) -> Result<Self> {
        let alpha = admissible_alpha(&axis, length_scale, band)?;
        Ok(Self {
            axis,
            length_scale,
            alpha,
            band,
        })
    }

    pub fn axis(&self) -> &GridAxis {
        &self.axis
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn band(&self) -> BandOrder {
        self.band
    }

    pub fn length_scale(&self) -> f64 {
        self.length_scale
    }

    fn value_at_index_distance(&self, d: f64) -> f64 {
        let dx = d * self.axis.spacing();
        (-dx * dx / (2.0 * self.length_scale * self.length_scale)).exp()
    }

    fn within_radius(&self, d: f64) -> bool {
        d.abs() < self.band.radius() - TIE_TOLERANCE
    }

    fn mirrored(&self, t: f64) -> bool {
        let last = (self.axis.count() - 1) as f64;
        let tol = HULL_TOLERANCE * last.max(1.0);
        self.band == BandOrder::Pentadiagonal && t >= -tol && t <= last + tol
    }

    /// Nonzero `(grid index, value)` pairs of the cross-kernel row for `x`,
    /// in increasing index order. At most `band.width()` entries.
    pub fn row(&self, x: f64) -> Vec<(usize, f64)> {
        let m = self.axis.count() as i64;
        let t = self.axis.index_coordinate(x);
        if !t.is_finite() {
            return Vec::new();
        }
        let r = self.band.radius();
        let lo = ((t - r).ceil() as i64).max(0);
        let hi = ((t + r).floor() as i64).min(m - 1);
        let mirrored = self.mirrored(t);
        let mut row = Vec::with_capacity(self.band.width());
        for j in lo..=hi {
            let d = t - j as f64;
            if !self.within_radius(d) {
                continue;
            }
            let mut v = self.value_at_index_distance(d);
            if mirrored {
                // images of g_j about index -1 and index M
                for image in [-2 - j, 2 * m - j] {
                    let di = t - image as f64;
                    if self.within_radius(di) {
                        v -= self.value_at_index_distance(di);
                    }
                }
            }
            row.push((j as usize, v));
        }
        row
    }

    /// Normalized prior variance `k(x, x)` consistent with [`AxisKernel::row`].
    pub fn self_value(&self, x: f64) -> f64 {
        let t = self.axis.index_coordinate(x);
        let mut v = 1.0;
        if t.is_finite() && self.mirrored(t) {
            let m = self.axis.count() as f64;
            for d in [2.0 * t + 2.0, 2.0 * m - 2.0 * t] {
                if self.within_radius(d) {
                    v -= self.value_at_index_distance(d);
                }
            }
        }
        v
    }
}

/// Sparse kernel matrix between `N` off-grid points and an `M`-point grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseCrossKernel {
    cols: usize,
    rows: Vec<Vec<(usize, f64)>>,
}

impl SparseCrossKernel {
    pub fn rows(&self) -> &[Vec<(usize, f64)>] {
        &self.rows
    }

    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.cols
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.rows.len(), self.cols);
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, v) in row {
                out[(i, j)] = v;
            }
        }
        out
    }
}

/// Cross-kernel rows keeping grid points strictly within `band.radius()`
/// grid spacings of each input point.
pub fn sparse_cross_kernel(
    points: &[f64],
    grid: &GridSpec,
    params: &KernelParams,
    band: BandOrder,
) -> Result<SparseCrossKernel> {
    if grid.dim() != 1 {
        return Err(Error::Unsupported(format!(
            "sparse_cross_kernel takes a 1-D grid, got {} dimensions",
            grid.dim()
        )));
    }
    let kernel = AxisKernel::new(*grid.axis(0), params.length_scale(0), band)?;
    let s2 = params.signal_variance();
    let rows = points
        .iter()
        .map(|&x| kernel.row(x).into_iter().map(|(j, v)| (j, s2 * v)).collect())
        .collect();
    Ok(SparseCrossKernel {
        cols: grid.size(),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn params(s2: f64, l: f64) -> KernelParams {
        KernelParams::isotropic(s2, l, 0.0).unwrap()
    }

    #[test]
    fn kernel_params_validation() {
        assert!(KernelParams::isotropic(0.0, 1.0, 0.0).is_err());
        assert!(KernelParams::isotropic(1.0, -1.0, 0.0).is_err());
        assert!(KernelParams::isotropic(1.0, 1.0, -1e-3).is_err());
        assert!(KernelParams::new(1.0, vec![], 0.0).is_err());
        assert!(GridAxis::new(0.0, 0.0, 3).is_err());
        assert!(GridAxis::new(0.0, 1.0, 0).is_err());
    }

    #[test]
    fn se_kernel_zero_distance() {
        let p = params(2.0, 0.3);
        assert_eq!(se_kernel(&[0.7], &[0.7], &p).unwrap(), 2.0);
    }

    #[test]
    fn se_kernel_one_spacing_is_alpha() {
        let p = params(1.5, 0.06);
        let delta = 1.0 / 9.0;
        let a = alpha(0.06, delta).unwrap();
        assert_relative_eq!(
            se_kernel(&[0.2], &[0.2 + delta], &p).unwrap(),
            1.5 * a,
            max_relative = 1e-14
        );
    }

    #[test]
    fn se_kernel_2d_diagonal_neighbour() {
        let delta = 0.1;
        let p = KernelParams::new(1.3, vec![0.07, 0.07], 0.0).unwrap();
        let a = alpha(0.07, delta).unwrap();
        let direct = 1.3 * (-(2.0 * delta * delta) / (2.0 * 0.07 * 0.07)).exp();
        let v = se_kernel(&[0.0, 0.0], &[delta, delta], &p).unwrap();
        assert_relative_eq!(v, 1.3 * a * a, max_relative = 1e-14);
        assert_relative_eq!(v, direct, max_relative = 1e-14);
    }

    #[test]
    fn se_kernel_dimension_mismatch() {
        let p = params(1.0, 1.0);
        assert!(matches!(
            se_kernel(&[0.0, 1.0], &[0.0], &p),
            Err(Error::DimensionMismatch { expected: 1, found: 2 })
        ));
    }

    #[test]
    fn alpha_values() {
        assert!(alpha(1e-3, 1.0).unwrap() < 1e-100);
        let half = alpha(1.0 / (2.0 * 2f64.ln()).sqrt(), 1.0).unwrap();
        assert_relative_eq!(half, 0.5, max_relative = 1e-14);
        let fig2b = alpha(0.06, 1.0 / 9.0).unwrap();
        let expected = (-(1.0f64 / 9.0).powi(2) / (2.0 * 0.06 * 0.06)).exp();
        assert_relative_eq!(fig2b, expected, max_relative = 1e-14);
        assert!((fig2b - 0.18).abs() < 1e-3);
        assert!(alpha(0.0, 1.0).is_err());
        assert!(alpha(1.0, -1.0).is_err());
    }

    #[test]
    fn tridiagonal_small_case() {
        let m = BandedMatrix::from_alpha(3, 1.0, 0.3, BandOrder::Tridiagonal);
        let expect = [[1.0, 0.3, 0.0], [0.3, 1.0, 0.3], [0.0, 0.3, 1.0]];
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(m.get(i, j), expect[i][j]);
            }
        }
    }

    #[test]
    fn pentadiagonal_corners() {
        let m = BandedMatrix::from_alpha(4, 1.0, 0.3, BandOrder::Pentadiagonal);
        assert_relative_eq!(m.get(0, 0), 0.9919, max_relative = 1e-14);
        assert_relative_eq!(m.get(3, 3), 0.9919, max_relative = 1e-14);
        assert_eq!(m.get(1, 1), 1.0);
        assert_relative_eq!(m.get(0, 2), 0.0081, max_relative = 1e-14);
        assert_relative_eq!(m.get(3, 1), 0.0081, max_relative = 1e-14);
        assert_eq!(m.get(0, 3), 0.0);
    }

    #[test]
    fn tiny_alpha_gives_scaled_identity() {
        for band in [BandOrder::Tridiagonal, BandOrder::Pentadiagonal] {
            let axis = GridAxis::new(0.0, 1.0, 6).unwrap();
            let m = BandedMatrix::for_axis(&axis, 2.5, 0.01, band).unwrap();
            let d = m.to_dense();
            for i in 0..6 {
                for j in 0..6 {
                    assert_eq!(d[(i, j)], if i == j { 2.5 } else { 0.0 });
                }
            }
        }
    }

    #[test]
    fn inadmissible_ratio_is_rejected() {
        let grid = GridSpec::one_d(0.0, 1.0, 50).unwrap();
        let err = banded_grid_kernel(&grid, &params(1.0, 0.9), BandOrder::Tridiagonal).unwrap_err();
        match err {
            Error::Positivity {
                ratio,
                bound,
                min_eigenvalue,
            } => {
                assert_relative_eq!(ratio, 0.9);
                assert!(bound < 0.9 && bound > 0.849);
                assert!(min_eigenvalue <= 0.0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn tridiagonal_bound_small_grids() {
        assert!(max_length_scale_ratio(BandOrder::Tridiagonal, 1).is_infinite());
        // 2x2 [[1, a], [a, 1]] stays positive for every a < 1
        assert!(max_length_scale_ratio(BandOrder::Tridiagonal, 2).is_infinite());
        // M = 3: alpha < 1 / (2 cos(pi/4)) = 1/sqrt(2)
        assert_relative_eq!(
            max_length_scale_ratio(BandOrder::Tridiagonal, 3),
            ratio_from_alpha(1.0 / 2f64.sqrt()),
            max_relative = 1e-14
        );
    }

    #[test]
    fn pentadiagonal_bound_limit() {
        let limit = asymptotic_max_length_scale_ratio(BandOrder::Pentadiagonal);
        let big = max_length_scale_ratio(BandOrder::Pentadiagonal, 4000);
        assert!((big - limit).abs() < 1e-3, "{big} vs {limit}");
        assert!(limit > asymptotic_max_length_scale_ratio(BandOrder::Tridiagonal));
    }

    #[test]
    fn cross_kernel_on_grid_point() {
        let grid = GridSpec::one_d(0.0, 0.1, 10).unwrap();
        let p = params(1.7, 0.06);
        let a = alpha(0.06, 0.1).unwrap();
        let k = sparse_cross_kernel(&[0.4, 0.0], &grid, &p, BandOrder::Tridiagonal).unwrap();
        let row = k.row(0);
        assert_eq!(row.iter().map(|e| e.0).collect::<Vec<_>>(), vec![3, 4, 5]);
        assert_relative_eq!(row[0].1, 1.7 * a, max_relative = 1e-12);
        assert_relative_eq!(row[1].1, 1.7, max_relative = 1e-15);
        assert_relative_eq!(row[2].1, 1.7 * a, max_relative = 1e-12);
        assert_eq!(k.row(1).len(), 2);
    }

    #[test]
    fn cross_kernel_midpoint_excludes_tie() {
        let delta = 0.125;
        let grid = GridSpec::one_d(0.0, delta, 9).unwrap();
        let p = params(1.0, 0.08);
        let k = sparse_cross_kernel(&[0.5 + delta / 2.0], &grid, &p, BandOrder::Tridiagonal).unwrap();
        let row = k.row(0);
        assert_eq!(row.len(), 2);
        assert_eq!((row[0].0, row[1].0), (4, 5));
        let expect = (-delta * delta / (8.0 * 0.08 * 0.08)).exp();
        assert_relative_eq!(row[0].1, expect, max_relative = 1e-14);
        assert_relative_eq!(row[1].1, expect, max_relative = 1e-14);
    }

    #[test]
    fn cross_kernel_far_and_empty() {
        let grid = GridSpec::unit_interval(11).unwrap();
        let p = params(1.0, 0.05);
        let k = sparse_cross_kernel(&[5.0, -3.0], &grid, &p, BandOrder::Pentadiagonal).unwrap();
        assert!(k.rows().iter().all(Vec::is_empty));
        let empty = sparse_cross_kernel(&[], &grid, &p, BandOrder::Tridiagonal).unwrap();
        assert_eq!(empty.n_rows(), 0);
        assert_eq!(empty.n_cols(), 11);
    }

    #[test]
    fn pentadiagonal_cross_kernel_matches_corner_corrected_rows() {
        let grid = GridSpec::unit_interval(12).unwrap();
        let spacing = grid.axis(0).spacing();
        let p = params(0.8, 0.9 * spacing);
        let band = BandOrder::Pentadiagonal;
        let k = banded_grid_kernel(&grid, &p, band).unwrap();
        let cross = sparse_cross_kernel(&grid.axis(0).points(), &grid, &p, band).unwrap();
        let dense = cross.to_dense();
        for i in 0..12 {
            for j in 0..12 {
                assert!((dense[(i, j)] - k.get(i, j)).abs() < 1e-14);
            }
        }
        let ak = AxisKernel::new(*grid.axis(0), 0.9 * spacing, band).unwrap();
        assert_relative_eq!(ak.self_value(0.0), 1.0 - ak.alpha().powi(4), max_relative = 1e-14);
        assert_relative_eq!(ak.self_value(1.0), 1.0 - ak.alpha().powi(4), max_relative = 1e-12);
        assert_eq!(ak.self_value(0.5), 1.0);
    }
}
