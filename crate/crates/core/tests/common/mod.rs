//! Dense reference computations shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use swdgp::kernel::AxisKernel;
use swdgp::{banded_grid_kernel, sparse_cross_kernel, BandOrder, GridSpec, KernelParams};

/// Latent-grid matrices built densely: `K_gg`, `K_xg`, `Lambda`,
/// `B = K_gx Lambda^-1 K_xg`, `K_gx Lambda^-1 y` and the standing-wave basis.
pub struct Dense {
    pub k: DMatrix<f64>,
    pub kxg: DMatrix<f64>,
    pub lambda: DVector<f64>,
    pub b: DMatrix<f64>,
    pub rhs: DVector<f64>,
    pub basis: DMatrix<f64>,
}

pub fn dense(xs: &[f64], ys: &[f64], grid: &GridSpec, p: &KernelParams, band: BandOrder) -> Dense {
    let m = grid.size();
    let k = banded_grid_kernel(grid, p, band).unwrap().to_dense();
    let kxg = sparse_cross_kernel(xs, grid, p, band).unwrap().to_dense();
    let axis_kernel = AxisKernel::new(*grid.axis(0), p.length_scale(0), band).unwrap();
    let k_inv = k.clone().try_inverse().unwrap();
    let lambda = DVector::from_iterator(
        xs.len(),
        xs.iter().enumerate().map(|(i, &x)| {
            let r = kxg.row(i).transpose();
            let explained = (r.transpose() * &k_inv * &r)[(0, 0)];
            (p.signal_variance() * axis_kernel.self_value(x) - explained).max(0.0) + p.noise_variance()
        }),
    );
    let scaled = DMatrix::from_fn(xs.len(), m, |i, j| kxg[(i, j)] / lambda[i]);
    let b = kxg.transpose() * &scaled;
    let rhs = scaled.transpose() * DVector::from_column_slice(ys);
    let norm = (2.0 / (m + 1) as f64).sqrt();
    let basis = DMatrix::from_fn(m, m, |j, k| {
        norm * (((j + 1) * (k + 1)) as f64 * std::f64::consts::PI / (m + 1) as f64).sin()
    });
    Dense {
        k,
        kxg,
        lambda,
        b,
        rhs,
        basis,
    }
}

impl Dense {
    /// `g = K (K + B)^-1 K_gx Lambda^-1 y` with `Q` inverted exactly.
    pub fn exact_projected_means(&self) -> DVector<f64> {
        let q = &self.k + &self.b;
        &self.k * q.cholesky().expect("Q is positive definite").solve(&self.rhs)
    }
}

/// Smallest eigenvalue of a dense symmetric matrix.
pub fn min_eigenvalue(a: &DMatrix<f64>) -> f64 {
    a.clone().symmetric_eigen().eigenvalues.min()
}
