//! Gaussian-process regression on regular grids through the analytic
//! eigensystem of banded squared-exponential kernels.
//!
//! * [`kernel`]: SE kernel, banded grid kernels, admissible length scales.
//! * [`swd`]: closed-form eigenpairs and the fast sine transform.
//! * [`exact`]: dense reference GP.
//! * [`gridgp`]: on-grid regression in 1-D and 2-D.
//! * [`latent`]: latent-grid regression for scattered 1-D inputs.
//! * [`bench`]: synthetic data, SMSE and the benchmark harness.

// negated float comparisons reject NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod bench;
pub mod error;
pub mod exact;
pub mod gridgp;
pub mod kernel;
pub mod latent;
pub mod linalg;
pub mod swd;

use serde::{Deserialize, Serialize};

pub use error::{Error, Result};
pub use exact::{exact_fit, exact_fit_banded, exact_predict, DenseGpModel};
pub use gridgp::{grid_fit, grid_predict, grid_predict_fft, GridGpModel};
pub use kernel::{
    auto_length_scale, banded_grid_kernel, max_length_scale_ratio, se_kernel, sparse_cross_kernel, BandOrder,
    BandedMatrix, GridAxis, GridSpec, KernelParams, SparseCrossKernel,
};
pub use latent::{
    latent_fit, latent_predict, posterior_covariance_diag, residual_diagnostic, LatentProjection, PairSolution,
    PerturbationOrder, ResidualDiagnostic,
};
pub use swd::{build_eigensystem, SwdEigensystem, TransformPath};

/// Predictive means and latent-function variances at a set of test points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictiveResult {
    pub mean: Vec<f64>,
    /// Variance of the latent function, without observation noise.
    pub variance: Vec<f64>,
    pub noise_variance: f64,
    /// Number of variances that came out negative and were clamped to zero.
    pub clamped: usize,
}

impl PredictiveResult {
    /// Variance of a new noisy observation at test point `i`.
    pub fn observation_variance(&self, i: usize) -> f64 {
        self.variance[i] + self.noise_variance
    }

    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }
}
