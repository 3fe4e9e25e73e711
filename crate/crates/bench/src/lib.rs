//! Shared inputs for the criterion benchmarks.

use swdgp::bench::{generate, SyntheticFunction, SyntheticSpec};
use swdgp::{BandOrder, GridSpec, KernelParams};

/// Smooth deterministic signal sampled at `m` points.
pub fn signal(m: usize) -> Vec<f64> {
    (0..m)
        .map(|i| (0.37 * i as f64).sin() + 0.1 * (0.011 * (i * i) as f64).cos())
        .collect()
}

/// Unit-interval grid with the automatic length scale for `band`.
pub fn unit_grid(m: usize, band: BandOrder) -> (GridSpec, KernelParams) {
    let grid = GridSpec::unit_interval(m).expect("m > 0");
    let l = swdgp::auto_length_scale(band, grid.axis(0), 0.75);
    let params = KernelParams::isotropic(1.0, l, 0.0).expect("valid parameters");
    (grid, params)
}

/// Scattered noisy samples of the simulation test function.
pub fn scattered(n: usize) -> (Vec<f64>, Vec<f64>) {
    let set = generate(&SyntheticSpec::new(SyntheticFunction::Sim7, 0.2, n, 7)).expect("valid spec");
    (set.inputs, set.targets)
}
