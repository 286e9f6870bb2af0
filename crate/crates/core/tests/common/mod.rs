#![allow(dead_code)]

use nafd_core::{Grouping, NetworkConfig, NetworkRealization, Solution};
use nalgebra::DMatrix;
use rand::Rng;

/// Random mode/power assignment that meets every per-AP budget. Each
/// transmitting AP spends a random fraction of its budget.
pub fn random_feasible<R: Rng>(
    real: &NetworkRealization,
    grouping: &Grouping,
    config: &NetworkConfig,
    rng: &mut R,
) -> Solution {
    let (m, ku, kd) = (real.num_aps(), real.num_ul(), real.num_dl());
    let mut a: Vec<bool> = (0..m).map(|_| rng.random_bool(0.6)).collect();
    let mut b: Vec<bool> = (0..m).map(|_| rng.random_bool(0.6)).collect();
    a[0] = true;
    b[m - 1] = true;
    let varsigma = (0..ku).map(|_| rng.random_range(0.2..=1.0)).collect();
    let alpha = DMatrix::from_fn(m, ku, |_, _| rng.random_range(0.0..=1.0));
    let mut theta = DMatrix::from_fn(m, kd, |_, _| rng.random_range(0.0..=1.0f64));
    for ap in 0..m {
        if !a[ap] {
            theta.row_mut(ap).fill(0.0);
            continue;
        }
        let load: f64 = (0..kd)
            .map(|k| real.gamma_dl[(ap, k)] * grouping.dl.norm_factor(ap, k, config.antennas) * theta[(ap, k)].powi(2))
            .sum();
        let fill = rng.random_range(0.3..=1.0);
        let scale = (fill / load).sqrt();
        theta.row_mut(ap).scale_mut(scale);
    }
    if rng.random_bool(0.1) {
        b = b.iter().map(|_| false).collect();
        b[m - 1] = true;
    }
    Solution { a, b, varsigma, theta, alpha }
}

pub fn rel_err(closed: f64, empirical: f64) -> f64 {
    (closed - empirical).abs() / closed.abs().max(1e-2)
}
