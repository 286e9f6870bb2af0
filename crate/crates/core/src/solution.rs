//! Decision variables and their feasibility check.

use nalgebra::DMatrix;

use crate::config::{DuplexPolicy, NetworkConfig};
use crate::grouping::Grouping;
use crate::netgen::NetworkRealization;

/// Mode flags, power control and LSFD weights for one network.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    /// DL-mode flag per AP.
    pub a: Vec<bool>,
    /// UL-mode flag per AP.
    pub b: Vec<bool>,
    /// UL power control per UL UE, in `[0, 1]`.
    pub varsigma: Vec<f64>,
    /// DL power control, `M × Kd`.
    pub theta: DMatrix<f64>,
    /// LSFD weights, `M × Ku`, in `[0, 1]`.
    pub alpha: DMatrix<f64>,
}

impl Solution {
    /// Every AP idle, no power anywhere.
    pub fn idle(num_aps: usize, num_ul: usize, num_dl: usize) -> Self {
        Self {
            a: vec![false; num_aps],
            b: vec![false; num_aps],
            varsigma: vec![0.0; num_ul],
            theta: DMatrix::zeros(num_aps, num_dl),
            alpha: DMatrix::zeros(num_aps, num_ul),
        }
    }

    pub fn num_aps(&self) -> usize {
        self.a.len()
    }

    pub fn a_f(&self, ap: usize) -> f64 {
        f64::from(u8::from(self.a[ap]))
    }

    pub fn b_f(&self, ap: usize) -> f64 {
        f64::from(u8::from(self.b[ap]))
    }

    /// Number of APs in FD mode.
    pub fn full_duplex_count(&self) -> usize {
        self.a.iter().zip(&self.b).filter(|(a, b)| **a && **b).count()
    }

    pub fn shape_matches(&self, real: &NetworkRealization) -> bool {
        let (m, ku, kd) = (real.num_aps(), real.num_ul(), real.num_dl());
        self.a.len() == m
            && self.b.len() == m
            && self.varsigma.len() == ku
            && self.theta.shape() == (m, kd)
            && self.alpha.shape() == (m, ku)
    }

    /// `Σ_k γ_mk φ_mk θ_mk²` for every AP.
    pub fn dl_power_load(&self, real: &NetworkRealization, grouping: &Grouping, antennas: usize) -> Vec<f64> {
        (0..self.num_aps())
            .map(|m| {
                (0..real.num_dl())
                    .map(|k| {
                        real.gamma_dl[(m, k)]
                            * grouping.dl.norm_factor(m, k, antennas)
                            * self.theta[(m, k)].powi(2)
                    })
                    .sum()
            })
            .collect()
    }
}

/// One violated constraint.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    /// Variable shapes disagree with the realization.
    Shape(String),
    /// Per-AP DL power budget exceeded; `slack = budget - load < 0`.
    DlPower { ap: usize, load: f64, budget: f64, slack: f64 },
    /// FD operation under an HD-only policy.
    FullDuplexForbidden { ap: usize },
    /// UL power control outside `[0, 1]`.
    UlPower { ue: usize, value: f64 },
    /// LSFD weight outside `[0, 1]`.
    Lsfd { ap: usize, ue: usize, value: f64 },
    /// Negative or non-finite DL power control.
    DlCoefficient { ap: usize, ue: usize, value: f64 },
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ViolationReport {
    pub violations: Vec<Violation>,
}

impl ViolationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Relative tolerance on the per-AP power budget.
pub const POWER_TOLERANCE: f64 = 1e-9;

/// Lists every violated mode/power constraint. QoS is not checked here;
/// it is enforced by the optimizer's repair step.
pub fn check_constraints(
    sol: &Solution,
    real: &NetworkRealization,
    grouping: &Grouping,
    config: &NetworkConfig,
) -> ViolationReport {
    let mut out = Vec::new();
    if !sol.shape_matches(real) {
        out.push(Violation::Shape(format!(
            "solution does not match M = {}, Ku = {}, Kd = {}",
            real.num_aps(),
            real.num_ul(),
            real.num_dl()
        )));
        return ViolationReport { violations: out };
    }
    let load = sol.dl_power_load(real, grouping, config.antennas);
    for (m, &l) in load.iter().enumerate() {
        let budget = sol.a_f(m);
        if l > budget * (1.0 + POWER_TOLERANCE) + f64::MIN_POSITIVE {
            out.push(Violation::DlPower { ap: m, load: l, budget, slack: budget - l });
        }
        if config.duplex_policy == DuplexPolicy::HdOnly && sol.a[m] && sol.b[m] {
            out.push(Violation::FullDuplexForbidden { ap: m });
        }
    }
    for (ue, &v) in sol.varsigma.iter().enumerate() {
        if !(0.0..=1.0).contains(&v) {
            out.push(Violation::UlPower { ue, value: v });
        }
    }
    for ((ap, ue), &v) in indexed(&sol.alpha) {
        if !(0.0..=1.0).contains(&v) {
            out.push(Violation::Lsfd { ap, ue, value: v });
        }
    }
    for ((ap, ue), &v) in indexed(&sol.theta) {
        if !(v >= 0.0 && v.is_finite()) {
            out.push(Violation::DlCoefficient { ap, ue, value: v });
        }
    }
    ViolationReport { violations: out }
}

fn indexed(mat: &DMatrix<f64>) -> impl Iterator<Item = ((usize, usize), &f64)> {
    let rows = mat.nrows();
    mat.iter().enumerate().map(move |(i, v)| ((i % rows, i / rows), v))
}
