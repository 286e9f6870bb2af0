//! Closed-form SE against the Monte Carlo oracle on random solutions.

use anyhow::Result;
use nafd_core::opt::{decode, Problem};
use nafd_core::oracle::empirical_se;
use nafd_core::rng::{child_rng, Stream};
use nafd_core::se::{dl_se_per_ue, ul_se_per_ue};
use nafd_core::{Grouping, Link, NetworkConfig, ProcessingMode, Solution};
use rand::Rng;
use serde::Serialize;

use crate::experiment::build_problem;
use crate::spec::ValidationParams;

/// Smallest SE used as the denominator of a relative error.
pub const SE_FLOOR: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationRow {
    pub solution: usize,
    pub link: &'static str,
    pub ue: usize,
    pub closed_form: f64,
    pub empirical: f64,
    pub rel_err: f64,
    pub n_draws: usize,
}

pub fn rel_err(closed: f64, empirical: f64) -> f64 {
    (closed - empirical).abs() / closed.abs().max(SE_FLOOR)
}

/// Compares both SE paths for one solution.
pub fn compare(
    index: usize,
    sol: &Solution,
    problem: &Problem,
    grouping: &Grouping,
    n_draws: usize,
    seed: u64,
) -> Result<Vec<ValidationRow>> {
    let (real, config) = (&problem.real, &problem.config);
    let emp = empirical_se(sol, real, grouping, config, n_draws, seed)?;
    let ul = ul_se_per_ue(sol, real, grouping, config)?;
    let dl = dl_se_per_ue(sol, real, grouping, config)?;
    let mut rows = Vec::new();
    for (link, closed, empirical) in [(Link::Ul, &ul, &emp.ul.se), (Link::Dl, &dl, &emp.dl.se)] {
        for (ue, (&c, &e)) in closed.iter().zip(empirical).enumerate() {
            rows.push(ValidationRow {
                solution: index,
                link: link.as_str(),
                ue,
                closed_form: c,
                empirical: e,
                rel_err: rel_err(c, e),
                n_draws,
            });
        }
    }
    Ok(rows)
}

/// Random power-feasible solutions: uniformly drawn genotypes, decoded.
pub fn random_solutions(problem: &Problem, count: usize, seed: u64) -> Vec<Solution> {
    let mut rng = child_rng(seed, Stream::Solutions);
    let len = problem.layout().len();
    (0..count)
        .map(|_| {
            let x: Vec<f64> = (0..len).map(|_| rng.random::<f64>()).collect();
            decode(&x, problem)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub rows: Vec<ValidationRow>,
    pub tolerance: f64,
}

impl ValidationReport {
    pub fn max_rel_err(&self) -> f64 {
        self.rows.iter().map(|r| r.rel_err).fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.max_rel_err() <= self.tolerance
    }
}

pub fn validate_closed_forms(
    config: &NetworkConfig,
    mode: ProcessingMode,
    params: &ValidationParams,
    seed: u64,
) -> Result<ValidationReport> {
    let problem = build_problem(config, mode, seed)?;
    let mut rows = Vec::new();
    for (i, sol) in random_solutions(&problem, params.n_solutions, seed).iter().enumerate() {
        rows.extend(compare(i, sol, &problem, &problem.grouping, params.n_draws, seed.wrapping_add(i as u64))?);
    }
    Ok(ValidationReport {
        rows,
        tolerance: params.tolerance,
    })
}
