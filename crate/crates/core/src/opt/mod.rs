//! Constraint-handling evolutionary optimization of AP modes, power
//! control and LSFD weights.
//!
//! Every algorithm searches the same unit-box genotype. [`decode`] maps a
//! genotype to a power-feasible [`Solution`]; [`repair_and_evaluate`]
//! suspends service to UEs that miss their QoS threshold until the served
//! set is stable and scores the result by its served total SE.

mod baselines;
mod de;

pub use baselines::{random_nafd, random_nafd_genotype, run_baseline, Baseline, GaParams, PsoParams};
pub use de::{crossover, evolve, fold_into_box, mutate, Hyperparams, Strategy};

use std::io::{self, Write};
use std::time::Instant;

use rayon::prelude::*;

use crate::config::{DuplexPolicy, NetworkConfig};
use crate::error::{Error, Result};
use crate::grouping::Grouping;
use crate::netgen::NetworkRealization;
use crate::se::{dl_se_per_ue, ul_se_per_ue, SeReport};
use crate::solution::Solution;

/// Positions of each variable inside a genotype.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layout {
    pub num_aps: usize,
    pub num_ul: usize,
    pub num_dl: usize,
}

impl Layout {
    pub fn new(num_aps: usize, num_ul: usize, num_dl: usize) -> Self {
        Self { num_aps, num_ul, num_dl }
    }

    /// `2M + Ku + M·Ku + M·Kd + 1`.
    pub fn len(&self) -> usize {
        let (m, ku, kd) = (self.num_aps, self.num_ul, self.num_dl);
        2 * m + ku + m * ku + m * kd + 1
    }

    pub fn a(&self, ap: usize) -> usize {
        ap
    }

    pub fn b(&self, ap: usize) -> usize {
        self.num_aps + ap
    }

    pub fn varsigma(&self, ue: usize) -> usize {
        2 * self.num_aps + ue
    }

    pub fn alpha(&self, ap: usize, ue: usize) -> usize {
        2 * self.num_aps + self.num_ul + ap * self.num_ul + ue
    }

    pub fn share(&self, ap: usize, ue: usize) -> usize {
        2 * self.num_aps + self.num_ul * (1 + self.num_aps) + ap * self.num_dl + ue
    }

    /// Fraction of the DL power budget in use.
    pub fn power_fraction(&self) -> usize {
        self.len() - 1
    }
}

/// A realization bound to its grouping, policy and per-UE QoS thresholds.
#[derive(Debug, Clone)]
pub struct Problem {
    pub config: NetworkConfig,
    pub real: NetworkRealization,
    pub grouping: Grouping,
    pub qos_ul: Vec<f64>,
    pub qos_dl: Vec<f64>,
}

impl Problem {
    /// Uses the configured scalar QoS for every UE.
    pub fn new(config: NetworkConfig, real: NetworkRealization, grouping: Grouping) -> Result<Self> {
        real.check_shape(&config)?;
        grouping.validate(config.antennas)?;
        let qos_ul = vec![config.qos_ul; config.num_ul];
        let qos_dl = vec![config.qos_dl; config.num_dl];
        Ok(Self {
            config,
            real,
            grouping,
            qos_ul,
            qos_dl,
        })
    }

    pub fn with_qos(mut self, qos_ul: Vec<f64>, qos_dl: Vec<f64>) -> Result<Self> {
        if qos_ul.len() != self.real.num_ul() || qos_dl.len() != self.real.num_dl() {
            return Err(Error::Dimension("one QoS threshold per UE expected".into()));
        }
        if qos_ul.iter().chain(&qos_dl).any(|q| !(q.is_finite() && *q >= 0.0)) {
            return Err(Error::InvalidConfig("QoS thresholds must be finite and nonnegative".into()));
        }
        self.qos_ul = qos_ul;
        self.qos_dl = qos_dl;
        Ok(self)
    }

    pub fn layout(&self) -> Layout {
        Layout::new(self.real.num_aps(), self.real.num_ul(), self.real.num_dl())
    }
}

/// Decodes with every UE served.
pub fn decode(x: &[f64], problem: &Problem) -> Solution {
    let (ku, kd) = (problem.real.num_ul(), problem.real.num_dl());
    decode_masked(x, problem, &vec![true; ku], &vec![true; kd])
}

/// Decodes with suspended UEs switched off: their `ς` and `α` column are
/// zero and the DL budget of each AP is shared among served DL UEs only.
pub fn decode_masked(x: &[f64], problem: &Problem, served_ul: &[bool], served_dl: &[bool]) -> Solution {
    let lay = problem.layout();
    assert_eq!(x.len(), lay.len(), "genotype length");
    let (m_count, ku, kd) = (lay.num_aps, lay.num_ul, lay.num_dl);
    let real = &problem.real;
    let antennas = problem.config.antennas;
    let mut sol = Solution::idle(m_count, ku, kd);
    let budget = x[lay.power_fraction()];
    for m in 0..m_count {
        let (xa, xb) = (x[lay.a(m)], x[lay.b(m)]);
        let (mut a, mut b) = (xa >= 0.5, xb >= 0.5);
        if a && b && problem.config.duplex_policy == DuplexPolicy::HdOnly {
            if xb > xa {
                a = false;
            } else {
                b = false;
            }
        }
        sol.a[m] = a;
        sol.b[m] = b;
        for l in 0..ku {
            if served_ul[l] {
                sol.alpha[(m, l)] = x[lay.alpha(m, l)];
            }
        }
        if !a {
            continue;
        }
        let total: f64 = (0..kd).filter(|&k| served_dl[k]).map(|k| x[lay.share(m, k)]).sum();
        let count = served_dl.iter().filter(|&&s| s).count();
        for k in (0..kd).filter(|&k| served_dl[k]) {
            let share = if total > 0.0 { x[lay.share(m, k)] / total } else { 1.0 / count as f64 };
            let unit = real.gamma_dl[(m, k)] * problem.grouping.dl.norm_factor(m, k, antennas);
            sol.theta[(m, k)] = (budget * share / unit).sqrt();
        }
    }
    for l in 0..ku {
        if served_ul[l] {
            sol.varsigma[l] = x[lay.varsigma(l)];
        }
    }
    sol
}

/// Outcome of repairing and scoring one genotype.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    /// Total SE of the served UEs.
    pub fitness: f64,
    pub served_ul: Vec<bool>,
    pub served_dl: Vec<bool>,
    pub solution: Solution,
    pub report: SeReport,
    /// Decode/evaluate passes used.
    pub rounds: usize,
}

/// Repair starting from every UE served.
pub fn repair_and_evaluate(x: &[f64], problem: &Problem) -> Evaluation {
    let (ku, kd) = (problem.real.num_ul(), problem.real.num_dl());
    repair_from(x, problem, vec![true; ku], vec![true; kd])
}

/// Suspends every served UE below its QoS threshold, re-decodes and
/// re-evaluates until no served UE violates. Each pass drops at least one
/// UE, so there are at most `Ku + Kd + 1` passes.
pub fn repair_from(x: &[f64], problem: &Problem, mut served_ul: Vec<bool>, mut served_dl: Vec<bool>) -> Evaluation {
    let mut rounds = 0;
    loop {
        rounds += 1;
        let sol = decode_masked(x, problem, &served_ul, &served_dl);
        let (se_ul, se_dl) = se_pair(&sol, problem);
        let mut dropped = false;
        for (l, se) in se_ul.iter().enumerate() {
            if served_ul[l] && *se < problem.qos_ul[l] {
                served_ul[l] = false;
                dropped = true;
            }
        }
        for (k, se) in se_dl.iter().enumerate() {
            if served_dl[k] && *se < problem.qos_dl[k] {
                served_dl[k] = false;
                dropped = true;
            }
        }
        if !dropped {
            let report = SeReport::new(se_ul, se_dl, served_ul.clone(), served_dl.clone());
            return Evaluation {
                fitness: report.total,
                served_ul,
                served_dl,
                solution: sol,
                report,
                rounds,
            };
        }
    }
}

fn se_pair(sol: &Solution, problem: &Problem) -> (Vec<f64>, Vec<f64>) {
    let (real, grp, cfg) = (&problem.real, &problem.grouping, &problem.config);
    // Shapes and grouping were validated when the problem was built.
    let ul = ul_se_per_ue(sol, real, grp, cfg).expect("validated problem");
    let dl = dl_se_per_ue(sol, real, grp, cfg).expect("validated problem");
    (ul, dl)
}

/// A genotype with its evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct Individual {
    pub genotype: Vec<f64>,
    pub eval: Evaluation,
}

impl Individual {
    pub fn new(genotype: Vec<f64>, problem: &Problem) -> Self {
        let eval = repair_and_evaluate(&genotype, problem);
        Self { genotype, eval }
    }

    pub fn fitness(&self) -> f64 {
        self.eval.fitness
    }
}

pub(crate) fn evaluate_all(genotypes: Vec<Vec<f64>>, problem: &Problem) -> Vec<Individual> {
    genotypes.into_par_iter().map(|g| Individual::new(g, problem)).collect()
}

pub(crate) fn best_index(pop: &[Individual]) -> usize {
    // First maximum, so ties resolve to the lowest slot.
    let mut best = 0;
    for (i, ind) in pop.iter().enumerate() {
        if ind.fitness() > pop[best].fitness() {
            best = i;
        }
    }
    best
}

/// Best fitness after one generation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistoryPoint {
    pub generation: usize,
    pub best_fitness: f64,
    pub evaluations: usize,
    pub elapsed_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptResult {
    pub best: Individual,
    /// One point per generation, starting with the initial population.
    pub history: Vec<HistoryPoint>,
    pub evaluations: usize,
    pub wall_time: f64,
}

impl OptResult {
    pub fn write_history_csv<W: Write>(&self, w: W, with_timing: bool) -> io::Result<()> {
        write_history_csv(w, &self.history, with_timing)
    }
}

/// `generation,best_fitness,evaluations,elapsed_s`; without timing the
/// elapsed column is 0.
pub fn write_history_csv<W: Write>(mut w: W, history: &[HistoryPoint], with_timing: bool) -> io::Result<()> {
    writeln!(w, "generation,best_fitness,evaluations,elapsed_s")?;
    for h in history {
        let t = if with_timing { h.elapsed_s } else { 0.0 };
        writeln!(w, "{},{:.12e},{},{:.6}", h.generation, h.best_fitness, h.evaluations, t)?;
    }
    Ok(())
}

/// Tracks the incumbent, history and stall counter of a run.
pub(crate) struct Tracker {
    start: Instant,
    history: Vec<HistoryPoint>,
    evaluations: usize,
    stall: usize,
    last: f64,
}

/// Relative change below which the best fitness counts as unchanged.
pub const STALL_TOLERANCE: f64 = 1e-9;

impl Tracker {
    pub(crate) fn new() -> Self {
        Self {
            start: Instant::now(),
            history: Vec::new(),
            evaluations: 0,
            stall: 0,
            last: f64::NEG_INFINITY,
        }
    }

    pub(crate) fn record(&mut self, evaluated: usize, best: f64) {
        self.evaluations += evaluated;
        if self.history.is_empty() || best > self.last + STALL_TOLERANCE * self.last.abs().max(1e-12) {
            self.stall = 0;
            self.last = best;
        } else {
            self.stall += 1;
        }
        self.history.push(HistoryPoint {
            generation: self.history.len(),
            best_fitness: best,
            evaluations: self.evaluations,
            elapsed_s: self.start.elapsed().as_secs_f64(),
        });
    }

    pub(crate) fn stalled(&self, window: usize) -> bool {
        window > 0 && self.stall >= window
    }

    pub(crate) fn finish(self, best: Individual) -> OptResult {
        OptResult {
            best,
            history: self.history,
            evaluations: self.evaluations,
            wall_time: self.start.elapsed().as_secs_f64(),
        }
    }
}

/// Writes `variable,index,value` rows; matrix entries use the row-major
/// index `m * K + k`.
pub fn write_solution_csv<W: Write>(mut w: W, sol: &Solution) -> io::Result<()> {
    writeln!(w, "variable,index,value")?;
    for (m, &a) in sol.a.iter().enumerate() {
        writeln!(w, "a,{m},{}", u8::from(a))?;
    }
    for (m, &b) in sol.b.iter().enumerate() {
        writeln!(w, "b,{m},{}", u8::from(b))?;
    }
    for (l, v) in sol.varsigma.iter().enumerate() {
        writeln!(w, "varsigma,{l},{v:.12e}")?;
    }
    for (name, mat) in [("theta", &sol.theta), ("alpha", &sol.alpha)] {
        for m in 0..mat.nrows() {
            for k in 0..mat.ncols() {
                writeln!(w, "{name},{},{:.12e}", m * mat.ncols() + k, mat[(m, k)])?;
            }
        }
    }
    Ok(())
}
