//! Sweeps over network parameters and realizations, one run per algorithm.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;
use std::time::Instant;

use anyhow::{Context, Result};
use nafd_core::opt::{
    evolve, random_nafd, run_baseline, write_history_csv, Baseline, Evaluation, GaParams, HistoryPoint, Hyperparams, Problem, PsoParams,
};
use nafd_core::{DuplexPolicy, Grouping, Link, NetworkConfig, NetworkRealization, ProcessingMode};
use rayon::prelude::*;
use serde::Serialize;

use crate::schedule::{multi_slot_schedule, write_schedule};
use crate::spec::{with_policy, Algorithm, ExperimentSpec, Scenario};

/// Result of one algorithm on one problem.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub algorithm: Algorithm,
    pub eval: Evaluation,
    /// Empty for the one-shot random benchmark.
    pub history: Vec<HistoryPoint>,
    pub evaluations: usize,
    pub wall_time: f64,
}

impl RunOutcome {
    pub fn generations(&self) -> usize {
        self.history.len().saturating_sub(1)
    }
}

/// Draws the realization for `seed` and binds it to its grouping.
pub fn build_problem(config: &NetworkConfig, mode: ProcessingMode, seed: u64) -> Result<Problem> {
    let (_, real) = NetworkRealization::draw(config, seed)?;
    let grouping = Grouping::build(mode, &real, config)?;
    Ok(Problem::new(config.clone(), real, grouping)?)
}

/// Runs `algorithm` with the population, generation cap and stall rule of
/// `hyper`; wall time covers the optimizer only.
pub fn run_algorithm(algorithm: Algorithm, problem: &Problem, hyper: &Hyperparams, seed: u64) -> Result<RunOutcome> {
    if algorithm == Algorithm::RandomNafd {
        let start = Instant::now();
        let eval = random_nafd(problem, seed);
        return Ok(RunOutcome {
            algorithm,
            eval,
            history: Vec::new(),
            evaluations: 1,
            wall_time: start.elapsed().as_secs_f64(),
        });
    }
    let result = match (algorithm, algorithm.strategy()) {
        (Algorithm::ChdeHd, Some(strategy)) => {
            let hd = Problem {
                config: with_policy(&problem.config, DuplexPolicy::HdOnly),
                ..problem.clone()
            };
            evolve(&hd, &Hyperparams { strategy, ..hyper.clone() }, seed)?
        }
        (_, Some(strategy)) => evolve(problem, &Hyperparams { strategy, ..hyper.clone() }, seed)?,
        (Algorithm::Ga, None) => run_baseline(&Baseline::Ga(GaParams::default()), problem, hyper, seed)?,
        (_, None) => run_baseline(&Baseline::Pso(PsoParams::default()), problem, hyper, seed)?,
    };
    Ok(RunOutcome {
        algorithm,
        eval: result.best.eval,
        history: result.history,
        evaluations: result.evaluations,
        wall_time: result.wall_time,
    })
}

/// One row of `results.csv`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRecord {
    pub scenario: String,
    pub axis: String,
    pub axis_value: f64,
    pub realization_seed: u64,
    pub algorithm: String,
    pub status: String,
    pub total_se: Option<f64>,
    pub served_ul: Option<usize>,
    pub served_dl: Option<usize>,
    pub num_ul: usize,
    pub num_dl: usize,
    pub fd_aps: Option<usize>,
    pub generations: Option<usize>,
    pub evaluations: Option<usize>,
    pub wall_time_s: f64,
}

/// One row of `per_ue.csv`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UeRecord {
    pub scenario: String,
    pub axis_value: f64,
    pub realization_seed: u64,
    pub algorithm: String,
    pub link: &'static str,
    pub ue: usize,
    pub se: f64,
    pub qos: f64,
    pub served: bool,
}

/// One row of `summary.csv`: mean and sample standard deviation over
/// the successful realizations of one sweep point and algorithm.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRecord {
    pub scenario: String,
    pub axis: String,
    pub axis_value: f64,
    pub algorithm: String,
    pub runs: usize,
    pub mean_total_se: f64,
    pub std_total_se: f64,
    pub mean_served: f64,
    pub std_served: f64,
    pub mean_wall_time_s: f64,
}

/// A run together with the sweep point and realization it belongs to.
#[derive(Debug, Clone)]
pub struct TaskOutcome {
    pub point: usize,
    pub seed: u64,
    pub run: RunOutcome,
}

#[derive(Debug, Default)]
pub struct ExperimentOutput {
    pub runs: Vec<RunRecord>,
    pub per_ue: Vec<UeRecord>,
    pub summary: Vec<SummaryRecord>,
    pub outcomes: Vec<TaskOutcome>,
}

struct Task {
    point: usize,
    value: f64,
    seed: u64,
}

fn task_records(spec: &ExperimentSpec, task: &Task) -> (Vec<RunRecord>, Vec<UeRecord>, Vec<RunOutcome>) {
    let time = |t: f64| if spec.record_timing { t } else { 0.0 };
    let base = |algorithm: Algorithm, num_ul: usize, num_dl: usize| RunRecord {
        scenario: spec.scenario.to_string(),
        axis: spec.axis.as_str().to_string(),
        axis_value: task.value,
        realization_seed: task.seed,
        algorithm: algorithm.to_string(),
        status: "ok".into(),
        total_se: None,
        served_ul: None,
        served_dl: None,
        num_ul,
        num_dl,
        fd_aps: None,
        generations: None,
        evaluations: None,
        wall_time_s: 0.0,
    };
    let failed = |err: anyhow::Error, num_ul, num_dl| {
        spec.algorithms
            .iter()
            .map(|&a| RunRecord {
                status: format!("error: {err:#}"),
                ..base(a, num_ul, num_dl)
            })
            .collect()
    };
    let config = match spec.axis.apply(&spec.network, task.value, spec.antenna_product) {
        Ok(c) => c,
        Err(e) => return (failed(e, spec.network.num_ul, spec.network.num_dl), Vec::new(), Vec::new()),
    };
    let (ku, kd) = (config.num_ul, config.num_dl);
    let problem = match build_problem(&config, spec.mode, task.seed) {
        Ok(p) => p,
        Err(e) => return (failed(e, ku, kd), Vec::new(), Vec::new()),
    };
    let mut runs = Vec::new();
    let mut per_ue = Vec::new();
    let mut outcomes = Vec::new();
    for &algorithm in &spec.algorithms {
        match run_algorithm(algorithm, &problem, &spec.optimizer, task.seed) {
            Ok(out) => {
                let e = &out.eval;
                runs.push(RunRecord {
                    total_se: Some(e.fitness),
                    served_ul: Some(e.served_ul.iter().filter(|&&s| s).count()),
                    served_dl: Some(e.served_dl.iter().filter(|&&s| s).count()),
                    fd_aps: Some(e.solution.full_duplex_count()),
                    generations: Some(out.generations()),
                    evaluations: Some(out.evaluations),
                    wall_time_s: time(out.wall_time),
                    ..base(algorithm, ku, kd)
                });
                let links = [
                    (Link::Ul.as_str(), &e.report.se_ul, &e.served_ul, &problem.qos_ul),
                    (Link::Dl.as_str(), &e.report.se_dl, &e.served_dl, &problem.qos_dl),
                ];
                for (link, se, served, qos) in links {
                    for ue in 0..se.len() {
                        per_ue.push(UeRecord {
                            scenario: spec.scenario.to_string(),
                            axis_value: task.value,
                            realization_seed: task.seed,
                            algorithm: algorithm.to_string(),
                            link,
                            ue,
                            se: se[ue],
                            qos: qos[ue],
                            served: served[ue],
                        });
                    }
                }
                outcomes.push(out);
            }
            Err(err) => runs.push(RunRecord {
                status: format!("error: {err:#}"),
                ..base(algorithm, ku, kd)
            }),
        }
    }
    (runs, per_ue, outcomes)
}

/// Mean and sample standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

pub fn summarize(spec: &ExperimentSpec, runs: &[RunRecord]) -> Vec<SummaryRecord> {
    let mut out = Vec::new();
    for &value in &spec.values {
        for &algorithm in &spec.algorithms {
            let name = algorithm.to_string();
            let ok: Vec<&RunRecord> = runs
                .iter()
                .filter(|r| r.axis_value == value && r.algorithm == name && r.total_se.is_some())
                .collect();
            let total: Vec<f64> = ok.iter().filter_map(|r| r.total_se).collect();
            let served: Vec<f64> = ok
                .iter()
                .map(|r| (r.served_ul.unwrap_or(0) + r.served_dl.unwrap_or(0)) as f64)
                .collect();
            let wall: Vec<f64> = ok.iter().map(|r| r.wall_time_s).collect();
            let (mean_total_se, std_total_se) = mean_std(&total);
            let (mean_served, std_served) = mean_std(&served);
            out.push(SummaryRecord {
                scenario: spec.scenario.to_string(),
                axis: spec.axis.as_str().to_string(),
                axis_value: value,
                algorithm: name,
                runs: ok.len(),
                mean_total_se,
                std_total_se,
                mean_served,
                std_served,
                mean_wall_time_s: mean_std(&wall).0,
            });
        }
    }
    out
}

/// Runs every sweep point × realization in parallel and collects the rows
/// in deterministic (point, realization, algorithm) order.
pub fn run_sweep(spec: &ExperimentSpec) -> Result<ExperimentOutput> {
    spec.validate()?;
    let tasks: Vec<Task> = spec
        .values
        .iter()
        .enumerate()
        .flat_map(|(point, &value)| {
            (0..spec.n_realizations as u64).map(move |r| Task {
                point,
                value,
                seed: spec.seed + r,
            })
        })
        .collect();
    let results: Vec<_> = tasks.par_iter().map(|t| task_records(spec, t)).collect();
    let mut out = ExperimentOutput::default();
    for (task, (runs, per_ue, outcomes)) in tasks.iter().zip(results) {
        out.runs.extend(runs);
        out.per_ue.extend(per_ue);
        out.outcomes.extend(outcomes.into_iter().map(|run| TaskOutcome {
            point: task.point,
            seed: task.seed,
            run,
        }));
    }
    out.summary = summarize(spec, &out.runs);
    Ok(out)
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Runs the experiment and writes its CSVs into `spec.out_dir`.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentOutput> {
    let dir = &spec.out_dir;
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    if spec.scenario == Scenario::MultiSlot {
        let traces = (0..spec.n_realizations as u64)
            .into_par_iter()
            .map(|r| multi_slot_schedule(&spec.network, spec.mode, &spec.schedule, &spec.optimizer, spec.n_slots, spec.seed + r))
            .collect::<Result<Vec<_>>>()?;
        write_schedule(dir, &traces)?;
        return Ok(ExperimentOutput::default());
    }
    let out = run_sweep(spec)?;
    write_csv(&dir.join("results.csv"), &out.runs)?;
    write_csv(&dir.join("per_ue.csv"), &out.per_ue)?;
    write_csv(&dir.join("summary.csv"), &out.summary)?;
    if spec.write_history || spec.scenario == Scenario::Convergence {
        for t in out.outcomes.iter().filter(|t| !t.run.history.is_empty()) {
            let name = if spec.values.len() == 1 {
                format!("history_{}_{}.csv", t.run.algorithm, t.seed)
            } else {
                format!("history_{}_{}_p{}.csv", t.run.algorithm, t.seed, t.point)
            };
            let f = File::create(dir.join(&name)).with_context(|| format!("creating {name}"))?;
            write_history_csv(BufWriter::new(f), &t.run.history, spec.record_timing)?;
        }
    }
    Ok(out)
}
