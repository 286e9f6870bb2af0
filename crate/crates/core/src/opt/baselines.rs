use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::{best_index, evaluate_all, repair_and_evaluate, Evaluation, Hyperparams, Individual, OptResult, Problem, Tracker};
use crate::config::DuplexPolicy;
use crate::error::{Error, Result};
use crate::rng::{child_rng, Stream};

/// Genotype of the random benchmark: each AP is FD with probability 1/2
/// (never under HD-only), otherwise UL or DL with equal odds; full power
/// split equally, `ς = 1` and `α = 1`.
pub fn random_nafd_genotype<R: Rng + ?Sized>(problem: &Problem, rng: &mut R) -> Vec<f64> {
    let lay = problem.layout();
    let mut x = vec![1.0; lay.len()];
    let fd_allowed = problem.config.duplex_policy == DuplexPolicy::Nafd;
    for m in 0..lay.num_aps {
        let fd = fd_allowed && rng.random_bool(0.5);
        let dl = fd || rng.random_bool(0.5);
        let ul = fd || !dl;
        x[lay.a(m)] = if dl { 1.0 } else { 0.0 };
        x[lay.b(m)] = if ul { 1.0 } else { 0.0 };
    }
    x
}

pub fn random_nafd(problem: &Problem, seed: u64) -> Evaluation {
    let mut rng = child_rng(seed, Stream::Baseline);
    repair_and_evaluate(&random_nafd_genotype(problem, &mut rng), problem)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaParams {
    pub tournament: usize,
    pub crossover_prob: f64,
    pub mutation_sigma: f64,
    /// Per-gene mutation probability; `None` means `1/len`.
    pub mutation_rate: Option<f64>,
    pub elites: usize,
}

impl Default for GaParams {
    fn default() -> Self {
        Self {
            tournament: 2,
            crossover_prob: 0.9,
            mutation_sigma: 0.1,
            mutation_rate: None,
            elites: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PsoParams {
    pub inertia: f64,
    pub cognitive: f64,
    pub social: f64,
    /// Per-coordinate speed limit.
    pub v_max: f64,
}

impl Default for PsoParams {
    fn default() -> Self {
        Self {
            inertia: 0.729,
            cognitive: 1.494,
            social: 1.494,
            v_max: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Baseline {
    Ga(GaParams),
    Pso(PsoParams),
}

/// Runs a baseline with the population size, generation cap and stall
/// rule of `hyper`, so its evaluation budget matches DE's.
pub fn run_baseline(kind: &Baseline, problem: &Problem, hyper: &Hyperparams, seed: u64) -> Result<OptResult> {
    if hyper.pop_size < 2 {
        return Err(Error::PopulationTooSmall {
            size: hyper.pop_size,
            needed: 2,
        });
    }
    match kind {
        Baseline::Ga(p) => run_ga(p, problem, hyper, seed),
        Baseline::Pso(p) => run_pso(p, problem, hyper, seed),
    }
}

fn random_population<R: Rng + ?Sized>(rng: &mut R, size: usize, len: usize) -> Vec<Vec<f64>> {
    (0..size).map(|_| (0..len).map(|_| rng.random::<f64>()).collect()).collect()
}

fn run_ga(p: &GaParams, problem: &Problem, hyper: &Hyperparams, seed: u64) -> Result<OptResult> {
    if p.tournament == 0 || p.elites >= hyper.pop_size {
        return Err(Error::InvalidHyperparams("GA needs a tournament and fewer elites than members".into()));
    }
    let mut rng = child_rng(seed, Stream::Optimizer);
    let len = problem.layout().len();
    let rate = p.mutation_rate.unwrap_or(1.0 / len as f64);
    let noise = Normal::new(0.0, p.mutation_sigma.max(0.0)).map_err(|e| Error::InvalidHyperparams(e.to_string()))?;
    let mut tracker = Tracker::new();
    let mut pop = evaluate_all(random_population(&mut rng, hyper.pop_size, len), problem);
    tracker.record(pop.len(), pop[best_index(&pop)].fitness());

    for _ in 0..hyper.g_max {
        if tracker.stalled(hyper.stall_window) {
            break;
        }
        let mut order: Vec<usize> = (0..pop.len()).collect();
        order.sort_by(|&a, &b| pop[b].fitness().total_cmp(&pop[a].fitness()));
        let select = |rng: &mut crate::rng::Rng| {
            (0..p.tournament)
                .map(|_| rng.random_range(0..pop.len()))
                .max_by(|&a, &b| pop[a].fitness().total_cmp(&pop[b].fitness()).then(b.cmp(&a)))
                .expect("tournament is nonempty")
        };
        let mut children = Vec::with_capacity(pop.len() - p.elites);
        while children.len() < pop.len() - p.elites {
            let (pa, pb) = (select(&mut rng), select(&mut rng));
            let mut child = pop[pa].genotype.clone();
            if rng.random::<f64>() < p.crossover_prob {
                for (c, &g) in child.iter_mut().zip(&pop[pb].genotype) {
                    if rng.random_bool(0.5) {
                        *c = g;
                    }
                }
            }
            for c in child.iter_mut() {
                if rng.random::<f64>() < rate {
                    *c = (*c + noise.sample(&mut rng)).clamp(0.0, 1.0);
                }
            }
            children.push(child);
        }
        let children = evaluate_all(children, problem);
        let evaluated = children.len();
        let mut next: Vec<Individual> = order[..p.elites].iter().map(|&i| pop[i].clone()).collect();
        next.extend(children);
        pop = next;
        tracker.record(evaluated, pop[best_index(&pop)].fitness());
    }
    let best = pop.swap_remove(best_index(&pop));
    Ok(tracker.finish(best))
}

fn run_pso(p: &PsoParams, problem: &Problem, hyper: &Hyperparams, seed: u64) -> Result<OptResult> {
    let mut rng = child_rng(seed, Stream::Optimizer);
    let len = problem.layout().len();
    let mut tracker = Tracker::new();
    let mut swarm = evaluate_all(random_population(&mut rng, hyper.pop_size, len), problem);
    let mut velocity = vec![vec![0.0; len]; swarm.len()];
    let mut personal: Vec<Individual> = swarm.clone();
    let mut global = personal[best_index(&personal)].clone();
    tracker.record(swarm.len(), global.fitness());

    for _ in 0..hyper.g_max {
        if tracker.stalled(hyper.stall_window) {
            break;
        }
        let mut positions = Vec::with_capacity(swarm.len());
        for (i, particle) in swarm.iter().enumerate() {
            let mut x = particle.genotype.clone();
            for j in 0..len {
                let (r1, r2) = (rng.random::<f64>(), rng.random::<f64>());
                let v = p.inertia * velocity[i][j]
                    + p.cognitive * r1 * (personal[i].genotype[j] - x[j])
                    + p.social * r2 * (global.genotype[j] - x[j]);
                velocity[i][j] = v.clamp(-p.v_max, p.v_max);
                x[j] = (x[j] + velocity[i][j]).clamp(0.0, 1.0);
            }
            positions.push(x);
        }
        swarm = evaluate_all(positions, problem);
        let evaluated = swarm.len();
        for (best, particle) in personal.iter_mut().zip(&swarm) {
            if particle.fitness() >= best.fitness() {
                *best = particle.clone();
            }
        }
        let leader = best_index(&personal);
        if personal[leader].fitness() >= global.fitness() {
            global = personal[leader].clone();
        }
        tracker.record(evaluated, global.fitness());
    }
    Ok(tracker.finish(global))
}
