use rand::seq::index::sample;
use rand::Rng;

use super::{best_index, evaluate_all, Individual, OptResult, Problem, Tracker};
use crate::error::{Error, Result};
use crate::rng::{child_rng, Stream};

/// DE mutation strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Strategy {
    CurrentToPbest1,
    Rand1,
    Rand2,
    Best1,
    Best2,
}

impl Strategy {
    pub const ALL: [Strategy; 5] = [
        Strategy::CurrentToPbest1,
        Strategy::Rand1,
        Strategy::Rand2,
        Strategy::Best1,
        Strategy::Best2,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::CurrentToPbest1 => "current-to-pbest/1",
            Strategy::Rand1 => "rand/1",
            Strategy::Rand2 => "rand/2",
            Strategy::Best1 => "best/1",
            Strategy::Best2 => "best/2",
        }
    }

    /// Distinct random members drawn besides the target.
    fn donors(self) -> usize {
        match self {
            Strategy::CurrentToPbest1 | Strategy::Best1 => 2,
            Strategy::Rand1 => 3,
            Strategy::Best2 => 4,
            Strategy::Rand2 => 5,
        }
    }

    /// Smallest population the strategy can work with.
    pub fn min_population(self) -> usize {
        (self.donors() + 1).max(4)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hyperparams {
    pub pop_size: usize,
    pub scale_factor: f64,
    pub crossover_rate: f64,
    pub pbest_fraction: f64,
    pub g_max: usize,
    /// Stop after this many generations without improvement; 0 disables.
    pub stall_window: usize,
    pub strategy: Strategy,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            pop_size: 50,
            scale_factor: 0.7,
            crossover_rate: 0.9,
            pbest_fraction: 0.2,
            g_max: 1000,
            stall_window: 50,
            strategy: Strategy::CurrentToPbest1,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        let needed = self.strategy.min_population();
        if self.pop_size < needed {
            return Err(Error::PopulationTooSmall {
                size: self.pop_size,
                needed,
            });
        }
        if !(self.scale_factor >= 0.0 && self.scale_factor <= 1.0) {
            return Err(Error::InvalidHyperparams(format!("F = {} outside [0, 1]", self.scale_factor)));
        }
        if !(0.0..=1.0).contains(&self.crossover_rate) {
            return Err(Error::InvalidHyperparams(format!("CR = {} outside [0, 1]", self.crossover_rate)));
        }
        if !(self.pbest_fraction > 0.0 && self.pbest_fraction <= 1.0) || self.pbest_count() < 1 {
            return Err(Error::InvalidHyperparams(format!("p = {} gives no pbest pool", self.pbest_fraction)));
        }
        Ok(())
    }

    /// `⌈p·I⌉`.
    pub fn pbest_count(&self) -> usize {
        ((self.pbest_fraction * self.pop_size as f64) - 1e-9).ceil().max(0.0) as usize
    }
}

/// Builds the donor vector for slot `i` and folds out-of-range entries
/// halfway back toward the target.
pub fn mutate<R: Rng + ?Sized>(
    population: &[Vec<f64>],
    fitness: &[f64],
    i: usize,
    hyper: &Hyperparams,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let size = population.len();
    let needed = hyper.strategy.min_population();
    if size < needed {
        return Err(Error::PopulationTooSmall { size, needed });
    }
    let f = hyper.scale_factor;
    let target = &population[i];
    let mut r: Vec<usize> = sample(rng, size - 1, hyper.strategy.donors()).into_vec();
    for idx in &mut r {
        if *idx >= i {
            *idx += 1;
        }
    }
    let x = |k: usize| &population[k];
    let mut order: Vec<usize> = (0..size).collect();
    order.sort_by(|&a, &b| fitness[b].total_cmp(&fitness[a]));
    let best = order[0];
    let pbest = order[rng.random_range(0..hyper.pbest_count().clamp(1, size))];
    let u: Vec<f64> = (0..target.len())
        .map(|j| match hyper.strategy {
            Strategy::CurrentToPbest1 => {
                target[j] + f * (x(pbest)[j] - target[j]) + f * (x(r[0])[j] - x(r[1])[j])
            }
            Strategy::Rand1 => x(r[0])[j] + f * (x(r[1])[j] - x(r[2])[j]),
            Strategy::Rand2 => x(r[0])[j] + f * (x(r[1])[j] - x(r[2])[j]) + f * (x(r[3])[j] - x(r[4])[j]),
            Strategy::Best1 => x(best)[j] + f * (x(r[0])[j] - x(r[1])[j]),
            Strategy::Best2 => x(best)[j] + f * (x(r[0])[j] - x(r[1])[j]) + f * (x(r[2])[j] - x(r[3])[j]),
        })
        .collect();
    Ok(fold_into_box(u, target))
}

/// `u_j ← (bound + x_j)/2` wherever `u_j` leaves `[0, 1]`.
pub fn fold_into_box(mut u: Vec<f64>, target: &[f64]) -> Vec<f64> {
    for (uj, &xj) in u.iter_mut().zip(target) {
        if *uj < 0.0 {
            *uj = xj / 2.0;
        } else if *uj > 1.0 {
            *uj = (1.0 + xj) / 2.0;
        }
    }
    u
}

/// Binomial crossover with one forced mutant coordinate.
pub fn crossover<R: Rng + ?Sized>(parent: &[f64], mutant: &[f64], cr: f64, rng: &mut R) -> Vec<f64> {
    assert_eq!(parent.len(), mutant.len(), "crossover of unequal lengths");
    let j_rand = rng.random_range(0..parent.len());
    parent
        .iter()
        .zip(mutant)
        .enumerate()
        .map(|(j, (&p, &m))| {
            if j == j_rand || rng.random::<f64>() < cr {
                m
            } else {
                p
            }
        })
        .collect()
}

/// Constraint-handling DE. Trials of one generation are built sequentially
/// from a single stream and evaluated in parallel, so results do not depend
/// on the thread count.
pub fn evolve(problem: &Problem, hyper: &Hyperparams, seed: u64) -> Result<OptResult> {
    hyper.validate()?;
    let mut rng = child_rng(seed, Stream::Optimizer);
    let len = problem.layout().len();
    let mut tracker = Tracker::new();
    let init: Vec<Vec<f64>> = (0..hyper.pop_size)
        .map(|_| (0..len).map(|_| rng.random::<f64>()).collect())
        .collect();
    let mut pop: Vec<Individual> = evaluate_all(init, problem);
    tracker.record(pop.len(), pop[best_index(&pop)].fitness());

    for _ in 0..hyper.g_max {
        if tracker.stalled(hyper.stall_window) {
            break;
        }
        let genotypes: Vec<Vec<f64>> = pop.iter().map(|p| p.genotype.clone()).collect();
        let fitness: Vec<f64> = pop.iter().map(|p| p.fitness()).collect();
        let mut trials = Vec::with_capacity(pop.len());
        for i in 0..pop.len() {
            let mutant = mutate(&genotypes, &fitness, i, hyper, &mut rng)?;
            trials.push(crossover(&genotypes[i], &mutant, hyper.crossover_rate, &mut rng));
        }
        let trials = evaluate_all(trials, problem);
        let evaluated = trials.len();
        for (slot, trial) in pop.iter_mut().zip(trials) {
            if trial.fitness() >= slot.fitness() {
                *slot = trial;
            }
        }
        tracker.record(evaluated, pop[best_index(&pop)].fitness());
    }
    let best = pop.swap_remove(best_index(&pop));
    Ok(tracker.finish(best))
}
