//! End-to-end acceptance checks. Runs as a plain binary so every criterion
//! prints one line; exits nonzero if any criterion fails.

use std::process::ExitCode;
use std::time::Instant;

use nafd_core::opt::{decode, Hyperparams, Problem};
use nafd_core::se::{dl_sinr, ul_sinr};
use nafd_core::solution::check_constraints;
use nafd_core::{DuplexPolicy, Grouping, LinkGroups, NetworkConfig, NetworkRealization, ProcessingMode, SeReport, Solution};
use nafd_harness::spec::SlotPolicy;
use nafd_harness::{build_problem, multi_slot_schedule, run_algorithm, validate_closed_forms, Algorithm, RunOutcome, ValidationParams};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rayon::prelude::*;

type Check = (bool, String);

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn served(run: &RunOutcome) -> usize {
    run.eval.served_ul.iter().chain(&run.eval.served_dl).filter(|&&s| s).count()
}

/// Runs every algorithm on the realizations `seeds`; `out[a][r]`.
fn compare(config: &NetworkConfig, algorithms: &[Algorithm], seeds: &[u64]) -> Vec<Vec<RunOutcome>> {
    let hyper = Hyperparams::default();
    let runs: Vec<Vec<RunOutcome>> = seeds
        .par_iter()
        .map(|&seed| {
            let problem = build_problem(config, ProcessingMode::Pzf, seed).unwrap();
            algorithms.iter().map(|&a| run_algorithm(a, &problem, &hyper, seed).unwrap()).collect()
        })
        .collect();
    (0..algorithms.len()).map(|a| runs.iter().map(|r| r[a].clone()).collect()).collect()
}

fn mean_fitness(runs: &[RunOutcome]) -> f64 {
    mean(&runs.iter().map(|r| r.eval.fitness).collect::<Vec<_>>())
}

fn oracle_agreement() -> Check {
    let params = ValidationParams {
        n_draws: 20_000,
        n_solutions: 20,
        tolerance: 0.03,
    };
    let mut worst = 0.0f64;
    let mut msg = Vec::new();
    for (m, k) in [(5, 2), (10, 3)] {
        let config = NetworkConfig::new(m, 4, k, k);
        let report = validate_closed_forms(&config, ProcessingMode::Pzf, &params, 1).unwrap();
        worst = worst.max(report.max_rel_err());
        msg.push(format!("M={m} K={k}: max rel err {:.4} over {} values", report.max_rel_err(), report.rows.len()));
    }
    (worst <= 0.03, msg.join("; "))
}

// Textbook MR and full-ZF SINRs, written out directly.

fn dl_power(real: &NetworkRealization, sol: &Solution, m: usize, phi: f64) -> f64 {
    (0..real.num_dl()).map(|q| real.gamma_dl[(m, q)] * sol.theta[(m, q)].powi(2) * phi).sum()
}

fn mr_dl(real: &NetworkRealization, sol: &Solution, n: f64) -> Vec<f64> {
    (0..real.num_dl())
        .map(|k| {
            let aps = (0..real.num_aps()).filter(|&m| sol.a[m]);
            let coherent: f64 = aps.clone().map(|m| n * sol.theta[(m, k)] * real.gamma_dl[(m, k)]).sum();
            let leak: f64 = aps.map(|m| real.beta_dl[(m, k)] * dl_power(real, sol, m, n)).sum();
            let cross: f64 = (0..real.num_ul()).map(|l| sol.varsigma[l] * real.beta_du[(k, l)]).sum();
            real.rho_d * coherent.powi(2) / (real.rho_d * leak + real.rho_u * cross + 1.0)
        })
        .collect()
}

fn fzf_dl(real: &NetworkRealization, sol: &Solution, n: f64) -> Vec<f64> {
    let phi = 1.0 / (n - real.num_dl() as f64);
    (0..real.num_dl())
        .map(|k| {
            let aps = (0..real.num_aps()).filter(|&m| sol.a[m]);
            let coherent: f64 = aps.clone().map(|m| sol.theta[(m, k)] * real.gamma_dl[(m, k)]).sum();
            let leak: f64 = aps
                .map(|m| (real.beta_dl[(m, k)] - real.gamma_dl[(m, k)]) * dl_power(real, sol, m, phi))
                .sum();
            let cross: f64 = (0..real.num_ul()).map(|l| sol.varsigma[l] * real.beta_du[(k, l)]).sum();
            real.rho_d * coherent.powi(2) / (real.rho_d * leak + real.rho_u * cross + 1.0)
        })
        .collect()
}

fn ul_generic(real: &NetworkRealization, sol: &Solution, zf: bool, n: f64) -> Vec<f64> {
    let (ku, kd) = (real.num_ul() as f64, real.num_dl() as f64);
    let (weight, norm, dl_phi) = if zf { (1.0, 1.0 / (n - ku), 1.0 / (n - kd)) } else { (n, n, n) };
    (0..real.num_ul())
        .map(|l| {
            let mut coherent = 0.0;
            let mut denom = 0.0;
            for m in (0..real.num_aps()).filter(|&m| sol.b[m]) {
                let alpha = sol.alpha[(m, l)];
                let gamma = real.gamma_ul[(m, l)];
                coherent += alpha * gamma * weight;
                let ue: f64 = (0..real.num_ul())
                    .map(|j| {
                        let residual = if zf { real.gamma_ul[(m, j)] } else { 0.0 };
                        sol.varsigma[j] * (real.beta_ul[(m, j)] - residual)
                    })
                    .sum();
                let ap: f64 = (0..real.num_aps())
                    .filter(|&i| sol.a[i])
                    .map(|i| real.beta_ap[(m, i)] * dl_power(real, sol, i, dl_phi))
                    .sum();
                denom += alpha * alpha * gamma * norm * (real.rho_u * ue + 1.0 + real.rho_d * ap);
            }
            let signal = real.rho_u * sol.varsigma[l] * coherent * coherent;
            if signal > 0.0 {
                signal / denom
            } else {
                0.0
            }
        })
        .collect()
}

fn special_case_identity() -> Check {
    let mut rng = StdRng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for trial in 0..100u64 {
        let m = rng.random_range(2..=8);
        let n = rng.random_range(4..=8);
        let ku = rng.random_range(1..n.min(4));
        let kd = rng.random_range(1..n.min(4));
        let config = NetworkConfig::new(m, n, ku, kd);
        let (_, real) = NetworkRealization::draw(&config, 100 + trial).unwrap();
        let weak = Grouping {
            dl: LinkGroups::all_weak(m, kd),
            ul: LinkGroups::all_weak(m, ku),
        };
        let strong = Grouping {
            dl: LinkGroups::all_strong(m, kd),
            ul: LinkGroups::all_strong(m, ku),
        };
        for (grouping, zf) in [(weak, false), (strong, true)] {
            let problem = Problem::new(config.clone(), real.clone(), grouping.clone()).unwrap();
            let x: Vec<f64> = (0..problem.layout().len()).map(|_| rng.random()).collect();
            let sol = decode(&x, &problem);
            let nf = n as f64;
            let (want_dl, want_ul) = if zf {
                (fzf_dl(&real, &sol, nf), ul_generic(&real, &sol, true, nf))
            } else {
                (mr_dl(&real, &sol, nf), ul_generic(&real, &sol, false, nf))
            };
            let got_dl = dl_sinr(&sol, &real, &grouping, n).unwrap();
            let got_ul = ul_sinr(&sol, &real, &grouping, n).unwrap();
            for (g, w) in got_dl.iter().chain(&got_ul).zip(want_dl.iter().chain(&want_ul)) {
                worst = worst.max((g - w).abs() / w.abs().max(f64::MIN_POSITIVE));
            }
        }
    }
    (worst <= 1e-12, format!("max relative deviation {worst:.2e} over 100 inputs"))
}

fn optimizer_superiority(runs: &[Vec<RunOutcome>]) -> Check {
    let [chde, ga, pso, random] = [0, 1, 2, 3].map(|a| mean_fitness(&runs[a]));
    let ok = chde >= 1.30 * random && chde >= ga && chde >= pso;
    (
        ok,
        format!(
            "CHDE {chde:.2}, GA {ga:.2}, PSO {pso:.2}, Random-NAFD {random:.2} (ratio {:.2}) over {} realizations",
            chde / random,
            runs[0].len()
        ),
    )
}

const ABLATION: [Algorithm; 5] = [Algorithm::Chde, Algorithm::DeRand1, Algorithm::DeRand2, Algorithm::DeBest1, Algorithm::DeBest2];

fn operator_ablation(runs: &[Vec<RunOutcome>]) -> Check {
    let means: Vec<f64> = runs.iter().map(|r| mean_fitness(r)).collect();
    let ok = means[1..].iter().all(|&m| means[0] >= m);
    let parts: Vec<String> = ABLATION.iter().zip(&means).map(|(a, m)| format!("{a} {m:.2}")).collect();
    (ok, format!("{} over {} seeds", parts.join(", "), runs[0].len()))
}

fn feasibility() -> Check {
    let algorithms = [
        Algorithm::Chde,
        Algorithm::DeRand1,
        Algorithm::DeRand2,
        Algorithm::DeBest1,
        Algorithm::DeBest2,
        Algorithm::Ga,
        Algorithm::Pso,
        Algorithm::RandomNafd,
        Algorithm::ChdeHd,
    ];
    let n_runs = 1080u64;
    let failures: Vec<String> = (0..n_runs)
        .into_par_iter()
        .filter_map(|i| {
            let mut rng = StdRng::seed_from_u64(i);
            let n = rng.random_range(2..=5);
            let mut config = NetworkConfig::new(rng.random_range(2..=6), n, rng.random_range(1..=3), rng.random_range(1..=3));
            config.qos_ul = rng.random_range(0.0..2.0);
            config.qos_dl = rng.random_range(0.0..2.0);
            config.linr_db = rng.random_range(10.0..70.0);
            if rng.random_bool(0.3) {
                config.duplex_policy = DuplexPolicy::HdOnly;
            }
            let mode = [ProcessingMode::Pzf, ProcessingMode::Mr][rng.random_range(0..2)];
            let algorithm = algorithms[i as usize % algorithms.len()];
            let hyper = Hyperparams {
                pop_size: 10,
                g_max: 15,
                stall_window: 5,
                ..Hyperparams::default()
            };
            let problem = build_problem(&config, mode, i).unwrap();
            let run = run_algorithm(algorithm, &problem, &hyper, i).unwrap();
            let eval = &run.eval;
            let mut check_config = config.clone();
            if algorithm == Algorithm::ChdeHd {
                check_config.duplex_policy = DuplexPolicy::HdOnly;
            }
            let violations = check_constraints(&eval.solution, &problem.real, &problem.grouping, &check_config);
            if !violations.is_empty() {
                return Some(format!("run {i} ({algorithm}): {:?}", violations.violations));
            }
            let se = SeReport::evaluate(&eval.solution, &problem.real, &problem.grouping, &config).unwrap();
            let below = |se: &[f64], mask: &[bool], qos: &[f64]| (0..se.len()).any(|k| mask[k] && se[k] < qos[k]);
            if below(&se.se_ul, &eval.served_ul, &problem.qos_ul) || below(&se.se_dl, &eval.served_dl, &problem.qos_dl) {
                return Some(format!("run {i} ({algorithm}): served UE below threshold"));
            }
            None
        })
        .collect();
    (
        failures.is_empty(),
        format!("{} of {n_runs} runs infeasible{}", failures.len(), failures.first().map_or(String::new(), |f| format!(", first: {f}"))),
    )
}

fn tail_change(curve: &[f64], window: usize) -> f64 {
    let last = *curve.last().unwrap();
    let start = curve[curve.len().saturating_sub(window + 1)];
    (last - start) / last.abs().max(f64::MIN_POSITIVE)
}

/// Histories of every run must be nondecreasing; the realization-averaged
/// CHDE curve (runs that stopped early hold their final value) must be
/// flat to 0.1% over the last stall window.
fn convergence(chde: &[RunOutcome], all: &[&[RunOutcome]], hyper: &Hyperparams) -> Check {
    let monotone = all
        .iter()
        .flat_map(|runs| runs.iter())
        .all(|r| r.history.windows(2).all(|w| w[1].best_fitness >= w[0].best_fitness));
    let len = hyper.g_max + 1;
    let curve: Vec<f64> = (0..len)
        .map(|g| {
            let at = |r: &RunOutcome| r.history[g.min(r.history.len() - 1)].best_fitness;
            mean(&chde.iter().map(at).collect::<Vec<_>>())
        })
        .collect();
    let window = hyper.stall_window;
    let averaged = tail_change(&curve, window);
    let worst_run = chde
        .iter()
        .map(|r| tail_change(&r.history.iter().map(|h| h.best_fitness).collect::<Vec<_>>(), window))
        .fold(0.0, f64::max);
    (
        monotone && averaged < 1e-3,
        format!(
            "histories nondecreasing: {monotone}; mean curve over {} runs changes {:.4}% in the final {window} generations (worst single run {:.4}%)",
            chde.len(),
            100.0 * averaged,
            100.0 * worst_run
        ),
    )
}

fn qos_monotonicity() -> Check {
    let hyper = Hyperparams::default();
    let levels = [0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0];
    let seeds: Vec<u64> = (1..=30).collect();
    let counts: Vec<Vec<usize>> = seeds
        .par_iter()
        .map(|&seed| {
            levels
                .iter()
                .map(|&q| {
                    let config = NetworkConfig {
                        qos_ul: q,
                        qos_dl: q,
                        ..NetworkConfig::new(30, 8, 5, 5)
                    };
                    let problem = build_problem(&config, ProcessingMode::Pzf, seed).unwrap();
                    served(&run_algorithm(Algorithm::Chde, &problem, &hyper, seed).unwrap())
                })
                .collect()
        })
        .collect();
    let means: Vec<f64> = (0..levels.len())
        .map(|i| mean(&counts.iter().map(|c| c[i] as f64).collect::<Vec<_>>()))
        .collect();
    let ok = means.windows(2).all(|w| w[1] <= w[0]);
    let parts: Vec<String> = levels.iter().zip(&means).map(|(q, m)| format!("{q}: {m:.1}")).collect();
    (ok, format!("mean served UEs by threshold {}", parts.join(", ")))
}

fn multi_slot() -> Check {
    let config = NetworkConfig::new(30, 8, 3, 3);
    let policy = SlotPolicy::halving(0.5, 3);
    let hyper = Hyperparams::default();
    let traces: Vec<_> = (1..=10u64)
        .into_par_iter()
        .map(|seed| multi_slot_schedule(&config, ProcessingMode::Pzf, &policy, &hyper, 30, seed).unwrap())
        .collect();
    let slots = mean(&traces.iter().map(|t| t.slots_used as f64).collect::<Vec<_>>());
    let all = traces.iter().all(|t| t.all_served);
    (
        slots <= 4.0 && all,
        format!("mean slots to serve all UEs {slots:.2} over {} seeds; nobody left unserved: {all}", traces.len()),
    )
}

fn hd_vs_nafd() -> Check {
    let config = NetworkConfig {
        linr_db: 20.0,
        ..NetworkConfig::new(30, 8, 5, 5)
    };
    let seeds: Vec<u64> = (1..=10).collect();
    let runs = compare(&config, &[Algorithm::Chde, Algorithm::ChdeHd], &seeds);
    let (nafd, hd) = (mean_fitness(&runs[0]), mean_fitness(&runs[1]));
    (nafd >= hd, format!("NAFD {nafd:.2} vs HD_ONLY {hd:.2} at LINR 20 dB"))
}

fn main() -> ExitCode {
    let mut all = true;
    let mut report = |id: usize, name: &str, f: &mut dyn FnMut() -> Check| {
        let start = Instant::now();
        let (ok, detail) = f();
        all &= ok;
        println!(
            "criterion {id} {name}: {} ({detail}) [{:.1}s]",
            if ok { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
    };
    report(1, "oracle equivalence", &mut oracle_agreement);
    report(2, "special-case identity", &mut special_case_identity);

    let seeds: Vec<u64> = (1..=10).collect();
    let comparison = compare(
        &NetworkConfig::new(30, 8, 5, 5),
        &[Algorithm::Chde, Algorithm::Ga, Algorithm::Pso, Algorithm::RandomNafd],
        &seeds,
    );
    report(3, "optimizer superiority", &mut || optimizer_superiority(&comparison));
    let seeds: Vec<u64> = (1..=30).collect();
    let ablation = compare(&NetworkConfig::new(30, 8, 3, 3), &ABLATION, &seeds);
    report(4, "operator ablation", &mut || operator_ablation(&ablation));
    report(5, "feasibility", &mut feasibility);
    let mut histories: Vec<&[RunOutcome]> = ablation.iter().map(Vec::as_slice).collect();
    histories.extend(comparison[..3].iter().map(Vec::as_slice));
    report(6, "convergence", &mut || convergence(&ablation[0], &histories, &Hyperparams::default()));
    report(7, "QoS monotonicity", &mut qos_monotonicity);
    report(8, "multi-slot scheduler", &mut multi_slot);
    report(9, "NAFD vs HD_ONLY", &mut hd_vs_nafd);
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
