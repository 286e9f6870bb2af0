mod common;

use nafd_core::grouping::{LinkGroups, ProcessingMode};
use nafd_core::oracle::empirical_se;
use nafd_core::se::{dl_se_per_ue, dl_sinr, total_se, ul_se_per_ue, ul_sinr};
use nafd_core::solution::check_constraints;
use nafd_core::{DuplexPolicy, Grouping, NetworkConfig, NetworkRealization, Solution, Violation};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// One AP, one UE per link, γ = 0.05 and β = 0.1 (τ_t ρ_t = 10).
fn single_ap(num_ul: usize, num_dl: usize) -> (NetworkConfig, NetworkRealization) {
    let mut config = NetworkConfig::new(1, 4, num_ul, num_dl);
    config.tau_t = Some(2);
    let real = NetworkRealization::from_gains(
        DMatrix::from_element(1, num_dl, 0.1),
        DMatrix::from_element(1, num_ul, 0.1),
        DMatrix::zeros(num_dl, num_ul),
        DMatrix::from_element(1, 1, 1e5),
        (100.0, 100.0, 5.0),
        2,
    );
    (config, real)
}

fn single_solution(a: bool, b: bool, theta_sq: f64, num_ul: usize, num_dl: usize) -> Solution {
    Solution {
        a: vec![a],
        b: vec![b],
        varsigma: vec![1.0; num_ul],
        theta: DMatrix::from_element(1, num_dl, theta_sq.sqrt()),
        alpha: DMatrix::from_element(1, num_ul, 1.0),
    }
}

#[test]
fn single_ap_mr_downlink() {
    let (config, real) = single_ap(0, 1);
    assert!((real.gamma_dl[(0, 0)] - 0.05).abs() < 1e-15);
    let grouping = Grouping::build(ProcessingMode::Mr, &real, &config).unwrap();
    let sol = single_solution(true, false, 5.0, 0, 1);
    let sinr = dl_sinr(&sol, &real, &grouping, 4).unwrap();
    assert!((sinr[0] - 20.0 / 11.0).abs() < 1e-12);
    let se = dl_se_per_ue(&sol, &real, &grouping, &config).unwrap();
    assert!((se[0] - 0.99 * (31.0f64 / 11.0).log2()).abs() < 1e-12);
    assert!((se[0] - 1.4800).abs() < 5e-4, "{}", se[0]);
    assert!(check_constraints(&sol, &real, &grouping, &config).is_empty());

    let emp = empirical_se(&sol, &real, &grouping, &config, 20_000, 11).unwrap();
    assert!(common::rel_err(se[0], emp.dl.se[0]) <= 0.03, "{}", emp.dl.se[0]);
}

#[test]
fn single_ap_zf_downlink() {
    let (config, real) = single_ap(0, 1);
    let grouping = Grouping::build(ProcessingMode::Fzf, &real, &config).unwrap();
    assert_eq!(grouping.dl.strong_count(0), 1);
    let sol = single_solution(true, false, 60.0, 0, 1);
    let sinr = dl_sinr(&sol, &real, &grouping, 4).unwrap();
    assert!((sinr[0] - 2.5).abs() < 1e-12, "{}", sinr[0]);
    assert!(check_constraints(&sol, &real, &grouping, &config).is_empty());
}

#[test]
fn single_ap_mr_uplink() {
    let (config, real) = single_ap(1, 0);
    let grouping = Grouping::build(ProcessingMode::Mr, &real, &config).unwrap();
    let sol = single_solution(false, true, 0.0, 1, 0);
    let sinr = ul_sinr(&sol, &real, &grouping, 4).unwrap();
    assert!((sinr[0] - 4.0 / 2.2).abs() < 1e-12);
    let se = ul_se_per_ue(&sol, &real, &grouping, &config).unwrap();
    assert!((se[0] - 0.99 * (1.0f64 + 4.0 / 2.2).log2()).abs() < 1e-12);

    let emp = empirical_se(&sol, &real, &grouping, &config, 20_000, 12).unwrap();
    assert!(common::rel_err(se[0], emp.ul.se[0]) <= 0.03, "{}", emp.ul.se[0]);
}

#[test]
fn dl_power_feeds_uplink_interference() {
    let (config, real) = single_ap(1, 1);
    let grouping = Grouping::build(ProcessingMode::Mr, &real, &config).unwrap();
    let quiet = ul_sinr(&single_solution(false, true, 0.0, 1, 1), &real, &grouping, 4).unwrap()[0];
    let mut last = quiet;
    for theta_sq in [0.5, 1.0, 2.0, 5.0] {
        let s = ul_sinr(&single_solution(true, true, theta_sq, 1, 1), &real, &grouping, 4).unwrap()[0];
        assert!(s < last);
        last = s;
    }
}

#[test]
fn trivial_zeros() {
    let (config, real) = single_ap(1, 1);
    let grouping = Grouping::build(ProcessingMode::Mr, &real, &config).unwrap();
    let sol = single_solution(true, false, 0.0, 1, 1);
    assert_eq!(dl_se_per_ue(&sol, &real, &grouping, &config).unwrap(), vec![0.0]);
    assert_eq!(ul_se_per_ue(&sol, &real, &grouping, &config).unwrap(), vec![0.0]);
    assert_eq!(total_se(&[1.0], &[2.0], &[false], &[false]), 0.0);
    assert_eq!(total_se(&[1.5], &[2.0], &[true], &[false]), 1.5);
    assert_eq!(total_se(&[1.5, 0.5], &[2.0], &[true, true], &[true]), 4.0);
}

#[test]
fn constraint_examples() {
    let (mut config, real) = single_ap(1, 1);
    let grouping = Grouping::build(ProcessingMode::Mr, &real, &config).unwrap();
    let sol = single_solution(true, true, 5.0, 1, 1);
    assert!(check_constraints(&sol, &real, &grouping, &config).is_empty());
    let mut over = sol.clone();
    over.theta *= 2.0;
    let report = check_constraints(&over, &real, &grouping, &config);
    match report.violations.as_slice() {
        [Violation::DlPower { ap: 0, load, slack, .. }] => {
            assert!((load - 4.0).abs() < 1e-12);
            assert!((slack + 3.0).abs() < 1e-12);
        }
        other => panic!("{other:?}"),
    }
    config.duplex_policy = DuplexPolicy::HdOnly;
    let report = check_constraints(&sol, &real, &grouping, &config);
    assert_eq!(report.violations, vec![Violation::FullDuplexForbidden { ap: 0 }]);
}

fn random_realization(rng: &mut ChaCha8Rng, m: usize, ku: usize, kd: usize, n: usize) -> (NetworkConfig, NetworkRealization) {
    let mut config = NetworkConfig::new(m, n, ku, kd);
    config.tau_t = Some(ku + kd);
    let mut g = |r: usize, c: usize| DMatrix::from_fn(r, c, |_, _| 10f64.powf(rng.random_range(-3.0..1.0)));
    let beta_dl = g(m, kd);
    let beta_ul = g(m, ku);
    let beta_du = g(kd, ku);
    let mut beta_ap = g(m, m);
    for i in 0..m {
        beta_ap[(i, i)] = 1e3;
    }
    let beta_ap = beta_ap.clone() + beta_ap.transpose();
    let real = NetworkRealization::from_gains(beta_dl, beta_ul, beta_du, beta_ap, (50.0, 20.0, 20.0), ku + kd);
    (config, real)
}

/// DL SINR with MR at every AP, written out directly.
fn mr_dl(sol: &Solution, r: &NetworkRealization, n: f64) -> Vec<f64> {
    let (m, ku, kd) = (r.num_aps(), r.num_ul(), r.num_dl());
    (0..kd)
        .map(|k| {
            let ds: f64 = (0..m).map(|i| sol.a_f(i) * sol.theta[(i, k)] * r.gamma_dl[(i, k)]).sum();
            let num = r.rho_d * n * n * ds * ds;
            let leak: f64 = (0..m)
                .map(|i| {
                    sol.a_f(i)
                        * r.beta_dl[(i, k)]
                        * (0..kd).map(|q| sol.theta[(i, q)].powi(2) * r.gamma_dl[(i, q)]).sum::<f64>()
                })
                .sum();
            let ui: f64 = (0..ku).map(|l| sol.varsigma[l] * r.beta_du[(k, l)]).sum();
            num / (r.rho_d * n * leak + r.rho_u * ui + 1.0)
        })
        .collect()
}

/// DL SINR with full ZF at every AP, written out directly.
fn fzf_dl(sol: &Solution, r: &NetworkRealization, n: f64) -> Vec<f64> {
    let (m, ku, kd) = (r.num_aps(), r.num_ul(), r.num_dl());
    let nk = n - kd as f64;
    (0..kd)
        .map(|k| {
            let ds: f64 = (0..m).map(|i| sol.a_f(i) * sol.theta[(i, k)] * r.gamma_dl[(i, k)]).sum();
            let num = r.rho_d * ds * ds;
            let leak: f64 = (0..m)
                .map(|i| {
                    sol.a_f(i)
                        * (r.beta_dl[(i, k)] - r.gamma_dl[(i, k)])
                        * (0..kd).map(|q| sol.theta[(i, q)].powi(2) * r.gamma_dl[(i, q)]).sum::<f64>()
                        / nk
                })
                .sum();
            let ui: f64 = (0..ku).map(|l| sol.varsigma[l] * r.beta_du[(k, l)]).sum();
            num / (r.rho_d * leak + r.rho_u * ui + 1.0)
        })
        .collect()
}

/// UL SINR with MR combining and MR precoding everywhere.
fn mr_ul(sol: &Solution, r: &NetworkRealization, n: f64) -> Vec<f64> {
    let (m, ku, kd) = (r.num_aps(), r.num_ul(), r.num_dl());
    (0..ku)
        .map(|l| {
            let ds: f64 = (0..m).map(|i| sol.b_f(i) * sol.alpha[(i, l)] * r.gamma_ul[(i, l)]).sum();
            let num = r.rho_u * sol.varsigma[l] * n * n * ds * ds;
            let mut den = 0.0;
            for i in 0..m {
                let w = sol.b_f(i) * sol.alpha[(i, l)].powi(2) * r.gamma_ul[(i, l)] * n;
                let ui: f64 = (0..ku).map(|lp| sol.varsigma[lp] * r.beta_ul[(i, lp)]).sum();
                let mi: f64 = (0..m)
                    .map(|j| {
                        sol.a_f(j)
                            * r.beta_ap[(i, j)]
                            * n
                            * (0..kd).map(|q| sol.theta[(j, q)].powi(2) * r.gamma_dl[(j, q)]).sum::<f64>()
                    })
                    .sum();
                den += w * (r.rho_u * ui + r.rho_d * mi + 1.0);
            }
            num / den
        })
        .collect()
}

/// UL SINR with full ZF combining and full ZF precoding everywhere.
fn fzf_ul(sol: &Solution, r: &NetworkRealization, n: f64) -> Vec<f64> {
    let (m, ku, kd) = (r.num_aps(), r.num_ul(), r.num_dl());
    let (nu, nd) = (n - ku as f64, n - kd as f64);
    (0..ku)
        .map(|l| {
            let ds: f64 = (0..m).map(|i| sol.b_f(i) * sol.alpha[(i, l)] * r.gamma_ul[(i, l)]).sum();
            let num = r.rho_u * sol.varsigma[l] * ds * ds;
            let mut den = 0.0;
            for i in 0..m {
                let w = sol.b_f(i) * sol.alpha[(i, l)].powi(2) * r.gamma_ul[(i, l)] / nu;
                let ui: f64 = (0..ku)
                    .map(|lp| sol.varsigma[lp] * (r.beta_ul[(i, lp)] - r.gamma_ul[(i, lp)]))
                    .sum();
                let mi: f64 = (0..m)
                    .map(|j| {
                        sol.a_f(j)
                            * r.beta_ap[(i, j)]
                            * (0..kd).map(|q| sol.theta[(j, q)].powi(2) * r.gamma_dl[(j, q)]).sum::<f64>()
                            / nd
                    })
                    .sum();
                den += w * (r.rho_u * ui + r.rho_d * mi + 1.0);
            }
            num / den
        })
        .collect()
}

fn assert_close(got: &[f64], want: &[f64]) {
    for (g, w) in got.iter().zip(want) {
        assert!((g - w).abs() <= 1e-12 * w.abs().max(f64::MIN_POSITIVE), "{g} vs {w}");
    }
}

#[test]
fn extremes_reduce_to_mr_and_full_zf() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..100 {
        let n = rng.random_range(3..=8);
        let ku = rng.random_range(1..n);
        let kd = rng.random_range(1..n);
        let m = rng.random_range(1..=6);
        let (config, real) = random_realization(&mut rng, m, ku, kd, n);
        for mode in [ProcessingMode::Mr, ProcessingMode::Fzf] {
            let grouping = Grouping::build(mode, &real, &config).unwrap();
            let sol = common::random_feasible(&real, &grouping, &config, &mut rng);
            let (dl, ul) = match mode {
                ProcessingMode::Mr => (mr_dl(&sol, &real, n as f64), mr_ul(&sol, &real, n as f64)),
                _ => (fzf_dl(&sol, &real, n as f64), fzf_ul(&sol, &real, n as f64)),
            };
            assert_close(&dl_sinr(&sol, &real, &grouping, n).unwrap(), &dl);
            assert_close(&ul_sinr(&sol, &real, &grouping, n).unwrap(), &ul);
        }
    }
}

#[test]
fn permuting_ues_permutes_se() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let config = NetworkConfig::new(6, 4, 3, 3);
    let (_, real) = NetworkRealization::draw(&config, 9).unwrap();
    let grouping = Grouping::build(ProcessingMode::Pzf, &real, &config).unwrap();
    let sol = common::random_feasible(&real, &grouping, &config, &mut rng);
    let dl = dl_sinr(&sol, &real, &grouping, 4).unwrap();
    let ul = ul_sinr(&sol, &real, &grouping, 4).unwrap();

    let perm = [2, 0, 1];
    let cols = |mat: &DMatrix<f64>| DMatrix::from_fn(mat.nrows(), 3, |r, c| mat[(r, perm[c])]);
    let mut preal = real.clone();
    preal.beta_dl = cols(&real.beta_dl);
    preal.gamma_dl = cols(&real.gamma_dl);
    preal.beta_ul = cols(&real.beta_ul);
    preal.gamma_ul = cols(&real.gamma_ul);
    preal.beta_du = DMatrix::from_fn(3, 3, |r, c| real.beta_du[(perm[r], perm[c])]);
    let mut inverse = [0; 3];
    for (new, &old) in perm.iter().enumerate() {
        inverse[old] = new;
    }
    let pgroup = Grouping {
        dl: grouping.dl.permuted(&inverse),
        ul: grouping.ul.permuted(&inverse),
    };
    let psol = Solution {
        varsigma: perm.iter().map(|&p| sol.varsigma[p]).collect(),
        theta: cols(&sol.theta),
        alpha: cols(&sol.alpha),
        ..sol.clone()
    };
    let pdl = dl_sinr(&psol, &preal, &pgroup, 4).unwrap();
    let pul = ul_sinr(&psol, &preal, &pgroup, 4).unwrap();
    for (c, &p) in perm.iter().enumerate() {
        assert!((pdl[c] - dl[p]).abs() <= 1e-12 * dl[p]);
        assert!((pul[c] - ul[p]).abs() <= 1e-12 * ul[p].max(f64::MIN_POSITIVE));
    }
}

#[test]
fn perfect_csi_removes_zf_residual() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (config, mut real) = random_realization(&mut rng, 4, 2, 2, 5);
    real.gamma_dl = real.beta_dl.clone();
    real.gamma_ul = real.beta_ul.clone();
    real.beta_du.fill(0.0);
    let grouping = Grouping::build(ProcessingMode::Fzf, &real, &config).unwrap();
    let mut sol = common::random_feasible(&real, &grouping, &config, &mut rng);
    sol.b.iter_mut().for_each(|b| *b = false);
    sol.b[3] = true;
    sol.a[3] = false;
    sol.theta.row_mut(3).fill(0.0);
    let dl = dl_sinr(&sol, &real, &grouping, 5).unwrap();
    for (k, s) in dl.iter().enumerate() {
        let ds: f64 = (0..4).map(|i| sol.a_f(i) * sol.theta[(i, k)] * real.gamma_dl[(i, k)]).sum();
        assert!((s - real.rho_d * ds * ds).abs() <= 1e-12 * s);
    }
    // UL: only noise and the DL-to-UL term remain.
    let ul = ul_sinr(&sol, &real, &grouping, 5).unwrap();
    let no_ue = fzf_ul(&sol, &real, 5.0);
    assert_close(&ul, &no_ue);
}

#[test]
fn dl_ignores_ul_power_without_cross_link() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (config, mut real) = random_realization(&mut rng, 5, 3, 3, 6);
    real.beta_du.fill(0.0);
    let grouping = Grouping::build(ProcessingMode::Pzf, &real, &config).unwrap();
    let mut sol = common::random_feasible(&real, &grouping, &config, &mut rng);
    sol.b.iter_mut().for_each(|b| *b = false);
    let base = dl_sinr(&sol, &real, &grouping, 6).unwrap();
    sol.varsigma = vec![0.01, 0.5, 1.0];
    assert_eq!(dl_sinr(&sol, &real, &grouping, 6).unwrap(), base);
    assert!(ul_sinr(&sol, &real, &grouping, 6).unwrap().iter().all(|&s| s == 0.0));
}

#[test]
fn ul_sinr_grows_with_own_power() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..50 {
        let (config, real) = random_realization(&mut rng, 5, 3, 2, 6);
        let grouping = Grouping::build(ProcessingMode::Pzf, &real, &config).unwrap();
        let sol = common::random_feasible(&real, &grouping, &config, &mut rng);
        let base = ul_sinr(&sol, &real, &grouping, 6).unwrap();
        for l in 0..3 {
            let mut bumped = sol.clone();
            bumped.varsigma[l] = (sol.varsigma[l] + 1e-3).min(1.0);
            let s = ul_sinr(&bumped, &real, &grouping, 6).unwrap();
            assert!(s[l] >= base[l]);
            assert!(s.iter().all(|&x| x >= 0.0));
        }
    }
}

#[test]
fn oversized_strong_set_is_rejected() {
    let (_, real) = single_ap(0, 1);
    let sol = single_solution(true, false, 1.0, 0, 1);
    let bad = Grouping {
        dl: LinkGroups::all_strong(1, 1),
        ul: LinkGroups::all_weak(1, 0),
    };
    assert!(dl_sinr(&sol, &real, &bad, 1).is_err());
}
