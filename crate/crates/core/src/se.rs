//! Closed-form per-UE spectral efficiency under partial zero-forcing.
//!
//! Both links use the use-and-then-forget bound. Interference leakage is
//! classified by the processing applied to the *interfering* stream: a
//! zero-forced stream leaks `(β - γ)` toward UEs that are in the same
//! strong set and the full `β` toward the others, always scaled by the
//! expected precoder norm `γ/(N - |S_m|)`; an MR stream leaks `N γ β`.
//! With all-weak or all-strong groupings this reduces to the MR and
//! full-ZF expressions.

use std::io::{self, Write};

use crate::config::NetworkConfig;
use crate::error::{Error, Result};
use crate::grouping::Grouping;
use crate::netgen::NetworkRealization;
use crate::solution::Solution;

fn check_inputs(sol: &Solution, real: &NetworkRealization, grouping: &Grouping, antennas: usize) -> Result<()> {
    grouping.validate(antennas)?;
    if !sol.shape_matches(real)
        || grouping.dl.num_aps() != real.num_aps()
        || grouping.ul.num_aps() != real.num_aps()
        || grouping.dl.num_ues() != real.num_dl()
        || grouping.ul.num_ues() != real.num_ul()
    {
        return Err(Error::Dimension("solution, grouping and realization disagree".into()));
    }
    Ok(())
}

/// Per-AP DL power split into its zero-forced and MR parts:
/// `(Σ_{k∈S_m} γθ²/(N-|S_m|), Σ_{k∈W_m} N γθ²)`.
fn dl_power_split(sol: &Solution, real: &NetworkRealization, grouping: &Grouping, antennas: usize) -> Vec<(f64, f64)> {
    let g = &grouping.dl;
    (0..real.num_aps())
        .map(|m| {
            let mut zf = 0.0;
            let mut mr = 0.0;
            for k in 0..real.num_dl() {
                let p = real.gamma_dl[(m, k)] * sol.theta[(m, k)].powi(2) * g.norm_factor(m, k, antennas);
                if g.is_strong(m, k) {
                    zf += p;
                } else {
                    mr += p;
                }
            }
            (zf, mr)
        })
        .collect()
}

/// DL SINR of every DL UE.
pub fn dl_sinr(sol: &Solution, real: &NetworkRealization, grouping: &Grouping, antennas: usize) -> Result<Vec<f64>> {
    check_inputs(sol, real, grouping, antennas)?;
    let g = &grouping.dl;
    let split = dl_power_split(sol, real, grouping, antennas);
    let cross: Vec<f64> = (0..real.num_dl())
        .map(|k| {
            (0..real.num_ul())
                .map(|l| sol.varsigma[l] * real.beta_du[(k, l)])
                .sum::<f64>()
        })
        .collect();
    Ok((0..real.num_dl())
        .map(|k| {
            let mut coherent = 0.0;
            let mut leakage = 0.0;
            for m in 0..real.num_aps() {
                if !sol.a[m] {
                    continue;
                }
                let (beta, gamma) = (real.beta_dl[(m, k)], real.gamma_dl[(m, k)]);
                coherent += sol.theta[(m, k)] * gamma * g.gain_weight(m, k, antennas);
                let (zf, mr) = split[m];
                leakage += beta * (zf + mr) - g.delta_z(m, k) * gamma * zf;
            }
            let signal = real.rho_d * coherent * coherent;
            let omega = real.rho_d * leakage + real.rho_u * cross[k] + 1.0;
            signal / omega
        })
        .collect())
}

/// UL SINR of every UL UE, including the DL-to-UL inter-AP and SI term.
pub fn ul_sinr(sol: &Solution, real: &NetworkRealization, grouping: &Grouping, antennas: usize) -> Result<Vec<f64>> {
    check_inputs(sol, real, grouping, antennas)?;
    let (m_count, ku) = (real.num_aps(), real.num_ul());
    let g = &grouping.ul;
    let split = dl_power_split(sol, real, grouping, antennas);
    // Interference power received at AP m from all transmitting APs (SI on the diagonal).
    let ap_rx: Vec<f64> = (0..m_count)
        .map(|m| {
            (0..m_count)
                .filter(|&i| sol.a[i])
                .map(|i| real.beta_ap[(m, i)] * (split[i].0 + split[i].1))
                .sum()
        })
        .collect();
    // UL-UE interference seen by a ZF combiner (strong UEs leave only the
    // estimation error) and by an MR combiner.
    let ue_rx: Vec<(f64, f64)> = (0..m_count)
        .map(|m| {
            let mut zf = 0.0;
            let mut mr = 0.0;
            for l in 0..ku {
                let (beta, gamma) = (real.beta_ul[(m, l)], real.gamma_ul[(m, l)]);
                mr += sol.varsigma[l] * beta;
                zf += sol.varsigma[l] * (beta - g.delta_z(m, l) * gamma);
            }
            (zf, mr)
        })
        .collect();
    Ok((0..ku)
        .map(|l| {
            let mut coherent = 0.0;
            let mut denom = 0.0;
            for m in 0..m_count {
                if !sol.b[m] {
                    continue;
                }
                let alpha = sol.alpha[(m, l)];
                let gamma = real.gamma_ul[(m, l)];
                coherent += alpha * gamma * g.gain_weight(m, l, antennas);
                let combiner_norm = gamma * g.norm_factor(m, l, antennas);
                let ue_term = if g.is_strong(m, l) { ue_rx[m].0 } else { ue_rx[m].1 };
                denom += alpha * alpha * combiner_norm * (real.rho_u * ue_term + 1.0 + real.rho_d * ap_rx[m]);
            }
            let signal = real.rho_u * sol.varsigma[l] * coherent * coherent;
            if signal > 0.0 {
                signal / denom
            } else {
                0.0
            }
        })
        .collect())
}

/// `Φ(ℓ, i, q)`: DL-to-UL coupling of DL stream `q` sent by AP `i` into the
/// combined UL signal of UE `ℓ`, per unit `a_i θ_iq² γ_iq`.
pub fn phi(
    sol: &Solution,
    real: &NetworkRealization,
    grouping: &Grouping,
    antennas: usize,
    ue: usize,
    tx_ap: usize,
    dl_ue: usize,
) -> f64 {
    let precoder = grouping.dl.norm_factor(tx_ap, dl_ue, antennas);
    (0..real.num_aps())
        .map(|m| {
            sol.b_f(m)
                * sol.alpha[(m, ue)].powi(2)
                * real.gamma_ul[(m, ue)]
                * grouping.ul.norm_factor(m, ue, antennas)
                * real.beta_ap[(m, tx_ap)]
                * precoder
        })
        .sum()
}

pub fn se_from_sinr(sinr: f64, prelog: f64) -> f64 {
    prelog * (1.0 + sinr).log2()
}

pub fn dl_se_per_ue(
    sol: &Solution,
    real: &NetworkRealization,
    grouping: &Grouping,
    config: &NetworkConfig,
) -> Result<Vec<f64>> {
    let prelog = config.prelog();
    Ok(dl_sinr(sol, real, grouping, config.antennas)?
        .into_iter()
        .map(|s| se_from_sinr(s, prelog))
        .collect())
}

pub fn ul_se_per_ue(
    sol: &Solution,
    real: &NetworkRealization,
    grouping: &Grouping,
    config: &NetworkConfig,
) -> Result<Vec<f64>> {
    let prelog = config.prelog();
    Ok(ul_sinr(sol, real, grouping, config.antennas)?
        .into_iter()
        .map(|s| se_from_sinr(s, prelog))
        .collect())
}

/// Sum of the served UEs' SE on both links.
pub fn total_se(se_ul: &[f64], se_dl: &[f64], served_ul: &[bool], served_dl: &[bool]) -> f64 {
    let masked = |se: &[f64], mask: &[bool]| -> f64 {
        se.iter().zip(mask).filter(|(_, &s)| s).map(|(v, _)| v).sum()
    };
    masked(se_ul, served_ul) + masked(se_dl, served_dl)
}

/// Per-UE SE of a solution together with the served masks.
#[derive(Debug, Clone, PartialEq)]
pub struct SeReport {
    pub se_ul: Vec<f64>,
    pub se_dl: Vec<f64>,
    pub served_ul: Vec<bool>,
    pub served_dl: Vec<bool>,
    pub total: f64,
}

impl SeReport {
    pub fn new(se_ul: Vec<f64>, se_dl: Vec<f64>, served_ul: Vec<bool>, served_dl: Vec<bool>) -> Self {
        let total = total_se(&se_ul, &se_dl, &served_ul, &served_dl);
        Self { se_ul, se_dl, served_ul, served_dl, total }
    }

    /// Evaluates both links with every UE counted as served.
    pub fn evaluate(sol: &Solution, real: &NetworkRealization, grouping: &Grouping, config: &NetworkConfig) -> Result<Self> {
        let se_ul = ul_se_per_ue(sol, real, grouping, config)?;
        let se_dl = dl_se_per_ue(sol, real, grouping, config)?;
        let served_ul = vec![true; se_ul.len()];
        let served_dl = vec![true; se_dl.len()];
        Ok(Self::new(se_ul, se_dl, served_ul, served_dl))
    }

    pub fn served_count(&self) -> usize {
        self.served_ul.iter().chain(&self.served_dl).filter(|s| **s).count()
    }

    /// `link,ue_index,se_bits_per_s_per_hz,served` rows.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "link,ue_index,se_bits_per_s_per_hz,served")?;
        for (l, (se, served)) in self.se_ul.iter().zip(&self.served_ul).enumerate() {
            writeln!(w, "ul,{l},{se:.16e},{served}")?;
        }
        for (k, (se, served)) in self.se_dl.iter().zip(&self.served_dl).enumerate() {
            writeln!(w, "dl,{k},{se:.16e},{served}")?;
        }
        w.flush()
    }
}
