//! Monte Carlo spectral efficiency from simulated small-scale fading.
//!
//! Channels and MMSE estimates are drawn per draw, the PZF/MR
//! precoders and combiners are built from the estimates exactly as an AP
//! would, and the use-and-then-forget terms are averaged over draws. The
//! result is independent of the closed forms in [`crate::se`] and serves
//! as their oracle.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::config::NetworkConfig;
use crate::error::{Error, Result};
use crate::grouping::{Grouping, LinkGroups};
use crate::netgen::NetworkRealization;
use crate::rng::{indexed_rng, Stream};
use crate::se::se_from_sinr;
use crate::solution::Solution;

type CVec = DVector<Complex64>;

/// Redraws allowed when a Gram matrix turns out singular.
pub const MAX_SINGULAR_RETRIES: usize = 5;
/// Draws are split into this many independently seeded shards.
const SHARDS: usize = 16;

/// One realization of every small-scale channel.
#[derive(Debug, Clone)]
pub struct ChannelDraw {
    /// AP→DL-UE channels, indexed `m * Kd + k`.
    pub g_dl: Vec<CVec>,
    /// AP→UL-UE channels, indexed `m * Ku + l`.
    pub g_ul: Vec<CVec>,
    pub ghat_dl: Vec<CVec>,
    pub ghat_ul: Vec<CVec>,
    /// UL-UE→DL-UE scalars, `Kd × Ku`.
    pub h_du: DMatrix<Complex64>,
    /// AP i → AP m channel matrices, indexed `m * M + i`; `m == i` is SI.
    pub f_ap: Vec<DMatrix<Complex64>>,
    num_aps: usize,
    num_ul: usize,
    num_dl: usize,
}

impl ChannelDraw {
    pub fn dl(&self, ap: usize, ue: usize) -> &CVec {
        &self.g_dl[ap * self.num_dl + ue]
    }

    pub fn ul(&self, ap: usize, ue: usize) -> &CVec {
        &self.g_ul[ap * self.num_ul + ue]
    }

    pub fn dl_hat(&self, ap: usize, ue: usize) -> &CVec {
        &self.ghat_dl[ap * self.num_dl + ue]
    }

    pub fn ul_hat(&self, ap: usize, ue: usize) -> &CVec {
        &self.ghat_ul[ap * self.num_ul + ue]
    }

    pub fn inter_ap(&self, rx: usize, tx: usize) -> &DMatrix<Complex64> {
        &self.f_ap[rx * self.num_aps + tx]
    }
}

fn cn<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(s * re, s * im)
}

fn cn_vec<R: Rng + ?Sized>(rng: &mut R, n: usize, variance: f64) -> CVec {
    DVector::from_fn(n, |_, _| cn(rng, variance))
}

/// Draws all channels; each estimate is `CN(0, γI)` with an independent
/// `CN(0, (β-γ)I)` error.
pub fn sample_draw<R: Rng + ?Sized>(real: &NetworkRealization, antennas: usize, rng: &mut R) -> ChannelDraw {
    let (m, ku, kd) = (real.num_aps(), real.num_ul(), real.num_dl());
    let mut estimate = |beta: f64, gamma: f64| {
        let hat = cn_vec(rng, antennas, gamma);
        let err = cn_vec(rng, antennas, (beta - gamma).max(0.0));
        (&hat + err, hat)
    };
    let mut g_dl = Vec::with_capacity(m * kd);
    let mut ghat_dl = Vec::with_capacity(m * kd);
    let mut g_ul = Vec::with_capacity(m * ku);
    let mut ghat_ul = Vec::with_capacity(m * ku);
    for ap in 0..m {
        for k in 0..kd {
            let (g, h) = estimate(real.beta_dl[(ap, k)], real.gamma_dl[(ap, k)]);
            g_dl.push(g);
            ghat_dl.push(h);
        }
        for l in 0..ku {
            let (g, h) = estimate(real.beta_ul[(ap, l)], real.gamma_ul[(ap, l)]);
            g_ul.push(g);
            ghat_ul.push(h);
        }
    }
    let h_du = DMatrix::from_fn(kd, ku, |k, l| cn(rng, real.beta_du[(k, l)]));
    let f_ap = (0..m * m)
        .map(|idx| {
            let var = real.beta_ap[(idx / m, idx % m)];
            DMatrix::from_fn(antennas, antennas, |_, _| cn(rng, var))
        })
        .collect();
    ChannelDraw {
        g_dl,
        g_ul,
        ghat_dl,
        ghat_ul,
        h_du,
        f_ap,
        num_aps: m,
        num_ul: ku,
        num_dl: kd,
    }
}

/// Precoders (DL) and combiners (UL) for one draw, same indexing as the channels.
#[derive(Debug, Clone)]
pub struct Precoders {
    pub dl: Vec<CVec>,
    pub ul: Vec<CVec>,
}

/// ZF vectors `γ_k Ĝ_S (Ĝ_S^H Ĝ_S)^{-1} e_k` toward the strong set of one
/// AP and MR vectors `ĝ_k` toward the rest.
fn link_vectors(
    estimates: &[CVec],
    gamma: &DMatrix<f64>,
    groups: &LinkGroups,
    ap: usize,
    num_ues: usize,
) -> Option<Vec<CVec>> {
    let hat = |k: usize| &estimates[ap * num_ues + k];
    let strong = groups.strong(ap);
    let mut out: Vec<CVec> = (0..num_ues).map(|k| hat(k).clone()).collect();
    if strong.is_empty() {
        return Some(out);
    }
    let n = hat(strong[0]).len();
    let g_s = DMatrix::from_fn(n, strong.len(), |r, c| hat(strong[c])[r]);
    let gram = g_s.adjoint() * &g_s;
    let chol = gram.cholesky()?;
    let inv = chol.inverse();
    if inv.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return None;
    }
    let zf = &g_s * inv;
    for (j, &k) in strong.iter().enumerate() {
        out[k] = zf.column(j).into_owned() * Complex64::from(gamma[(ap, k)]);
    }
    Some(out)
}

pub fn build_precoders(draw: &ChannelDraw, real: &NetworkRealization, grouping: &Grouping) -> Result<Precoders> {
    let (m, ku, kd) = (real.num_aps(), real.num_ul(), real.num_dl());
    let mut dl = Vec::with_capacity(m * kd);
    let mut ul = Vec::with_capacity(m * ku);
    for ap in 0..m {
        dl.extend(
            link_vectors(&draw.ghat_dl, &real.gamma_dl, &grouping.dl, ap, kd)
                .ok_or(Error::SingularGram { ap, attempts: 1 })?,
        );
        ul.extend(
            link_vectors(&draw.ghat_ul, &real.gamma_ul, &grouping.ul, ap, ku)
                .ok_or(Error::SingularGram { ap, attempts: 1 })?,
        );
    }
    Ok(Precoders { dl, ul })
}

/// Averaged use-and-then-forget terms for one UE.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct UatfTerms {
    /// `|E{effective gain}|²`.
    pub signal: f64,
    /// Variance of the own effective gain (beamforming uncertainty).
    pub gain_uncertainty: f64,
    /// Same-link multi-user interference.
    pub interference: f64,
    /// Cross-link interference (UL UEs at a DL UE, APs at the UL receivers).
    pub cross_link: f64,
    pub noise: f64,
    /// Standard error of the mean effective gain.
    pub signal_std_error: f64,
}

impl UatfTerms {
    pub fn sinr(&self) -> f64 {
        if self.signal == 0.0 {
            return 0.0;
        }
        self.signal / (self.gain_uncertainty + self.interference + self.cross_link + self.noise)
    }
}

/// Empirical SE of every UE on one link.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalLink {
    pub se: Vec<f64>,
    pub terms: Vec<UatfTerms>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalReport {
    pub dl: EmpiricalLink,
    pub ul: EmpiricalLink,
    pub n_draws: usize,
}

/// Running sums for one UE.
#[derive(Debug, Clone, Copy, Default)]
struct Acc {
    gain: Complex64,
    gain_sq: f64,
    interference: f64,
    cross_link: f64,
    noise: f64,
}

impl Acc {
    fn merge(&mut self, o: &Acc) {
        self.gain += o.gain;
        self.gain_sq += o.gain_sq;
        self.interference += o.interference;
        self.cross_link += o.cross_link;
        self.noise += o.noise;
    }

    fn finish(&self, n: f64) -> UatfTerms {
        let mean = self.gain / n;
        let second = self.gain_sq / n;
        let var = (second - mean.norm_sqr()).max(0.0);
        UatfTerms {
            signal: mean.norm_sqr(),
            gain_uncertainty: var,
            interference: self.interference / n,
            cross_link: self.cross_link / n,
            noise: self.noise / n,
            signal_std_error: (var / n).sqrt(),
        }
    }
}

fn dot(u: &CVec, v: &CVec) -> Complex64 {
    u.dotc(v)
}

fn accumulate_draw(
    sol: &Solution,
    real: &NetworkRealization,
    draw: &ChannelDraw,
    pre: &Precoders,
    dl_acc: &mut [Acc],
    ul_acc: &mut [Acc],
) {
    let (m_count, ku, kd) = (real.num_aps(), real.num_ul(), real.num_dl());
    let sq_d = real.rho_d.sqrt();
    let sq_u = real.rho_u.sqrt();
    let v_dl = |ap: usize, k: usize| &pre.dl[ap * kd + k];
    let u_ul = |ap: usize, l: usize| &pre.ul[ap * ku + l];

    for k in 0..kd {
        let acc = &mut dl_acc[k];
        // Effective gain of every DL stream k' at UE k.
        for kp in 0..kd {
            let mut gain = Complex64::new(0.0, 0.0);
            for ap in 0..m_count {
                if sol.a[ap] && sol.theta[(ap, kp)] > 0.0 {
                    gain += dot(draw.dl(ap, k), v_dl(ap, kp)) * sol.theta[(ap, kp)];
                }
            }
            gain *= sq_d;
            if kp == k {
                acc.gain += gain;
                acc.gain_sq += gain.norm_sqr();
            } else {
                acc.interference += gain.norm_sqr();
            }
        }
        for l in 0..ku {
            acc.cross_link += real.rho_u * sol.varsigma[l] * draw.h_du[(k, l)].norm_sqr();
        }
        acc.noise += 1.0;
    }

    if ku == 0 {
        return;
    }
    // Aggregate DL stream q arriving at UL receiver m: Σ_i a_i θ_iq F_mi v_iq.
    let mut at_ap: Vec<Vec<Option<CVec>>> = vec![vec![None; kd]; m_count];
    for rx in (0..m_count).filter(|&m| sol.b[m]) {
        for q in 0..kd {
            let mut sum: Option<CVec> = None;
            for tx in (0..m_count).filter(|&i| sol.a[i] && sol.theta[(i, q)] > 0.0) {
                let contrib = draw.inter_ap(rx, tx) * v_dl(tx, q) * Complex64::from(sol.theta[(tx, q)]);
                sum = Some(match sum {
                    Some(s) => s + contrib,
                    None => contrib,
                });
            }
            at_ap[rx][q] = sum;
        }
    }
    for l in 0..ku {
        let acc = &mut ul_acc[l];
        for lp in 0..ku {
            let mut gain = Complex64::new(0.0, 0.0);
            for ap in (0..m_count).filter(|&m| sol.b[m]) {
                let alpha = sol.alpha[(ap, l)];
                if alpha > 0.0 {
                    gain += dot(u_ul(ap, l), draw.ul(ap, lp)) * alpha;
                }
            }
            let gain = gain * (sq_u * sol.varsigma[lp].sqrt());
            if lp == l {
                acc.gain += gain;
                acc.gain_sq += gain.norm_sqr();
            } else {
                acc.interference += gain.norm_sqr();
            }
        }
        for q in 0..kd {
            let mut mi = Complex64::new(0.0, 0.0);
            for ap in (0..m_count).filter(|&m| sol.b[m]) {
                let alpha = sol.alpha[(ap, l)];
                if let (true, Some(t)) = (alpha > 0.0, &at_ap[ap][q]) {
                    mi += dot(u_ul(ap, l), t) * alpha;
                }
            }
            acc.cross_link += real.rho_d * mi.norm_sqr();
        }
        // AWGN, averaged analytically given the combiners.
        acc.noise += (0..m_count)
            .filter(|&m| sol.b[m])
            .map(|ap| sol.alpha[(ap, l)].powi(2) * u_ul(ap, l).norm_squared())
            .sum::<f64>();
    }
}

fn run_shard(
    sol: &Solution,
    real: &NetworkRealization,
    grouping: &Grouping,
    antennas: usize,
    draws: usize,
    seed: u64,
    shard: usize,
) -> Result<(Vec<Acc>, Vec<Acc>)> {
    let mut rng = indexed_rng(seed, Stream::SmallScale, shard as u64);
    let mut dl = vec![Acc::default(); real.num_dl()];
    let mut ul = vec![Acc::default(); real.num_ul()];
    for _ in 0..draws {
        let mut attempts = 0;
        loop {
            attempts += 1;
            let draw = sample_draw(real, antennas, &mut rng);
            match build_precoders(&draw, real, grouping) {
                Ok(pre) => {
                    accumulate_draw(sol, real, &draw, &pre, &mut dl, &mut ul);
                    break;
                }
                Err(Error::SingularGram { ap, .. }) if attempts >= MAX_SINGULAR_RETRIES => {
                    return Err(Error::SingularGram { ap, attempts });
                }
                Err(Error::SingularGram { .. }) => continue,
                Err(e) => return Err(e),
            }
        }
    }
    Ok((dl, ul))
}

/// Empirical per-UE SE on both links from `n_draws` independent draws.
pub fn empirical_se(
    sol: &Solution,
    real: &NetworkRealization,
    grouping: &Grouping,
    config: &NetworkConfig,
    n_draws: usize,
    seed: u64,
) -> Result<EmpiricalReport> {
    grouping.validate(config.antennas)?;
    if !sol.shape_matches(real) {
        return Err(Error::Dimension("solution does not match realization".into()));
    }
    let n_draws = n_draws.max(1);
    let shards = SHARDS.min(n_draws);
    let parts: Vec<_> = (0..shards)
        .into_par_iter()
        .map(|s| {
            let draws = n_draws / shards + usize::from(s < n_draws % shards);
            run_shard(sol, real, grouping, config.antennas, draws, seed, s)
        })
        .collect::<Result<_>>()?;
    let mut dl = vec![Acc::default(); real.num_dl()];
    let mut ul = vec![Acc::default(); real.num_ul()];
    for (pd, pu) in &parts {
        dl.iter_mut().zip(pd).for_each(|(a, b)| a.merge(b));
        ul.iter_mut().zip(pu).for_each(|(a, b)| a.merge(b));
    }
    let n = n_draws as f64;
    let prelog = config.prelog();
    let finish = |accs: &[Acc]| {
        let terms: Vec<UatfTerms> = accs.iter().map(|a| a.finish(n)).collect();
        let se = terms.iter().map(|t| se_from_sinr(t.sinr(), prelog)).collect();
        EmpiricalLink { se, terms }
    };
    Ok(EmpiricalReport {
        dl: finish(&dl),
        ul: finish(&ul),
        n_draws,
    })
}

pub fn empirical_dl_se(
    sol: &Solution,
    real: &NetworkRealization,
    grouping: &Grouping,
    config: &NetworkConfig,
    n_draws: usize,
    seed: u64,
) -> Result<EmpiricalLink> {
    Ok(empirical_se(sol, real, grouping, config, n_draws, seed)?.dl)
}

pub fn empirical_ul_se(
    sol: &Solution,
    real: &NetworkRealization,
    grouping: &Grouping,
    config: &NetworkConfig,
    n_draws: usize,
    seed: u64,
) -> Result<EmpiricalLink> {
    Ok(empirical_se(sol, real, grouping, config, n_draws, seed)?.ul)
}
