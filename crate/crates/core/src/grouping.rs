//! Strong/weak UE partitions that drive the partial zero-forcing split.

use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::config::NetworkConfig;
use crate::error::{Error, Result};
use crate::netgen::NetworkRealization;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Link {
    #[serde(rename = "ul")]
    Ul,
    #[serde(rename = "dl")]
    Dl,
}

impl Link {
    pub fn as_str(self) -> &'static str {
        match self {
            Link::Ul => "ul",
            Link::Dl => "dl",
        }
    }
}

impl std::fmt::Display for Link {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Linear processing family applied at every AP.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum ProcessingMode {
    /// Partial zero-forcing driven by the grouping threshold.
    #[default]
    #[serde(rename = "PZF")]
    Pzf,
    /// Maximum ratio only (every UE weak).
    #[serde(rename = "MR")]
    Mr,
    /// Full zero-forcing (every UE strong).
    #[serde(rename = "FZF")]
    Fzf,
}

impl FromStr for ProcessingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "PZF" => Ok(Self::Pzf),
            "MR" => Ok(Self::Mr),
            "FZF" => Ok(Self::Fzf),
            other => Err(Error::ConfigParse(format!("unknown processing mode `{other}`"))),
        }
    }
}

/// Per-AP strong sets for one link. Every UE not in `strong[m]` is weak at AP m.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkGroups {
    strong: Vec<Vec<usize>>,
    member: Vec<Vec<bool>>,
}

impl LinkGroups {
    /// Builds the partition from explicit strong sets over `num_ues` UEs.
    pub fn from_strong_sets(strong: Vec<Vec<usize>>, num_ues: usize) -> Result<Self> {
        let mut member = vec![vec![false; num_ues]; strong.len()];
        for (m, set) in strong.iter().enumerate() {
            for &k in set {
                if k >= num_ues || member[m][k] {
                    return Err(Error::Dimension(format!(
                        "strong set of AP {m} has invalid or repeated UE {k}"
                    )));
                }
                member[m][k] = true;
            }
        }
        Ok(Self { strong, member })
    }

    pub fn all_weak(num_aps: usize, num_ues: usize) -> Self {
        Self {
            strong: vec![Vec::new(); num_aps],
            member: vec![vec![false; num_ues]; num_aps],
        }
    }

    pub fn all_strong(num_aps: usize, num_ues: usize) -> Self {
        Self {
            strong: vec![(0..num_ues).collect(); num_aps],
            member: vec![vec![true; num_ues]; num_aps],
        }
    }

    pub fn num_aps(&self) -> usize {
        self.strong.len()
    }

    pub fn num_ues(&self) -> usize {
        self.member.first().map_or(0, Vec::len)
    }

    /// `S_m`, in decreasing order of gain when built by [`group_ues`].
    pub fn strong(&self, ap: usize) -> &[usize] {
        &self.strong[ap]
    }

    /// `W_m`, in index order.
    pub fn weak(&self, ap: usize) -> Vec<usize> {
        (0..self.num_ues()).filter(|&k| !self.member[ap][k]).collect()
    }

    pub fn is_strong(&self, ap: usize, ue: usize) -> bool {
        self.member[ap][ue]
    }

    pub fn strong_count(&self, ap: usize) -> usize {
        self.strong[ap].len()
    }

    /// `δ_m^{Z_k}`: 1 if AP `ap` zero-forces toward `ue`.
    pub fn delta_z(&self, ap: usize, ue: usize) -> f64 {
        if self.member[ap][ue] {
            1.0
        } else {
            0.0
        }
    }

    /// `δ_m^{T_k}`: 1 if AP `ap` serves `ue` with MR.
    pub fn delta_t(&self, ap: usize, ue: usize) -> f64 {
        1.0 - self.delta_z(ap, ue)
    }

    /// Expected squared norm of the unit-power precoder/combiner divided
    /// by γ: `1/(N - |S_m|)` for ZF, `N` for MR.
    pub fn norm_factor(&self, ap: usize, ue: usize, antennas: usize) -> f64 {
        if self.member[ap][ue] {
            1.0 / (antennas - self.strong[ap].len()) as f64
        } else {
            antennas as f64
        }
    }

    /// Coherent gain weight: 1 for ZF, `N` for MR.
    pub fn gain_weight(&self, ap: usize, ue: usize, antennas: usize) -> f64 {
        if self.member[ap][ue] {
            1.0
        } else {
            antennas as f64
        }
    }

    /// Enforces `|S_m| ≤ N - 1` at every AP.
    pub fn validate(&self, antennas: usize) -> Result<()> {
        for (ap, set) in self.strong.iter().enumerate() {
            if set.len() + 1 > antennas {
                return Err(Error::StrongSetTooLarge {
                    ap,
                    strong: set.len(),
                    antennas,
                    max: antennas.saturating_sub(1),
                });
            }
        }
        Ok(())
    }

    /// Same partition with UE indices relabeled: new index `perm[k]` for old `k`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let strong = self.strong.iter().map(|s| s.iter().map(|&k| perm[k]).collect()).collect();
        Self::from_strong_sets(strong, perm.len()).expect("permutation keeps the partition valid")
    }
}

/// Strong/weak partitions of both links.
#[derive(Debug, Clone, PartialEq)]
pub struct Grouping {
    pub dl: LinkGroups,
    pub ul: LinkGroups,
}

impl Grouping {
    /// Groups both links of `real` with the same processing mode.
    pub fn build(mode: ProcessingMode, real: &NetworkRealization, config: &NetworkConfig) -> Result<Self> {
        Ok(Self {
            dl: specialize_grouping(mode, real, config.antennas, config.upsilon_pct, Link::Dl)?,
            ul: specialize_grouping(mode, real, config.antennas, config.upsilon_pct, Link::Ul)?,
        })
    }

    pub fn link(&self, link: Link) -> &LinkGroups {
        match link {
            Link::Ul => &self.ul,
            Link::Dl => &self.dl,
        }
    }

    pub fn validate(&self, antennas: usize) -> Result<()> {
        self.dl.validate(antennas)?;
        self.ul.validate(antennas)
    }
}

fn gains(real: &NetworkRealization, link: Link) -> &DMatrix<f64> {
    match link {
        Link::Ul => &real.beta_ul,
        Link::Dl => &real.beta_dl,
    }
}

/// Threshold grouping: each AP takes the smallest prefix of its UEs, sorted
/// by decreasing gain, whose share of the AP's total gain reaches
/// `upsilon_pct`, capped at `N - 1` members.
pub fn group_ues(real: &NetworkRealization, upsilon_pct: f64, antennas: usize, link: Link) -> LinkGroups {
    let beta = gains(real, link);
    let (m, k) = beta.shape();
    let target = upsilon_pct / 100.0;
    let cap = antennas.saturating_sub(1);
    let strong = (0..m)
        .map(|ap| {
            let row: Vec<f64> = beta.row(ap).iter().copied().collect();
            let total: f64 = row.iter().sum();
            let mut order: Vec<usize> = (0..k).collect();
            order.sort_by(|&a, &b| row[b].total_cmp(&row[a]));
            let mut take = 0;
            if target > 0.0 && total > 0.0 {
                let mut cum = 0.0;
                for &ue in &order {
                    cum += row[ue];
                    take += 1;
                    if cum / total >= target - 1e-12 {
                        break;
                    }
                }
            }
            order.truncate(take.min(cap));
            order
        })
        .collect();
    LinkGroups::from_strong_sets(strong, k).expect("sorted prefix is a valid strong set")
}

/// Grouping for a processing family; PZF defers to [`group_ues`].
pub fn specialize_grouping(
    mode: ProcessingMode,
    real: &NetworkRealization,
    antennas: usize,
    upsilon_pct: f64,
    link: Link,
) -> Result<LinkGroups> {
    let (m, k) = gains(real, link).shape();
    match mode {
        ProcessingMode::Mr => Ok(LinkGroups::all_weak(m, k)),
        ProcessingMode::Fzf => {
            if antennas <= k {
                return Err(Error::ZeroForcingInfeasible { antennas, ues: k });
            }
            Ok(LinkGroups::all_strong(m, k))
        }
        ProcessingMode::Pzf => Ok(group_ues(real, upsilon_pct, antennas, link)),
    }
}
