//! Multi-slot service with per-UE QoS relaxation.
//!
//! UE positions stay fixed while shadowing is redrawn every slot. Each
//! slot CHDE serves the cohort of still-waiting UEs; served UEs leave, the
//! rest carry over, and a UE that keeps failing steps down the policy's
//! relaxed thresholds.

use std::path::Path;

use anyhow::Result;
use nafd_core::netgen::{generate_topology, large_scale_realization};
use nafd_core::opt::{evolve, Hyperparams, Problem};
use nafd_core::{Grouping, Link, NetworkConfig, NetworkRealization, ProcessingMode};
use serde::Serialize;

use crate::experiment::{mean_std, write_csv};
use crate::spec::SlotPolicy;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlotRow {
    pub seed: u64,
    pub slot: usize,
    pub link: &'static str,
    pub ue: usize,
    pub qos_in_effect: f64,
    pub se: f64,
    pub served: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleTrace {
    pub seed: u64,
    pub rows: Vec<SlotRow>,
    /// Slots run; equals the slot that served the last UE when `all_served`.
    pub slots_used: usize,
    pub all_served: bool,
    /// Serving slot of every UL UE.
    pub service_ul: Vec<Option<usize>>,
    pub service_dl: Vec<Option<usize>>,
}

impl ScheduleTrace {
    /// Mean serving slot over the UEs that were served.
    pub fn mean_service_slot(&self) -> f64 {
        let slots: Vec<f64> = self
            .service_ul
            .iter()
            .chain(&self.service_dl)
            .flatten()
            .map(|&s| s as f64)
            .collect();
        mean_std(&slots).0
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Waiting {
    level: usize,
    failures: usize,
}

impl Waiting {
    fn fail(&mut self, policy: &SlotPolicy) {
        self.failures += 1;
        if self.failures >= policy.relax_after && self.level + 1 < policy.levels() {
            self.level += 1;
            self.failures = 0;
        }
    }
}

/// Restricts a realization to the listed UEs.
pub fn cohort(real: &NetworkRealization, ul: &[usize], dl: &[usize]) -> NetworkRealization {
    NetworkRealization {
        beta_dl: real.beta_dl.select_columns(dl),
        gamma_dl: real.gamma_dl.select_columns(dl),
        beta_ul: real.beta_ul.select_columns(ul),
        gamma_ul: real.gamma_ul.select_columns(ul),
        beta_du: real.beta_du.select_rows(dl).select_columns(ul),
        ..real.clone()
    }
}

fn slot_seed(seed: u64, slot: usize) -> u64 {
    seed ^ ((slot as u64 + 1) << 40)
}

pub fn multi_slot_schedule(
    config: &NetworkConfig,
    mode: ProcessingMode,
    policy: &SlotPolicy,
    hyper: &Hyperparams,
    n_slots: usize,
    seed: u64,
) -> Result<ScheduleTrace> {
    policy.validate()?;
    config.validate()?;
    let topo = generate_topology(config, seed)?;
    let (ku, kd) = (config.num_ul, config.num_dl);
    let mut wait_ul = vec![Some(Waiting::default()); ku];
    let mut wait_dl = vec![Some(Waiting::default()); kd];
    let mut service_ul = vec![None; ku];
    let mut service_dl = vec![None; kd];
    let mut rows = Vec::new();
    let mut slots_used = 0;
    for slot in 1..=n_slots {
        let ul: Vec<usize> = (0..ku).filter(|&l| wait_ul[l].is_some()).collect();
        let dl: Vec<usize> = (0..kd).filter(|&k| wait_dl[k].is_some()).collect();
        if ul.is_empty() && dl.is_empty() {
            break;
        }
        slots_used = slot;
        let s = slot_seed(seed, slot);
        let full = large_scale_realization(config, &topo, s)?;
        let real = cohort(&full, &ul, &dl);
        let sub_config = NetworkConfig {
            num_ul: ul.len(),
            num_dl: dl.len(),
            tau_t: Some(config.tau_t()),
            ..config.clone()
        };
        let grouping = Grouping::build(mode, &real, &sub_config)?;
        let qos_ul: Vec<f64> = ul.iter().map(|&l| policy.level(wait_ul[l].unwrap().level)).collect();
        let qos_dl: Vec<f64> = dl.iter().map(|&k| policy.level(wait_dl[k].unwrap().level)).collect();
        let problem = Problem::new(sub_config, real, grouping)?.with_qos(qos_ul.clone(), qos_dl.clone())?;
        let eval = evolve(&problem, hyper, s)?.best.eval;

        let mut settle = |link: Link, ues: &[usize], qos: &[f64], se: &[f64], served: &[bool]| {
            for (i, &ue) in ues.iter().enumerate() {
                rows.push(SlotRow {
                    seed,
                    slot,
                    link: link.as_str(),
                    ue,
                    qos_in_effect: qos[i],
                    se: se[i],
                    served: served[i],
                });
                let (wait, service) = match link {
                    Link::Ul => (&mut wait_ul[ue], &mut service_ul[ue]),
                    Link::Dl => (&mut wait_dl[ue], &mut service_dl[ue]),
                };
                if served[i] {
                    *wait = None;
                    *service = Some(slot);
                } else if let Some(w) = wait {
                    w.fail(policy);
                }
            }
        };
        settle(Link::Ul, &ul, &qos_ul, &eval.report.se_ul, &eval.served_ul);
        settle(Link::Dl, &dl, &qos_dl, &eval.report.se_dl, &eval.served_dl);
    }
    let all_served = wait_ul.iter().chain(&wait_dl).all(Option::is_none);
    Ok(ScheduleTrace {
        seed,
        rows,
        slots_used,
        all_served,
        service_ul,
        service_dl,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct TraceSummary {
    seed: u64,
    slots_used: usize,
    all_served: bool,
    unserved: usize,
    mean_service_slot: f64,
}

/// Writes `schedule.csv` (one row per UE and slot) and `slots.csv` (one
/// row per seed).
pub fn write_schedule(dir: &Path, traces: &[ScheduleTrace]) -> Result<()> {
    let rows: Vec<&SlotRow> = traces.iter().flat_map(|t| &t.rows).collect();
    write_csv(&dir.join("schedule.csv"), &rows)?;
    let summary: Vec<TraceSummary> = traces
        .iter()
        .map(|t| TraceSummary {
            seed: t.seed,
            slots_used: t.slots_used,
            all_served: t.all_served,
            unserved: t.service_ul.iter().chain(&t.service_dl).filter(|s| s.is_none()).count(),
            mean_service_slot: t.mean_service_slot(),
        })
        .collect();
    write_csv(&dir.join("slots.csv"), &summary)
}
