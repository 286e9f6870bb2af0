//! Experiment description and the sectioned config file behind it.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use nafd_core::opt::{Hyperparams, Strategy};
use nafd_core::{DuplexPolicy, NetworkConfig, ProcessingMode};
use serde::Deserialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scenario {
    SumSeCompare,
    Convergence,
    Runtime,
    OperatorAblation,
    HdVsNafd,
    ApSweep,
    SePerUe,
    QosSweep,
    MultiSlot,
    UeSweep,
}

impl Scenario {
    pub const ALL: [Scenario; 10] = [
        Scenario::SumSeCompare,
        Scenario::Convergence,
        Scenario::Runtime,
        Scenario::OperatorAblation,
        Scenario::HdVsNafd,
        Scenario::ApSweep,
        Scenario::SePerUe,
        Scenario::QosSweep,
        Scenario::MultiSlot,
        Scenario::UeSweep,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Scenario::SumSeCompare => "SUM_SE_COMPARE",
            Scenario::Convergence => "CONVERGENCE",
            Scenario::Runtime => "RUNTIME",
            Scenario::OperatorAblation => "OPERATOR_ABLATION",
            Scenario::HdVsNafd => "HD_VS_NAFD",
            Scenario::ApSweep => "AP_SWEEP",
            Scenario::SePerUe => "SE_PER_UE",
            Scenario::QosSweep => "QOS_SWEEP",
            Scenario::MultiSlot => "MULTI_SLOT",
            Scenario::UeSweep => "UE_SWEEP",
        }
    }

    /// Sweep axis, values and algorithms used when the config names none.
    pub fn defaults(self) -> (Axis, Vec<f64>, Vec<Algorithm>) {
        use Algorithm::*;
        let compare = vec![Chde, Ga, Pso, RandomNafd];
        let aps = vec![10.0, 30.0, 60.0, 80.0, 120.0];
        match self {
            Scenario::SumSeCompare => (Axis::Aps, aps, compare),
            Scenario::Convergence => (Axis::None, vec![0.0], vec![Chde, Ga, Pso]),
            Scenario::Runtime => (Axis::Aps, vec![10.0, 30.0, 60.0], vec![Chde, Ga, Pso]),
            Scenario::OperatorAblation => (Axis::None, vec![0.0], vec![Chde, DeRand1, DeRand2, DeBest1, DeBest2]),
            Scenario::HdVsNafd => (Axis::Linr, vec![20.0, 50.0], vec![Chde, ChdeHd]),
            Scenario::ApSweep => (Axis::Aps, aps, vec![Chde]),
            Scenario::SePerUe => (Axis::None, vec![0.0], vec![Chde]),
            Scenario::QosSweep => (Axis::Qos, vec![0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0], vec![Chde]),
            Scenario::MultiSlot => (Axis::None, vec![0.0], vec![Chde]),
            Scenario::UeSweep => (Axis::Ues, vec![3.0, 5.0, 10.0], compare),
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scenario {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_uppercase().replace('-', "_");
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.as_str() == norm)
            .with_context(|| format!("unknown scenario {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    Chde,
    DeRand1,
    DeRand2,
    DeBest1,
    DeBest2,
    Ga,
    Pso,
    RandomNafd,
    /// CHDE restricted to half-duplex APs.
    ChdeHd,
}

impl Algorithm {
    pub const ALL: [Algorithm; 9] = [
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

    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Chde => "chde",
            Algorithm::DeRand1 => "de-rand1",
            Algorithm::DeRand2 => "de-rand2",
            Algorithm::DeBest1 => "de-best1",
            Algorithm::DeBest2 => "de-best2",
            Algorithm::Ga => "ga",
            Algorithm::Pso => "pso",
            Algorithm::RandomNafd => "random-nafd",
            Algorithm::ChdeHd => "chde-hd",
        }
    }

    /// DE strategy for the DE family.
    pub fn strategy(self) -> Option<Strategy> {
        match self {
            Algorithm::Chde | Algorithm::ChdeHd => Some(Strategy::CurrentToPbest1),
            Algorithm::DeRand1 => Some(Strategy::Rand1),
            Algorithm::DeRand2 => Some(Strategy::Rand2),
            Algorithm::DeBest1 => Some(Strategy::Best1),
            Algorithm::DeBest2 => Some(Strategy::Best2),
            _ => None,
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase();
        Algorithm::ALL
            .into_iter()
            .find(|a| a.as_str() == norm)
            .with_context(|| format!("unknown algorithm {s:?}"))
    }
}

/// Comma-separated algorithm list as accepted by `--algo`.
pub fn parse_algorithms(list: &str) -> Result<Vec<Algorithm>> {
    let algos = list
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(str::parse)
        .collect::<Result<Vec<_>>>()?;
    if algos.is_empty() {
        bail!("empty algorithm list");
    }
    Ok(algos)
}

/// The network parameter a sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Axis {
    None,
    /// M; with an antenna product set, N = product / M.
    Aps,
    Antennas,
    /// Ku = Kd.
    Ues,
    /// Same threshold on both links.
    Qos,
    Linr,
}

impl Axis {
    pub fn as_str(self) -> &'static str {
        match self {
            Axis::None => "none",
            Axis::Aps => "M",
            Axis::Antennas => "N",
            Axis::Ues => "K",
            Axis::Qos => "qos",
            Axis::Linr => "linr_db",
        }
    }

    pub fn apply(self, base: &NetworkConfig, value: f64, antenna_product: Option<usize>) -> Result<NetworkConfig> {
        let mut c = base.clone();
        let count = || -> Result<usize> {
            if value < 1.0 || value.fract() != 0.0 {
                bail!("{} must be a positive integer, got {value}", self.as_str());
            }
            Ok(value as usize)
        };
        match self {
            Axis::None => {}
            Axis::Aps => {
                c.num_aps = count()?;
                if let Some(p) = antenna_product {
                    if p % c.num_aps != 0 {
                        bail!("M = {} does not divide the antenna product {p}", c.num_aps);
                    }
                    c.antennas = p / c.num_aps;
                }
            }
            Axis::Antennas => c.antennas = count()?,
            Axis::Ues => {
                c.num_ul = count()?;
                c.num_dl = c.num_ul;
            }
            Axis::Qos => {
                c.qos_ul = value;
                c.qos_dl = value;
            }
            Axis::Linr => c.linr_db = value,
        }
        c.validate()?;
        Ok(c)
    }
}

impl FromStr for Axis {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim() {
            "none" | "" => Axis::None,
            "M" | "aps" => Axis::Aps,
            "N" | "antennas" => Axis::Antennas,
            "K" | "ues" => Axis::Ues,
            "qos" => Axis::Qos,
            "linr_db" | "linr" => Axis::Linr,
            other => bail!("unknown sweep axis {other:?}"),
        })
    }
}

/// Multi-slot service policy: after `relax_after` consecutive unserved
/// slots at one level a UE moves to the next relaxed level.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotPolicy {
    pub initial_qos: f64,
    pub relax_after: usize,
    pub relaxed_qos: Vec<f64>,
}

impl SlotPolicy {
    /// Halves the threshold three times, then drops it to zero. A zero
    /// initial threshold has nothing to relax.
    pub fn halving(initial_qos: f64, relax_after: usize) -> Self {
        let relaxed_qos = if initial_qos > 0.0 {
            vec![initial_qos / 2.0, initial_qos / 4.0, initial_qos / 8.0, 0.0]
        } else {
            Vec::new()
        };
        Self {
            initial_qos,
            relax_after,
            relaxed_qos,
        }
    }

    /// Threshold at relaxation level `level` (0 is the initial threshold).
    pub fn level(&self, level: usize) -> f64 {
        if level == 0 || self.relaxed_qos.is_empty() {
            self.initial_qos
        } else {
            self.relaxed_qos[(level - 1).min(self.relaxed_qos.len() - 1)]
        }
    }

    pub fn levels(&self) -> usize {
        1 + self.relaxed_qos.len()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.initial_qos >= 0.0 && self.initial_qos.is_finite()) {
            bail!("initial QoS must be finite and nonnegative");
        }
        if self.relax_after == 0 && !self.relaxed_qos.is_empty() {
            bail!("relax_after must be at least 1");
        }
        let mut prev = self.initial_qos;
        for &q in &self.relaxed_qos {
            if !(q >= 0.0 && q < prev) {
                bail!("relaxed QoS levels must be strictly decreasing and nonnegative");
            }
            prev = q;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationParams {
    pub n_draws: usize,
    pub n_solutions: usize,
    /// Maximum relative error, with errors measured against `max(closed, 0.01)`.
    pub tolerance: f64,
}

impl Default for ValidationParams {
    fn default() -> Self {
        Self {
            n_draws: 20_000,
            n_solutions: 20,
            tolerance: 0.03,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub scenario: Scenario,
    pub network: NetworkConfig,
    pub mode: ProcessingMode,
    pub optimizer: Hyperparams,
    pub axis: Axis,
    pub values: Vec<f64>,
    pub antenna_product: Option<usize>,
    pub n_realizations: usize,
    /// Realization `r` uses seed `seed + r`.
    pub seed: u64,
    pub algorithms: Vec<Algorithm>,
    pub out_dir: PathBuf,
    /// When false every time column is written as 0 so reruns are byte-identical.
    pub record_timing: bool,
    /// Per-generation history files for every run (always on for CONVERGENCE).
    pub write_history: bool,
    pub schedule: SlotPolicy,
    pub n_slots: usize,
    pub validation: ValidationParams,
}

impl ExperimentSpec {
    pub fn new(scenario: Scenario, network: NetworkConfig) -> Self {
        let (axis, values, algorithms) = scenario.defaults();
        let antenna_product = (axis == Axis::Aps).then_some(240);
        Self {
            scenario,
            network,
            mode: ProcessingMode::Pzf,
            optimizer: Hyperparams::default(),
            axis,
            values,
            antenna_product,
            n_realizations: 3,
            seed: 1,
            algorithms,
            out_dir: PathBuf::from("out"),
            record_timing: true,
            write_history: false,
            schedule: SlotPolicy::halving(0.5, 3),
            n_slots: 30,
            validation: ValidationParams::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            bail!("sweep values must be nonempty");
        }
        if self.n_realizations == 0 {
            bail!("n_realizations must be at least 1");
        }
        if self.algorithms.is_empty() {
            bail!("at least one algorithm is required");
        }
        if self.n_slots == 0 {
            bail!("n_slots must be at least 1");
        }
        self.network.validate()?;
        self.optimizer.validate()?;
        self.schedule.validate()
    }

    /// Builds a spec from a config document. `scenario` overrides the
    /// document's `[experiment] scenario`.
    pub fn from_toml_str(text: &str, scenario: Option<Scenario>) -> Result<Self> {
        let network = NetworkConfig::from_toml_str(text)?;
        let doc: Document = toml::from_str(text).context("parsing config")?;
        let scenario = match (scenario, &doc.experiment.scenario) {
            (Some(s), _) => s,
            (None, Some(name)) => name.parse()?,
            (None, None) => Scenario::SumSeCompare,
        };
        let mut spec = Self::new(scenario, network);
        doc.optimizer.apply(&mut spec.optimizer)?;
        let e = doc.experiment;
        if let Some(axis) = e.axis {
            spec.axis = axis.parse()?;
            spec.values = vec![0.0];
            spec.antenna_product = None;
        }
        if let Some(values) = e.values {
            spec.values = values;
        }
        if e.antenna_product.is_some() {
            spec.antenna_product = e.antenna_product.filter(|&p| p > 0);
        }
        if let Some(mode) = e.mode {
            spec.mode = mode.parse()?;
        }
        if let Some(n) = e.n_realizations {
            spec.n_realizations = n;
        }
        if let Some(seed) = e.seed {
            spec.seed = seed;
        }
        if let Some(algos) = e.algorithms {
            spec.algorithms = algos.iter().map(|a| a.parse()).collect::<Result<_>>()?;
        }
        if let Some(out) = e.out_dir {
            spec.out_dir = out;
        }
        if let Some(t) = e.record_timing {
            spec.record_timing = t;
        }
        if let Some(h) = e.write_history {
            spec.write_history = h;
        }
        let s = doc.schedule;
        let initial = s.initial_qos.unwrap_or(spec.schedule.initial_qos);
        let relax_after = s.relax_after.unwrap_or(spec.schedule.relax_after);
        spec.schedule = SlotPolicy::halving(initial, relax_after);
        if let Some(levels) = s.relaxed_qos {
            spec.schedule.relaxed_qos = levels;
        }
        if let Some(n) = s.n_slots {
            spec.n_slots = n;
        }
        let v = doc.validation;
        if let Some(n) = v.n_draws {
            spec.validation.n_draws = n;
        }
        if let Some(n) = v.n_solutions {
            spec.validation.n_solutions = n;
        }
        if let Some(t) = v.tolerance {
            spec.validation.tolerance = t;
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_file(path: &Path, scenario: Option<Scenario>) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml_str(&text, scenario).with_context(|| format!("in {}", path.display()))
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct Document {
    #[serde(default)]
    #[allow(dead_code)]
    network: toml::Table,
    #[serde(default)]
    optimizer: OptimizerSection,
    #[serde(default)]
    experiment: ExperimentSection,
    #[serde(default)]
    schedule: ScheduleSection,
    #[serde(default)]
    validation: ValidationSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct OptimizerSection {
    pop_size: Option<usize>,
    scale_factor: Option<f64>,
    crossover_rate: Option<f64>,
    pbest_fraction: Option<f64>,
    g_max: Option<usize>,
    stall_window: Option<usize>,
    strategy: Option<String>,
}

impl OptimizerSection {
    fn apply(&self, h: &mut Hyperparams) -> Result<()> {
        if let Some(v) = self.pop_size {
            h.pop_size = v;
        }
        if let Some(v) = self.scale_factor {
            h.scale_factor = v;
        }
        if let Some(v) = self.crossover_rate {
            h.crossover_rate = v;
        }
        if let Some(v) = self.pbest_fraction {
            h.pbest_fraction = v;
        }
        if let Some(v) = self.g_max {
            h.g_max = v;
        }
        if let Some(v) = self.stall_window {
            h.stall_window = v;
        }
        if let Some(s) = &self.strategy {
            h.strategy = Strategy::ALL
                .into_iter()
                .find(|st| st.as_str() == s.trim())
                .with_context(|| format!("unknown DE strategy {s:?}"))?;
        }
        Ok(())
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExperimentSection {
    scenario: Option<String>,
    axis: Option<String>,
    values: Option<Vec<f64>>,
    antenna_product: Option<usize>,
    mode: Option<String>,
    n_realizations: Option<usize>,
    seed: Option<u64>,
    algorithms: Option<Vec<String>>,
    out_dir: Option<PathBuf>,
    record_timing: Option<bool>,
    write_history: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScheduleSection {
    initial_qos: Option<f64>,
    relax_after: Option<usize>,
    relaxed_qos: Option<Vec<f64>>,
    n_slots: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ValidationSection {
    n_draws: Option<usize>,
    n_solutions: Option<usize>,
    tolerance: Option<f64>,
}

/// Applies a duplex policy override, used by the HD-only CHDE variant.
pub fn with_policy(config: &NetworkConfig, policy: DuplexPolicy) -> NetworkConfig {
    NetworkConfig {
        duplex_policy: policy,
        ..config.clone()
    }
}
