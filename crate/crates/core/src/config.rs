//! Network configuration and its sectioned text form.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Boltzmann constant in J/K.
pub const BOLTZMANN: f64 = 1.381e-23;

/// Which duplex modes an AP may take.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum DuplexPolicy {
    /// Any of idle, HD-UL, HD-DL or FD.
    #[default]
    #[serde(rename = "NAFD", alias = "nafd")]
    Nafd,
    /// FD is forbidden: `a_m * b_m = 0`.
    #[serde(rename = "HD_ONLY", alias = "hd_only", alias = "hd-only")]
    HdOnly,
}

impl FromStr for DuplexPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "nafd" => Ok(Self::Nafd),
            "hd_only" | "hd" => Ok(Self::HdOnly),
            other => Err(Error::ConfigParse(format!("unknown duplex policy `{other}`"))),
        }
    }
}

/// Parameters of one network deployment.
///
/// Serialized as the `[network]` section of a config file; every key is
/// optional and falls back to the defaults below.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkConfig {
    /// Number of APs.
    #[serde(rename = "M")]
    pub num_aps: usize,
    /// Antennas per AP (transmit and receive chains each).
    #[serde(rename = "N")]
    pub antennas: usize,
    /// Number of UL UEs.
    #[serde(rename = "Ku")]
    pub num_ul: usize,
    /// Number of DL UEs.
    #[serde(rename = "Kd")]
    pub num_dl: usize,
    pub area_side: f64,
    pub ap_height_delta: f64,
    pub bandwidth_hz: f64,
    pub tau_c: usize,
    /// Pilot length; `None` means `Ku + Kd`.
    pub tau_t: Option<usize>,
    pub p_dl_watts: f64,
    pub p_ul_watts: f64,
    pub p_pilot_watts: f64,
    pub noise_figure_db: f64,
    pub temperature_k: f64,
    /// Self-interference-to-noise ratio of an FD AP.
    pub linr_db: f64,
    /// Standard deviation of the log-normal shadowing in dB.
    pub shadowing_std_db: f64,
    pub upsilon_pct: f64,
    pub qos_ul: f64,
    pub qos_dl: f64,
    pub duplex_policy: DuplexPolicy,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            num_aps: 30,
            antennas: 8,
            num_ul: 3,
            num_dl: 3,
            area_side: 500.0,
            ap_height_delta: 10.0,
            bandwidth_hz: 5e7,
            tau_c: 200,
            tau_t: None,
            p_dl_watts: 0.8,
            p_ul_watts: 0.2,
            p_pilot_watts: 0.2,
            noise_figure_db: 9.0,
            temperature_k: 290.0,
            linr_db: 50.0,
            shadowing_std_db: 4.0,
            upsilon_pct: 60.0,
            qos_ul: 0.0,
            qos_dl: 0.0,
            duplex_policy: DuplexPolicy::Nafd,
        }
    }
}

impl NetworkConfig {
    pub fn new(num_aps: usize, antennas: usize, num_ul: usize, num_dl: usize) -> Self {
        Self {
            num_aps,
            antennas,
            num_ul,
            num_dl,
            ..Self::default()
        }
    }

    /// Pilot length in symbols.
    pub fn tau_t(&self) -> usize {
        self.tau_t.unwrap_or(self.num_ul + self.num_dl)
    }

    /// Fraction of the coherence interval that carries payload data.
    pub fn prelog(&self) -> f64 {
        (self.tau_c as f64 - self.tau_t() as f64) / self.tau_c as f64
    }

    /// Thermal noise power `k_B T_0 B F` in watts.
    pub fn noise_power_watts(&self) -> f64 {
        BOLTZMANN * self.temperature_k * self.bandwidth_hz * db_to_linear(self.noise_figure_db)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidConfig(msg));
        if self.num_aps < 1 {
            return fail("M must be at least 1".into());
        }
        if self.antennas < 2 {
            return fail(format!("N must be at least 2, got {}", self.antennas));
        }
        let k = self.num_ul + self.num_dl;
        if self.tau_t() < k {
            return fail(format!(
                "tau_t = {} is shorter than Ku + Kd = {k}; pilots would not be orthogonal",
                self.tau_t()
            ));
        }
        if self.tau_t() < 1 {
            return fail("tau_t must be at least 1".into());
        }
        if self.tau_c <= self.tau_t() {
            return fail(format!("tau_c = {} must exceed tau_t = {}", self.tau_c, self.tau_t()));
        }
        for (name, p) in [
            ("p_dl_watts", self.p_dl_watts),
            ("p_ul_watts", self.p_ul_watts),
            ("p_pilot_watts", self.p_pilot_watts),
            ("bandwidth_hz", self.bandwidth_hz),
            ("temperature_k", self.temperature_k),
            ("area_side", self.area_side),
        ] {
            if !(p > 0.0 && p.is_finite()) {
                return fail(format!("{name} must be positive, got {p}"));
            }
        }
        if !(0.0..=100.0).contains(&self.upsilon_pct) {
            return fail(format!("upsilon_pct must lie in [0, 100], got {}", self.upsilon_pct));
        }
        if self.ap_height_delta < 0.0 || self.shadowing_std_db < 0.0 {
            return fail("height delta and shadowing deviation must be nonnegative".into());
        }
        if self.qos_ul < 0.0 || self.qos_dl < 0.0 {
            return fail("QoS thresholds must be nonnegative".into());
        }
        Ok(())
    }

    /// Parses the `[network]` section of a config document.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Doc {
            #[serde(default)]
            network: NetworkConfig,
        }
        let table: toml::Table = text.parse().map_err(|e| Error::ConfigParse(format!("{e}")))?;
        let doc: Doc = table
            .try_into()
            .map_err(|e: toml::de::Error| Error::ConfigParse(e.to_string()))?;
        doc.network.validate()?;
        Ok(doc.network)
    }

    pub fn to_toml_string(&self) -> String {
        #[derive(Serialize)]
        struct Doc<'a> {
            network: &'a NetworkConfig,
        }
        toml::to_string(&Doc { network: self }).expect("config is always serializable")
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}
