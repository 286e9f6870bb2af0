//! Network drops: wrap-around geometry, large-scale fading and MMSE
//! estimate variances.
//!
//! All gains are stored divided by the noise power, so that a transmit
//! power in watts times a stored gain is directly an SNR and the unit
//! noise term of the SINR expressions holds as written.

use std::io::{self, Write};

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::config::{db_to_linear, NetworkConfig};
use crate::error::{Error, Result};
use crate::rng::{child_rng, Stream};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }
}

/// Positions of one drop, in meters on the `[0, side)²` torus.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    pub ap_positions: Vec<Point>,
    pub ul_ue_positions: Vec<Point>,
    pub dl_ue_positions: Vec<Point>,
}

/// Large-scale statistics of one drop.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkRealization {
    /// AP→DL-UE gains, `M × Kd`.
    pub beta_dl: DMatrix<f64>,
    /// AP→UL-UE gains, `M × Ku`.
    pub beta_ul: DMatrix<f64>,
    /// UL-UE→DL-UE cross-link gains, `Kd × Ku`.
    pub beta_du: DMatrix<f64>,
    /// Inter-AP gains, `M × M`; the diagonal holds the SI variance.
    pub beta_ap: DMatrix<f64>,
    pub gamma_dl: DMatrix<f64>,
    pub gamma_ul: DMatrix<f64>,
    /// Maximum AP transmit power.
    pub rho_d: f64,
    /// Maximum UL UE transmit power.
    pub rho_u: f64,
    /// Pilot power.
    pub rho_t: f64,
}

impl NetworkRealization {
    pub fn num_aps(&self) -> usize {
        self.beta_dl.nrows()
    }

    pub fn num_dl(&self) -> usize {
        self.beta_dl.ncols()
    }

    pub fn num_ul(&self) -> usize {
        self.beta_ul.ncols()
    }

    /// Topology plus realization from one master seed.
    pub fn draw(config: &NetworkConfig, seed: u64) -> Result<(Topology, Self)> {
        let topo = generate_topology(config, seed)?;
        let real = large_scale_realization(config, &topo, seed)?;
        Ok((topo, real))
    }

    /// Builds a realization from given gains, deriving γ from the pilot
    /// parameters.
    pub fn from_gains(
        beta_dl: DMatrix<f64>,
        beta_ul: DMatrix<f64>,
        beta_du: DMatrix<f64>,
        beta_ap: DMatrix<f64>,
        powers: (f64, f64, f64),
        tau_t: usize,
    ) -> Self {
        let (rho_d, rho_u, rho_t) = powers;
        let gamma_dl = beta_dl.map(|b| mmse_gamma(b, tau_t, rho_t));
        let gamma_ul = beta_ul.map(|b| mmse_gamma(b, tau_t, rho_t));
        Self {
            beta_dl,
            beta_ul,
            beta_du,
            beta_ap,
            gamma_dl,
            gamma_ul,
            rho_d,
            rho_u,
            rho_t,
        }
    }

    /// Checks that matrix shapes agree with `config`.
    pub fn check_shape(&self, config: &NetworkConfig) -> Result<()> {
        let (m, ku, kd) = (config.num_aps, config.num_ul, config.num_dl);
        let ok = self.beta_dl.shape() == (m, kd)
            && self.gamma_dl.shape() == (m, kd)
            && self.beta_ul.shape() == (m, ku)
            && self.gamma_ul.shape() == (m, ku)
            && self.beta_du.shape() == (kd, ku)
            && self.beta_ap.shape() == (m, m);
        if ok {
            Ok(())
        } else {
            Err(Error::Dimension(format!(
                "realization does not match M = {m}, Ku = {ku}, Kd = {kd}"
            )))
        }
    }

    /// Writes every matrix as `<name>.csv` into `dir`.
    pub fn write_csv_dir(&self, dir: &std::path::Path) -> io::Result<()> {
        let mats = [
            ("beta_dl", &self.beta_dl),
            ("beta_ul", &self.beta_ul),
            ("beta_du", &self.beta_du),
            ("beta_ap", &self.beta_ap),
            ("gamma_dl", &self.gamma_dl),
            ("gamma_ul", &self.gamma_ul),
        ];
        for (name, mat) in mats {
            let file = std::fs::File::create(dir.join(format!("{name}.csv")))?;
            write_matrix_csv(io::BufWriter::new(file), mat)?;
        }
        let file = std::fs::File::create(dir.join("powers.csv"))?;
        let mut w = io::BufWriter::new(file);
        writeln!(w, "name,value")?;
        for (name, v) in [("rho_d", self.rho_d), ("rho_u", self.rho_u), ("rho_t", self.rho_t)] {
            writeln!(w, "{name},{v:.16e}")?;
        }
        Ok(())
    }
}

/// Uniform i.i.d. positions on the square.
pub fn generate_topology(config: &NetworkConfig, seed: u64) -> Result<Topology> {
    config.validate()?;
    let mut rng = child_rng(seed, Stream::Topology);
    let side = config.area_side;
    let mut draw = |n: usize| -> Vec<Point> {
        (0..n)
            .map(|_| Point::new(rng.random_range(0.0..side), rng.random_range(0.0..side)))
            .collect()
    };
    let ap_positions = draw(config.num_aps);
    let ul_ue_positions = draw(config.num_ul);
    let dl_ue_positions = draw(config.num_dl);
    Ok(Topology {
        ap_positions,
        ul_ue_positions,
        dl_ue_positions,
    })
}

/// Shortest 3-D distance between `p` and `q` over the wrapped square.
pub fn wrap_distance(p: Point, q: Point, side: f64, height_delta: f64) -> f64 {
    let fold = |d: f64| {
        let d = d.abs() % side;
        d.min(side - d)
    };
    let dx = fold(p.x - q.x);
    let dy = fold(p.y - q.y);
    (dx * dx + dy * dy + height_delta * height_delta).sqrt()
}

/// Path loss in dB for a distance in meters.
pub fn path_loss_db(d: f64) -> Result<f64> {
    if !(d > 0.0) {
        return Err(Error::NonPositiveDistance(d));
    }
    Ok(-30.5 - 36.7 * d.log10())
}

pub fn noise_power_watts(config: &NetworkConfig) -> f64 {
    config.noise_power_watts()
}

/// Per-antenna variance of the MMSE channel estimate.
pub fn mmse_gamma(beta: f64, tau_t: usize, rho_t: f64) -> f64 {
    let snr = tau_t as f64 * rho_t * beta;
    snr * beta / (snr + 1.0)
}

/// Path loss with log-normal shadowing for every link, noise-normalized.
pub fn large_scale_realization(
    config: &NetworkConfig,
    topo: &Topology,
    seed: u64,
) -> Result<NetworkRealization> {
    config.validate()?;
    let (m, ku, kd) = (config.num_aps, config.num_ul, config.num_dl);
    if topo.ap_positions.len() != m || topo.ul_ue_positions.len() != ku || topo.dl_ue_positions.len() != kd {
        return Err(Error::Dimension("topology does not match config".into()));
    }
    let noise = config.noise_power_watts();
    let side = config.area_side;
    let h = config.ap_height_delta;
    let mut rng = child_rng(seed, Stream::Shadowing);
    let shadow = Normal::new(0.0, config.shadowing_std_db).expect("std is validated nonnegative");
    let gain = |d: f64, rng: &mut crate::rng::Rng| -> Result<f64> {
        let db = path_loss_db(d)? + shadow.sample(rng);
        Ok(db_to_linear(db) / noise)
    };

    let mut beta_dl = DMatrix::zeros(m, kd);
    let mut beta_ul = DMatrix::zeros(m, ku);
    for a in 0..m {
        let ap = topo.ap_positions[a];
        for k in 0..kd {
            beta_dl[(a, k)] = gain(wrap_distance(ap, topo.dl_ue_positions[k], side, h), &mut rng)?;
        }
        for l in 0..ku {
            beta_ul[(a, l)] = gain(wrap_distance(ap, topo.ul_ue_positions[l], side, h), &mut rng)?;
        }
    }
    // UEs sit at ground level; the model is referenced to 1 m.
    let mut beta_du = DMatrix::zeros(kd, ku);
    for k in 0..kd {
        for l in 0..ku {
            let d = wrap_distance(topo.dl_ue_positions[k], topo.ul_ue_positions[l], side, 0.0);
            beta_du[(k, l)] = gain(d.max(1.0), &mut rng)?;
        }
    }
    let mut beta_ap = DMatrix::zeros(m, m);
    for a in 0..m {
        beta_ap[(a, a)] = db_to_linear(config.linr_db);
        for i in (a + 1)..m {
            let g = gain(wrap_distance(topo.ap_positions[a], topo.ap_positions[i], side, h), &mut rng)?;
            beta_ap[(a, i)] = g;
            beta_ap[(i, a)] = g;
        }
    }
    Ok(NetworkRealization::from_gains(
        beta_dl,
        beta_ul,
        beta_du,
        beta_ap,
        (config.p_dl_watts, config.p_ul_watts, config.p_pilot_watts),
        config.tau_t(),
    ))
}

/// Writes a matrix as CSV rows with 17 significant digits.
pub fn write_matrix_csv<W: Write>(mut w: W, mat: &DMatrix<f64>) -> io::Result<()> {
    for r in 0..mat.nrows() {
        let row: Vec<String> = (0..mat.ncols()).map(|c| format!("{:.16e}", mat[(r, c)])).collect();
        writeln!(w, "{}", row.join(","))?;
    }
    w.flush()
}

/// Writes positions as `kind,index,x,y` rows.
pub fn write_topology_csv<W: Write>(mut w: W, topo: &Topology) -> io::Result<()> {
    writeln!(w, "kind,index,x,y")?;
    let groups = [
        ("ap", &topo.ap_positions),
        ("ul_ue", &topo.ul_ue_positions),
        ("dl_ue", &topo.dl_ue_positions),
    ];
    for (kind, pts) in groups {
        for (i, p) in pts.iter().enumerate() {
            writeln!(w, "{kind},{i},{:.16e},{:.16e}", p.x, p.y)?;
        }
    }
    w.flush()
}
