//! Use-case link budgets and the scenarios built on them.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::channel::{ArrayGeometry, ClusterParams};
use crate::error::{Error, Result};
use crate::linalg::{db_to_lin, lin_to_db};

/// Transmit power that receiver noise is referenced to.
pub const REFERENCE_DBM: f64 = 46.0;

/// Thermal noise density at room temperature.
pub const THERMAL_FLOOR_DBM_HZ: f64 = -174.0;

/// Transmit power in the reference frame (`1.0` at 46 dBm).
pub fn dbm_to_relative(dbm: f64) -> f64 {
    db_to_lin(dbm - REFERENCE_DBM)
}

pub fn relative_to_dbm(p: f64) -> f64 {
    lin_to_db(p) + REFERENCE_DBM
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkBudget {
    pub name: String,
    pub carrier_ghz: f64,
    pub bandwidth_mhz: f64,
    pub distance_m: f64,
    pub tx_power_dbm: f64,
    pub tx_ant_gain_dbi: f64,
    pub pathloss_db: f64,
    pub other_loss_db: f64,
    pub rx_gain_db: f64,
    /// Receiver noise including noise figure.
    pub rx_noise_dbm: f64,
    pub se_target_bps_hz: f64,
    pub allowed_stream_counts: Vec<usize>,
}

impl LinkBudget {
    pub fn validate(&self) -> Result<()> {
        if !(self.bandwidth_mhz > 0.0) {
            return Err(Error::InvalidArgument(format!("{}: bandwidth must be positive", self.name)));
        }
        if !(self.pathloss_db >= 0.0) {
            return Err(Error::InvalidArgument(format!("{}: pathloss must be nonnegative", self.name)));
        }
        if !(self.se_target_bps_hz > 0.0) {
            return Err(Error::InvalidArgument(format!("{}: SE target must be positive", self.name)));
        }
        Ok(())
    }

    /// Receiver noise relative to a 46 dBm transmitter.
    pub fn sigma2_rx(&self) -> f64 {
        db_to_lin(-snr_pre_beamforming(self))
    }

    pub fn bandwidth_ghz(&self) -> f64 {
        self.bandwidth_mhz * 1e-3
    }
}

/// Link SNR before transmit-array gain, in dB.
pub fn snr_pre_beamforming(b: &LinkBudget) -> f64 {
    b.tx_power_dbm + b.tx_ant_gain_dbi - b.pathloss_db - b.other_loss_db + b.rx_gain_db - b.rx_noise_dbm
}

/// Per-user SINR that delivers `se_bps_hz` over `u` equal streams, in dB.
pub fn sinr_target(se_bps_hz: f64, u: usize) -> f64 {
    lin_to_db(2f64.powf(se_bps_hz / u as f64) - 1.0)
}

/// Receiver noise power in dBm.
pub fn rx_noise_dbm(bandwidth_mhz: f64, nf_db: f64) -> f64 {
    THERMAL_FLOOR_DBM_HZ + lin_to_db(bandwidth_mhz * 1e6) + nf_db
}

/// Free-space pathloss in dB. Not used by the shipped scenarios, which
/// store their pathloss directly; offered for building new ones.
pub fn free_space_pathloss_db(carrier_ghz: f64, distance_m: f64) -> f64 {
    let wavelength = 299_792_458.0 / (carrier_ghz * 1e9);
    20.0 * (4.0 * std::f64::consts::PI * distance_m / wavelength).log10()
}

/// A use case: link budget plus the propagation and receiver it assumes.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub budget: LinkBudget,
    pub channel_model: String,
    pub receiver: ArrayGeometry,
    pub clusters: ClusterParams,
    pub los: bool,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    name: String,
    #[serde(default)]
    channel_model: String,
    carrier_ghz: f64,
    bandwidth_mhz: f64,
    distance_m: f64,
    tx_power_dbm: f64,
    tx_ant_gain_dbi: f64,
    pathloss_db: f64,
    other_loss_db: f64,
    rx_gain_db: f64,
    #[serde(default)]
    rx_nf_db: Option<f64>,
    #[serde(default)]
    rx_noise_dbm: Option<f64>,
    se_target_bps_hz: f64,
    allowed_stream_counts: Vec<usize>,
    los: bool,
    receiver: ArrayGeometry,
    #[serde(default)]
    clusters: ClusterParams,
}

impl Scenario {
    pub fn from_toml_str(text: &str, origin: &Path) -> Result<Self> {
        let config_err = |message: String| Error::Config {
            path: origin.to_path_buf(),
            message,
        };
        let f: ScenarioFile = toml::from_str(text).map_err(|e| config_err(e.to_string()))?;
        let rx_noise = match (f.rx_noise_dbm, f.rx_nf_db) {
            (Some(n), _) => n,
            (None, Some(nf)) => rx_noise_dbm(f.bandwidth_mhz, nf),
            (None, None) => return Err(config_err("either rx_noise_dbm or rx_nf_db is required".into())),
        };
        let budget = LinkBudget {
            name: f.name,
            carrier_ghz: f.carrier_ghz,
            bandwidth_mhz: f.bandwidth_mhz,
            distance_m: f.distance_m,
            tx_power_dbm: f.tx_power_dbm,
            tx_ant_gain_dbi: f.tx_ant_gain_dbi,
            pathloss_db: f.pathloss_db,
            other_loss_db: f.other_loss_db,
            rx_gain_db: f.rx_gain_db,
            rx_noise_dbm: rx_noise,
            se_target_bps_hz: f.se_target_bps_hz,
            allowed_stream_counts: f.allowed_stream_counts,
        };
        let check = |r: Result<()>| r.map_err(|e| config_err(e.to_string()));
        check(budget.validate())?;
        check(f.receiver.validate())?;
        check(f.clusters.validate())?;
        Ok(Self {
            budget,
            channel_model: f.channel_model,
            receiver: f.receiver,
            clusters: f.clusters,
            los: f.los,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        Self::from_toml_str(&text, path)
    }

    /// Looks up a shipped scenario by short name or display name.
    pub fn builtin(name: &str) -> Option<Self> {
        let key = name.to_ascii_lowercase();
        BUILTIN
            .iter()
            .find(|(short, text)| {
                *short == key || {
                    let s = Self::from_toml_str(text, Path::new(short)).expect("shipped scenario parses");
                    s.budget.name.to_ascii_lowercase() == key
                }
            })
            .map(|(short, text)| Self::from_toml_str(text, Path::new(short)).expect("shipped scenario parses"))
    }

    /// Shipped scenarios in table order.
    pub fn builtins() -> Vec<Self> {
        BUILTIN
            .iter()
            .map(|(short, text)| Self::from_toml_str(text, Path::new(short)).expect("shipped scenario parses"))
            .collect()
    }

    /// Loads `spec` as a file path if it exists, otherwise as a shipped name.
    pub fn resolve(spec: &str) -> Result<Self> {
        let path = Path::new(spec);
        if path.exists() {
            return Self::load(path);
        }
        Self::builtin(spec).ok_or_else(|| Error::Config {
            path: path.to_path_buf(),
            message: format!(
                "no such file or shipped scenario (known: {})",
                BUILTIN.iter().map(|(s, _)| *s).collect::<Vec<_>>().join(", ")
            ),
        })
    }

    pub fn sigma2_rx(&self) -> f64 {
        self.budget.sigma2_rx()
    }
}

const BUILTIN: [(&str, &str); 3] = [
    ("dense_urban_mbb", include_str!("../scenarios/dense_urban_mbb.toml")),
    ("everywhere_50mbps", include_str!("../scenarios/everywhere_50mbps.toml")),
    ("self_backhauling", include_str!("../scenarios/self_backhauling.toml")),
];
