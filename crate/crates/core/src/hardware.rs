//! Power and silicon-area models of the transmitter circuit blocks.
//!
//! Block counts follow the per-architecture component table; unit powers
//! are survey figures collected in a [`ComponentLibrary`].

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::dbm_to_watts;
use crate::precoding::{Architecture, ArrayDesign};

/// Unit powers, areas and distribution constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ComponentLibrary {
    /// Baseband energy efficiency, GOPS/mW.
    pub fom_dsp_gops_per_mw: f64,
    /// Baseband area efficiency, GOPS/mm².
    pub fom_dsp_area_gops_per_mm2: f64,
    pub fom_serdes_mw_per_gbps: f64,
    /// DAC energy per conversion step, pJ.
    pub fom_dac_pj: f64,
    /// Oversampled sample rate, GS/s.
    pub bw_os_gsps: f64,
    /// Floor on the ENOB used for sizing converters and links.
    pub min_enob: u32,
    pub p_buffer_mw: f64,
    /// VCO plus mixer.
    pub p_lo_mw: f64,
    pub p_ps_mw: f64,
    pub p_amp_mw: f64,
    pub eta_pa: f64,
    pub area_serdes_mm2: f64,
    pub area_dac_mm2: f64,
    pub area_lo_mixer_mm2: f64,
    pub area_ps_mm2: f64,
    pub area_wilkinson_mm2: f64,
    pub area_rf_amp_mm2: f64,
    /// Antennas per DA module.
    pub k_da: usize,
    /// Antennas per SA module.
    pub k_sa: usize,
    pub distribution: DistributionParams,
}

impl Default for ComponentLibrary {
    fn default() -> Self {
        Self {
            fom_dsp_gops_per_mw: 13.0,
            fom_dsp_area_gops_per_mm2: 500.0,
            fom_serdes_mw_per_gbps: 10.0,
            fom_dac_pj: 0.08,
            bw_os_gsps: 1.7,
            min_enob: 5,
            p_buffer_mw: 10.0,
            p_lo_mw: 70.0,
            p_ps_mw: 10.0,
            p_amp_mw: 40.0,
            eta_pa: 0.185,
            area_serdes_mm2: 1.21,
            area_dac_mm2: 0.05,
            area_lo_mixer_mm2: 0.18,
            area_ps_mm2: 0.05,
            area_wilkinson_mm2: 0.04,
            area_rf_amp_mm2: 0.025,
            k_da: 8,
            k_sa: 16,
            distribution: DistributionParams::default(),
        }
    }
}

/// RF distribution levels and losses, dBm and dB.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DistributionParams {
    pub mixer_out_dbm: f64,
    pub pa_input_dbm: f64,
    pub amp_gain_db: f64,
    /// Highest level any amplifier may drive.
    pub amp_ceiling_dbm: f64,
    /// Lowest level the chain may drop to before an amplifier is inserted.
    pub floor_dbm: f64,
    pub ps_gain_db: f64,
    pub wilkinson_stage_db: f64,
    pub interposer_db: f64,
    pub pcb_db_per_inch: f64,
    pub pcb_inches: f64,
    pub line_db_per_mm: f64,
    /// On-chip route length in an SA module.
    pub sa_route_mm: f64,
    /// On-chip route length across the FH phase-shifter matrix.
    pub fh_route_mm: f64,
}

impl Default for DistributionParams {
    fn default() -> Self {
        Self {
            mixer_out_dbm: -6.0,
            pa_input_dbm: 5.0,
            amp_gain_db: 15.0,
            amp_ceiling_dbm: 5.0,
            floor_dbm: -15.0,
            ps_gain_db: 2.0,
            wilkinson_stage_db: 4.0,
            interposer_db: 1.5,
            pcb_db_per_inch: 1.25,
            pcb_inches: 1.0,
            line_db_per_mm: 0.6,
            sa_route_mm: 1.5,
            fh_route_mm: 6.0,
        }
    }
}

impl ComponentLibrary {
    pub fn from_toml_str(text: &str, origin: &Path) -> Result<Self> {
        let lib: Self = toml::from_str(text).map_err(|e| Error::Config {
            path: origin.to_path_buf(),
            message: e.to_string(),
        })?;
        lib.validate().map_err(|e| Error::Config {
            path: origin.to_path_buf(),
            message: e.to_string(),
        })?;
        Ok(lib)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        Self::from_toml_str(&text, path)
    }

    /// The shipped library file, identical to `Default`.
    pub fn shipped_toml() -> &'static str {
        include_str!("../components/default.toml")
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("fom_dsp_gops_per_mw", self.fom_dsp_gops_per_mw),
            ("fom_dsp_area_gops_per_mm2", self.fom_dsp_area_gops_per_mm2),
            ("fom_serdes_mw_per_gbps", self.fom_serdes_mw_per_gbps),
            ("fom_dac_pj", self.fom_dac_pj),
            ("bw_os_gsps", self.bw_os_gsps),
            ("p_buffer_mw", self.p_buffer_mw),
            ("p_lo_mw", self.p_lo_mw),
            ("p_ps_mw", self.p_ps_mw),
            ("p_amp_mw", self.p_amp_mw),
            ("eta_pa", self.eta_pa),
            ("area_serdes_mm2", self.area_serdes_mm2),
            ("area_dac_mm2", self.area_dac_mm2),
            ("area_lo_mixer_mm2", self.area_lo_mixer_mm2),
            ("area_ps_mm2", self.area_ps_mm2),
            ("area_wilkinson_mm2", self.area_wilkinson_mm2),
            ("area_rf_amp_mm2", self.area_rf_amp_mm2),
            ("distribution.amp_gain_db", self.distribution.amp_gain_db),
            ("distribution.wilkinson_stage_db", self.distribution.wilkinson_stage_db),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")));
            }
        }
        if self.eta_pa > 1.0 {
            return Err(Error::InvalidArgument("eta_pa cannot exceed 1".into()));
        }
        if self.k_da == 0 || self.k_sa == 0 {
            return Err(Error::InvalidArgument("module sizes must be positive".into()));
        }
        let d = &self.distribution;
        if d.floor_dbm >= d.amp_ceiling_dbm {
            return Err(Error::InvalidArgument("distribution floor must sit below the amplifier ceiling".into()));
        }
        for (name, v) in [
            ("interposer_db", d.interposer_db),
            ("pcb_db_per_inch", d.pcb_db_per_inch),
            ("pcb_inches", d.pcb_inches),
            ("line_db_per_mm", d.line_db_per_mm),
            ("sa_route_mm", d.sa_route_mm),
            ("fh_route_mm", d.fh_route_mm),
        ] {
            if !(v >= 0.0) {
                return Err(Error::InvalidArgument(format!("distribution.{name} must be nonnegative")));
            }
        }
        Ok(())
    }

    /// Library with the baseband efficiency given in mW/GOPS.
    pub fn with_dsp_mw_per_gops(mut self, mw_per_gops: f64) -> Self {
        self.fom_dsp_gops_per_mw = 1.0 / mw_per_gops;
        self
    }
}

/// Baseband operations rate in GOPS.
pub fn precoding_gops(u: usize, m: usize, bw_ghz: f64) -> f64 {
    (6 * u * m + 72 * m) as f64 * bw_ghz
}

/// Baseband precoding power in W.
pub fn precoding_power(u: usize, m: usize, bw_ghz: f64, lib: &ComponentLibrary) -> f64 {
    precoding_gops(u, m, bw_ghz) / lib.fom_dsp_gops_per_mw * 1e-3
}

/// Aggregate SerDes power in W.
pub fn serdes_power(enob: u32, u: usize, lib: &ComponentLibrary) -> f64 {
    lib.fom_serdes_mw_per_gbps * lib.bw_os_gsps * enob as f64 * u as f64 * 1e-3
}

/// Power of one DAC, buffer included, in W.
pub fn dac_power(enob: u32, lib: &ComponentLibrary) -> f64 {
    let conversion_mw = lib.fom_dac_pj * 2f64.powi(enob as i32) * lib.bw_os_gsps;
    (conversion_mw + lib.p_buffer_mw) * 1e-3
}

/// DC power of one of `n` PAs sharing `p_out_watts`.
pub fn pa_power(p_out_watts: f64, n: usize, lib: &ComponentLibrary) -> f64 {
    p_out_watts / (n as f64 * lib.eta_pa)
}

/// Average efficiency of a Doherty PA driven by a Rayleigh envelope.
///
/// PAE is flat at `pae_max` down to half the peak magnitude and falls
/// linearly below it. `backoff_db` places the mean magnitude below the peak.
pub fn doherty_efficiency(pae_max: f64, backoff_db: f64) -> f64 {
    let mean_mag = 10f64.powf(-backoff_db / 20.0);
    let sigma = mean_mag / (std::f64::consts::PI / 2.0).sqrt();
    let c = 0.5;
    let tail = (-c * c / (2.0 * sigma * sigma)).exp();
    // 2 ∫_0^c a f(a) da for the Rayleigh pdf f, integrated by parts.
    let body = 2.0
        * (-c * tail
            + sigma * (std::f64::consts::PI / 2.0).sqrt() * libm::erf(c / (sigma * std::f64::consts::SQRT_2)));
    pae_max * (tail + body)
}

/// ENOB handed to the power models: the requirement rounded up, never below the floor.
pub fn power_enob(required: f64, lib: &ComponentLibrary) -> u32 {
    let bits = if required.is_finite() { required.ceil().max(0.0) as u32 } else { 0 };
    bits.max(lib.min_enob)
}

/// Canonical design for an architecture at `n` antennas and `u` streams.
///
/// SA uses modules of `k_sa` antennas unless that leaves fewer RF chains
/// than streams, in which case it drops to one chain per stream. FH
/// powers exactly `u` chains.
pub fn design_for(arch: Architecture, n: usize, u: usize, lib: &ComponentLibrary) -> Result<ArrayDesign> {
    let d = match arch {
        Architecture::Da => ArrayDesign::da(n, u),
        Architecture::Sa => {
            if n % lib.k_sa == 0 && n / lib.k_sa >= u {
                ArrayDesign::sa(n, n / lib.k_sa, u)
            } else if u > 0 && n % u == 0 {
                ArrayDesign::sa(n, u, u)
            } else {
                return Err(Error::InvalidDesign(format!("SA cannot split {n} antennas over {u} chains")));
            }
        }
        Architecture::Fh => ArrayDesign::fh(n, u, u),
    };
    d.validate()?;
    Ok(d)
}

/// Circuit blocks in the breakdown.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Block {
    Precoding,
    Serdes,
    Dac,
    LoMixer,
    Ps,
    Wilkinson,
    RfAmpComp,
    RfAmpPredriver,
    Pa,
}

impl Block {
    pub const ALL: [Block; 9] = [
        Block::Precoding,
        Block::Serdes,
        Block::Dac,
        Block::LoMixer,
        Block::Ps,
        Block::Wilkinson,
        Block::RfAmpComp,
        Block::RfAmpPredriver,
        Block::Pa,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Block::Precoding => "precoding",
            Block::Serdes => "serdes",
            Block::Dac => "dac",
            Block::LoMixer => "lo_mixer",
            Block::Ps => "ps",
            Block::Wilkinson => "wilkinson",
            Block::RfAmpComp => "rf_amp_comp",
            Block::RfAmpPredriver => "rf_amp_predriver",
            Block::Pa => "pa",
        }
    }
}

impl fmt::Display for Block {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

/// Number of each block in one array.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ComponentCounts {
    pub precoding: usize,
    pub serdes: usize,
    pub dac: usize,
    pub lo_mixer: usize,
    pub ps: usize,
    pub wilkinson: usize,
    pub rf_amp_comp: usize,
    pub rf_amp_predriver: usize,
    pub pa: usize,
}

impl ComponentCounts {
    pub fn get(&self, block: Block) -> usize {
        match block {
            Block::Precoding => self.precoding,
            Block::Serdes => self.serdes,
            Block::Dac => self.dac,
            Block::LoMixer => self.lo_mixer,
            Block::Ps => self.ps,
            Block::Wilkinson => self.wilkinson,
            Block::RfAmpComp => self.rf_amp_comp,
            Block::RfAmpPredriver => self.rf_amp_predriver,
            Block::Pa => self.pa,
        }
    }
}

/// Block counts. `k` is the SA module size and is ignored otherwise.
pub fn component_counts(arch: Architecture, n: usize, u: usize, k: usize, lib: &ComponentLibrary) -> Result<ComponentCounts> {
    if n == 0 || u == 0 {
        return Err(Error::InvalidDesign(format!("need N, U >= 1, got N={n} U={u}")));
    }
    let c = match arch {
        Architecture::Da => ComponentCounts {
            precoding: 1,
            serdes: n.div_ceil(lib.k_da),
            dac: n,
            lo_mixer: n,
            ps: 0,
            wilkinson: n,
            rf_amp_comp: 0,
            rf_amp_predriver: n,
            pa: n,
        },
        Architecture::Sa => {
            if k == 0 || n % k != 0 {
                return Err(Error::InvalidDesign(format!("SA module of {k} antennas does not divide N={n}")));
            }
            ComponentCounts {
                precoding: 1,
                serdes: n / k,
                dac: n / k,
                lo_mixer: n / k,
                ps: n,
                wilkinson: n - n / k,
                rf_amp_comp: n.div_ceil(4),
                rf_amp_predriver: n,
                pa: n,
            }
        }
        Architecture::Fh => ComponentCounts {
            precoding: 1,
            serdes: 0,
            dac: u,
            lo_mixer: u,
            ps: u * n,
            wilkinson: 2 * n * u - n - u,
            rf_amp_comp: (2 * u * n).div_ceil(3),
            rf_amp_predriver: n,
            pa: n,
        },
    };
    Ok(c)
}

/// Width of the digital precoder as it enters the power model.
fn precoder_width(design: &ArrayDesign) -> usize {
    match design.architecture {
        Architecture::Da => design.n,
        Architecture::Sa => design.m,
        Architecture::Fh => design.u,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockCost {
    pub block: Block,
    pub count: usize,
    pub unit_w: f64,
    pub total_w: f64,
    pub unit_mm2: f64,
    pub total_mm2: f64,
}

/// Per-block power and area of one design.
#[derive(Debug, Clone, PartialEq)]
pub struct Breakdown {
    pub rows: Vec<BlockCost>,
}

pub type PowerBreakdown = Breakdown;
pub type AreaBreakdown = Breakdown;

impl Breakdown {
    pub fn total_w(&self) -> f64 {
        self.rows.iter().map(|r| r.total_w).sum()
    }

    pub fn total_mm2(&self) -> f64 {
        self.rows.iter().map(|r| r.total_mm2).sum()
    }

    pub fn row(&self, block: Block) -> &BlockCost {
        self.rows.iter().find(|r| r.block == block).expect("every block has a row")
    }

    pub fn power(&self, block: Block) -> f64 {
        self.row(block).total_w
    }

    pub fn area(&self, block: Block) -> f64 {
        self.row(block).total_mm2
    }
}

/// Power and area of `design` with converters and links sized at `enob` bits.
///
/// PAs are off-chip and carry no IC area.
pub fn total_power(design: &ArrayDesign, enob: u32, bw_ghz: f64, lib: &ComponentLibrary) -> Result<PowerBreakdown> {
    design.validate()?;
    let counts = component_counts(design.architecture, design.n, design.u, design.k, lib)?;
    let gops = precoding_gops(design.u, precoder_width(design), bw_ghz);
    let amp_w = lib.p_amp_mw * 1e-3;
    let serdes_total = if counts.serdes == 0 { 0.0 } else { serdes_power(enob, design.u, lib) };
    let per_unit = |block: Block| -> (f64, f64) {
        match block {
            Block::Precoding => (gops / lib.fom_dsp_gops_per_mw * 1e-3, gops / lib.fom_dsp_area_gops_per_mm2),
            Block::Serdes => (
                if counts.serdes == 0 { 0.0 } else { serdes_total / counts.serdes as f64 },
                lib.area_serdes_mm2,
            ),
            Block::Dac => (dac_power(enob, lib), lib.area_dac_mm2),
            Block::LoMixer => (lib.p_lo_mw * 1e-3, lib.area_lo_mixer_mm2),
            Block::Ps => (lib.p_ps_mw * 1e-3, lib.area_ps_mm2),
            Block::Wilkinson => (0.0, lib.area_wilkinson_mm2),
            Block::RfAmpComp | Block::RfAmpPredriver => (amp_w, lib.area_rf_amp_mm2),
            Block::Pa => (pa_power(dbm_to_watts(design.p_out_dbm), design.n, lib), 0.0),
        }
    };
    let rows = Block::ALL
        .iter()
        .map(|&block| {
            let count = counts.get(block);
            let (unit_w, unit_mm2) = per_unit(block);
            BlockCost {
                block,
                count,
                unit_w,
                total_w: unit_w * count as f64,
                unit_mm2,
                total_mm2: unit_mm2 * count as f64,
            }
        })
        .collect();
    Ok(Breakdown { rows })
}

/// Same rollup as [`total_power`]; areas do not depend on transmit power.
pub fn total_area(design: &ArrayDesign, enob: u32, bw_ghz: f64, lib: &ComponentLibrary) -> Result<AreaBreakdown> {
    total_power(design, enob, bw_ghz, lib)
}

/// Stages of a 1:`ports` or `ports`:1 Wilkinson tree.
pub fn wilkinson_stages(ports: usize) -> u32 {
    if ports <= 1 {
        0
    } else {
        usize::BITS - (ports - 1).leading_zeros()
    }
}

pub fn wilkinson_loss_db(num_stages: u32, lib: &ComponentLibrary) -> f64 {
    num_stages as f64 * lib.distribution.wilkinson_stage_db
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistributionStage {
    pub name: String,
    pub gain_db: f64,
    /// Level after this stage.
    pub level_dbm: f64,
    /// Parallel copies of this stage across the array; for a split or
    /// combine stage, the number of Wilkinson units in it.
    pub instances: usize,
}

/// Signal level along one path from mixer to PA input.
#[derive(Debug, Clone, PartialEq)]
pub struct DistributionBudget {
    pub stages: Vec<DistributionStage>,
}

impl DistributionBudget {
    pub fn pa_input_dbm(&self) -> f64 {
        self.stages.last().map_or(f64::NEG_INFINITY, |s| s.level_dbm)
    }

    /// Compensation amplifiers placed across the whole array.
    pub fn comp_amps(&self) -> usize {
        self.stages.iter().filter(|s| s.name == "comp-amp").map(|s| s.instances).sum()
    }

    pub fn splitter_combiner_loss_db(&self) -> f64 {
        -self
            .stages
            .iter()
            .filter(|s| s.name.starts_with("split") || s.name.starts_with("combine"))
            .map(|s| s.gain_db)
            .sum::<f64>()
    }

    pub fn max_level_dbm(&self) -> f64 {
        self.stages.iter().map(|s| s.level_dbm).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_level_dbm(&self) -> f64 {
        self.stages.iter().map(|s| s.level_dbm).fold(f64::INFINITY, f64::min)
    }
}

struct Walk<'a> {
    p: &'a DistributionParams,
    level: f64,
    branches: usize,
    stages: Vec<DistributionStage>,
}

impl Walk<'_> {
    fn push(&mut self, name: String, gain_db: f64) {
        self.level += gain_db;
        self.stages.push(DistributionStage {
            name,
            gain_db,
            level_dbm: self.level,
            instances: self.branches,
        });
    }

    fn amplify(&mut self, name: &str) {
        let gain = self.p.amp_gain_db.min(self.p.amp_ceiling_dbm - self.level);
        self.push(name.to_string(), gain);
    }

    fn unreachable(&self, reason: String) -> Error {
        Error::UnreachablePaInput {
            required_dbm: self.p.pa_input_dbm,
            reason,
        }
    }

    /// Applies a loss, inserting a compensation amplifier first if needed.
    fn lose(&mut self, name: String, loss_db: f64) -> Result<()> {
        if self.level - loss_db < self.p.floor_dbm {
            if self.level < self.p.amp_ceiling_dbm {
                self.amplify("comp-amp");
            }
            if self.level - loss_db < self.p.floor_dbm {
                return Err(self.unreachable(format!("{name} loses {loss_db} dB, more than one amplifier can cover")));
            }
        }
        self.push(name, -loss_db);
        Ok(())
    }

    fn finish(mut self) -> Result<DistributionBudget> {
        if self.level + self.p.amp_gain_db < self.p.pa_input_dbm {
            self.amplify("comp-amp");
        }
        self.amplify("pre-driver");
        if self.level < self.p.pa_input_dbm - 1e-9 {
            return Err(self.unreachable(format!("pre-driver reaches only {:.2} dBm", self.level)));
        }
        Ok(DistributionBudget { stages: self.stages })
    }
}

/// Walks the RF path and places compensation amplifiers hierarchically.
///
/// DA runs mixer, interposer, PCB, pre-driver. SA adds a `k`-way split,
/// on-chip route and phase shifter. FH splits each of its `u` chains to
/// all `n` antennas and recombines `u` ways ahead of each PA.
pub fn distribution_budget(arch: Architecture, n: usize, u: usize, k: usize, lib: &ComponentLibrary) -> Result<DistributionBudget> {
    if n == 0 || u == 0 {
        return Err(Error::InvalidDesign(format!("need N, U >= 1, got N={n} U={u}")));
    }
    let p = &lib.distribution;
    let chains = match arch {
        Architecture::Da => n,
        Architecture::Sa => {
            if k == 0 || n % k != 0 {
                return Err(Error::InvalidDesign(format!("SA module of {k} antennas does not divide N={n}")));
            }
            n / k
        }
        Architecture::Fh => u,
    };
    let mut w = Walk {
        p,
        level: 0.0,
        branches: chains,
        stages: Vec::new(),
    };
    w.push("mixer".into(), p.mixer_out_dbm);
    let split = |w: &mut Walk, ports: usize, total_paths: usize| -> Result<()> {
        let s = wilkinson_stages(ports);
        for i in 1..=s {
            w.lose(format!("split 1:2 ({i}/{s})"), p.wilkinson_stage_db)?;
            w.branches = (w.branches * 2).min(total_paths);
        }
        Ok(())
    };
    match arch {
        Architecture::Da => {}
        Architecture::Sa => {
            split(&mut w, k, n)?;
            w.lose("on-chip route".into(), p.line_db_per_mm * p.sa_route_mm)?;
            w.push("phase shifter".into(), p.ps_gain_db);
        }
        Architecture::Fh => {
            split(&mut w, n, n * u)?;
            w.push("phase shifter".into(), p.ps_gain_db);
            w.lose("on-chip route".into(), p.line_db_per_mm * p.fh_route_mm)?;
            let s = wilkinson_stages(u);
            for i in 1..=s {
                w.branches = w.branches.div_ceil(2).max(n);
                w.lose(format!("combine 2:1 ({i}/{s})"), p.wilkinson_stage_db)?;
            }
        }
    }
    w.branches = n;
    w.lose("interposer".into(), p.interposer_db)?;
    w.lose("pcb".into(), p.pcb_db_per_inch * p.pcb_inches)?;
    w.finish()
}

/// Distribution ledger for a validated design.
pub fn design_distribution(design: &ArrayDesign, lib: &ComponentLibrary) -> Result<DistributionBudget> {
    design.validate()?;
    distribution_budget(design.architecture, design.n, design.u, design.k, lib)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn lib() -> ComponentLibrary {
        ComponentLibrary::default()
    }

    fn close4(a: f64, b: f64) -> bool {
        ((a - b) / b).abs() < 5e-4
    }

    #[test]
    fn shipped_file_matches_defaults() {
        let parsed = ComponentLibrary::from_toml_str(ComponentLibrary::shipped_toml(), Path::new("default.toml")).unwrap();
        assert_eq!(parsed, ComponentLibrary::default());
    }

    #[test]
    fn partial_override_keeps_defaults() {
        let l = ComponentLibrary::from_toml_str("eta_pa = 0.3\n[distribution]\npcb_inches = 2.0\n", Path::new("x")).unwrap();
        assert_eq!(l.eta_pa, 0.3);
        assert_eq!(l.distribution.pcb_inches, 2.0);
        assert_eq!(l.p_lo_mw, 70.0);
        let err = ComponentLibrary::from_toml_str("eta_pa = -1.0", Path::new("x")).unwrap_err();
        assert!(matches!(err, Error::Config { .. }));
        assert!(ComponentLibrary::from_toml_str("bogus = 1", Path::new("x")).is_err());
    }

    #[test]
    fn hand_evaluations() {
        let l = lib();
        // (6*16*256 + 72*256) * 0.85 GOPS at 13 GOPS/mW
        assert!(close4(precoding_power(16, 256, 0.85, &l), 43008.0 * 0.85 / 13.0 / 1000.0));
        assert!((precoding_power(16, 256, 0.85, &l) - 2.81).abs() < 0.005);
        assert!(close4(serdes_power(8, 16, &l), 2.176));
        assert!(close4(dac_power(8, &l), 0.0448));
        assert!(close4(pa_power(dbm_to_watts(46.0), 256, &l), 39.81 / 256.0 / 0.185));
        assert!((pa_power(dbm_to_watts(46.0), 256, &l) - 0.84).abs() < 0.005);
    }

    #[test]
    fn formula_structure() {
        let l = lib();
        let d = precoding_power(32, 64, 0.85, &l) - precoding_power(16, 64, 0.85, &l);
        assert!((d - 6.0 * 16.0 * 64.0 * 0.85 / 13.0e3).abs() < 1e-12);
        assert!((precoding_power(0, 64, 0.85, &l) - 72.0 * 64.0 * 0.85 / 13.0e3).abs() < 1e-12);
        assert_eq!(serdes_power(9, 0, &l), 0.0);
        assert!((serdes_power(6, 4, &l) - 2.0 * serdes_power(3, 4, &l)).abs() < 1e-15);
        let conv = |b| dac_power(b, &l) - l.p_buffer_mw * 1e-3;
        assert!((conv(7) - 2.0 * conv(6)).abs() < 1e-15);
        for b in 1..=3 {
            assert!(l.p_buffer_mw * 1e-3 / dac_power(b, &l) > 0.7);
        }
        let p = 12.5;
        for n in [1, 16, 1024] {
            assert!((pa_power(p, n, &l) * n as f64 - p / l.eta_pa).abs() < 1e-12);
        }
    }

    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0
    }

    #[test]
    fn doherty_against_quadrature() {
        // Rayleigh magnitude whose mean sits 10 dB below a unit peak.
        let mean = 10f64.powf(-0.5);
        let s2 = mean * mean * 2.0 / std::f64::consts::PI;
        let pdf = |a: f64| a / s2 * (-a * a / (2.0 * s2)).exp();
        let pae = |a: f64| 0.3 * (2.0 * a).min(1.0);
        let eta = simpson(|a| pdf(a) * pae(a), 0.0, 0.5, 20_000) + simpson(|a| pdf(a) * pae(a), 0.5, 12.0, 200_000);
        assert!((0.18..=0.19).contains(&eta), "{eta}");
        assert!((doherty_efficiency(0.3, 10.0) - eta).abs() < 1e-6);
        assert!((eta - lib().eta_pa).abs() < 0.005);
    }

    #[test]
    fn enob_floor() {
        let l = lib();
        assert_eq!(power_enob(3.2, &l), 5);
        assert_eq!(power_enob(7.01, &l), 8);
        assert_eq!(power_enob(8.0, &l), 8);
        assert_eq!(power_enob(f64::NEG_INFINITY, &l), 5);
    }

    #[test]
    fn table_counts() {
        let l = lib();
        let sa = component_counts(Architecture::Sa, 256, 8, 16, &l).unwrap();
        assert_eq!((sa.serdes, sa.dac, sa.lo_mixer, sa.ps, sa.wilkinson, sa.rf_amp_comp, sa.pa), (16, 16, 16, 256, 240, 64, 256));
        let fh = component_counts(Architecture::Fh, 256, 16, 256, &l).unwrap();
        assert_eq!((fh.ps, fh.wilkinson, fh.rf_amp_comp, fh.serdes, fh.dac), (4096, 7920, 2731, 0, 16));
        let da = component_counts(Architecture::Da, 8, 4, 1, &l).unwrap();
        assert_eq!(da.serdes, 1);
        assert_eq!((da.dac, da.lo_mixer, da.wilkinson, da.rf_amp_predriver, da.pa), (8, 8, 8, 8, 8));
        assert!(component_counts(Architecture::Sa, 256, 8, 15, &l).is_err());
        assert!(component_counts(Architecture::Fh, 0, 8, 1, &l).is_err());
    }

    #[test]
    fn per_antenna_rows() {
        let l = lib();
        for n in [16usize, 64, 256, 1024] {
            for u in [1usize, 2, 4, 8, 16] {
                let nf = n as f64;
                let uf = u as f64;
                let per = |c: &ComponentCounts, b: Block| c.get(b) as f64 / nf;
                let da = component_counts(Architecture::Da, n, u, 1, &l).unwrap();
                assert_eq!(per(&da, Block::Serdes), 1.0 / 8.0);
                for b in [Block::Dac, Block::LoMixer, Block::Wilkinson, Block::RfAmpPredriver, Block::Pa] {
                    assert_eq!(per(&da, b), 1.0);
                }
                let sa = component_counts(Architecture::Sa, n, u, 16, &l).unwrap();
                assert_eq!(per(&sa, Block::Dac), 1.0 / 16.0);
                assert_eq!(per(&sa, Block::Ps), 1.0);
                assert_eq!(per(&sa, Block::Wilkinson), 1.0 - 1.0 / 16.0);
                assert_eq!(per(&sa, Block::RfAmpComp), 0.25);
                let fh = component_counts(Architecture::Fh, n, u, n, &l).unwrap();
                assert_eq!(per(&fh, Block::Dac), uf / nf);
                assert_eq!(per(&fh, Block::Ps), uf);
                assert!((per(&fh, Block::Wilkinson) - (2.0 * uf - 1.0 - uf / nf)).abs() < 1e-12);
                assert!((per(&fh, Block::RfAmpComp) - 2.0 * uf / 3.0).abs() <= 1.0 / nf);
            }
        }
    }

    #[test]
    fn wilkinson_losses() {
        let l = lib();
        assert_eq!(wilkinson_loss_db(wilkinson_stages(16), &l), 16.0);
        assert_eq!(wilkinson_loss_db(wilkinson_stages(256 * 16), &l), 48.0);
        assert_eq!(wilkinson_stages(1), 0);
        assert_eq!(wilkinson_stages(2), 1);
        assert_eq!(wilkinson_stages(5), 3);
        let sa = distribution_budget(Architecture::Sa, 256, 8, 16, &l).unwrap();
        assert_eq!(sa.splitter_combiner_loss_db(), 16.0);
        let fh = distribution_budget(Architecture::Fh, 256, 16, 256, &l).unwrap();
        assert_eq!(fh.splitter_combiner_loss_db(), 48.0);
    }

    #[test]
    fn ledgers_close() {
        let l = lib();
        let da = distribution_budget(Architecture::Da, 64, 8, 1, &l).unwrap();
        assert_eq!(da.comp_amps(), 0);
        assert_eq!(da.splitter_combiner_loss_db(), 0.0);
        assert!(da.pa_input_dbm() >= 5.0 - 1e-9);
        let sa = distribution_budget(Architecture::Sa, 256, 8, 16, &l).unwrap();
        // two 4 dB stages from -6 dBm reach -14, the third would cross the floor
        assert_eq!(sa.comp_amps(), 64);
        let fh = distribution_budget(Architecture::Fh, 64, 8, 64, &l).unwrap();
        assert!(fh.comp_amps() > 64);
        let units: usize = fh.stages.iter().filter(|s| s.name.starts_with("split") || s.name.starts_with("combine")).map(|s| s.instances).sum();
        assert_eq!(units, component_counts(Architecture::Fh, 64, 8, 64, &l).unwrap().wilkinson);
        let units: usize = sa.stages.iter().filter(|s| s.name.starts_with("split")).map(|s| s.instances).sum();
        assert_eq!(units, 240);
        for b in [&da, &sa, &fh] {
            assert!(b.pa_input_dbm() >= 5.0 - 1e-9);
            assert!(b.max_level_dbm() <= 5.0 + 1e-9);
            assert!(b.min_level_dbm() >= -15.0 - 1e-9);
        }
    }

    #[test]
    fn unreachable_input_reported() {
        let mut l = lib();
        l.distribution.interposer_db = 25.0;
        let err = distribution_budget(Architecture::Da, 16, 2, 1, &l).unwrap_err();
        assert!(matches!(err, Error::UnreachablePaInput { .. }));
    }

    #[test]
    fn sa_with_single_antenna_modules_matches_da_chains() {
        let l = lib();
        let sa = component_counts(Architecture::Sa, 64, 4, 1, &l).unwrap();
        let da = component_counts(Architecture::Da, 64, 4, 1, &l).unwrap();
        assert_eq!((sa.dac, sa.lo_mixer, sa.wilkinson), (da.dac, da.lo_mixer, 0));
    }

    #[test]
    fn fh_draws_more_than_da_beyond_two_streams() {
        let l = lib();
        for n in [16, 32, 64, 128, 256, 512] {
            for u in [4, 8, 16] {
                for enob in [5, 6, 8] {
                    let da = total_power(&ArrayDesign::da(n, u).with_power_dbm(35.0), enob, 0.85, &l).unwrap();
                    let fh = total_power(&ArrayDesign::fh(n, u, u).with_power_dbm(35.0), enob, 0.85, &l).unwrap();
                    assert!(fh.total_w() > da.total_w(), "N={n} U={u} B={enob}");
                }
            }
        }
        // not so with two streams, or with DACs fine enough that N of them outweigh the PS matrix
        let da = total_power(&ArrayDesign::da(64, 4), 10, 0.85, &l).unwrap();
        let fh = total_power(&ArrayDesign::fh(64, 4, 4), 10, 0.85, &l).unwrap();
        assert!(fh.total_w() < da.total_w());
        let da = total_power(&ArrayDesign::da(256, 2), 5, 0.85, &l).unwrap();
        let fh = total_power(&ArrayDesign::fh(256, 2, 2), 5, 0.85, &l).unwrap();
        assert!(fh.total_w() < da.total_w());
    }

    #[test]
    fn area_ordering_at_256_by_16() {
        let l = lib();
        let area = |d: ArrayDesign| total_area(&d, 8, 0.85, &l).unwrap().total_mm2();
        let fh = area(design_for(Architecture::Fh, 256, 16, &l).unwrap());
        let da = area(design_for(Architecture::Da, 256, 16, &l).unwrap());
        let sa = area(design_for(Architecture::Sa, 256, 16, &l).unwrap());
        assert!(fh > da && fh > sa, "{fh} {da} {sa}");
    }

    #[test]
    fn sa_template() {
        let l = lib();
        let d = design_for(Architecture::Sa, 256, 8, &l).unwrap();
        assert_eq!((d.m, d.k), (16, 16));
        let d = design_for(Architecture::Sa, 64, 8, &l).unwrap();
        assert_eq!((d.m, d.k), (8, 8));
        let d = design_for(Architecture::Fh, 64, 8, &l).unwrap();
        assert_eq!(d.m, 8);
        assert!(design_for(Architecture::Sa, 20, 8, &l).is_err());
    }

    proptest! {
        #[test]
        fn totals_are_sums(n_exp in 2u32..11, u_exp in 0u32..5, enob in 1u32..14, p in -10.0f64..60.0, arch in 0usize..3) {
            let l = lib();
            let n = 1usize << n_exp;
            let u = (1usize << u_exp).min(n);
            let d = design_for(Architecture::ALL[arch], n, u, &l).unwrap().with_power_dbm(p);
            let b = total_power(&d, enob, 0.85, &l).unwrap();
            let mut s = 0.0;
            let mut a = 0.0;
            for r in &b.rows {
                prop_assert!(r.total_w >= 0.0 && r.total_mm2 >= 0.0);
                prop_assert_eq!(r.total_w, r.unit_w * r.count as f64);
                s += r.total_w;
                a += r.total_mm2;
            }
            prop_assert_eq!(b.total_w(), s);
            prop_assert_eq!(b.total_mm2(), a);
        }

        #[test]
        fn blocks_monotone(n_exp in 2u32..10, u_exp in 0u32..4, enob in 1u32..13, p in -10.0f64..60.0, arch in 0usize..3) {
            let l = lib();
            let n = 1usize << n_exp;
            let u = (1usize << u_exp).min(n / 2);
            let a = Architecture::ALL[arch];
            let base = total_power(&design_for(a, n, u, &l).unwrap().with_power_dbm(p), enob, 0.85, &l).unwrap();
            let bigger = [
                total_power(&design_for(a, 2 * n, u, &l).unwrap().with_power_dbm(p), enob, 0.85, &l).unwrap(),
                total_power(&design_for(a, n, 2 * u, &l).unwrap().with_power_dbm(p), enob, 0.85, &l).unwrap(),
                total_power(&design_for(a, n, u, &l).unwrap().with_power_dbm(p), enob + 1, 0.85, &l).unwrap(),
                total_power(&design_for(a, n, u, &l).unwrap().with_power_dbm(p + 1.0), enob, 0.85, &l).unwrap(),
            ];
            for (i, b) in bigger.iter().enumerate() {
                for block in Block::ALL {
                    // more antennas spread the same P_out over more PAs
                    if i == 0 && block == Block::Pa {
                        prop_assert!((b.power(block) - base.power(block)).abs() < 1e-9 * base.power(block).max(1.0));
                        continue;
                    }
                    // an SA growing U past N/16 trades modules for chains
                    if i == 1 && a == Architecture::Sa {
                        continue;
                    }
                    prop_assert!(b.power(block) >= base.power(block) - 1e-12, "{} step {}", block, i);
                }
            }
        }

        #[test]
        fn ledger_invariants(n_exp in 1u32..11, u_exp in 0u32..5, arch in 0usize..3) {
            let l = lib();
            let n = 1usize << n_exp;
            let u = (1usize << u_exp).min(n);
            let d = design_for(Architecture::ALL[arch], n, u, &l).unwrap();
            let b = design_distribution(&d, &l).unwrap();
            prop_assert!(b.pa_input_dbm() >= l.distribution.pa_input_dbm - 1e-9);
            prop_assert!(b.max_level_dbm() <= l.distribution.amp_ceiling_dbm + 1e-9);
            prop_assert!(b.min_level_dbm() >= l.distribution.floor_dbm - 1e-9);
        }
    }
}
