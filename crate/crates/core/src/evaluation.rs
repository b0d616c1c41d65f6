//! Per-user SINR, Monte Carlo spectral efficiency and the minimum transmit
//! power search.

use rayon::prelude::*;

use crate::channel::{generate_combined, ArrayGeometry};
use crate::error::{Error, Result};
use crate::linalg::{compensated_sum, db_to_lin, lin_to_db, CMatrix, C64};
use crate::link_budget::{dbm_to_relative, Scenario};
use crate::precoding::{
    alpha_grid, per_user_sinr, select_alpha_family, Architecture, ArrayDesign, DigitalStage, PrecoderPair, RzfFamily,
};
use crate::quantization::{dac_noise_power, quantize_fixed_point, quantize_rail, tx_noise_factor, NoiseModel};
use crate::rng;

/// How DAC quantization noise reaches each receiver.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TxNoiseModel {
    /// Closed-form aggregate power, identical for all users.
    Aggregate,
    /// Each DAC's noise at its average input power, carried to each user
    /// through that user's effective channel.
    #[default]
    Propagated,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UserMetrics {
    pub signal_gain: C64,
    pub interference: f64,
    pub tx_noise: f64,
    pub rx_noise: f64,
    pub sinr_db: f64,
}

impl UserMetrics {
    pub fn sinr(&self) -> f64 {
        db_to_lin(self.sinr_db)
    }
}

/// Outcome of one drop. Powers are referred to the receiver noise frame,
/// i.e. divided by the receive-array gain the link budget already counts.
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationResult {
    pub per_user: Vec<UserMetrics>,
    /// Sum over users of `log2(1 + SINR)`.
    pub sum_se: f64,
}

fn metrics_from_gb(gb: &CMatrix, tx_noise: &[f64], noise: &NoiseModel) -> EvaluationResult {
    let g_rx = noise.rx_array_gain;
    let sinr = per_user_sinr(gb, tx_noise, noise);
    let per_user: Vec<UserMetrics> = (0..gb.nrows())
        .map(|u| {
            let row = gb.row(u);
            let signal = row[u];
            let total: f64 = row.iter().map(|z| z.norm_sqr()).sum();
            UserMetrics {
                signal_gain: signal / C64::new(g_rx.sqrt(), 0.0),
                interference: (total - signal.norm_sqr()).max(0.0) / g_rx,
                tx_noise: tx_noise[u] / g_rx,
                rx_noise: noise.sigma2_rx,
                sinr_db: lin_to_db(sinr[u]),
            }
        })
        .collect();
    let sum_se = sinr.iter().map(|s| (1.0 + s).log2()).sum();
    EvaluationResult { per_user, sum_se }
}

/// Transmit noise per user before receive-gain scaling.
fn tx_noise_terms(
    design: &ArrayDesign,
    stage: &DigitalStage,
    noise: &NoiseModel,
    model: TxNoiseModel,
    p_out: f64,
) -> Vec<f64> {
    let Some(bits) = design.dac_bits else {
        return vec![0.0; design.u];
    };
    let eps = db_to_lin(dac_noise_power(bits, noise.papr_db));
    match model {
        TxNoiseModel::Aggregate => {
            // the closed form already lives in the receiver noise frame
            vec![p_out * eps * tx_noise_factor(design.architecture, design.n, design.u) * noise.rx_array_gain; design.u]
        }
        TxNoiseModel::Propagated => stage.tx_noise_coefficients().iter().map(|t| t * p_out * eps).collect(),
    }
}

/// Eq.-style SINR of every user for a given precoder.
///
/// `c` is the post-combining channel (`U x N`).
pub fn sinr_per_user(
    c: &CMatrix,
    pre: &PrecoderPair,
    noise: &NoiseModel,
    design: &ArrayDesign,
    model: TxNoiseModel,
) -> Result<EvaluationResult> {
    if c.nrows() != design.u || c.ncols() != pre.r.nrows() || pre.r.ncols() != pre.b.nrows() || pre.b.ncols() != design.u {
        return Err(Error::DimensionMismatch(format!(
            "channel {}x{}, R {}x{}, B {}x{}, U = {}",
            c.nrows(),
            c.ncols(),
            pre.r.nrows(),
            pre.r.ncols(),
            pre.b.nrows(),
            pre.b.ncols(),
            design.u
        )));
    }
    let gb = c * &pre.r * &pre.b;
    let stage = DigitalStage::new(c, design)?;
    let p_out = crate::linalg::frobenius_sq(&pre.transmit_matrix());
    let tx = tx_noise_terms(design, &stage, noise, model, p_out);
    Ok(metrics_from_gb(&gb, &tx, noise))
}

/// Average over drops of the per-drop sum-SE.
pub fn mean_se(results: &[EvaluationResult]) -> f64 {
    if results.is_empty() {
        return 0.0;
    }
    compensated_sum(results.iter().map(|r| r.sum_se)) / results.len() as f64
}

/// Peak post-beamforming signal power per user.
pub fn max_array_gain(arch: Architecture, p_out: f64, n: usize, u: usize) -> f64 {
    let (n, u) = (n as f64, u as f64);
    match arch {
        Architecture::Da | Architecture::Fh => p_out * n / u,
        Architecture::Sa => p_out * n / (u * u),
    }
}

/// Post-combining channels of a fixed set of Monte Carlo drops.
///
/// Drops depend only on the scenario, seed and user count, so the same set
/// serves every architecture and every transmit power.
#[derive(Debug, Clone)]
pub struct DropSet {
    pub n: usize,
    pub u: usize,
    pub seed: u64,
    pub channels: Vec<CMatrix>,
}

impl DropSet {
    pub fn generate(scenario: &Scenario, n: usize, u: usize, trials: usize, seed: u64) -> Result<Self> {
        if trials == 0 {
            return Err(Error::InvalidArgument("at least one trial is required".into()));
        }
        let tx = ArrayGeometry::near_square(n);
        let channels = (0..trials as u64)
            .into_par_iter()
            .map(|i| {
                generate_combined(&tx, &scenario.receiver, &scenario.clusters, u, scenario.los, rng::drop_seed(seed, i))
                    .map(|c| c.rows)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { n, u, seed, channels })
    }

    pub fn trials(&self) -> usize {
        self.channels.len()
    }
}

/// A design's analog stage and RZF family on every drop of a set.
pub struct PreparedDesign {
    design: ArrayDesign,
    drops: Vec<(DigitalStage, RzfFamily, Vec<f64>)>,
    tx_model: TxNoiseModel,
}

impl PreparedDesign {
    pub fn new(design: &ArrayDesign, drops: &DropSet, noise: &NoiseModel) -> Result<Self> {
        design.validate()?;
        noise.validate()?;
        if design.n != drops.n || design.u != drops.u {
            return Err(Error::DimensionMismatch(format!(
                "design N = {}, U = {} against drops N = {}, U = {}",
                design.n, design.u, drops.n, drops.u
            )));
        }
        let drops = drops
            .channels
            .par_iter()
            .map(|c| {
                let stage = DigitalStage::new(c, design)?;
                let family = RzfFamily::new(&stage);
                let grid = alpha_grid(&stage, noise);
                Ok((stage, family, grid))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            design: *design,
            drops,
            tx_model: TxNoiseModel::default(),
        })
    }

    pub fn with_tx_noise_model(mut self, model: TxNoiseModel) -> Self {
        self.tx_model = model;
        self
    }

    pub fn design(&self) -> &ArrayDesign {
        &self.design
    }

    /// Per-drop results at `p_out_dbm`, in drop order.
    pub fn evaluate(&self, p_out_dbm: f64, noise: &NoiseModel) -> Result<Vec<EvaluationResult>> {
        let p_out = dbm_to_relative(p_out_dbm);
        let design = self.design;
        self.drops
            .par_iter()
            .map(|(stage, family, grid)| {
                let (alpha, resp) = select_alpha_family(family, grid, p_out, noise).ok_or(Error::ZeroChannel)?;
                let tx = tx_noise_terms(&design, stage, noise, self.tx_model, p_out);
                let gb = match design.dac_bits {
                    None => resp.gb,
                    Some(bits) => {
                        let (b, _) = stage.digital(alpha, p_out)?;
                        let q = stage.normalize(&quantize_fixed_point(&b, bits + 2), p_out);
                        &stage.g * q
                    }
                };
                Ok(metrics_from_gb(&gb, &tx, noise))
            })
            .collect()
    }

    pub fn mean_se(&self, p_out_dbm: f64, noise: &NoiseModel) -> Result<f64> {
        Ok(mean_se(&self.evaluate(p_out_dbm, noise)?))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchOptions {
    pub lo_dbm: f64,
    pub hi_dbm: f64,
    pub se_tolerance: f64,
    pub bracket_db: f64,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            lo_dbm: -20.0,
            hi_dbm: 80.0,
            se_tolerance: 0.1,
            bracket_db: 0.05,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub design: ArrayDesign,
    pub min_p_out_dbm: f64,
    pub achieved_se: f64,
    pub trials: usize,
    pub converged: bool,
    /// Every probed power ordered by dBm gave nondecreasing SE.
    pub monotone: bool,
}

/// Smallest transmit power whose mean SE meets `target_se`, by bisection in
/// dBm over a fixed drop set.
pub fn min_tx_power(
    template: &ArrayDesign,
    drops: &DropSet,
    target_se: f64,
    noise: &NoiseModel,
    opts: &SearchOptions,
) -> Result<SweepPoint> {
    let prepared = PreparedDesign::new(template, drops, noise)?;
    search(&prepared, target_se, noise, opts)
}

/// Bisection on an already prepared design.
pub fn search(prepared: &PreparedDesign, target_se: f64, noise: &NoiseModel, opts: &SearchOptions) -> Result<SweepPoint> {
    let mut probes: Vec<(f64, f64)> = Vec::new();
    let mut probe = |dbm: f64| -> Result<f64> {
        let se = prepared.mean_se(dbm, noise)?;
        probes.push((dbm, se));
        Ok(se)
    };
    let (mut lo, mut hi) = (opts.lo_dbm, opts.hi_dbm);
    let se_hi = probe(hi)?;
    if se_hi < target_se {
        return Err(Error::NotAchievable {
            target: target_se,
            achieved: se_hi,
            p_out_dbm: hi,
        });
    }
    let se_lo = probe(lo)?;
    let (dbm, se, converged) = if se_lo >= target_se {
        (lo, se_lo, true)
    } else {
        let mut best = (hi, se_hi);
        loop {
            let mid = 0.5 * (lo + hi);
            let se = probe(mid)?;
            if se >= target_se {
                hi = mid;
                best = (mid, se);
            } else {
                lo = mid;
            }
            if (se - target_se).abs() <= opts.se_tolerance {
                break (mid, se, true);
            }
            if hi - lo < opts.bracket_db {
                break (best.0, best.1, (best.1 - target_se).abs() <= opts.se_tolerance);
            }
        }
    };
    probes.sort_by(|a, b| a.0.total_cmp(&b.0));
    let monotone = probes.windows(2).all(|w| w[1].1 >= w[0].1 - 1e-9 * w[0].1.abs().max(1.0));
    if !monotone {
        log::warn!("mean SE not monotone in transmit power for {:?}", prepared.design());
    }
    Ok(SweepPoint {
        design: prepared.design().with_power_dbm(dbm),
        min_p_out_dbm: dbm,
        achieved_se: se,
        trials: prepared.drops.len(),
        converged,
        monotone,
    })
}

/// How the symbol-level simulators model the DACs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DacModel {
    /// Independent uniform noise added at every DAC at the nominal per-DAC
    /// power (`P/N`, or `P/(N U)` for FH); DACs of one SA virtual group share
    /// their noise.
    Additive,
    /// Each active DAC quantizes its input sample by sample.
    Quantizer,
}

/// Empirical SINR of every user from pushing symbols through the transmitter,
/// with every active DAC quantized sample by sample.
///
/// Symbols are complex Gaussian with each rail truncated to the model's PAPR.
/// DAC full scale per rail follows the average DAC input power.
pub fn simulate_quantized_sinr(
    c: &CMatrix,
    pre: &PrecoderPair,
    design: &ArrayDesign,
    noise: &NoiseModel,
    symbols: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    simulate_sinr(c, pre, design, noise, DacModel::Quantizer, symbols, seed)
}

/// Empirical SINR from `symbols` truncated-Gaussian symbol vectors sent
/// through `y = C R (B s + z_tx)`, with receiver noise added analytically.
pub fn simulate_sinr(
    c: &CMatrix,
    pre: &PrecoderPair,
    design: &ArrayDesign,
    noise: &NoiseModel,
    dac: DacModel,
    symbols: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let u = design.u;
    if c.nrows() != u || c.ncols() != pre.r.nrows() || pre.b.ncols() != u {
        return Err(Error::DimensionMismatch(format!(
            "channel {}x{}, R {}x{}, B {}x{}",
            c.nrows(),
            c.ncols(),
            pre.r.nrows(),
            pre.r.ncols(),
            pre.b.nrows(),
            pre.b.ncols()
        )));
    }
    let active: Vec<usize> = (0..pre.b.nrows())
        .filter(|&m| pre.b.row(m).iter().any(|z| z.norm_sqr() > 0.0))
        .collect();
    let mean_dac_power =
        active.iter().map(|&m| pre.b.row(m).norm_squared()).sum::<f64>() / active.len().max(1) as f64;
    let full_scale = (db_to_lin(noise.papr_db) * mean_dac_power / 2.0).sqrt();
    let rail_peak = (db_to_lin(noise.papr_db) / 2.0).sqrt();

    // additive noise sources and how they map onto DACs
    let p_out = crate::linalg::frobenius_sq(&pre.transmit_matrix());
    let nominal = p_out
        / match design.architecture {
            Architecture::Fh => (design.n * u) as f64,
            _ => design.n as f64,
        };
    let sources = match design.architecture {
        Architecture::Sa => crate::precoding::virtual_merge(design.m, u)?,
        _ => {
            let mut e = CMatrix::zeros(pre.b.nrows(), active.len());
            for (j, &m) in active.iter().enumerate() {
                e[(m, j)] = C64::new(1.0, 0.0);
            }
            e
        }
    };
    // uniform rails with complex variance eps * nominal
    let half_width = match (dac, design.dac_bits) {
        (DacModel::Additive, Some(bits)) => (1.5 * db_to_lin(dac_noise_power(bits, noise.papr_db)) * nominal).sqrt(),
        _ => 0.0,
    };

    let cr = c * &pre.r;
    let mut rng = rng::stream(seed, 0);
    let mut cross = vec![C64::new(0.0, 0.0); u];
    let mut power = vec![0.0; u];
    let mut sym_power = vec![0.0; u];
    let mut s = crate::linalg::CVector::zeros(u);
    let mut z = crate::linalg::CVector::zeros(sources.ncols());
    for _ in 0..symbols {
        for i in 0..u {
            let g = rng::complex_normal(&mut rng, 1.0);
            s[i] = C64::new(g.re.clamp(-rail_peak, rail_peak), g.im.clamp(-rail_peak, rail_peak));
        }
        let mut x = &pre.b * &s;
        match (dac, design.dac_bits) {
            (DacModel::Quantizer, Some(bits)) => {
                for &m in &active {
                    x[m] = C64::new(quantize_rail(x[m].re, bits, full_scale), quantize_rail(x[m].im, bits, full_scale));
                }
            }
            (DacModel::Additive, Some(_)) => {
                for k in 0..z.len() {
                    z[k] = C64::new(
                        rng::uniform(&mut rng, -half_width, half_width),
                        rng::uniform(&mut rng, -half_width, half_width),
                    );
                }
                x += &sources * &z;
            }
            (_, None) => {}
        }
        let y = &cr * x;
        for i in 0..u {
            cross[i] += y[i] * s[i].conj();
            power[i] += y[i].norm_sqr();
            sym_power[i] += s[i].norm_sqr();
        }
    }
    let g_rx = noise.rx_array_gain;
    Ok((0..u)
        .map(|i| {
            let g = cross[i] / sym_power[i];
            let signal = g.norm_sqr() * sym_power[i] / symbols as f64;
            let distortion = (power[i] / symbols as f64 - signal).max(0.0);
            (signal / g_rx) / (distortion / g_rx + noise.sigma2_rx)
        })
        .collect())
}

/// Noise model of a scenario: receiver noise from the link budget and the
/// receive-array gain of its receiver.
pub fn scenario_noise(scenario: &Scenario) -> NoiseModel {
    NoiseModel::new(scenario.sigma2_rx()).with_rx_array_gain(scenario.receiver.num_elements as f64)
}
