//! DAC quantization noise, required ENOB, signal quantizers and the
//! phase-shifter gain-degradation bound.
//!
//! Powers here live in the reference frame of the link budget: a transmit
//! power of `1.0` means 46 dBm, and `sigma2_rx` is the receiver noise in the
//! same units.

use serde::{Deserialize, Serialize};

use crate::linalg::{db_to_lin, lin_to_db, CMatrix, CVector, C64};
use crate::precoding::Architecture;

/// Receiver noise and the knobs of the ENOB rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    /// Receiver noise relative to a 46 dBm transmitter.
    pub sigma2_rx: f64,
    pub papr_db: f64,
    /// Required gap between receiver noise and transmit noise.
    pub margin_d_db: f64,
    /// Receive-array gain already booked by the link budget. Post-combining
    /// powers are divided by it before they meet `sigma2_rx`.
    #[serde(default = "unit_gain")]
    pub rx_array_gain: f64,
}

fn unit_gain() -> f64 {
    1.0
}

impl NoiseModel {
    pub fn new(sigma2_rx: f64) -> Self {
        Self {
            sigma2_rx,
            papr_db: 10.0,
            margin_d_db: 15.0,
            rx_array_gain: 1.0,
        }
    }

    /// Receiver noise of a link with pre-beamforming SNR `snr_db`.
    pub fn from_snr_db(snr_db: f64) -> Self {
        Self::new(db_to_lin(-snr_db))
    }

    pub fn with_rx_array_gain(mut self, gain: f64) -> Self {
        self.rx_array_gain = gain;
        self
    }

    pub fn validate(&self) -> crate::Result<()> {
        if !(self.sigma2_rx > 0.0) || self.papr_db < 0.0 || self.margin_d_db < 0.0 || !(self.rx_array_gain > 0.0) {
            return Err(crate::Error::InvalidArgument(format!("invalid noise model {self:?}")));
        }
        Ok(())
    }
}

/// DAC quantization noise relative to the DAC input power, in dB.
pub fn dac_noise_power(bits: u32, papr_db: f64) -> f64 {
    lin_to_db(db_to_lin(papr_db) / 3.0) - 6.0 * bits as f64
}

/// Same as [`dac_noise_power`] for fractional bits, linear scale.
pub fn dac_noise_linear(bits: f64, papr_db: f64) -> f64 {
    db_to_lin(papr_db) / 3.0 * db_to_lin(-6.0 * bits)
}

/// How transmit noise power scales with `P * epsilon` in each architecture.
pub fn tx_noise_factor(arch: Architecture, n: usize, u: usize) -> f64 {
    let (n, u) = (n as f64, u as f64);
    match arch {
        Architecture::Da => 1.0,
        Architecture::Sa => n / (u * u),
        Architecture::Fh => n / u,
    }
}

/// Aggregate transmit noise at one receiver for `bits`-bit DACs.
pub fn transmit_noise_power(arch: Architecture, p_out: f64, n: usize, u: usize, bits: u32, papr_db: f64) -> f64 {
    p_out * tx_noise_factor(arch, n, u) * db_to_lin(dac_noise_power(bits, papr_db))
}

/// Fractional ENOB that keeps transmit noise `D` dB under receiver noise.
pub fn required_enob(arch: Architecture, p_out: f64, n: usize, u: usize, model: &NoiseModel) -> f64 {
    let snr = lin_to_db(p_out / model.sigma2_rx * tx_noise_factor(arch, n, u));
    (model.papr_db - 1.76 + model.margin_d_db + snr) / 6.0
}

/// Uniform mid-rise quantizer applied independently to both rails.
///
/// `bits = None` is the infinite-precision sentinel. Inputs beyond
/// `full_scale` are clipped to the outermost level.
pub fn quantize_signal(samples: &CVector, bits: Option<u32>, full_scale: f64) -> CVector {
    match bits {
        None => samples.clone(),
        Some(b) => samples.map(|z| C64::new(quantize_rail(z.re, b, full_scale), quantize_rail(z.im, b, full_scale))),
    }
}

/// Mid-rise quantization of one real sample.
pub fn quantize_rail(x: f64, bits: u32, full_scale: f64) -> f64 {
    let levels = 2f64.powi(bits as i32);
    let step = 2.0 * full_scale / levels;
    let half = levels / 2.0;
    let k = (x / step).floor().clamp(-half, half - 1.0);
    (k + 0.5) * step
}

/// Rounds every entry of `m` onto a fixed-point grid of `bits` per rail,
/// scaled to the largest rail magnitude in the matrix.
pub fn quantize_fixed_point(m: &CMatrix, bits: u32) -> CMatrix {
    let peak = m.iter().map(|z| z.re.abs().max(z.im.abs())).fold(0.0, f64::max);
    if peak == 0.0 {
        return m.clone();
    }
    let step = peak / 2f64.powi(bits as i32 - 1);
    let round = |x: f64| (x / step).round() * step;
    m.map(|z| C64::new(round(z.re), round(z.im)))
}

/// Worst-case main-lobe gain loss of `q`-bit phase shifters, in dB.
///
/// Returns `+inf` for `q <= 1`, where the cosine bound says nothing.
pub fn gain_degradation_bound(q: u32) -> f64 {
    if q <= 1 {
        return f64::INFINITY;
    }
    -20.0 * (std::f64::consts::PI / 2f64.powi(q as i32)).cos().log10()
}
