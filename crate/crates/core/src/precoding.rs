//! Analog and digital precoders for digital (DA), sub-array (SA) and
//! fully-connected hybrid (FH) transmitters.
//!
//! Every precoder acts on the post-combining channel `C` (`U x N`), whose row
//! `u` is `w_u^H H_u`. The analog stage turns it into the effective channel
//! seen by the digital stage; the digital stage is regularized zero-forcing
//! scaled to the transmit power.
//!
//! Transmit power is expressed in the link-budget reference frame, where
//! `1.0` stands for 46 dBm.

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cis, frobenius_sq, CMatrix, C64, ZERO};
use crate::link_budget::dbm_to_relative;
use crate::quantization::{quantize_fixed_point, NoiseModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Architecture {
    Da,
    Sa,
    Fh,
}

impl Architecture {
    pub const ALL: [Architecture; 3] = [Architecture::Da, Architecture::Sa, Architecture::Fh];
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(match self {
            Architecture::Da => "DA",
            Architecture::Sa => "SA",
            Architecture::Fh => "FH",
        })
    }
}

impl FromStr for Architecture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "da" => Ok(Architecture::Da),
            "sa" => Ok(Architecture::Sa),
            "fh" => Ok(Architecture::Fh),
            other => Err(Error::InvalidArgument(format!("unknown architecture `{other}`"))),
        }
    }
}

/// One transmitter configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArrayDesign {
    pub architecture: Architecture,
    /// Antennas.
    pub n: usize,
    /// RF chains.
    pub m: usize,
    /// Antennas per SA group.
    pub k: usize,
    /// Streams.
    pub u: usize,
    /// DAC resolution; `None` means ideal converters.
    pub dac_bits: Option<u32>,
    /// Phase-shifter resolution; `None` means continuous phases.
    pub ps_bits: Option<u32>,
    pub p_out_dbm: f64,
}

impl ArrayDesign {
    pub fn da(n: usize, u: usize) -> Self {
        Self::new(Architecture::Da, n, n, 1, u)
    }

    /// Sub-array with `m` RF chains of `n / m` antennas each.
    pub fn sa(n: usize, m: usize, u: usize) -> Self {
        Self::new(Architecture::Sa, n, m, if m == 0 { 0 } else { n / m }, u)
    }

    pub fn fh(n: usize, m: usize, u: usize) -> Self {
        Self::new(Architecture::Fh, n, m, n, u)
    }

    fn new(architecture: Architecture, n: usize, m: usize, k: usize, u: usize) -> Self {
        Self {
            architecture,
            n,
            m,
            k,
            u,
            dac_bits: None,
            ps_bits: None,
            p_out_dbm: 46.0,
        }
    }

    pub fn with_power_dbm(mut self, p_out_dbm: f64) -> Self {
        self.p_out_dbm = p_out_dbm;
        self
    }

    pub fn with_dac_bits(mut self, bits: Option<u32>) -> Self {
        self.dac_bits = bits;
        self
    }

    pub fn with_ps_bits(mut self, bits: Option<u32>) -> Self {
        self.ps_bits = bits;
        self
    }

    /// Transmit power in the reference frame.
    pub fn p_out(&self) -> f64 {
        dbm_to_relative(self.p_out_dbm)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidDesign(msg));
        if self.n == 0 || self.m == 0 || self.u == 0 || self.k == 0 {
            return bad(format!("all counts must be positive: {self:?}"));
        }
        if self.u > self.m {
            return bad(format!("{} streams exceed {} RF chains", self.u, self.m));
        }
        match self.architecture {
            Architecture::Da if self.m != self.n => return bad("DA needs one RF chain per antenna".into()),
            Architecture::Sa if self.m * self.k != self.n => {
                return bad(format!("SA needs N = M K, got {} != {} x {}", self.n, self.m, self.k))
            }
            _ => {}
        }
        if self.dac_bits == Some(0) || self.ps_bits == Some(0) {
            return bad("quantizers need at least one bit".into());
        }
        if !self.p_out_dbm.is_finite() {
            return bad("transmit power must be finite".into());
        }
        Ok(())
    }

    /// Channels feeding the digital precoder: `N` for DA, `U` otherwise.
    pub fn digital_width(&self) -> usize {
        match self.architecture {
            Architecture::Da => self.n,
            Architecture::Sa | Architecture::Fh => self.u,
        }
    }
}

/// Analog precoder `R` (`N x M`) and digital precoder `B` (`M x U`).
#[derive(Debug, Clone, PartialEq)]
pub struct PrecoderPair {
    pub r: CMatrix,
    pub b: CMatrix,
    pub alpha: f64,
    pub kappa: f64,
}

impl PrecoderPair {
    /// Per-antenna transmit matrix `R B`.
    pub fn transmit_matrix(&self) -> CMatrix {
        &self.r * &self.b
    }
}

/// Contiguous partition of `m_sa` sub-array groups into `u` virtual groups.
pub fn virtual_groups(m_sa: usize, u: usize) -> Result<Vec<Range<usize>>> {
    if u == 0 || m_sa == 0 || m_sa % u != 0 {
        return Err(Error::NonIntegerGrouping { groups: m_sa, streams: u });
    }
    let size = m_sa / u;
    Ok((0..u).map(|v| v * size..(v + 1) * size).collect())
}

/// Merge matrix `E` (`M x U`): ones where physical chain `m` joins virtual group `v`.
pub fn virtual_merge(m_sa: usize, u: usize) -> Result<CMatrix> {
    let groups = virtual_groups(m_sa, u)?;
    let mut e = CMatrix::zeros(m_sa, u);
    for (v, g) in groups.iter().enumerate() {
        for m in g.clone() {
            e[(m, v)] = C64::new(1.0, 0.0);
        }
    }
    Ok(e)
}

fn check_channel(c: &CMatrix, design: &ArrayDesign) -> Result<()> {
    if c.nrows() != design.u || c.ncols() != design.n {
        return Err(Error::DimensionMismatch(format!(
            "post-combining channel is {}x{}, design needs {}x{}",
            c.nrows(),
            c.ncols(),
            design.u,
            design.n
        )));
    }
    Ok(())
}

fn expect_arch(design: &ArrayDesign, arch: Architecture) -> Result<()> {
    design.validate()?;
    if design.architecture != arch {
        return Err(Error::InvalidDesign(format!("expected a {arch} design, got {}", design.architecture)));
    }
    Ok(())
}

/// SA analog precoder: block `m` steers toward the user owning its virtual group.
pub fn analog_precoder_sa(c: &CMatrix, design: &ArrayDesign) -> Result<CMatrix> {
    expect_arch(design, Architecture::Sa)?;
    check_channel(c, design)?;
    let groups = virtual_groups(design.m, design.u)?;
    let k = design.k;
    let mut r = CMatrix::zeros(design.n, design.m);
    for (user, g) in groups.iter().enumerate() {
        for m in g.clone() {
            for i in m * k..(m + 1) * k {
                r[(i, m)] = cis(-c[(user, i)].arg());
            }
        }
    }
    Ok(r)
}

/// FH analog precoder: column `u < U` steers toward user `u`; the rest stay off.
pub fn analog_precoder_fh(c: &CMatrix, design: &ArrayDesign) -> Result<CMatrix> {
    expect_arch(design, Architecture::Fh)?;
    check_channel(c, design)?;
    let mut r = CMatrix::zeros(design.n, design.m);
    for u in 0..design.u {
        for i in 0..design.n {
            r[(i, u)] = cis(-c[(u, i)].arg());
        }
    }
    Ok(r)
}

/// Rounds every nonzero phase to the nearest multiple of `2 pi / 2^q`.
pub fn quantize_phase(r: &CMatrix, q: u32) -> CMatrix {
    let step = 2.0 * std::f64::consts::PI / 2f64.powi(q as i32);
    r.map(|z| {
        if z == ZERO {
            z
        } else {
            C64::from_polar(z.norm(), (z.arg() / step).round() * step)
        }
    })
}

/// Effective channel `G = C R`.
pub fn effective_channel(c: &CMatrix, r: &CMatrix) -> CMatrix {
    c * r
}

/// Regularized zero-forcing `B = kappa G^H (G G^H + alpha I)^-1`, scaled so
/// that `||R B||_F^2 = p_out`.
pub fn digital_rzf(g: &CMatrix, alpha: f64, p_out: f64, r: &CMatrix) -> Result<CMatrix> {
    if !(alpha >= 0.0) || !(p_out > 0.0) {
        return Err(Error::InvalidArgument(format!("alpha {alpha} and power {p_out} must be >= 0 and > 0")));
    }
    if r.ncols() != g.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "analog precoder has {} columns, effective channel {}",
            r.ncols(),
            g.ncols()
        )));
    }
    let u = g.nrows();
    let reg = g * g.adjoint() + CMatrix::identity(u, u) * C64::new(alpha, 0.0);
    let inv = regularized_inverse(&reg, alpha)?;
    let unscaled = g.adjoint() * inv;
    let power = frobenius_sq(&(r * &unscaled));
    if !(power > 0.0) {
        return Err(Error::ZeroChannel);
    }
    Ok(unscaled * C64::new((p_out / power).sqrt(), 0.0))
}

fn regularized_inverse(reg: &CMatrix, alpha: f64) -> Result<CMatrix> {
    let singular = Error::SingularEffectiveChannel { alpha };
    let chol = reg.clone().cholesky().ok_or(singular)?;
    let diag: Vec<f64> = chol.l_dirty().diagonal().iter().map(|z| z.norm_sqr()).collect();
    let top = diag.iter().cloned().fold(0.0, f64::max);
    if diag.iter().any(|&d| d <= 1e-12 * top) {
        return Err(Error::SingularEffectiveChannel { alpha });
    }
    let inv = chol.inverse();
    if inv.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::SingularEffectiveChannel { alpha });
    }
    Ok(inv)
}

/// `T^H T` for the expansion `T` that maps digital outputs onto antennas.
#[derive(Debug, Clone, PartialEq)]
pub enum ExpansionGram {
    /// `T^H T = s I`.
    Scaled(f64),
    Full(CMatrix),
}

/// Everything the digital stage needs from one drop.
#[derive(Debug, Clone, PartialEq)]
pub struct DigitalStage {
    pub design: ArrayDesign,
    /// Analog precoder `R` (`N x M`); `None` for DA, where it is the identity.
    pub r: Option<CMatrix>,
    /// Channel seen by the digital precoder (`U x digital_width`).
    pub g: CMatrix,
    pub gram: ExpansionGram,
}

impl DigitalStage {
    /// Builds the analog stage (with phase quantization) for `design`.
    pub fn new(c: &CMatrix, design: &ArrayDesign) -> Result<Self> {
        design.validate()?;
        check_channel(c, design)?;
        let quantize = |r: CMatrix| match design.ps_bits {
            Some(q) => quantize_phase(&r, q),
            None => r,
        };
        let (r, g, gram) = match design.architecture {
            Architecture::Da => (None, c.clone(), ExpansionGram::Scaled(1.0)),
            Architecture::Sa => {
                let r = quantize(analog_precoder_sa(c, design)?);
                let t = &r * virtual_merge(design.m, design.u)?;
                let g = c * t;
                (Some(r), g, ExpansionGram::Scaled((design.n / design.u) as f64))
            }
            Architecture::Fh => {
                let r = quantize(analog_precoder_fh(c, design)?);
                let t = r.columns(0, design.u).into_owned();
                let g = c * &t;
                (Some(r), g, ExpansionGram::Full(t.adjoint() * t))
            }
        };
        Ok(Self {
            design: *design,
            r,
            g,
            gram,
        })
    }

    /// Mean squared column norm of the expansion.
    pub fn expansion_scale(&self) -> f64 {
        match &self.gram {
            ExpansionGram::Scaled(s) => *s,
            ExpansionGram::Full(m) => m.diagonal().iter().map(|z| z.re).sum::<f64>() / m.nrows() as f64,
        }
    }

    /// Transmit noise seen by each user per unit `P * epsilon`, with DAC
    /// inputs at their average power.
    pub fn tx_noise_coefficients(&self) -> Vec<f64> {
        let d = &self.design;
        let per_dac = match d.architecture {
            Architecture::Da | Architecture::Sa => d.n as f64,
            Architecture::Fh => (d.n * d.u) as f64,
        };
        self.g.row_iter().map(|row| row.norm_squared() / per_dac).collect()
    }

    fn expansion_power(&self, b_digital: &CMatrix) -> f64 {
        match &self.gram {
            ExpansionGram::Scaled(s) => s * frobenius_sq(b_digital),
            ExpansionGram::Full(m) => (b_digital.adjoint() * m * b_digital).trace().re,
        }
    }

    /// Lifts a digital precoder to the full `M x U` matrix `B`.
    fn lift(&self, b_digital: &CMatrix) -> Result<CMatrix> {
        let d = &self.design;
        Ok(match d.architecture {
            Architecture::Da => b_digital.clone(),
            Architecture::Sa => virtual_merge(d.m, d.u)? * b_digital,
            Architecture::Fh => {
                let mut b = CMatrix::zeros(d.m, d.u);
                b.rows_mut(0, d.u).copy_from(b_digital);
                b
            }
        })
    }

    /// Digital precoder at one `alpha`, normalized to `p_out`.
    pub fn digital(&self, alpha: f64, p_out: f64) -> Result<(CMatrix, f64)> {
        let u = self.g.nrows();
        let reg = &self.g * self.g.adjoint() + CMatrix::identity(u, u) * C64::new(alpha, 0.0);
        let unscaled = self.g.adjoint() * regularized_inverse(&reg, alpha)?;
        let power = self.expansion_power(&unscaled);
        if !(power > 0.0) {
            return Err(Error::ZeroChannel);
        }
        let kappa = (p_out / power).sqrt();
        Ok((unscaled * C64::new(kappa, 0.0), kappa))
    }

    /// Rescales a digital precoder so the radiated power equals `p_out`.
    pub fn normalize(&self, b_digital: &CMatrix, p_out: f64) -> CMatrix {
        let power = self.expansion_power(b_digital);
        if power > 0.0 {
            b_digital * C64::new((p_out / power).sqrt(), 0.0)
        } else {
            b_digital.clone()
        }
    }
}

/// Regularization grid: zero plus half-decade steps around the scale where
/// regularization starts to matter. The grid does not depend on transmit
/// power, which keeps the best grid point's sum-SE monotone in power.
pub fn alpha_grid(stage: &DigitalStage, noise: &NoiseModel) -> Vec<f64> {
    let base = stage.design.u as f64 * noise.sigma2_rx * noise.rx_array_gain * stage.expansion_scale();
    std::iter::once(0.0)
        .chain((-8..=14).map(|k| base * 10f64.powf(k as f64 * 0.5)))
        .collect()
}

/// Closed-form RZF response of one drop for any `alpha` and power, using an
/// eigendecomposition of `G G^H`.
#[derive(Debug, Clone)]
pub struct RzfFamily {
    eigenvalues: Vec<f64>,
    eigenvectors: CMatrix,
    /// Diagonal of `V^H G (T^H T) G^H V`.
    power_weights: Vec<f64>,
    pub tx_noise: Vec<f64>,
}

/// `G B` and the power scale for one grid point.
#[derive(Debug, Clone)]
pub struct RzfResponse {
    pub gb: CMatrix,
    pub kappa: f64,
}

impl RzfFamily {
    pub fn new(stage: &DigitalStage) -> Self {
        let g = &stage.g;
        let k = g * g.adjoint();
        let eig = nalgebra::SymmetricEigen::new(k);
        let v = eig.eigenvectors;
        let j = match &stage.gram {
            ExpansionGram::Scaled(s) => {
                let gv = g.adjoint() * &v;
                return Self {
                    power_weights: gv.column_iter().map(|c| s * c.norm_squared()).collect(),
                    eigenvalues: eig.eigenvalues.iter().map(|x| x.max(0.0)).collect(),
                    eigenvectors: v,
                    tx_noise: stage.tx_noise_coefficients(),
                };
            }
            ExpansionGram::Full(m) => g * m * g.adjoint(),
        };
        let w = v.adjoint() * j * &v;
        Self {
            power_weights: w.diagonal().iter().map(|z| z.re.max(0.0)).collect(),
            eigenvalues: eig.eigenvalues.iter().map(|x| x.max(0.0)).collect(),
            eigenvectors: v,
            tx_noise: stage.tx_noise_coefficients(),
        }
    }

    pub fn num_users(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `None` when `alpha = 0` meets a rank-deficient channel.
    pub fn response(&self, alpha: f64, p_out: f64) -> Option<RzfResponse> {
        let top = self.eigenvalues.iter().cloned().fold(0.0, f64::max);
        if top <= 0.0 {
            return None;
        }
        let floor = 1e-12 * top;
        if alpha <= floor && self.eigenvalues.iter().any(|&l| l < floor) {
            return None;
        }
        let mut power = 0.0;
        let mut shrink = Vec::with_capacity(self.eigenvalues.len());
        for (&l, &w) in self.eigenvalues.iter().zip(&self.power_weights) {
            let d = l + alpha;
            // eigen-directions with no channel energy carry no power either
            if d <= floor {
                shrink.push(0.0);
                continue;
            }
            power += w / (d * d);
            shrink.push(l / d);
        }
        if !(power > 0.0) {
            return None;
        }
        let kappa = (p_out / power).sqrt();
        let v = &self.eigenvectors;
        let mut scaled = v.clone();
        for (i, s) in shrink.iter().enumerate() {
            scaled.column_mut(i).scale_mut(kappa * s);
        }
        Some(RzfResponse {
            gb: scaled * v.adjoint(),
            kappa,
        })
    }
}

/// Sum of per-user `log2(1 + SINR)` from `G B`, transmit noise and receiver noise.
pub fn sum_se_from_response(gb: &CMatrix, tx_noise: &[f64], noise: &NoiseModel) -> f64 {
    per_user_sinr(gb, tx_noise, noise).iter().map(|s| (1.0 + s).log2()).sum()
}

/// Per-user SINR, with post-combining powers scaled by the receive-array gain.
pub fn per_user_sinr(gb: &CMatrix, tx_noise: &[f64], noise: &NoiseModel) -> Vec<f64> {
    let g_rx = noise.rx_array_gain;
    (0..gb.nrows())
        .map(|u| {
            let row = gb.row(u);
            let signal = row[u].norm_sqr();
            let total: f64 = row.iter().map(|z| z.norm_sqr()).sum();
            let interference = (total - signal).max(0.0);
            (signal / g_rx) / ((interference + tx_noise[u]) / g_rx + noise.sigma2_rx)
        })
        .collect()
}

/// Grid point with the best noiseless-transmitter sum-SE; ties go to the
/// larger `alpha`.
pub fn select_alpha_family(family: &RzfFamily, grid: &[f64], p_out: f64, noise: &NoiseModel) -> Option<(f64, RzfResponse)> {
    let silent = vec![0.0; family.num_users()];
    let mut best: Option<(f64, f64, RzfResponse)> = None;
    for &alpha in grid {
        let Some(resp) = family.response(alpha, p_out) else {
            continue;
        };
        let se = sum_se_from_response(&resp.gb, &silent, noise);
        let better = match &best {
            None => true,
            Some((_, b, _)) => se >= *b - 1e-12 * b.abs().max(1e-300),
        };
        if better {
            best = Some((alpha, se, resp));
        }
    }
    best.map(|(a, _, r)| (a, r))
}

/// Regularization chosen for `design` on one drop.
pub fn select_alpha(c: &CMatrix, design: &ArrayDesign, noise: &NoiseModel) -> Result<f64> {
    let stage = DigitalStage::new(c, design)?;
    let family = RzfFamily::new(&stage);
    select_alpha_family(&family, &alpha_grid(&stage, noise), design.p_out(), noise)
        .map(|(a, _)| a)
        .ok_or(Error::ZeroChannel)
}

/// Full two-stage precoder for `design` on one drop.
///
/// With finite `dac_bits`, the digital precoder is rounded to a fixed-point
/// grid two bits finer than the DAC and renormalized.
pub fn precode(c: &CMatrix, design: &ArrayDesign, noise: &NoiseModel) -> Result<PrecoderPair> {
    let stage = DigitalStage::new(c, design)?;
    let family = RzfFamily::new(&stage);
    let p_out = design.p_out();
    let (alpha, _) = select_alpha_family(&family, &alpha_grid(&stage, noise), p_out, noise).ok_or(Error::ZeroChannel)?;
    let (mut b_digital, mut kappa) = stage.digital(alpha, p_out)?;
    if let Some(bits) = design.dac_bits {
        let q = quantize_fixed_point(&b_digital, bits + 2);
        let renormalized = stage.normalize(&q, p_out);
        kappa *= renormalized.norm() / q.norm().max(f64::MIN_POSITIVE);
        b_digital = renormalized;
    }
    let b = stage.lift(&b_digital)?;
    let r = stage.r.clone().unwrap_or_else(|| CMatrix::identity(design.n, design.n));
    Ok(PrecoderPair { r, b, alpha, kappa })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{steering_vector, ArrayGeometry};
    use crate::rng;
    use proptest::prelude::*;

    fn random_c(u: usize, n: usize, seed: u64) -> CMatrix {
        let mut r = rng::stream(seed, 0);
        CMatrix::from_fn(u, n, |_, _| rng::complex_normal(&mut r, 1.0))
    }

    fn noise() -> NoiseModel {
        NoiseModel::new(0.01)
    }

    #[test]
    fn virtual_group_partitions() {
        assert_eq!(virtual_groups(8, 8).unwrap(), (0..8).map(|i| i..i + 1).collect::<Vec<_>>());
        assert_eq!(virtual_groups(16, 4).unwrap(), vec![0..4, 4..8, 8..12, 12..16]);
        assert!(matches!(virtual_groups(8, 3), Err(Error::NonIntegerGrouping { groups: 8, streams: 3 })));
    }

    #[test]
    fn design_validation() {
        assert!(ArrayDesign::da(16, 4).validate().is_ok());
        assert!(ArrayDesign::da(4, 8).validate().is_err());
        assert!(ArrayDesign::sa(64, 16, 4).validate().is_ok());
        let mut d = ArrayDesign::sa(64, 16, 4);
        d.k = 3;
        assert!(d.validate().is_err());
        assert!(ArrayDesign::fh(16, 2, 4).validate().is_err());
        assert_eq!("Fh".parse::<Architecture>().unwrap(), Architecture::Fh);
        assert!("xx".parse::<Architecture>().is_err());
    }

    #[test]
    fn sa_structure_is_block_diagonal_unit_modulus() {
        let d = ArrayDesign::sa(32, 8, 4);
        let c = random_c(4, 32, 1);
        let r = analog_precoder_sa(&c, &d).unwrap();
        for i in 0..32 {
            for m in 0..8 {
                let on_block = i / 4 == m;
                assert_eq!(r[(i, m)].norm() > 0.5, on_block);
                if on_block {
                    assert!((r[(i, m)].norm() - 1.0).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn sa_with_one_group_per_user_conjugates_own_segment() {
        let d = ArrayDesign::sa(16, 4, 4);
        let c = random_c(4, 16, 2);
        let r = analog_precoder_sa(&c, &d).unwrap();
        for m in 0..4 {
            for i in m * 4..(m + 1) * 4 {
                assert!((r[(i, m)] - cis(-c[(m, i)].arg())).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn single_path_sa_blocks_match_steering_phases() {
        let tx = ArrayGeometry::linear(16);
        let a = steering_vector(&tx, 23.0, 0.0).unwrap();
        let c = CMatrix::from_fn(1, 16, |_, i| a[i].conj() * C64::new(0.0, 2.0));
        let r = analog_precoder_sa(&c, &ArrayDesign::sa(16, 4, 1)).unwrap();
        // every block is the steering vector over its segment up to one phase
        for m in 0..4 {
            let rot = r[(m * 4, m)] / a[m * 4];
            for i in m * 4..(m + 1) * 4 {
                assert!((r[(i, m)] - a[i] * rot).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn fh_single_user_steers_full_array() {
        let tx = ArrayGeometry::linear(8);
        let a = steering_vector(&tx, -41.0, 0.0).unwrap();
        let c = CMatrix::from_fn(1, 8, |_, i| a[i].conj());
        let r = analog_precoder_fh(&c, &ArrayDesign::fh(8, 2, 1)).unwrap();
        for i in 0..8 {
            assert!((r[(i, 0)] - a[i]).norm() < 1e-9);
            assert_eq!(r[(i, 1)], ZERO);
        }
        let all = analog_precoder_fh(&random_c(3, 8, 4), &ArrayDesign::fh(8, 3, 3)).unwrap();
        assert!(all.iter().all(|z| (z.norm() - 1.0).abs() < 1e-12));
    }

    #[test]
    fn inactive_fh_chains_carry_no_power() {
        let d = ArrayDesign::fh(16, 6, 3);
        let pair = precode(&random_c(3, 16, 5), &d, &noise()).unwrap();
        for m in 3..6 {
            assert!(pair.b.row(m).iter().all(|z| *z == ZERO));
        }
        assert!((frobenius_sq(&pair.transmit_matrix()) - d.p_out()).abs() < 1e-9 * d.p_out());
    }

    #[test]
    fn phase_quantization() {
        let r = CMatrix::from_row_slice(1, 3, &[cis(0.1), ZERO, cis(2.0)]);
        let q1 = quantize_phase(&r, 1);
        assert!((q1[(0, 0)] - C64::new(1.0, 0.0)).norm() < 1e-12);
        assert_eq!(q1[(0, 1)], ZERO);
        let mut rr = rng::stream(6, 0);
        let r = CMatrix::from_fn(8, 8, |_, _| cis(rng::uniform(&mut rr, -3.14, 3.14)));
        let q = quantize_phase(&r, 4);
        for (a, b) in r.iter().zip(q.iter()) {
            assert!((a.arg() - b.arg()).abs().min(2.0 * std::f64::consts::PI - (a.arg() - b.arg()).abs()) <= 11.25f64.to_radians() + 1e-12);
            assert!((b.norm() - 1.0).abs() < 1e-12);
        }
        assert_eq!(quantize_phase(&q, 4), q);
    }

    #[test]
    fn rzf_limits() {
        let g = random_c(4, 4, 7);
        let eye = CMatrix::identity(4, 4);
        let b = digital_rzf(&g, 0.0, 1.0, &eye).unwrap();
        let gb = &g * &b;
        let scale = gb[(0, 0)];
        assert!((gb - &eye * scale).norm() < 1e-6 * scale.norm());

        let b = digital_rzf(&g, 1e12, 1.0, &eye).unwrap();
        let mrt = g.adjoint();
        let ratio = b[(0, 0)] / mrt[(0, 0)];
        assert!((b - mrt * ratio).norm() < 1e-6 * ratio.norm() * g.norm());
    }

    #[test]
    fn rzf_singular_at_zero_alpha() {
        let row = random_c(1, 4, 8);
        let g = CMatrix::from_rows(&[row.row(0).into_owned(), row.row(0).into_owned()]);
        let eye = CMatrix::identity(4, 4);
        assert!(matches!(digital_rzf(&g, 0.0, 1.0, &eye), Err(Error::SingularEffectiveChannel { .. })));
        assert!(digital_rzf(&g, 0.1, 1.0, &eye).is_ok());
    }

    #[test]
    fn single_user_sinr_is_alpha_invariant() {
        let c = random_c(1, 16, 9);
        let d = ArrayDesign::da(16, 1).with_power_dbm(30.0);
        let stage = DigitalStage::new(&c, &d).unwrap();
        let family = RzfFamily::new(&stage);
        let silent = [0.0];
        let values: Vec<f64> = alpha_grid(&stage, &noise())
            .iter()
            .filter_map(|&a| family.response(a, d.p_out()))
            .map(|r| per_user_sinr(&r.gb, &silent, &noise())[0])
            .collect();
        assert!(values.len() >= 20);
        for v in &values {
            assert!((v - values[0]).abs() <= 1e-6 * values[0]);
        }
    }

    #[test]
    fn orthogonal_users_at_high_snr_select_small_alpha() {
        let mut c = CMatrix::zeros(2, 8);
        for i in 0..4 {
            c[(0, i)] = C64::new(1.0, 0.0);
            c[(1, i + 4)] = C64::new(0.0, 1.0);
        }
        let d = ArrayDesign::da(8, 2).with_power_dbm(60.0);
        let n = NoiseModel::new(1e-6);
        let stage = DigitalStage::new(&c, &d).unwrap();
        let grid = alpha_grid(&stage, &n);
        let alpha = select_alpha(&c, &d, &n).unwrap();
        // orthogonal users: every alpha gives zero interference, so all
        // grid points tie and the largest one wins
        assert_eq!(alpha, *grid.last().unwrap());

        // nearly orthogonal users at high SNR prefer the ZF end
        c[(0, 4)] = C64::new(0.3, 0.0);
        let alpha = select_alpha(&c, &d, &n).unwrap();
        let family = RzfFamily::new(&DigitalStage::new(&c, &d).unwrap());
        let silent = [0.0, 0.0];
        let se = |a: f64| sum_se_from_response(&family.response(a, d.p_out()).unwrap().gb, &silent, &n);
        for &a in &grid {
            assert!(se(alpha) >= se(a) - 1e-9);
        }
        // ZF-like: the regularization is negligible against the channel gram
        let trace: f64 = (0..2).map(|u| c.row(u).norm_squared()).sum();
        assert!(alpha < 1e-4 * trace);
        assert!((se(alpha) - se(0.0)).abs() < 1e-6 * se(0.0));
    }

    #[test]
    fn interference_free_regime_selects_largest_alpha() {
        // at vanishing power every user is noise-limited, MRT wins
        let c = random_c(3, 12, 10);
        let d = ArrayDesign::da(12, 3).with_power_dbm(-60.0);
        let n = NoiseModel::new(1.0);
        let stage = DigitalStage::new(&c, &d).unwrap();
        let alpha = select_alpha(&c, &d, &n).unwrap();
        assert_eq!(alpha, *alpha_grid(&stage, &n).last().unwrap());
    }

    #[test]
    fn fast_family_matches_explicit_precoder() {
        for (i, d) in [ArrayDesign::da(16, 4), ArrayDesign::sa(16, 8, 4), ArrayDesign::fh(16, 6, 4)]
            .into_iter()
            .enumerate()
        {
            let d = d.with_power_dbm(40.0);
            let c = random_c(4, 16, 11 + i as u64);
            let stage = DigitalStage::new(&c, &d).unwrap();
            let family = RzfFamily::new(&stage);
            for &alpha in &[0.0, 0.03, 2.0] {
                let resp = family.response(alpha, d.p_out()).unwrap();
                let (bd, kappa) = stage.digital(alpha, d.p_out()).unwrap();
                let b = stage.lift(&bd).unwrap();
                let r = stage.r.clone().unwrap_or_else(|| CMatrix::identity(16, 16));
                let gb = &c * &r * &b;
                assert!((&gb - &resp.gb).norm() < 1e-9 * gb.norm(), "{}", d.architecture);
                assert!((kappa - resp.kappa).abs() < 1e-9 * kappa);
                assert!((frobenius_sq(&(&r * &b)) - d.p_out()).abs() < 1e-9 * d.p_out());
            }
        }
    }

    #[test]
    fn sa_rows_shared_within_virtual_group() {
        let d = ArrayDesign::sa(32, 8, 2).with_dac_bits(Some(6));
        let pair = precode(&random_c(2, 32, 12), &d, &noise()).unwrap();
        for m in 0..8 {
            let lead = (m / 4) * 4;
            assert_eq!(pair.b.row(m), pair.b.row(lead));
        }
    }

    #[test]
    fn single_user_sa_and_fh_have_identical_gain() {
        let c = random_c(1, 64, 13);
        let sa = precode(&c, &ArrayDesign::sa(64, 4, 1), &noise()).unwrap();
        let fh = precode(&c, &ArrayDesign::fh(64, 4, 1), &noise()).unwrap();
        let g_sa = (&c * sa.transmit_matrix())[(0, 0)].norm();
        let g_fh = (&c * fh.transmit_matrix())[(0, 0)].norm();
        assert!((g_sa - g_fh).abs() < 1e-9 * g_fh);
        assert!(sa.r.iter().any(|z| *z == ZERO));
        assert!(fh.r.column(0).iter().all(|z| (z.norm() - 1.0).abs() < 1e-12));
    }

    #[test]
    fn phase_quantized_single_path_gain_bound() {
        for n in [4usize, 16, 64] {
            let a = steering_vector(&ArrayGeometry::linear(n), 17.3, 0.0).unwrap();
            let c = CMatrix::from_fn(1, n, |_, i| a[i].conj());
            for q in 2..=5u32 {
                let d = ArrayDesign::fh(n, 1, 1).with_ps_bits(Some(q));
                let stage = DigitalStage::new(&c, &d).unwrap();
                // normalized beamforming gain |c r|^2 / N
                let gain = stage.g[(0, 0)].norm_sqr() / n as f64;
                let bound = n as f64 * (std::f64::consts::PI / 2f64.powi(q as i32)).cos().powi(2);
                assert!(gain >= bound - 1e-9, "n {n} q {q}: {gain} < {bound}");
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn power_and_structure_hold(seed in any::<u64>(), arch in 0usize..3, ps in prop::option::of(1u32..6), dbm in -10.0f64..70.0) {
            let d = match arch {
                0 => ArrayDesign::da(16, 4),
                1 => ArrayDesign::sa(16, 4, 2),
                _ => ArrayDesign::fh(16, 5, 3),
            }.with_ps_bits(ps).with_power_dbm(dbm);
            let c = random_c(d.u, 16, seed);
            let pair = precode(&c, &d, &noise()).unwrap();
            let p = frobenius_sq(&pair.transmit_matrix());
            prop_assert!((p - d.p_out()).abs() <= 1e-9 * d.p_out());
            match d.architecture {
                Architecture::Da => prop_assert_eq!(&pair.r, &CMatrix::identity(16, 16)),
                Architecture::Sa => {
                    for i in 0..16 {
                        for m in 0..d.m {
                            let z = pair.r[(i, m)];
                            if i / d.k == m { prop_assert!((z.norm() - 1.0).abs() < 1e-12); } else { prop_assert_eq!(z, ZERO); }
                        }
                    }
                }
                Architecture::Fh => {
                    for m in 0..d.m {
                        for i in 0..16 {
                            let z = pair.r[(i, m)];
                            if m < d.u { prop_assert!((z.norm() - 1.0).abs() < 1e-12); } else { prop_assert_eq!(z, ZERO); }
                        }
                    }
                }
            }
        }
    }
}
