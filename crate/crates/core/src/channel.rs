//! Sparse-scattering mmW MU-MIMO channels and receive combiners.
//!
//! Each user sees a few scattering clusters of rays. Every ray carries a
//! complex gain, a departure direction at the transmit array and an arrival
//! direction at the receive array:
//!
//! ```text
//! H_u = sum_l g_l a_rx(aoa_l) a_tx(aod_l)^H
//! ```
//!
//! Ray gains are circularly-symmetric Gaussian with variances chosen so that
//! `E|H_ij|^2 = 1`. Absolute link gain is carried by the link budget.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    cis, phases_of, principal_eigenvector, principal_left_singular_vector, CMatrix, CRowVector, CVector, C64, ONE,
};
use crate::rng::{self, StreamRng};

/// Element arrangement of an antenna array.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum ArrayLayout {
    UniformLinear,
    UniformPlanar { rows: usize, cols: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArrayGeometry {
    pub num_elements: usize,
    pub layout: ArrayLayout,
    /// Element spacing in wavelengths.
    #[serde(default = "half_wavelength")]
    pub element_spacing: f64,
}

fn half_wavelength() -> f64 {
    0.5
}

impl ArrayGeometry {
    pub fn linear(num_elements: usize) -> Self {
        Self {
            num_elements,
            layout: ArrayLayout::UniformLinear,
            element_spacing: 0.5,
        }
    }

    pub fn planar(rows: usize, cols: usize) -> Self {
        Self {
            num_elements: rows * cols,
            layout: ArrayLayout::UniformPlanar { rows, cols },
            element_spacing: 0.5,
        }
    }

    /// Planar array of `n` elements, as close to square as `n` allows.
    pub fn near_square(n: usize) -> Self {
        let mut rows = 1;
        let mut r = 1;
        while r * r <= n {
            if n % r == 0 {
                rows = r;
            }
            r += 1;
        }
        Self::planar(rows, n / rows.max(1))
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_elements == 0 {
            return Err(Error::InvalidGeometry("array has zero elements".into()));
        }
        if !(self.element_spacing > 0.0) || !self.element_spacing.is_finite() {
            return Err(Error::InvalidGeometry(format!(
                "element spacing must be positive, got {}",
                self.element_spacing
            )));
        }
        if let ArrayLayout::UniformPlanar { rows, cols } = self.layout {
            if rows * cols != self.num_elements {
                return Err(Error::InvalidGeometry(format!(
                    "{rows} x {cols} planar layout does not hold {} elements",
                    self.num_elements
                )));
            }
        }
        Ok(())
    }
}

/// Array response toward (`azimuth_deg`, `elevation_deg`).
///
/// Entries are unit-magnitude with element 0 at zero phase. Linear arrays lie
/// along the horizontal axis; planar arrays index elements row-major with rows
/// stacked vertically.
pub fn steering_vector(geom: &ArrayGeometry, azimuth_deg: f64, elevation_deg: f64) -> Result<CVector> {
    geom.validate()?;
    for (name, a) in [("azimuth", azimuth_deg), ("elevation", elevation_deg)] {
        if !(-90.0..=90.0).contains(&a) {
            return Err(Error::InvalidArgument(format!("{name} {a} deg outside [-90, 90]")));
        }
    }
    let (az, el) = (azimuth_deg.to_radians(), elevation_deg.to_radians());
    let k = 2.0 * std::f64::consts::PI * geom.element_spacing;
    let horiz = k * az.sin() * el.cos();
    let vert = k * el.sin();
    let v = match geom.layout {
        ArrayLayout::UniformLinear => CVector::from_fn(geom.num_elements, |n, _| cis(horiz * n as f64)),
        ArrayLayout::UniformPlanar { cols, .. } => CVector::from_fn(geom.num_elements, |n, _| {
            let (r, c) = (n / cols, n % cols);
            cis(horiz * c as f64 + vert * r as f64)
        }),
    };
    Ok(v)
}

/// How `rays_per_cluster` is interpreted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RayCount {
    /// Every NLOS cluster carries `rays_per_cluster` rays.
    #[default]
    PerCluster,
    /// `rays_per_cluster` rays are spread round-robin over all NLOS clusters.
    Total,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClusterParams {
    /// Number of NLOS clusters. A LOS cluster is added on top when requested.
    pub num_clusters: usize,
    pub rays_per_cluster: usize,
    pub ray_count: RayCount,
    /// Rays in the LOS cluster.
    pub los_rays: usize,
    /// LOS cluster power over the power of one NLOS cluster.
    pub los_boost_db: f64,
    pub gain_normalization: GainNormalization,
    pub azimuth_range: (f64, f64),
    pub elevation_range: (f64, f64),
    /// Standard deviation of the Laplacian ray offsets around a cluster center.
    pub ray_angle_spread_deg: f64,
    /// Scheduler: keep LOS departure directions of co-scheduled users apart.
    pub unique_los: bool,
    pub min_los_separation_deg: f64,
}

impl Default for ClusterParams {
    fn default() -> Self {
        Self {
            num_clusters: 3,
            rays_per_cluster: 20,
            ray_count: RayCount::PerCluster,
            los_rays: 1,
            los_boost_db: 10.0,
            gain_normalization: GainNormalization::PerDrop,
            azimuth_range: (-60.0, 60.0),
            elevation_range: (-30.0, 30.0),
            ray_angle_spread_deg: 10.0,
            unique_los: false,
            min_los_separation_deg: 4.0,
        }
    }
}

impl ClusterParams {
    pub fn validate(&self) -> Result<()> {
        if self.num_clusters == 0 {
            return Err(Error::InvalidArgument("at least one NLOS cluster is required".into()));
        }
        if self.rays_per_cluster == 0 || self.los_rays == 0 {
            return Err(Error::InvalidArgument("clusters need at least one ray".into()));
        }
        if !(self.ray_angle_spread_deg > 0.0) {
            return Err(Error::InvalidArgument("ray angle spread must be positive".into()));
        }
        for &(lo, hi) in &[self.azimuth_range, self.elevation_range] {
            if !(lo < hi) || lo < -90.0 || hi > 90.0 {
                return Err(Error::EmptyAngleRange { lo, hi });
            }
        }
        Ok(())
    }

    fn nlos_ray_counts(&self) -> Vec<usize> {
        match self.ray_count {
            RayCount::PerCluster => vec![self.rays_per_cluster; self.num_clusters],
            RayCount::Total => (0..self.num_clusters)
                .map(|c| {
                    let base = self.rays_per_cluster / self.num_clusters;
                    base + usize::from(c < self.rays_per_cluster % self.num_clusters)
                })
                .filter(|&n| n > 0)
                .collect(),
        }
    }
}

/// How ray gains meet their cluster power.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GainNormalization {
    /// Ray gains are drawn with the cluster power as their expected total.
    Expected,
    /// Ray gains of each cluster are rescaled so that their total power
    /// equals the cluster power in every drop.
    #[default]
    PerDrop,
}

/// Direction in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Direction {
    pub azimuth: f64,
    pub elevation: f64,
}

impl Direction {
    fn separation(&self, other: &Direction) -> f64 {
        (self.azimuth - other.azimuth).hypot(self.elevation - other.elevation)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayPath {
    /// `None` marks the LOS cluster.
    pub cluster: Option<usize>,
    pub gain: C64,
    pub departure: Direction,
    pub arrival: Direction,
}

/// One Monte Carlo drop: channels and combiners for every user.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    pub per_user_h: Vec<CMatrix>,
    pub per_user_w: Vec<CVector>,
    pub paths: Vec<Vec<RayPath>>,
    pub seed: u64,
}

impl ChannelSet {
    pub fn num_users(&self) -> usize {
        self.per_user_h.len()
    }

    pub fn num_tx(&self) -> usize {
        self.per_user_h.first().map_or(0, |h| h.ncols())
    }

    pub fn num_rx(&self) -> usize {
        self.per_user_h.first().map_or(0, |h| h.nrows())
    }

    /// Post-combining channel `C`, row `u` equal to `w_u^H H_u`.
    pub fn post_combining(&self) -> CMatrix {
        let rows: Vec<_> = self
            .per_user_h
            .iter()
            .zip(&self.per_user_w)
            .map(|(h, w)| w.adjoint() * h)
            .collect();
        CMatrix::from_rows(&rows)
    }

    pub fn combined(&self) -> CombinedChannel {
        CombinedChannel {
            rows: self.post_combining(),
            rx_elements: self.num_rx(),
        }
    }
}

/// Post-combining channel of one drop without the full MIMO matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct CombinedChannel {
    /// `U x N_tx`; row `u` is `w_u^H H_u`.
    pub rows: CMatrix,
    pub rx_elements: usize,
}

fn los_power_split(params: &ClusterParams, los: bool) -> (f64, f64) {
    let clusters = params.nlos_ray_counts().len() as f64;
    let boost = if los { crate::linalg::db_to_lin(params.los_boost_db) } else { 0.0 };
    let per_cluster = 1.0 / (clusters + boost);
    (per_cluster, boost * per_cluster)
}

fn draw_direction(rng: &mut StreamRng, params: &ClusterParams) -> Direction {
    Direction {
        azimuth: rng::uniform(rng, params.azimuth_range.0, params.azimuth_range.1),
        elevation: rng::uniform(rng, params.elevation_range.0, params.elevation_range.1),
    }
}

fn jitter(rng: &mut StreamRng, center: Direction, spread: f64) -> Direction {
    Direction {
        azimuth: (center.azimuth + rng::laplacian(rng, spread)).clamp(-90.0, 90.0),
        elevation: (center.elevation + rng::laplacian(rng, spread)).clamp(-90.0, 90.0),
    }
}

fn scheduled_los_departures(params: &ClusterParams, num_users: usize, seed: u64) -> Vec<Direction> {
    const MAX_TRIES: usize = 1000;
    let mut rng = rng::stream(seed, rng::SCHEDULER_STREAM);
    let mut picked: Vec<Direction> = Vec::with_capacity(num_users);
    for _ in 0..num_users {
        let mut candidate = draw_direction(&mut rng, params);
        for _ in 0..MAX_TRIES {
            if picked
                .iter()
                .all(|p| p.separation(&candidate) >= params.min_los_separation_deg)
            {
                break;
            }
            candidate = draw_direction(&mut rng, params);
        }
        picked.push(candidate);
    }
    picked
}

/// Draws the ray geometry and gains of every user in one drop.
///
/// The result does not depend on array sizes, so drops with a common seed
/// share their propagation environment across array geometries.
pub fn draw_paths(params: &ClusterParams, num_users: usize, los: bool, seed: u64) -> Result<Vec<Vec<RayPath>>> {
    params.validate()?;
    if num_users == 0 {
        return Err(Error::InvalidArgument("at least one user is required".into()));
    }
    let scheduled = (los && params.unique_los).then(|| scheduled_los_departures(params, num_users, seed));
    let counts = params.nlos_ray_counts();
    let (cluster_power, los_power) = los_power_split(params, los);

    let users = (0..num_users)
        .map(|u| {
            let mut rng = rng::user_stream(seed, u);
            let mut rays = Vec::new();
            if los {
                let aod = match &scheduled {
                    Some(dirs) => dirs[u],
                    None => draw_direction(&mut rng, params),
                };
                let aoa = draw_direction(&mut rng, params);
                let var = los_power / params.los_rays as f64;
                for _ in 0..params.los_rays {
                    let (departure, arrival) = if params.los_rays == 1 {
                        (aod, aoa)
                    } else {
                        (
                            jitter(&mut rng, aod, params.ray_angle_spread_deg),
                            jitter(&mut rng, aoa, params.ray_angle_spread_deg),
                        )
                    };
                    rays.push(RayPath {
                        cluster: None,
                        gain: rng::complex_normal(&mut rng, var),
                        departure,
                        arrival,
                    });
                }
            }
            for (c, &n) in counts.iter().enumerate() {
                let aod = draw_direction(&mut rng, params);
                let aoa = draw_direction(&mut rng, params);
                let var = cluster_power / n as f64;
                for _ in 0..n {
                    let departure = jitter(&mut rng, aod, params.ray_angle_spread_deg);
                    let arrival = jitter(&mut rng, aoa, params.ray_angle_spread_deg);
                    rays.push(RayPath {
                        cluster: Some(c),
                        gain: rng::complex_normal(&mut rng, var),
                        departure,
                        arrival,
                    });
                }
            }
            if params.gain_normalization == GainNormalization::PerDrop {
                normalize_cluster_powers(&mut rays, cluster_power, los_power);
            }
            rays
        })
        .collect();
    Ok(users)
}

fn normalize_cluster_powers(rays: &mut [RayPath], cluster_power: f64, los_power: f64) {
    let mut start = 0;
    while start < rays.len() {
        let id = rays[start].cluster;
        let end = start + rays[start..].iter().take_while(|r| r.cluster == id).count();
        let target = if id.is_none() { los_power } else { cluster_power };
        let drawn: f64 = rays[start..end].iter().map(|r| r.gain.norm_sqr()).sum();
        if drawn > 0.0 {
            let scale = (target / drawn).sqrt();
            for r in &mut rays[start..end] {
                r.gain *= scale;
            }
        }
        start = end;
    }
}

struct Responses {
    rx: CMatrix,
    tx_scaled_adjoint: CMatrix,
}

/// `H = A_rx * (D A_tx^H)` in factored form.
fn responses(paths: &[RayPath], tx: &ArrayGeometry, rx: &ArrayGeometry) -> Result<Responses> {
    let l = paths.len();
    let mut a_rx = CMatrix::zeros(rx.num_elements, l);
    let mut y = CMatrix::zeros(l, tx.num_elements);
    for (i, p) in paths.iter().enumerate() {
        a_rx.set_column(i, &steering_vector(rx, p.arrival.azimuth, p.arrival.elevation)?);
        let at = steering_vector(tx, p.departure.azimuth, p.departure.elevation)?;
        y.set_row(i, &(at.adjoint() * p.gain));
    }
    Ok(Responses {
        rx: a_rx,
        tx_scaled_adjoint: y,
    })
}

/// Full `N_rx x N_tx` channel matrix of one user.
pub fn channel_matrix(paths: &[RayPath], tx: &ArrayGeometry, rx: &ArrayGeometry) -> Result<CMatrix> {
    let r = responses(paths, tx, rx)?;
    Ok(r.rx * r.tx_scaled_adjoint)
}

/// Receive combiner: phases of the principal left singular vector of `h`,
/// scaled by `1/sqrt(N_rx)`.
pub fn rx_combiner(h: &CMatrix) -> Result<CVector> {
    let u = principal_left_singular_vector(h).ok_or(Error::ZeroChannel)?;
    Ok(normalize_combiner(&u))
}

fn normalize_combiner(u: &CVector) -> CVector {
    let scale = 1.0 / (u.len() as f64).sqrt();
    phases_of(u) * C64::new(scale, 0.0)
}

/// Combiner and post-combining row of one user without forming `H`.
///
/// Uses a thin QR of the receive responses so the eigenproblem is at most
/// `L x L` for `L` rays.
pub fn combine_paths(paths: &[RayPath], tx: &ArrayGeometry, rx: &ArrayGeometry) -> Result<(CVector, CRowVector)> {
    let r = responses(paths, tx, rx)?;
    let u = if r.rx.nrows() <= r.rx.ncols() {
        let h = &r.rx * &r.tx_scaled_adjoint;
        principal_left_singular_vector(&h).ok_or(Error::ZeroChannel)?
    } else {
        let qr = r.rx.clone().qr();
        let (q, rr) = (qr.q(), qr.r());
        let core = rr * &r.tx_scaled_adjoint;
        if core.iter().all(|z| z.norm_sqr() == 0.0) {
            return Err(Error::ZeroChannel);
        }
        let (_, v) = principal_eigenvector(&(&core * core.adjoint()));
        q * v
    };
    let w = normalize_combiner(&u);
    let row = (w.adjoint() * &r.rx) * &r.tx_scaled_adjoint;
    Ok((w, row))
}

/// Generates one drop of `num_users` channels plus their receive combiners.
pub fn generate_channel(
    tx: &ArrayGeometry,
    rx: &ArrayGeometry,
    clusters: &ClusterParams,
    num_users: usize,
    los: bool,
    seed: u64,
) -> Result<ChannelSet> {
    tx.validate()?;
    rx.validate()?;
    let paths = draw_paths(clusters, num_users, los, seed)?;
    let mut per_user_h = Vec::with_capacity(num_users);
    let mut per_user_w = Vec::with_capacity(num_users);
    for p in &paths {
        let h = channel_matrix(p, tx, rx)?;
        per_user_w.push(rx_combiner(&h)?);
        per_user_h.push(h);
    }
    Ok(ChannelSet {
        per_user_h,
        per_user_w,
        paths,
        seed,
    })
}

/// Post-combining channel of one drop, skipping the full channel matrices.
pub fn generate_combined(
    tx: &ArrayGeometry,
    rx: &ArrayGeometry,
    clusters: &ClusterParams,
    num_users: usize,
    los: bool,
    seed: u64,
) -> Result<CombinedChannel> {
    tx.validate()?;
    rx.validate()?;
    let paths = draw_paths(clusters, num_users, los, seed)?;
    let rows = paths
        .iter()
        .map(|p| combine_paths(p, tx, rx).map(|(_, row)| row))
        .collect::<Result<Vec<_>>>()?;
    Ok(CombinedChannel {
        rows: CMatrix::from_rows(&rows),
        rx_elements: rx.num_elements,
    })
}

/// Single-ray channel `g * a_rx a_tx^H`, handy for analytic checks.
pub fn single_path_channel(
    tx: &ArrayGeometry,
    rx: &ArrayGeometry,
    departure: Direction,
    arrival: Direction,
    gain: C64,
) -> Result<CMatrix> {
    let p = RayPath {
        cluster: Some(0),
        gain,
        departure,
        arrival,
    };
    channel_matrix(&[p], tx, rx)
}

/// Scalar `1 x 1` channel helper used by degenerate-geometry callers.
pub fn unit_scalar_channel() -> CMatrix {
    CMatrix::from_element(1, 1, ONE)
}
