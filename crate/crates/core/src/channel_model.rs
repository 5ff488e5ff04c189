//! Geometric mmWave channel synthesis.
//!
//! Each link is a sum of `n_path` rank-one terms `α_s · a_r · a_tᴴ`, where the
//! array responses come from uniform planar arrays (UPA) and the complex gains
//! are drawn with a log-distance path loss plus log-normal shadowing.
//!
//! UPA elements are flattened with the horizontal index outer and the vertical
//! index inner: element `(h, v)` sits at position `h · vertical_count + v`.

use std::f64::consts::PI;

use faer::{c64, Col, Mat};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::linalg::complex_normal;

/// Shape and spacing of a uniform planar array.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UpaGeometry {
    pub horizontal_count: usize,
    pub vertical_count: usize,
    pub spacing_over_wavelength: f64,
}

impl UpaGeometry {
    pub const HALF_WAVELENGTH: f64 = 0.5;

    pub fn new(horizontal_count: usize, vertical_count: usize, spacing_over_wavelength: f64) -> Result<Self> {
        ensure(horizontal_count >= 1 && vertical_count >= 1, || {
            format!("UPA needs at least one element per axis, got {horizontal_count}x{vertical_count}")
        })?;
        ensure(spacing_over_wavelength > 0.0 && spacing_over_wavelength.is_finite(), || {
            format!("element spacing must be positive, got {spacing_over_wavelength}")
        })?;
        Ok(Self { horizontal_count, vertical_count, spacing_over_wavelength })
    }

    /// Near-square layout for `count` elements: the horizontal side is the
    /// largest divisor of `count` not exceeding `√count`.
    pub fn near_square(count: usize, spacing_over_wavelength: f64) -> Result<Self> {
        ensure(count >= 1, || "UPA element count must be positive".into())?;
        let mut h = (count as f64).sqrt().floor() as usize;
        while h > 1 && !count.is_multiple_of(h) {
            h -= 1;
        }
        let h = h.max(1);
        Self::new(h, count / h, spacing_over_wavelength)
    }

    pub fn len(&self) -> usize {
        self.horizontal_count * self.vertical_count
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// UPA response with direction cosines folded into `(f, g)`:
/// entry `(h, v)` is `exp(j·2π·(d/λ)·(h·f + v·g)) / √X`.
pub fn general_upa_vector(geometry: &UpaGeometry, f: f64, g: f64) -> Col<c64> {
    let n = geometry.len();
    let norm = 1.0 / (n as f64).sqrt();
    let k = 2.0 * PI * geometry.spacing_over_wavelength;
    let nv = geometry.vertical_count;
    Col::from_fn(n, |idx| {
        let h = (idx / nv) as f64;
        let v = (idx % nv) as f64;
        c64::from_polar(norm, k * (h * f + v * g))
    })
}

/// Normalized UPA steering vector toward `(azimuth, elevation)`.
pub fn steering_vector(geometry: &UpaGeometry, azimuth: f64, elevation: f64) -> Col<c64> {
    general_upa_vector(geometry, azimuth.sin() * elevation.sin(), elevation.cos())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathKind {
    Los,
    Nlos,
}

/// `PL(d) = alpha + 10·beta·log10(d) + ε`, `ε ~ N(0, sigma_db²)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathLossModel {
    pub alpha: f64,
    pub beta: f64,
    pub sigma_db: f64,
}

impl PathLossModel {
    /// 28 GHz line-of-sight fit.
    pub const LOS: PathLossModel = PathLossModel { alpha: 61.4, beta: 2.0, sigma_db: 5.8 };

    /// 28 GHz non-line-of-sight fit.
    pub const NLOS: PathLossModel = PathLossModel { alpha: 72.0, beta: 2.92, sigma_db: 8.7 };

    pub fn for_kind(kind: PathKind) -> Self {
        match kind {
            PathKind::Los => Self::LOS,
            PathKind::Nlos => Self::NLOS,
        }
    }

    /// Path loss in dB for a given shadowing realization `shadowing_db`.
    pub fn path_loss_db(&self, distance_m: f64, shadowing_db: f64, penetration_db: f64) -> Result<f64> {
        ensure(distance_m > 0.0 && distance_m.is_finite(), || format!("distance must be positive, got {distance_m}"))?;
        ensure(penetration_db >= 0.0, || format!("penetration loss must be nonnegative, got {penetration_db}"))?;
        Ok(self.alpha + 10.0 * self.beta * distance_m.log10() + shadowing_db + penetration_db)
    }
}

/// Draws a path loss (dB). Consumes exactly one standard-normal sample even
/// when `sigma_db == 0`, so RNG streams stay aligned across parameter choices.
pub fn sample_path_loss<R: Rng + ?Sized>(
    model: &PathLossModel,
    distance_m: f64,
    penetration_db: f64,
    rng: &mut R,
) -> Result<f64> {
    let z: f64 = StandardNormal.sample(rng);
    model.path_loss_db(distance_m, model.sigma_db * z, penetration_db)
}

/// One propagation path of a link.
#[derive(Clone, Debug, PartialEq)]
pub struct Path {
    pub gain: c64,
    pub rx_azimuth: f64,
    pub rx_elevation: f64,
    pub tx_azimuth: f64,
    pub tx_elevation: f64,
    pub is_los: bool,
    pub path_loss_db: f64,
}

/// Paths of one link, sorted by descending `|gain|`.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct PathParameters(pub Vec<Path>);

impl PathParameters {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Path> {
        self.0.iter()
    }

    /// Strongest path (index 0 under the sorting invariant).
    pub fn dominant(&self) -> Option<&Path> {
        self.0.first()
    }

    fn sort_by_gain(&mut self) {
        self.0.sort_by(|a, b| b.gain.norm().total_cmp(&a.gain.norm()));
    }
}

/// One link matrix together with the parameters that generated it.
#[derive(Clone, Debug)]
pub struct LinkChannel {
    /// Receive side on rows, transmit side on columns.
    pub matrix: Mat<c64>,
    pub paths: PathParameters,
    pub rx_geometry: UpaGeometry,
    pub tx_geometry: UpaGeometry,
    pub distance_m: f64,
    /// Power-averaged path loss over the link's paths:
    /// `-10·log10(mean_s 10^(-PL_s/10))`.
    pub path_loss_db: f64,
}

impl LinkChannel {
    /// Assemble `Σ_s α_s a_r(s) a_t(s)ᴴ` from explicit paths.
    pub fn from_paths(
        rx_geometry: UpaGeometry,
        tx_geometry: UpaGeometry,
        paths: PathParameters,
        distance_m: f64,
    ) -> Self {
        let matrix = assemble(&rx_geometry, &tx_geometry, &paths);
        let mean_lin = if paths.is_empty() {
            0.0
        } else {
            paths.iter().map(|p| 10f64.powf(-0.1 * p.path_loss_db)).sum::<f64>() / paths.len() as f64
        };
        Self { matrix, paths, rx_geometry, tx_geometry, distance_m, path_loss_db: -10.0 * mean_lin.log10() }
    }

    pub fn rows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn cols(&self) -> usize {
        self.matrix.ncols()
    }
}

fn assemble(rx: &UpaGeometry, tx: &UpaGeometry, paths: &PathParameters) -> Mat<c64> {
    let mut h = Mat::<c64>::zeros(rx.len(), tx.len());
    for p in paths.iter() {
        let ar = steering_vector(rx, p.rx_azimuth, p.rx_elevation);
        let at = steering_vector(tx, p.tx_azimuth, p.tx_elevation);
        for j in 0..tx.len() {
            let c = p.gain * at[j].conj();
            for i in 0..rx.len() {
                h[(i, j)] += ar[i] * c;
            }
        }
    }
    h
}

/// Per-link sampling parameters.
#[derive(Clone, Copy, Debug)]
pub struct LinkSpec {
    pub n_path: usize,
    pub distance_m: f64,
    pub penetration_db: f64,
    /// Draw the first path with line-of-sight parameters.
    pub los_first_path: bool,
}

/// Draws one link. Per path, in order: rx azimuth, rx elevation, tx azimuth,
/// tx elevation, shadowing, gain. Azimuths are U[-π, π), elevations U[0, π).
pub fn sample_link_channel<R: Rng + ?Sized>(
    rx_geometry: &UpaGeometry,
    tx_geometry: &UpaGeometry,
    spec: &LinkSpec,
    los_model: &PathLossModel,
    nlos_model: &PathLossModel,
    rng: &mut R,
) -> Result<LinkChannel> {
    ensure(spec.n_path >= 1, || "a link needs at least one path".into())?;
    // γ² = col·row / N_path
    let gamma2 = (rx_geometry.len() * tx_geometry.len()) as f64 / spec.n_path as f64;

    let mut paths = Vec::with_capacity(spec.n_path);
    for s in 0..spec.n_path {
        let is_los = spec.los_first_path && s == 0;
        let model = if is_los { los_model } else { nlos_model };
        let rx_azimuth = rng.random_range(-PI..PI);
        let rx_elevation = rng.random_range(0.0..PI);
        let tx_azimuth = rng.random_range(-PI..PI);
        let tx_elevation = rng.random_range(0.0..PI);
        let path_loss_db = sample_path_loss(model, spec.distance_m, spec.penetration_db, rng)?;
        let gain = complex_normal(rng, gamma2 * 10f64.powf(-0.1 * path_loss_db));
        paths.push(Path { gain, rx_azimuth, rx_elevation, tx_azimuth, tx_elevation, is_los, path_loss_db });
    }
    let mut paths = PathParameters(paths);
    paths.sort_by_gain();
    Ok(LinkChannel::from_paths(*rx_geometry, *tx_geometry, paths, spec.distance_m))
}

/// Antenna, RF-chain, IRS, and stream counts.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemDims {
    pub n_t: usize,
    pub n_r: usize,
    pub m: usize,
    pub n_t_rf: usize,
    pub n_r_rf: usize,
    pub n_s: usize,
}

impl SystemDims {
    /// 4x4 RX, 8x8 TX, 16x16 IRS, four RF chains per side, four streams.
    pub const SMALL: SystemDims = SystemDims { n_t: 64, n_r: 16, m: 256, n_t_rf: 4, n_r_rf: 4, n_s: 4 };

    /// 16x16 arrays everywhere.
    pub const LARGE: SystemDims = SystemDims { n_t: 256, n_r: 256, m: 256, n_t_rf: 4, n_r_rf: 4, n_s: 4 };

    pub fn validate(&self) -> Result<()> {
        ensure(self.n_t >= 1 && self.n_r >= 1 && self.m >= 1, || {
            format!("antenna and IRS counts must be positive: {self:?}")
        })?;
        ensure(self.n_t_rf >= 1 && self.n_r_rf >= 1 && self.n_s >= 1, || {
            format!("RF-chain and stream counts must be positive: {self:?}")
        })?;
        ensure(self.n_t_rf <= self.n_t && self.n_r_rf <= self.n_r, || format!("RF chains exceed antennas: {self:?}"))?;
        ensure(self.n_s <= self.n_t_rf.min(self.n_r_rf), || format!("streams exceed RF chains: {self:?}"))
    }
}

/// Array shapes for the TX, RX, and IRS.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ArrayLayout {
    pub tx: UpaGeometry,
    pub rx: UpaGeometry,
    pub irs: UpaGeometry,
}

impl ArrayLayout {
    pub fn near_square(dims: &SystemDims, spacing_over_wavelength: f64) -> Result<Self> {
        Ok(Self {
            tx: UpaGeometry::near_square(dims.n_t, spacing_over_wavelength)?,
            rx: UpaGeometry::near_square(dims.n_r, spacing_over_wavelength)?,
            irs: UpaGeometry::near_square(dims.m, spacing_over_wavelength)?,
        })
    }

    fn check(&self, dims: &SystemDims) -> Result<()> {
        if self.tx.len() != dims.n_t || self.rx.len() != dims.n_r || self.irs.len() != dims.m {
            return Err(Error::DimensionMismatch(format!(
                "layout {}/{}/{} elements vs dims n_t={} n_r={} m={}",
                self.tx.len(),
                self.rx.len(),
                self.irs.len(),
                dims.n_t,
                dims.n_r,
                dims.m
            )));
        }
        Ok(())
    }
}

/// Scenario geometry and propagation parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub n_path: usize,
    pub d_ti_range_m: [f64; 2],
    pub d_ir_range_m: [f64; 2],
    /// `d_TR ~ U[d_TI + d_IR - offset, d_TI + d_IR]`.
    pub d_tr_offset_m: f64,
    pub penetration_tr_db: f64,
    pub los_params: PathLossModel,
    pub nlos_params: PathLossModel,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            n_path: 8,
            d_ti_range_m: [50.0, 60.0],
            d_ir_range_m: [10.0, 20.0],
            d_tr_offset_m: 10.0,
            penetration_tr_db: 40.1,
            los_params: PathLossModel::LOS,
            nlos_params: PathLossModel::NLOS,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        ensure(self.n_path >= 1, || "n_path must be at least 1".into())?;
        for (name, [lo, hi]) in [("d_ti_range_m", self.d_ti_range_m), ("d_ir_range_m", self.d_ir_range_m)] {
            ensure(lo > 0.0 && lo <= hi && hi.is_finite(), || {
                format!("{name} must satisfy 0 < lo <= hi, got [{lo}, {hi}]")
            })?;
        }
        ensure(self.d_tr_offset_m >= 0.0 && self.d_tr_offset_m < self.d_ti_range_m[0] + self.d_ir_range_m[0], || {
            format!("d_tr_offset_m must keep d_TR positive, got {}", self.d_tr_offset_m)
        })?;
        ensure(self.penetration_tr_db >= 0.0, || "penetration_tr_db must be nonnegative".into())?;
        for m in [&self.los_params, &self.nlos_params] {
            ensure(m.sigma_db >= 0.0 && m.alpha.is_finite() && m.beta.is_finite(), || {
                format!("bad path-loss parameters {m:?}")
            })?;
        }
        Ok(())
    }
}

/// The three links of the IRS-aided system.
#[derive(Clone, Debug)]
pub struct ChannelTriple {
    /// TX → RX, `N_r × N_t`.
    pub h_tr: LinkChannel,
    /// TX → IRS, `M × N_t`.
    pub h_ti: LinkChannel,
    /// IRS → RX, `N_r × M`.
    pub h_ir: LinkChannel,
}

impl ChannelTriple {
    pub fn check_dims(&self) -> Result<()> {
        let (nr, nt) = (self.h_tr.rows(), self.h_tr.cols());
        let m = self.h_ti.rows();
        if self.h_ti.cols() != nt || self.h_ir.rows() != nr || self.h_ir.cols() != m {
            return Err(Error::DimensionMismatch(format!(
                "H_TR {}x{}, H_TI {}x{}, H_IR {}x{}",
                nr,
                nt,
                m,
                self.h_ti.cols(),
                self.h_ir.rows(),
                self.h_ir.cols()
            )));
        }
        Ok(())
    }
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

/// Draws distances, then H_TR (all NLOS, with penetration loss), H_TI, and
/// H_IR (first path LOS), in that order.
pub fn sample_channel_triple<R: Rng + ?Sized>(
    dims: &SystemDims,
    layout: &ArrayLayout,
    scenario: &ScenarioConfig,
    rng: &mut R,
) -> Result<ChannelTriple> {
    dims.validate()?;
    layout.check(dims)?;
    scenario.validate()?;

    let d_ti = uniform(rng, scenario.d_ti_range_m[0], scenario.d_ti_range_m[1]);
    let d_ir = uniform(rng, scenario.d_ir_range_m[0], scenario.d_ir_range_m[1]);
    let far = d_ti + d_ir;
    let d_tr = uniform(rng, far - scenario.d_tr_offset_m, far);

    let los = &scenario.los_params;
    let nlos = &scenario.nlos_params;
    let link = |distance_m, penetration_db, los_first_path| LinkSpec {
        n_path: scenario.n_path,
        distance_m,
        penetration_db,
        los_first_path,
    };
    let h_tr =
        sample_link_channel(&layout.rx, &layout.tx, &link(d_tr, scenario.penetration_tr_db, false), los, nlos, rng)?;
    let h_ti = sample_link_channel(&layout.irs, &layout.tx, &link(d_ti, 0.0, true), los, nlos, rng)?;
    let h_ir = sample_link_channel(&layout.rx, &layout.irs, &link(d_ir, 0.0, true), los, nlos, rng)?;
    Ok(ChannelTriple { h_tr, h_ti, h_ir })
}
