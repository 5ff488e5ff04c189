//! Water-filling, the fully-digital rate limit, and SVD-based hybrid
//! beamformers with their constant-modulus projection.

use faer::{c64, Mat, MatRef};
use serde::{Deserialize, Serialize};

use crate::channel_model::SystemDims;
use crate::error::{Error, Result};
use crate::linalg::{all_finite, canonical_rotation, unit_phase};

/// Singular values below this fraction of the largest are treated as zero.
pub const RANK_TOL: f64 = 1e-12;

const BISECTION_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BeamformerKind {
    /// Semi-unitary analog stages, no modulus constraint.
    Relaxed,
    /// Constant-modulus analog stages, power-normalized digital precoder.
    Projected,
    /// One RF chain per antenna.
    FullyDigital,
}

#[derive(Clone, Debug)]
pub struct HybridBeamformers {
    /// `N_r × N_r^RF`
    pub w_rf: Mat<c64>,
    /// `N_r^RF × N_s`
    pub w_bb: Mat<c64>,
    /// `N_t × N_t^RF`
    pub f_rf: Mat<c64>,
    /// `N_t^RF × N_s`
    pub f_bb: Mat<c64>,
    pub kind: BeamformerKind,
}

impl HybridBeamformers {
    pub fn combiner(&self) -> Mat<c64> {
        &self.w_rf * &self.w_bb
    }

    pub fn precoder(&self) -> Mat<c64> {
        &self.f_rf * &self.f_bb
    }

    pub fn n_s(&self) -> usize {
        self.f_bb.ncols()
    }

    /// Largest deviation of any analog entry from its required modulus
    /// (`1/√N_r` for the combiner, `1/√N_t` for the precoder).
    pub fn max_modulus_error(&self) -> f64 {
        let dev = |a: &Mat<c64>| {
            let target = 1.0 / (a.nrows() as f64).sqrt();
            let mut worst = 0.0f64;
            for j in 0..a.ncols() {
                for i in 0..a.nrows() {
                    worst = worst.max((a[(i, j)].norm() - target).abs());
                }
            }
            worst
        };
        dev(&self.w_rf).max(dev(&self.f_rf))
    }

    pub fn transmit_power(&self) -> f64 {
        self.precoder().squared_norm_l2()
    }
}

/// Per-stream powers and the water level that produced them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerAllocation {
    pub per_stream_power: Vec<f64>,
    pub water_level: f64,
}

/// Allocates `p_tx` over the first `n_s` entries of `gains` (squared singular
/// values) as `P_ℓ = max(μ − σ²/λ_ℓ, 0)` with `Σ P_ℓ = p_tx`.
///
/// The water level is bracketed by bisection, then recomputed in closed form
/// on the resulting active set so the sum constraint holds to rounding.
pub fn water_filling(gains: &[f64], p_tx: f64, noise_var: f64, n_s: usize) -> Result<PowerAllocation> {
    if !(p_tx > 0.0 && p_tx.is_finite()) {
        return Err(Error::InvalidInput(format!("transmit power must be positive, got {p_tx}")));
    }
    if !(noise_var > 0.0 && noise_var.is_finite()) {
        return Err(Error::InvalidInput(format!("noise variance must be positive, got {noise_var}")));
    }
    if n_s == 0 || n_s > gains.len() {
        return Err(Error::InvalidInput(format!("{n_s} streams requested from {} gains", gains.len())));
    }
    let gains = &gains[..n_s];
    if gains.iter().any(|&g| !(g >= 0.0 && g.is_finite())) {
        return Err(Error::InvalidInput(format!("gains must be finite and nonnegative: {gains:?}")));
    }
    // Inverse-gain floor σ²/λ_ℓ; zero-gain streams never switch on.
    let floor: Vec<f64> = gains.iter().map(|&g| if g > 0.0 { noise_var / g } else { f64::INFINITY }).collect();
    let max_floor = floor.iter().copied().filter(|f| f.is_finite()).fold(f64::NEG_INFINITY, f64::max);
    if max_floor == f64::NEG_INFINITY {
        return Err(Error::NoUsableStream);
    }

    let filled = |mu: f64| floor.iter().map(|&f| (mu - f).max(0.0)).sum::<f64>();
    let (mut lo, mut hi) = (0.0f64, p_tx + max_floor);
    while hi - lo > BISECTION_TOL {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if filled(mid) < p_tx {
            lo = mid;
        } else {
            hi = mid;
        }
    }

    let mut active: Vec<bool> = floor.iter().map(|&f| f < hi).collect();
    let mut mu;
    loop {
        let count = active.iter().filter(|&&a| a).count();
        if count == 0 {
            return Err(Error::NoUsableStream);
        }
        let sum_floor: f64 = floor.iter().zip(&active).filter(|(_, &a)| a).map(|(f, _)| f).sum();
        mu = (p_tx + sum_floor) / count as f64;
        let mut changed = false;
        for (a, &f) in active.iter_mut().zip(&floor) {
            if *a && f >= mu {
                *a = false;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    let per_stream_power = floor.iter().zip(&active).map(|(&f, &a)| if a { mu - f } else { 0.0 }).collect();
    Ok(PowerAllocation { per_stream_power, water_level: mu })
}

/// Squared singular values in descending order with near-zero ones clamped.
fn channel_gains(h: MatRef<'_, c64>) -> Result<Vec<f64>> {
    if h.nrows() == 0 || h.ncols() == 0 {
        return Err(Error::InvalidInput("channel matrix is empty".into()));
    }
    if !all_finite(h) {
        return Err(Error::InvalidInput("channel matrix has non-finite entries".into()));
    }
    let s = h.singular_values().map_err(|e| Error::Decomposition(format!("{e:?}")))?;
    Ok(clamp_gains(&s))
}

fn clamp_gains(s: &[f64]) -> Vec<f64> {
    let top = s.first().copied().unwrap_or(0.0);
    s.iter().map(|&x| if x > RANK_TOL * top { x * x } else { 0.0 }).collect()
}

fn padded(mut gains: Vec<f64>, n_s: usize) -> Vec<f64> {
    if gains.len() < n_s {
        gains.resize(n_s, 0.0);
    }
    gains
}

/// Fully-digital SVD rate with water-filling over the top `n_s` streams
/// (bits/s/Hz).
pub fn r_max(h_tot: MatRef<'_, c64>, p_tx: f64, noise_var: f64, n_s: usize) -> Result<f64> {
    let gains = padded(channel_gains(h_tot)?, n_s);
    let alloc = water_filling(&gains, p_tx, noise_var, n_s)?;
    Ok(alloc.per_stream_power.iter().zip(&gains).map(|(p, g)| (1.0 + p * g / noise_var).log2()).sum())
}

/// Equal-power high-SNR approximation `Σ_ℓ log2(P/(N_s σ²) · λ_ℓ)`.
pub fn high_snr_rate(h_tot: MatRef<'_, c64>, p_tx: f64, noise_var: f64, n_s: usize) -> Result<f64> {
    let gains = padded(channel_gains(h_tot)?, n_s);
    let snr = p_tx / (n_s as f64 * noise_var);
    Ok(gains[..n_s].iter().map(|g| (snr * g).log2()).sum())
}

/// `N_s·log2(P/(N_s σ²)) + log2(‖H‖_F²)`.
pub fn high_snr_bound(h_tot: MatRef<'_, c64>, p_tx: f64, noise_var: f64, n_s: usize) -> f64 {
    n_s as f64 * (p_tx / (n_s as f64 * noise_var)).log2() + h_tot.squared_norm_l2().log2()
}

/// Full SVD with descending singular values and phase-canonical singular
/// vectors: each left vector is rotated so its largest entry is real and
/// nonnegative, and its right partner gets the same rotation.
fn canonical_svd(h: MatRef<'_, c64>) -> Result<(Mat<c64>, Vec<f64>, Mat<c64>)> {
    if !all_finite(h) {
        return Err(Error::InvalidInput("channel matrix has non-finite entries".into()));
    }
    let svd = h.svd().map_err(|e| Error::Decomposition(format!("{e:?}")))?;
    let mut u = svd.U().to_owned();
    let mut v = svd.V().to_owned();
    let s: Vec<f64> = svd.S().column_vector().iter().map(|x| x.re).collect();
    let paired = s.len();
    for k in 0..u.ncols() {
        let rot = canonical_rotation(u.col(k));
        for i in 0..u.nrows() {
            u[(i, k)] *= rot;
        }
        if k < paired {
            for i in 0..v.nrows() {
                v[(i, k)] *= rot;
            }
        }
    }
    for k in paired..v.ncols() {
        let rot = canonical_rotation(v.col(k));
        for i in 0..v.nrows() {
            v[(i, k)] *= rot;
        }
    }
    Ok((u, s, v))
}

fn svd_beamformers(
    h_tot: MatRef<'_, c64>,
    n_r_rf: usize,
    n_t_rf: usize,
    n_s: usize,
    p_tx: f64,
    noise_var: f64,
    kind: BeamformerKind,
) -> Result<HybridBeamformers> {
    let (u, s, v) = canonical_svd(h_tot)?;
    let gains = padded(clamp_gains(&s), n_s);
    let alloc = water_filling(&gains, p_tx, noise_var, n_s)?;

    let w_rf = u.get(.., ..n_r_rf).to_owned();
    let w_bb = w_rf.adjoint() * u.get(.., ..n_s);
    let f_rf = v.get(.., ..n_t_rf).to_owned();
    let mut f_bb = f_rf.adjoint() * v.get(.., ..n_s);
    for (l, p) in alloc.per_stream_power.iter().enumerate() {
        let amp = p.sqrt();
        for i in 0..f_bb.nrows() {
            f_bb[(i, l)] *= amp;
        }
    }
    Ok(HybridBeamformers { w_rf, w_bb, f_rf, f_bb, kind })
}

/// Optimal beamformers of the modulus-relaxed problem: analog stages are the
/// leading `N^RF` singular vectors, the digital stages select the top `N_s`
/// and apply water-filled powers.
pub fn relaxed_beamformers(
    h_tot: MatRef<'_, c64>,
    dims: &SystemDims,
    p_tx: f64,
    noise_var: f64,
) -> Result<HybridBeamformers> {
    dims.validate()?;
    if h_tot.nrows() != dims.n_r || h_tot.ncols() != dims.n_t {
        return Err(Error::DimensionMismatch(format!(
            "channel is {}x{}, dims expect {}x{}",
            h_tot.nrows(),
            h_tot.ncols(),
            dims.n_r,
            dims.n_t
        )));
    }
    svd_beamformers(h_tot, dims.n_r_rf, dims.n_t_rf, dims.n_s, p_tx, noise_var, BeamformerKind::Relaxed)
}

/// SVD transmission with one RF chain per antenna; attains `r_max`.
pub fn fully_digital(h_tot: MatRef<'_, c64>, p_tx: f64, noise_var: f64, n_s: usize) -> Result<HybridBeamformers> {
    let (n_r, n_t) = (h_tot.nrows(), h_tot.ncols());
    if n_s == 0 || n_s > n_r.min(n_t) {
        return Err(Error::InvalidInput(format!("{n_s} streams do not fit a {n_r}x{n_t} channel")));
    }
    svd_beamformers(h_tot, n_r, n_t, n_s, p_tx, noise_var, BeamformerKind::FullyDigital)
}

/// Phase-only analog stages (`1/√N` modulus) with the digital precoder
/// rescaled to spend exactly `p_tx`.
pub fn project_hybrid(relaxed: &HybridBeamformers, p_tx: f64) -> Result<HybridBeamformers> {
    if relaxed.kind != BeamformerKind::Relaxed {
        return Err(Error::InvalidInput(format!("projection expects relaxed beamformers, got {:?}", relaxed.kind)));
    }
    if !(p_tx > 0.0 && p_tx.is_finite()) {
        return Err(Error::InvalidInput(format!("transmit power must be positive, got {p_tx}")));
    }
    let phase_only = |a: &Mat<c64>| {
        let scale = 1.0 / (a.nrows() as f64).sqrt();
        Mat::from_fn(a.nrows(), a.ncols(), |i, j| unit_phase(a[(i, j)]) * scale)
    };
    let w_rf = phase_only(&relaxed.w_rf);
    let f_rf = phase_only(&relaxed.f_rf);
    let norm = (&f_rf * &relaxed.f_bb).norm_l2();
    if norm.is_nan() || norm <= 0.0 {
        return Err(Error::DegeneratePrecoder);
    }
    let f_bb = &relaxed.f_bb * faer::Scale(c64::from(p_tx.sqrt() / norm));
    Ok(HybridBeamformers { w_rf, w_bb: relaxed.w_bb.clone(), f_rf, f_bb, kind: BeamformerKind::Projected })
}
