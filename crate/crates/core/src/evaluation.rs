//! Achieved spectral efficiency and imperfect-CSI emulation.

use faer::{c64, Mat, MatRef, Side};
use rand::Rng;

use crate::beamforming::HybridBeamformers;
use crate::effective_channel::EffectiveChannel;
use crate::error::{Error, Result};
use crate::linalg::complex_normal;

/// A channel, the beamformers applied to it, and the receiver noise power.
#[derive(Clone, Copy)]
pub struct EvaluationInput<'a> {
    pub h_tot: MatRef<'a, c64>,
    pub beamformers: &'a HybridBeamformers,
    pub noise_var: f64,
}

impl EvaluationInput<'_> {
    pub fn spectral_efficiency(&self) -> Result<f64> {
        spectral_efficiency(self.h_tot, self.beamformers, self.noise_var)
    }
}

/// `log2 det(I + R_n⁻¹ · A Aᴴ)` with `A = Wᴴ H F`, `W = W_RF W_BB`,
/// `F = F_RF F_BB`, `R_n = σ² WᴴW`.
///
/// With `WᴴW = L Lᴴ` this equals `log2 det(I + B Bᴴ / σ²)`, `B = L⁻¹ A`,
/// which is evaluated through a second Cholesky factorization.
pub fn spectral_efficiency(h_tot: MatRef<'_, c64>, bf: &HybridBeamformers, noise_var: f64) -> Result<f64> {
    if !(noise_var > 0.0 && noise_var.is_finite()) {
        return Err(Error::InvalidInput(format!("noise variance must be positive, got {noise_var}")));
    }
    let w = bf.combiner();
    let f = bf.precoder();
    if w.nrows() != h_tot.nrows() || f.nrows() != h_tot.ncols() || w.ncols() != f.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "combiner {}x{}, channel {}x{}, precoder {}x{}",
            w.nrows(),
            w.ncols(),
            h_tot.nrows(),
            h_tot.ncols(),
            f.nrows(),
            f.ncols()
        )));
    }
    let a = w.adjoint() * h_tot * &f;
    let gram = w.adjoint() * &w;
    let llt = gram.llt(Side::Lower).map_err(|_| Error::DegenerateCombiner)?;
    let mut b = a;
    llt.L().solve_lower_triangular_in_place(b.as_mut());

    let n_s = b.nrows();
    let inner = Mat::<c64>::identity(n_s, n_s) + (&b * b.adjoint()) * faer::Scale(c64::from(1.0 / noise_var));
    let inner = crate::linalg::hermitian_part(inner.as_ref());
    let chol = inner.llt(Side::Lower).map_err(|e| Error::Decomposition(format!("log-det factorization: {e:?}")))?;
    let l = chol.L();
    let log_det: f64 = (0..n_s).map(|i| 2.0 * l[(i, i)].re.ln()).sum();
    Ok((log_det / std::f64::consts::LN_2).max(0.0))
}

/// `‖H − Ĥ‖_F² / ‖H‖_F²` over all blocks.
pub fn nmse(h_true: &EffectiveChannel, h_est: &EffectiveChannel) -> Result<f64> {
    if h_true.n_t() != h_est.n_t() || h_true.n_r() != h_est.n_r() || h_true.m() != h_est.m() {
        return Err(Error::DimensionMismatch("effective channels differ in shape".into()));
    }
    let reference = h_true.squared_norm();
    if reference == 0.0 {
        return Err(Error::InvalidInput("NMSE undefined for an all-zero true channel".into()));
    }
    let err: f64 = h_true.blocks().iter().zip(h_est.blocks()).map(|(a, b)| (a - b).squared_norm_l2()).sum();
    Ok(err / reference)
}

fn target_ratio(target_nmse_db: f64) -> Result<Option<f64>> {
    if target_nmse_db == f64::NEG_INFINITY {
        return Ok(None);
    }
    if !target_nmse_db.is_finite() {
        return Err(Error::InvalidInput(format!("bad NMSE target {target_nmse_db} dB")));
    }
    Ok(Some(10f64.powf(target_nmse_db / 10.0)))
}

fn perturb_blocks<R: Rng + ?Sized>(blocks: &[MatRef<'_, c64>], ratio: f64, rng: &mut R) -> Result<Vec<Mat<c64>>> {
    let reference: f64 = blocks.iter().map(|b| b.squared_norm_l2()).sum();
    if reference == 0.0 {
        return Err(Error::InvalidInput("cannot set NMSE relative to an all-zero channel".into()));
    }
    let noise: Vec<Mat<c64>> =
        blocks.iter().map(|b| Mat::from_fn(b.nrows(), b.ncols(), |_, _| complex_normal(rng, 1.0))).collect();
    let noise_energy: f64 = noise.iter().map(|e| e.squared_norm_l2()).sum();
    let scale = (ratio * reference / noise_energy).sqrt();
    Ok(blocks
        .iter()
        .zip(&noise)
        .map(|(b, e)| Mat::from_fn(b.nrows(), b.ncols(), |i, j| b[(i, j)] + e[(i, j)] * scale))
        .collect())
}

/// Adds Gaussian error rescaled so the realized NMSE is exactly
/// `10^(target/10)`. A target of `-∞` dB returns an exact copy.
pub fn perturb_to_nmse<R: Rng + ?Sized>(
    h_true: &EffectiveChannel,
    target_nmse_db: f64,
    rng: &mut R,
) -> Result<EffectiveChannel> {
    match target_ratio(target_nmse_db)? {
        None => Ok(h_true.clone()),
        Some(ratio) => {
            let views: Vec<_> = h_true.blocks().iter().map(|b| b.as_ref()).collect();
            EffectiveChannel::from_blocks(perturb_blocks(&views, ratio, rng)?)
        }
    }
}

/// Same as [`perturb_to_nmse`] for a single matrix (the direct link).
pub fn perturb_matrix_to_nmse<R: Rng + ?Sized>(
    h_true: MatRef<'_, c64>,
    target_nmse_db: f64,
    rng: &mut R,
) -> Result<Mat<c64>> {
    match target_ratio(target_nmse_db)? {
        None => Ok(h_true.to_owned()),
        Some(ratio) => Ok(perturb_blocks(&[h_true], ratio, rng)?.pop().expect("one block")),
    }
}
