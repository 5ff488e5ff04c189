//! IRS reflection-vector designs.
//!
//! The proposed design needs only the effective channel: it takes the
//! dominant eigenvector of `Σ_t H_eff,tᴴ H_eff,t` (scaled to `vᴴv = M`) and
//! projects it elementwise onto the unit circle. The asymptotic baseline needs
//! the dominant propagation path of each IRS link, which is only available
//! from the simulator's ground truth.

use std::cmp::Ordering;
use std::f64::consts::PI;

use faer::{c64, Col, MatRef, Side};
use rand::Rng;

use crate::channel_model::{steering_vector, ChannelTriple};
use crate::effective_channel::{ReflectionKind, ReflectionVector};
use crate::error::{Error, Result};
use crate::linalg::{all_finite, canonicalize_col, unit_phase};

/// Relative width of the band treated as a tie for the top eigenvalue.
const EIGEN_TIE_TOL: f64 = 1e-12;

/// `√M` times the dominant unit eigenvector of `gram`, rotated so its
/// largest-magnitude entry is real and nonnegative.
///
/// A degenerate top eigenvalue is resolved by taking the lexicographically
/// smallest canonicalized eigenvector among the tied ones.
pub fn relaxed_reflection(gram: MatRef<'_, c64>) -> Result<ReflectionVector> {
    let m = gram.nrows();
    if m == 0 || gram.ncols() != m {
        return Err(Error::InvalidInput(format!(
            "gram matrix must be square and nonempty, got {}x{}",
            gram.nrows(),
            gram.ncols()
        )));
    }
    if !all_finite(gram) {
        return Err(Error::InvalidInput("gram matrix has non-finite entries".into()));
    }
    let evd = gram.self_adjoint_eigen(Side::Lower).map_err(|e| Error::Decomposition(format!("{e:?}")))?;
    let values = evd.S().column_vector();
    let vectors = evd.U();

    // Eigenvalues come back in nondecreasing order.
    let top = values[m - 1].re;
    let band = EIGEN_TIE_TOL * top.abs().max(f64::MIN_POSITIVE);
    let mut best: Option<Col<c64>> = None;
    for k in (0..m).rev() {
        if values[k].re < top - band {
            break;
        }
        let cand = canonicalize_col(vectors.col(k));
        best = match best {
            Some(b) if lex_cmp(&b, &cand) != Ordering::Greater => Some(b),
            _ => Some(cand),
        };
    }
    let u = best.expect("at least one eigenvector");
    let scale = (m as f64).sqrt() / u.norm_l2();
    ReflectionVector::new(Col::from_fn(m, |i| u[i] * scale), ReflectionKind::Relaxed)
}

fn lex_cmp(a: &Col<c64>, b: &Col<c64>) -> Ordering {
    for i in 0..a.nrows() {
        let o = a[i].re.total_cmp(&b[i].re).then(a[i].im.total_cmp(&b[i].im));
        if o != Ordering::Equal {
            return o;
        }
    }
    Ordering::Equal
}

/// Elementwise phase projection `exp(j·arg(v_m))`; a zero entry maps to 1.
pub fn project_reflection(v: &ReflectionVector) -> ReflectionVector {
    let e = v.entries();
    let projected = Col::from_fn(e.nrows(), |i| unit_phase(e[i]));
    ReflectionVector::new(projected, ReflectionKind::UnitModulus).expect("phase projection is unit-modulus")
}

/// Large-array limit of the relaxed design: the IRS-side array responses of
/// the strongest IRS→RX and TX→IRS paths, phase-matched elementwise,
/// `M · a_IRS^IR ∘ conj(a_IRS^TI)`.
///
/// Uses ground-truth path parameters.
pub fn asymptotic_reflection(triple: &ChannelTriple) -> Result<ReflectionVector> {
    triple.check_dims()?;
    let ir =
        triple.h_ir.paths.dominant().ok_or_else(|| Error::MissingPaths("IRS→RX link has no path parameters".into()))?;
    let ti =
        triple.h_ti.paths.dominant().ok_or_else(|| Error::MissingPaths("TX→IRS link has no path parameters".into()))?;
    let depart = steering_vector(&triple.h_ir.tx_geometry, ir.tx_azimuth, ir.tx_elevation);
    let arrive = steering_vector(&triple.h_ti.rx_geometry, ti.rx_azimuth, ti.rx_elevation);
    let m = depart.nrows() as f64;
    let v = Col::from_fn(depart.nrows(), |i| unit_phase(depart[i] * arrive[i].conj() * m));
    ReflectionVector::new(v, ReflectionKind::UnitModulus)
}

/// I.i.d. U[0, 2π) phases.
pub fn random_reflection<R: Rng + ?Sized>(m: usize, rng: &mut R) -> Result<ReflectionVector> {
    if m == 0 {
        return Err(Error::InvalidInput("reflection vector needs at least one element".into()));
    }
    let v = Col::from_fn(m, |_| c64::from_polar(1.0, rng.random_range(0.0..2.0 * PI)));
    ReflectionVector::new(v, ReflectionKind::UnitModulus)
}
