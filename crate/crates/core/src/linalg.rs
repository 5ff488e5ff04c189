//! Small complex-matrix helpers shared by the design modules.

use faer::{c64, Col, ColRef, Mat, MatRef};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// Draw from CN(0, variance).
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> c64 {
    let scale = (variance / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    c64::new(scale * re, scale * im)
}

/// `exp(j·arg(z))`, with the phase of an exact zero taken as 0.
#[inline]
pub fn unit_phase(z: c64) -> c64 {
    let r = z.norm();
    if r == 0.0 {
        c64::new(1.0, 0.0)
    } else {
        z / r
    }
}

/// Phase factor that rotates `x` so its largest-magnitude entry (first one on
/// ties) becomes real and nonnegative.
pub fn canonical_rotation(x: ColRef<'_, c64>) -> c64 {
    let mut best = 0usize;
    let mut best_abs = -1.0;
    for i in 0..x.nrows() {
        let a = x[i].norm();
        if a > best_abs {
            best_abs = a;
            best = i;
        }
    }
    if x.nrows() == 0 {
        return c64::new(1.0, 0.0);
    }
    unit_phase(x[best]).conj()
}

pub fn canonicalize_col(x: ColRef<'_, c64>) -> Col<c64> {
    let rot = canonical_rotation(x);
    Col::from_fn(x.nrows(), |i| x[i] * rot)
}

/// Squared Frobenius norm.
pub fn fro2(a: MatRef<'_, c64>) -> f64 {
    a.squared_norm_l2()
}

pub fn scale_mat(a: MatRef<'_, c64>, s: c64) -> Mat<c64> {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] * s)
}

/// Hermitian part `(A + Aᴴ)/2`.
pub fn hermitian_part(a: MatRef<'_, c64>) -> Mat<c64> {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| (a[(i, j)] + a[(j, i)].conj()) * 0.5)
}

pub fn all_finite(a: MatRef<'_, c64>) -> bool {
    (0..a.ncols()).all(|j| (0..a.nrows()).all(|i| a[(i, j)].re.is_finite() && a[(i, j)].im.is_finite()))
}
