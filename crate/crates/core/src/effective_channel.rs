//! IRS-aided effective (cascaded) channel.
//!
//! The effective channel is the list of `N_t` blocks
//! `H_eff,t = H_IR · diag(H_TI(:, t))`, each `N_r × M`. With a reflection
//! vector `v` the total channel is `H_TR + [H_eff,1 v, …, H_eff,N_t v]`.

use faer::{c64, Col, ColRef, Mat, MatRef};
use serde::{Deserialize, Serialize};

use crate::channel_model::ChannelTriple;
use crate::error::{Error, Result};
use crate::linalg::hermitian_part;

#[derive(Clone, Debug, PartialEq)]
pub struct EffectiveChannel {
    blocks: Vec<Mat<c64>>,
}

impl EffectiveChannel {
    /// Wraps explicit blocks; all must share one `N_r × M` shape.
    pub fn from_blocks(blocks: Vec<Mat<c64>>) -> Result<Self> {
        let Some(first) = blocks.first() else {
            return Err(Error::InvalidInput("effective channel needs at least one block".into()));
        };
        let (nr, m) = (first.nrows(), first.ncols());
        if let Some((t, b)) = blocks.iter().enumerate().find(|(_, b)| b.nrows() != nr || b.ncols() != m) {
            return Err(Error::DimensionMismatch(format!(
                "block {t} is {}x{}, expected {nr}x{m}",
                b.nrows(),
                b.ncols()
            )));
        }
        Ok(Self { blocks })
    }

    /// Builds the blocks from the IRS→RX and TX→IRS matrices.
    pub fn from_links(h_ir: MatRef<'_, c64>, h_ti: MatRef<'_, c64>) -> Result<Self> {
        if h_ir.ncols() != h_ti.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "H_IR has {} columns but H_TI has {} rows",
                h_ir.ncols(),
                h_ti.nrows()
            )));
        }
        let (nr, m) = (h_ir.nrows(), h_ir.ncols());
        let blocks = (0..h_ti.ncols()).map(|t| Mat::from_fn(nr, m, |i, k| h_ir[(i, k)] * h_ti[(k, t)])).collect();
        Self::from_blocks(blocks)
    }

    pub fn blocks(&self) -> &[Mat<c64>] {
        &self.blocks
    }

    pub fn n_t(&self) -> usize {
        self.blocks.len()
    }

    pub fn n_r(&self) -> usize {
        self.blocks[0].nrows()
    }

    pub fn m(&self) -> usize {
        self.blocks[0].ncols()
    }

    /// Concatenated `N_r × (M·N_t)` view.
    pub fn flat(&self) -> Mat<c64> {
        let m = self.m();
        Mat::from_fn(self.n_r(), m * self.n_t(), |i, j| self.blocks[j / m][(i, j % m)])
    }

    pub fn squared_norm(&self) -> f64 {
        self.blocks.iter().map(|b| b.squared_norm_l2()).sum()
    }
}

/// Effective channel of a sampled triple.
pub fn build_effective(triple: &ChannelTriple) -> Result<EffectiveChannel> {
    triple.check_dims()?;
    EffectiveChannel::from_links(triple.h_ir.matrix.as_ref(), triple.h_ti.matrix.as_ref())
}

/// `H_TR + H_eff (I ⊗ v)`: column `t` is `H_TR(:, t) + H_eff,t · v`.
pub fn total_channel(h_tr: MatRef<'_, c64>, eff: &EffectiveChannel, v: ColRef<'_, c64>) -> Result<Mat<c64>> {
    if h_tr.nrows() != eff.n_r() || h_tr.ncols() != eff.n_t() || v.nrows() != eff.m() {
        return Err(Error::DimensionMismatch(format!(
            "H_TR {}x{}, effective channel {} blocks of {}x{}, v of length {}",
            h_tr.nrows(),
            h_tr.ncols(),
            eff.n_t(),
            eff.n_r(),
            eff.m(),
            v.nrows()
        )));
    }
    let mut h = h_tr.to_owned();
    for (t, block) in eff.blocks().iter().enumerate() {
        let col = block * v;
        for i in 0..h.nrows() {
            h[(i, t)] += col[i];
        }
    }
    Ok(h)
}

/// `Σ_t H_eff,tᴴ H_eff,t`, symmetrized to exact Hermitian form.
pub fn gram_sum(eff: &EffectiveChannel) -> Mat<c64> {
    let m = eff.m();
    let mut acc = Mat::<c64>::zeros(m, m);
    for block in eff.blocks() {
        faer::linalg::matmul::matmul(
            acc.as_mut(),
            faer::Accum::Add,
            block.adjoint(),
            block.as_ref(),
            c64::new(1.0, 0.0),
            faer::Par::Seq,
        );
    }
    hermitian_part(acc.as_ref())
}

fn check_links(h_ir: MatRef<'_, c64>, h_ti: MatRef<'_, c64>) -> Result<()> {
    if h_ir.ncols() != h_ti.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "H_IR is {}x{} but H_TI is {}x{}",
            h_ir.nrows(),
            h_ir.ncols(),
            h_ti.nrows(),
            h_ti.ncols()
        )));
    }
    Ok(())
}

/// [`gram_sum`] of the effective channel of `(h_ir, h_ti)` without forming
/// the blocks: `(H_IRᴴ H_IR) ∘ conj(H_TI H_TIᴴ)`.
pub fn gram_from_links(h_ir: MatRef<'_, c64>, h_ti: MatRef<'_, c64>) -> Result<Mat<c64>> {
    check_links(h_ir, h_ti)?;
    let a = h_ir.adjoint() * h_ir;
    let b = h_ti * h_ti.adjoint();
    let g = Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] * b[(i, j)].conj());
    Ok(hermitian_part(g.as_ref()))
}

/// [`total_channel`] from the link matrices: `H_TR + H_IR diag(v) H_TI`.
pub fn total_from_links(
    h_tr: MatRef<'_, c64>,
    h_ir: MatRef<'_, c64>,
    h_ti: MatRef<'_, c64>,
    v: ColRef<'_, c64>,
) -> Result<Mat<c64>> {
    check_links(h_ir, h_ti)?;
    if h_tr.nrows() != h_ir.nrows() || h_tr.ncols() != h_ti.ncols() || v.nrows() != h_ir.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "H_TR {}x{}, H_IR {}x{}, H_TI {}x{}, v of length {}",
            h_tr.nrows(),
            h_tr.ncols(),
            h_ir.nrows(),
            h_ir.ncols(),
            h_ti.nrows(),
            h_ti.ncols(),
            v.nrows()
        )));
    }
    let scaled = Mat::from_fn(h_ti.nrows(), h_ti.ncols(), |i, j| v[i] * h_ti[(i, j)]);
    Ok(h_tr + h_ir * &scaled)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReflectionKind {
    /// Sphere constraint `vᴴv = M`.
    Relaxed,
    /// `|v_m| = 1` for every element.
    UnitModulus,
}

/// IRS reflection coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct ReflectionVector {
    entries: Col<c64>,
    kind: ReflectionKind,
}

impl ReflectionVector {
    pub const RELAXED_TOL: f64 = 1e-9;
    pub const MODULUS_TOL: f64 = 1e-12;

    /// Checks the invariant of `kind` before wrapping.
    pub fn new(entries: Col<c64>, kind: ReflectionKind) -> Result<Self> {
        let m = entries.nrows();
        if m == 0 {
            return Err(Error::InvalidInput("reflection vector must have at least one element".into()));
        }
        match kind {
            ReflectionKind::Relaxed => {
                let energy = entries.squared_norm_l2();
                if (energy - m as f64).abs() > Self::RELAXED_TOL * (m as f64).max(1.0) {
                    return Err(Error::InvalidInput(format!("relaxed reflection needs vᴴv = {m}, got {energy}")));
                }
            }
            ReflectionKind::UnitModulus => {
                if let Some(i) = (0..m).find(|&i| (entries[i].norm() - 1.0).abs() > Self::MODULUS_TOL) {
                    return Err(Error::InvalidInput(format!(
                        "entry {i} has modulus {}, expected 1",
                        entries[i].norm()
                    )));
                }
            }
        }
        Ok(Self { entries, kind })
    }

    pub fn entries(&self) -> ColRef<'_, c64> {
        self.entries.as_ref()
    }

    pub fn kind(&self) -> ReflectionKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.entries.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
