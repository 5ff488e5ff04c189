//! Monte-Carlo harness.
//!
//! Every trial draws one channel realization that all methods share. The
//! channel stream depends only on `(master_seed, trial_index)`, so a given
//! trial sees the same channel at every sweep point (common random numbers).

mod config;
mod output;

pub use config::{ExperimentConfig, MethodId, Sweep, SweepPoint};
pub use output::{read_summary, summarize, write_outputs, SummaryDocument, SummaryEntry, VERSION};

use faer::{c64, Mat, MatRef};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::beamforming::{fully_digital, project_hybrid, r_max, relaxed_beamformers, HybridBeamformers};
use crate::channel_model::{sample_channel_triple, ArrayLayout, ChannelTriple, ScenarioConfig, SystemDims};
use crate::dbm_to_watts;
use crate::effective_channel::{
    build_effective, gram_from_links, gram_sum, total_channel, total_from_links, EffectiveChannel, ReflectionVector,
};
use crate::error::{Error, Result};
use crate::evaluation::{perturb_matrix_to_nmse, perturb_to_nmse, spectral_efficiency};
use crate::reflection::{asymptotic_reflection, project_reflection, random_reflection, relaxed_reflection};

const STREAM_CHANNEL: u64 = 0;
const STREAM_CSI: u64 = 1;
const STREAM_RANDOM_REFLECTION: u64 = 2;

/// Analog entries and reflection coefficients must hit their modulus to this
/// absolute tolerance.
pub const MODULUS_TOL: f64 = 1e-15;
/// Transmit power must match `P_TX` to this tolerance (relative above 1 W).
pub const POWER_TOL: f64 = 1e-9;

pub const STATUS_OK: &str = "ok";

/// One row of the results table. Field order is the CSV column order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial_id: usize,
    pub seed: u64,
    pub method: MethodId,
    pub p_tx_dbm: f64,
    pub n_r: usize,
    pub n_t: usize,
    pub m: usize,
    pub n_r_rf: usize,
    pub n_t_rf: usize,
    pub n_s: usize,
    pub n_path: usize,
    pub nmse_db: f64,
    pub spectral_efficiency_bps_hz: Option<f64>,
    /// Upper-bound row minus this row, same trial and sweep point.
    pub delta_gap_bps_hz: Option<f64>,
    /// `ok` or `failed:<code>`.
    pub status: String,
    #[serde(skip)]
    pub sweep_index: usize,
}

impl TrialRecord {
    pub fn is_ok(&self) -> bool {
        self.status == STATUS_OK
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of trial `trial_index`, shared by every sweep point.
pub fn trial_seed(master_seed: u64, trial_index: usize) -> u64 {
    splitmix64(master_seed ^ splitmix64(trial_index as u64))
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Channel realization of one trial at one operating point.
pub fn trial_channel(config: &ExperimentConfig, point: &SweepPoint, trial_index: usize) -> Result<ChannelTriple> {
    let seed = trial_seed(config.master_seed, trial_index);
    let layout = ArrayLayout::near_square(&point.dims, config.spacing_over_wavelength)?;
    let scenario = ScenarioConfig { n_path: point.n_path, ..config.scenario.clone() };
    sample_channel_triple(&point.dims, &layout, &scenario, &mut stream(seed, STREAM_CHANNEL))
}

fn check_reflection(v: &ReflectionVector) -> Result<()> {
    let e = v.entries();
    match (0..e.nrows()).map(|i| (e[i].norm() - 1.0).abs()).fold(0.0, f64::max) {
        err if err <= MODULUS_TOL => Ok(()),
        err => Err(Error::ConstraintViolation(format!("reflection modulus off by {err:e}"))),
    }
}

fn check_projected(bf: &HybridBeamformers, p_tx: f64) -> Result<()> {
    let err = bf.max_modulus_error();
    if err > MODULUS_TOL {
        return Err(Error::ConstraintViolation(format!("analog modulus off by {err:e}")));
    }
    let power = bf.transmit_power();
    if (power - p_tx).abs() > POWER_TOL * p_tx.max(1.0) {
        return Err(Error::ConstraintViolation(format!("transmit power {power} vs {p_tx}")));
    }
    Ok(())
}

/// Channel knowledge: exact link matrices, or an effective channel whose
/// blocks were perturbed independently.
enum Csi {
    Links { h_tr: Mat<c64>, h_ir: Mat<c64>, h_ti: Mat<c64> },
    Blocks { h_tr: Mat<c64>, eff: EffectiveChannel },
}

impl Csi {
    fn total(&self, v: &ReflectionVector) -> Result<Mat<c64>> {
        match self {
            Csi::Links { h_tr, h_ir, h_ti } => {
                total_from_links(h_tr.as_ref(), h_ir.as_ref(), h_ti.as_ref(), v.entries())
            }
            Csi::Blocks { h_tr, eff } => total_channel(h_tr.as_ref(), eff, v.entries()),
        }
    }

    fn gram(&self) -> Result<Mat<c64>> {
        match self {
            Csi::Links { h_ir, h_ti, .. } => gram_from_links(h_ir.as_ref(), h_ti.as_ref()),
            Csi::Blocks { eff, .. } => Ok(gram_sum(eff)),
        }
    }
}

struct TrialContext<'a> {
    dims: SystemDims,
    p_tx: f64,
    noise: f64,
    triple: &'a ChannelTriple,
    truth: Csi,
    /// `None` under perfect CSI.
    estimate: Option<Csi>,
    random_seed: u64,
}

impl TrialContext<'_> {
    fn design(&self) -> &Csi {
        self.estimate.as_ref().unwrap_or(&self.truth)
    }

    fn hybrid_rate(&self, design: MatRef<'_, c64>, truth: MatRef<'_, c64>) -> Result<f64> {
        let relaxed = relaxed_beamformers(design, &self.dims, self.p_tx, self.noise)?;
        let projected = project_hybrid(&relaxed, self.p_tx)?;
        check_projected(&projected, self.p_tx)?;
        spectral_efficiency(truth, &projected, self.noise)
    }

    fn digital_rate(&self, design: MatRef<'_, c64>, truth: MatRef<'_, c64>) -> Result<f64> {
        let bf = fully_digital(design, self.p_tx, self.noise, self.dims.n_s)?;
        spectral_efficiency(truth, &bf, self.noise)
    }

    fn proposed_reflection(&self) -> Result<(ReflectionVector, ReflectionVector)> {
        let relaxed = relaxed_reflection(self.design().gram()?.as_ref())?;
        let projected = project_reflection(&relaxed);
        check_reflection(&projected)?;
        Ok((relaxed, projected))
    }

    fn run(&self, method: MethodId, proposed: &Result<(ReflectionVector, ReflectionVector)>) -> Result<f64> {
        let proposed = || proposed.as_ref().map_err(clone_error);
        match method {
            MethodId::ProposedHybrid => {
                let (_, v) = proposed()?;
                self.hybrid_rate(self.design().total(v)?.as_ref(), self.truth.total(v)?.as_ref())
            }
            MethodId::ProposedFullyDigital => {
                let (_, v) = proposed()?;
                self.digital_rate(self.design().total(v)?.as_ref(), self.truth.total(v)?.as_ref())
            }
            MethodId::SotaAsymptotic => {
                // Needs per-link path knowledge, so it always runs on ground truth.
                let v = asymptotic_reflection(self.triple)?;
                check_reflection(&v)?;
                let h = self.truth.total(&v)?;
                self.hybrid_rate(h.as_ref(), h.as_ref())
            }
            MethodId::RandomReflectionFullyDigital => {
                let v = random_reflection(self.dims.m, &mut stream(self.random_seed, STREAM_RANDOM_REFLECTION))?;
                self.digital_rate(self.design().total(&v)?.as_ref(), self.truth.total(&v)?.as_ref())
            }
            MethodId::UpperBound => {
                let (v, _) = proposed()?;
                r_max(self.truth.total(v)?.as_ref(), self.p_tx, self.noise, self.dims.n_s)
            }
        }
    }
}

fn clone_error(e: &Error) -> Error {
    match e {
        Error::InvalidInput(s) => Error::InvalidInput(s.clone()),
        Error::DimensionMismatch(s) => Error::DimensionMismatch(s.clone()),
        Error::NoUsableStream => Error::NoUsableStream,
        Error::DegenerateCombiner => Error::DegenerateCombiner,
        Error::DegeneratePrecoder => Error::DegeneratePrecoder,
        Error::ConstraintViolation(s) => Error::ConstraintViolation(s.clone()),
        Error::MissingPaths(s) => Error::MissingPaths(s.clone()),
        Error::Decomposition(s) => Error::Decomposition(s.clone()),
        other => Error::Config(other.to_string()),
    }
}

fn estimate_csi(triple: &ChannelTriple, nmse_db: f64, seed: u64) -> Result<Option<Csi>> {
    if nmse_db == f64::NEG_INFINITY {
        return Ok(None);
    }
    let mut rng = stream(seed, STREAM_CSI);
    let eff = perturb_to_nmse(&build_effective(triple)?, nmse_db, &mut rng)?;
    let h_tr = perturb_matrix_to_nmse(triple.h_tr.matrix.as_ref(), nmse_db, &mut rng)?;
    Ok(Some(Csi::Blocks { h_tr, eff }))
}

/// Runs every configured method on one trial's channel.
///
/// Failures become rows with `status = failed:<code>` instead of aborting.
pub fn run_trial(config: &ExperimentConfig, point: &SweepPoint, trial_index: usize) -> Vec<TrialRecord> {
    let seed = trial_seed(config.master_seed, trial_index);
    let record = |method: MethodId, outcome: Result<f64>, upper: Option<f64>| {
        let (se, status) = match outcome {
            Ok(x) => (Some(x), STATUS_OK.to_string()),
            Err(e) => (None, format!("failed:{}", e.code())),
        };
        let delta_gap = match (method, se, upper) {
            (MethodId::UpperBound, _, _) => None,
            (_, Some(se), Some(ub)) => Some(ub - se),
            _ => None,
        };
        TrialRecord {
            trial_id: trial_index,
            seed,
            method,
            p_tx_dbm: point.p_tx_dbm,
            n_r: point.dims.n_r,
            n_t: point.dims.n_t,
            m: point.dims.m,
            n_r_rf: point.dims.n_r_rf,
            n_t_rf: point.dims.n_t_rf,
            n_s: point.dims.n_s,
            n_path: point.n_path,
            nmse_db: point.nmse_db,
            spectral_efficiency_bps_hz: se,
            delta_gap_bps_hz: delta_gap,
            status,
            sweep_index: point.index,
        }
    };

    let setup = || -> Result<(ChannelTriple, Csi)> {
        let triple = trial_channel(config, point, trial_index)?;
        triple.check_dims()?;
        let truth = Csi::Links {
            h_tr: triple.h_tr.matrix.clone(),
            h_ir: triple.h_ir.matrix.clone(),
            h_ti: triple.h_ti.matrix.clone(),
        };
        Ok((triple, truth))
    };
    let (triple, truth) = match setup() {
        Ok(x) => x,
        Err(e) => {
            return config.methods.iter().map(|&m| record(m, Err(clone_error(&e)), None)).collect();
        }
    };
    let estimate = match estimate_csi(&triple, point.nmse_db, seed) {
        Ok(c) => c,
        Err(e) => {
            return config.methods.iter().map(|&m| record(m, Err(clone_error(&e)), None)).collect();
        }
    };
    let ctx = TrialContext {
        dims: point.dims,
        p_tx: dbm_to_watts(point.p_tx_dbm),
        noise: dbm_to_watts(config.noise_dbm),
        triple: &triple,
        truth,
        estimate,
        random_seed: seed,
    };
    let proposed = ctx.proposed_reflection();
    let upper = ctx.run(MethodId::UpperBound, &proposed).ok();
    config
        .methods
        .iter()
        .map(|&m| {
            let outcome = match (m, upper) {
                (MethodId::UpperBound, Some(u)) => Ok(u),
                _ => ctx.run(m, &proposed),
            };
            record(m, outcome, upper)
        })
        .collect()
}

/// All rows of a sweep plus their per-(method, point) aggregates.
#[derive(Clone, Debug)]
pub struct SweepOutput {
    pub rows: Vec<TrialRecord>,
    pub summary: Vec<SummaryEntry>,
}

/// Runs `sweep × trials`, on `threads` workers when given.
///
/// Rows are sorted by (sweep point, trial, method), so the output does not
/// depend on the degree of parallelism.
pub fn run_sweep(config: &ExperimentConfig, threads: Option<usize>) -> Result<SweepOutput> {
    use rayon::prelude::*;

    config.validate()?;
    // Keep each decomposition single-threaded so results are bit-identical
    // across worker counts.
    faer::set_global_parallelism(faer::Par::Seq);

    let points = config.sweep_points();
    let tasks: Vec<(usize, usize)> = (0..points.len()).flat_map(|p| (0..config.trials).map(move |t| (p, t))).collect();
    let work =
        || -> Vec<TrialRecord> { tasks.par_iter().flat_map_iter(|&(p, t)| run_trial(config, &points[p], t)).collect() };
    let mut rows = match threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(work),
        None => work(),
    };
    rows.sort_by_key(|r| (r.sweep_index, r.trial_id, r.method));
    let summary = summarize(&rows, &points);
    Ok(SweepOutput { rows, summary })
}
