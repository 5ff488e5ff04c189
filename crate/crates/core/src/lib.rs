//! Joint IRS reflection and hybrid beamforming design for mmWave MIMO links,
//! computed from the effective (cascaded) channel alone, plus the channel
//! models, baselines, and Monte-Carlo harness used to evaluate it.
//!
//! Module map:
//! - [`channel_model`]: UPA steering vectors, path loss, geometric link channels.
//! - [`effective_channel`]: effective-channel blocks, total channel, Gram sum.
//! - [`reflection`]: relaxed/projected, asymptotic, and random reflection vectors.
//! - [`beamforming`]: water-filling, `R_max`, relaxed and projected hybrid beamformers.
//! - [`evaluation`]: achieved spectral efficiency, NMSE, CSI perturbation.
//! - [`experiments`]: method recipes, sweeps, CSV/JSON output.

pub mod beamforming;
pub mod channel_model;
pub mod effective_channel;
pub mod error;
pub mod evaluation;
pub mod experiments;
pub mod linalg;
pub mod reflection;

pub use error::{Error, Result};

/// `x` dBm in watts.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}
