use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::channel_model::{ScenarioConfig, SystemDims, UpaGeometry};
use crate::error::{Error, Result};

/// Methods compared in every trial.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodId {
    /// Projected eigenvector reflection + projected hybrid beamformers.
    ProposedHybrid,
    /// Projected eigenvector reflection + fully-digital SVD transmission.
    ProposedFullyDigital,
    /// Dominant-path (ground-truth) reflection + projected hybrid beamformers.
    SotaAsymptotic,
    /// Random phases + fully-digital SVD transmission.
    RandomReflectionFullyDigital,
    /// `R_max` of the total channel at the relaxed (unprojected) reflection.
    UpperBound,
}

impl MethodId {
    pub const ALL: [MethodId; 5] = [
        MethodId::ProposedHybrid,
        MethodId::ProposedFullyDigital,
        MethodId::SotaAsymptotic,
        MethodId::RandomReflectionFullyDigital,
        MethodId::UpperBound,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            MethodId::ProposedHybrid => "proposed_hybrid",
            MethodId::ProposedFullyDigital => "proposed_fully_digital",
            MethodId::SotaAsymptotic => "sota_asymptotic",
            MethodId::RandomReflectionFullyDigital => "random_reflection_fully_digital",
            MethodId::UpperBound => "upper_bound",
        }
    }
}

impl fmt::Display for MethodId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MethodId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MethodId::ALL
            .into_iter()
            .find(|m| m.as_str() == s.trim())
            .ok_or_else(|| Error::Config(format!("unknown method '{s}'")))
    }
}

/// The single swept axis of an experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sweep {
    PtxDbm(Vec<f64>),
    NPath(Vec<usize>),
    /// `-inf` stands for perfect CSI.
    NmseDb(Vec<f64>),
    SystemSize(Vec<SystemDims>),
}

impl Sweep {
    pub fn len(&self) -> usize {
        match self {
            Sweep::PtxDbm(v) => v.len(),
            Sweep::NPath(v) => v.len(),
            Sweep::NmseDb(v) => v.len(),
            Sweep::SystemSize(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn axis_name(&self) -> &'static str {
        match self {
            Sweep::PtxDbm(_) => "p_tx_dbm",
            Sweep::NPath(_) => "n_path",
            Sweep::NmseDb(_) => "nmse_db",
            Sweep::SystemSize(_) => "system_size",
        }
    }
}

fn default_methods() -> Vec<MethodId> {
    MethodId::ALL.to_vec()
}

fn default_trials() -> usize {
    200
}

fn default_noise_dbm() -> f64 {
    -91.0
}

fn default_p_tx_dbm() -> f64 {
    40.0
}

fn default_nmse_db() -> f64 {
    f64::NEG_INFINITY
}

fn default_spacing() -> f64 {
    UpaGeometry::HALF_WAVELENGTH
}

fn default_dims() -> SystemDims {
    SystemDims::SMALL
}

/// Everything needed to reproduce a sweep.
///
/// `p_tx_dbm` and `nmse_db` are the operating point for axes that are not
/// swept. Array shapes are derived from the element counts with
/// [`UpaGeometry::near_square`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_dims")]
    pub dims: SystemDims,
    #[serde(default)]
    pub scenario: ScenarioConfig,
    #[serde(default = "default_methods")]
    pub methods: Vec<MethodId>,
    pub sweep: Sweep,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "default_noise_dbm")]
    pub noise_dbm: f64,
    #[serde(default = "default_p_tx_dbm")]
    pub p_tx_dbm: f64,
    #[serde(default = "default_nmse_db")]
    pub nmse_db: f64,
    #[serde(default = "default_spacing")]
    pub spacing_over_wavelength: f64,
}

impl ExperimentConfig {
    /// Defaults with the given sweep.
    pub fn with_sweep(sweep: Sweep) -> Self {
        Self {
            dims: default_dims(),
            scenario: ScenarioConfig::default(),
            methods: default_methods(),
            sweep,
            trials: default_trials(),
            master_seed: 0,
            noise_dbm: default_noise_dbm(),
            p_tx_dbm: default_p_tx_dbm(),
            nmse_db: default_nmse_db(),
            spacing_over_wavelength: default_spacing(),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.methods.is_empty() {
            return bad("at least one method is required".into());
        }
        if self.sweep.is_empty() {
            return bad(format!("sweep '{}' has no points", self.sweep.axis_name()));
        }
        if !self.noise_dbm.is_finite() || !self.p_tx_dbm.is_finite() {
            return bad("noise_dbm and p_tx_dbm must be finite".into());
        }
        if self.nmse_db.is_nan() || self.nmse_db == f64::INFINITY {
            return bad(format!("nmse_db must be finite or -inf, got {}", self.nmse_db));
        }
        if !(self.spacing_over_wavelength > 0.0 && self.spacing_over_wavelength.is_finite()) {
            return bad("spacing_over_wavelength must be positive".into());
        }
        self.dims.validate()?;
        self.scenario.validate()?;
        match &self.sweep {
            Sweep::PtxDbm(v) if v.iter().any(|x| !x.is_finite()) => bad("p_tx sweep values must be finite".into()),
            Sweep::NPath(v) if v.contains(&0) => bad("n_path sweep values must be at least 1".into()),
            Sweep::NmseDb(v) if v.iter().any(|x| x.is_nan() || *x == f64::INFINITY) => {
                bad("nmse sweep values must be finite or -inf".into())
            }
            Sweep::SystemSize(v) => v.iter().try_for_each(|d| d.validate()),
            _ => Ok(()),
        }
    }

    /// Resolved operating points, in sweep order.
    pub fn sweep_points(&self) -> Vec<SweepPoint> {
        let base = SweepPoint {
            index: 0,
            p_tx_dbm: self.p_tx_dbm,
            n_path: self.scenario.n_path,
            nmse_db: self.nmse_db,
            dims: self.dims,
        };
        let at = |index: usize, f: &dyn Fn(&mut SweepPoint)| {
            let mut p = SweepPoint { index, ..base };
            f(&mut p);
            p
        };
        match &self.sweep {
            Sweep::PtxDbm(v) => v.iter().enumerate().map(|(i, &x)| at(i, &|p| p.p_tx_dbm = x)).collect(),
            Sweep::NPath(v) => v.iter().enumerate().map(|(i, &x)| at(i, &|p| p.n_path = x)).collect(),
            Sweep::NmseDb(v) => v.iter().enumerate().map(|(i, &x)| at(i, &|p| p.nmse_db = x)).collect(),
            Sweep::SystemSize(v) => v.iter().enumerate().map(|(i, &x)| at(i, &|p| p.dims = x)).collect(),
        }
    }
}

/// One resolved point of the sweep.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SweepPoint {
    pub index: usize,
    pub p_tx_dbm: f64,
    pub n_path: usize,
    pub nmse_db: f64,
    pub dims: SystemDims,
}
