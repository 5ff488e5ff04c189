use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ExperimentConfig, MethodId, SweepOutput, SweepPoint, TrialRecord};
use crate::error::Result;

pub const VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), "+", env!("IRS_HYBRID_GIT_DESCRIBE"));

/// Aggregate over the successful trials of one (method, sweep point).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryEntry {
    pub method: MethodId,
    pub sweep_index: usize,
    pub p_tx_dbm: f64,
    pub n_path: usize,
    /// `null` for perfect CSI.
    pub nmse_db: Option<f64>,
    pub n_r: usize,
    pub n_t: usize,
    pub m: usize,
    pub n_r_rf: usize,
    pub n_t_rf: usize,
    pub n_s: usize,
    /// `null` when no trial succeeded.
    pub mean_bps_hz: Option<f64>,
    pub stderr_bps_hz: Option<f64>,
    pub count: usize,
    pub failed: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryDocument {
    pub version: String,
    pub config: serde_json::Value,
    pub sweep_axis: String,
    pub entries: Vec<SummaryEntry>,
}

fn mean_stderr(xs: &[f64]) -> (Option<f64>, Option<f64>) {
    let n = xs.len();
    if n == 0 {
        return (None, None);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (Some(mean), None);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (Some(mean), Some((var / n as f64).sqrt()))
}

/// Per-(sweep point, method) mean and standard error, in sweep then method order.
pub fn summarize(rows: &[TrialRecord], points: &[SweepPoint]) -> Vec<SummaryEntry> {
    let mut methods: Vec<MethodId> = rows.iter().map(|r| r.method).collect();
    methods.sort();
    methods.dedup();
    let mut out = Vec::new();
    for p in points {
        for &method in &methods {
            let group: Vec<&TrialRecord> =
                rows.iter().filter(|r| r.sweep_index == p.index && r.method == method).collect();
            let values: Vec<f64> =
                group.iter().filter(|r| r.is_ok()).filter_map(|r| r.spectral_efficiency_bps_hz).collect();
            let (mean, stderr) = mean_stderr(&values);
            out.push(SummaryEntry {
                method,
                sweep_index: p.index,
                p_tx_dbm: p.p_tx_dbm,
                n_path: p.n_path,
                nmse_db: p.nmse_db.is_finite().then_some(p.nmse_db),
                n_r: p.dims.n_r,
                n_t: p.dims.n_t,
                m: p.dims.m,
                n_r_rf: p.dims.n_r_rf,
                n_t_rf: p.dims.n_t_rf,
                n_s: p.dims.n_s,
                mean_bps_hz: mean,
                stderr_bps_hz: stderr,
                count: values.len(),
                failed: group.len() - values.len(),
            });
        }
    }
    out
}

fn config_echo(config: &ExperimentConfig) -> Result<serde_json::Value> {
    // JSON has no infinities; perfect CSI is echoed as null.
    let mut value = serde_json::to_value(SerializableConfig::from(config))?;
    if let Some(obj) = value.as_object_mut() {
        obj.insert("sweep_axis".into(), config.sweep.axis_name().into());
    }
    Ok(value)
}

#[derive(Serialize)]
struct SerializableConfig<'a> {
    dims: &'a crate::channel_model::SystemDims,
    scenario: &'a crate::channel_model::ScenarioConfig,
    methods: &'a [MethodId],
    sweep: serde_json::Value,
    trials: usize,
    master_seed: u64,
    noise_dbm: f64,
    p_tx_dbm: f64,
    nmse_db: Option<f64>,
    spacing_over_wavelength: f64,
}

impl<'a> From<&'a ExperimentConfig> for SerializableConfig<'a> {
    fn from(c: &'a ExperimentConfig) -> Self {
        use super::Sweep;
        let finite = |v: &[f64]| v.iter().map(|x| x.is_finite().then_some(*x)).collect::<Vec<_>>();
        let sweep = match &c.sweep {
            Sweep::PtxDbm(v) => serde_json::json!({ "ptx_dbm": v }),
            Sweep::NPath(v) => serde_json::json!({ "n_path": v }),
            Sweep::NmseDb(v) => serde_json::json!({ "nmse_db": finite(v) }),
            Sweep::SystemSize(v) => serde_json::json!({ "system_size": v }),
        };
        Self {
            dims: &c.dims,
            scenario: &c.scenario,
            methods: &c.methods,
            sweep,
            trials: c.trials,
            master_seed: c.master_seed,
            noise_dbm: c.noise_dbm,
            p_tx_dbm: c.p_tx_dbm,
            nmse_db: c.nmse_db.is_finite().then_some(c.nmse_db),
            spacing_over_wavelength: c.spacing_over_wavelength,
        }
    }
}

/// Writes `results.csv` and `summary.json` into `dir`, creating it if needed.
pub fn write_outputs(dir: &Path, config: &ExperimentConfig, output: &SweepOutput) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut csv = csv::Writer::from_path(dir.join("results.csv"))?;
    for row in &output.rows {
        csv.serialize(row)?;
    }
    csv.flush()?;

    let doc = SummaryDocument {
        version: VERSION.to_string(),
        config: config_echo(config)?,
        sweep_axis: config.sweep.axis_name().to_string(),
        entries: output.summary.clone(),
    };
    fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&doc)?)?;
    Ok(())
}

pub fn read_summary(dir: &Path) -> Result<SummaryDocument> {
    let text = fs::read_to_string(dir.join("summary.json"))?;
    Ok(serde_json::from_str(&text)?)
}
