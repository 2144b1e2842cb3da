//! Run artifacts: `run.json` plus plot-ready CSV tables.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiment::{EstimatorReport, RunConfig, RunOutcome, SelectionTrace};
use crate::shearing::ShearReport;

pub const RUN_FILE: &str = "run.json";
pub const TRACE_FILE: &str = "trace.csv";
pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const FREQUENCIES_FILE: &str = "frequencies.csv";
pub const EIGENVALUES_FILE: &str = "eigenvalues.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub crate_version: String,
    pub config: RunConfig,
    pub initial_shear: ShearReport,
    pub trace: SelectionTrace,
    pub report: EstimatorReport,
}

impl RunRecord {
    pub fn new(config: &RunConfig, outcome: &RunOutcome) -> Self {
        RunRecord {
            crate_version: env!("CARGO_PKG_VERSION").to_string(),
            config: config.clone(),
            initial_shear: outcome.initial_shear.clone(),
            trace: outcome.trace.clone(),
            report: outcome.report.clone(),
        }
    }
}

#[derive(Serialize)]
struct TrajectoryRow {
    order: usize,
    setting_index: usize,
    re: f64,
    im: f64,
    before_stop: bool,
}

#[derive(Serialize)]
struct FrequencyRow {
    setting_index: usize,
    re: f64,
    im: f64,
    estimated_probability: f64,
    measured_frequency: Option<f64>,
}

#[derive(Serialize)]
struct EigenvalueRow {
    step: usize,
    min_eig_before_shear: f64,
    min_eig_after_shear: f64,
}

fn write_csv<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    for row in rows {
        w.serialize(row).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes `run.json` and the CSV tables; returns the paths written.
pub fn export_report(record: &RunRecord, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let run_path = dir.join(RUN_FILE);
    let json = serde_json::to_string_pretty(record).expect("run record serializes");
    fs::write(&run_path, json).map_err(|e| Error::io(&run_path, e))?;
    let mut written = vec![run_path];
    written.extend(export_tables(record, dir)?);
    Ok(written)
}

/// Regenerates the CSV tables from a run record.
pub fn export_tables(record: &RunRecord, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let trace = &record.trace;
    let stop = trace.stopped_at.unwrap_or(usize::MAX);

    let trace_path = dir.join(TRACE_FILE);
    write_csv(&trace_path, &trace.steps)?;

    let traj_path = dir.join(TRAJECTORY_FILE);
    write_csv(
        &traj_path,
        trace.steps.iter().map(|s| TrajectoryRow {
            order: s.step,
            setting_index: s.setting_index,
            re: s.setting_re,
            im: s.setting_im,
            before_stop: s.step <= stop,
        }),
    )?;

    let freq_path = dir.join(FREQUENCIES_FILE);
    write_csv(
        &freq_path,
        record.report.setting_fits.iter().map(|f| FrequencyRow {
            setting_index: f.setting_index,
            re: f.amplitude.re,
            im: f.amplitude.im,
            estimated_probability: f.estimated_probability,
            measured_frequency: f.measured_frequency,
        }),
    )?;

    let eig_path = dir.join(EIGENVALUES_FILE);
    write_csv(
        &eig_path,
        trace.steps.iter().map(|s| EigenvalueRow {
            step: s.step,
            min_eig_before_shear: s.min_eig_before_shear,
            min_eig_after_shear: s.min_eig_after_shear,
        }),
    )?;
    Ok(vec![trace_path, traj_path, freq_path, eig_path])
}

pub fn load_run(path: &Path) -> Result<RunRecord> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })
}
