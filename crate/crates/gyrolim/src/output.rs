//! CSV and JSON writers.
//!
//! Numbers are written with Rust's locale-independent formatting: states,
//! energies and drifts in scientific notation with 17 significant digits.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use gyrolim_core::gyrocenter::cylindrical_coords;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::harness::{SweepReport, TrajectoryRecord};

/// `{:.16e}`: 17 significant digits, enough to round-trip an `f64`.
pub fn sci(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt(x: Option<f64>) -> String {
    x.map(sci).unwrap_or_default()
}

/// Header of the trajectory CSV.
pub const TRAJECTORY_HEADER: [&str; 9] = ["t", "y1", "y2", "y3", "y4", "R", "x3", "H", "H_drift"];

/// Writes one row per sample: time, state, `(R, x₃)`, `H` and its drift.
pub fn write_trajectory_csv<W: Write>(rec: &TrajectoryRecord, out: W) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRAJECTORY_HEADER)?;
    for i in 0..rec.times.len() {
        let y = &rec.states[i];
        let (r, x3) = cylindrical_coords(&[y[0], y[1], y[2]]);
        let mut row = vec![sci(rec.times[i])];
        row.extend(y.iter().map(|v| sci(*v)));
        row.extend([sci(r), sci(x3), sci(rec.energy[i]), sci(rec.energy_drift[i])]);
        w.write_record(&row)?;
    }
    w.flush()
}

/// Outcome of `run`, written next to the trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    /// Configuration that reproduces the run.
    pub config: RunConfig,
    /// `ok` or the failure category.
    pub status: String,
    /// Failure description.
    pub error: Option<String>,
    /// Steps completed.
    pub steps: usize,
    /// Last state reached.
    pub final_state: Vec<f64>,
    /// `max |H(y_n) - H(y0)|`.
    pub max_abs_drift: f64,
    /// Total nonlinear iterations.
    pub total_iterations: u64,
    /// Mean iterations per step.
    pub iterations_per_step: f64,
    /// Largest iteration count of one step.
    pub max_iterations_per_step: usize,
    /// Seconds spent stepping.
    pub wall_time: f64,
    /// Trajectory file name, relative to the summary.
    pub trajectory: String,
}

/// Reads a summary back.
pub fn read_summary(path: &Path) -> io::Result<RunSummary> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))
}

/// Pretty JSON of any serializable value followed by a newline.
pub fn write_json<T: Serialize, W: Write>(value: &T, mut out: W) -> io::Result<()> {
    serde_json::to_writer_pretty(&mut out, value).map_err(io::Error::from)?;
    out.write_all(b"\n")
}

/// Header of the sweep CSV.
pub const SWEEP_HEADER: [&str; 14] = [
    "table",
    "s",
    "k1",
    "k2",
    "solver",
    "h",
    "status",
    "max_energy_drift",
    "error",
    "rate",
    "iterations",
    "iterations_per_step",
    "wall_time",
    "detail",
];

/// One row per cell.
pub fn write_sweep_csv<W: Write>(report: &SweepReport, out: W) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SWEEP_HEADER)?;
    let table = serde_json::to_value(report.table).map_err(io::Error::from)?;
    let table = table.as_str().unwrap_or_default().to_string();
    for c in &report.cells {
        let solver = serde_json::to_value(c.solver).map_err(io::Error::from)?;
        w.write_record([
            table.clone(),
            c.method.s.to_string(),
            c.method.k1.to_string(),
            c.method.k2.to_string(),
            solver.as_str().unwrap_or_default().to_string(),
            opt(c.h),
            c.status.label().to_string(),
            opt(c.max_energy_drift),
            opt(c.final_error),
            c.empirical_rate.map(|r| format!("{r:.3}")).unwrap_or_default(),
            c.iterations.to_string(),
            format!("{:.3}", c.iterations_per_step),
            format!("{:.6}", c.wall_time),
            c.detail.clone().unwrap_or_default(),
        ])?;
    }
    w.flush()
}

/// Like [`write_sweep_csv`] without the wall-time column values, so that
/// repeated runs compare equal byte for byte.
pub fn write_sweep_csv_stable<W: Write>(report: &SweepReport, out: W) -> io::Result<()> {
    let mut r = report.clone();
    r.cells.iter_mut().for_each(|c| c.wall_time = 0.0);
    write_sweep_csv(&r, out)
}

/// Creates `dir` and opens `dir/name` for writing.
pub fn create(dir: &Path, name: &str) -> io::Result<(PathBuf, io::BufWriter<fs::File>)> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    let f = fs::File::create(&path)?;
    Ok((path, io::BufWriter::new(f)))
}
