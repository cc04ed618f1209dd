//! File emission: CSV series and JSON reports.
//!
//! Every float is written as `{:.16e}` (17 significant digits), which
//! round-trips any f64 exactly, so reloading a CSV reproduces the in-memory
//! numbers bit for bit. Nothing schedule-dependent or clock-dependent goes
//! into a CSV; wall-clock fields live in the JSON metadata only, keeping CSV
//! output byte-identical across runs and thread counts.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use unravel_core::generators::TimeSeries;
use unravel_core::ops::{self, CMatrix};
use unravel_core::trajectories::TrajectoryRecord;

use crate::CliError;

pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::config(format!(
        "[output-file] cannot write {}: {e}",
        path.display()
    ))
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| io_err(path, e))?;
    }
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::config(format!("[output-json] {e}")))?;
    write_text(path, &(text + "\n"))
}

/// Builds one CSV line from already-formatted cells.
fn push_row(out: &mut String, cells: &[String]) {
    let _ = writeln!(out, "{}", cells.join(","));
}

/// Column labels for the row-major entries of a d x d complex matrix.
fn entry_headers(d: usize) -> Vec<String> {
    let mut headers = Vec::with_capacity(2 * d * d);
    for i in 0..d {
        for j in 0..d {
            headers.push(format!("m_{i}{j}_re"));
            headers.push(format!("m_{i}{j}_im"));
        }
    }
    headers
}

fn entry_cells(m: &CMatrix) -> Vec<String> {
    let mut cells = Vec::with_capacity(2 * m.len());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            cells.push(fmt_float(m[(i, j)].re));
            cells.push(fmt_float(m[(i, j)].im));
        }
    }
    cells
}

/// Reference series CSV: t, matrix entries (row-major re/im), trace_re,
/// purity, and Bloch coordinates for qubit models.
pub fn reference_csv(series: &TimeSeries, d: usize) -> String {
    let mut out = String::new();
    let mut headers = vec!["t".to_string()];
    headers.extend(entry_headers(d));
    headers.extend(["trace_re".into(), "purity".into()]);
    if d == 2 {
        headers.extend(["bloch_x".into(), "bloch_y".into(), "bloch_z".into()]);
    }
    push_row(&mut out, &headers);
    for (k, state) in series.states.iter().enumerate() {
        let mut cells = vec![fmt_float(series.time(k))];
        cells.extend(entry_cells(state));
        cells.push(fmt_float(ops::trace(state).re));
        cells.push(fmt_float(ops::purity(state)));
        if d == 2 {
            let (x, y, z) = ops::bloch_coords(state);
            cells.extend([fmt_float(x), fmt_float(y), fmt_float(z)]);
        }
        push_row(&mut out, &cells);
    }
    out
}

/// Trajectory record CSV: k, t, trace_re, purity, Bloch coordinates for
/// qubit models, then the full empirical-mean entries.
pub fn trajectory_csv(record: &TrajectoryRecord, d: usize) -> String {
    let mut out = String::new();
    let mut headers = vec![
        "k".to_string(),
        "t".into(),
        "trace_re".into(),
        "purity".into(),
    ];
    if d == 2 {
        headers.extend(["bloch_x".into(), "bloch_y".into(), "bloch_z".into()]);
    }
    headers.extend(entry_headers(d));
    push_row(&mut out, &headers);
    for (row, &k) in record.indices.iter().enumerate() {
        let mut cells = vec![
            fmt_float(k as f64),
            fmt_float(record.times[row]),
            fmt_float(record.trace_re[row]),
            fmt_float(record.purity[row]),
        ];
        if let Some(bloch) = &record.bloch {
            cells.extend(bloch[row].iter().map(|&v| fmt_float(v)));
        }
        cells.extend(entry_cells(&record.means[row]));
        push_row(&mut out, &cells);
    }
    out
}

/// Study summary CSV with one row per ensemble size.
pub fn study_csv(n_values: &[usize], means: &[f64], stderrs: &[f64]) -> String {
    let mut out = String::new();
    push_row(
        &mut out,
        &["N".to_string(), "mean_error".into(), "stderr".into()],
    );
    for (i, &n) in n_values.iter().enumerate() {
        push_row(
            &mut out,
            &[n.to_string(), fmt_float(means[i]), fmt_float(stderrs[i])],
        );
    }
    out
}

/// Long-format CSV of per-seed sups: one row per (N, seed) cell that
/// survived, gnuplot/vega-friendly.
pub fn long_csv(n_values: &[usize], seeds: &[u64], per_seed: &[Vec<f64>]) -> String {
    let mut out = String::new();
    push_row(
        &mut out,
        &["N".to_string(), "seed".into(), "sup_error".into()],
    );
    for (i, &n) in n_values.iter().enumerate() {
        for (j, &seed) in seeds.iter().enumerate() {
            let value = per_seed[i][j];
            if value.is_finite() {
                push_row(
                    &mut out,
                    &[n.to_string(), seed.to_string(), fmt_float(value)],
                );
            }
        }
    }
    out
}

/// Long-format CSV of marginal-discrepancy curves: one row per (N, t).
pub fn marginal_csv(n_values: &[usize], dt: f64, curves: &[Vec<f64>]) -> String {
    let mut out = String::new();
    push_row(
        &mut out,
        &["N".to_string(), "t".into(), "discrepancy".into()],
    );
    for (i, &n) in n_values.iter().enumerate() {
        for (k, &value) in curves[i].iter().enumerate() {
            push_row(
                &mut out,
                &[n.to_string(), fmt_float(k as f64 * dt), fmt_float(value)],
            );
        }
    }
    out
}

/// Minimal CSV reader for the round-trip guarantee: header plus float rows
/// (every column this tool writes parses as f64).
pub fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>), CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::config(format!("[csv-read] {}: {e}", path.display())))?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| CliError::config("[csv-read] empty file".into()))?
        .split(',')
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let row: Result<Vec<f64>, _> = line.split(',').map(str::parse::<f64>).collect();
        rows.push(
            row.map_err(|e| CliError::config(format!("[csv-read] line {}: {e}", lineno + 2)))?,
        );
    }
    Ok((header, rows))
}

/// Output paths for one subcommand run.
pub struct OutPaths {
    pub dir: PathBuf,
}

impl OutPaths {
    pub fn new(dir: &Path) -> Self {
        Self {
            dir: dir.to_path_buf(),
        }
    }

    pub fn file(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }
}
