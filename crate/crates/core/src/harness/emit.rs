//! Result files: per-point CSV, JSON sidecar and iteration traces.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::sweep::SweepResult;
use super::trial::{ExperimentSpec, TraceRow};

pub const CSV_HEADER: [&str; 6] = [
    "sweep_value",
    "mean_nmse_b_db",
    "mean_nmse_r_db",
    "mean_nmse_x_db",
    "divergence_rate",
    "n_trials",
];

pub const TRACE_HEADER: [&str; 6] = ["iter", "layer", "residual", "nmse_x", "nmse_b", "nmse_r"];

/// Contents of the JSON sidecar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub spec: ExperimentSpec,
    pub result: SweepResult,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Emitted {
    pub csv: PathBuf,
    pub json: PathBuf,
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Serialization {
            path: path.to_path_buf(),
            message: format!("{other:?}"),
        },
    }
}

fn num(v: f64) -> String {
    format!("{v}")
}

/// CSV rows for `result`. Means exclude diverged trials; a point where
/// every trial diverged has empty mean fields.
pub fn write_csv<W: Write>(result: &SweepResult, out: W, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER).map_err(|e| csv_err(path, e))?;
    for p in &result.points {
        let (b, r, x) = match p.mean() {
            Some(m) => (num(m.b), num(m.r), num(m.x)),
            None => (String::new(), String::new(), String::new()),
        };
        w.write_record([num(p.value), b, r, x, num(p.divergence_rate), p.n_trials.to_string()])
            .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Write `<dir>/<stem>.csv` and `<dir>/<stem>.json`, creating `dir`.
pub fn emit(spec: &ExperimentSpec, result: &SweepResult, dir: &Path, stem: &str) -> Result<Emitted> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let csv_path = dir.join(format!("{stem}.csv"));
    let json_path = dir.join(format!("{stem}.json"));

    let file = File::create(&csv_path).map_err(|e| Error::io(&csv_path, e))?;
    write_csv(result, BufWriter::new(file), &csv_path)?;

    let sidecar = Sidecar {
        spec: spec.clone(),
        result: result.clone(),
    };
    let file = File::create(&json_path).map_err(|e| Error::io(&json_path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, &sidecar).map_err(|e| Error::Serialization {
        path: json_path.clone(),
        message: e.to_string(),
    })?;
    w.flush().map_err(|e| Error::io(&json_path, e))?;
    Ok(Emitted {
        csv: csv_path,
        json: json_path,
    })
}

pub fn read_sidecar(path: &Path) -> Result<Sidecar> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Serialization {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

pub fn write_trace(rows: &[TraceRow], path: &Path) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    w.write_record(TRACE_HEADER).map_err(|e| csv_err(path, e))?;
    for r in rows {
        w.write_record([
            r.iter.to_string(),
            r.layer.to_string(),
            num(r.residual),
            num(r.nmse_x),
            num(r.nmse_b),
            num(r.nmse_r),
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
