//! CSV and JSON writers. Floats use 17 significant digits.

use std::fs;
use std::path::Path;

use adastep::optimizer::Trajectory;
use serde::Serialize;

use crate::error::{CliError, CliResult};

pub const TRAJECTORY_HEADER: [&str; 6] = ["t", "f_gap", "grad_norm_sq", "eta_min", "eta_max", "liminf_stat"];

pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn ensure_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

/// Writes a CSV file from a header and pre-formatted rows.
pub fn write_csv<I>(path: &Path, header: &[&str], rows: I) -> CliResult<usize>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let io = |e: csv::Error| CliError::io(path, std::io::Error::other(e));
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    w.write_record(header).map_err(io)?;
    let mut n = 0;
    for row in rows {
        w.write_record(&row).map_err(io)?;
        n += 1;
    }
    w.flush().map_err(|e| CliError::io(path, e))?;
    Ok(n)
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::io(path, std::io::Error::other(e)))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn write_trajectory_csv(path: &Path, trajectory: &Trajectory) -> CliResult<usize> {
    let rows = trajectory.checkpoints.iter().map(|c| {
        vec![
            c.t.to_string(),
            fmt_float(c.f_gap),
            fmt_float(c.grad_norm_sq),
            fmt_float(c.eta_min),
            fmt_float(c.eta_max),
            fmt_float(c.liminf_stat),
        ]
    });
    write_csv(path, &TRAJECTORY_HEADER, rows)
}
