//! Append-only run directories and the files written into them.

use std::fs;
use std::path::{Path, PathBuf};

use analog_verify::protocols::DecayCurve;
use anyhow::{Context, Result};
use serde::Serialize;

/// Creates the next free `run-NNNN` directory under `root`.
///
/// Existing runs are never touched; creation is atomic, so concurrent
/// invocations each get their own directory.
pub fn allocate_run_dir(root: &Path) -> Result<PathBuf> {
    fs::create_dir_all(root).with_context(|| format!("creating {}", root.display()))?;
    let mut next = fs::read_dir(root)?
        .filter_map(|e| e.ok())
        .filter_map(|e| e.file_name().to_str()?.strip_prefix("run-")?.parse::<u32>().ok())
        .max()
        .map_or(0, |n| n + 1);
    loop {
        let dir = root.join(format!("run-{next:04}"));
        match fs::create_dir(&dir) {
            Ok(()) => return Ok(dir),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => next += 1,
            Err(e) => return Err(e).with_context(|| format!("creating {}", dir.display())),
        }
    }
}

pub fn timestamp() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// `time_s, success_prob, stderr, n_samples` rows of a decay curve.
pub fn curve_csv(curve: &DecayCurve) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["time_s", "success_prob", "stderr", "n_samples"])?;
    for p in &curve.points {
        w.write_record([
            p.time.to_string(),
            p.success_probability.to_string(),
            p.standard_error.to_string(),
            p.n_samples.to_string(),
        ])?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

/// Generic table with a header row.
pub fn table_csv(header: &[String], rows: &[Vec<f64>]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r.iter().map(|v| v.to_string()))?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}
