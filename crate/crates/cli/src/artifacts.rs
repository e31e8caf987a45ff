//! Report, timings and CSV files in the output directory.

use crate::error::CliError;
use crate::run::{RunOutput, Sample};
use sha2::{Digest, Sha256};
use std::path::Path;

/// Hex SHA-256 of the scenario file contents.
pub fn scenario_hash(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, bytes).map_err(|e| CliError::Write { path: path.to_path_buf(), source: e })
}

fn csv_bytes(s: &Sample) -> Result<Vec<u8>, csv::Error> {
    let mut w = csv::Writer::from_writer(vec![]);
    w.write_record(&s.header)?;
    for r in &s.rows {
        w.write_record(r.iter().map(|v| v.to_string()))?;
    }
    w.into_inner().map_err(|e| e.into_error().into())
}

pub fn write_artifacts(dir: &Path, out: &RunOutput) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Write { path: dir.to_path_buf(), source: e })?;
    write(&dir.join("report.json"), pretty(&out.report).as_bytes())?;
    write(&dir.join("timings.json"), pretty(&out.timings).as_bytes())?;
    for s in &out.samples {
        let path = dir.join(&s.name);
        let bytes = csv_bytes(s).map_err(|e| CliError::Write { path: path.clone(), source: std::io::Error::other(e) })?;
        write(&path, &bytes)?;
    }
    Ok(())
}

fn pretty<T: serde::Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("report types serialize");
    s.push('\n');
    s
}
