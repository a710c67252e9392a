//! Artifact emission: CSV tables with 17 significant digits, pretty JSON and
//! the run manifest.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{emit_config, RunConfig};
use crate::error::Result;
use crate::spectral::SpectralField;

pub const MANIFEST: &str = "manifest.json";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Seventeen significant digits, enough to round-trip any f64.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Columns {
    Coefficients,
    Values,
}

/// Rows `time, alpha, ...` with either sine coefficients or node values.
pub fn trajectory_csv(
    time_label: &str,
    times: &[f64],
    alphas: &[f64],
    states: &[SpectralField],
    columns: Columns,
) -> String {
    let mut out = String::new();
    out.push_str(time_label);
    out.push_str(",alpha");
    if let Some(first) = states.first() {
        let n = first.basis().n_modes();
        for k in 1..=n {
            match columns {
                Columns::Coefficients => write!(out, ",c{k}").unwrap(),
                Columns::Values => write!(out, ",u{k}").unwrap(),
            }
        }
    }
    out.push('\n');
    for ((t, a), s) in times.iter().zip(alphas).zip(states) {
        out.push_str(&num(*t));
        out.push(',');
        out.push_str(&num(*a));
        let row = match columns {
            Columns::Coefficients => s.coeffs().to_vec(),
            Columns::Values => s.to_values(),
        };
        for v in row {
            out.push(',');
            out.push_str(&num(v));
        }
        out.push('\n');
    }
    out
}

/// Generic numeric table.
pub fn table_csv(header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row.into_iter().map(num).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileRecord {
    pub name: String,
    pub sha256: String,
}

/// Writes files into one directory and remembers their digests.
#[derive(Debug)]
pub struct ArtifactWriter {
    dir: PathBuf,
    files: Vec<FileRecord>,
}

impl ArtifactWriter {
    pub fn create(dir: impl AsRef<Path>) -> Result<Self> {
        fs::create_dir_all(dir.as_ref())?;
        Ok(ArtifactWriter { dir: dir.as_ref().to_path_buf(), files: Vec::new() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        fs::write(self.dir.join(name), contents)?;
        self.files.push(FileRecord { name: name.to_string(), sha256: sha256_hex(contents.as_bytes()) });
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value).expect("report serializes");
        text.push('\n');
        self.write(name, &text)
    }

    pub fn files(&self) -> &[FileRecord] {
        &self.files
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub experiment: String,
    pub config_sha256: String,
    pub wall_time_seconds: f64,
    /// `t` or `tau`, the first CSV column
    pub time_variable: String,
    pub columns: Columns,
    pub seed: u64,
    pub files: Vec<FileRecord>,
    pub config: RunConfig,
}

impl Manifest {
    pub fn new(config: &RunConfig, experiment: &str, time_variable: &str, columns: Columns) -> Self {
        Manifest {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            experiment: experiment.to_string(),
            config_sha256: sha256_hex(emit_config(config).as_bytes()),
            wall_time_seconds: 0.0,
            time_variable: time_variable.to_string(),
            columns,
            seed: config.output.seed,
            files: Vec::new(),
            config: config.clone(),
        }
    }
}
