//! Result files. Everything is staged in memory and written only once the
//! whole command has succeeded.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use crate::config::SCHEMA_VERSION;
use crate::error::CliError;

#[derive(Debug, Default)]
pub struct Outputs {
    hash: String,
    files: Vec<(PathBuf, Vec<u8>)>,
}

impl Outputs {
    pub fn new(hash: impl Into<String>) -> Self {
        Self { hash: hash.into(), files: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.files.len()
    }

    fn header(&self) -> String {
        format!("# schema_version: {SCHEMA_VERSION}\n# config_hash: {}\n", self.hash)
    }

    /// CSV table with a commented provenance header.
    pub fn csv(&mut self, name: impl Into<PathBuf>, columns: &[String], rows: &[Vec<String>]) -> Result<(), CliError> {
        let mut w = csv::Writer::from_writer(self.header().into_bytes());
        w.write_record(columns).map_err(|e| CliError::Io(e.to_string()))?;
        for r in rows {
            w.write_record(r).map_err(|e| CliError::Io(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
        self.files.push((name.into(), bytes));
        Ok(())
    }

    /// JSON document stamped with schema version and config hash.
    pub fn json(&mut self, name: impl Into<PathBuf>, body: &impl Serialize) -> Result<(), CliError> {
        let body = serde_json::to_value(body).map_err(|e| CliError::Io(e.to_string()))?;
        let mut doc = json!({ "schema_version": SCHEMA_VERSION, "config_hash": self.hash });
        match body {
            Value::Object(m) => doc.as_object_mut().expect("object").extend(m),
            other => {
                doc["data"] = other;
            }
        }
        let mut text = serde_json::to_string_pretty(&doc).map_err(|e| CliError::Io(e.to_string()))?;
        text.push('\n');
        self.files.push((name.into(), text.into_bytes()));
        Ok(())
    }

    /// Two-column plot data.
    pub fn plot(&mut self, name: impl Into<PathBuf>, x_label: &str, y_label: &str, points: &[(f64, f64)]) {
        let mut s = self.header();
        let _ = writeln!(s, "# {x_label} {y_label}");
        for (x, y) in points {
            let _ = writeln!(s, "{x:e} {y:e}");
        }
        self.files.push((name.into(), s.into_bytes()));
    }

    pub fn into_files(self) -> Vec<(PathBuf, Vec<u8>)> {
        self.files
    }

    pub fn write(self, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
        let mut written = Vec::with_capacity(self.files.len());
        for (rel, bytes) in self.files {
            let path = dir.join(rel);
            if let Some(parent) = path.parent() {
                std::fs::create_dir_all(parent)?;
            }
            std::fs::write(&path, bytes)?;
            written.push(path);
        }
        Ok(written)
    }
}

pub fn fmt_f64(x: f64) -> String {
    format!("{x:e}")
}

pub fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}
