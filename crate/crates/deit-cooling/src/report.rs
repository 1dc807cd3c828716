//! Deterministic data emission: CSV tables and JSON documents, each
//! stamped with the crate version and a hash of the exact configuration
//! that produced them.
//!
//! Numbers are written with 12 significant digits in scientific notation;
//! identical configuration and version therefore produce byte-identical
//! files. Every CSV column header names its unit.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Identity of a run, embedded in every emitted file.
#[derive(Clone, Debug, Serialize)]
pub struct Provenance {
    /// Crate version.
    pub version: String,
    /// SHA-256 of the fully resolved configuration text.
    pub config_sha256: String,
}

impl Provenance {
    pub fn new(config_text: &str) -> Self {
        let mut h = Sha256::new();
        h.update(config_text.as_bytes());
        let digest = h.finalize();
        let hex: String =
            digest.iter().map(|b| format!("{b:02x}")).collect();
        Self {
            version: env!("CARGO_PKG_VERSION").to_string(),
            config_sha256: hex,
        }
    }
}

/// Emits files into one output directory.
#[derive(Clone, Debug)]
pub struct Report {
    dir: PathBuf,
    provenance: Provenance,
    config_text: String,
}

/// One column of a CSV table: header (with unit) and values.
#[derive(Clone, Debug)]
pub struct Column {
    pub header: String,
    pub values: Vec<f64>,
}

impl Column {
    pub fn new(header: &str, values: Vec<f64>) -> Self {
        Self { header: header.to_string(), values }
    }
}

/// Fixed-width scientific formatting: 12 significant digits, so that
/// output is deterministic and full precision survives a round trip.
pub fn format_number(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.11e}")
    } else {
        // CSV-safe spellings for the pathological cases
        format!("{v}")
    }
}

impl Report {
    /// Create the output directory (if needed) and remember the resolved
    /// configuration it corresponds to.
    pub fn create(dir: &Path, config_text: &str) -> Result<Self> {
        fs::create_dir_all(dir)?;
        let report = Self {
            dir: dir.to_path_buf(),
            provenance: Provenance::new(config_text),
            config_text: config_text.to_string(),
        };
        // echo the exact configuration so the run is reproducible from its
        // output directory alone
        fs::write(report.dir.join("config.resolved.toml"), config_text)?;
        Ok(report)
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn config_text(&self) -> &str {
        &self.config_text
    }

    /// Write a CSV table. All columns must have equal length. Returns the
    /// file path.
    pub fn write_csv(&self, name: &str, columns: &[Column]) -> Result<PathBuf> {
        if columns.is_empty() {
            return Err(Error::InvalidArgument(
                "CSV table needs at least one column".into(),
            ));
        }
        let rows = columns[0].values.len();
        for c in columns {
            if c.values.len() != rows {
                return Err(Error::DimensionMismatch(format!(
                    "column '{}' has {} rows, expected {rows}",
                    c.header,
                    c.values.len()
                )));
            }
        }
        let mut out = String::new();
        out.push_str(&format!(
            "# deit-cooling {}\n# config sha256: {}\n",
            self.provenance.version, self.provenance.config_sha256
        ));
        let headers: Vec<&str> =
            columns.iter().map(|c| c.header.as_str()).collect();
        out.push_str(&headers.join(","));
        out.push('\n');
        for i in 0..rows {
            let row: Vec<String> = columns
                .iter()
                .map(|c| format_number(c.values[i]))
                .collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        let path = self.dir.join(name);
        fs::write(&path, out)?;
        Ok(path)
    }

    /// Write a JSON document wrapped with the run provenance. Returns the
    /// file path.
    pub fn write_json<T: Serialize>(&self, name: &str, data: &T) -> Result<PathBuf> {
        #[derive(Serialize)]
        struct Wrapped<'a, T> {
            provenance: &'a Provenance,
            data: &'a T,
        }
        let doc = Wrapped { provenance: &self.provenance, data };
        let text = serde_json::to_string_pretty(&doc)
            .map_err(|e| Error::InvalidState(format!("JSON encoding: {e}")))?;
        let path = self.dir.join(name);
        fs::write(&path, text + "\n")?;
        Ok(path)
    }
}
