//! Tables, sidecar metadata and atomic file writes.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;

/// Bumped whenever a column is added, removed or renamed.
pub const SCHEMA_VERSION: u32 = 1;
pub const TOOLKIT_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Comma-separated table with a header row.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self { header: header.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<&str>> {
        let k = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[k].as_str()).collect())
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.join(","));
            out.push('\n');
        }
        out
    }
}

/// Shortest round-trip representation, scientific for very small or large
/// magnitudes; `inf`/`nan` spelled out.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else if x != 0.0 && !(1e-4..1e15).contains(&x.abs()) {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}

/// SHA-256 of the resolved configuration, serialised canonically.
pub fn config_hash(cfg: &ExperimentConfig) -> Result<String> {
    let canonical = serde_json::to_vec(cfg)?;
    let digest = Sha256::digest(&canonical);
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

#[derive(Debug, Serialize)]
pub struct Sidecar<'a> {
    pub toolkit: &'static str,
    pub version: &'static str,
    pub schema_version: u32,
    pub kind: &'static str,
    pub config_sha256: String,
    pub seed: u64,
    pub tables: Vec<String>,
    pub summary: &'a serde_json::Value,
}

/// Writes via a temporary sibling and a rename so readers never observe a
/// partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp).with_context(|| format!("creating {}", tmp.display()))?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path).with_context(|| format!("renaming onto {}", path.display()))?;
    Ok(())
}

/// Everything an experiment emits.
#[derive(Debug, Clone)]
pub struct Report {
    /// `(file stem, table)`; the first is the main table.
    pub tables: Vec<(String, Table)>,
    pub summary: serde_json::Value,
}

impl Report {
    pub fn table(&self, stem: &str) -> Option<&Table> {
        self.tables.iter().find(|(s, _)| s == stem).map(|(_, t)| t)
    }

    /// Writes `<stem>.csv` per table and `<kind>.json`; returns the paths.
    pub fn write(&self, dir: &Path, cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
        let mut paths = Vec::new();
        for (stem, t) in &self.tables {
            let p = dir.join(format!("{stem}.csv"));
            write_atomic(&p, t.to_csv().as_bytes())?;
            paths.push(p);
        }
        let meta = Sidecar {
            toolkit: "slipflow",
            version: TOOLKIT_VERSION,
            schema_version: SCHEMA_VERSION,
            kind: cfg.kind.name(),
            config_sha256: config_hash(cfg)?,
            seed: cfg.seed,
            tables: self.tables.iter().map(|(s, _)| format!("{s}.csv")).collect(),
            summary: &self.summary,
        };
        let p = dir.join(format!("{}.json", cfg.kind.name()));
        let mut text = serde_json::to_string_pretty(&meta)?;
        text.push('\n');
        write_atomic(&p, text.as_bytes())?;
        paths.push(p);
        Ok(paths)
    }
}
