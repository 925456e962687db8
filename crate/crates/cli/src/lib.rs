//! Batch experiment driver: TOML configs in, CSV tables plus a JSON sidecar
//! out. Outputs depend only on the config and seed.

pub mod commands;
pub mod config;
pub mod output;

use std::path::{Path, PathBuf};

use anyhow::Result;

pub use commands::run;
pub use config::{ExperimentConfig, ExperimentKind};
pub use output::{Report, Table};

/// Environment variable naming the default output root.
pub const OUT_ENV: &str = "SLIPFLOW_OUT";

/// `--out` wins, then `output_dir` from the config, then
/// `$SLIPFLOW_OUT/<config stem>`, then `out/<config stem>`.
pub fn resolve_output_dir(cli: Option<&Path>, cfg: &ExperimentConfig, config_path: &Path) -> PathBuf {
    if let Some(p) = cli {
        return p.to_path_buf();
    }
    if let Some(p) = &cfg.output_dir {
        return p.clone();
    }
    let stem = config_path.file_stem().map(|s| s.to_os_string()).unwrap_or_else(|| "run".into());
    let root = std::env::var_os(OUT_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("out"));
    root.join(stem)
}

/// Loads, runs and writes one experiment; returns the written paths.
pub fn execute(
    kind: ExperimentKind,
    config_path: &Path,
    out: Option<&Path>,
    seed: Option<u64>,
) -> Result<(Report, Vec<PathBuf>)> {
    let mut cfg = ExperimentConfig::load(config_path)?;
    anyhow::ensure!(
        cfg.kind == kind,
        "config {} declares kind `{}` but `{}` was requested",
        config_path.display(),
        cfg.kind.name(),
        kind.name()
    );
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let report = run(&cfg)?;
    let dir = resolve_output_dir(out, &cfg, config_path);
    let paths = report.write(&dir, &cfg)?;
    Ok((report, paths))
}
