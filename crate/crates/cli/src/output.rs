//! CSV and metadata writers. Floats use the shortest round-trip
//! representation, so identical runs produce byte-identical files.

use crate::config::ExperimentConfig;
use crate::CliResult;
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

pub fn write_csv(
    dir: &Path,
    name: &str,
    header: &str,
    rows: impl IntoIterator<Item = String>,
) -> CliResult<PathBuf> {
    let mut text = String::from(header);
    text.push('\n');
    for row in rows {
        text.push_str(&row);
        text.push('\n');
    }
    let path = dir.join(name);
    std::fs::write(&path, text)?;
    Ok(path)
}

/// Shortest round-trip float formatting.
pub fn fmt_f(x: f64) -> String {
    format!("{x}")
}

/// Optional float; empty field when absent.
pub fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f).unwrap_or_default()
}

#[derive(Serialize)]
struct RunMetadata<'a> {
    command: &'a str,
    config_hash: String,
    seed: u64,
    version: &'a str,
    rng: &'a str,
    wall_ms: f64,
}

/// JSON sidecar recording the config hash, crate version, RNG layout,
/// and wall time of a command run.
pub fn write_metadata(
    dir: &Path,
    command: &str,
    cfg: &ExperimentConfig,
    wall_ms: f64,
) -> CliResult<PathBuf> {
    let meta = RunMetadata {
        command,
        config_hash: config_hash(cfg),
        seed: cfg.seed,
        version: env!("CARGO_PKG_VERSION"),
        rng: nqs::sampler::RNG_ALGORITHM,
        wall_ms,
    };
    let path = dir.join("metadata.json");
    std::fs::write(&path, serde_json::to_string_pretty(&meta).expect("metadata serializes"))?;
    Ok(path)
}

/// SHA-256 of the canonical JSON serialization of the effective config.
pub fn config_hash(cfg: &ExperimentConfig) -> String {
    let canonical = serde_json::to_string(cfg).expect("config serializes");
    let mut hasher = Sha256::new();
    hasher.update(canonical.as_bytes());
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}
