//! Provenance record written next to every command's outputs.

use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::config::RunConfig;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub seed: u64,
    pub config_sha256: String,
    pub config: String,
}

pub fn config_hash(cfg: &RunConfig) -> String {
    let digest = Sha256::digest(cfg.serialize().as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn write_provenance(dir: &Path, command: &str, cfg: &RunConfig) -> Result<()> {
    let p = Provenance {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        command: command.to_string(),
        seed: cfg.seed,
        config_sha256: config_hash(cfg),
        config: cfg.serialize(),
    };
    let path = dir.join("provenance.json");
    let text = serde_json::to_string_pretty(&p).expect("provenance serializes");
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
}
