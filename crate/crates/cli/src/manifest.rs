//! Reproducibility manifest written next to every command's outputs: tool
//! version, command name, seed, and SHA-256 hashes of the config and inputs.
//! File names (not full paths) are recorded so reruns in different
//! directories produce identical bytes.

use std::fs;
use std::io;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub config_sha256: String,
    pub inputs: Vec<InputHash>,
}

#[derive(Debug, Serialize)]
pub struct InputHash {
    pub name: String,
    pub sha256: String,
}

pub fn sha256_file(path: &Path) -> io::Result<String> {
    let bytes = fs::read(path)?;
    Ok(format!("{:x}", Sha256::digest(&bytes)))
}

fn file_name(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

/// Hash the config and inputs and write `run_manifest.json` into `out_dir`.
pub fn write_manifest(
    out_dir: &Path,
    command: &str,
    seed: u64,
    config_path: &Path,
    inputs: &[&Path],
) -> io::Result<()> {
    let manifest = RunManifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        command: command.to_string(),
        seed,
        config_sha256: sha256_file(config_path)?,
        inputs: inputs
            .iter()
            .map(|p| {
                Ok(InputHash {
                    name: file_name(p),
                    sha256: sha256_file(p)?,
                })
            })
            .collect::<io::Result<Vec<_>>>()?,
    };
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(out_dir.join("run_manifest.json"), json + "\n")
}
