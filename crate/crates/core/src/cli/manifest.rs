//! Run manifests: every file-producing command writes a sibling
//! `<first-output>.manifest.json` recording the effective config, the code
//! revision, the seed, wall time, and a sha256 digest of each output, so any
//! run can be replayed and checked byte for byte.

use crate::domain::ExperimentConfig;
use crate::error::Result;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OutputDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config: ExperimentConfig,
    pub git_describe: String,
    pub seed: u64,
    pub wall_ms: u128,
    pub outputs: Vec<OutputDigest>,
}

pub fn file_digest(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

pub fn git_describe() -> String {
    std::process::Command::new("git")
        .args(["describe", "--always", "--dirty"])
        .output()
        .ok()
        .filter(|o| o.status.success())
        .map(|o| String::from_utf8_lossy(&o.stdout).trim().to_string())
        .unwrap_or_else(|| "unknown".to_string())
}

impl RunManifest {
    pub fn emit(
        command: &str,
        config: &ExperimentConfig,
        wall_ms: u128,
        outputs: &[PathBuf],
    ) -> Result<PathBuf> {
        let digests = outputs
            .iter()
            .map(|p| {
                Ok(OutputDigest {
                    path: p.display().to_string(),
                    sha256: file_digest(p)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let manifest = RunManifest {
            command: command.to_string(),
            config: config.clone(),
            git_describe: git_describe(),
            seed: config.seed,
            wall_ms,
            outputs: digests,
        };
        let first = outputs
            .first()
            .cloned()
            .unwrap_or_else(|| PathBuf::from("run"));
        let path = PathBuf::from(format!("{}.manifest.json", first.display()));
        std::fs::write(&path, serde_json::to_string_pretty(&manifest)?)?;
        Ok(path)
    }

    /// Recompute the digests named by a manifest; true when all match.
    pub fn verify(path: &Path) -> Result<bool> {
        let manifest: RunManifest = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        for out in &manifest.outputs {
            if file_digest(Path::new(&out.path))? != out.sha256 {
                return Ok(false);
            }
        }
        Ok(true)
    }
}
