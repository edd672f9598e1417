//! Run reports: JSON documents embedding tool version, seed, and input
//! digests, written atomically. Two runs with identical inputs and seed
//! produce byte-identical reports modulo the `timings` object.

use crate::problem::{CliError, Problem};
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Serialize)]
pub struct ToolInfo {
    pub name: &'static str,
    pub version: &'static str,
}

impl Default for ToolInfo {
    fn default() -> Self {
        ToolInfo {
            name: "drccp",
            version: env!("CARGO_PKG_VERSION"),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct InputDigest {
    pub problem_path: String,
    pub problem_sha256: String,
    pub samples_path: String,
    pub samples_sha256: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub embedded_samples: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Timings {
    pub total_secs: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub tool: ToolInfo,
    pub command: String,
    pub method: Option<String>,
    pub seed: u64,
    pub input: InputDigest,
    pub parameters: Value,
    pub result: Value,
    pub timings: Timings,
}

fn sha256_hex(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    hex::encode(h.finalize())
}

pub fn input_digest(problem: &Problem, embed: bool) -> InputDigest {
    InputDigest {
        problem_path: problem.problem_path.display().to_string(),
        problem_sha256: sha256_hex(&problem.problem_bytes),
        samples_path: problem.samples_path.display().to_string(),
        samples_sha256: sha256_hex(&problem.samples_bytes),
        embedded_samples: embed.then(|| problem.samples.samples().to_vec()),
    }
}

/// Writes bytes atomically (temp file in the same directory, then rename).
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)
                .map_err(|e| CliError::Other(format!("creating {}: {e}", dir.display())))?;
        }
    }
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, bytes)
        .map_err(|e| CliError::Other(format!("writing {}: {e}", tmp.display())))?;
    std::fs::rename(&tmp, path)
        .map_err(|e| CliError::Other(format!("renaming into {}: {e}", path.display())))?;
    Ok(())
}

pub fn write_report(out_dir: &Path, name: &str, report: &RunReport) -> Result<PathBuf, CliError> {
    let path = out_dir.join(name);
    let mut bytes = serde_json::to_vec_pretty(report)
        .map_err(|e| CliError::Other(format!("serializing report: {e}")))?;
    bytes.push(b'\n');
    write_atomic(&path, &bytes)?;
    Ok(path)
}
