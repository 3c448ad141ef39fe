use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Serialize)]
pub struct InputHash {
    pub path: PathBuf,
    pub sha256: String,
}

pub fn sha256_file(path: &Path) -> CliResult<String> {
    let bytes = std::fs::read(path).map_err(|e| CliError::user(format!("cannot read {}: {e}", path.display())))?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

pub fn hash_inputs<'a>(paths: impl IntoIterator<Item = &'a Path>) -> CliResult<Vec<InputHash>> {
    paths
        .into_iter()
        .map(|p| {
            Ok(InputHash {
                path: p.to_path_buf(),
                sha256: sha256_file(p)?,
            })
        })
        .collect()
}

/// Every JSON document the tool writes: provenance around a result.
#[derive(Debug, Serialize)]
pub struct Document<'a, C: Serialize, R: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'a str,
    pub config: &'a C,
    pub inputs: Vec<InputHash>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub created_unix: Option<u64>,
    pub result: R,
}

impl<'a, C: Serialize, R: Serialize> Document<'a, C, R> {
    pub fn new(command: &'a str, config: &'a C, inputs: Vec<InputHash>, result: R, reproducible: bool) -> Self {
        let created_unix =
            (!reproducible).then(|| SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0));
        Self {
            tool: "dora",
            version: dora_core::VERSION,
            command,
            config,
            inputs,
            created_unix,
            result,
        }
    }
}

pub fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| CliError::user(format!("cannot create {}: {e}", parent.display())))?;
    }
    std::fs::write(path, bytes).map_err(|e| CliError::user(format!("cannot write {}: {e}", path.display())))
}

/// Pretty JSON to `path`, or to stdout when no path is given.
pub fn emit_json<T: Serialize>(value: &T, path: Option<&Path>) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    match path {
        Some(p) => write_file(p, text.as_bytes()),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| CliError::internal(format!("stdout: {e}"))),
    }
}
