use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};

use dora_core::bench::{build_manifest, BenchManifest, ComplexityLevel};
use dora_core::sampler::DEFAULT_TAU_DEG;

use crate::error::{CliError, CliResult};
use crate::output::{emit_json, hash_inputs, Document};
use crate::Context;

const MESH_EXTENSIONS: [&str; 2] = ["obj", "ply"];

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct ClassifyArgs {
    /// Mesh files, or directories whose .obj/.ply files are taken (not recursive).
    pub inputs: Vec<PathBuf>,
    /// Dihedral angle threshold in degrees.
    #[arg(long, default_value_t = DEFAULT_TAU_DEG)]
    pub tau: f64,
    /// Dataset name recorded in the manifest.
    #[arg(long, default_value = "dataset")]
    pub dataset: String,
    /// Manifest JSON; printed to stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct ClassifyResult {
    manifest: BenchManifest,
    level_counts: BTreeMap<ComplexityLevel, usize>,
}

fn is_mesh(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| MESH_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
}

/// Files as given, directories expanded to their meshes in name order.
pub fn expand_inputs(inputs: &[PathBuf]) -> CliResult<Vec<PathBuf>> {
    let mut paths = Vec::new();
    for input in inputs {
        if input.is_dir() {
            let entries = std::fs::read_dir(input).map_err(|e| CliError::user(format!("cannot list {}: {e}", input.display())))?;
            let mut found: Vec<PathBuf> = entries
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.is_file() && is_mesh(p))
                .collect();
            found.sort();
            paths.extend(found);
        } else {
            paths.push(input.clone());
        }
    }
    Ok(paths)
}

pub fn run(args: &ClassifyArgs, ctx: &Context) -> CliResult<()> {
    let paths = expand_inputs(&args.inputs)?;
    let manifest = build_manifest(&paths, args.tau, &args.dataset);
    for r in &manifest.rejects {
        log::warn!("rejected {}: {}", r.path.display(), r.reason);
    }
    let inputs = hash_inputs(manifest.entries.iter().map(|e| e.path.as_path()))?;
    let result = ClassifyResult {
        level_counts: manifest.level_counts(),
        manifest,
    };
    let doc = Document::new("classify", args, inputs, result, ctx.reproducible);
    emit_json(&doc, args.out.as_deref())
}
