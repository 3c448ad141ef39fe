use std::collections::HashSet;
use std::path::{Path, PathBuf};

use clap::Args;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use dora_core::bench::{aggregate_report, BenchManifest, BenchReport, ManifestEntry, MetricRow};
use dora_core::metrics::{evaluate_meshes, EvalConfig};

use super::classify::expand_inputs;
use super::eval::MetricArgs;
use crate::error::{CliError, CliResult};
use crate::output::{emit_json, hash_inputs, write_file, Document};
use crate::Context;

/// Radii reported per level.
const REPORT_RADII: [f64; 2] = [0.01, 0.005];

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct BenchArgs {
    /// Manifest written by `dora classify`.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Directory with one reconstruction per manifest id, named `<id>.obj` or `<id>.ply`.
    #[arg(long)]
    pub pred_dir: Option<PathBuf>,
    /// Report JSON; printed to stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Text table; printed to stdout when omitted and --out is given.
    #[arg(long)]
    pub table: Option<PathBuf>,
    /// Method name in the table header.
    #[arg(long, default_value = "method")]
    pub label: String,
    #[command(flatten)]
    #[serde(flatten)]
    pub metrics: MetricArgs,
}

#[derive(Debug, Serialize)]
struct BenchResult {
    report: BenchReport,
    rows: Vec<MetricRow>,
}

/// Accepts either a bare manifest or a `classify` document wrapping one.
pub fn read_manifest(path: &Path) -> CliResult<BenchManifest> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::user(format!("cannot read {}: {e}", path.display())))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| CliError::user(format!("{}: {e}", path.display())))?;
    let inner = value.pointer("/result/manifest").cloned().unwrap_or(value);
    serde_json::from_value(inner).map_err(|e| CliError::user(format!("{}: not a manifest: {e}", path.display())))
}

fn find_pred(dir: &Path, id: &str) -> Option<PathBuf> {
    ["obj", "ply"].iter().map(|ext| dir.join(format!("{id}.{ext}"))).find(|p| p.is_file())
}

fn evaluate_entry(entry: &ManifestEntry, pred: Option<&Path>, metrics: &MetricArgs, cfg: &EvalConfig) -> MetricRow {
    let Some(pred) = pred else {
        return MetricRow::failed(&entry.id, "missing reconstruction");
    };
    let run = || -> CliResult<MetricRow> {
        let gt = metrics.load(&entry.path)?;
        let pred = metrics.load(pred)?;
        let m = evaluate_meshes(&gt, &pred, cfg)?;
        Ok(MetricRow {
            id: entry.id.clone(),
            fscore_001: m.fscore_at(REPORT_RADII[0]).unwrap_or(f64::NAN),
            fscore_0005: m.fscore_at(REPORT_RADII[1]).unwrap_or(f64::NAN),
            chamfer: m.chamfer,
            sne: m.sne.map(|s| s.sne),
            failed: None,
        })
    };
    run().unwrap_or_else(|e| {
        let reason = match e {
            CliError::User(m) | CliError::Internal(m) => m,
        };
        MetricRow::failed(&entry.id, reason)
    })
}

pub fn run(args: &BenchArgs, ctx: &Context) -> CliResult<()> {
    let manifest_path = args.manifest.as_deref().ok_or_else(|| CliError::user("bench needs --manifest"))?;
    let pred_dir = args.pred_dir.as_deref().ok_or_else(|| CliError::user("bench needs --pred-dir"))?;
    if !pred_dir.is_dir() {
        return Err(CliError::user(format!("{} is not a directory", pred_dir.display())));
    }
    if REPORT_RADII.iter().any(|r| !args.metrics.fscore_r.contains(r)) {
        return Err(CliError::user("bench reports F-score at 0.01 and 0.005; --fscore-r must include both"));
    }
    let cfg = args.metrics.eval_config()?;
    let manifest = read_manifest(manifest_path)?;

    let ids: HashSet<&str> = manifest.entries.iter().map(|e| e.id.as_str()).collect();
    let stray: Vec<String> = expand_inputs(&[pred_dir.to_path_buf()])?
        .iter()
        .filter_map(|p| p.file_stem().map(|s| s.to_string_lossy().into_owned()))
        .filter(|stem| !ids.contains(stem.as_str()))
        .collect();
    if !stray.is_empty() {
        return Err(CliError::user(format!(
            "reconstructions without a manifest entry: {}",
            stray.join(", ")
        )));
    }

    let preds: Vec<Option<PathBuf>> = manifest.entries.iter().map(|e| find_pred(pred_dir, &e.id)).collect();
    let rows: Vec<MetricRow> = manifest
        .entries
        .par_iter()
        .zip(&preds)
        .map(|(entry, pred)| evaluate_entry(entry, pred.as_deref(), &args.metrics, &cfg))
        .collect();
    for r in rows.iter().filter(|r| r.failed.is_some()) {
        log::warn!("{}: {}", r.id, r.failed.as_deref().unwrap_or_default());
    }
    let report = aggregate_report(&manifest, &rows)?;
    let table = report.render_table(&args.label);

    let mut hashed: Vec<&Path> = vec![manifest_path];
    for (entry, pred) in manifest.entries.iter().zip(&preds) {
        hashed.push(&entry.path);
        hashed.extend(pred.as_deref());
    }
    let inputs = hash_inputs(hashed.into_iter().filter(|p| p.is_file()))?;
    let doc = Document::new("bench", args, inputs, BenchResult { report, rows }, ctx.reproducible);
    emit_json(&doc, args.out.as_deref())?;
    match (&args.table, &args.out) {
        (Some(path), _) => write_file(path, table.as_bytes()),
        (None, Some(_)) => {
            print!("{table}");
            Ok(())
        }
        (None, None) => Ok(()),
    }
}
