use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};

use dora_core::bench::{CHAMFER_SCALE, FSCORE_SCALE, SNE_SCALE};
use dora_core::mesh::io::load_mesh;
use dora_core::metrics::{
    canny::{DEFAULT_HIGH, DEFAULT_LOW},
    default_views, evaluate_meshes,
    sne::sne_views,
    ChamferMode, EvalConfig, MeshMetrics, SneConfig, DEFAULT_EVAL_POINTS, DEFAULT_VIEW_COUNT,
};
use dora_core::TriangleMesh;

use crate::error::{CliError, CliResult};
use crate::output::{emit_json, hash_inputs, Document};
use crate::Context;

/// Metric flags shared by `eval` and `bench`.
#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct MetricArgs {
    /// F-score radii, comma separated.
    #[arg(long = "fscore-r", value_delimiter = ',', default_value = "0.01,0.005")]
    pub fscore_r: Vec<f64>,
    /// Surface points sampled per mesh for F-score and Chamfer distance.
    #[arg(long, default_value_t = DEFAULT_EVAL_POINTS)]
    pub eval_points: usize,
    /// Number of camera views for SNE.
    #[arg(long, default_value_t = DEFAULT_VIEW_COUNT)]
    pub views: usize,
    /// Normal map resolution in pixels.
    #[arg(long, default_value_t = 512)]
    pub res: usize,
    /// Canny hysteresis thresholds on 8-bit luminance.
    #[arg(long, default_value_t = DEFAULT_LOW)]
    pub canny_low: f64,
    #[arg(long, default_value_t = DEFAULT_HIGH)]
    pub canny_high: f64,
    /// Half-width of the square dilation element.
    #[arg(long, default_value_t = 2)]
    pub dilate_radius: usize,
    /// Dilation passes.
    #[arg(long, default_value_t = 1)]
    pub dilate_iterations: usize,
    /// Chamfer distance: symmetric or pred-to-gt.
    #[arg(long, default_value = "symmetric")]
    pub cd_mode: ChamferMode,
    /// Skip the Sharp Normal Error.
    #[arg(long)]
    pub no_sne: bool,
    /// Normalize both meshes to [-1, 1] independently before measuring.
    #[arg(long)]
    pub normalize: bool,
    /// Seed of the surface sampling.
    #[arg(long, env = "DORA_SEED", default_value_t = 0)]
    pub seed: u64,
}

impl MetricArgs {
    pub fn sne_config(&self) -> SneConfig {
        SneConfig {
            views: self.views,
            resolution: self.res,
            canny_low: self.canny_low,
            canny_high: self.canny_high,
            dilate_radius: self.dilate_radius,
            dilate_iterations: self.dilate_iterations,
        }
    }

    pub fn eval_config(&self) -> CliResult<EvalConfig> {
        if self.fscore_r.is_empty() || self.fscore_r.iter().any(|r| !(*r > 0.0)) {
            return Err(CliError::user("--fscore-r needs positive radii"));
        }
        if self.eval_points == 0 {
            return Err(CliError::user("--eval-points must be at least 1"));
        }
        if !self.no_sne && self.views == 0 {
            return Err(CliError::user("--views must be at least 1"));
        }
        Ok(EvalConfig {
            fscore_radii: self.fscore_r.clone(),
            eval_points: self.eval_points,
            chamfer_mode: self.cd_mode,
            sne: self.sne_config(),
            skip_sne: self.no_sne,
            seed: self.seed,
        })
    }

    pub fn load(&self, path: &Path) -> CliResult<TriangleMesh> {
        let mesh = load_mesh(path)?;
        Ok(if self.normalize { mesh.normalize_to_unit_cube()? } else { mesh })
    }
}

#[derive(Debug, Args, Clone, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct EvalArgs {
    /// Ground-truth mesh.
    #[arg(long)]
    pub gt: Option<PathBuf>,
    /// Reconstructed mesh.
    #[arg(long)]
    pub pred: Option<PathBuf>,
    /// Report JSON; printed to stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Directory for per-view normal maps and edge masks as PNG.
    #[arg(long)]
    pub dump_png: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub metrics: MetricArgs,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScoreEntry {
    pub radius: f64,
    pub precision: f64,
    pub recall: f64,
    pub fscore: f64,
    pub fscore_x100: f64,
}

/// Raw metrics alongside their display-scaled values.
#[derive(Debug, Clone, Serialize)]
pub struct EvalResult {
    pub fscores: Vec<ScoreEntry>,
    pub chamfer: f64,
    pub cd_x10000: f64,
    pub sne: Option<f64>,
    pub sne_x100: Option<f64>,
    pub sne_views_used: Option<usize>,
}

impl From<&MeshMetrics> for EvalResult {
    fn from(m: &MeshMetrics) -> Self {
        Self {
            fscores: m
                .fscores
                .iter()
                .map(|s| ScoreEntry {
                    radius: s.radius,
                    precision: s.precision,
                    recall: s.recall,
                    fscore: s.fscore,
                    fscore_x100: s.fscore * FSCORE_SCALE,
                })
                .collect(),
            chamfer: m.chamfer,
            cd_x10000: m.chamfer * CHAMFER_SCALE,
            sne: m.sne.map(|s| s.sne),
            sne_x100: m.sne.map(|s| s.sne * SNE_SCALE),
            sne_views_used: m.sne.map(|s| s.views_used),
        }
    }
}

fn dump_png(dir: &Path, gt: &TriangleMesh, pred: &TriangleMesh, cfg: &SneConfig) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::user(format!("cannot create {}: {e}", dir.display())))?;
    for (i, v) in sne_views(gt, pred, &default_views(cfg.views), cfg).iter().enumerate() {
        v.gt.write_png(dir.join(format!("view{i:02}_gt.png")))?;
        v.pred.write_png(dir.join(format!("view{i:02}_pred.png")))?;
        v.mask.write_png(dir.join(format!("view{i:02}_mask.png")))?;
    }
    Ok(())
}

pub fn run(args: &EvalArgs, ctx: &Context) -> CliResult<()> {
    let gt_path = args.gt.as_deref().ok_or_else(|| CliError::user("eval needs --gt"))?;
    let pred_path = args.pred.as_deref().ok_or_else(|| CliError::user("eval needs --pred"))?;
    let cfg = args.metrics.eval_config()?;
    let gt = args.metrics.load(gt_path)?;
    let pred = args.metrics.load(pred_path)?;
    let metrics = evaluate_meshes(&gt, &pred, &cfg)?;
    if let Some(dir) = &args.dump_png {
        dump_png(dir, &gt, &pred, &cfg.sne)?;
    }
    let doc = Document::new(
        "eval",
        args,
        hash_inputs([gt_path, pred_path])?,
        EvalResult::from(&metrics),
        ctx.reproducible,
    );
    emit_json(&doc, args.out.as_deref())
}
