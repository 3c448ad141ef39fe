use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use clap::Args;
use serde::{Deserialize, Serialize};
use serde_json::json;

use dora_core::neural::{
    to_checkpoint_bytes, toy_dataset, train_toy, Arm, Profile, ToyDataset, TrainConfig, TrainReport, DEFAULT_KL_WEIGHT,
};
use dora_core::sampler::DEFAULT_TAU_DEG;

use crate::error::{CliError, CliResult};
use crate::output::{emit_json, write_file, Document};
use crate::Context;

pub const CHECKPOINT_FILE: &str = "model.ckpt";
pub const LOG_FILE: &str = "train.jsonl";
pub const REPORT_FILE: &str = "report.json";

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct TrainArgs {
    /// Ablation arm: full, no-dca or no-ses.
    #[arg(long, default_value = "full")]
    pub arm: Arm,
    /// Hyperparameter profile: toy or paper.
    #[arg(long, default_value = "toy")]
    pub profile: Profile,
    /// Seed of initialization, sampling and batching.
    #[arg(long, env = "DORA_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Procedural dataset: spheres, boxes or bump-grid.
    #[arg(long, default_value = "bump-grid")]
    pub dataset: ToyDataset,
    /// Number of training shapes.
    #[arg(long, default_value_t = 8)]
    pub shapes: usize,
    /// Seed of the procedural dataset, independent of the training seed.
    #[arg(long, default_value_t = 0)]
    pub dataset_seed: u64,
    /// Directory for the checkpoint, the JSON-lines log and the report.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Epochs (profile default when omitted).
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Adam learning rate (profile default when omitted).
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_KL_WEIGHT)]
    pub kl_weight: f64,
    /// Dihedral angle threshold in degrees for salient sampling.
    #[arg(long, default_value_t = DEFAULT_TAU_DEG)]
    pub tau: f64,
    /// Marching cubes resolution for the final evaluation (profile default when omitted).
    #[arg(long)]
    pub eval_res: Option<usize>,
    /// Surface points per mesh for the final F-score (profile default when omitted).
    #[arg(long)]
    pub eval_points: Option<usize>,
}

impl TrainArgs {
    pub fn train_config(&self) -> TrainConfig {
        let mut cfg = TrainConfig::profile(self.profile, self.arm);
        cfg.kl_weight = self.kl_weight;
        cfg.tau_deg = self.tau;
        if let Some(e) = self.epochs {
            cfg.epochs = e;
        }
        if let Some(lr) = self.lr {
            cfg.lr = lr;
        }
        if let Some(r) = self.eval_res {
            cfg.eval_res = r;
        }
        if let Some(n) = self.eval_points {
            cfg.eval_points = n;
        }
        cfg
    }
}

#[derive(Debug, Serialize)]
struct TrainSummary<'a> {
    arm: Arm,
    sampling: &'a str,
    mean_fscore: f64,
    heldout_accuracy: f64,
    files: [PathBuf; 3],
}

pub fn run(args: &TrainArgs, ctx: &Context) -> CliResult<()> {
    let out_dir = args.out_dir.as_deref().ok_or_else(|| CliError::user("train-toy needs --out-dir"))?;
    if args.shapes == 0 {
        return Err(CliError::user("--shapes must be at least 1"));
    }
    let cfg = args.train_config();
    cfg.validate()?;
    std::fs::create_dir_all(out_dir).map_err(|e| CliError::user(format!("cannot create {}: {e}", out_dir.display())))?;

    let shapes = toy_dataset(args.dataset, args.shapes, args.dataset_seed);
    let log_path = out_dir.join(LOG_FILE);
    let mut log = Vec::new();
    let header = json!({
        "event": "start",
        "arm": cfg.arm,
        "sampling": if cfg.arm.uses_ses() { "ses" } else { "uniform" },
        "dual_cross_attention": cfg.arm.dual(),
        "seed": args.seed,
        "config": cfg,
    });
    writeln!(log, "{header}").expect("in-memory write");

    let started = Instant::now();
    let reproducible = ctx.reproducible;
    let outcome = train_toy(&shapes, &cfg, args.seed, |epoch| {
        let mut line = json!({ "event": "epoch" });
        let fields = serde_json::to_value(epoch).expect("epoch log serializes");
        line.as_object_mut().unwrap().extend(fields.as_object().unwrap().clone());
        if !reproducible {
            line["elapsed_s"] = json!(started.elapsed().as_secs_f64());
        }
        if epoch.fscore.is_some() || epoch.epoch % 10 == 0 {
            log::info!("epoch {} loss {:.5} acc {:.4}", epoch.epoch, epoch.loss, epoch.accuracy);
        }
        writeln!(log, "{line}").expect("in-memory write");
    })?;
    let report: &TrainReport = &outcome.report;
    let end = json!({
        "event": "end",
        "mean_fscore": report.mean_fscore,
        "shape_fscores": report.shape_fscores,
        "heldout_accuracy": report.heldout_accuracy,
    });
    writeln!(log, "{end}").expect("in-memory write");

    let ckpt_path = out_dir.join(CHECKPOINT_FILE);
    let report_path = out_dir.join(REPORT_FILE);
    write_file(&ckpt_path, &to_checkpoint_bytes(&outcome.model))?;
    write_file(&log_path, &log)?;
    let doc = Document::new("train-toy", args, Vec::new(), report, reproducible);
    emit_json(&doc, Some(&report_path))?;

    let summary = TrainSummary {
        arm: cfg.arm,
        sampling: &report.sampling,
        mean_fscore: report.mean_fscore,
        heldout_accuracy: report.heldout_accuracy,
        files: [ckpt_path, log_path, report_path],
    };
    emit_json(&summary, None)
}
