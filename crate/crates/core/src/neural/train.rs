use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::mcubes::{extract_isosurface, extract_isosurface_banded, VertexPlacement};
use super::model::{standard_normal, EncoderConfig, EncoderInput, LatentCode, LossParts, Model};
use super::occupancy::{sample_queries, OccupancyBatch, OccupancyOracle, DEFAULT_NEAR_SIGMA};
use super::params::Adam;
use crate::error::{Error, Result};
use crate::mesh::shapes::{AnalyticShape, BumpGridBox};
use crate::mesh::TriangleMesh;
use crate::metrics::fscore;
use crate::sampler::{sample_uniform, ses_sample, SurfacePointCloud};

/// Default KL weight.
pub const DEFAULT_KL_WEIGHT: f64 = 0.001;

/// Ablation arms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Arm {
    /// Sharp edge sampling with dual cross-attention.
    Full,
    /// Sharp edge sampling, one attention path over the whole cloud.
    NoDca,
    /// Uniform sampling only, one attention path.
    #[serde(alias = "no-ses-no-dca")]
    NoSes,
}

impl Arm {
    pub const ALL: [Arm; 3] = [Arm::Full, Arm::NoDca, Arm::NoSes];

    pub fn dual(self) -> bool {
        self == Arm::Full
    }

    pub fn uses_ses(self) -> bool {
        self != Arm::NoSes
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Arm::Full => "full",
            Arm::NoDca => "no-dca",
            Arm::NoSes => "no-ses",
        }
    }
}

impl fmt::Display for Arm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Arm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Arm::Full),
            "no-dca" => Ok(Arm::NoDca),
            "no-ses" | "no-ses-no-dca" => Ok(Arm::NoSes),
            _ => Err(Error::InvalidArgument(format!("unknown arm '{s}' (full, no-dca, no-ses)"))),
        }
    }
}

/// Named hyperparameter bundles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Profile {
    /// Desk scale: finishes in minutes on one core.
    Toy,
    /// Published layer counts and sampling sizes; structurally valid but far
    /// beyond desk compute.
    Paper,
}

impl FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "toy" => Ok(Profile::Toy),
            "paper" => Ok(Profile::Paper),
            _ => Err(Error::InvalidArgument(format!("unknown profile '{s}' (toy, paper)"))),
        }
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Profile::Toy => "toy",
            Profile::Paper => "paper",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub model: EncoderConfig,
    pub arm: Arm,
    pub epochs: usize,
    pub lr: f64,
    pub kl_weight: f64,
    /// Shapes per optimizer step.
    pub batch_size: usize,
    /// `|P_d|`, points per input cloud.
    pub n_total: usize,
    pub n_desired: usize,
    pub tau_deg: f64,
    /// Latent length `N_s`.
    pub latent_len: usize,
    /// Fresh near-surface and uniform queries per shape and step.
    pub n_near: usize,
    pub n_uniform: usize,
    pub near_sigma: f64,
    /// Evaluate extracted meshes every this many epochs (0: only at the end).
    pub eval_every: usize,
    pub eval_res: usize,
    pub eval_points: usize,
    pub eval_radius: f64,
    pub eval_placement: VertexPlacement,
    /// Coarse-to-fine factor for mesh extraction during evaluation (1: dense).
    pub eval_band: usize,
}

impl TrainConfig {
    pub fn profile(profile: Profile, arm: Arm) -> Self {
        match profile {
            Profile::Toy => Self {
                model: EncoderConfig::default(),
                arm,
                epochs: 300,
                lr: 1e-3,
                kl_weight: DEFAULT_KL_WEIGHT,
                batch_size: 2,
                n_total: 1024,
                n_desired: 512,
                tau_deg: 30.0,
                latent_len: 64,
                n_near: 384,
                n_uniform: 128,
                near_sigma: DEFAULT_NEAR_SIGMA,
                eval_every: 0,
                eval_res: 64,
                eval_points: 100_000,
                eval_radius: 0.01,
                eval_placement: VertexPlacement::Linear,
                eval_band: 4,
            },
            Profile::Paper => Self {
                model: EncoderConfig {
                    width: 768,
                    heads: 12,
                    encoder_layers: 8,
                    decoder_layers: 16,
                    frequencies: 8,
                    include_normals: true,
                    latent_width: 64,
                },
                arm,
                epochs: 1,
                lr: 5e-5,
                kl_weight: DEFAULT_KL_WEIGHT,
                batch_size: 2048,
                n_total: 32_768,
                n_desired: 16_384,
                tau_deg: 30.0,
                latent_len: 1280,
                n_near: 8192,
                n_uniform: 8192,
                near_sigma: DEFAULT_NEAR_SIGMA,
                eval_every: 0,
                eval_res: 256,
                eval_points: 1_000_000,
                eval_radius: 0.01,
                eval_placement: VertexPlacement::Midpoint,
                eval_band: 4,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        let positive = [
            ("epochs", self.epochs),
            ("batch_size", self.batch_size),
            ("n_total", self.n_total),
            ("latent_len", self.latent_len),
            ("eval_points", self.eval_points),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Error::InvalidArgument(format!("{name} must be at least 1")));
        }
        if self.n_near + self.n_uniform == 0 {
            return Err(Error::InvalidArgument("no occupancy queries per step".into()));
        }
        if self.n_desired > self.n_total {
            return Err(Error::InvalidArgument(format!(
                "n_desired ({}) exceeds n_total ({})",
                self.n_desired, self.n_total
            )));
        }
        if self.latent_len > self.n_total {
            return Err(Error::InvalidArgument("latent length exceeds the cloud size".into()));
        }
        if !(self.lr > 0.0 && self.kl_weight >= 0.0) {
            return Err(Error::InvalidArgument("lr must be positive and kl_weight non-negative".into()));
        }
        Ok(())
    }
}

/// Procedural datasets for toy runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ToyDataset {
    Spheres,
    Boxes,
    BumpGrid,
}

impl FromStr for ToyDataset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "spheres" => Ok(Self::Spheres),
            "boxes" => Ok(Self::Boxes),
            "bump-grid" => Ok(Self::BumpGrid),
            _ => Err(Error::InvalidArgument(format!("unknown dataset '{s}' (spheres, boxes, bump-grid)"))),
        }
    }
}

/// `count` shapes inside `[-1, 1]³`, reproducible from `seed`.
pub fn toy_dataset(kind: ToyDataset, count: usize, seed: u64) -> Vec<AnalyticShape> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| match kind {
            ToyDataset::Spheres => AnalyticShape::Sphere {
                center: crate::geom::Vec3::new(
                    rng.random_range(-0.1..0.1),
                    rng.random_range(-0.1..0.1),
                    rng.random_range(-0.1..0.1),
                ),
                radius: rng.random_range(0.45..0.7),
            },
            ToyDataset::Boxes => AnalyticShape::Box {
                center: crate::geom::Vec3::zeros(),
                half_extents: crate::geom::Vec3::new(
                    rng.random_range(0.3..0.8),
                    rng.random_range(0.3..0.8),
                    rng.random_range(0.3..0.8),
                ),
            },
            ToyDataset::BumpGrid => AnalyticShape::BumpGridBox(BumpGridBox::random(&mut rng, 3)),
        })
        .collect()
}

/// Per-epoch training record, one JSON line each.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub loss: f64,
    pub mse: f64,
    pub kl: f64,
    pub accuracy: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fscore: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub arm: Arm,
    /// "ses" or "uniform".
    pub sampling: String,
    pub seed: u64,
    pub config: TrainConfig,
    pub param_count: usize,
    pub salient_block_size: usize,
    pub epochs: Vec<EpochLog>,
    /// F-score of each shape's extracted mesh at `eval_radius`.
    pub shape_fscores: Vec<f64>,
    pub mean_fscore: f64,
    /// Accuracy on queries not seen during training.
    pub heldout_accuracy: f64,
}

pub struct TrainOutcome {
    pub model: Model,
    pub report: TrainReport,
}

/// Everything precomputed for one training shape.
pub struct PreparedShape {
    pub mesh: TriangleMesh,
    pub oracle: OccupancyOracle,
    pub cloud: SurfacePointCloud,
    pub input: EncoderInput,
}

fn shape_seed(seed: u64, index: usize, salt: u64) -> u64 {
    seed.wrapping_mul(0x9e37_79b9_7f4a_7c15)
        .wrapping_add((index as u64 + 1).wrapping_mul(0xbf58_476d_1ce4_e5b9))
        .wrapping_add(salt)
}

/// Input cloud of `mesh` for `arm`: SES or purely uniform, same size.
pub fn arm_cloud(mesh: &TriangleMesh, cfg: &TrainConfig, seed: u64) -> Result<SurfacePointCloud> {
    if cfg.arm.uses_ses() {
        ses_sample(mesh, cfg.n_total, cfg.n_desired, cfg.tau_deg, seed)
    } else {
        sample_uniform(mesh, cfg.n_total, seed, false)
    }
}

pub fn prepare_shape(model: &Model, shape: &AnalyticShape, cfg: &TrainConfig, seed: u64, index: usize) -> Result<PreparedShape> {
    let mesh = shape.mesh();
    let oracle = OccupancyOracle::Analytic(shape.clone());
    // The cloud and query pool depend on the shape, not on the arm, except
    // for the sampling strategy itself.
    let cloud = arm_cloud(&mesh, cfg, shape_seed(seed, index, 1))?;
    let input = model.prepare_input(&cloud, cfg.latent_len, shape_seed(seed, index, 2))?;
    Ok(PreparedShape {
        mesh,
        oracle,
        cloud,
        input,
    })
}

/// Mesh of the 0.5 level set of the decoded field.
pub fn extract_mesh(model: &Model, code: &LatentCode, grid_res: usize) -> Result<TriangleMesh> {
    extract_mesh_with(model, code, grid_res, VertexPlacement::Midpoint)
}

pub fn extract_mesh_with(model: &Model, code: &LatentCode, grid_res: usize, placement: VertexPlacement) -> Result<TriangleMesh> {
    extract_isosurface(|q| model.decode_occupancy(&code.z, q), grid_res, placement)
}

/// F-score between the extracted surface and `gt`; an empty extraction scores 0.
pub fn reconstruction_fscore(model: &Model, code: &LatentCode, gt: &TriangleMesh, cfg: &TrainConfig, seed: u64) -> Result<f64> {
    let field = |q: &[crate::geom::Vec3]| model.decode_occupancy(&code.z, q);
    let pred = match extract_isosurface_banded(field, cfg.eval_res, cfg.eval_band, cfg.eval_placement) {
        Ok(m) => m,
        Err(Error::EmptySurface) => return Ok(0.0),
        Err(e) => return Err(e),
    };
    let a = sample_uniform(&pred, cfg.eval_points, seed, false)?;
    let b = sample_uniform(gt, cfg.eval_points, seed, false)?;
    fscore(&a.positions, &b.positions, cfg.eval_radius)
}

fn mean(xs: impl IntoIterator<Item = f64>) -> f64 {
    let (s, n) = xs.into_iter().fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

fn evaluate(model: &Model, shapes: &[PreparedShape], cfg: &TrainConfig, seed: u64) -> Result<Vec<f64>> {
    shapes
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let code = model.encode_input(&s.input, None)?;
            reconstruction_fscore(model, &code, &s.mesh, cfg, shape_seed(seed, i, 4))
        })
        .collect()
}

/// Fraction of correctly classified queries with `z = mean`.
pub fn occupancy_accuracy(model: &Model, input: &EncoderInput, batch: &OccupancyBatch) -> Result<f64> {
    let code = model.encode_input(input, None)?;
    let pred = model.decode_occupancy(&code.z, &batch.queries);
    let correct = pred.iter().zip(&batch.labels).filter(|(p, l)| (**p > 0.5) == (**l > 0.5)).count();
    Ok(correct as f64 / batch.len().max(1) as f64)
}

/// Fixed-seed mini-batch training on analytic shapes.
///
/// `on_epoch` receives every epoch record as it is produced.
pub fn train_toy(shapes: &[AnalyticShape], cfg: &TrainConfig, seed: u64, mut on_epoch: impl FnMut(&EpochLog)) -> Result<TrainOutcome> {
    cfg.validate()?;
    if shapes.is_empty() {
        return Err(Error::InvalidArgument("training needs at least one shape".into()));
    }
    let mut model = Model::new(cfg.model, cfg.arm.dual(), seed)?;
    let prepared = shapes
        .iter()
        .enumerate()
        .map(|(i, s)| prepare_shape(&model, s, cfg, seed, i))
        .collect::<Result<Vec<_>>>()?;

    let mut opt = Adam::new(&model.params, cfg.lr);
    let mut rng = ChaCha8Rng::seed_from_u64(shape_seed(seed, usize::MAX - 1, 5));
    let mut order: Vec<usize> = (0..prepared.len()).collect();
    let mut logs = Vec::with_capacity(cfg.epochs);
    let mut step = 0usize;
    let mut last_eval = None;

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut parts_sum = LossParts {
            total: 0.0,
            mse: 0.0,
            kl: 0.0,
            accuracy: 0.0,
        };
        for batch in order.chunks(cfg.batch_size) {
            let mut grads = model.params.zeros_like();
            for &i in batch {
                let s = &prepared[i];
                let qb = sample_queries(&s.mesh, &s.oracle, cfg.n_near, cfg.n_uniform, cfg.near_sigma, rng.random())?;
                let noise: Array2<f64> = standard_normal((cfg.latent_len, cfg.model.latent_width), rng.random());
                let (parts, g) = model.loss_and_grads(&s.input, &qb.queries, &qb.labels, cfg.kl_weight, Some(&noise));
                if !parts.total.is_finite() {
                    return Err(Error::Diverged {
                        step,
                        loss: parts.total,
                    });
                }
                let k = 1.0 / batch.len() as f64;
                for (acc, g) in grads.iter_mut().zip(g) {
                    acc.scaled_add(k, &g);
                }
                parts_sum.total += parts.total;
                parts_sum.mse += parts.mse;
                parts_sum.kl += parts.kl;
                parts_sum.accuracy += parts.accuracy;
            }
            opt.step(&mut model.params, &grads);
            if !model.params.all_finite() {
                return Err(Error::Diverged {
                    step,
                    loss: f64::NAN,
                });
            }
            step += 1;
        }
        let n = prepared.len() as f64;
        let last = epoch + 1 == cfg.epochs;
        let fscore = if last || (cfg.eval_every > 0 && (epoch + 1) % cfg.eval_every == 0) {
            let scores = evaluate(&model, &prepared, cfg, seed)?;
            let m = mean(scores.iter().copied());
            last_eval = Some(scores);
            Some(m)
        } else {
            None
        };
        let log = EpochLog {
            epoch: epoch + 1,
            loss: parts_sum.total / n,
            mse: parts_sum.mse / n,
            kl: parts_sum.kl / n,
            accuracy: parts_sum.accuracy / n,
            fscore,
        };
        on_epoch(&log);
        logs.push(log);
    }

    let heldout = prepared
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let batch = sample_queries(&s.mesh, &s.oracle, 4 * cfg.n_near, 4 * cfg.n_uniform, cfg.near_sigma, shape_seed(seed, i, 6))?;
            occupancy_accuracy(&model, &s.input, &batch)
        })
        .collect::<Result<Vec<_>>>()?;
    let shape_fscores = last_eval.unwrap_or_default();
    let report = TrainReport {
        arm: cfg.arm,
        sampling: if cfg.arm.uses_ses() { "ses" } else { "uniform" }.to_string(),
        seed,
        config: *cfg,
        param_count: model.params.scalar_count(),
        salient_block_size: model.salient_block_size(),
        mean_fscore: mean(shape_fscores.iter().copied()),
        shape_fscores,
        epochs: logs,
        heldout_accuracy: mean(heldout),
    };
    Ok(TrainOutcome { model, report })
}
