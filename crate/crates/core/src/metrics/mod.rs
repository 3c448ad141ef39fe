//! Reconstruction metrics: F-score, Chamfer distance and Sharp Normal Error.

pub mod camera;
pub mod canny;
pub mod image;
mod pointset;
pub mod raster;
pub mod sne;

pub use camera::{default_views, CameraView, DEFAULT_VIEW_COUNT};
pub use canny::canny;
pub use image::{dilate, EdgeMask, GrayImage, NormalMapImage};
pub use pointset::{
    chamfer, chamfer_from_distances, chamfer_with_mode, fscore, fscore_detailed, fscore_from_distances,
    nearest_distances, ChamferMode, FScore,
};
pub use raster::render_normal_map;
pub use sne::{sne, sne_with_views, SneConfig, SneSummary};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::mesh::TriangleMesh;
use crate::sampler::sample_uniform;
use crate::spatial::KdTree;

/// Default number of surface points per mesh for F-score and Chamfer.
pub const DEFAULT_EVAL_POINTS: usize = 1_000_000;
pub const DEFAULT_FSCORE_RADII: [f64; 2] = [0.01, 0.005];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub fscore_radii: Vec<f64>,
    pub eval_points: usize,
    pub chamfer_mode: ChamferMode,
    pub sne: SneConfig,
    /// Skip SNE (used by training-time evaluation, where only F-score is needed).
    pub skip_sne: bool,
    pub seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            fscore_radii: DEFAULT_FSCORE_RADII.to_vec(),
            eval_points: DEFAULT_EVAL_POINTS,
            chamfer_mode: ChamferMode::Symmetric,
            sne: SneConfig::default(),
            skip_sne: false,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadiusScore {
    pub radius: f64,
    pub precision: f64,
    pub recall: f64,
    pub fscore: f64,
}

/// Raw (unscaled) metrics for one gt/pred pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshMetrics {
    pub fscores: Vec<RadiusScore>,
    pub chamfer: f64,
    pub sne: Option<SneSummary>,
}

impl MeshMetrics {
    pub fn fscore_at(&self, r: f64) -> Option<f64> {
        self.fscores.iter().find(|s| s.radius == r).map(|s| s.fscore)
    }
}

/// Samples both surfaces with the same seed and computes every metric.
pub fn evaluate_meshes(gt: &TriangleMesh, pred: &TriangleMesh, config: &EvalConfig) -> Result<MeshMetrics> {
    let (gt_pts, pred_pts) = rayon::join(
        || sample_uniform(gt, config.eval_points, config.seed, false),
        || sample_uniform(pred, config.eval_points, config.seed, false),
    );
    let (gt_pts, pred_pts) = (gt_pts?.positions, pred_pts?.positions);
    let (gt_tree, pred_tree) = rayon::join(|| KdTree::new(&gt_pts), || KdTree::new(&pred_pts));
    let pred_to_gt: Vec<f64> = pred_pts
        .par_iter()
        .map(|p| gt_tree.nearest(p).map(|(_, d)| d.sqrt()).unwrap())
        .collect();
    let gt_to_pred: Vec<f64> = gt_pts
        .par_iter()
        .map(|p| pred_tree.nearest(p).map(|(_, d)| d.sqrt()).unwrap())
        .collect();
    let fscores = config
        .fscore_radii
        .iter()
        .map(|&radius| {
            let f = fscore_from_distances(&pred_to_gt, &gt_to_pred, radius);
            RadiusScore {
                radius,
                precision: f.precision,
                recall: f.recall,
                fscore: f.fscore,
            }
        })
        .collect();
    let chamfer = chamfer_from_distances(&pred_to_gt, &gt_to_pred, config.chamfer_mode);
    let sne = if config.skip_sne {
        None
    } else {
        Some(sne::sne(gt, pred, &config.sne)?)
    };
    Ok(MeshMetrics { fscores, chamfer, sne })
}
