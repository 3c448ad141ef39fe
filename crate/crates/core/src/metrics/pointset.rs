use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Vec3;
use crate::spatial::KdTree;

/// Distances from each of `from` to its nearest neighbour in `to`.
pub fn nearest_distances(from: &[Vec3], to: &KdTree) -> Vec<f64> {
    from.iter()
        .map(|p| to.nearest(p).map(|(_, d2)| d2.sqrt()).unwrap_or(f64::INFINITY))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FScore {
    pub precision: f64,
    pub recall: f64,
    pub fscore: f64,
}

/// Precision/recall of nearest-neighbour correspondences closer than `r`.
pub fn fscore_detailed(pred: &[Vec3], gt: &[Vec3], r: f64) -> Result<FScore> {
    if pred.is_empty() || gt.is_empty() {
        return Err(Error::EmptyPointSet);
    }
    if !(r > 0.0) {
        return Err(Error::InvalidArgument(format!("F-score radius must be positive, got {r}")));
    }
    let (pred_tree, gt_tree) = (KdTree::new(pred), KdTree::new(gt));
    Ok(fscore_from_distances(
        &nearest_distances(pred, &gt_tree),
        &nearest_distances(gt, &pred_tree),
        r,
    ))
}

/// F-score from precomputed pred-to-gt and gt-to-pred distances.
pub fn fscore_from_distances(pred_to_gt: &[f64], gt_to_pred: &[f64], r: f64) -> FScore {
    let frac = |d: &[f64]| d.iter().filter(|&&x| x < r).count() as f64 / d.len() as f64;
    let precision = frac(pred_to_gt);
    let recall = frac(gt_to_pred);
    let fscore = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    FScore {
        precision,
        recall,
        fscore,
    }
}

pub fn fscore(pred: &[Vec3], gt: &[Vec3], r: f64) -> Result<f64> {
    fscore_detailed(pred, gt, r).map(|f| f.fscore)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChamferMode {
    /// `½ mean(pred→gt) + ½ mean(gt→pred)`.
    #[default]
    Symmetric,
    /// `mean(pred→gt)` only.
    PredToGt,
}

impl std::str::FromStr for ChamferMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "symmetric" => Ok(ChamferMode::Symmetric),
            "pred-to-gt" => Ok(ChamferMode::PredToGt),
            other => Err(Error::InvalidArgument(format!("unknown chamfer mode {other:?}"))),
        }
    }
}

pub fn chamfer_from_distances(pred_to_gt: &[f64], gt_to_pred: &[f64], mode: ChamferMode) -> f64 {
    let mean = |d: &[f64]| d.iter().sum::<f64>() / d.len() as f64;
    match mode {
        ChamferMode::Symmetric => 0.5 * mean(pred_to_gt) + 0.5 * mean(gt_to_pred),
        ChamferMode::PredToGt => mean(pred_to_gt),
    }
}

/// Mean first-power nearest-neighbour distance, symmetric by default.
pub fn chamfer_with_mode(pred: &[Vec3], gt: &[Vec3], mode: ChamferMode) -> Result<f64> {
    if pred.is_empty() || gt.is_empty() {
        return Err(Error::EmptyPointSet);
    }
    let (pred_tree, gt_tree) = (KdTree::new(pred), KdTree::new(gt));
    Ok(chamfer_from_distances(
        &nearest_distances(pred, &gt_tree),
        &nearest_distances(gt, &pred_tree),
        mode,
    ))
}

pub fn chamfer(pred: &[Vec3], gt: &[Vec3]) -> Result<f64> {
    chamfer_with_mode(pred, gt, ChamferMode::Symmetric)
}
