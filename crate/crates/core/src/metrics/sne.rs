//! Sharp Normal Error: masked normal-map MSE around ground-truth creases.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::camera::{default_views, CameraView, DEFAULT_VIEW_COUNT};
use super::canny::{canny, DEFAULT_HIGH, DEFAULT_LOW};
use super::image::{dilate, EdgeMask, NormalMapImage};
use super::raster::render_normal_map;
use crate::error::{Error, Result};
use crate::mesh::TriangleMesh;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SneConfig {
    pub views: usize,
    pub resolution: usize,
    pub canny_low: f64,
    pub canny_high: f64,
    pub dilate_radius: usize,
    pub dilate_iterations: usize,
}

impl Default for SneConfig {
    fn default() -> Self {
        Self {
            views: DEFAULT_VIEW_COUNT,
            resolution: 512,
            canny_low: DEFAULT_LOW,
            canny_high: DEFAULT_HIGH,
            dilate_radius: 2,
            dilate_iterations: 1,
        }
    }
}

/// Everything produced for one viewpoint.
#[derive(Debug, Clone)]
pub struct SneView {
    pub gt: NormalMapImage,
    pub pred: NormalMapImage,
    pub mask: EdgeMask,
    /// `None` when the mask is empty and the view is skipped.
    pub mse: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SneSummary {
    pub sne: f64,
    pub views_used: usize,
    pub views_total: usize,
}

/// Mean over masked pixels of the channel-averaged squared difference.
pub fn masked_mse(gt: &NormalMapImage, pred: &NormalMapImage, mask: &EdgeMask) -> Option<f64> {
    let mut sum = 0.0;
    let mut n = 0usize;
    for (k, &m) in mask.data.iter().enumerate() {
        if m == 0 {
            continue;
        }
        let (a, b) = (gt.pixels[k], pred.pixels[k]);
        sum += ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)) / 3.0;
        n += 1;
    }
    (n > 0).then(|| sum / n as f64)
}

pub fn sne_view(gt_mesh: &TriangleMesh, pred_mesh: &TriangleMesh, view: &CameraView, config: &SneConfig) -> SneView {
    let gt = render_normal_map(gt_mesh, view, config.resolution);
    let pred = render_normal_map(pred_mesh, view, config.resolution);
    let edges = canny(&gt.to_gray(), config.canny_low, config.canny_high);
    let mask = dilate(&edges, config.dilate_radius, config.dilate_iterations);
    let mse = masked_mse(&gt, &pred, &mask);
    SneView { gt, pred, mask, mse }
}

pub fn sne_views(gt_mesh: &TriangleMesh, pred_mesh: &TriangleMesh, views: &[CameraView], config: &SneConfig) -> Vec<SneView> {
    views
        .par_iter()
        .map(|v| sne_view(gt_mesh, pred_mesh, v, config))
        .collect()
}

/// SNE over explicit views; views whose mask is empty are skipped.
pub fn sne_with_views(
    gt_mesh: &TriangleMesh,
    pred_mesh: &TriangleMesh,
    views: &[CameraView],
    config: &SneConfig,
) -> Result<SneSummary> {
    let per_view: Vec<Option<f64>> = views
        .par_iter()
        .map(|v| sne_view(gt_mesh, pred_mesh, v, config).mse)
        .collect();
    let used: Vec<f64> = per_view.into_iter().flatten().collect();
    if used.is_empty() {
        return Err(Error::EmptyMasks);
    }
    Ok(SneSummary {
        sne: used.iter().sum::<f64>() / used.len() as f64,
        views_used: used.len(),
        views_total: views.len(),
    })
}

/// SNE with the default Fibonacci views from `config`.
pub fn sne(gt_mesh: &TriangleMesh, pred_mesh: &TriangleMesh, config: &SneConfig) -> Result<SneSummary> {
    if config.resolution < 16 {
        return Err(Error::InvalidArgument("render resolution must be at least 16".into()));
    }
    sne_with_views(gt_mesh, pred_mesh, &default_views(config.views), config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::shapes;
    use crate::Vec3;
    use nalgebra::Rotation3;

    fn cfg() -> SneConfig {
        SneConfig {
            views: 6,
            resolution: 128,
            ..Default::default()
        }
    }

    #[test]
    fn identical_meshes_score_zero() {
        let m = shapes::cube().normalize_to_unit_cube().unwrap();
        let s = sne(&m, &m, &cfg()).unwrap();
        assert_eq!(s.sne, 0.0);
        assert!(s.views_used > 0);
    }

    #[test]
    fn small_rotation_is_between_identity_and_sphere() {
        let cube = shapes::cube().normalize_to_unit_cube().unwrap();
        let rot = Rotation3::from_axis_angle(&Vec3::y_axis(), 0.5f64.to_radians());
        let rotated = cube.map_vertices(|v| rot * v).normalize_to_unit_cube().unwrap();
        let sphere = shapes::sphere().normalize_to_unit_cube().unwrap();
        let small = sne(&cube, &rotated, &cfg()).unwrap().sne;
        let large = sne(&cube, &sphere, &cfg()).unwrap().sne;
        assert!(small > 0.0, "{small}");
        assert!(small < large, "{small} vs {large}");
    }

    #[test]
    fn featureless_views_are_an_error() {
        // A tiny triangle covers no pixel center, so no view has an edge.
        let m = TriangleMesh::new(
            vec![Vec3::zeros(), Vec3::new(1e-4, 0.0, 0.0), Vec3::new(0.0, 1e-4, 0.0)],
            vec![[0, 1, 2]],
        )
        .unwrap();
        assert!(matches!(sne(&m, &m, &cfg()), Err(Error::EmptyMasks)));
    }

    #[test]
    fn masked_mse_counts_background() {
        let gt = NormalMapImage::background(2, 1);
        let mut pred = gt.clone();
        pred.pixels[1] = [0.5, 0.5, 1.0];
        let mut mask = EdgeMask::empty(2, 1);
        mask.set(1, 0);
        assert_eq!(masked_mse(&gt, &pred, &mask), Some(0.25 / 3.0));
        assert_eq!(masked_mse(&gt, &pred, &EdgeMask::empty(2, 1)), None);
    }
}
