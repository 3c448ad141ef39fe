use serde::{Deserialize, Serialize};

use crate::geom::Vec3;

/// Number of evaluation viewpoints used by default.
pub const DEFAULT_VIEW_COUNT: usize = 22;

/// Orthographic camera looking at the origin.
///
/// `direction` points from the origin towards the camera; `right`, `up` and
/// `direction` form a right-handed frame. The image plane covers `[-1, 1]²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraView {
    pub direction: Vec3,
    pub up: Vec3,
    pub right: Vec3,
}

impl CameraView {
    pub fn looking_from(direction: Vec3) -> Self {
        let back = direction.normalize();
        let world_up = if back.y.abs() > 0.999 { Vec3::z() } else { Vec3::y() };
        let right = world_up.cross(&back).normalize();
        let up = back.cross(&right);
        Self {
            direction: back,
            up,
            right,
        }
    }

    /// World to camera coordinates `(right, up, towards camera)`.
    #[inline]
    pub fn to_camera(&self, v: &Vec3) -> Vec3 {
        Vec3::new(v.dot(&self.right), v.dot(&self.up), v.dot(&self.direction))
    }
}

/// `n` camera directions on a spherical Fibonacci lattice.
///
/// Direction `i` has height `y = 1 - (2i + 1) / n` and azimuth `i * g`,
/// with `g = π (3 - √5)` the golden angle.
pub fn default_views(n: usize) -> Vec<CameraView> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let y = 1.0 - (2 * i + 1) as f64 / n as f64;
            let r = (1.0 - y * y).max(0.0).sqrt();
            let phi = i as f64 * golden;
            CameraView::looking_from(Vec3::new(r * phi.cos(), y, r * phi.sin()))
        })
        .collect()
}
