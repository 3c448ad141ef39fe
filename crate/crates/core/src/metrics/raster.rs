//! Orthographic z-buffer rasterization of flat-shaded normal maps.

use super::camera::CameraView;
use super::image::NormalMapImage;
use crate::mesh::TriangleMesh;

/// Renders camera-space face normals of `mesh` at `res x res`.
///
/// The frame covers `[-1, 1]²`; pixel `(x, y)` samples its center, row 0 at
/// the top. The nearest surface along the view direction wins; on exact
/// depth ties the lower face index is kept.
pub fn render_normal_map(mesh: &TriangleMesh, view: &CameraView, res: usize) -> NormalMapImage {
    let mut img = NormalMapImage::background(res, res);
    let mut depth = vec![f64::NEG_INFINITY; res * res];
    let scale = res as f64 / 2.0;
    let to_screen = |x: f64, y: f64| ((x + 1.0) * scale, (1.0 - y) * scale);
    let verts: Vec<_> = mesh.vertices().iter().map(|v| view.to_camera(v)).collect();

    for (f, tri) in mesh.faces().iter().enumerate() {
        let Ok(normal) = mesh.face_normal(f) else { continue };
        let n = view.to_camera(&normal);
        let encoded = [(n.x + 1.0) / 2.0, (n.y + 1.0) / 2.0, (n.z + 1.0) / 2.0];
        let c = tri.map(|i| verts[i as usize]);
        let s = c.map(|v| to_screen(v.x, v.y));
        let edge = |a: (f64, f64), b: (f64, f64), p: (f64, f64)| (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0);
        let area = edge(s[0], s[1], s[2]);
        if area.abs() < 1e-12 {
            continue;
        }
        let min_x = s.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
        let max_x = s.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
        let min_y = s.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
        let max_y = s.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
        let x0 = (min_x - 0.5).ceil().max(0.0) as usize;
        let y0 = (min_y - 0.5).ceil().max(0.0) as usize;
        let x1 = ((max_x - 0.5).floor().min(res as f64 - 1.0)).max(-1.0);
        let y1 = ((max_y - 0.5).floor().min(res as f64 - 1.0)).max(-1.0);
        if x1 < 0.0 || y1 < 0.0 {
            continue;
        }
        let (x1, y1) = (x1 as usize, y1 as usize);
        for py in y0..=y1 {
            for px in x0..=x1 {
                let p = (px as f64 + 0.5, py as f64 + 0.5);
                let w0 = edge(s[1], s[2], p) / area;
                let w1 = edge(s[2], s[0], p) / area;
                let w2 = edge(s[0], s[1], p) / area;
                if w0 < 0.0 || w1 < 0.0 || w2 < 0.0 {
                    continue;
                }
                let z = w0 * c[0].z + w1 * c[1].z + w2 * c[2].z;
                let k = py * res + px;
                if z > depth[k] {
                    depth[k] = z;
                    img.pixels[k] = encoded;
                    img.coverage[k] = true;
                }
            }
        }
    }
    img
}
