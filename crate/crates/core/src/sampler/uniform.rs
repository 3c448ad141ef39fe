use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{eliminate_samples, PointLabel, SurfacePointCloud};
use crate::error::{Error, Result};
use crate::mesh::TriangleMesh;

/// Oversampling factor used before blue-noise elimination.
pub const BLUE_NOISE_OVERSAMPLE: usize = 4;

/// Area-weighted random surface samples.
///
/// Faces are picked proportionally to area (degenerate faces never), points
/// are placed with uniform barycentric coordinates and carry the face
/// normal. With `blue_noise`, `4n` candidates are drawn and thinned to `n`
/// by greedy sample elimination.
pub fn sample_uniform(mesh: &TriangleMesh, n: usize, seed: u64, blue_noise: bool) -> Result<SurfacePointCloud> {
    if n == 0 {
        return Err(Error::InvalidArgument("sample count must be at least 1".into()));
    }
    if !blue_noise {
        return draw(mesh, n, seed);
    }
    let candidates = draw(mesh, n * BLUE_NOISE_OVERSAMPLE, seed)?;
    let keep = eliminate_samples(&candidates.positions, n);
    Ok(candidates.subset(&keep))
}

fn draw(mesh: &TriangleMesh, n: usize, seed: u64) -> Result<SurfacePointCloud> {
    let normals = mesh.face_normals();
    let mut cdf = Vec::with_capacity(mesh.face_count());
    let mut total = 0.0;
    for (f, normal) in normals.iter().enumerate() {
        if normal.is_some() {
            total += mesh.face_area(f);
        }
        cdf.push(total);
    }
    if !(total > 0.0) {
        return Err(Error::ZeroArea);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cloud = SurfacePointCloud::empty(seed);
    cloud.positions.reserve(n);
    cloud.normals.reserve(n);
    cloud.labels.reserve(n);
    for _ in 0..n {
        let r = rng.random::<f64>() * total;
        let mut f = cdf.partition_point(|&c| c <= r).min(cdf.len() - 1);
        // Zero-weight faces share the cdf value of their predecessor; skip past them.
        while normals[f].is_none() {
            f += 1;
        }
        let [a, b, c] = mesh.corners(f);
        let s = rng.random::<f64>().sqrt();
        let v = rng.random::<f64>();
        let p = a * (1.0 - s) + b * (s * (1.0 - v)) + c * (s * v);
        cloud.push(p, normals[f].unwrap(), PointLabel::Uniform);
    }
    Ok(cloud)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::point_triangle_distance;
    use crate::mesh::shapes;
    use crate::Vec3;

    fn surface_distance(mesh: &TriangleMesh, p: &Vec3) -> f64 {
        (0..mesh.face_count())
            .map(|f| {
                let [a, b, c] = mesh.corners(f);
                point_triangle_distance(p, &a, &b, &c)
            })
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn face_counts_follow_area() {
        // Chi-square over the 12 cube triangles (equal areas, expected 1000/12 each).
        let mesh = shapes::cube();
        let cloud = sample_uniform(&mesh, 1000, 11, false).unwrap();
        let mut counts = [0usize; 12];
        for p in &cloud.positions {
            let f = (0..12)
                .min_by(|&i, &j| {
                    let [a, b, c] = mesh.corners(i);
                    let [d, e, g] = mesh.corners(j);
                    point_triangle_distance(p, &a, &b, &c).total_cmp(&point_triangle_distance(p, &d, &e, &g))
                })
                .unwrap();
            counts[f] += 1;
        }
        let expected = 1000.0 / 12.0;
        let sigma = (1000.0f64 * (1.0 / 12.0) * (11.0 / 12.0)).sqrt();
        for c in counts {
            assert!((c as f64 - expected).abs() < 5.0 * sigma, "{counts:?}");
        }
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        // 11 dof, p = 0.001 critical value
        assert!(chi2 < 31.26, "chi2 = {chi2}");
    }

    #[test]
    fn area_proportional_on_unequal_box() {
        let mesh = shapes::axis_box(Vec3::new(4.0, 1.0, 1.0));
        let cloud = sample_uniform(&mesh, 20000, 5, false).unwrap();
        // The two 1x1 end caps hold 2 / 18 of the area.
        let caps = cloud.positions.iter().filter(|p| (p.x.abs() - 2.0).abs() < 1e-12).count();
        let p: f64 = 2.0 / 18.0;
        let sigma = (20000.0 * p * (1.0 - p)).sqrt();
        assert!((caps as f64 - 20000.0 * p).abs() < 5.0 * sigma);
    }

    #[test]
    fn samples_lie_on_surface_with_unit_normals() {
        let mesh = shapes::icosphere(1);
        let cloud = sample_uniform(&mesh, 300, 2, false).unwrap();
        for (p, n) in cloud.positions.iter().zip(&cloud.normals) {
            assert!(surface_distance(&mesh, p) < 1e-9);
            assert!((n.norm() - 1.0).abs() < 1e-6);
        }
        let one = sample_uniform(&mesh, 1, 99, false).unwrap();
        assert_eq!(one.len(), 1);
        assert!(surface_distance(&mesh, &one.positions[0]) < 1e-9);
    }

    #[test]
    fn deterministic_for_seed() {
        let mesh = shapes::cube();
        for blue in [false, true] {
            let a = sample_uniform(&mesh, 500, 7, blue).unwrap();
            let b = sample_uniform(&mesh, 500, 7, blue).unwrap();
            assert_eq!(a, b);
            assert_eq!(a.len(), 500);
            assert_eq!(a.count(PointLabel::Uniform), 500);
        }
        assert_ne!(
            sample_uniform(&mesh, 50, 1, false).unwrap(),
            sample_uniform(&mesh, 50, 2, false).unwrap()
        );
    }

    #[test]
    fn degenerate_inputs() {
        let flat = TriangleMesh::new(
            vec![Vec3::zeros(), Vec3::x(), Vec3::x() * 2.0],
            vec![[0, 1, 2]],
        )
        .unwrap();
        assert!(matches!(sample_uniform(&flat, 10, 0, false), Err(Error::ZeroArea)));
        assert!(matches!(sample_uniform(&shapes::cube(), 0, 0, false), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn blue_noise_spreads_points() {
        let mesh = shapes::plane_grid(2);
        let min_gap = |c: &SurfacePointCloud| {
            let tree = crate::spatial::KdTree::new(&c.positions);
            c.positions
                .iter()
                .map(|p| tree.k_nearest(p, 2)[1].1.sqrt())
                .fold(f64::INFINITY, f64::min)
        };
        let white = sample_uniform(&mesh, 400, 4, false).unwrap();
        let blue = sample_uniform(&mesh, 400, 4, true).unwrap();
        assert!(min_gap(&blue) > 2.0 * min_gap(&white));
    }
}
