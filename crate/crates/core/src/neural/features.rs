use std::f64::consts::PI;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::geom::Vec3;
use crate::sampler::{fps, PointLabel, SurfacePointCloud};

/// Width of [`fourier_embed`] for `frequencies` octaves.
pub fn fourier_width(frequencies: usize) -> usize {
    3 + 6 * frequencies
}

/// `p` followed by `sin(2^k π p)` and `cos(2^k π p)` for `k = 0..frequencies`.
///
/// Each octave contributes the three sines, then the three cosines.
pub fn fourier_embed(p: &Vec3, frequencies: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(fourier_width(frequencies));
    out.extend_from_slice(p.as_slice());
    let mut f = PI;
    for _ in 0..frequencies {
        out.extend(p.iter().map(|c| (f * c).sin()));
        out.extend(p.iter().map(|c| (f * c).cos()));
        f *= 2.0;
    }
    out
}

pub(crate) fn embed_positions(points: &[Vec3], frequencies: usize) -> Array2<f64> {
    let w = fourier_width(frequencies);
    let mut out = Array2::zeros((points.len(), w));
    for (mut row, p) in out.rows_mut().into_iter().zip(points) {
        for (dst, v) in row.iter_mut().zip(fourier_embed(p, frequencies)) {
            *dst = v;
        }
    }
    out
}

/// Encoder input rows: Fourier features, optionally followed by the normal.
pub(crate) fn point_features(cloud: &SurfacePointCloud, frequencies: usize, include_normals: bool) -> Array2<f64> {
    let pos = embed_positions(&cloud.positions, frequencies);
    if !include_normals {
        return pos;
    }
    let w = pos.ncols();
    let mut out = Array2::zeros((cloud.len(), w + 3));
    out.slice_mut(ndarray::s![.., ..w]).assign(&pos);
    for (i, n) in cloud.normals.iter().enumerate() {
        for k in 0..3 {
            out[[i, w + k]] = n[k];
        }
    }
    out
}

/// Indices of `cloud` in lexicographic (position, normal) order, so that
/// selections made on the sorted view do not depend on input row order.
fn canonical_order(cloud: &SurfacePointCloud) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..cloud.len()).collect();
    idx.sort_by(|&a, &b| {
        let ka = cloud.positions[a].iter().chain(cloud.normals[a].iter());
        let kb = cloud.positions[b].iter().chain(cloud.normals[b].iter());
        ka.zip(kb)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    idx
}

fn fps_subset(cloud: &SurfacePointCloud, k: usize, seed: u64) -> Result<SurfacePointCloud> {
    if k == 0 {
        return Ok(SurfacePointCloud::empty(seed));
    }
    let order = canonical_order(cloud);
    let sorted = cloud.subset(&order);
    let picked = fps(&sorted.positions, k, seed)?;
    Ok(sorted.subset(&picked))
}

/// Query set `P_s = FPS(P_u, n_s1) ∪ FPS(P_a, n_s2)`.
///
/// `n_s2` is clamped to `|P_a|` and the shortfall is moved to the uniform
/// side, so the result always has `n_s1 + n_s2` rows. Labels are kept:
/// uniform picks first, then salient picks.
pub fn build_ps(p_u: &SurfacePointCloud, p_a: &SurfacePointCloud, n_s1: usize, n_s2: usize, seed: u64) -> Result<SurfacePointCloud> {
    if n_s1 + n_s2 > p_u.len() + p_a.len() {
        return Err(Error::InvalidArgument(format!(
            "requested {} query points from {} available",
            n_s1 + n_s2,
            p_u.len() + p_a.len()
        )));
    }
    let take_a = n_s2.min(p_a.len());
    let take_u = n_s1 + (n_s2 - take_a);
    if take_u > p_u.len() {
        return Err(Error::InvalidArgument(format!(
            "requested {take_u} uniform query points from {}",
            p_u.len()
        )));
    }
    let mut out = fps_subset(p_u, take_u, seed)?;
    out.extend(&fps_subset(p_a, take_a, seed)?);
    out.seed = seed;
    Ok(out)
}

/// Split a sampled cloud into its uniform and salient parts.
pub fn split_labels(cloud: &SurfacePointCloud) -> (SurfacePointCloud, SurfacePointCloud) {
    (cloud.filter(PointLabel::Uniform), cloud.filter(PointLabel::Salient))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cloud(points: &[[f64; 3]], label: PointLabel) -> SurfacePointCloud {
        let mut c = SurfacePointCloud::empty(0);
        for p in points {
            c.push(Vec3::new(p[0], p[1], p[2]), Vec3::z(), label);
        }
        c
    }

    #[test]
    fn fourier_at_origin() {
        let f = fourier_embed(&Vec3::zeros(), 4);
        assert_eq!(f.len(), 27);
        for k in 0..4 {
            let base = 3 + 6 * k;
            assert!(f[base..base + 3].iter().all(|&v| v == 0.0));
            assert!(f[base + 3..base + 6].iter().all(|&v| v == 1.0));
        }
    }

    #[test]
    fn fourier_without_frequencies_is_identity() {
        let p = Vec3::new(0.25, -1.0, 1.5);
        assert_eq!(fourier_embed(&p, 0), vec![0.25, -1.0, 1.5]);
    }

    #[test]
    fn fourier_first_octave_at_unit_x() {
        let f = fourier_embed(&Vec3::new(1.0, 0.0, 0.0), 1);
        assert!(f[3].abs() < 1e-15);
        assert!((f[6] + 1.0).abs() < 1e-15);
    }

    #[test]
    fn point_features_append_normals() {
        let c = cloud(&[[0.1, 0.2, 0.3]], PointLabel::Uniform);
        let f = point_features(&c, 2, true);
        assert_eq!(f.dim(), (1, 18));
        assert_eq!(f[[0, 17]], 1.0);
        assert_eq!(point_features(&c, 2, false).dim(), (1, 15));
    }

    #[test]
    fn build_ps_uniform_only() {
        let u = cloud(&[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [0.5, 0.5, 0.5]], PointLabel::Uniform);
        let a = cloud(&[[2.0, 2.0, 2.0]], PointLabel::Salient);
        let ps = build_ps(&u, &a, 4, 0, 0).unwrap();
        assert_eq!(ps.len(), 4);
        assert_eq!(ps.count(PointLabel::Uniform), 4);
    }

    #[test]
    fn build_ps_transfers_shortfall() {
        let pts: Vec<[f64; 3]> = (0..20).map(|i| [i as f64, 0.0, 0.0]).collect();
        let u = cloud(&pts, PointLabel::Uniform);
        let a = SurfacePointCloud::empty(0);
        let ps = build_ps(&u, &a, 4, 8, 3).unwrap();
        assert_eq!(ps.len(), 12);
        assert_eq!(ps.count(PointLabel::Uniform), 12);
        let direct = fps_subset(&u, 12, 3).unwrap();
        assert_eq!(ps.positions, direct.positions);
    }

    #[test]
    fn build_ps_keeps_labels_and_rejects_overdraw() {
        let u = cloud(&[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]], PointLabel::Uniform);
        let a = cloud(&[[2.0, 0.0, 0.0], [3.0, 0.0, 0.0]], PointLabel::Salient);
        let ps = build_ps(&u, &a, 2, 2, 0).unwrap();
        assert_eq!(ps.labels, vec![PointLabel::Uniform, PointLabel::Uniform, PointLabel::Salient, PointLabel::Salient]);
        assert!(build_ps(&u, &a, 4, 2, 0).is_err());
        assert!(build_ps(&u, &a, 4, 0, 0).is_err());
    }

    proptest! {
        #[test]
        fn build_ps_ignores_row_order(
            pts in proptest::collection::vec(proptest::array::uniform3(-1.0f64..1.0), 6..30),
            shift in 0usize..30,
            seed in 0u64..100,
        ) {
            let u = cloud(&pts, PointLabel::Uniform);
            let mut rotated = pts.clone();
            let len = rotated.len();
            rotated.rotate_left(shift % len);
            let r = cloud(&rotated, PointLabel::Uniform);
            let a = SurfacePointCloud::empty(0);
            let x = build_ps(&u, &a, 5, 0, seed).unwrap();
            let y = build_ps(&r, &a, 5, 0, seed).unwrap();
            prop_assert_eq!(x.positions, y.positions);
        }
    }
}
