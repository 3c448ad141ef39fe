//! Marching cubes over a regular grid on `[-1, 1]³`.
//!
//! The 256-entry case table is derived at first use from the cube faces:
//! on every face, each maximal run of inside corners contributes one
//! segment from the edge where the run starts to the edge where it ends
//! (walking the face counter-clockwise as seen from outside the cell).
//! Ambiguous faces therefore always separate their inside corners, which
//! keeps neighbouring cells consistent. Segments chain into loops that are
//! fan-triangulated with normals pointing from inside to outside.

use std::collections::HashMap;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Vec3;
use crate::mesh::TriangleMesh;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VertexPlacement {
    /// Edge midpoints.
    #[default]
    Midpoint,
    /// Linear interpolation of the iso-crossing along the edge.
    Linear,
}

/// Smallest accepted grid resolution (cells per axis).
pub const MIN_GRID_RES: usize = 16;

fn corner_offset(c: usize) -> [usize; 3] {
    [c & 1, (c >> 1) & 1, (c >> 2) & 1]
}

/// The 12 cell edges as (lower corner, axis).
fn cell_edges() -> &'static [(usize, usize); 12] {
    static EDGES: OnceLock<[(usize, usize); 12]> = OnceLock::new();
    EDGES.get_or_init(|| {
        let mut out = [(0, 0); 12];
        let mut n = 0;
        for axis in 0..3 {
            for c in 0..8 {
                if c & (1 << axis) == 0 {
                    out[n] = (c, axis);
                    n += 1;
                }
            }
        }
        out
    })
}

fn edge_between(a: usize, b: usize) -> usize {
    let diff = a ^ b;
    debug_assert!(diff.count_ones() == 1);
    let axis = diff.trailing_zeros() as usize;
    let lower = a.min(b);
    cell_edges().iter().position(|&e| e == (lower, axis)).expect("cell edge")
}

/// Corner cycles of the six faces, counter-clockwise around the outward normal.
fn faces() -> Vec<[usize; 4]> {
    let mut out = Vec::with_capacity(6);
    for a in 0..3 {
        let (u, v) = ((a + 1) % 3, (a + 2) % 3);
        for side in 0..2 {
            let mut cyc = [(0, 0), (1, 0), (1, 1), (0, 1)].map(|(bu, bv)| (bu << u) | (bv << v) | (side << a));
            if side == 0 {
                cyc.reverse();
            }
            out.push(cyc);
        }
    }
    out
}

fn case_triangles(case: usize) -> Vec<[u8; 3]> {
    let inside = |c: usize| case & (1 << c) != 0;
    let mut next = [usize::MAX; 12];
    for cyc in faces() {
        for k in 0..4 {
            let (a, b) = (cyc[k], cyc[(k + 1) % 4]);
            if inside(a) || !inside(b) {
                continue;
            }
            // run of inside corners starting at b
            let enter = edge_between(a, b);
            let mut j = (k + 1) % 4;
            while inside(cyc[(j + 1) % 4]) {
                j = (j + 1) % 4;
            }
            let leave = edge_between(cyc[j], cyc[(j + 1) % 4]);
            next[enter] = leave;
        }
    }
    let mut tris = Vec::new();
    let mut seen = [false; 12];
    for start in 0..12 {
        if next[start] == usize::MAX || seen[start] {
            continue;
        }
        let mut ring = Vec::new();
        let mut e = start;
        while !seen[e] {
            seen[e] = true;
            ring.push(e as u8);
            e = next[e];
        }
        for i in 1..ring.len().saturating_sub(1) {
            tris.push([ring[0], ring[i], ring[i + 1]]);
        }
    }
    tris
}

fn case_table() -> &'static Vec<Vec<[u8; 3]>> {
    static TABLE: OnceLock<Vec<Vec<[u8; 3]>>> = OnceLock::new();
    TABLE.get_or_init(|| (0..256).map(case_triangles).collect())
}

/// World position of grid sample `(i, j, k)` for `res` cells per axis.
pub fn grid_point(i: usize, j: usize, k: usize, res: usize) -> Vec3 {
    let h = 2.0 / res as f64;
    Vec3::new(-1.0 + i as f64 * h, -1.0 + j as f64 * h, -1.0 + k as f64 * h)
}

/// All `(res + 1)³` sample positions, x fastest.
pub fn grid_points(res: usize) -> Vec<Vec3> {
    let n = res + 1;
    let mut out = Vec::with_capacity(n * n * n);
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                out.push(grid_point(i, j, k, res));
            }
        }
    }
    out
}

/// Isosurface of sampled `values` (layout of [`grid_points`]) at `iso`;
/// samples strictly above `iso` are inside.
pub fn marching_cubes(values: &[f64], res: usize, iso: f64, placement: VertexPlacement) -> Result<TriangleMesh> {
    let n = res + 1;
    if values.len() != n * n * n {
        return Err(Error::DimensionMismatch(format!(
            "expected {} grid samples, got {}",
            n * n * n,
            values.len()
        )));
    }
    let idx = |i: usize, j: usize, k: usize| (k * n + j) * n + i;
    let table = case_table();
    let edges = cell_edges();
    let mut vertex_of: HashMap<usize, u32> = HashMap::new();
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for k in 0..res {
        for j in 0..res {
            for i in 0..res {
                let mut case = 0;
                for c in 0..8 {
                    let [dx, dy, dz] = corner_offset(c);
                    if values[idx(i + dx, j + dy, k + dz)] > iso {
                        case |= 1 << c;
                    }
                }
                if case == 0 || case == 255 {
                    continue;
                }
                let mut local = [u32::MAX; 12];
                for tri in &table[case] {
                    let mut f = [0u32; 3];
                    for (slot, &e) in f.iter_mut().zip(tri) {
                        let e = e as usize;
                        if local[e] == u32::MAX {
                            let (c, axis) = edges[e];
                            let [dx, dy, dz] = corner_offset(c);
                            let (a0, a1, a2) = (i + dx, j + dy, k + dz);
                            let mut b = [a0, a1, a2];
                            b[axis] += 1;
                            let key = idx(a0, a1, a2) * 3 + axis;
                            local[e] = *vertex_of.entry(key).or_insert_with(|| {
                                let pa = grid_point(a0, a1, a2, res);
                                let pb = grid_point(b[0], b[1], b[2], res);
                                let t = match placement {
                                    VertexPlacement::Midpoint => 0.5,
                                    VertexPlacement::Linear => {
                                        let va = values[idx(a0, a1, a2)];
                                        let vb = values[idx(b[0], b[1], b[2])];
                                        ((iso - va) / (vb - va)).clamp(0.0, 1.0)
                                    }
                                };
                                vertices.push(pa + (pb - pa) * t);
                                (vertices.len() - 1) as u32
                            });
                        }
                        *slot = local[e];
                    }
                    faces.push(f);
                }
            }
        }
    }
    if faces.is_empty() {
        return Err(Error::EmptySurface);
    }
    TriangleMesh::new(vertices, faces)
}

/// Sample `field` on the grid and extract its 0.5 level set.
pub fn extract_isosurface(field: impl Fn(&[Vec3]) -> Vec<f64>, res: usize, placement: VertexPlacement) -> Result<TriangleMesh> {
    if res < MIN_GRID_RES {
        return Err(Error::InvalidArgument(format!("grid resolution must be at least {MIN_GRID_RES}, got {res}")));
    }
    let values = field(&grid_points(res));
    marching_cubes(&values, res, 0.5, placement)
}

/// Coarse cells whose corner values all lie farther than this from 0.5
/// are treated as settled by [`extract_isosurface_banded`].
pub const BAND_MARGIN: f64 = 0.4;

/// Narrow-band variant of [`extract_isosurface`].
///
/// The field is first sampled on a grid `factor` times coarser. Only coarse
/// cells that straddle 0.5, or have a corner within [`BAND_MARGIN`] of it,
/// are refined; every other fine sample inherits its coarse cell's side.
/// Features thinner than a coarse cell that no coarse sample touches can be
/// lost, so this trades exactness for far fewer field evaluations.
pub fn extract_isosurface_banded(
    field: impl Fn(&[Vec3]) -> Vec<f64>,
    res: usize,
    factor: usize,
    placement: VertexPlacement,
) -> Result<TriangleMesh> {
    if res < MIN_GRID_RES {
        return Err(Error::InvalidArgument(format!("grid resolution must be at least {MIN_GRID_RES}, got {res}")));
    }
    if factor <= 1 {
        return extract_isosurface(field, res, placement);
    }
    if res % factor != 0 || res / factor < 2 {
        return Err(Error::InvalidArgument(format!("band factor {factor} must divide resolution {res}")));
    }
    let rc = res / factor;
    let nc = rc + 1;
    let coarse = field(&grid_points(rc));
    let cidx = |i: usize, j: usize, k: usize| (k * nc + j) * nc + i;
    let n = res + 1;
    let fidx = |i: usize, j: usize, k: usize| (k * n + j) * n + i;
    let mut values = vec![f64::NAN; n * n * n];
    let mut pending = Vec::new();
    for k in 0..rc {
        for j in 0..rc {
            for i in 0..rc {
                let corners: Vec<f64> = (0..8)
                    .map(|c| {
                        let [dx, dy, dz] = corner_offset(c);
                        coarse[cidx(i + dx, j + dy, k + dz)]
                    })
                    .collect();
                let inside = corners.iter().filter(|&&v| v > 0.5).count();
                let uncertain = corners.iter().any(|v| (v - 0.5).abs() < BAND_MARGIN);
                let active = uncertain || (inside != 0 && inside != 8);
                let fill = if inside == 8 { 1.0 } else { 0.0 };
                for fk in k * factor..=(k + 1) * factor {
                    for fj in j * factor..=(j + 1) * factor {
                        for fi in i * factor..=(i + 1) * factor {
                            let v = &mut values[fidx(fi, fj, fk)];
                            if active {
                                if !v.is_infinite() {
                                    *v = f64::INFINITY;
                                }
                            } else if v.is_nan() {
                                *v = fill;
                            }
                        }
                    }
                }
            }
        }
    }
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                if values[fidx(i, j, k)].is_infinite() {
                    pending.push((fidx(i, j, k), grid_point(i, j, k, res)));
                }
            }
        }
    }
    let points: Vec<Vec3> = pending.iter().map(|&(_, p)| p).collect();
    for ((slot, _), v) in pending.iter().zip(field(&points)) {
        values[*slot] = v;
    }
    marching_cubes(&values, res, 0.5, placement)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::shapes;
    use crate::metrics::chamfer;
    use crate::sampler::sample_uniform;

    fn signed_volume(m: &TriangleMesh) -> f64 {
        (0..m.face_count())
            .map(|f| {
                let [a, b, c] = m.corners(f);
                a.dot(&b.cross(&c)) / 6.0
            })
            .sum()
    }

    #[test]
    fn every_case_closes_its_loops() {
        for case in 1..255 {
            let tris = case_triangles(case);
            assert!(!tris.is_empty(), "case {case}");
            // each edge used appears with both orientations across the loop fan
            let mut degree = [0usize; 12];
            for t in &tris {
                for &e in t {
                    degree[e as usize] += 1;
                }
            }
            for e in 0..12 {
                let (c, axis) = cell_edges()[e];
                let crossed = ((case >> c) & 1) != ((case >> (c | (1 << axis))) & 1);
                assert_eq!(degree[e] > 0, crossed, "case {case} edge {e}");
            }
        }
        assert!(case_triangles(0).is_empty());
        assert!(case_triangles(255).is_empty());
    }

    #[test]
    fn constant_field_has_no_surface() {
        let r = extract_isosurface(|q| vec![0.9; q.len()], 16, VertexPlacement::Midpoint);
        assert!(matches!(r, Err(Error::EmptySurface)));
        let r = extract_isosurface(|q| vec![0.1; q.len()], 16, VertexPlacement::Midpoint);
        assert!(matches!(r, Err(Error::EmptySurface)));
    }

    #[test]
    fn rejects_coarse_grids() {
        assert!(extract_isosurface(|q| vec![0.0; q.len()], 8, VertexPlacement::Midpoint).is_err());
    }

    fn sphere_field(q: &[Vec3]) -> Vec<f64> {
        q.iter().map(|p| if p.norm() <= 0.6 { 1.0 } else { 0.0 }).collect()
    }

    #[test]
    fn sphere_is_closed_and_outward() {
        let m = extract_isosurface(sphere_field, 32, VertexPlacement::Midpoint).unwrap();
        let report = m.check_watertight();
        assert!(report.is_watertight, "{report:?}");
        assert!(signed_volume(&m) > 0.0);
    }

    #[test]
    fn sphere_chamfer_within_grid_bound() {
        let res = 64;
        let m = extract_isosurface(sphere_field, res, VertexPlacement::Midpoint).unwrap();
        let truth = shapes::icosphere(5).map_vertices(|v| v * 0.6);
        let a = sample_uniform(&m, 20_000, 1, false).unwrap();
        let b = sample_uniform(&truth, 20_000, 2, false).unwrap();
        let cd = chamfer(&a.positions, &b.positions).unwrap();
        assert!(cd < 2.0 * (2.0 / res as f64), "cd = {cd}");
    }

    #[test]
    fn linear_placement_is_tighter_on_smooth_fields() {
        let field = |q: &[Vec3]| q.iter().map(|p| 0.5 + 0.6 - p.norm()).collect();
        let truth = shapes::icosphere(5).map_vertices(|v| v * 0.6);
        let b = sample_uniform(&truth, 20_000, 2, false).unwrap();
        let cd = |placement| {
            let m = extract_isosurface(field, 32, placement).unwrap();
            let a = sample_uniform(&m, 20_000, 1, false).unwrap();
            chamfer(&a.positions, &b.positions).unwrap()
        };
        assert!(cd(VertexPlacement::Linear) < cd(VertexPlacement::Midpoint));
    }

    #[test]
    fn banded_extraction_matches_dense_on_smooth_fields() {
        let field = |q: &[Vec3]| q.iter().map(|p| crate::neural::tape::sigmoid(20.0 * (0.6 - p.norm()))).collect();
        let dense = extract_isosurface(field, 32, VertexPlacement::Linear).unwrap();
        let banded = extract_isosurface_banded(field, 32, 4, VertexPlacement::Linear).unwrap();
        assert_eq!(dense, banded);
        assert!(extract_isosurface_banded(field, 32, 5, VertexPlacement::Linear).is_err());
    }

    #[test]
    fn saddle_field_stays_watertight() {
        // two touching blobs exercise the ambiguous face cases
        let field = |q: &[Vec3]| {
            q.iter()
                .map(|p| {
                    let a = (p - Vec3::new(-0.3, -0.3, 0.0)).norm() < 0.42;
                    let b = (p - Vec3::new(0.3, 0.3, 0.0)).norm() < 0.42;
                    let c = (p - Vec3::new(0.3, -0.3, 0.3)).norm() < 0.3;
                    if a || b || c { 1.0 } else { 0.0 }
                })
                .collect()
        };
        for res in [16, 17, 23, 32] {
            let m = extract_isosurface(field, res, VertexPlacement::Midpoint).unwrap();
            assert!(m.check_watertight().is_watertight, "res {res}");
        }
    }
}
