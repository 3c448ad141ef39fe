//! Procedural fixture meshes and analytic shapes with exact occupancy.

use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::TriangleMesh;
use crate::geom::Vec3;

/// Accumulates vertices (welded on exact position) and faces.
#[derive(Debug, Default)]
pub struct MeshBuilder {
    vertices: Vec<Vec3>,
    faces: Vec<[u32; 3]>,
    lookup: HashMap<[i64; 3], u32>,
}

impl MeshBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns the index of `p`, reusing an existing vertex closer than 1e-9 on every axis.
    pub fn vertex(&mut self, p: Vec3) -> u32 {
        let key = [
            (p.x * 1e9).round() as i64,
            (p.y * 1e9).round() as i64,
            (p.z * 1e9).round() as i64,
        ];
        *self.lookup.entry(key).or_insert_with(|| {
            self.vertices.push(p);
            (self.vertices.len() - 1) as u32
        })
    }

    pub fn triangle(&mut self, a: u32, b: u32, c: u32) {
        self.faces.push([a, b, c]);
    }

    /// Quad `abcd`, counter-clockwise seen from outside.
    pub fn quad(&mut self, a: u32, b: u32, c: u32, d: u32) {
        self.faces.push([a, b, c]);
        self.faces.push([a, c, d]);
    }

    pub fn quad_points(&mut self, a: Vec3, b: Vec3, c: Vec3, d: Vec3) {
        let (a, b, c, d) = (self.vertex(a), self.vertex(b), self.vertex(c), self.vertex(d));
        self.quad(a, b, c, d);
    }

    pub fn build(self) -> TriangleMesh {
        TriangleMesh::new(self.vertices, self.faces).expect("builder produced an invalid mesh")
    }

    /// Adds the six faces of the box `[lo, hi]`, each split into `n x n` cells.
    ///
    /// `skip_top_cell(i, j)` lets callers replace cells of the `+z` face.
    pub fn add_box_grid(
        &mut self,
        lo: Vec3,
        hi: Vec3,
        n: usize,
        mut skip_top_cell: impl FnMut(usize, usize) -> bool,
    ) {
        let d = hi - lo;
        let (dx, dy, dz) = (Vec3::new(d.x, 0.0, 0.0), Vec3::new(0.0, d.y, 0.0), Vec3::new(0.0, 0.0, d.z));
        // (corner, u, v, is_top) with u x v pointing outward.
        let sides = [
            (Vec3::new(lo.x, lo.y, hi.z), dx, dy, true),
            (lo, dy, dx, false),
            (Vec3::new(hi.x, lo.y, lo.z), dy, dz, false),
            (lo, dz, dy, false),
            (Vec3::new(lo.x, hi.y, lo.z), dz, dx, false),
            (lo, dx, dz, false),
        ];
        let nf = n as f64;
        for (corner, u, v, is_top) in sides {
            let p = |i: usize, j: usize| corner + u * (i as f64 / nf) + v * (j as f64 / nf);
            for i in 0..n {
                for j in 0..n {
                    if is_top && skip_top_cell(i, j) {
                        continue;
                    }
                    self.quad_points(p(i, j), p(i + 1, j), p(i + 1, j + 1), p(i, j + 1));
                }
            }
        }
    }
}

/// Axis-aligned box of the given full extents centered at the origin.
pub fn axis_box(extents: Vec3) -> TriangleMesh {
    let mut b = MeshBuilder::new();
    b.add_box_grid(-extents * 0.5, extents * 0.5, 1, |_, _| false);
    b.build()
}

/// The cube `[-0.5, 0.5]^3` as 8 vertices and 12 triangles.
pub fn cube() -> TriangleMesh {
    axis_box(Vec3::repeat(1.0))
}

/// Regular icosahedron with circumradius 1.
pub fn icosahedron() -> TriangleMesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let raw = [
        [-1.0, t, 0.0],
        [1.0, t, 0.0],
        [-1.0, -t, 0.0],
        [1.0, -t, 0.0],
        [0.0, -1.0, t],
        [0.0, 1.0, t],
        [0.0, -1.0, -t],
        [0.0, 1.0, -t],
        [t, 0.0, -1.0],
        [t, 0.0, 1.0],
        [-t, 0.0, -1.0],
        [-t, 0.0, 1.0],
    ];
    let vertices = raw.iter().map(|p| Vec3::from(*p).normalize()).collect();
    let faces = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    TriangleMesh::new(vertices, faces).unwrap()
}

/// Unit sphere from `levels` rounds of midpoint subdivision of the icosahedron.
pub fn icosphere(levels: usize) -> TriangleMesh {
    let ico = icosahedron();
    let mut vertices = ico.vertices().to_vec();
    let mut faces = ico.faces().to_vec();
    for _ in 0..levels {
        let mut cache: HashMap<(u32, u32), u32> = HashMap::new();
        let mut mid = |a: u32, b: u32, vertices: &mut Vec<Vec3>| -> u32 {
            let key = (a.min(b), a.max(b));
            *cache.entry(key).or_insert_with(|| {
                let p = ((vertices[a as usize] + vertices[b as usize]) * 0.5).normalize();
                vertices.push(p);
                (vertices.len() - 1) as u32
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for [a, b, c] in faces {
            let ab = mid(a, b, &mut vertices);
            let bc = mid(b, c, &mut vertices);
            let ca = mid(c, a, &mut vertices);
            next.extend_from_slice(&[[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    TriangleMesh::new(vertices, faces).unwrap()
}

/// Default sphere fixture; every dihedral angle is well below 30 degrees.
pub fn sphere() -> TriangleMesh {
    icosphere(3)
}

/// Flat `n x n` grid of unit cells in the `z = 0` plane, centered at the origin.
pub fn plane_grid(n: usize) -> TriangleMesh {
    let mut b = MeshBuilder::new();
    let h = n as f64 / 2.0;
    for i in 0..n {
        for j in 0..n {
            let (x, y) = (i as f64 - h, j as f64 - h);
            b.quad_points(
                Vec3::new(x, y, 0.0),
                Vec3::new(x + 1.0, y, 0.0),
                Vec3::new(x + 1.0, y + 1.0, 0.0),
                Vec3::new(x, y + 1.0, 0.0),
            );
        }
    }
    b.build()
}

/// Two unit cubes touching along one edge, which becomes non-manifold.
pub fn two_cubes_sharing_edge() -> TriangleMesh {
    let mut b = MeshBuilder::new();
    b.add_box_grid(Vec3::zeros(), Vec3::repeat(1.0), 1, |_, _| false);
    b.add_box_grid(Vec3::new(1.0, 1.0, 0.0), Vec3::new(2.0, 2.0, 1.0), 1, |_, _| false);
    b.build()
}

/// A box whose top face carries a grid of raised rectangular keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BumpGridBox {
    pub half_extents: Vec3,
    /// Number of key slots per side; the top face is split into `2 * slots + 1` cells.
    pub slots: usize,
    pub key_height: f64,
    /// Row-major `slots x slots` presence flags.
    pub keys: Vec<bool>,
}

impl BumpGridBox {
    pub fn random(rng: &mut impl Rng, slots: usize) -> Self {
        let half_extents = Vec3::new(
            rng.random_range(0.6..0.8),
            rng.random_range(0.6..0.8),
            rng.random_range(0.2..0.4),
        );
        let mut keys: Vec<bool> = (0..slots * slots).map(|_| rng.random_bool(0.6)).collect();
        if !keys.iter().any(|&k| k) {
            keys[0] = true;
        }
        Self {
            half_extents,
            slots,
            key_height: rng.random_range(0.08..0.16),
            keys,
        }
    }

    fn cells(&self) -> usize {
        2 * self.slots + 1
    }

    fn has_key(&self, i: usize, j: usize) -> bool {
        i % 2 == 1 && j % 2 == 1 && self.keys[(i / 2) * self.slots + j / 2]
    }

    fn cell_bounds(&self, i: usize, j: usize) -> (f64, f64, f64, f64) {
        let n = self.cells() as f64;
        let lo = -self.half_extents;
        let w = self.half_extents * 2.0;
        (
            lo.x + w.x * i as f64 / n,
            lo.x + w.x * (i + 1) as f64 / n,
            lo.y + w.y * j as f64 / n,
            lo.y + w.y * (j + 1) as f64 / n,
        )
    }

    /// Watertight mesh of the keyed box, centered under its base box.
    pub fn mesh(&self) -> TriangleMesh {
        let mut b = MeshBuilder::new();
        let n = self.cells();
        b.add_box_grid(-self.half_extents, self.half_extents, n, |i, j| self.has_key(i, j));
        let z0 = self.half_extents.z;
        let z1 = z0 + self.key_height;
        for i in 0..n {
            for j in 0..n {
                if !self.has_key(i, j) {
                    continue;
                }
                let (x0, x1, y0, y1) = self.cell_bounds(i, j);
                let base = [
                    Vec3::new(x0, y0, z0),
                    Vec3::new(x1, y0, z0),
                    Vec3::new(x1, y1, z0),
                    Vec3::new(x0, y1, z0),
                ];
                let top = base.map(|p| Vec3::new(p.x, p.y, z1));
                b.quad_points(top[0], top[1], top[2], top[3]);
                for k in 0..4 {
                    let l = (k + 1) % 4;
                    b.quad_points(base[k], base[l], top[l], top[k]);
                }
            }
        }
        b.build()
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        let h = self.half_extents;
        if p.x.abs() <= h.x && p.y.abs() <= h.y && p.z.abs() <= h.z {
            return true;
        }
        if p.z < h.z || p.z > h.z + self.key_height {
            return false;
        }
        let n = self.cells();
        (0..n).any(|i| {
            (0..n).any(|j| {
                if !self.has_key(i, j) {
                    return false;
                }
                let (x0, x1, y0, y1) = self.cell_bounds(i, j);
                (x0..=x1).contains(&p.x) && (y0..=y1).contains(&p.y)
            })
        })
    }
}

/// Shapes with an exact inside test, used as occupancy ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AnalyticShape {
    Sphere { center: Vec3, radius: f64 },
    Box { center: Vec3, half_extents: Vec3 },
    BumpGridBox(BumpGridBox),
}

impl AnalyticShape {
    pub fn contains(&self, p: &Vec3) -> bool {
        match self {
            AnalyticShape::Sphere { center, radius } => (p - center).norm_squared() <= radius * radius,
            AnalyticShape::Box {
                center,
                half_extents,
            } => {
                let d = p - center;
                d.x.abs() <= half_extents.x && d.y.abs() <= half_extents.y && d.z.abs() <= half_extents.z
            }
            AnalyticShape::BumpGridBox(b) => b.contains(p),
        }
    }

    /// A surface mesh of the shape; spheres are approximated by a level-3 icosphere.
    pub fn mesh(&self) -> TriangleMesh {
        match self {
            AnalyticShape::Sphere { center, radius } => icosphere(3).map_vertices(|v| v * *radius + center),
            AnalyticShape::Box {
                center,
                half_extents,
            } => axis_box(half_extents * 2.0).map_vertices(|v| v + center),
            AnalyticShape::BumpGridBox(b) => b.mesh(),
        }
    }
}
