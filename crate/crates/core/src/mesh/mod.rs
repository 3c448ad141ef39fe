//! Indexed triangle meshes and the connectivity every other module consumes.

mod adjacency;
pub mod io;
pub mod shapes;

pub use adjacency::{EdgeAdjacency, EdgeKey, WatertightReport};

use crate::error::{Error, Result};
use crate::geom::{triangle_cross, Vec3};

/// Faces with an area below this are treated as degenerate and carry no normal.
pub const DEGENERATE_AREA_EPS: f64 = 1e-12;

/// An indexed triangle mesh with counter-clockwise winding.
///
/// Construction validates indices, so a `TriangleMesh` always satisfies
/// `face[i] < vertices.len()` with three distinct corners per face.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    vertices: Vec<Vec3>,
    faces: Vec<[u32; 3]>,
}

impl TriangleMesh {
    pub fn new(vertices: Vec<Vec3>, faces: Vec<[u32; 3]>) -> Result<Self> {
        if faces.is_empty() {
            return Err(Error::NoFaces);
        }
        let n = vertices.len();
        for (fi, f) in faces.iter().enumerate() {
            for &v in f {
                if v as usize >= n {
                    return Err(Error::IndexOutOfRange {
                        face: fi,
                        index: v as i64,
                        vertex_count: n,
                    });
                }
            }
            if f[0] == f[1] || f[0] == f[2] {
                return Err(Error::RepeatedVertex { face: fi, vertex: f[0] });
            }
            if f[1] == f[2] {
                return Err(Error::RepeatedVertex { face: fi, vertex: f[1] });
            }
        }
        Ok(Self { vertices, faces })
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[u32; 3]] {
        &self.faces
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    pub fn corners(&self, face: usize) -> [Vec3; 3] {
        let [a, b, c] = self.faces[face];
        [
            self.vertices[a as usize],
            self.vertices[b as usize],
            self.vertices[c as usize],
        ]
    }

    pub fn face_area(&self, face: usize) -> f64 {
        let [a, b, c] = self.corners(face);
        0.5 * triangle_cross(&a, &b, &c).norm()
    }

    pub fn total_area(&self) -> f64 {
        (0..self.face_count()).map(|f| self.face_area(f)).sum()
    }

    /// Unit normal of `face` following the right-hand rule on its winding.
    ///
    /// The normal is computed from the normalized cross product, so it is
    /// unaffected by uniform scaling or translation. Faces whose area falls
    /// below [`DEGENERATE_AREA_EPS`] return [`Error::DegenerateFace`].
    pub fn face_normal(&self, face: usize) -> Result<Vec3> {
        let [a, b, c] = self.corners(face);
        let cross = triangle_cross(&a, &b, &c);
        let len = cross.norm();
        if 0.5 * len < DEGENERATE_AREA_EPS || !len.is_finite() {
            return Err(Error::DegenerateFace(face));
        }
        Ok(cross / len)
    }

    /// Normals for every face, `None` for degenerate ones.
    pub fn face_normals(&self) -> Vec<Option<Vec3>> {
        (0..self.face_count())
            .map(|f| self.face_normal(f).ok())
            .collect()
    }

    /// Axis-aligned bounding box as `(min, max)`.
    pub fn bounds(&self) -> (Vec3, Vec3) {
        let mut lo = Vec3::repeat(f64::INFINITY);
        let mut hi = Vec3::repeat(f64::NEG_INFINITY);
        for v in &self.vertices {
            lo = lo.inf(v);
            hi = hi.sup(v);
        }
        (lo, hi)
    }

    /// Centers the bounding box at the origin and scales uniformly so the
    /// longest axis spans `[-1, 1]`.
    pub fn normalize_to_unit_cube(&self) -> Result<Self> {
        let (lo, hi) = self.bounds();
        let extent = hi - lo;
        let max_extent = extent.max();
        if !(max_extent > 0.0) || !max_extent.is_finite() {
            return Err(Error::DegenerateMesh);
        }
        let center = (lo + hi) * 0.5;
        let scale = 2.0 / max_extent;
        let vertices = self
            .vertices
            .iter()
            .map(|v| (v - center) * scale)
            .collect();
        Ok(Self {
            vertices,
            faces: self.faces.clone(),
        })
    }

    /// Applies `f` to every vertex, keeping connectivity.
    pub fn map_vertices(&self, f: impl Fn(&Vec3) -> Vec3) -> Self {
        Self {
            vertices: self.vertices.iter().map(f).collect(),
            faces: self.faces.clone(),
        }
    }

    /// Same mesh with every face's winding reversed.
    pub fn flipped(&self) -> Self {
        Self {
            vertices: self.vertices.clone(),
            faces: self.faces.iter().map(|&[a, b, c]| [a, c, b]).collect(),
        }
    }

    /// Removes face `face`, keeping the vertex list intact.
    pub fn without_face(&self, face: usize) -> Result<Self> {
        let faces: Vec<_> = self
            .faces
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != face)
            .map(|(_, f)| *f)
            .collect();
        Self::new(self.vertices.clone(), faces)
    }

    pub fn edge_adjacency(&self) -> EdgeAdjacency {
        EdgeAdjacency::build(self)
    }

    pub fn check_watertight(&self) -> WatertightReport {
        WatertightReport::from_adjacency(&self.edge_adjacency())
    }

    /// Concatenates two meshes, offsetting the indices of the second.
    pub fn merged(&self, other: &Self) -> Self {
        let offset = self.vertices.len() as u32;
        let mut vertices = self.vertices.clone();
        vertices.extend_from_slice(&other.vertices);
        let mut faces = self.faces.clone();
        faces.extend(
            other
                .faces
                .iter()
                .map(|&[a, b, c]| [a + offset, b + offset, c + offset]),
        );
        Self { vertices, faces }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tri(a: [f64; 3], b: [f64; 3], c: [f64; 3]) -> TriangleMesh {
        TriangleMesh::new(
            vec![Vec3::from(a), Vec3::from(b), Vec3::from(c)],
            vec![[0, 1, 2]],
        )
        .unwrap()
    }

    #[test]
    fn rejects_bad_indices() {
        let v = vec![Vec3::zeros(); 3];
        assert!(matches!(
            TriangleMesh::new(v.clone(), vec![[0, 1, 3]]),
            Err(Error::IndexOutOfRange { index: 3, .. })
        ));
        assert!(matches!(
            TriangleMesh::new(v.clone(), vec![[0, 1, 1]]),
            Err(Error::RepeatedVertex { .. })
        ));
        assert!(matches!(TriangleMesh::new(v, vec![]), Err(Error::NoFaces)));
    }

    #[test]
    fn face_normal_right_hand_rule() {
        let m = tri([0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]);
        assert_eq!(m.face_normal(0).unwrap(), Vec3::new(0.0, 0.0, 1.0));
        assert_eq!(m.flipped().face_normal(0).unwrap(), Vec3::new(0.0, 0.0, -1.0));
    }

    #[test]
    fn face_normal_by_hand() {
        // (1,0,0) x (1,1,1) = (0*1 - 0*1, 0*1 - 1*1, 1*1 - 0*1) = (0,-1,1)
        let m = tri([0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [1.0, 1.0, 1.0]);
        let n = m.face_normal(0).unwrap();
        let s = 1.0 / 2f64.sqrt();
        assert!((n - Vec3::new(0.0, -s, s)).norm() < 1e-15);
    }

    #[test]
    fn degenerate_face_is_flagged() {
        let m = tri([0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [2.0, 0.0, 0.0]);
        assert!(matches!(m.face_normal(0), Err(Error::DegenerateFace(0))));
        assert_eq!(m.face_normals(), vec![None]);
    }

    #[test]
    fn normalize_cube_corners() {
        let m = shapes::cube().map_vertices(|v| (v.add_scalar(0.5)) * 10.0);
        let (lo, hi) = m.bounds();
        assert_eq!((lo, hi), (Vec3::zeros(), Vec3::repeat(10.0)));
        let n = m.normalize_to_unit_cube().unwrap();
        assert_eq!(n.bounds(), (Vec3::repeat(-1.0), Vec3::repeat(1.0)));
    }

    #[test]
    fn normalize_box_extents() {
        // scale = 2 / max extent = 2 / 4
        let m = shapes::axis_box(Vec3::new(4.0, 2.0, 1.0)).map_vertices(|v| v + Vec3::new(7.0, -3.0, 11.0));
        let n = m.normalize_to_unit_cube().unwrap();
        let (lo, hi) = n.bounds();
        assert!((hi - lo - Vec3::new(2.0, 1.0, 0.5)).norm() < 1e-12);
        assert!(((hi + lo) * 0.5).norm() < 1e-12);
    }

    #[test]
    fn normalize_rejects_point_mesh() {
        let m = TriangleMesh::new(vec![Vec3::zeros(); 3], vec![[0, 1, 2]]).unwrap();
        assert!(matches!(m.normalize_to_unit_cube(), Err(Error::DegenerateMesh)));
    }

    #[test]
    fn removing_a_face_opens_three_boundary_edges() {
        for mesh in [shapes::cube(), shapes::icosahedron(), shapes::icosphere(1)] {
            assert!(mesh.check_watertight().is_watertight);
            for f in 0..mesh.face_count() {
                let r = mesh.without_face(f).unwrap().check_watertight();
                assert!(!r.is_watertight);
                assert_eq!(r.boundary_edges, 3);
            }
        }
    }

    fn arb_vec() -> impl Strategy<Value = Vec3> {
        (-5.0..5.0f64, -5.0..5.0f64, -5.0..5.0f64).prop_map(|(x, y, z)| Vec3::new(x, y, z))
    }

    proptest! {
        #[test]
        fn normalize_is_idempotent(pts in proptest::collection::vec(arb_vec(), 3..12)) {
            let n = pts.len() as u32;
            let faces: Vec<[u32; 3]> = (0..n - 2).map(|i| [0, i + 1, i + 2]).collect();
            let m = TriangleMesh::new(pts, faces).unwrap();
            if let Ok(a) = m.normalize_to_unit_cube() {
                let b = a.normalize_to_unit_cube().unwrap();
                for (p, q) in a.vertices().iter().zip(b.vertices()) {
                    prop_assert!((p - q).amax() <= 1e-12);
                }
                let (lo, hi) = a.bounds();
                prop_assert!(lo.min() >= -1.0 - 1e-12 && hi.max() <= 1.0 + 1e-12);
                prop_assert!(((hi - lo).max() - 2.0).abs() <= 1e-12);
            }
        }

        #[test]
        fn normals_invariant_under_similarity(
            a in arb_vec(), b in arb_vec(), c in arb_vec(),
            t in arb_vec(), s in 0.01..100.0f64,
        ) {
            let m = TriangleMesh::new(vec![a, b, c], vec![[0, 1, 2]]).unwrap();
            prop_assume!(m.face_area(0) > 1e-3);
            let n0 = m.face_normal(0).unwrap();
            let n1 = m.map_vertices(|v| v * s + t).face_normal(0).unwrap();
            prop_assert!((n0 - n1).amax() < 1e-12);
        }
    }
}
