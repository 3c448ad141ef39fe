use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{fps, PointLabel, SurfacePointCloud};
use crate::error::{Error, Result};
use crate::geom::Vec3;
use crate::mesh::{EdgeKey, TriangleMesh};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SalientEdge {
    pub key: EdgeKey,
    pub angle_deg: f64,
    /// Incident faces in face-index order.
    pub faces: [usize; 2],
}

/// Manifold edges whose dihedral angle exceeds a threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SalientEdgeSet {
    pub edges: Vec<SalientEdge>,
    pub threshold_deg: f64,
    /// Vertex count of the mesh the set was computed on.
    pub vertex_count: usize,
}

impl SalientEdgeSet {
    /// `N_Γ`, the number of salient edges.
    pub fn count(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    /// Deduplicated endpoint indices of all salient edges, ascending.
    pub fn vertices(&self) -> Vec<u32> {
        self.edges
            .iter()
            .flat_map(|e| [e.key.0, e.key.1])
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }
}

/// Dihedral angle in degrees for every edge with exactly two nondegenerate faces.
///
/// The angle is `acos(n1 . n2)` with the dot product clamped to `[-1, 1]`,
/// so coplanar faces give 0 and a 90 degree crease gives 90.
pub fn dihedral_angles(mesh: &TriangleMesh) -> Vec<(EdgeKey, [usize; 2], f64)> {
    let normals = mesh.face_normals();
    mesh.edge_adjacency()
        .iter()
        .filter_map(|(key, faces)| {
            let &[f1, f2] = faces else { return None };
            let (n1, n2) = (normals[f1]?, normals[f2]?);
            let cos = n1.dot(&n2).clamp(-1.0, 1.0);
            Some((key, [f1, f2], cos.acos().to_degrees()))
        })
        .collect()
}

pub fn detect_salient_edges(mesh: &TriangleMesh, tau_deg: f64) -> Result<SalientEdgeSet> {
    if !(tau_deg > 0.0 && tau_deg < 180.0) {
        return Err(Error::InvalidArgument(format!(
            "threshold must lie in (0, 180) degrees, got {tau_deg}"
        )));
    }
    let edges = dihedral_angles(mesh)
        .into_iter()
        .filter(|&(_, _, angle)| angle > tau_deg)
        .map(|(key, faces, angle_deg)| SalientEdge { key, angle_deg, faces })
        .collect();
    Ok(SalientEdgeSet {
        edges,
        threshold_deg: tau_deg,
        vertex_count: mesh.vertex_count(),
    })
}

/// Which branch of salient point generation produced a cloud.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SalientCase {
    /// Enough salient vertices: farthest point downsampling.
    Downsample,
    /// Too few salient vertices: all of them plus points along the edges.
    Interpolate,
    /// No salient edges.
    Empty,
}

impl SalientCase {
    pub fn classify(salient_vertices: usize, n_desired: usize) -> Self {
        if salient_vertices == 0 {
            SalientCase::Empty
        } else if n_desired <= salient_vertices {
            SalientCase::Downsample
        } else {
            SalientCase::Interpolate
        }
    }
}

fn bisector(n1: Vec3, n2: Vec3) -> Vec3 {
    let s = n1 + n2;
    let len = s.norm();
    if len > 1e-12 {
        s / len
    } else {
        n1
    }
}

/// Salient point set `P_a` for a mesh and its salient edges.
///
/// Vertex points carry the normalized sum of the bisectors of their incident
/// salient edges; interpolated edge points carry the bisector of the edge's
/// two face normals.
pub fn sample_salient(
    mesh: &TriangleMesh,
    set: &SalientEdgeSet,
    n_desired: usize,
    seed: u64,
) -> Result<(SurfacePointCloud, SalientCase)> {
    if set.vertex_count != mesh.vertex_count() {
        return Err(Error::MeshMismatch {
            expected: set.vertex_count,
            actual: mesh.vertex_count(),
        });
    }
    let verts = mesh.vertices();
    let normals = mesh.face_normals();
    let edge_normal = |e: &SalientEdge| -> Vec3 {
        let n1 = normals[e.faces[0]].expect("salient edges have nondegenerate faces");
        let n2 = normals[e.faces[1]].expect("salient edges have nondegenerate faces");
        bisector(n1, n2)
    };

    let salient_vertices = set.vertices();
    let case = SalientCase::classify(salient_vertices.len(), n_desired);
    let mut base = SurfacePointCloud::empty(seed);
    if case == SalientCase::Empty || n_desired == 0 {
        return Ok((base, case));
    }

    let mut vertex_normal = vec![Vec3::zeros(); mesh.vertex_count()];
    for e in &set.edges {
        let n = edge_normal(e);
        vertex_normal[e.key.0 as usize] += n;
        vertex_normal[e.key.1 as usize] += n;
    }
    for &v in &salient_vertices {
        let n = vertex_normal[v as usize];
        let n = if n.norm() > 1e-12 {
            n.normalize()
        } else {
            let e = set.edges.iter().find(|e| e.key.0 == v || e.key.1 == v).unwrap();
            edge_normal(e)
        };
        base.push(verts[v as usize], n, PointLabel::Salient);
    }

    if case == SalientCase::Downsample {
        let picked = fps(&base.positions, n_desired, seed)?;
        return Ok((base.subset(&picked), case));
    }

    // Spread the shortfall over the edges: an even share each, the remainder
    // going one apiece to the longest edges (ties by edge key).
    let n_edges = set.count();
    let shortfall = n_desired - salient_vertices.len();
    let share = shortfall / n_edges;
    let remainder = shortfall % n_edges;
    let mut per_edge = vec![share; n_edges];
    let mut by_length: Vec<usize> = (0..n_edges).collect();
    let length = |i: usize| {
        let k = set.edges[i].key;
        (verts[k.0 as usize] - verts[k.1 as usize]).norm()
    };
    by_length.sort_by(|&a, &b| length(b).total_cmp(&length(a)).then(a.cmp(&b)));
    for &i in &by_length[..remainder] {
        per_edge[i] += 1;
    }
    for (e, &m) in set.edges.iter().zip(&per_edge) {
        let (a, b) = (verts[e.key.0 as usize], verts[e.key.1 as usize]);
        let n = edge_normal(e);
        for i in 1..=m {
            let t = i as f64 / (m + 1) as f64;
            base.push(a + (b - a) * t, n, PointLabel::Salient);
        }
    }
    Ok((base, case))
}
