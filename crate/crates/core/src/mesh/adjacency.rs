use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::TriangleMesh;

/// Undirected edge stored as `(low, high)` vertex indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EdgeKey(pub u32, pub u32);

impl EdgeKey {
    pub fn new(a: u32, b: u32) -> Self {
        if a <= b {
            Self(a, b)
        } else {
            Self(b, a)
        }
    }
}

/// Edge to incident-face map for a mesh.
///
/// Edges are kept in key order; incident faces are listed in face-index
/// order. Non-manifold edges (more than two faces) are recorded as-is.
#[derive(Debug, Clone)]
pub struct EdgeAdjacency {
    edges: BTreeMap<EdgeKey, Vec<usize>>,
    lengths: BTreeMap<EdgeKey, f64>,
    vertex_count: usize,
}

impl EdgeAdjacency {
    pub fn build(mesh: &TriangleMesh) -> Self {
        let mut edges: BTreeMap<EdgeKey, Vec<usize>> = BTreeMap::new();
        for (fi, &[a, b, c]) in mesh.faces().iter().enumerate() {
            for (u, v) in [(a, b), (b, c), (c, a)] {
                edges.entry(EdgeKey::new(u, v)).or_default().push(fi);
            }
        }
        let verts = mesh.vertices();
        let lengths = edges
            .keys()
            .map(|&k| (k, (verts[k.0 as usize] - verts[k.1 as usize]).norm()))
            .collect();
        Self {
            edges,
            lengths,
            vertex_count: mesh.vertex_count(),
        }
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn iter(&self) -> impl Iterator<Item = (EdgeKey, &[usize])> {
        self.edges.iter().map(|(k, f)| (*k, f.as_slice()))
    }

    pub fn faces_of(&self, key: EdgeKey) -> Option<&[usize]> {
        self.edges.get(&key).map(Vec::as_slice)
    }

    pub fn length(&self, key: EdgeKey) -> Option<f64> {
        self.lengths.get(&key).copied()
    }

    /// Sum of incident face counts; equals `3 * |F|`.
    pub fn half_edge_count(&self) -> usize {
        self.edges.values().map(Vec::len).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WatertightReport {
    pub boundary_edges: usize,
    pub non_manifold_edges: usize,
    pub is_watertight: bool,
}

impl WatertightReport {
    pub fn from_adjacency(adj: &EdgeAdjacency) -> Self {
        let mut boundary_edges = 0;
        let mut non_manifold_edges = 0;
        for (_, faces) in adj.iter() {
            match faces.len() {
                1 => boundary_edges += 1,
                2 => {}
                _ => non_manifold_edges += 1,
            }
        }
        Self {
            boundary_edges,
            non_manifold_edges,
            is_watertight: boundary_edges == 0 && non_manifold_edges == 0,
        }
    }
}
