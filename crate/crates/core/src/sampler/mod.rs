//! Surface sampling: uniform, blue-noise, farthest point and Sharp Edge Sampling.

mod blue_noise;
mod fps;
pub mod io;
mod salient;
mod ses;
mod uniform;

pub use blue_noise::eliminate_samples;
pub use fps::fps;
pub use salient::{dihedral_angles, detect_salient_edges, sample_salient, SalientCase, SalientEdge, SalientEdgeSet};
pub use ses::{ses_sample, ses_sample_detailed, SesConfig, SesOutput};
pub use uniform::sample_uniform;

use serde::{Deserialize, Serialize};

use crate::geom::Vec3;

/// Default salient dihedral threshold in degrees.
pub const DEFAULT_TAU_DEG: f64 = 30.0;
/// Default target number of salient points.
pub const DEFAULT_N_DESIRED: usize = 16384;
/// Default total number of sampled points.
pub const DEFAULT_N_TOTAL: usize = 32768;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PointLabel {
    Uniform = 0,
    Salient = 1,
}

impl PointLabel {
    pub fn from_u8(v: u8) -> Option<Self> {
        match v {
            0 => Some(PointLabel::Uniform),
            1 => Some(PointLabel::Salient),
            _ => None,
        }
    }
}

/// Sampled surface points with unit normals and an origin label per point.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SurfacePointCloud {
    pub positions: Vec<Vec3>,
    pub normals: Vec<Vec3>,
    pub labels: Vec<PointLabel>,
    pub seed: u64,
}

impl SurfacePointCloud {
    pub fn empty(seed: u64) -> Self {
        Self {
            seed,
            ..Default::default()
        }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn push(&mut self, position: Vec3, normal: Vec3, label: PointLabel) {
        self.positions.push(position);
        self.normals.push(normal);
        self.labels.push(label);
    }

    pub fn count(&self, label: PointLabel) -> usize {
        self.labels.iter().filter(|&&l| l == label).count()
    }

    /// Points with the given label, order preserved.
    pub fn filter(&self, label: PointLabel) -> Self {
        let idx: Vec<usize> = (0..self.len()).filter(|&i| self.labels[i] == label).collect();
        self.subset(&idx)
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            positions: indices.iter().map(|&i| self.positions[i]).collect(),
            normals: indices.iter().map(|&i| self.normals[i]).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            seed: self.seed,
        }
    }

    pub fn extend(&mut self, other: &Self) {
        self.positions.extend_from_slice(&other.positions);
        self.normals.extend_from_slice(&other.normals);
        self.labels.extend_from_slice(&other.labels);
    }

    pub fn concat(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.extend(other);
        out
    }
}
