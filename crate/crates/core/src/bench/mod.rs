//! Complexity levels, benchmark manifests and per-level metric reports.

mod report;

pub use report::{
    aggregate_report, BenchReport, LevelAggregate, MetricRow, ScaledRow, CHAMFER_SCALE, FSCORE_SCALE, SNE_SCALE,
};

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::mesh::io::load_mesh;
use crate::sampler::detect_salient_edges;

/// Suggested number of shapes per level when curating a benchmark.
pub const TARGET_PER_LEVEL: usize = 800;

/// Complexity level from the number of salient edges `N_Γ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ComplexityLevel {
    L1,
    L2,
    L3,
    L4,
    Unclassified,
}

impl ComplexityLevel {
    pub const RANKED: [ComplexityLevel; 4] = [Self::L1, Self::L2, Self::L3, Self::L4];

    /// `(0, 5000]`, `(5000, 10000]`, `(10000, 50000]`, `(50000, ∞)`; zero is unclassified.
    pub fn classify(n_gamma: usize) -> Self {
        match n_gamma {
            0 => Self::Unclassified,
            1..=5_000 => Self::L1,
            5_001..=10_000 => Self::L2,
            10_001..=50_000 => Self::L3,
            _ => Self::L4,
        }
    }
}

pub fn classify_complexity(n_gamma: usize) -> ComplexityLevel {
    ComplexityLevel::classify(n_gamma)
}

impl fmt::Display for ComplexityLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::L1 => "L1",
            Self::L2 => "L2",
            Self::L3 => "L3",
            Self::L4 => "L4",
            Self::Unclassified => "Unclassified",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub path: PathBuf,
    pub n_gamma: usize,
    pub level: ComplexityLevel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reject {
    pub path: PathBuf,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchManifest {
    pub dataset: String,
    pub tau_deg: f64,
    pub entries: Vec<ManifestEntry>,
    pub rejects: Vec<Reject>,
    pub warnings: Vec<String>,
}

impl BenchManifest {
    pub fn entry(&self, id: &str) -> Option<&ManifestEntry> {
        self.entries.iter().find(|e| e.id == id)
    }

    /// Entry count per level, every level present (zero when empty).
    pub fn level_counts(&self) -> BTreeMap<ComplexityLevel, usize> {
        let mut counts: BTreeMap<ComplexityLevel, usize> = ComplexityLevel::RANKED
            .iter()
            .chain(&[ComplexityLevel::Unclassified])
            .map(|&l| (l, 0))
            .collect();
        for e in &self.entries {
            *counts.entry(e.level).or_default() += 1;
        }
        counts
    }
}

/// Counts salient edges of a mesh after normalizing it to `[-1, 1]`.
pub fn salient_edge_count(path: &Path, tau_deg: f64) -> Result<usize> {
    let mesh = load_mesh(path)?.normalize_to_unit_cube()?;
    Ok(detect_salient_edges(&mesh, tau_deg)?.count())
}

fn unique_id(path: &Path, taken: &mut HashSet<String>) -> String {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "mesh".to_string());
    let mut id = stem.clone();
    let mut k = 2;
    while !taken.insert(id.clone()) {
        id = format!("{stem}-{k}");
        k += 1;
    }
    id
}

/// Computes `N_Γ` and a level per mesh. Load failures become rejects,
/// repeated paths a warning; entries keep input order.
pub fn build_manifest(paths: &[PathBuf], tau_deg: f64, dataset: &str) -> BenchManifest {
    let mut seen = HashSet::new();
    let mut warnings = Vec::new();
    let mut unique = Vec::new();
    for p in paths {
        if seen.insert(p.clone()) {
            unique.push(p.clone());
        } else {
            warnings.push(format!("duplicate path {} ignored", p.display()));
        }
    }
    let counts: Vec<Result<usize>> = unique.par_iter().map(|p| salient_edge_count(p, tau_deg)).collect();
    let mut ids = HashSet::new();
    let mut entries = Vec::new();
    let mut rejects = Vec::new();
    for (path, count) in unique.into_iter().zip(counts) {
        match count {
            Ok(n_gamma) => entries.push(ManifestEntry {
                id: unique_id(&path, &mut ids),
                path,
                n_gamma,
                level: ComplexityLevel::classify(n_gamma),
            }),
            Err(e) => rejects.push(Reject {
                path,
                reason: e.to_string(),
            }),
        }
    }
    BenchManifest {
        dataset: dataset.to_string(),
        tau_deg,
        entries,
        rejects,
        warnings,
    }
}
