use serde::{Deserialize, Serialize};

use super::{
    detect_salient_edges, sample_salient, sample_uniform, SalientCase, SurfacePointCloud, DEFAULT_N_DESIRED,
    DEFAULT_N_TOTAL, DEFAULT_TAU_DEG,
};
use crate::error::{Error, Result};
use crate::mesh::TriangleMesh;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SesConfig {
    /// Total points `|P_d|`, salient and uniform together.
    pub n_total: usize,
    /// Target salient point count.
    pub n_desired: usize,
    pub tau_deg: f64,
    pub blue_noise: bool,
}

impl Default for SesConfig {
    fn default() -> Self {
        Self {
            n_total: DEFAULT_N_TOTAL,
            n_desired: DEFAULT_N_DESIRED,
            tau_deg: DEFAULT_TAU_DEG,
            blue_noise: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SesOutput {
    /// Uniform points first, then salient points.
    pub cloud: SurfacePointCloud,
    pub salient_edges: usize,
    pub salient_vertices: usize,
    pub case: SalientCase,
}

/// Sharp Edge Sampling: `P_d = P_u ∪ P_a` with `|P_d| = n_total`.
pub fn ses_sample(mesh: &TriangleMesh, n_total: usize, n_desired: usize, tau_deg: f64, seed: u64) -> Result<SurfacePointCloud> {
    let config = SesConfig {
        n_total,
        n_desired,
        tau_deg,
        blue_noise: false,
    };
    Ok(ses_sample_detailed(mesh, &config, seed)?.cloud)
}

pub fn ses_sample_detailed(mesh: &TriangleMesh, config: &SesConfig, seed: u64) -> Result<SesOutput> {
    if config.n_desired > config.n_total {
        return Err(Error::InvalidArgument(format!(
            "n_desired ({}) exceeds n_total ({})",
            config.n_desired, config.n_total
        )));
    }
    let set = detect_salient_edges(mesh, config.tau_deg)?;
    let (salient, case) = sample_salient(mesh, &set, config.n_desired, seed)?;
    assert!(salient.len() <= config.n_total, "salient points exceed the total budget");
    let n_uniform = config.n_total - salient.len();
    let mut cloud = if n_uniform > 0 {
        sample_uniform(mesh, n_uniform, seed, config.blue_noise)?
    } else {
        SurfacePointCloud::empty(seed)
    };
    cloud.extend(&salient);
    cloud.seed = seed;
    Ok(SesOutput {
        cloud,
        salient_edges: set.count(),
        salient_vertices: set.vertices().len(),
        case,
    })
}
