use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::Args;
use serde::{Deserialize, Serialize};

use dora_core::mesh::io::load_mesh;
use dora_core::sampler::{
    detect_salient_edges, io as cloud_io, SalientCase, sample_uniform, ses_sample_detailed, SesConfig, DEFAULT_N_DESIRED, DEFAULT_N_TOTAL,
    DEFAULT_TAU_DEG,
};
use dora_core::PointLabel;

use crate::error::{CliError, CliResult};
use crate::output::{emit_json, hash_inputs, write_file, Document};
use crate::Context;

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct SampleArgs {
    /// Input mesh (OBJ or PLY).
    pub mesh: Option<PathBuf>,
    /// Output point cloud: `.ply` (binary, with a per-point label) or `.bin`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Statistics JSON; printed to stdout when omitted.
    #[arg(long)]
    pub stats: Option<PathBuf>,
    /// Total points, salient and uniform together.
    #[arg(long, default_value_t = DEFAULT_N_TOTAL)]
    pub n_total: usize,
    /// Target number of salient points.
    #[arg(long, default_value_t = DEFAULT_N_DESIRED)]
    pub n_desired: usize,
    /// Dihedral angle threshold in degrees.
    #[arg(long, default_value_t = DEFAULT_TAU_DEG)]
    pub tau: f64,
    /// Sampling seed.
    #[arg(long, env = "DORA_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Sample uniformly only, without salient points.
    #[arg(long)]
    pub uniform: bool,
    /// Thin an oversampled set by sample elimination instead of plain area sampling.
    #[arg(long)]
    pub blue_noise: bool,
    /// Keep the mesh coordinates instead of normalizing to [-1, 1].
    #[arg(long)]
    pub no_normalize: bool,
}

#[derive(Debug, Serialize)]
struct Timings {
    load_ms: f64,
    sample_ms: f64,
}

#[derive(Debug, Serialize)]
struct SampleStats {
    n_gamma: usize,
    salient_vertices: usize,
    case: Option<SalientCase>,
    salient_points: usize,
    uniform_points: usize,
    total_points: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    timings: Option<Timings>,
}

enum CloudFormat {
    Ply,
    Binary,
}

fn cloud_format(path: &Path) -> CliResult<CloudFormat> {
    match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
        Some("ply") => Ok(CloudFormat::Ply),
        Some("bin") => Ok(CloudFormat::Binary),
        _ => Err(CliError::user(format!("{}: output must end in .ply or .bin", path.display()))),
    }
}

fn ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

pub fn run(args: &SampleArgs, ctx: &Context) -> CliResult<()> {
    let mesh_path = args.mesh.as_deref().ok_or_else(|| CliError::user("sample needs an input mesh"))?;
    let out = args.out.as_deref().ok_or_else(|| CliError::user("sample needs --out"))?;
    let format = cloud_format(out)?;
    if args.n_desired > args.n_total {
        return Err(CliError::user(format!(
            "--n-desired ({}) exceeds --n-total ({})",
            args.n_desired, args.n_total
        )));
    }

    let t = Instant::now();
    let mut mesh = load_mesh(mesh_path)?;
    if !args.no_normalize {
        mesh = mesh.normalize_to_unit_cube()?;
    }
    let load_ms = ms(t);

    let t = Instant::now();
    let (cloud, n_gamma, salient_vertices, case) = if args.uniform {
        let set = detect_salient_edges(&mesh, args.tau)?;
        let cloud = sample_uniform(&mesh, args.n_total, args.seed, args.blue_noise)?;
        (cloud, set.count(), set.vertices().len(), None)
    } else {
        let config = SesConfig {
            n_total: args.n_total,
            n_desired: args.n_desired,
            tau_deg: args.tau,
            blue_noise: args.blue_noise,
        };
        let o = ses_sample_detailed(&mesh, &config, args.seed)?;
        (o.cloud, o.salient_edges, o.salient_vertices, Some(o.case))
    };
    let sample_ms = ms(t);

    let bytes = match format {
        CloudFormat::Ply => cloud_io::to_ply_bytes(&cloud),
        CloudFormat::Binary => cloud_io::to_binary_bytes(&cloud),
    };
    write_file(out, &bytes)?;

    let stats = SampleStats {
        n_gamma,
        salient_vertices,
        case,
        salient_points: cloud.count(PointLabel::Salient),
        uniform_points: cloud.count(PointLabel::Uniform),
        total_points: cloud.len(),
        timings: (!ctx.reproducible).then_some(Timings { load_ms, sample_ms }),
    };
    log::info!("{} points ({} salient) -> {}", cloud.len(), stats.salient_points, out.display());
    let doc = Document::new("sample", args, hash_inputs([mesh_path])?, stats, ctx.reproducible);
    emit_json(&doc, args.stats.as_deref())
}
