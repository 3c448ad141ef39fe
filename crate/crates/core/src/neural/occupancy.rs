use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Vec3;
use crate::mesh::shapes::AnalyticShape;
use crate::mesh::TriangleMesh;
use crate::sampler::sample_uniform;

/// Default standard deviation of near-surface offsets.
pub const DEFAULT_NEAR_SIGMA: f64 = 0.02;

/// Query points with binary ground-truth occupancy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupancyBatch {
    pub queries: Vec<Vec3>,
    /// 1.0 inside, 0.0 outside.
    pub labels: Vec<f64>,
}

impl OccupancyBatch {
    pub fn len(&self) -> usize {
        self.queries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queries.is_empty()
    }

    pub fn inside_fraction(&self) -> f64 {
        self.labels.iter().sum::<f64>() / self.labels.len().max(1) as f64
    }

    /// The same queries in a seeded random order.
    pub fn shuffled(&self, seed: u64) -> OccupancyBatch {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        OccupancyBatch {
            queries: idx.iter().map(|&i| self.queries[i]).collect(),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    /// Rows `start..start + len`, wrapping around the end.
    pub fn window(&self, start: usize, len: usize) -> OccupancyBatch {
        let n = self.len();
        let idx = (0..len.min(n)).map(|i| (start + i) % n);
        let (queries, labels) = idx.map(|i| (self.queries[i], self.labels[i])).unzip();
        OccupancyBatch { queries, labels }
    }
}

/// Exact inside/outside test used to label queries.
#[derive(Debug, Clone)]
pub enum OccupancyOracle {
    Analytic(AnalyticShape),
    RayParity(TriangleMesh),
}

/// Skewed direction so rays rarely graze edges or vertices of axis-aligned
/// fixtures.
const RAY_DIRS: [[f64; 3]; 3] = [
    [0.577_215_664_9, 0.318_309_886_2, 0.751_988_482_1],
    [-0.412_310_562_6, 0.658_157_215_4, 0.629_960_524_9],
    [0.234_567_890_1, -0.845_123_456_7, 0.480_246_813_5],
];

fn ray_hits_triangle(o: &Vec3, d: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3) -> bool {
    let e1 = b - a;
    let e2 = c - a;
    let p = d.cross(&e2);
    let det = e1.dot(&p);
    if det.abs() < 1e-14 {
        return false;
    }
    let inv = 1.0 / det;
    let s = o - a;
    let u = s.dot(&p) * inv;
    if !(0.0..=1.0).contains(&u) {
        return false;
    }
    let q = s.cross(&e1);
    let v = d.dot(&q) * inv;
    if v < 0.0 || u + v > 1.0 {
        return false;
    }
    e2.dot(&q) * inv > 0.0
}

impl OccupancyOracle {
    /// Ray-parity oracle; the mesh must be watertight.
    pub fn from_mesh(mesh: &TriangleMesh) -> Result<Self> {
        if !mesh.check_watertight().is_watertight {
            return Err(Error::NotWatertight);
        }
        Ok(Self::RayParity(mesh.clone()))
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        match self {
            Self::Analytic(shape) => shape.contains(p),
            Self::RayParity(mesh) => {
                // Majority over three rays guards against a hit landing on
                // a shared edge.
                let votes = RAY_DIRS
                    .iter()
                    .filter(|d| {
                        let d = Vec3::new(d[0], d[1], d[2]);
                        let hits = (0..mesh.face_count())
                            .filter(|&f| {
                                let [a, b, c] = mesh.corners(f);
                                ray_hits_triangle(p, &d, &a, &b, &c)
                            })
                            .count();
                        hits % 2 == 1
                    })
                    .count();
                votes >= 2
            }
        }
    }

    pub fn label(&self, p: &Vec3) -> f64 {
        if self.contains(p) {
            1.0
        } else {
            0.0
        }
    }
}

/// Near-surface and uniform queries labelled by `oracle`.
///
/// Near points are area-uniform surface samples pushed along their normal by
/// `N(0, sigma)`; uniform points are i.i.d. in `[-1, 1]³`. Everything is
/// clamped to the cube.
pub fn sample_queries(
    mesh: &TriangleMesh,
    oracle: &OccupancyOracle,
    n_near: usize,
    n_uniform: usize,
    sigma: f64,
    seed: u64,
) -> Result<OccupancyBatch> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidArgument(format!("sigma must be finite and non-negative, got {sigma}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut queries = Vec::with_capacity(n_near + n_uniform);
    if n_near > 0 {
        let surface = sample_uniform(mesh, n_near, seed, false)?;
        let normal = Normal::new(0.0, sigma).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        for (p, n) in surface.positions.iter().zip(&surface.normals) {
            let q = p + n * normal.sample(&mut rng);
            queries.push(q.map(|c| c.clamp(-1.0, 1.0)));
        }
    }
    for _ in 0..n_uniform {
        queries.push(Vec3::new(
            rng.random_range(-1.0..=1.0),
            rng.random_range(-1.0..=1.0),
            rng.random_range(-1.0..=1.0),
        ));
    }
    let labels = queries.iter().map(|q| oracle.label(q)).collect();
    Ok(OccupancyBatch { queries, labels })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::shapes;

    #[test]
    fn analytic_examples() {
        let sphere = OccupancyOracle::Analytic(AnalyticShape::Sphere {
            center: Vec3::zeros(),
            radius: 1.0,
        });
        assert_eq!(sphere.label(&Vec3::zeros()), 1.0);
        let cube = OccupancyOracle::Analytic(AnalyticShape::Box {
            center: Vec3::zeros(),
            half_extents: Vec3::repeat(0.5),
        });
        assert_eq!(cube.label(&Vec3::repeat(1.0)), 0.0);
        let ray = OccupancyOracle::from_mesh(&shapes::cube()).unwrap();
        assert_eq!(ray.label(&Vec3::repeat(1.0)), 0.0);
    }

    #[test]
    fn ray_parity_agrees_with_analytic_box() {
        let ray = OccupancyOracle::from_mesh(&shapes::cube()).unwrap();
        let exact = OccupancyOracle::Analytic(AnalyticShape::Box {
            center: Vec3::zeros(),
            half_extents: Vec3::repeat(0.5),
        });
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10_000 {
            let p = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            assert_eq!(ray.contains(&p), exact.contains(&p), "{p:?}");
        }
    }

    #[test]
    fn open_mesh_has_no_ray_oracle() {
        assert!(matches!(OccupancyOracle::from_mesh(&shapes::plane_grid(2)), Err(Error::NotWatertight)));
    }

    #[test]
    fn queries_are_deterministic_and_bounded() {
        let mesh = shapes::cube();
        let oracle = OccupancyOracle::from_mesh(&mesh).unwrap();
        let a = sample_queries(&mesh, &oracle, 200, 100, DEFAULT_NEAR_SIGMA, 9).unwrap();
        let b = sample_queries(&mesh, &oracle, 200, 100, DEFAULT_NEAR_SIGMA, 9).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 300);
        assert!(a.queries.iter().all(|q| q.iter().all(|c| c.abs() <= 1.0)));
        // near-surface points straddle the surface roughly evenly
        let near_inside = a.labels[..200].iter().sum::<f64>() / 200.0;
        assert!((0.3..0.7).contains(&near_inside), "{near_inside}");
    }

    #[test]
    fn window_wraps() {
        let b = OccupancyBatch {
            queries: (0..4).map(|i| Vec3::repeat(i as f64)).collect(),
            labels: vec![0.0, 1.0, 0.0, 1.0],
        };
        let w = b.window(3, 2);
        assert_eq!(w.labels, vec![1.0, 0.0]);
        assert_eq!(w.queries[1], Vec3::zeros());
    }
}
