//! Fixtures shared by the criterion benchmarks.

use dora_core::mesh::shapes::{self, BumpGridBox};
use dora_core::sampler::sample_uniform;
use dora_core::{TriangleMesh, Vec3};

/// A box with a `slots × slots` grid of keys: many sharp edges, watertight.
pub fn bumpy_mesh(slots: usize) -> TriangleMesh {
    BumpGridBox {
        half_extents: Vec3::new(0.8, 0.7, 0.3),
        slots,
        key_height: 0.1,
        keys: vec![true; slots * slots],
    }
    .mesh()
}

/// `n` points spread over the unit sphere.
pub fn sphere_points(n: usize, seed: u64) -> Vec<Vec3> {
    sample_uniform(&shapes::icosphere(3), n, seed, false)
        .expect("icosphere has area")
        .positions
}
