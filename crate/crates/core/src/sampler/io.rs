//! Point cloud serialization.
//!
//! PLY output is `binary_little_endian` with per-vertex
//! `float x y z nx ny nz` and `uchar label` (0 = uniform, 1 = salient).
//!
//! The native binary layout, all little-endian:
//!
//! | bytes        | content                          |
//! |--------------|----------------------------------|
//! | 4            | magic `DORA`                     |
//! | 4            | format version (`u32`, = 1)      |
//! | 8            | point count `n` (`u64`)          |
//! | 8            | salient point count (`u64`)      |
//! | 8            | sampling seed (`u64`)            |
//! | 12 n         | positions, `f32` xyz             |
//! | 12 n         | normals, `f32` xyz               |
//! | n            | labels, `u8`                     |

use std::fs;
use std::path::Path;

use super::{PointLabel, SurfacePointCloud};
use crate::error::{Error, Result};
use crate::geom::Vec3;

pub const MAGIC: &[u8; 4] = b"DORA";
pub const FORMAT_VERSION: u32 = 1;

pub fn to_ply_bytes(cloud: &SurfacePointCloud) -> Vec<u8> {
    let header = format!(
        "ply\nformat binary_little_endian 1.0\ncomment seed {}\nelement vertex {}\n\
property float x\nproperty float y\nproperty float z\n\
property float nx\nproperty float ny\nproperty float nz\n\
property uchar label\nend_header\n",
        cloud.seed,
        cloud.len()
    );
    let mut out = header.into_bytes();
    out.reserve(cloud.len() * 25);
    for i in 0..cloud.len() {
        for c in cloud.positions[i].iter().chain(cloud.normals[i].iter()) {
            out.extend_from_slice(&(*c as f32).to_le_bytes());
        }
        out.push(cloud.labels[i] as u8);
    }
    out
}

/// Reads back what [`to_ply_bytes`] writes.
pub fn from_ply_bytes(bytes: &[u8]) -> Result<SurfacePointCloud> {
    let marker = b"end_header\n";
    let end = bytes
        .windows(marker.len())
        .position(|w| w == marker)
        .ok_or_else(|| Error::InvalidBinary("missing PLY end_header".into()))?;
    let header = String::from_utf8_lossy(&bytes[..end]);
    if !header.contains("format binary_little_endian") || !header.contains("property uchar label") {
        return Err(Error::InvalidBinary("unsupported point cloud PLY layout".into()));
    }
    let mut count = None;
    let mut seed = 0;
    for line in header.lines() {
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks.as_slice() {
            ["element", "vertex", n] => count = n.parse::<usize>().ok(),
            ["comment", "seed", s] => seed = s.parse().unwrap_or(0),
            _ => {}
        }
    }
    let n = count.ok_or_else(|| Error::InvalidBinary("missing vertex count".into()))?;
    let body = &bytes[end + marker.len()..];
    if body.len() != n * 25 {
        return Err(Error::InvalidBinary(format!("expected {} body bytes, found {}", n * 25, body.len())));
    }
    let mut cloud = SurfacePointCloud::empty(seed);
    for rec in body.chunks_exact(25) {
        let f = |k: usize| f32::from_le_bytes(rec[4 * k..4 * k + 4].try_into().unwrap()) as f64;
        let label = PointLabel::from_u8(rec[24]).ok_or_else(|| Error::InvalidBinary("bad label".into()))?;
        cloud.push(Vec3::new(f(0), f(1), f(2)), Vec3::new(f(3), f(4), f(5)), label);
    }
    Ok(cloud)
}

pub fn to_binary_bytes(cloud: &SurfacePointCloud) -> Vec<u8> {
    let n = cloud.len();
    let mut out = Vec::with_capacity(32 + n * 25);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(n as u64).to_le_bytes());
    out.extend_from_slice(&(cloud.count(PointLabel::Salient) as u64).to_le_bytes());
    out.extend_from_slice(&cloud.seed.to_le_bytes());
    for v in cloud.positions.iter().chain(&cloud.normals) {
        for c in v.iter() {
            out.extend_from_slice(&(*c as f32).to_le_bytes());
        }
    }
    out.extend(cloud.labels.iter().map(|&l| l as u8));
    out
}

pub fn from_binary_bytes(bytes: &[u8]) -> Result<SurfacePointCloud> {
    let bad = |m: &str| Error::InvalidBinary(m.to_string());
    if bytes.len() < 32 || &bytes[..4] != MAGIC {
        return Err(bad("missing DORA magic"));
    }
    let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(Error::InvalidBinary(format!("unsupported version {version}")));
    }
    let n = u64_at(8) as usize;
    let salient = u64_at(16) as usize;
    let seed = u64_at(24);
    if bytes.len() != 32 + n * 25 {
        return Err(bad("truncated point cloud"));
    }
    let floats = |o: usize, i: usize| {
        let at = |k: usize| f32::from_le_bytes(bytes[o + 12 * i + 4 * k..o + 12 * i + 4 * k + 4].try_into().unwrap()) as f64;
        Vec3::new(at(0), at(1), at(2))
    };
    let mut cloud = SurfacePointCloud::empty(seed);
    let label_off = 32 + 24 * n;
    for i in 0..n {
        let label = PointLabel::from_u8(bytes[label_off + i]).ok_or_else(|| bad("bad label"))?;
        cloud.push(floats(32, i), floats(32 + 12 * n, i), label);
    }
    if cloud.count(PointLabel::Salient) != salient {
        return Err(bad("salient count does not match labels"));
    }
    Ok(cloud)
}

pub fn write_ply(cloud: &SurfacePointCloud, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, to_ply_bytes(cloud)).map_err(|e| Error::io(path, e))
}

pub fn write_binary(cloud: &SurfacePointCloud, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, to_binary_bytes(cloud)).map_err(|e| Error::io(path, e))
}

pub fn read_binary(path: impl AsRef<Path>) -> Result<SurfacePointCloud> {
    let path = path.as_ref();
    from_binary_bytes(&fs::read(path).map_err(|e| Error::io(path, e))?)
}

pub fn read_ply(path: impl AsRef<Path>) -> Result<SurfacePointCloud> {
    let path = path.as_ref();
    from_ply_bytes(&fs::read(path).map_err(|e| Error::io(path, e))?)
}
