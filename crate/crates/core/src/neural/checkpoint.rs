//! Little-endian checkpoint layout:
//!
//! ```text
//! magic            8 bytes  "DORAVAE\0"
//! version          u32      1
//! width, heads, encoder_layers, decoder_layers, frequencies   u32 each
//! include_normals  u8
//! latent_width     u32
//! dual             u8
//! tensor count     u32
//! per tensor:      u32 rows, u32 cols, rows*cols f64 (row-major)
//! ```
//!
//! Tensors follow the model's flat parameter order.

use std::path::Path;

use ndarray::Array2;

use super::model::{EncoderConfig, Model};
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"DORAVAE\0";
pub const CHECKPOINT_VERSION: u32 = 1;

pub fn to_checkpoint_bytes(model: &Model) -> Vec<u8> {
    let c = &model.config;
    let mut out = Vec::with_capacity(64 + model.params.scalar_count() * 8);
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    for v in [c.width, c.heads, c.encoder_layers, c.decoder_layers, c.frequencies] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    out.push(c.include_normals as u8);
    out.extend_from_slice(&(c.latent_width as u32).to_le_bytes());
    out.push(model.is_dual() as u8);
    out.extend_from_slice(&(model.params.len() as u32).to_le_bytes());
    for t in model.params.values() {
        out.extend_from_slice(&(t.nrows() as u32).to_le_bytes());
        out.extend_from_slice(&(t.ncols() as u32).to_le_bytes());
        for v in t.iter() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::InvalidBinary("truncated checkpoint".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

pub fn from_checkpoint_bytes(bytes: &[u8]) -> Result<Model> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(8)? != CHECKPOINT_MAGIC {
        return Err(Error::InvalidBinary("bad checkpoint magic".into()));
    }
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::InvalidBinary(format!("unsupported checkpoint version {version}")));
    }
    let width = r.u32()? as usize;
    let heads = r.u32()? as usize;
    let encoder_layers = r.u32()? as usize;
    let decoder_layers = r.u32()? as usize;
    let frequencies = r.u32()? as usize;
    let include_normals = r.u8()? != 0;
    let latent_width = r.u32()? as usize;
    let dual = r.u8()? != 0;
    let config = EncoderConfig {
        width,
        heads,
        encoder_layers,
        decoder_layers,
        frequencies,
        include_normals,
        latent_width,
    };
    let mut model = Model::new(config, dual, 0)?;
    let count = r.u32()? as usize;
    if count != model.params.len() {
        return Err(Error::InvalidBinary(format!(
            "checkpoint has {count} tensors, layout expects {}",
            model.params.len()
        )));
    }
    let mut values = Vec::with_capacity(count);
    for _ in 0..count {
        let rows = r.u32()? as usize;
        let cols = r.u32()? as usize;
        let data = (0..rows * cols).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
        values.push(Array2::from_shape_vec((rows, cols), data).expect("length matches shape"));
    }
    if r.pos != bytes.len() {
        return Err(Error::InvalidBinary("trailing bytes after checkpoint".into()));
    }
    model
        .params
        .load_values(values)
        .map_err(|e| Error::InvalidBinary(e.to_string()))?;
    Ok(model)
}

pub fn save_checkpoint(model: &Model, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, to_checkpoint_bytes(model)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Model> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    from_checkpoint_bytes(&bytes)
}
