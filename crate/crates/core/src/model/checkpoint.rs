//! Versioned binary parameter checkpoints.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic     8 bytes  "WSSEGCKP"
//! version   u32      1
//! blocks    u32      number of parameter blocks
//! per block u32 rank, then `rank` u64 dimensions
//! data      f64 x total, blocks in order, row-major
//! meta_len  u32, then meta_len bytes of UTF-8 key=value lines
//! ```
//!
//! Blocks alternate weights (rank 2) and bias (rank 1), input layer first.

use std::path::Path;

use ndarray::{Array1, Array2};

use super::mlp::{Dense, ModelParameters};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"WSSEGCKP";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: ModelParameters,
    /// Free-form `key=value` lines, typically the training schedule.
    pub meta: String,
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(2 * self.params.layers.len() as u32).to_le_bytes());
        for layer in &self.params.layers {
            let (r, c) = layer.weights.dim();
            out.extend_from_slice(&2u32.to_le_bytes());
            out.extend_from_slice(&(r as u64).to_le_bytes());
            out.extend_from_slice(&(c as u64).to_le_bytes());
            out.extend_from_slice(&1u32.to_le_bytes());
            out.extend_from_slice(&(layer.bias.len() as u64).to_le_bytes());
        }
        for v in self.params.iter() {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&(self.meta.len() as u32).to_le_bytes());
        out.extend_from_slice(self.meta.as_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8)? != MAGIC {
            return Err(Error::Data("not a checkpoint: bad magic".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::Data(format!("unsupported checkpoint version {version}")));
        }
        let blocks = r.u32()? as usize;
        if blocks == 0 || blocks % 2 != 0 {
            return Err(Error::Data(format!("checkpoint has {blocks} blocks; expected weight/bias pairs")));
        }
        let mut shapes = Vec::with_capacity(blocks / 2);
        for _ in 0..blocks / 2 {
            if r.u32()? != 2 {
                return Err(Error::Data("weight block must be rank 2".into()));
            }
            let rows = r.u64()? as usize;
            let cols = r.u64()? as usize;
            if r.u32()? != 1 {
                return Err(Error::Data("bias block must be rank 1".into()));
            }
            let len = r.u64()? as usize;
            if len != cols {
                return Err(Error::Data(format!("bias length {len} does not match {cols} outputs")));
            }
            if let Some(&(_, prev_cols)) = shapes.last() {
                if prev_cols != rows {
                    return Err(Error::Data("consecutive layer shapes do not chain".into()));
                }
            }
            shapes.push((rows, cols));
        }
        let mut layers = Vec::with_capacity(shapes.len());
        for (rows, cols) in shapes {
            let weights = (0..rows * cols).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
            let bias = (0..cols).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
            layers.push(Dense {
                weights: Array2::from_shape_vec((rows, cols), weights).expect("sized above"),
                bias: Array1::from(bias),
            });
        }
        let meta_len = r.u32()? as usize;
        let meta = String::from_utf8(r.take(meta_len)?.to_vec())
            .map_err(|_| Error::Data("checkpoint metadata is not UTF-8".into()))?;
        if r.pos != bytes.len() {
            return Err(Error::Data("trailing bytes after checkpoint".into()));
        }
        Ok(Self {
            params: ModelParameters { layers },
            meta,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Data("truncated checkpoint".into()))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}
