//! Portable model checkpoints.
//!
//! Layout, all integers and floats little-endian:
//!
//! | offset | size      | field                                   |
//! |--------|-----------|-----------------------------------------|
//! | 0      | 4         | magic `GRSE`                            |
//! | 4      | 4         | format version (`u32`, currently 1)     |
//! | 8      | 4         | users `m` (`u32`)                       |
//! | 12     | 4         | items `n` (`u32`)                       |
//! | 16     | 4         | embedding dim `d` (`u32`)               |
//! | 20     | 4         | layers `L` (`u32`)                      |
//! | 24     | 4·(m+n)·d | base embeddings, row-major `f32`        |

use std::io::{Read, Write};

use ndarray::Array2;

use super::LightGcnModel;
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"GRSE";
pub const CHECKPOINT_VERSION: u32 = 1;

pub fn write_checkpoint<W: Write>(model: &LightGcnModel, mut out: W) -> Result<()> {
    let header = [
        CHECKPOINT_VERSION,
        to_u32(model.num_users())?,
        to_u32(model.num_items())?,
        to_u32(model.dim())?,
        to_u32(model.layers())?,
    ];
    let mut buf = Vec::with_capacity(24 + 4 * model.base_embeddings().len());
    buf.extend_from_slice(&CHECKPOINT_MAGIC);
    for h in header {
        buf.extend_from_slice(&h.to_le_bytes());
    }
    for &v in model.base_embeddings().iter() {
        buf.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out.write_all(&buf)?;
    Ok(())
}

pub fn read_checkpoint<R: Read>(mut input: R) -> Result<LightGcnModel> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    if bytes.len() < 24 {
        return Err(Error::Checkpoint("truncated header".into()));
    }
    if bytes[..4] != CHECKPOINT_MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let word = |k: usize| u32::from_le_bytes(bytes[4 * k..4 * k + 4].try_into().expect("4 bytes"));
    let version = word(1);
    if version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let (m, n, d, layers) = (word(2) as usize, word(3) as usize, word(4) as usize, word(5) as usize);
    let expected = 24 + 4 * (m + n) * d;
    if bytes.len() != expected {
        return Err(Error::Checkpoint(format!(
            "expected {expected} bytes, found {}",
            bytes.len()
        )));
    }
    let values: Vec<f64> = bytes[24..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
        .collect();
    let base = Array2::from_shape_vec((m + n, d), values).map_err(|e| Error::Checkpoint(e.to_string()))?;
    LightGcnModel::new(m, n, layers, base)
}

fn to_u32(v: usize) -> Result<u32> {
    u32::try_from(v).map_err(|_| Error::Checkpoint(format!("{v} does not fit in u32")))
}
