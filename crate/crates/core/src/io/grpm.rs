//! GRPM container for [`GrParams`].
//!
//! `"GRPM"`, version (u32 LE, = 1), then five tensors in the order
//! projection, adjacency, state update, classifier, bias. Each tensor is
//! `rows: u32 LE`, `cols: u32 LE`, then `rows * cols` binary32 LE values in
//! row-major order. The bias is stored as a `C x 1` column.

use std::fs;
use std::path::Path;

use super::fmap::read_u32;
use crate::error::{Error, Result};
use crate::grunit::{GrParams, Mat};

pub const MAGIC: &[u8; 4] = b"GRPM";
pub const VERSION: u32 = 1;

const TENSORS: [&str; 5] = ["projection", "adjacency", "state_update", "classifier", "bias"];

fn put_tensor(out: &mut Vec<u8>, rows: usize, cols: usize, values: &[f64]) -> Result<()> {
    let dim = |v: usize| u32::try_from(v).map_err(|_| Error::format("dimensions", "exceeds u32"));
    out.extend_from_slice(&dim(rows)?.to_le_bytes());
    out.extend_from_slice(&dim(cols)?.to_le_bytes());
    for &v in values {
        let v = v as f32;
        if !v.is_finite() {
            return Err(Error::Parameter("parameter overflows binary32".into()));
        }
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(())
}

pub fn encode(params: &GrParams) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    for m in [
        &params.projection,
        &params.adjacency,
        &params.state_update,
        &params.classifier,
    ] {
        put_tensor(&mut out, m.rows(), m.cols(), m.as_slice())?;
    }
    put_tensor(&mut out, params.bias.len(), 1, &params.bias)?;
    Ok(out)
}

pub fn decode(bytes: &[u8]) -> Result<GrParams> {
    if bytes.len() < 8 || &bytes[..4] != MAGIC {
        return Err(Error::format("magic", "expected \"GRPM\""));
    }
    let version = read_u32(bytes, 4);
    if version != VERSION {
        return Err(Error::format("version", format!("unsupported version {version}")));
    }
    let mut pos = 8;
    let mut mats = Vec::with_capacity(TENSORS.len());
    for name in TENSORS {
        if bytes.len() < pos + 8 {
            return Err(Error::format("header", format!("truncated {name} header")));
        }
        let rows = read_u32(bytes, pos) as usize;
        let cols = read_u32(bytes, pos + 4) as usize;
        pos += 8;
        let len = rows
            .checked_mul(cols)
            .and_then(|n| n.checked_mul(4))
            .ok_or_else(|| Error::format("dimensions", format!("{name} size overflows")))?;
        if bytes.len() < pos + len {
            return Err(Error::format("payload", format!("truncated payload in {name}")));
        }
        let values = bytes[pos..pos + len]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect();
        pos += len;
        mats.push(Mat::from_vec(rows, cols, values)?);
    }
    if pos != bytes.len() {
        return Err(Error::format("payload", format!("{} trailing bytes", bytes.len() - pos)));
    }
    let bias = mats.pop().unwrap();
    if bias.cols() != 1 {
        return Err(Error::format("bias", "expected a single column"));
    }
    let classifier = mats.pop().unwrap();
    let state_update = mats.pop().unwrap();
    let adjacency = mats.pop().unwrap();
    let projection = mats.pop().unwrap();
    GrParams::new(projection, adjacency, state_update, classifier, bias.as_slice().to_vec())
}

pub fn load(path: impl AsRef<Path>) -> Result<GrParams> {
    let path = path.as_ref();
    decode(&fs::read(path).map_err(|e| Error::io_at(path, e))?)
}

pub fn save(params: &GrParams, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode(params)?).map_err(|e| Error::io_at(path, e))
}
