//! FMAP float-map container.
//!
//! Layout, all integers unsigned 32-bit little-endian:
//!
//! ```text
//! "FMAP" | version=1 | C | H | W | C*H*W binary32 LE values
//! ```
//!
//! Values are channel-major, each channel row-major. Readers reject trailing
//! bytes so that a decode/encode pair is the identity on accepted files.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::maps::AttentionStack;

pub const MAGIC: &[u8; 4] = b"FMAP";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 20;

/// An FMAP payload before any value-domain checks.
#[derive(Clone, Debug, PartialEq)]
pub struct RawFmap {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub values: Vec<f32>,
}

pub(crate) fn read_u32(bytes: &[u8], offset: usize) -> u32 {
    u32::from_le_bytes(bytes[offset..offset + 4].try_into().unwrap())
}

fn dim(bytes: &[u8], offset: usize, field: &'static str) -> Result<usize> {
    match read_u32(bytes, offset) {
        0 => Err(Error::format(field, "dimension is zero")),
        v => Ok(v as usize),
    }
}

pub fn decode(bytes: &[u8]) -> Result<RawFmap> {
    if bytes.len() < HEADER_LEN {
        if bytes.len() < 4 || &bytes[..4] != MAGIC {
            return Err(Error::format("magic", "expected \"FMAP\""));
        }
        return Err(Error::format("header", "truncated header"));
    }
    if &bytes[..4] != MAGIC {
        return Err(Error::format("magic", "expected \"FMAP\""));
    }
    let version = read_u32(bytes, 4);
    if version != VERSION {
        return Err(Error::format(
            "version",
            format!("unsupported version {version}"),
        ));
    }
    let channels = dim(bytes, 8, "C")?;
    let height = dim(bytes, 12, "H")?;
    let width = dim(bytes, 16, "W")?;
    let payload_len = channels
        .checked_mul(height)
        .and_then(|n| n.checked_mul(width))
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| Error::format("dimensions", "C*H*W overflows"))?;
    let payload = &bytes[HEADER_LEN..];
    if payload.len() < payload_len {
        return Err(Error::format(
            "payload",
            format!(
                "truncated payload: expected {payload_len} bytes, found {}",
                payload.len()
            ),
        ));
    }
    if payload.len() > payload_len {
        return Err(Error::format(
            "payload",
            format!("{} trailing bytes", payload.len() - payload_len),
        ));
    }
    let values = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(RawFmap {
        channels,
        height,
        width,
        values,
    })
}

pub fn encode(raw: &RawFmap) -> Result<Vec<u8>> {
    if raw.channels == 0 || raw.height == 0 || raw.width == 0 {
        return Err(Error::Parameter(format!(
            "FMAP dimensions must be nonzero, got {}x{}x{}",
            raw.channels, raw.height, raw.width
        )));
    }
    if raw.values.len() != raw.channels * raw.height * raw.width {
        return Err(Error::shape(
            "FMAP payload",
            raw.channels * raw.height * raw.width,
            raw.values.len(),
        ));
    }
    let to_u32 = |v: usize, field: &'static str| {
        u32::try_from(v).map_err(|_| Error::format(field, "dimension exceeds u32"))
    };
    let mut out = Vec::with_capacity(HEADER_LEN + raw.values.len() * 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&to_u32(raw.channels, "C")?.to_le_bytes());
    out.extend_from_slice(&to_u32(raw.height, "H")?.to_le_bytes());
    out.extend_from_slice(&to_u32(raw.width, "W")?.to_le_bytes());
    for v in &raw.values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn read_raw(path: impl AsRef<Path>) -> Result<RawFmap> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io_at(path, e))?;
    decode(&bytes)
}

pub fn write_raw(raw: &RawFmap, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode(raw)?;
    fs::write(path, bytes).map_err(|e| Error::io_at(path, e))
}

impl From<AttentionStack> for RawFmap {
    fn from(stack: AttentionStack) -> Self {
        let (channels, height, width) = stack.dims();
        RawFmap {
            channels,
            height,
            width,
            values: stack.into_values(),
        }
    }
}

impl TryFrom<RawFmap> for AttentionStack {
    type Error = Error;

    fn try_from(raw: RawFmap) -> Result<Self> {
        AttentionStack::new(raw.channels, raw.height, raw.width, raw.values)
    }
}

pub fn load_fmap(path: impl AsRef<Path>) -> Result<AttentionStack> {
    read_raw(path)?.try_into()
}

pub fn save_fmap(stack: &AttentionStack, path: impl AsRef<Path>) -> Result<()> {
    write_raw(&RawFmap::from(stack.clone()), path)
}
