//! Binary netpbm: 8-bit PGM (`P5`) for label and saliency maps, PPM (`P6`)
//! for colorized output. Only `maxval = 255` is accepted.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::maps::{LabelMap, SaliencyMap};

/// Decoded netpbm image; `channels` is 1 for P5 and 3 for P6.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Pnm {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: Vec<u8>,
}

struct HeaderReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> HeaderReader<'a> {
    fn skip_space_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                b if b.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn number(&mut self, field: &'static str) -> Result<usize> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::format(field, "expected a decimal integer"));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .unwrap()
            .parse()
            .map_err(|_| Error::format(field, "integer out of range"))
    }
}

pub fn decode(bytes: &[u8]) -> Result<Pnm> {
    let channels = match bytes.get(..2) {
        Some(b"P5") => 1,
        Some(b"P6") => 3,
        _ => return Err(Error::format("magic", "expected P5 or P6")),
    };
    let mut r = HeaderReader { bytes, pos: 2 };
    let width = r.number("width")?;
    let height = r.number("height")?;
    let maxval = r.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(Error::format("dimensions", "width and height must be nonzero"));
    }
    if maxval != 255 {
        return Err(Error::format("maxval", format!("expected 255, got {maxval}")));
    }
    match bytes.get(r.pos) {
        Some(b) if b.is_ascii_whitespace() => r.pos += 1,
        _ => return Err(Error::format("header", "missing whitespace after maxval")),
    }
    let len = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(channels))
        .ok_or_else(|| Error::format("dimensions", "image size overflows"))?;
    let payload = &bytes[r.pos..];
    if payload.len() < len {
        return Err(Error::format(
            "payload",
            format!("truncated payload: expected {len} bytes, found {}", payload.len()),
        ));
    }
    if payload.len() > len {
        return Err(Error::format(
            "payload",
            format!("{} trailing bytes", payload.len() - len),
        ));
    }
    Ok(Pnm {
        width,
        height,
        channels,
        data: payload.to_vec(),
    })
}

pub fn encode(img: &Pnm) -> Result<Vec<u8>> {
    let magic = match img.channels {
        1 => "P5",
        3 => "P6",
        n => return Err(Error::Parameter(format!("unsupported channel count {n}"))),
    };
    if img.data.len() != img.width * img.height * img.channels {
        return Err(Error::shape(
            "netpbm payload",
            img.width * img.height * img.channels,
            img.data.len(),
        ));
    }
    let mut out = format!("{magic}\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend_from_slice(&img.data);
    Ok(out)
}

pub fn read(path: impl AsRef<Path>) -> Result<Pnm> {
    let path = path.as_ref();
    decode(&fs::read(path).map_err(|e| Error::io_at(path, e))?)
}

pub fn write(img: &Pnm, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode(img)?).map_err(|e| Error::io_at(path, e))
}

fn gray(path: &Path) -> Result<Pnm> {
    let img = read(path)?;
    if img.channels != 1 {
        return Err(Error::format("magic", "expected a P5 graymap"));
    }
    Ok(img)
}

pub fn load_label_map(path: impl AsRef<Path>) -> Result<LabelMap> {
    let img = gray(path.as_ref())?;
    LabelMap::new(img.height, img.width, img.data)
}

pub fn save_label_map(map: &LabelMap, path: impl AsRef<Path>) -> Result<()> {
    write(
        &Pnm {
            width: map.width(),
            height: map.height(),
            channels: 1,
            data: map.labels().to_vec(),
        },
        path,
    )
}

pub fn load_saliency(path: impl AsRef<Path>) -> Result<SaliencyMap> {
    let img = gray(path.as_ref())?;
    SaliencyMap::from_bytes(img.height, img.width, &img.data)
}

pub fn save_saliency(map: &SaliencyMap, path: impl AsRef<Path>) -> Result<()> {
    write(
        &Pnm {
            width: map.width(),
            height: map.height(),
            channels: 1,
            data: map.to_bytes(),
        },
        path,
    )
}
