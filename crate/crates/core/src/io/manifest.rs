//! Dataset manifest: one `<image_id>;<comma-separated class ids>` line per
//! image. Blank lines are skipped.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::maps::{ClassId, ImageRecord};

pub const FILE_NAME: &str = "corpus.manifest";

pub fn parse(text: &str) -> Result<Vec<ImageRecord>> {
    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let err = |detail: String| Error::Manifest {
            line: line_no,
            detail,
        };
        let (id, classes) = line
            .split_once(';')
            .ok_or_else(|| err("missing ';' separator".into()))?;
        let classes = classes
            .split(',')
            .map(|c| {
                c.trim()
                    .parse::<ClassId>()
                    .map_err(|_| err(format!("bad class id {c:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        let record = ImageRecord::new(id.trim(), classes).map_err(|e| err(e.to_string()))?;
        if !seen.insert(record.image_id().to_string()) {
            return Err(err(format!("duplicate image id {}", record.image_id())));
        }
        records.push(record);
    }
    Ok(records)
}

pub fn format(records: &[ImageRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&r.to_string());
        out.push('\n');
    }
    out
}

pub fn load(path: impl AsRef<Path>) -> Result<Vec<ImageRecord>> {
    let path = path.as_ref();
    parse(&fs::read_to_string(path).map_err(|e| Error::io_at(path, e))?)
}

pub fn save(records: &[ImageRecord], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, format(records)).map_err(|e| Error::io_at(path, e))
}
