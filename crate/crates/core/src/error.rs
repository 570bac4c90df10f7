use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),

    #[error("i/o error on {path}: {source}")]
    IoAt {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    /// Malformed file contents. `field` names the header field or section
    /// that failed to parse.
    #[error("format error in {field}: {detail}")]
    Format { field: &'static str, detail: String },

    #[error("shape mismatch in {context}: expected {expected}, got {actual}")]
    Shape {
        context: &'static str,
        expected: String,
        actual: String,
    },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("empty selection: {0}")]
    EmptySelection(&'static str),

    #[error("invalid label {label} (class count {class_count})")]
    InvalidLabel { label: u8, class_count: u8 },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("metric undefined: every class has an empty union")]
    UndefinedMetric,

    #[error("training diverged at epoch {epoch}: loss {loss}")]
    Divergence { epoch: usize, loss: f64 },

    #[error("manifest line {line}: {detail}")]
    Manifest { line: usize, detail: String },

    #[error("image {image_id}: {source}")]
    Image {
        image_id: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn format(field: &'static str, detail: impl Into<String>) -> Self {
        Error::Format {
            field,
            detail: detail.into(),
        }
    }

    pub(crate) fn shape(
        context: &'static str,
        expected: impl std::fmt::Display,
        actual: impl std::fmt::Display,
    ) -> Self {
        Error::Shape {
            context,
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }

    pub(crate) fn io_at(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::IoAt {
            path: path.into(),
            source,
        }
    }

    /// Wraps `self` with the image it was raised for.
    pub fn for_image(self, image_id: &str) -> Self {
        Error::Image {
            image_id: image_id.to_string(),
            source: Box::new(self),
        }
    }
}
