//! File formats: FMAP float maps, netpbm label/saliency/colour images,
//! dataset manifests and GRPM parameter files.

pub mod fmap;
pub mod grpm;
pub mod manifest;
pub mod pnm;

use std::path::Path;

use crate::error::{Error, Result};
use crate::grunit::{FeatureGrid, Mat};

pub use fmap::{load_fmap, save_fmap, RawFmap};
pub use pnm::{load_label_map, load_saliency, save_label_map, save_saliency};

/// Reads an FMAP whose channels are feature dimensions into an `L x K` grid.
pub fn load_features(path: impl AsRef<Path>) -> Result<FeatureGrid> {
    let raw = fmap::read_raw(path)?;
    let l = raw.height * raw.width;
    let mut m = Mat::zeros(l, raw.channels);
    for k in 0..raw.channels {
        for i in 0..l {
            m[(i, k)] = raw.values[k * l + i] as f64;
        }
    }
    FeatureGrid::new(raw.height, raw.width, m)
}

pub fn save_features(grid: &FeatureGrid, path: impl AsRef<Path>) -> Result<()> {
    let (l, k) = grid.features().shape();
    let mut values = Vec::with_capacity(l * k);
    for c in 0..k {
        values.extend((0..l).map(|i| grid.features()[(i, c)] as f32));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Parameter("features overflow binary32".into()));
    }
    fmap::write_raw(
        &RawFmap {
            channels: k,
            height: grid.height(),
            width: grid.width(),
            values,
        },
        path,
    )
}
