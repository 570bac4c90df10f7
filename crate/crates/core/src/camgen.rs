//! Class attention maps from the classifier head, and their online
//! accumulation across training snapshots.
//!
//! Accumulation is a pointwise running maximum of normalized maps, which
//! makes it a join: commutative, associative and idempotent.

use crate::error::{Error, Result};
use crate::grunit::{classify, FeatureGrid, GrParams};
use crate::maps::AttentionStack;

/// Pointwise maximum of `previous` and `current`; returns `current` when
/// there is no previous map.
pub fn accumulate(previous: Option<&AttentionStack>, current: &AttentionStack) -> Result<AttentionStack> {
    let Some(previous) = previous else {
        return Ok(current.clone());
    };
    previous.check_same_dims(current, "attention accumulation")?;
    let values = previous
        .values()
        .iter()
        .zip(current.values())
        .map(|(a, b)| a.max(*b))
        .collect();
    let (c, h, w) = current.dims();
    let out = AttentionStack::new(c, h, w, values)?;
    Ok(if previous.is_normalized() && current.is_normalized() {
        out.mark_normalized()
    } else {
        out
    })
}

/// Normalized CAM of one set of parameters.
pub fn cam_for(params: &GrParams, x: &FeatureGrid) -> Result<AttentionStack> {
    Ok(classify(params, x)?.cam.normalize())
}

#[derive(Clone, Debug)]
pub struct SnapshotMaps {
    /// Normalized CAM of the last snapshot.
    pub cam: AttentionStack,
    /// Running maximum over every snapshot's normalized CAM.
    pub oacam: AttentionStack,
}

/// CAM of the final snapshot and the accumulated map over the whole series.
///
/// The accumulated map is the maximum of normalized planes, so each plane
/// already lies in `[0, 1]` and peaks at 1 unless it is identically zero. It
/// is not min-max rescaled again: that would lower it below a constituent
/// wherever the accumulated plane has no zero.
pub fn snapshot_series(series: &[GrParams], x: &FeatureGrid) -> Result<SnapshotMaps> {
    if series.is_empty() {
        return Err(Error::Parameter("snapshot series is empty".into()));
    }
    let mut oacam: Option<AttentionStack> = None;
    let mut cam = None;
    for params in series {
        let current = cam_for(params, x)?;
        oacam = Some(accumulate(oacam.as_ref(), &current)?);
        cam = Some(current);
    }
    Ok(SnapshotMaps {
        cam: cam.unwrap(),
        oacam: oacam.unwrap(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stack(v: Vec<f32>) -> AttentionStack {
        AttentionStack::new(1, 1, v.len(), v).unwrap()
    }

    #[test]
    fn seed_identity() {
        let a = stack(vec![0.1, 0.9]);
        assert_eq!(accumulate(None, &a).unwrap(), a);
    }

    #[test]
    fn idempotent() {
        let a = stack(vec![0.1, 0.9]);
        assert_eq!(accumulate(Some(&a), &a).unwrap(), a);
    }

    #[test]
    fn pointwise_max() {
        let a = stack(vec![0.1, 0.9]);
        let b = stack(vec![0.5, 0.2]);
        assert_eq!(accumulate(Some(&a), &b).unwrap().values(), &[0.5, 0.9]);
    }

    #[test]
    fn dims_must_match() {
        let a = stack(vec![0.1, 0.9]);
        let b = stack(vec![0.5]);
        assert!(matches!(accumulate(Some(&a), &b), Err(Error::Shape { .. })));
    }

    #[test]
    fn empty_series() {
        let x = FeatureGrid::new(1, 1, crate::grunit::Mat::zeros(1, 1)).unwrap();
        assert!(matches!(snapshot_series(&[], &x), Err(Error::Parameter(_))));
    }
}
