//! Order statistics used for class-adaptive thresholds.

use crate::error::{Error, Result};

fn sorted(values: &[f32]) -> Vec<f32> {
    let mut v = values.to_vec();
    v.sort_unstable_by(f32::total_cmp);
    v
}

/// Nearest-rank percentile: the smallest value `v` in the input such that at
/// least a fraction `q` of the values are `<= v`, i.e. `sorted[ceil(q*n) - 1]`.
pub fn percentile_nearest_rank(values: &[f32], q: f64) -> Result<f32> {
    if !(q > 0.0 && q <= 1.0) {
        return Err(Error::Parameter(format!("percentile fraction {q} outside (0, 1]")));
    }
    if values.is_empty() {
        return Err(Error::EmptySelection("percentile of an empty set"));
    }
    let s = sorted(values);
    let rank = (q * s.len() as f64).ceil() as usize;
    Ok(s[rank.clamp(1, s.len()) - 1])
}

/// Upper quartile under the nearest-rank convention.
pub fn top_quartile(values: &[f32]) -> Result<f32> {
    percentile_nearest_rank(values, 0.75)
}

/// Median; the mean of the two middle values when the count is even.
pub fn median(values: &[f32]) -> Result<f32> {
    if values.is_empty() {
        return Err(Error::EmptySelection("median of an empty set"));
    }
    let s = sorted(values);
    let n = s.len();
    if n % 2 == 1 {
        Ok(s[n / 2])
    } else {
        Ok(((s[n / 2 - 1] as f64 + s[n / 2] as f64) / 2.0) as f32)
    }
}
