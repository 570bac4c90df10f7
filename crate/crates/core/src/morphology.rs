//! Binary dilation with a square structuring element.
//!
//! The `r x r` element has its origin at the centre for odd `r` and at the
//! upper-left cell of the central 2x2 block for even `r`, so it spans the
//! offsets `-o ..= r - 1 - o` along each axis with `o = (r - 1) / 2`.
//! Pixel `p` is set in the output when any set input pixel lies in `p`
//! shifted by the element. Neighbourhoods are clipped at the border.

use crate::error::{Error, Result};
use crate::maps::Mask;

/// Offsets `(before, after)` covered by an `r`-wide element along one axis.
pub fn element_extent(r: usize) -> (usize, usize) {
    let o = (r - 1) / 2;
    (o, r - 1 - o)
}

/// One-dimensional running OR over a window `[i - before, i + after]`.
fn dilate_line(input: &[bool], out: &mut [bool], before: usize, after: usize, prefix: &mut Vec<u32>) {
    let n = input.len();
    prefix.clear();
    prefix.push(0);
    for &b in input {
        let last = *prefix.last().unwrap();
        prefix.push(last + b as u32);
    }
    for (i, o) in out.iter_mut().enumerate() {
        let lo = i.saturating_sub(before);
        let hi = (i + after + 1).min(n);
        *o = prefix[hi] > prefix[lo];
    }
}

/// Dilates `mask` by an `r x r` square. Runs in `O(H * W)` via two separable
/// passes of windowed prefix counts.
pub fn dilate(mask: &Mask, r: usize) -> Result<Mask> {
    if r < 1 {
        return Err(Error::Parameter("dilation kernel size must be >= 1".into()));
    }
    let (h, w) = (mask.height(), mask.width());
    let (before, after) = element_extent(r);
    let mut prefix = Vec::with_capacity(h.max(w) + 1);

    let mut rows = vec![false; h * w];
    for y in 0..h {
        let line = &mask.bits()[y * w..(y + 1) * w];
        dilate_line(line, &mut rows[y * w..(y + 1) * w], before, after, &mut prefix);
    }

    let mut out = vec![false; h * w];
    let mut column = vec![false; h];
    let mut column_out = vec![false; h];
    for x in 0..w {
        for y in 0..h {
            column[y] = rows[y * w + x];
        }
        dilate_line(&column, &mut column_out, before, after, &mut prefix);
        for y in 0..h {
            out[y * w + x] = column_out[y];
        }
    }
    Mask::new(h, w, out)
}
