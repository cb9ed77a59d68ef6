//! Binary erosion/dilation with a square structuring element.
//!
//! Windows are clipped at the frame border rather than padded, so erosion
//! stays anti-extensive and dilation extensive everywhere.

use crate::ForegroundMask;

/// Square window of side `2r + 1`, separable into a row pass and a column pass.
fn window_filter(mask: &ForegroundMask, radius: usize, all: bool) -> ForegroundMask {
    let (w, h) = (mask.width(), mask.height());
    let reduce = |lo: usize, hi: usize, at: &dyn Fn(usize) -> bool| {
        if all {
            (lo..=hi).all(at)
        } else {
            (lo..=hi).any(at)
        }
    };
    let mut rows = vec![false; w * h];
    for y in 0..h {
        for x in 0..w {
            let lo = x.saturating_sub(radius);
            let hi = (x + radius).min(w - 1);
            rows[y * w + x] = reduce(lo, hi, &|xx| mask.get(xx, y));
        }
    }
    let mut out = vec![false; w * h];
    for y in 0..h {
        let lo = y.saturating_sub(radius);
        let hi = (y + radius).min(h - 1);
        for x in 0..w {
            out[y * w + x] = reduce(lo, hi, &|yy| rows[yy * w + x]);
        }
    }
    ForegroundMask::from_bits(w, h, out)
}

pub fn erode(mask: &ForegroundMask, radius: usize) -> ForegroundMask {
    window_filter(mask, radius, true)
}

pub fn dilate(mask: &ForegroundMask, radius: usize) -> ForegroundMask {
    window_filter(mask, radius, false)
}

/// Opening followed by closing. `radius == 0` returns the mask unchanged.
pub fn open_close(mask: &ForegroundMask, radius: usize) -> ForegroundMask {
    if radius == 0 {
        return mask.clone();
    }
    let opened = dilate(&erode(mask, radius), radius);
    erode(&dilate(&opened, radius), radius)
}
