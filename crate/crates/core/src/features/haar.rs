//! Center-surround Haar-like features from integral images.

use crate::raster::{IntegralImage, Raster};

/// Inclusive offset range `[lo, hi]` of a box of side `n` centered on a pixel.
/// Even sides extend one further up/left.
#[inline]
pub fn box_offsets(n: usize) -> (isize, isize) {
    let lo = -((n / 2) as isize);
    (lo, lo + n as isize - 1)
}

/// Surround side for center side `s`: `2s`, or `2s+1` for odd `s` to stay concentric.
#[inline]
pub fn surround_side(s: usize) -> usize {
    if s % 2 == 0 {
        2 * s
    } else {
        2 * s + 1
    }
}

/// `mean(surround ring) − mean(center square)` for center side `s`.
pub fn haar_center_surround(img: &Raster, s: usize) -> Raster {
    assert!(s >= 1);
    let outer = surround_side(s);
    let (clo, chi) = box_offsets(s);
    let (olo, ohi) = box_offsets(outer);
    let pad = (-olo).max(ohi) as usize;
    let padded = img.padded(pad, pad);
    let ii = IntegralImage::new(&padded);
    let p = pad as isize;
    let box_sum = |r: isize, c: isize, lo: isize, hi: isize| -> f64 {
        let (r0, c0) = ((r + lo + p) as usize, (c + lo + p) as usize);
        let (r1, c1) = ((r + hi + p + 1) as usize, (c + hi + p + 1) as usize);
        ii.sum(r0, c0, r1, c1)
    };
    let a_center = (s * s) as f64;
    let a_ring = (outer * outer - s * s) as f64;
    Raster::from_fn(img.width(), img.height(), |r, c| {
        let (r, c) = (r as isize, c as isize);
        let center = box_sum(r, c, clo, chi);
        let total = box_sum(r, c, olo, ohi);
        (total - center) / a_ring - center / a_center
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_is_zero() {
        let out = haar_center_surround(&Raster::filled(12, 9, 0.3), 5);
        assert!(out.data().iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn bright_square_is_negative() {
        for s in [2usize, 5] {
            let mut img = Raster::filled(30, 30, 0.1);
            let (lo, hi) = box_offsets(s);
            for r in lo..=hi {
                for c in lo..=hi {
                    img.set((15 + r) as usize, (15 + c) as usize, 0.9);
                }
            }
            assert!(haar_center_surround(&img, s).get(15, 15) < 0.0);
        }
    }

    #[test]
    fn concentric_offsets() {
        assert_eq!(box_offsets(2), (-1, 0));
        assert_eq!(box_offsets(4), (-2, 1));
        assert_eq!(box_offsets(5), (-2, 2));
        assert_eq!(box_offsets(11), (-5, 5));
    }
}
