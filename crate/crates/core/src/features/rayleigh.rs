//! How far a patch's intensity histogram is from a maximum-likelihood Rayleigh fit.

use rayon::prelude::*;

use crate::raster::Raster;

/// Distance between the normalized histogram of `values` and the fitted Rayleigh density.
///
/// The histogram spans `[min, max]` of the values in `bins` equal bins; the density,
/// with scale `b̂ = sqrt(Σx²/2n)`, is sampled at bin centers and normalized to sum 1.
/// All-zero and zero-range patches give 0.
pub fn rayleigh_fit_error_patch(values: &[f64], bins: usize) -> f64 {
    let n = values.len();
    if n == 0 || bins == 0 {
        return 0.0;
    }
    let sum_sq: f64 = values.iter().map(|v| v * v).sum();
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if sum_sq == 0.0 || hi - lo <= 1e-12 {
        return 0.0;
    }
    let b2 = sum_sq / (2.0 * n as f64);
    let width = (hi - lo) / bins as f64;

    let mut hist = vec![0.0; bins];
    for &v in values {
        let k = (((v - lo) / width) as usize).min(bins - 1);
        hist[k] += 1.0;
    }
    let pdf: Vec<f64> = (0..bins)
        .map(|k| {
            let x = lo + (k as f64 + 0.5) * width;
            x / b2 * (-x * x / (2.0 * b2)).exp()
        })
        .collect();
    let z: f64 = pdf.iter().sum();
    hist.iter()
        .zip(&pdf)
        .map(|(h, p)| {
            let q = if z > 0.0 { p / z } else { 1.0 / bins as f64 };
            (h / n as f64 - q).powi(2)
        })
        .sum::<f64>()
        .sqrt()
}

/// Per-pixel fit error over `(2·half+1)²` mirror-padded patches.
pub fn rayleigh_fit_error(img: &Raster, half: usize, bins: usize) -> Raster {
    let (w, h) = (img.width(), img.height());
    let padded = img.padded(half, half);
    let side = 2 * half + 1;
    let rows: Vec<Vec<f64>> = (0..h)
        .into_par_iter()
        .map(|r| {
            let mut buf = Vec::with_capacity(side * side);
            (0..w)
                .map(|c| {
                    buf.clear();
                    for dr in 0..side {
                        buf.extend((c..c + side).map(|cc| padded.get(r + dr, cc)));
                    }
                    rayleigh_fit_error_patch(&buf, bins)
                })
                .collect()
        })
        .collect();
    Raster::new(w, h, rows.concat())
}
