//! Square-patch statistics (mean, median, spread, shape, entropy, energy).

use rayon::prelude::*;

use crate::raster::{IntegralImage, Raster};

/// The eight per-pixel patch statistics for one patch size.
#[derive(Debug, Clone)]
pub struct PatchStats {
    pub mean: Raster,
    pub median: Raster,
    pub variance: Raster,
    pub std: Raster,
    pub skewness: Raster,
    pub kurtosis: Raster,
    pub entropy: Raster,
    pub energy: Raster,
}

/// Variance at or below this is treated as zero (skewness and kurtosis become 0).
pub const ZERO_VARIANCE: f64 = 1e-12;

/// Histogram bin of an intensity in `[0,1]`.
#[inline]
pub fn intensity_bin(v: f64, bins: usize) -> usize {
    ((v * bins as f64) as usize).min(bins - 1)
}

/// Shannon entropy (bits) of a histogram with `n` total counts.
pub fn entropy_bits(hist: &[u32], n: usize) -> f64 {
    let n = n as f64;
    let mut h = 0.0;
    for &count in hist {
        if count > 0 {
            let p = count as f64 / n;
            h -= p * p.log2();
        }
    }
    // Avoid -0.0 for single-bin histograms.
    h.max(0.0)
}

/// Standardized skewness and non-excess kurtosis from central moments.
pub fn shape_moments(m2: f64, m3: f64, m4: f64) -> (f64, f64) {
    if m2 <= ZERO_VARIANCE {
        (0.0, 0.0)
    } else {
        (m3 / m2.powf(1.5), m4 / (m2 * m2))
    }
}

/// Moment-based statistics of one patch size.
#[derive(Debug, Clone)]
pub struct PatchMoments {
    pub mean: Raster,
    pub variance: Raster,
    pub std: Raster,
    pub skewness: Raster,
    pub kurtosis: Raster,
    pub energy: Raster,
}

/// Mean, variance, std, skewness, kurtosis and energy from integral images of `x..x⁴`.
pub fn patch_moments(img: &Raster, half: usize) -> PatchMoments {
    let (w, h) = (img.width(), img.height());
    let side = 2 * half + 1;
    let nf = (side * side) as f64;
    let padded = img.padded(half, half);
    let sums: Vec<IntegralImage> = (1..=4)
        .map(|k| IntegralImage::with(&padded, |v| v.powi(k)))
        .collect();

    let mut mean = Raster::filled(w, h, 0.0);
    let mut variance = mean.clone();
    let mut std = mean.clone();
    let mut skewness = mean.clone();
    let mut kurtosis = mean.clone();
    let mut energy = mean.clone();
    for r in 0..h {
        for c in 0..w {
            let s: Vec<f64> = sums.iter().map(|ii| ii.sum(r, c, r + side, c + side)).collect();
            let mu = s[0] / nf;
            let e2 = s[1] / nf;
            let e3 = s[2] / nf;
            let e4 = s[3] / nf;
            let m2 = (e2 - mu * mu).max(0.0);
            let m3 = e3 - 3.0 * mu * e2 + 2.0 * mu.powi(3);
            let m4 = e4 - 4.0 * mu * e3 + 6.0 * mu * mu * e2 - 3.0 * mu.powi(4);
            let (sk, ku) = shape_moments(m2, m3, m4.max(0.0));
            mean.set(r, c, mu);
            variance.set(r, c, m2);
            std.set(r, c, m2.sqrt());
            skewness.set(r, c, sk);
            kurtosis.set(r, c, ku);
            energy.set(r, c, s[1]);
        }
    }
    PatchMoments {
        mean,
        variance,
        std,
        skewness,
        kurtosis,
        energy,
    }
}

/// Per-pixel patch median.
pub fn patch_median(img: &Raster, half: usize) -> Raster {
    let (w, h) = (img.width(), img.height());
    let side = 2 * half + 1;
    let padded = img.padded(half, half);
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
                    median_in_place(&mut buf)
                })
                .collect()
        })
        .collect();
    Raster::new(w, h, rows.concat())
}

/// Per-pixel Shannon entropy (bits) of the `bins`-bin patch histogram over `[0,1]`.
pub fn patch_entropy(img: &Raster, half: usize, bins: usize) -> Raster {
    let (w, h) = (img.width(), img.height());
    let side = 2 * half + 1;
    let n = side * side;
    let padded = img.padded(half, half);
    let bin: Vec<usize> = padded.data().iter().map(|&v| intensity_bin(v, bins)).collect();
    let pw = padded.width();
    let rows: Vec<Vec<f64>> = (0..h)
        .into_par_iter()
        .map(|r| {
            let mut hist = vec![0u32; bins];
            for dr in 0..side {
                for dc in 0..side {
                    hist[bin[(r + dr) * pw + dc]] += 1;
                }
            }
            let mut row = Vec::with_capacity(w);
            for c in 0..w {
                if c > 0 {
                    // Slide the window one column to the right.
                    for dr in 0..side {
                        hist[bin[(r + dr) * pw + c - 1]] -= 1;
                        hist[bin[(r + dr) * pw + c + side - 1]] += 1;
                    }
                }
                row.push(entropy_bits(&hist, n));
            }
            row
        })
        .collect();
    Raster::new(w, h, rows.concat())
}

/// All eight statistics over `(2·half+1)²` patches with mirror padding.
pub fn patch_statistics(img: &Raster, half: usize, entropy_bins: usize) -> PatchStats {
    let m = patch_moments(img, half);
    PatchStats {
        mean: m.mean,
        median: patch_median(img, half),
        variance: m.variance,
        std: m.std,
        skewness: m.skewness,
        kurtosis: m.kurtosis,
        entropy: patch_entropy(img, half, entropy_bins),
        energy: m.energy,
    }
}

/// Median (mean of the two middle values for even counts). Reorders `v`.
pub fn median_in_place(v: &mut [f64]) -> f64 {
    let n = v.len();
    let mid = n / 2;
    let (lower, m, _) = v.select_nth_unstable_by(mid, f64::total_cmp);
    let upper = *m;
    if n % 2 == 1 {
        upper
    } else {
        let lower_max = lower.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lower_max + upper)
    }
}
