#![allow(dead_code)]

use bonetrace::boost::{FeatureInfo, RowSource, TrainingSet};
use bonetrace::confmap::ConfMapParams;
use bonetrace::raster::Raster;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_raster(seed: u64, w: usize, h: usize) -> Raster {
    let mut rng = rng(seed);
    Raster::from_fn(w, h, |_, _| rng.random_range(0.0..1.0))
}

/// Reflect-with-edge-repeat index, written out case by case.
pub fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    let j = if i < 0 {
        -i - 1
    } else if i >= n {
        2 * n - 1 - i
    } else {
        i
    };
    assert!((0..n).contains(&j), "pad wider than image");
    j as usize
}

pub fn at(img: &Raster, r: isize, c: isize) -> f64 {
    img.get(reflect(r, img.height()), reflect(c, img.width()))
}

/// [mean, median, variance, std, skewness, kurtosis, entropy, energy] of one patch.
pub fn naive_patch_stats(img: &Raster, r: usize, c: usize, half: usize, bins: usize) -> [f64; 8] {
    let h = half as isize;
    let mut v = Vec::new();
    for dr in -h..=h {
        for dc in -h..=h {
            v.push(at(img, r as isize + dr, c as isize + dc));
        }
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let central = |p: i32| v.iter().map(|x| (x - mean).powi(p)).sum::<f64>() / n;
    let (m2, m3, m4) = (central(2), central(3), central(4));
    let (skew, kurt) = if m2 <= 1e-12 { (0.0, 0.0) } else { (m3 / m2.powf(1.5), m4 / (m2 * m2)) };
    let mut sorted = v.clone();
    sorted.sort_by(f64::total_cmp);
    let median = sorted[sorted.len() / 2];
    let mut hist = vec![0usize; bins];
    for x in &v {
        hist[((x * bins as f64).floor() as usize).min(bins - 1)] += 1;
    }
    let entropy = -hist
        .iter()
        .filter(|&&k| k > 0)
        .map(|&k| {
            let p = k as f64 / n;
            p * p.log2()
        })
        .sum::<f64>();
    let energy = v.iter().map(|x| x * x).sum();
    [mean, median, m2, m2.sqrt(), skew, kurt, entropy, energy]
}

/// (sum, mean, std) of rows r..h of column c.
pub fn naive_cumulative(img: &Raster, r: usize, c: usize) -> (f64, f64, f64) {
    let v: Vec<f64> = (r..img.height()).map(|rr| img.get(rr, c)).collect();
    let n = v.len() as f64;
    let sum: f64 = v.iter().sum();
    let mean = sum / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (sum, mean, var.sqrt())
}

fn box_mean(img: &Raster, r: usize, c: usize, side: usize) -> (f64, f64) {
    let lo = -((side / 2) as isize);
    let mut s = 0.0;
    for dr in lo..lo + side as isize {
        for dc in lo..lo + side as isize {
            s += at(img, r as isize + dr, c as isize + dc);
        }
    }
    (s, (side * side) as f64)
}

/// Surround ring mean minus center square mean, by direct summation.
pub fn naive_haar(img: &Raster, r: usize, c: usize, s: usize) -> f64 {
    let outer = if s % 2 == 0 { 2 * s } else { 2 * s + 1 };
    let (sc, ac) = box_mean(img, r, c, s);
    let (so, ao) = box_mean(img, r, c, outer);
    (so - sc) / (ao - ac) - sc / ac
}

fn naive_window_min(m: &Raster, r: usize, c: usize, half: usize) -> f64 {
    let h = half as isize;
    let mut lo = f64::INFINITY;
    for dr in -h..=h {
        for dc in -h..=h {
            lo = lo.min(at(m, r as isize + dr, c as isize + dc));
        }
    }
    lo
}

fn normalize_max(v: Vec<f64>, w: usize, h: usize) -> Raster {
    let m = v.iter().copied().fold(0.0, f64::max);
    Raster::new(w, h, v.into_iter().map(|x| if m > 0.0 { x / m } else { 0.0 }).collect())
}

pub fn naive_attenuation(m: &Raster, halves: &[usize]) -> Raster {
    let (w, h) = (m.width(), m.height());
    let mut v = Vec::new();
    for r in 0..h {
        for c in 0..w {
            v.push(halves.iter().map(|&k| m.get(r, c) - naive_window_min(m, r, c, k)).sum());
        }
    }
    normalize_max(v, w, h)
}

pub fn naive_shadowing(m: &Raster, halves: &[usize]) -> Raster {
    let (w, h) = (m.width(), m.height());
    let mut v = Vec::new();
    for r in 0..h {
        for c in 0..w {
            v.push(halves.iter().map(|&k| m.get(r, c) / naive_window_min(m, r, c, k).max(1e-6)).sum());
        }
    }
    normalize_max(v, w, h)
}

/// Confidence of the two middle-row pixels of a 2-wide, 3-high image, from the
/// hand-assembled 2×2 Laplacian system.
pub fn hand_confidence_2x3(px: [[f64; 2]; 3], p: &ConfMapParams) -> (f64, f64) {
    let g = |r: usize, c: usize| px[r][c] * (-p.alpha * r as f64 / 2.0).exp();
    // Every undirected 8-neighbour edge of the 2×3 lattice with its lateral length.
    let s2 = std::f64::consts::SQRT_2;
    let mut edges = Vec::new();
    for r in 0..3 {
        edges.push(((r, 0), (r, 1), 1.0));
    }
    for r in 0..2 {
        edges.push(((r, 0), (r + 1, 0), 0.0));
        edges.push(((r, 1), (r + 1, 1), 0.0));
        edges.push(((r, 0), (r + 1, 1), s2));
        edges.push(((r, 1), (r + 1, 0), s2));
        // Mirrored diagonals at the two lateral borders.
        edges.push(((r, 0), (r + 1, 0), s2));
        edges.push(((r, 1), (r + 1, 1), s2));
    }
    let diffs: Vec<f64> = edges.iter().map(|&(a, b, _)| (g(a.0, a.1) - g(b.0, b.1)).abs()).collect();
    let dmax = diffs.iter().copied().fold(0.0, f64::max);
    let weight = |k: usize| {
        let d = if dmax > 0.0 { diffs[k] / dmax } else { 0.0 };
        (-p.beta * (d + p.gamma * edges[k].2)).exp() + 1e-6
    };
    // Unknowns x0 = (1,0), x1 = (1,1); row 0 is 1 and row 2 is 0.
    let (mut a, mut b) = ([[0.0; 2]; 2], [0.0; 2]);
    let value = |r: usize| if r == 0 { 1.0 } else { 0.0 };
    for (k, &(pa, pb, _)) in edges.iter().enumerate() {
        let wk = weight(k);
        for (me, other) in [(pa, pb), (pb, pa)] {
            if me.0 != 1 {
                continue;
            }
            a[me.1][me.1] += wk;
            if other.0 == 1 {
                a[me.1][other.1] -= wk;
            } else {
                b[me.1] += wk * value(other.0);
            }
        }
    }
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    ((b[0] * a[1][1] - a[0][1] * b[1]) / det, (a[0][0] * b[1] - a[1][0] * b[0]) / det)
}

/// Speckled image with a bright, gently curved horizontal line; returns the line row per column.
pub fn line_image(seed: u64, w: usize, h: usize) -> (Raster, Vec<f64>) {
    let mut rng = rng(seed);
    let base = rng.random_range(0.3..0.7) * h as f64;
    let amp = rng.random_range(0.0..4.0);
    let phase = rng.random_range(0.0..std::f64::consts::TAU);
    let rows: Vec<f64> = (0..w)
        .map(|c| (base + amp * (std::f64::consts::TAU * c as f64 / w as f64 + phase).sin()).round())
        .collect();
    let img = Raster::from_fn(w, h, |r, c| {
        let d = r as f64 - rows[c];
        let line = 0.8 * (-d * d / 2.0).exp();
        (0.1 * rng.random_range(0.0..1.0) + line).min(1.0)
    });
    (img, rows)
}

fn features(n: usize, per_group: usize) -> Vec<FeatureInfo> {
    (0..n)
        .map(|j| FeatureInfo { name: format!("f{j}"), group: format!("g{}", j / per_group) })
        .collect()
}

/// Noise features in groups of two; feature `planted` carries the label (with 10% flips).
pub fn planted_set(seed: u64, n: usize, n_features: usize, planted: usize) -> TrainingSet {
    let mut rng = rng(seed);
    let mut ts = TrainingSet::new(features(n_features, 2));
    for i in 0..n {
        let mut row: Vec<f64> = (0..n_features).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut label = (row[planted] > 0.0) as u8;
        if rng.random_bool(0.1) {
            label ^= 1;
        }
        row[planted] += if label == 1 { 0.2 } else { -0.2 };
        ts.push(&row, label, RowSource { image: 0, row: i, col: 0 }).unwrap();
    }
    ts
}

/// Linearly separable two-feature data with a margin.
pub fn separable_set(seed: u64, n: usize) -> TrainingSet {
    let mut rng = rng(seed);
    let mut ts = TrainingSet::new(features(2, 1));
    for i in 0..n {
        let label = (i % 2) as u8;
        let x0 = if label == 1 { rng.random_range(0.6..1.0) } else { rng.random_range(0.0..0.4) };
        ts.push(&[x0, rng.random_range(0.0..1.0)], label, RowSource { image: 0, row: i, col: 0 }).unwrap();
    }
    ts
}
