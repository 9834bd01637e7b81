//! Statistics along scanlines (image columns).

use crate::raster::{mirror, Raster};

/// Discrete order-`order` Gaussian derivative kernel, indexed `k = -R..=R` with `R = ceil(4σ)`.
///
/// The kernel is `k^p g(k)` / `k^(p+2) g(k)` combined so that its discrete moments match
/// the continuous derivative exactly: `Σ K(k) (−k)^j / j! = δ_{j,order}` for all `j ≤ order`.
/// Polynomials of degree `< order` are therefore annihilated and a degree-`order`
/// monomial is differentiated exactly.
pub fn gaussian_derivative_kernel(sigma: f64, order: usize) -> Vec<f64> {
    assert!(order <= 3, "derivative order must be 0..=3");
    let radius = (4.0 * sigma).ceil() as isize;
    let ks: Vec<f64> = (-radius..=radius).map(|k| k as f64).collect();
    let g: Vec<f64> = ks
        .iter()
        .map(|k| (-(k * k) / (2.0 * sigma * sigma)).exp())
        .collect();
    let moment = |m: i32| -> f64 { ks.iter().zip(&g).map(|(k, gv)| k.powi(m) * gv).sum() };
    let p = (order % 2) as i32;
    let basis = |a: f64, b: f64| -> Vec<f64> {
        ks.iter()
            .zip(&g)
            .map(|(k, gv)| (a * k.powi(p) + b * k.powi(p + 2)) * gv)
            .collect()
    };
    match order {
        0 => basis(1.0 / moment(0), 0.0),
        1 => basis(-1.0 / moment(2), 0.0),
        2 => {
            // a·M0 + b·M2 = 0, (a·M2 + b·M4)/2 = 1
            let (a, b) = solve2(moment(0), moment(2), moment(2), moment(4), 0.0, 2.0);
            basis(a, b)
        }
        _ => {
            // a·M2 + b·M4 = 0, −(a·M4 + b·M6)/6 = 1
            let (a, b) = solve2(moment(2), moment(4), moment(4), moment(6), 0.0, -6.0);
            basis(a, b)
        }
    }
}

fn solve2(a11: f64, a12: f64, a21: f64, a22: f64, b1: f64, b2: f64) -> (f64, f64) {
    let det = a11 * a22 - a12 * a21;
    ((b1 * a22 - a12 * b2) / det, (a11 * b2 - a21 * b1) / det)
}

/// Per-column convolution with a Gaussian-derivative kernel (mirror padding at column ends).
pub fn cw_local_statistics(img: &Raster, sigma: f64, order: usize) -> Raster {
    let kernel = gaussian_derivative_kernel(sigma, order);
    let radius = (kernel.len() / 2) as isize;
    // Correlating the mirrored column with the reversed kernel is the convolution.
    let rev: Vec<f64> = kernel.iter().rev().copied().collect();
    let h = img.height();
    let mut out = Raster::filled(img.width(), h, 0.0);
    let mut padded = vec![0.0; h + 2 * radius as usize];
    for c in 0..img.width() {
        for (j, v) in padded.iter_mut().enumerate() {
            *v = img.get(mirror(j as isize - radius, h), c);
        }
        for r in 0..h {
            out.set(r, c, dot(&rev, &padded[r..r + rev.len()]));
        }
    }
    out
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for k in 0..4 {
            acc[k] += x[k] * y[k];
        }
    }
    acc.iter().sum::<f64>() + tail
}

/// Sum, mean and population standard deviation of each pixel and everything below it.
pub fn cw_cumulative(img: &Raster) -> (Raster, Raster, Raster) {
    let (w, h) = (img.width(), img.height());
    let mut sum = Raster::filled(w, h, 0.0);
    let mut mean = sum.clone();
    let mut std = sum.clone();
    for c in 0..w {
        let mut acc = 0.0;
        let mut mu = 0.0;
        let mut m2 = 0.0;
        for (n, r) in (0..h).rev().enumerate() {
            let x = img.get(r, c);
            acc += x;
            // Welford update.
            let delta = x - mu;
            mu += delta / (n + 1) as f64;
            m2 += delta * (x - mu);
            sum.set(r, c, acc);
            mean.set(r, c, mu);
            std.set(r, c, (m2.max(0.0) / (n + 1) as f64).sqrt());
        }
    }
    (sum, mean, std)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_moments_are_exact() {
        for order in 0..=3 {
            let k = gaussian_derivative_kernel(1.7, order);
            let radius = (k.len() / 2) as f64;
            for j in 0..=order {
                let fact: f64 = (1..=j).map(|x| x as f64).product();
                let m: f64 = k
                    .iter()
                    .enumerate()
                    .map(|(i, kv)| kv * (-(i as f64 - radius)).powi(j as i32) / fact)
                    .sum();
                let want = if j == order { 1.0 } else { 0.0 };
                assert!((m - want).abs() < 1e-12, "order {order} moment {j}: {m}");
            }
        }
    }

    #[test]
    fn constant_column() {
        let img = Raster::filled(2, 30, 0.3);
        for order in 0..=3 {
            let out = cw_local_statistics(&img, 2.0, order);
            let want = if order == 0 { 0.3 } else { 0.0 };
            assert!(out.data().iter().all(|v| (v - want).abs() < 1e-12));
        }
    }

    #[test]
    fn cumulative_of_short_column() {
        let img = Raster::new(1, 3, vec![0.4, 0.2, 0.0]);
        let (s, m, sd) = cw_cumulative(&img);
        assert!((m.get(0, 0) - 0.2).abs() < 1e-15);
        assert!((s.get(0, 0) - 0.6).abs() < 1e-15);
        assert_eq!(sd.get(2, 0), 0.0);
        assert_eq!(m.get(2, 0), 0.0);
    }
}
