//! Random-walk confidence map and the attenuation/shadowing maps derived from it.

use crate::error::{Error, Result};
use crate::imagecore::Image;
use crate::raster::Raster;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfMapParams {
    /// Depth attenuation.
    pub alpha: f64,
    /// Edge sensitivity.
    pub beta: f64,
    /// Penalty for lateral movement.
    pub gamma: f64,
}

impl Default for ConfMapParams {
    fn default() -> Self {
        ConfMapParams {
            alpha: 2.0,
            beta: 90.0,
            gamma: 0.06,
        }
    }
}

/// Weight floor keeping the random walk connected across strong edges.
const WEIGHT_FLOOR: f64 = 1e-6;
const RESIDUAL_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceMap {
    pub values: Raster,
    pub params: ConfMapParams,
}

/// One lattice edge between pixel `a` and a neighbor `b`, with its lateral length.
struct Edge {
    a: (usize, usize),
    b: (usize, usize),
    lateral: f64,
}

fn lattice_edges(w: usize, h: usize) -> Vec<Edge> {
    let mut edges = Vec::new();
    for r in 0..h {
        for c in 0..w {
            // Right, down, down-right, down-left: each undirected edge once.
            if c + 1 < w {
                edges.push(Edge { a: (r, c), b: (r, c + 1), lateral: 1.0 });
            }
            if r + 1 < h {
                edges.push(Edge { a: (r, c), b: (r + 1, c), lateral: 0.0 });
                if c + 1 < w {
                    edges.push(Edge { a: (r, c), b: (r + 1, c + 1), lateral: std::f64::consts::SQRT_2 });
                }
                if c > 0 {
                    edges.push(Edge { a: (r, c), b: (r + 1, c - 1), lateral: std::f64::consts::SQRT_2 });
                }
                // Diagonals leaving the image are mirrored back onto the column itself.
                if c == 0 {
                    edges.push(Edge { a: (r, c), b: (r + 1, c), lateral: std::f64::consts::SQRT_2 });
                }
                if c + 1 == w {
                    edges.push(Edge { a: (r, c), b: (r + 1, c), lateral: std::f64::consts::SQRT_2 });
                }
            }
        }
    }
    edges
}

/// Symmetric positive-definite banded matrix stored by lower diagonals.
struct BandMatrix {
    n: usize,
    band: usize,
    /// `lower[i * (band + 1) + k]` holds entry `(i, i − k)`.
    lower: Vec<f64>,
}

impl BandMatrix {
    fn new(n: usize, band: usize) -> Self {
        BandMatrix { n, band, lower: vec![0.0; n * (band + 1)] }
    }

    fn add(&mut self, i: usize, j: usize, v: f64) {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        debug_assert!(i - j <= self.band);
        self.lower[i * (self.band + 1) + (i - j)] += v;
    }

    fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        if i - j > self.band {
            0.0
        } else {
            self.lower[i * (self.band + 1) + (i - j)]
        }
    }

    fn mul(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for i in 0..self.n {
            for k in 0..=self.band.min(i) {
                let j = i - k;
                let v = self.lower[i * (self.band + 1) + k];
                y[i] += v * x[j];
                if k > 0 {
                    y[j] += v * x[i];
                }
            }
        }
        y
    }

    /// In-place banded Cholesky; returns the factor `L` in the same layout.
    fn cholesky(&self) -> Result<BandMatrix> {
        let b = self.band;
        let mut l = BandMatrix::new(self.n, b);
        for i in 0..self.n {
            let j0 = i.saturating_sub(b);
            for j in j0..=i {
                let mut s = self.get(i, j);
                let k0 = j0.max(j.saturating_sub(b));
                for k in k0..j {
                    s -= l.lower[i * (b + 1) + (i - k)] * l.lower[j * (b + 1) + (j - k)];
                }
                if i == j {
                    if s <= 0.0 || !s.is_finite() {
                        return Err(Error::Solver(format!(
                            "matrix not positive definite at pivot {i} ({s:e})"
                        )));
                    }
                    l.lower[i * (b + 1)] = s.sqrt();
                } else {
                    l.lower[i * (b + 1) + (i - j)] = s / l.lower[j * (b + 1)];
                }
            }
        }
        Ok(l)
    }

    /// Solve `L Lᵀ x = rhs` given the Cholesky factor in `self`.
    fn cholesky_solve(&self, rhs: &[f64]) -> Vec<f64> {
        let b = self.band;
        let mut y = rhs.to_vec();
        for i in 0..self.n {
            for k in 1..=b.min(i) {
                y[i] -= self.lower[i * (b + 1) + k] * y[i - k];
            }
            y[i] /= self.lower[i * (b + 1)];
        }
        for i in (0..self.n).rev() {
            for k in 1..=b.min(self.n - 1 - i) {
                y[i] -= self.lower[(i + k) * (b + 1) + k] * y[i + k];
            }
            y[i] /= self.lower[i * (b + 1)];
        }
        y
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Edge weights `exp(−β(d + γ·lateral)) + floor`, where `d` is the attenuated intensity
/// difference normalized by its maximum over the image.
fn edge_weights(img: &Raster, params: &ConfMapParams, edges: &[Edge]) -> Vec<f64> {
    let h = img.height();
    let denom = (h - 1).max(1) as f64;
    let g = Raster::from_fn(img.width(), h, |r, c| {
        img.get(r, c) * (-params.alpha * r as f64 / denom).exp()
    });
    let diffs: Vec<f64> = edges
        .iter()
        .map(|e| (g.get(e.a.0, e.a.1) - g.get(e.b.0, e.b.1)).abs())
        .collect();
    let max = diffs.iter().copied().fold(0.0, f64::max);
    edges
        .iter()
        .zip(diffs)
        .map(|(e, d)| {
            let d = if max > 0.0 { d / max } else { 0.0 };
            (-params.beta * (d + params.gamma * e.lateral)).exp() + WEIGHT_FLOOR
        })
        .collect()
}

/// Solve the random-walk Dirichlet problem: top row 1, bottom row 0.
pub fn confidence_map(img: &Image, params: &ConfMapParams) -> Result<ConfidenceMap> {
    let px = img.pixels();
    let (w, h) = (px.width(), px.height());
    if h < 2 {
        return Err(Error::invalid("confidence map needs at least 2 rows"));
    }
    let mut values = Raster::filled(w, h, 0.0);
    for c in 0..w {
        values.set(0, c, 1.0);
    }
    let inner = h - 2;
    if inner == 0 {
        return Ok(ConfidenceMap { values, params: *params });
    }

    // Number unknowns along the shorter axis to keep the band narrow.
    let row_major = w <= inner;
    let index = |r: usize, c: usize| -> usize {
        if row_major {
            (r - 1) * w + c
        } else {
            c * inner + (r - 1)
        }
    };
    let band = if row_major { w + 1 } else { inner + 1 };
    let n = inner * w;
    let mut a = BandMatrix::new(n, band);
    let mut rhs = vec![0.0; n];

    let edges = lattice_edges(w, h);
    let weights = edge_weights(px, params, &edges);
    let is_unknown = |r: usize| r >= 1 && r + 1 < h;
    let boundary_value = |r: usize| if r == 0 { 1.0 } else { 0.0 };
    for (e, &wt) in edges.iter().zip(&weights) {
        let (ua, ub) = (is_unknown(e.a.0), is_unknown(e.b.0));
        if ua {
            let i = index(e.a.0, e.a.1);
            a.add(i, i, wt);
            if ub {
                a.add(i, index(e.b.0, e.b.1), -wt);
            } else {
                rhs[i] += wt * boundary_value(e.b.0);
            }
        }
        if ub {
            let j = index(e.b.0, e.b.1);
            a.add(j, j, wt);
            if !ua {
                rhs[j] += wt * boundary_value(e.a.0);
            }
        }
    }

    let l = a.cholesky()?;
    let mut x = l.cholesky_solve(&rhs);
    let bnorm = norm(&rhs).max(f64::MIN_POSITIVE);
    let residual = |x: &[f64]| -> Vec<f64> {
        a.mul(x).iter().zip(&rhs).map(|(ax, b)| b - ax).collect()
    };
    let mut res = residual(&x);
    if norm(&res) / bnorm > RESIDUAL_TOL {
        // One step of iterative refinement.
        let dx = l.cholesky_solve(&res);
        for (xi, d) in x.iter_mut().zip(dx) {
            *xi += d;
        }
        res = residual(&x);
    }
    let rel = norm(&res) / bnorm;
    if !(rel <= RESIDUAL_TOL) {
        return Err(Error::Solver(format!(
            "confidence map residual {rel:e} exceeds {RESIDUAL_TOL:e}"
        )));
    }
    for r in 1..h - 1 {
        for c in 0..w {
            values.set(r, c, x[index(r, c)].clamp(0.0, 1.0));
        }
    }
    Ok(ConfidenceMap { values, params: *params })
}

/// Minimum over the `(2·half+1)²` window clamped to the image (equal to the minimum
/// over the mirror-padded window, since mirroring only repeats in-window values).
pub fn window_min(m: &Raster, half: usize) -> Raster {
    let (w, h) = (m.width(), m.height());
    let horiz = Raster::from_fn(w, h, |r, c| {
        let lo = c.saturating_sub(half);
        let hi = (c + half).min(w - 1);
        (lo..=hi).map(|cc| m.get(r, cc)).fold(f64::INFINITY, f64::min)
    });
    Raster::from_fn(w, h, |r, c| {
        let lo = r.saturating_sub(half);
        let hi = (r + half).min(h - 1);
        (lo..=hi).map(|rr| horiz.get(rr, c)).fold(f64::INFINITY, f64::min)
    })
}

/// Denominator clamp for the shadowing ratio.
pub const SHADOW_EPS: f64 = 1e-6;
/// Offset inside the logarithm of the log-shadowing map.
pub const LOG_EPS: f64 = 1e-6;

/// `Σᵢ (m − min_wᵢ m)`, divided by its maximum (all zeros if the maximum is 0).
pub fn attenuation_cps(cm: &Raster, half_widths: &[usize]) -> Raster {
    let mut sum = Raster::filled(cm.width(), cm.height(), 0.0);
    for &hw in half_widths {
        let mins = window_min(cm, hw);
        for (s, (m, lo)) in sum.data_mut().iter_mut().zip(cm.data().iter().zip(mins.data())) {
            *s += m - lo;
        }
    }
    sum.normalized_by_max()
}

/// `Σᵢ m / max(min_wᵢ m, ε)` divided by its maximum, and `ln(S + ε)`.
pub fn shadowing_cps(cm: &Raster, half_widths: &[usize]) -> (Raster, Raster) {
    let mut sum = Raster::filled(cm.width(), cm.height(), 0.0);
    for &hw in half_widths {
        let mins = window_min(cm, hw);
        for (s, (m, lo)) in sum.data_mut().iter_mut().zip(cm.data().iter().zip(mins.data())) {
            *s += m / lo.max(SHADOW_EPS);
        }
    }
    let s = sum.normalized_by_max();
    let log = s.map(|v| (v + LOG_EPS).ln());
    (s, log)
}

/// The four random-walk features.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomWalkFeatures {
    pub confidence: Raster,
    pub attenuation: Raster,
    pub shadowing: Raster,
    pub log_shadowing: Raster,
}

impl RandomWalkFeatures {
    pub fn compute(img: &Image, params: &ConfMapParams, cps_scales: &[f64]) -> Result<Self> {
        let cm = confidence_map(img, params)?;
        Ok(Self::from_confidence(img, cm.values, cps_scales))
    }

    pub fn from_confidence(img: &Image, confidence: Raster, cps_scales: &[f64]) -> Self {
        let halves = cps_half_widths(img, cps_scales);
        let attenuation = attenuation_cps(&confidence, &halves);
        let (shadowing, log_shadowing) = shadowing_cps(&confidence, &halves);
        RandomWalkFeatures {
            confidence,
            attenuation,
            shadowing,
            log_shadowing,
        }
    }

    pub fn check_dims(&self, width: usize, height: usize) -> Result<()> {
        for m in [&self.confidence, &self.attenuation, &self.shadowing, &self.log_shadowing] {
            if m.width() != width || m.height() != height {
                return Err(Error::dims(
                    format!("{width}x{height}"),
                    format!("{}x{}", m.width(), m.height()),
                ));
            }
        }
        Ok(())
    }
}

/// Window half-widths in pixels for scales given in wavelengths.
pub fn cps_half_widths(img: &Image, scales: &[f64]) -> Vec<usize> {
    scales.iter().map(|&s| img.wavelengths_to_px(s)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn attenuation_single_column() {
        let cm = Raster::new(1, 3, vec![1.0, 0.5, 0.0]);
        let a = attenuation_cps(&cm, &[1]);
        assert_eq!(a.data(), &[1.0, 1.0, 0.0]);
    }

    #[test]
    fn constant_map_features() {
        let cm = Raster::filled(5, 5, 0.4);
        assert!(attenuation_cps(&cm, &[1, 2]).data().iter().all(|&v| v == 0.0));
        let (s, _) = shadowing_cps(&cm, &[1, 2]);
        assert!(s.data().iter().all(|&v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn zero_in_window_stays_finite() {
        let cm = Raster::new(1, 3, vec![1.0, 0.5, 0.0]);
        let (s, l) = shadowing_cps(&cm, &[1]);
        assert!(s.data().iter().chain(l.data()).all(|v| v.is_finite()));
    }

    #[test]
    fn band_cholesky_solves() {
        // Tridiagonal [2 -1; -1 2 -1; -1 2]
        let mut a = BandMatrix::new(3, 1);
        for i in 0..3 {
            a.add(i, i, 2.0);
        }
        a.add(1, 0, -1.0);
        a.add(2, 1, -1.0);
        let x = a.cholesky().unwrap().cholesky_solve(&[1.0, 0.0, 1.0]);
        for v in x {
            assert!((v - 1.0).abs() < 1e-14);
        }
    }
}
