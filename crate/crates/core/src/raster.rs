//! Dense row-major 2D grids of reals and the border/FFT helpers shared by
//! the filtering modules.

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

/// A row-major `height × width` grid of `f64`. Row 0 is the top of the image.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl Raster {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), width * height, "raster data length mismatch");
        Raster {
            width,
            height,
            data,
        }
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        Raster::new(width, height, vec![value; width * height])
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for r in 0..height {
            for c in 0..width {
                data.push(f(r, c));
            }
        }
        Raster::new(width, height, data)
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.width + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.width + c] = v;
    }

    /// Value with symmetric (edge-repeating) mirror padding outside the grid.
    #[inline]
    pub fn get_mirrored(&self, r: isize, c: isize) -> f64 {
        self.get(mirror(r, self.height), mirror(c, self.width))
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.height).map(|r| self.get(r, c)).collect()
    }

    pub fn set_column(&mut self, c: usize, values: &[f64]) {
        for (r, v) in values.iter().enumerate() {
            self.set(r, c, *v);
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Raster {
        Raster::new(self.width, self.height, self.data.iter().map(|&v| f(v)).collect())
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn same_shape(&self, other: &Raster) -> bool {
        self.width == other.width && self.height == other.height
    }

    /// Copy with `pad` pixels of mirror padding on every side.
    pub fn padded(&self, pad_rows: usize, pad_cols: usize) -> Raster {
        let h = self.height + 2 * pad_rows;
        let w = self.width + 2 * pad_cols;
        Raster::from_fn(w, h, |r, c| {
            self.get_mirrored(r as isize - pad_rows as isize, c as isize - pad_cols as isize)
        })
    }

    /// Divide by the maximum; an all-zero (or non-positive) grid maps to zeros.
    pub fn normalized_by_max(&self) -> Raster {
        let m = self.max();
        if m > 0.0 && m.is_finite() {
            self.map(|v| v / m)
        } else {
            Raster::filled(self.width, self.height, 0.0)
        }
    }
}

/// Symmetric mirror index: `... b a | a b c ... y z | z y ...`, valid for any offset.
#[inline]
pub fn mirror(i: isize, n: usize) -> usize {
    debug_assert!(n > 0);
    let n = n as isize;
    let period = 2 * n;
    let mut k = i.rem_euclid(period);
    if k >= n {
        k = period - 1 - k;
    }
    k as usize
}

/// Summed-area table with one row/column of leading zeros.
#[derive(Debug, Clone)]
pub struct IntegralImage {
    width: usize,
    sums: Vec<f64>,
}

impl IntegralImage {
    pub fn new(r: &Raster) -> Self {
        Self::with(r, |v| v)
    }

    pub fn with(r: &Raster, f: impl Fn(f64) -> f64) -> Self {
        let w = r.width() + 1;
        let h = r.height() + 1;
        let mut sums = vec![0.0; w * h];
        for row in 0..r.height() {
            let mut acc = 0.0;
            for col in 0..r.width() {
                acc += f(r.get(row, col));
                sums[(row + 1) * w + col + 1] = sums[row * w + col + 1] + acc;
            }
        }
        IntegralImage { width: w, sums }
    }

    /// Sum over rows `r0..r1` and columns `c0..c1` (half-open).
    #[inline]
    pub fn sum(&self, r0: usize, c0: usize, r1: usize, c1: usize) -> f64 {
        let w = self.width;
        self.sums[r1 * w + c1] - self.sums[r0 * w + c1] - self.sums[r1 * w + c0]
            + self.sums[r0 * w + c0]
    }
}

/// In-place 2D FFT of a row-major complex grid.
pub fn fft2(data: &mut [Complex64], width: usize, height: usize, inverse: bool) {
    let mut planner = FftPlanner::<f64>::new();
    let row_fft = if inverse {
        planner.plan_fft_inverse(width)
    } else {
        planner.plan_fft_forward(width)
    };
    for row in data.chunks_exact_mut(width) {
        row_fft.process(row);
    }
    let col_fft = if inverse {
        planner.plan_fft_inverse(height)
    } else {
        planner.plan_fft_forward(height)
    };
    let mut col = vec![Complex64::new(0.0, 0.0); height];
    for c in 0..width {
        for r in 0..height {
            col[r] = data[r * width + c];
        }
        col_fft.process(&mut col);
        for r in 0..height {
            data[r * width + c] = col[r];
        }
    }
    if inverse {
        let scale = 1.0 / (width * height) as f64;
        for v in data.iter_mut() {
            *v *= scale;
        }
    }
}

/// Signed frequency (cycles per sample) of DFT bin `k` for a length-`n` transform.
#[inline]
pub fn fft_freq(k: usize, n: usize) -> f64 {
    let k = k as isize;
    let n_i = n as isize;
    let signed = if k <= (n_i - 1) / 2 { k } else { k - n_i };
    signed as f64 / n as f64
}

/// 2D convolution with an odd-sized kernel (centered), mirror-padded, via FFT.
///
/// Output pixel `x` is `Σ_k K(k) I(x − k)`.
pub fn convolve_mirror(img: &Raster, kernel: &Raster) -> Raster {
    assert!(kernel.width() % 2 == 1 && kernel.height() % 2 == 1);
    let kr = kernel.height() / 2;
    let kc = kernel.width() / 2;
    let padded = img.padded(kr, kc);
    let (pw, ph) = (padded.width(), padded.height());
    let mut a: Vec<Complex64> = padded.data().iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let mut k = vec![Complex64::new(0.0, 0.0); pw * ph];
    // Place the kernel with its center at the origin (wrapped).
    for r in 0..kernel.height() {
        for c in 0..kernel.width() {
            let rr = (r as isize - kr as isize).rem_euclid(ph as isize) as usize;
            let cc = (c as isize - kc as isize).rem_euclid(pw as isize) as usize;
            k[rr * pw + cc] += Complex64::new(kernel.get(r, c), 0.0);
        }
    }
    fft2(&mut a, pw, ph, false);
    fft2(&mut k, pw, ph, false);
    for (x, y) in a.iter_mut().zip(k.iter()) {
        *x *= *y;
    }
    fft2(&mut a, pw, ph, true);
    Raster::from_fn(img.width(), img.height(), |r, c| a[(r + kr) * pw + c + kc].re)
}
