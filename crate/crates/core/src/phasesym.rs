//! Log-Gabor filter bank, phase symmetry and the bone-responsive edge factor.

use std::f64::consts::{FRAC_PI_2, PI};

use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::features::patch::median_in_place;
use crate::raster::{fft2, fft_freq, Raster};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsConfig {
    /// Orientation count `N_r`.
    pub n_orient: usize,
    /// Scale count `N_m`.
    pub n_scales: usize,
    /// Center wavelength `λ_PS = 2π/ω0` in pixels.
    pub lambda_px: f64,
    /// Ratio `κ/ω0` of the log-radial bandwidth.
    pub kappa_ratio: f64,
    /// Angular bandwidth σ_φ in radians.
    pub sigma_phi: f64,
    /// Half-angle of orientation coverage `∠_PS`.
    pub half_angle: f64,
    /// Noise threshold multiplier τ.
    pub noise_factor: f64,
    pub epsilon: f64,
    /// Decay `σ0` of `f_PS`.
    pub sigma0: f64,
    /// Wavelength multiplier between consecutive scales.
    pub scale_mult: f64,
}

impl Default for PsConfig {
    fn default() -> Self {
        PsConfig {
            n_orient: 3,
            n_scales: 1,
            lambda_px: 25.0,
            kappa_ratio: 0.25,
            sigma_phi: PI / 6.0,
            half_angle: PI / 3.0,
            noise_factor: 1.0,
            epsilon: 1e-4,
            sigma0: 0.01,
            scale_mult: 2.1,
        }
    }
}

impl PsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_orient == 0 || self.n_scales == 0 {
            return Err(Error::invalid("ps.n_orient and ps.n_scales must be >= 1"));
        }
        if !(self.lambda_px >= 2.0) {
            return Err(Error::invalid(format!("ps.lambda_px must be >= 2, got {}", self.lambda_px)));
        }
        if !(self.sigma0 > 0.0) {
            return Err(Error::invalid("ps.sigma0 must be > 0"));
        }
        if !(self.kappa_ratio > 0.0 && self.kappa_ratio < 1.0) {
            return Err(Error::invalid("ps.kappa_ratio must be in (0,1)"));
        }
        if !(self.sigma_phi > 0.0) || !(self.epsilon > 0.0) || !(self.scale_mult > 1.0) {
            return Err(Error::invalid("ps.sigma_phi, ps.epsilon must be > 0 and ps.scale_mult > 1"));
        }
        Ok(())
    }
}

/// Filter orientations `φ_r`, symmetric about π/2 (the depth axis).
pub fn orientation_schedule(n_orient: usize, half_angle: f64) -> Vec<f64> {
    if n_orient <= 1 {
        return vec![FRAC_PI_2];
    }
    (0..n_orient)
        .map(|r| FRAC_PI_2 - half_angle + 2.0 * r as f64 * half_angle / (n_orient - 1) as f64)
        .collect()
}

/// Wrapped angular distance in `[0, π]`.
fn angle_dist(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(2.0 * PI);
    d.min(2.0 * PI - d)
}

/// Log-Gabor transfer function at angular frequency `omega` and angle `phi`.
pub fn log_gabor_value(omega: f64, phi: f64, omega0: f64, kappa_ratio: f64, phi_r: f64, sigma_phi: f64) -> f64 {
    if omega <= 0.0 {
        return 0.0;
    }
    let radial = -(omega / omega0).ln().powi(2) / (2.0 * kappa_ratio.ln().powi(2));
    let angular = -angle_dist(phi, phi_r).powi(2) / (2.0 * sigma_phi * sigma_phi);
    (radial + angular).exp()
}

/// One filter of the bank evaluated on the DFT grid of a `width × height` image.
///
/// Angles are measured with the row (depth) frequency as the second axis, so
/// `φ = π/2` points down the scanlines. The DC bin is 0.
pub fn log_gabor_filter(width: usize, height: usize, omega0: f64, phi_r: f64, cfg: &PsConfig) -> Vec<f64> {
    let mut g = vec![0.0; width * height];
    for r in 0..height {
        let fy = fft_freq(r, height);
        for c in 0..width {
            let fx = fft_freq(c, width);
            let omega = 2.0 * PI * fx.hypot(fy);
            let phi = fy.atan2(fx);
            g[r * width + c] = log_gabor_value(omega, phi, omega0, cfg.kappa_ratio, phi_r, cfg.sigma_phi);
        }
    }
    g
}

/// Center frequencies of the bank, finest scale first.
pub fn scale_frequencies(cfg: &PsConfig) -> Vec<f64> {
    (0..cfg.n_scales)
        .map(|m| 2.0 * PI / (cfg.lambda_px * cfg.scale_mult.powi(m as i32)))
        .collect()
}

/// Even and odd responses of one filter: `e + i·o = I * F⁻¹(G)`.
///
/// The image is mirror-extended to twice its size before filtering.
pub fn filter_response(img: &Raster, omega0: f64, phi_r: f64, cfg: &PsConfig) -> (Raster, Raster) {
    let (w, h) = (img.width(), img.height());
    let (pw, ph) = (2 * w, 2 * h);
    // The filter has no DC response; removing the mean first keeps constant images exactly 0.
    let (lo, hi) = (img.min(), img.max());
    let mean = if lo == hi { lo } else { img.data().iter().sum::<f64>() / img.len() as f64 };
    let mut buf: Vec<Complex64> = (0..ph)
        .flat_map(|r| {
            (0..pw).map(move |c| {
                let rr = if r < h { r } else { 2 * h - 1 - r };
                let cc = if c < w { c } else { 2 * w - 1 - c };
                (rr, cc)
            })
        })
        .map(|(r, c)| Complex64::new(img.get(r, c) - mean, 0.0))
        .collect();
    fft2(&mut buf, pw, ph, false);
    let g = log_gabor_filter(pw, ph, omega0, phi_r, cfg);
    for (v, gv) in buf.iter_mut().zip(&g) {
        *v *= gv;
    }
    fft2(&mut buf, pw, ph, true);
    let even = Raster::from_fn(w, h, |r, c| buf[r * pw + c].re);
    let odd = Raster::from_fn(w, h, |r, c| buf[r * pw + c].im);
    (even, odd)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PsMap {
    pub raw: Raster,
    pub normalized: Raster,
    /// Per-image normalizer `Z_PS` (max of `raw`, 0 if `raw ≡ 0`).
    pub z: f64,
}

/// Phase symmetry summed over orientations and scales.
pub fn phase_symmetry(img: &Raster, cfg: &PsConfig) -> Result<PsMap> {
    cfg.validate()?;
    let (w, h) = (img.width(), img.height());
    let mut num = Raster::filled(w, h, 0.0);
    let mut den = Raster::filled(w, h, 0.0);
    let omegas = scale_frequencies(cfg);
    for phi_r in orientation_schedule(cfg.n_orient, cfg.half_angle) {
        let mut threshold = 0.0;
        for (m, &omega0) in omegas.iter().enumerate() {
            let (e, o) = filter_response(img, omega0, phi_r, cfg);
            let amp: Vec<f64> = e.data().iter().zip(o.data()).map(|(a, b)| a.hypot(*b)).collect();
            if m == 0 {
                let mut tmp = amp.clone();
                threshold = cfg.noise_factor * median_in_place(&mut tmp);
            }
            for i in 0..w * h {
                let (ev, ov) = (e.data()[i], o.data()[i]);
                num.data_mut()[i] += ((ev.abs() - ov.abs()) - threshold).max(0.0);
                den.data_mut()[i] += amp[i];
            }
        }
    }
    let raw = Raster::new(
        w,
        h,
        num.data()
            .iter()
            .zip(den.data())
            .map(|(n, d)| n / (d + cfg.epsilon))
            .collect(),
    );
    let z = raw.max().max(0.0);
    let normalized = if z > 0.0 { raw.map(|v| v / z) } else { Raster::filled(w, h, 0.0) };
    Ok(PsMap { raw, normalized, z })
}

/// `f_PS = exp(−PS_normalized / σ0)`, in `(0, 1]`.
pub fn f_ps(ps: &PsMap, sigma0: f64) -> Raster {
    ps.normalized.map(|v| (-v / sigma0).exp())
}
