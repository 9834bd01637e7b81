//! Zero-DC Gabor texture response.

use crate::raster::{convolve_mirror, Raster};

/// Gabor filter parameters in pixel units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaborKernelSpec {
    /// Orientation of the carrier; π/2 makes the carrier vary along depth.
    pub theta: f64,
    /// Carrier period in pixels.
    pub period_px: f64,
    /// Gaussian standard deviation along columns (lateral, x₁).
    pub sigma_lateral_px: f64,
    /// Gaussian standard deviation along rows (axial, x₂).
    pub sigma_axial_px: f64,
}

/// Kernel truncated at ±3σ per axis, clipped so it never exceeds the image, with
/// the Gaussian normalized to unit sum and the mean subtracted.
pub fn gabor_kernel(spec: &GaborKernelSpec, max_width: usize, max_height: usize) -> Raster {
    let clip = |sigma: f64, max: usize| -> usize {
        let r = (3.0 * sigma).ceil().max(0.0) as usize;
        r.min(max.saturating_sub(1) / 2)
    };
    let rx = clip(spec.sigma_lateral_px, max_width);
    let ry = clip(spec.sigma_axial_px, max_height);
    let f = 1.0 / spec.period_px;
    let (ct, st) = (spec.theta.cos(), spec.theta.sin());
    let mut gauss = Raster::from_fn(2 * rx + 1, 2 * ry + 1, |r, c| {
        let x1 = c as f64 - rx as f64;
        let x2 = r as f64 - ry as f64;
        (-(x1 * x1) / (2.0 * spec.sigma_lateral_px.powi(2))
            - (x2 * x2) / (2.0 * spec.sigma_axial_px.powi(2)))
        .exp()
    });
    let z: f64 = gauss.data().iter().sum();
    for v in gauss.data_mut() {
        *v /= z;
    }
    let mut k = Raster::from_fn(2 * rx + 1, 2 * ry + 1, |r, c| {
        let x1 = c as f64 - rx as f64;
        let x2 = r as f64 - ry as f64;
        gauss.get(r, c) * (2.0 * std::f64::consts::PI * f * (x1 * ct + x2 * st)).cos()
    });
    let mean = k.data().iter().sum::<f64>() / k.len() as f64;
    for v in k.data_mut() {
        *v -= mean;
    }
    k
}

pub fn gabor_response(img: &Raster, spec: &GaborKernelSpec) -> Raster {
    let kernel = gabor_kernel(spec, img.width(), img.height());
    convolve_mirror(img, &kernel)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> GaborKernelSpec {
        GaborKernelSpec {
            theta: std::f64::consts::FRAC_PI_2,
            period_px: 8.0,
            sigma_lateral_px: 2.0,
            sigma_axial_px: 3.0,
        }
    }

    #[test]
    fn constant_gives_zero() {
        let out = gabor_response(&Raster::filled(40, 40, 0.6), &spec());
        assert!(out.data().iter().all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn kernel_is_clipped_to_image() {
        let k = gabor_kernel(&spec(), 7, 9);
        assert_eq!((k.width(), k.height()), (7, 9));
    }
}
