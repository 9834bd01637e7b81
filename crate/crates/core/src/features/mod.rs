//! Per-pixel feature bank and the grouped feature stack fed to the classifiers.

pub mod column;
pub mod curvature;
pub mod gabor;
pub mod haar;
pub mod lbp;
pub mod patch;
pub mod rayleigh;
mod stack;

pub use column::{cw_cumulative, cw_local_statistics, gaussian_derivative_kernel};
pub use curvature::curvature_map;
pub use gabor::{gabor_kernel, gabor_response, GaborKernelSpec};
pub use haar::haar_center_surround;
pub use lbp::{lbp_family, LbpMaps};
pub use patch::{patch_statistics, PatchStats};
pub use rayleigh::{rayleigh_fit_error, rayleigh_fit_error_patch};
pub use stack::{load_stack, save_stack, FeatureStack};

use std::f64::consts::FRAC_PI_2;

use crate::confmap::RandomWalkFeatures;
use crate::error::{Error, Result};
use crate::imagecore::Image;
use crate::raster::Raster;

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureConfig {
    /// Patch half-widths in wavelengths.
    pub patch_scales: Vec<f64>,
    /// Gaussian σ of the column-wise derivative filters, in wavelengths.
    pub cw_scales: Vec<f64>,
    pub cw_orders: Vec<usize>,
    /// Rayleigh fit patch half-width in wavelengths.
    pub rayleigh_scale: f64,
    pub rayleigh_bins: usize,
    pub gabor_theta: f64,
    pub gabor_period_px: f64,
    /// Gaussian σ of the Gabor envelope in mm: (lateral, axial).
    pub gabor_sigma_mm: (f64, f64),
    /// Center square sides in pixels.
    pub haar_scales: Vec<usize>,
    pub entropy_bins: usize,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            patch_scales: vec![3.0, 6.0, 12.0],
            cw_scales: vec![5.0, 11.0, 31.0],
            cw_orders: vec![0, 1, 2, 3],
            rayleigh_scale: 12.0,
            rayleigh_bins: 32,
            gabor_theta: FRAC_PI_2,
            gabor_period_px: 16.0,
            gabor_sigma_mm: (2.0, 4.0),
            haar_scales: vec![2, 5, 9, 15, 25, 30],
            entropy_bins: 32,
        }
    }
}

impl FeatureConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: &[f64]| -> Result<()> {
            if v.iter().all(|&x| x > 0.0 && x.is_finite()) {
                Ok(())
            } else {
                Err(Error::invalid(format!("{name} must all be positive")))
            }
        };
        positive("features.patch_scales", &self.patch_scales)?;
        positive("features.cw_scales", &self.cw_scales)?;
        positive("features.rayleigh_scale", &[self.rayleigh_scale])?;
        positive("features.gabor_period_px", &[self.gabor_period_px])?;
        positive(
            "features.gabor_sigma_mm",
            &[self.gabor_sigma_mm.0, self.gabor_sigma_mm.1],
        )?;
        if self.cw_orders.iter().any(|&o| o > 3) {
            return Err(Error::invalid("features.cw_orders must be in 0..=3"));
        }
        if self.haar_scales.contains(&0) {
            return Err(Error::invalid("features.haar_scales must be >= 1"));
        }
        if self.entropy_bins == 0 || self.rayleigh_bins == 0 {
            return Err(Error::invalid("histogram bin counts must be >= 1"));
        }
        Ok(())
    }
}

/// Feature groups in stack order. Names match the feature-selection plots.
pub const GROUPS: [&str; 21] = [
    "pixel intensity",
    "patch mean",
    "patch median",
    "patch variance",
    "patch standard deviation",
    "patch skewness",
    "patch kurtosis",
    "patch entropy",
    "patch energy",
    "confidence map",
    "attenuation",
    "log-/Shadowing",
    "CW local statistics",
    "CW cumulative sum",
    "CW cumulative mean",
    "CW cumulative std",
    "LBP",
    "Rayleigh fit error",
    "Gabor filter response",
    "curvature response",
    "Haar features",
];

/// Inputs shared by every group computation for one image.
pub struct FeatureInput<'a> {
    pub image: &'a Image,
    pub config: &'a FeatureConfig,
    pub random_walk: &'a RandomWalkFeatures,
}

/// Compute one feature group as a list of `(scale tag, map)`.
pub fn compute_group(group: &str, input: &FeatureInput<'_>) -> Result<Vec<(String, Raster)>> {
    let img = input.image;
    let cfg = input.config;
    let px = img.pixels();
    let patch_half = |s: f64| img.wavelengths_to_px(s);
    let per_patch_scale = |f: &dyn Fn(usize) -> Raster| -> Vec<(String, Raster)> {
        cfg.patch_scales
            .iter()
            .map(|&s| (format!("{s}wl"), f(patch_half(s))))
            .collect()
    };
    let out = match group {
        "pixel intensity" => vec![("1px".into(), px.clone())],
        "patch mean" => per_patch_scale(&|h| patch::patch_moments(px, h).mean),
        "patch median" => per_patch_scale(&|h| patch::patch_median(px, h)),
        "patch variance" => per_patch_scale(&|h| patch::patch_moments(px, h).variance),
        "patch standard deviation" => per_patch_scale(&|h| patch::patch_moments(px, h).std),
        "patch skewness" => per_patch_scale(&|h| patch::patch_moments(px, h).skewness),
        "patch kurtosis" => per_patch_scale(&|h| patch::patch_moments(px, h).kurtosis),
        "patch entropy" => per_patch_scale(&|h| patch::patch_entropy(px, h, cfg.entropy_bins)),
        "patch energy" => per_patch_scale(&|h| patch::patch_moments(px, h).energy),
        "confidence map" => vec![("1px".into(), input.random_walk.confidence.clone())],
        "attenuation" => vec![("cps".into(), input.random_walk.attenuation.clone())],
        "log-/Shadowing" => vec![
            ("shadowing".into(), input.random_walk.shadowing.clone()),
            ("log".into(), input.random_walk.log_shadowing.clone()),
        ],
        "CW local statistics" => {
            let mut v = Vec::new();
            for &s in &cfg.cw_scales {
                let sigma = (s * img.wavelength_px()).max(0.5);
                for &o in &cfg.cw_orders {
                    v.push((format!("{s}wl o{o}"), cw_local_statistics(px, sigma, o)));
                }
            }
            v
        }
        "CW cumulative sum" => vec![("col".into(), cw_cumulative(px).0)],
        "CW cumulative mean" => vec![("col".into(), cw_cumulative(px).1)],
        "CW cumulative std" => vec![("col".into(), cw_cumulative(px).2)],
        "LBP" => {
            let m = lbp_family(px);
            vec![
                ("lbp".into(), m.lbp),
                ("mct".into(), m.mct),
                ("extended lbp".into(), m.ext_lbp),
                ("extended mct".into(), m.ext_mct),
            ]
        }
        "Rayleigh fit error" => vec![(
            format!("{}wl", cfg.rayleigh_scale),
            rayleigh_fit_error(px, patch_half(cfg.rayleigh_scale), cfg.rayleigh_bins),
        )],
        "Gabor filter response" => vec![("texture".into(), gabor_response(px, &gabor_spec(img, cfg)))],
        "curvature response" => vec![("1px".into(), curvature_map(px))],
        "Haar features" => cfg
            .haar_scales
            .iter()
            .map(|&s| (format!("{s}px"), haar_center_surround(px, s)))
            .collect(),
        other => return Err(Error::invalid(format!("unknown feature group '{other}'"))),
    };
    Ok(out)
}

pub fn gabor_spec(img: &Image, cfg: &FeatureConfig) -> GaborKernelSpec {
    GaborKernelSpec {
        theta: cfg.gabor_theta,
        period_px: cfg.gabor_period_px,
        sigma_lateral_px: cfg.gabor_sigma_mm.0 / img.spacing_mm(),
        sigma_axial_px: cfg.gabor_sigma_mm.1 / img.spacing_mm(),
    }
}

/// Build the full stack. An optional phase-symmetry map is appended as an extra group.
pub fn extract_all(
    img: &Image,
    cfg: &FeatureConfig,
    random_walk: &RandomWalkFeatures,
    ps_map: Option<&Raster>,
) -> Result<FeatureStack> {
    cfg.validate()?;
    random_walk.check_dims(img.width(), img.height())?;
    let mut stack = FeatureStack::new(img.width(), img.height());
    let input = FeatureInput {
        image: img,
        config: cfg,
        random_walk,
    };
    let px = img.pixels();
    // Patch statistics and cumulative statistics share their passes.
    let patches: Vec<(String, PatchStats)> = cfg
        .patch_scales
        .iter()
        .map(|&s| {
            let half = img.wavelengths_to_px(s);
            (format!("{s}wl"), patch_statistics(px, half, cfg.entropy_bins))
        })
        .collect();
    let (cum_sum, cum_mean, cum_std) = cw_cumulative(px);
    for group in GROUPS {
        let maps: Vec<(String, Raster)> = match group {
            "patch mean" | "patch median" | "patch variance" | "patch standard deviation"
            | "patch skewness" | "patch kurtosis" | "patch entropy" | "patch energy" => patches
                .iter()
                .map(|(tag, st)| {
                    let m = match group {
                        "patch mean" => &st.mean,
                        "patch median" => &st.median,
                        "patch variance" => &st.variance,
                        "patch standard deviation" => &st.std,
                        "patch skewness" => &st.skewness,
                        "patch kurtosis" => &st.kurtosis,
                        "patch entropy" => &st.entropy,
                        _ => &st.energy,
                    };
                    (tag.clone(), m.clone())
                })
                .collect(),
            "CW cumulative sum" => vec![("col".into(), cum_sum.clone())],
            "CW cumulative mean" => vec![("col".into(), cum_mean.clone())],
            "CW cumulative std" => vec![("col".into(), cum_std.clone())],
            _ => compute_group(group, &input)?,
        };
        for (tag, map) in maps {
            stack.push(group, &tag, map)?;
        }
    }
    if let Some(ps) = ps_map {
        stack.push("phase symmetry", "ps", ps.clone())?;
    }
    Ok(stack)
}
