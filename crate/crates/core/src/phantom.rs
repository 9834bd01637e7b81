//! Synthetic B-mode phantoms with a known bone surface.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::imagecore::{save_delineation, save_image_pgm, save_labelmap, Delineation, Image, Label, LabelMap, Scheme};
use crate::raster::Raster;

#[derive(Debug, Clone, PartialEq)]
pub struct FalseBand {
    pub depth: f64,
    pub thickness: f64,
    pub brightness: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhantomSpec {
    pub width: usize,
    pub height: usize,
    pub spacing_mm: f64,
    pub wavelength_px: f64,
    /// Surface `d(c) = d0 + a·sin(2πνc/W)`, in pixels.
    pub d0: f64,
    pub amplitude: f64,
    pub frequency: f64,
    /// Half-open column ranges without bone.
    pub no_bone: Vec<(usize, usize)>,
    pub band_thickness_px: usize,
    pub band_brightness: f64,
    /// Rayleigh scale of tissue speckle.
    pub sigma_t: f64,
    /// Rayleigh scale of the noise inside the shadow.
    pub sigma_s: f64,
    pub false_bands: Vec<FalseBand>,
    /// Brightness of the reverberation ghost at `2·d(c)` relative to the band.
    pub reverb: Option<f64>,
    pub seed: u64,
}

impl Default for PhantomSpec {
    fn default() -> Self {
        PhantomSpec {
            width: 128,
            height: 128,
            spacing_mm: 0.15,
            wavelength_px: 1.0,
            d0: 45.0,
            amplitude: 6.0,
            frequency: 1.0,
            no_bone: Vec::new(),
            band_thickness_px: 2,
            band_brightness: 0.9,
            sigma_t: 0.15,
            sigma_s: 0.03,
            false_bands: Vec::new(),
            reverb: None,
            seed: 0,
        }
    }
}

impl PhantomSpec {
    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::invalid("phantom dimensions must be positive"));
        }
        if !(self.spacing_mm > 0.0) || !(self.wavelength_px >= 1.0) {
            return Err(Error::invalid("phantom spacing must be > 0 and wavelength >= 1 px"));
        }
        if self.band_thickness_px == 0 {
            return Err(Error::invalid("band thickness must be >= 1 px"));
        }
        if self.d0 - self.amplitude.abs() < 1.0 {
            return Err(Error::invalid("bone surface leaves the top of the image"));
        }
        if self.d0 + self.amplitude.abs() + self.band_thickness_px as f64 >= self.height as f64 - 1.0 {
            return Err(Error::invalid("d0 + |a| + band thickness must stay inside the image"));
        }
        if !(self.sigma_s < self.sigma_t) && !(self.sigma_s == self.sigma_t && self.band_brightness == 0.0) {
            return Err(Error::invalid("shadow noise must be weaker than tissue speckle"));
        }
        let bright = |b: f64| (0.0..=1.0).contains(&b);
        if !bright(self.band_brightness) || self.false_bands.iter().any(|f| !bright(f.brightness) || !(f.thickness > 0.0)) {
            return Err(Error::invalid("brightness must be in [0,1] and band thickness > 0"));
        }
        if self.reverb.is_some_and(|r| !(0.0..=1.0).contains(&r)) {
            return Err(Error::invalid("reverb fraction must be in [0,1]"));
        }
        Ok(())
    }

    pub fn surface(&self, c: usize) -> f64 {
        self.d0 + self.amplitude * (2.0 * PI * self.frequency * c as f64 / self.width as f64).sin()
    }

    pub fn has_bone(&self, c: usize) -> bool {
        !self.no_bone.iter().any(|&(a, b)| (a..b).contains(&c))
    }

    /// First bone row in column `c`; the band covers `[a, a + thickness)`.
    pub fn band_start(&self, c: usize) -> usize {
        let t = self.band_thickness_px as f64;
        (self.surface(c) - (t - 1.0) / 2.0).round().max(0.0) as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Phantom {
    pub image: Image,
    pub labels: LabelMap,
    pub gs: Delineation,
}

fn rayleigh(rng: &mut impl Rng, sigma: f64) -> f64 {
    let u: f64 = rng.random();
    sigma * (-2.0 * (1.0 - u).ln()).sqrt()
}

/// Full-width-at-half-maximum Gaussian stripe.
fn stripe(r: f64, center: f64, fwhm: f64) -> f64 {
    let s = fwhm / 2.354_820_045;
    (-(r - center).powi(2) / (2.0 * s * s)).exp()
}

pub fn generate(spec: &PhantomSpec) -> Result<Phantom> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    generate_with(spec, &mut rng)
}

fn generate_with(spec: &PhantomSpec, rng: &mut ChaCha8Rng) -> Result<Phantom> {
    spec.validate()?;
    let (w, h) = (spec.width, spec.height);
    let t = spec.band_thickness_px;
    let mut px = Raster::filled(w, h, 0.0);
    let mut labels = vec![Label::Tissue; w * h];
    let mut gs = Delineation::new(spec.spacing_mm);
    for r in 0..h {
        for c in 0..w {
            let (bone, a) = (spec.has_bone(c), spec.band_start(c));
            let shadowed = bone && r >= a + t;
            let sigma = if shadowed { spec.sigma_s } else { spec.sigma_t };
            let mut v = rayleigh(rng, sigma);
            if bone {
                let center = a as f64 + (t as f64 - 1.0) / 2.0;
                v += spec.band_brightness * stripe(r as f64, center, t as f64);
                if let Some(frac) = spec.reverb {
                    v += frac * spec.band_brightness * stripe(r as f64, 2.0 * center, t as f64);
                }
                labels[r * w + c] = if r < a {
                    Label::Tissue
                } else if r < a + t {
                    Label::Bone
                } else {
                    Label::Shadow
                };
            }
            for fb in &spec.false_bands {
                // Interfaces are only visible above the bone.
                if !bone || fb.depth + fb.thickness < a as f64 {
                    v += fb.brightness * stripe(r as f64, fb.depth, fb.thickness);
                }
            }
            px.set(r, c, v.clamp(0.0, 1.0));
        }
    }
    for c in (0..w).filter(|&c| spec.has_bone(c)) {
        let a = spec.band_start(c);
        if a + t <= h {
            gs.insert(c, a as f64 + (t as f64 - 1.0) / 2.0);
        }
    }
    Ok(Phantom {
        image: Image::new(px, spec.spacing_mm, spec.wavelength_px)?,
        labels: LabelMap::new(w, h, labels, Scheme::Bfg)?,
        gs,
    })
}

/// Parameter ranges for randomized datasets; each phantom draws uniformly inside them.
#[derive(Debug, Clone, PartialEq)]
pub struct PhantomRanges {
    pub width: usize,
    pub height: usize,
    pub spacing_mm: f64,
    pub wavelength_px: f64,
    pub d0: (f64, f64),
    pub amplitude: (f64, f64),
    pub frequency: (f64, f64),
    pub band_thickness_px: usize,
    pub band_brightness: (f64, f64),
    pub sigma_t: (f64, f64),
    pub sigma_s: (f64, f64),
    /// Probability that a phantom has a no-bone gap at one lateral edge.
    pub gap_probability: f64,
    /// Fraction of phantoms with false tissue bands and a reverberation ghost.
    pub adversarial_fraction: f64,
    pub false_band_brightness: (f64, f64),
    pub reverb: (f64, f64),
}

impl Default for PhantomRanges {
    fn default() -> Self {
        PhantomRanges {
            width: 128,
            height: 128,
            spacing_mm: 0.15,
            wavelength_px: 1.0,
            d0: (35.0, 55.0),
            amplitude: (0.0, 8.0),
            frequency: (0.5, 1.5),
            band_thickness_px: 2,
            band_brightness: (0.75, 1.0),
            sigma_t: (0.12, 0.18),
            sigma_s: (0.02, 0.04),
            gap_probability: 0.3,
            adversarial_fraction: 0.5,
            false_band_brightness: (0.3, 0.6),
            reverb: (0.3, 0.5),
        }
    }
}

fn draw(rng: &mut impl Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

/// Phantom `index` of the dataset with the given seed.
pub fn dataset_phantom(ranges: &PhantomRanges, seed: u64, index: usize) -> Result<(PhantomSpec, Phantom)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    let d0 = draw(&mut rng, ranges.d0);
    let amplitude = draw(&mut rng, ranges.amplitude);
    let mut spec = PhantomSpec {
        width: ranges.width,
        height: ranges.height,
        spacing_mm: ranges.spacing_mm,
        wavelength_px: ranges.wavelength_px,
        d0,
        amplitude,
        frequency: draw(&mut rng, ranges.frequency),
        no_bone: Vec::new(),
        band_thickness_px: ranges.band_thickness_px,
        band_brightness: draw(&mut rng, ranges.band_brightness),
        sigma_t: draw(&mut rng, ranges.sigma_t),
        sigma_s: draw(&mut rng, ranges.sigma_s),
        false_bands: Vec::new(),
        reverb: None,
        seed: 0,
    };
    if rng.random_bool(ranges.gap_probability.clamp(0.0, 1.0)) {
        let gap = rng.random_range(ranges.width / 10..=ranges.width / 4);
        spec.no_bone.push(if rng.random_bool(0.5) { (0, gap) } else { (ranges.width - gap, ranges.width) });
    }
    if rng.random_bool(ranges.adversarial_fraction.clamp(0.0, 1.0)) {
        let top = (d0 - amplitude).max(12.0);
        let n = rng.random_range(1..=2);
        for _ in 0..n {
            spec.false_bands.push(FalseBand {
                depth: rng.random_range(6.0..(top - 6.0).max(7.0)),
                thickness: 2.0,
                brightness: draw(&mut rng, ranges.false_band_brightness),
            });
        }
        spec.reverb = Some(draw(&mut rng, ranges.reverb));
    }
    let phantom = generate_with(&spec, &mut rng)?;
    Ok((spec, phantom))
}

pub const MANIFEST_HEADER: &str = "id,image,gs,labels,adversarial,spacing_mm,wavelength_px";

/// Write `n` phantoms and a manifest into `dir`.
pub fn generate_dataset(dir: &Path, n: usize, ranges: &PhantomRanges, seed: u64) -> Result<()> {
    if n == 0 {
        return Err(Error::invalid("dataset size must be >= 1"));
    }
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let rows: Vec<String> = (0..n)
        .into_par_iter()
        .map(|i| -> Result<String> {
            let (spec, p) = dataset_phantom(ranges, seed, i)?;
            let img = format!("img_{i:04}.pgm");
            let gs = format!("gs_{i:04}.csv");
            let lbl = format!("lbl_{i:04}.pgm");
            save_image_pgm(&p.image, &dir.join(&img), 16)?;
            save_delineation(&p.gs, &dir.join(&gs))?;
            save_labelmap(&p.labels, &dir.join(&lbl))?;
            let adversarial = !spec.false_bands.is_empty();
            Ok(format!(
                "{i},{img},{gs},{lbl},{},{},{}",
                adversarial as u8, spec.spacing_mm, spec.wavelength_px
            ))
        })
        .collect::<Result<_>>()?;
    let mut manifest = String::new();
    writeln!(manifest, "{MANIFEST_HEADER}").unwrap();
    for r in rows {
        writeln!(manifest, "{r}").unwrap();
    }
    let path = dir.join("manifest.csv");
    std::fs::write(&path, manifest).map_err(|e| Error::io(&path, e))
}
