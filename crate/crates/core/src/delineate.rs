//! Label maps and response maps to one-depth-per-column delineations, plus the
//! phase-symmetry baselines and overlay rendering.

use std::path::Path;

use image::{Rgb, RgbImage};

use crate::confmap::{ConfMapParams, RandomWalkFeatures};
use crate::error::{Error, Result};
use crate::imagecore::{validate_labelmap, Delineation, Image, Label, LabelMap, Scheme};
use crate::phasesym::{phase_symmetry, PsConfig};
use crate::raster::Raster;

/// CBG: the tissue/shadow border, half a pixel above the first shadow row.
pub fn interface_from_cbg(lm: &LabelMap, spacing_mm: f64) -> Result<Delineation> {
    if lm.scheme() != Scheme::Cbg {
        return Err(Error::invalid("interface_from_cbg needs a CBG label map"));
    }
    validate_labelmap(lm)?;
    let mut d = Delineation::new(spacing_mm);
    for c in 0..lm.width() {
        let col = lm.column(c);
        if let Some(first_s) = col.iter().position(|&l| l == Label::Shadow) {
            if first_s > 0 {
                d.insert(c, first_s as f64 - 0.5);
            }
        }
    }
    Ok(d)
}

/// BFG: the middle of the first bone run in each column.
pub fn midline_from_bfg(lm: &LabelMap, spacing_mm: f64) -> Result<Delineation> {
    if lm.scheme() != Scheme::Bfg {
        return Err(Error::invalid("midline_from_bfg needs a BFG label map"));
    }
    let mut d = Delineation::new(spacing_mm);
    for c in 0..lm.width() {
        let col = lm.column(c);
        if let Some(a) = col.iter().position(|&l| l == Label::Bone) {
            let len = col[a..].iter().take_while(|&&l| l == Label::Bone).count();
            d.insert(c, a as f64 + (len as f64 - 1.0) / 2.0);
        }
    }
    Ok(d)
}

/// Strongest response per column if it exceeds `threshold`; ties go to the deepest row.
pub fn standardize_max(rm: &Raster, threshold: f64, spacing_mm: f64) -> Delineation {
    let mut d = Delineation::new(spacing_mm);
    for c in 0..rm.width() {
        let mut best: Option<(usize, f64)> = None;
        for r in 0..rm.height() {
            let v = rm.get(r, c);
            if best.is_none_or(|(_, b)| v >= b) {
                best = Some((r, v));
            }
        }
        if let Some((r, v)) = best {
            if v > threshold {
                d.insert(c, r as f64);
            }
        }
    }
    d
}

/// Binary mask with `width × height` cells, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    pub width: usize,
    pub height: usize,
    pub bits: Vec<bool>,
}

impl Mask {
    pub fn threshold(r: &Raster, t: f64) -> Mask {
        Mask {
            width: r.width(),
            height: r.height(),
            bits: r.data().iter().map(|&v| v > t).collect(),
        }
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> bool {
        self.bits[r * self.width + c]
    }

    /// Outside rows read as background; outside columns repeat the edge column.
    fn at(&self, r: isize, c: isize) -> u8 {
        if r < 0 || r >= self.height as isize {
            return 0;
        }
        let c = c.clamp(0, self.width as isize - 1);
        self.bits[r as usize * self.width + c as usize] as u8
    }
}

/// Two-subiteration parallel thinning to an 8-connected one-pixel skeleton.
///
/// Structures touching the lateral image border are treated as continuing past it,
/// so they are not eaten from their ends.
pub fn thin(mask: &Mask) -> Mask {
    let mut m = mask.clone();
    if m.width == 0 || m.height == 0 {
        return m;
    }
    let mut remove = Vec::new();
    loop {
        let mut changed = false;
        for step in 0..2 {
            remove.clear();
            for r in 0..m.height {
                for c in 0..m.width {
                    if !m.get(r, c) {
                        continue;
                    }
                    let (ri, ci) = (r as isize, c as isize);
                    // P2..P9 clockwise from north.
                    let p = [
                        m.at(ri - 1, ci),
                        m.at(ri - 1, ci + 1),
                        m.at(ri, ci + 1),
                        m.at(ri + 1, ci + 1),
                        m.at(ri + 1, ci),
                        m.at(ri + 1, ci - 1),
                        m.at(ri, ci - 1),
                        m.at(ri - 1, ci - 1),
                    ];
                    let b: u8 = p.iter().sum();
                    if !(2..=6).contains(&b) {
                        continue;
                    }
                    let a = (0..8).filter(|&k| p[k] == 0 && p[(k + 1) % 8] == 1).count();
                    if a != 1 {
                        continue;
                    }
                    let (n, e, s, w) = (p[0], p[2], p[4], p[6]);
                    let ok = if step == 0 {
                        n * e * s == 0 && e * s * w == 0
                    } else {
                        n * e * w == 0 && n * s * w == 0
                    };
                    if ok {
                        remove.push(r * m.width + c);
                    }
                }
            }
            for &i in &remove {
                m.bits[i] = false;
            }
            changed |= !remove.is_empty();
        }
        if !changed {
            return m;
        }
    }
}

/// Thin the mask, then keep the deepest skeleton pixel in each column.
pub fn standardize_up(seg: &Mask, spacing_mm: f64) -> Delineation {
    let sk = thin(seg);
    let mut d = Delineation::new(spacing_mm);
    for c in 0..sk.width {
        if let Some(r) = (0..sk.height).rev().find(|&r| sk.get(r, c)) {
            d.insert(c, r as f64);
        }
    }
    d
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Baseline {
    PsUp,
    PsMax,
    CpsUp,
}

impl std::str::FromStr for Baseline {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ps-up" => Ok(Baseline::PsUp),
            "ps-max" => Ok(Baseline::PsMax),
            "cps-up" => Ok(Baseline::CpsUp),
            _ => Err(Error::invalid(format!("unknown baseline '{s}' (ps-up, ps-max, cps-up)"))),
        }
    }
}

impl std::fmt::Display for Baseline {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Baseline::PsUp => "ps-up",
            Baseline::PsMax => "ps-max",
            Baseline::CpsUp => "cps-up",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineConfig {
    pub ps: PsConfig,
    pub confmap: ConfMapParams,
    /// CPS window scales in wavelengths.
    pub cps_scales: Vec<f64>,
    /// Detection cutoff on the max-normalized response.
    pub threshold: f64,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        BaselineConfig {
            ps: PsConfig::default(),
            confmap: ConfMapParams::default(),
            cps_scales: vec![1.0, 2.0, 4.0],
            threshold: 0.1,
        }
    }
}

/// Baseline delineation from precomputed maps. `shadowing` is required for CPS.
pub fn baseline_from_maps(
    kind: Baseline,
    ps_normalized: &Raster,
    shadowing: Option<&Raster>,
    threshold: f64,
    spacing_mm: f64,
) -> Result<Delineation> {
    Ok(match kind {
        Baseline::PsUp => standardize_up(&Mask::threshold(ps_normalized, threshold), spacing_mm),
        Baseline::PsMax => standardize_max(ps_normalized, threshold, spacing_mm),
        Baseline::CpsUp => {
            let s = shadowing.ok_or_else(|| Error::invalid("CPS baseline needs a shadowing map"))?;
            if !s.same_shape(ps_normalized) {
                return Err(Error::dims(
                    format!("{}x{}", ps_normalized.width(), ps_normalized.height()),
                    format!("{}x{}", s.width(), s.height()),
                ));
            }
            let cps = Raster::new(
                s.width(),
                s.height(),
                ps_normalized.data().iter().zip(s.data()).map(|(a, b)| a * b).collect(),
            )
            .normalized_by_max();
            standardize_up(&Mask::threshold(&cps, threshold), spacing_mm)
        }
    })
}

pub fn baseline(img: &Image, kind: Baseline, cfg: &BaselineConfig) -> Result<Delineation> {
    let ps = phase_symmetry(img.pixels(), &cfg.ps)?;
    let shadowing = if kind == Baseline::CpsUp {
        Some(RandomWalkFeatures::compute(img, &cfg.confmap, &cfg.cps_scales)?.shadowing)
    } else {
        None
    };
    baseline_from_maps(kind, &ps.normalized, shadowing.as_ref(), cfg.threshold, img.spacing_mm())
}

fn draw_curve(canvas: &mut RgbImage, d: &Delineation, color: Rgb<u8>) {
    let h = canvas.height() as i64;
    let mut prev: Option<(usize, i64)> = None;
    for (c, z) in d.iter() {
        let r = (z.round() as i64).clamp(0, h - 1);
        canvas.put_pixel(c as u32, r as u32, color);
        if let Some((pc, pr)) = prev {
            if pc + 1 == c {
                let (lo, hi) = (pr.min(r), pr.max(r));
                for rr in lo..=hi {
                    let cc = if (rr - pr).abs() <= (rr - r).abs() { pc } else { c };
                    canvas.put_pixel(cc as u32, rr as u32, color);
                }
            }
        }
        prev = Some((c, r));
    }
}

/// B-mode image with the prediction in red and the gold standard in blue.
pub fn render_overlay(img: &Image, pred: &Delineation, gs: Option<&Delineation>, path: &Path) -> Result<()> {
    let (w, h) = (img.width() as u32, img.height() as u32);
    let mut canvas = RgbImage::from_fn(w, h, |c, r| {
        let v = (img.get(r as usize, c as usize) * 255.0).round() as u8;
        Rgb([v, v, v])
    });
    if let Some(gs) = gs {
        gs.validate(img.width(), img.height())?;
        draw_curve(&mut canvas, gs, Rgb([0, 0, 255]));
    }
    pred.validate(img.width(), img.height())?;
    draw_curve(&mut canvas, pred, Rgb([255, 0, 0]));
    canvas
        .save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| Error::io(path, std::io::Error::other(e)))
}
