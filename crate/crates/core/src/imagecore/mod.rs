//! Images, delineations and label maps, with their file formats.

mod io;
mod resample;

use std::collections::BTreeMap;

pub use io::{
    load_delineation, load_image, load_labelmap, read_meta, save_delineation, save_image_pgm,
    save_image_png, save_labelmap, write_meta, MetaOverride,
};
pub use resample::{resample_bilinear, resize_delineation, sample_bilinear};

use crate::error::{Error, Result};
use crate::raster::Raster;

/// A grayscale B-mode frame. Rows are depth (row 0 at the transducer), columns are scanlines.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pixels: Raster,
    spacing_mm: f64,
    wavelength_px: f64,
}

impl Image {
    pub fn new(pixels: Raster, spacing_mm: f64, wavelength_px: f64) -> Result<Self> {
        if pixels.is_empty() {
            return Err(Error::invalid("image has no pixels"));
        }
        if !(spacing_mm > 0.0 && spacing_mm.is_finite()) {
            return Err(Error::invalid(format!("spacing_mm must be > 0, got {spacing_mm}")));
        }
        if !(wavelength_px >= 1.0 && wavelength_px.is_finite()) {
            return Err(Error::invalid(format!(
                "wavelength_px must be >= 1, got {wavelength_px}"
            )));
        }
        if let Some(v) = pixels.data().iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::invalid(format!("intensity {v} outside [0,1]")));
        }
        Ok(Image {
            pixels,
            spacing_mm,
            wavelength_px,
        })
    }

    pub fn width(&self) -> usize {
        self.pixels.width()
    }

    pub fn height(&self) -> usize {
        self.pixels.height()
    }

    pub fn spacing_mm(&self) -> f64 {
        self.spacing_mm
    }

    pub fn wavelength_px(&self) -> f64 {
        self.wavelength_px
    }

    pub fn pixels(&self) -> &Raster {
        &self.pixels
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.pixels.get(r, c)
    }

    /// Convert a length in wavelengths to whole pixels (at least 1).
    pub fn wavelengths_to_px(&self, n: f64) -> usize {
        ((n * self.wavelength_px).round() as usize).max(1)
    }
}

/// Per-scanline bone depth in pixels. Missing columns mean "no bone".
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Delineation {
    entries: BTreeMap<usize, f64>,
    spacing_mm: f64,
}

impl Delineation {
    pub fn new(spacing_mm: f64) -> Self {
        Delineation {
            entries: BTreeMap::new(),
            spacing_mm,
        }
    }

    pub fn from_entries(spacing_mm: f64, entries: impl IntoIterator<Item = (usize, f64)>) -> Self {
        Delineation {
            entries: entries.into_iter().collect(),
            spacing_mm,
        }
    }

    pub fn insert(&mut self, col: usize, depth_px: f64) {
        self.entries.insert(col, depth_px);
    }

    pub fn get(&self, col: usize) -> Option<f64> {
        self.entries.get(&col).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.entries.iter().map(|(&c, &d)| (c, d))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn spacing_mm(&self) -> f64 {
        self.spacing_mm
    }

    pub fn with_spacing(mut self, spacing_mm: f64) -> Self {
        self.spacing_mm = spacing_mm;
        self
    }

    /// Check that every entry lies inside a `width × height` frame.
    pub fn validate(&self, width: usize, height: usize) -> Result<()> {
        for (c, d) in self.iter() {
            if c >= width || !(d >= 0.0 && d < height as f64) {
                return Err(Error::invalid(format!(
                    "delineation entry (col {c}, depth {d}) outside {width}x{height} frame"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[repr(u8)]
pub enum Label {
    Tissue = 0,
    Bone = 1,
    Shadow = 2,
}

impl Label {
    pub fn from_u8(v: u8) -> Option<Label> {
        match v {
            0 => Some(Label::Tissue),
            1 => Some(Label::Bone),
            2 => Some(Label::Shadow),
            _ => None,
        }
    }
}

/// Which label set a graph or label map uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    /// Tissue, bone, shadow.
    Bfg,
    /// Tissue and shadow only.
    Cbg,
}

impl Scheme {
    pub fn arity(self) -> usize {
        match self {
            Scheme::Bfg => 3,
            Scheme::Cbg => 2,
        }
    }

    /// Label for solver state index `k`.
    pub fn label(self, k: usize) -> Label {
        match (self, k) {
            (_, 0) => Label::Tissue,
            (Scheme::Bfg, 1) => Label::Bone,
            (Scheme::Bfg, 2) | (Scheme::Cbg, 1) => Label::Shadow,
            _ => panic!("state {k} out of range for {self:?}"),
        }
    }

    /// Solver state index of `label`, if the scheme has it.
    pub fn state(self, label: Label) -> Option<usize> {
        match (self, label) {
            (_, Label::Tissue) => Some(0),
            (Scheme::Bfg, Label::Bone) => Some(1),
            (Scheme::Bfg, Label::Shadow) => Some(2),
            (Scheme::Cbg, Label::Shadow) => Some(1),
            (Scheme::Cbg, Label::Bone) => None,
        }
    }
}

impl std::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bfg" => Ok(Scheme::Bfg),
            "cbg" => Ok(Scheme::Cbg),
            _ => Err(Error::invalid(format!("unknown scheme '{s}' (expected bfg or cbg)"))),
        }
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Scheme::Bfg => "bfg",
            Scheme::Cbg => "cbg",
        })
    }
}

/// Per-pixel tissue/bone/shadow labels whose columns follow the propagation order.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelMap {
    width: usize,
    height: usize,
    labels: Vec<Label>,
    scheme: Scheme,
}

impl LabelMap {
    /// Build a label map, rejecting columns out of `T* B* S*` (or `T* S*`) order.
    pub fn new(width: usize, height: usize, labels: Vec<Label>, scheme: Scheme) -> Result<Self> {
        if labels.len() != width * height {
            return Err(Error::dims(width * height, labels.len()));
        }
        let lm = LabelMap {
            width,
            height,
            labels,
            scheme,
        };
        validate_labelmap(&lm)?;
        Ok(lm)
    }

    /// Build without the ordering check (for raw solver output that may be infeasible).
    pub fn new_unchecked(width: usize, height: usize, labels: Vec<Label>, scheme: Scheme) -> Self {
        assert_eq!(labels.len(), width * height);
        LabelMap {
            width,
            height,
            labels,
            scheme,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> Label {
        self.labels[r * self.width + c]
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn column(&self, c: usize) -> Vec<Label> {
        (0..self.height).map(|r| self.get(r, c)).collect()
    }
}

/// True iff `col` reads `T* B* S*` top to bottom (no `B` allowed for CBG).
pub fn column_is_ordered(col: &[Label], scheme: Scheme) -> bool {
    if scheme == Scheme::Cbg && col.contains(&Label::Bone) {
        return false;
    }
    col.windows(2).all(|w| w[0] <= w[1])
}

pub fn validate_labelmap(lm: &LabelMap) -> Result<()> {
    for c in 0..lm.width {
        let col = lm.column(c);
        if !column_is_ordered(&col, lm.scheme) {
            return Err(Error::invalid(format!(
                "label map column {c} violates {} label order",
                match lm.scheme {
                    Scheme::Bfg => "T* B* S*",
                    Scheme::Cbg => "T* S*",
                }
            )));
        }
    }
    Ok(())
}
