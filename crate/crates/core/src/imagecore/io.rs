use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use image::{DynamicImage, ImageBuffer, Luma};

use super::{Delineation, Image, Label, LabelMap, Scheme};
use crate::error::{Error, Result};
use crate::raster::Raster;

/// Metadata supplied on the command line; wins over the sidecar file.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MetaOverride {
    pub spacing_mm: Option<f64>,
    pub wavelength_px: Option<f64>,
}

fn meta_path(image_path: &Path) -> PathBuf {
    image_path.with_extension("meta")
}

/// Parse a `.meta` sidecar (`spacing_mm=...`, `wavelength_px=...`).
pub fn read_meta(path: &Path) -> Result<MetaOverride> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut meta = MetaOverride::default();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::format("meta file", format!("line {}: expected key=value", n + 1)))?;
        let value: f64 = value.trim().parse().map_err(|_| {
            Error::format("meta file", format!("line {}: bad number '{}'", n + 1, value.trim()))
        })?;
        match key.trim() {
            "spacing_mm" => meta.spacing_mm = Some(value),
            "wavelength_px" => meta.wavelength_px = Some(value),
            other => {
                return Err(Error::format("meta file", format!("unknown key '{other}'")));
            }
        }
    }
    Ok(meta)
}

pub fn write_meta(path: &Path, spacing_mm: f64, wavelength_px: f64) -> Result<()> {
    let text = format!("spacing_mm={spacing_mm}\nwavelength_px={wavelength_px}\n");
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

struct Pgm {
    width: usize,
    height: usize,
    maxval: u16,
    samples: Vec<u16>,
}

fn read_pgm(path: &Path) -> Result<Pgm> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_pgm(&bytes)
}

fn parse_pgm(bytes: &[u8]) -> Result<Pgm> {
    let bad = |d: &str| Error::format("PGM file", d.to_string());
    if bytes.len() < 2 || &bytes[..2] != b"P5" {
        return Err(bad("missing P5 magic (only binary PGM is supported)"));
    }
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in fields.iter_mut() {
        // Skip whitespace and comments.
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while pos < bytes.len() && bytes[pos] != b'\n' {
                        pos += 1;
                    }
                }
                Some(_) => break,
                None => return Err(bad("truncated header")),
            }
        }
        let start = pos;
        while pos < bytes.len() && bytes[pos].is_ascii_digit() {
            pos += 1;
        }
        if start == pos {
            return Err(bad("expected a number in header"));
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| bad("header number out of range"))?;
    }
    // Exactly one whitespace byte separates the header from the raster.
    if !bytes.get(pos).is_some_and(|b| b.is_ascii_whitespace()) {
        return Err(bad("missing separator after maxval"));
    }
    pos += 1;
    let [width, height, maxval] = fields;
    if width == 0 || height == 0 {
        return Err(bad("zero image dimension"));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(Error::format(
            "PGM file",
            format!("unsupported bit depth (maxval {maxval})"),
        ));
    }
    let n = width * height;
    let data = &bytes[pos..];
    let samples: Vec<u16> = if maxval < 256 {
        if data.len() < n {
            return Err(bad("truncated raster"));
        }
        data[..n].iter().map(|&b| b as u16).collect()
    } else {
        if data.len() < 2 * n {
            return Err(bad("truncated raster"));
        }
        data[..2 * n]
            .chunks_exact(2)
            .map(|p| u16::from_be_bytes([p[0], p[1]]))
            .collect()
    };
    if let Some(v) = samples.iter().find(|&&v| v as usize > maxval) {
        return Err(Error::format("PGM file", format!("sample {v} exceeds maxval {maxval}")));
    }
    Ok(Pgm {
        width,
        height,
        maxval: maxval as u16,
        samples,
    })
}

fn write_pgm(path: &Path, width: usize, height: usize, maxval: u16, samples: &[u16]) -> Result<()> {
    let mut out = Vec::with_capacity(20 + samples.len() * 2);
    write!(out, "P5\n{width} {height}\n{maxval}\n").expect("write to Vec");
    if maxval < 256 {
        out.extend(samples.iter().map(|&v| v as u8));
    } else {
        for v in samples {
            out.extend_from_slice(&v.to_be_bytes());
        }
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

fn is_png(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("png"))
}

/// Load a PGM (P5) or grayscale PNG, scaling samples by the format's maximum value.
///
/// Spacing and wavelength come from `overrides` first, then `<name>.meta`.
/// A missing wavelength defaults to 1 px.
pub fn load_image(path: &Path, overrides: &MetaOverride) -> Result<Image> {
    let (width, height, values) = if is_png(path) {
        let dynimg = image::open(path).map_err(|e| match e {
            image::ImageError::IoError(io) => Error::io(path, io),
            other => Error::format("PNG file", other.to_string()),
        })?;
        match dynimg {
            DynamicImage::ImageLuma8(buf) => {
                let (w, h) = buf.dimensions();
                let v = buf.into_raw().into_iter().map(|p| p as f64 / 255.0).collect();
                (w as usize, h as usize, v)
            }
            DynamicImage::ImageLuma16(buf) => {
                let (w, h) = buf.dimensions();
                let v = buf.into_raw().into_iter().map(|p| p as f64 / 65535.0).collect();
                (w as usize, h as usize, v)
            }
            other => {
                return Err(Error::format(
                    "PNG file",
                    format!("unsupported pixel type {:?} (grayscale only)", other.color()),
                ))
            }
        }
    } else {
        let pgm = read_pgm(path)?;
        let m = pgm.maxval as f64;
        let v = pgm.samples.iter().map(|&s| s as f64 / m).collect();
        (pgm.width, pgm.height, v)
    };

    let sidecar = meta_path(path);
    let from_file = if sidecar.exists() {
        read_meta(&sidecar)?
    } else {
        MetaOverride::default()
    };
    let spacing = overrides.spacing_mm.or(from_file.spacing_mm).ok_or_else(|| {
        Error::invalid(format!(
            "no spacing for {}: provide {} or a spacing override",
            path.display(),
            sidecar.display()
        ))
    })?;
    let wavelength = overrides
        .wavelength_px
        .or(from_file.wavelength_px)
        .unwrap_or(1.0);
    Image::new(Raster::new(width, height, values), spacing, wavelength)
}

fn quantize(v: f64, max: f64) -> u16 {
    (v * max).round().clamp(0.0, max) as u16
}

/// Write a P5 PGM at 8 or 16 bits plus its `.meta` sidecar.
pub fn save_image_pgm(img: &Image, path: &Path, bits: u8) -> Result<()> {
    let maxval: u16 = match bits {
        8 => 255,
        16 => 65535,
        _ => return Err(Error::invalid(format!("unsupported bit depth {bits}"))),
    };
    let samples: Vec<u16> = img
        .pixels()
        .data()
        .iter()
        .map(|&v| quantize(v, maxval as f64))
        .collect();
    write_pgm(path, img.width(), img.height(), maxval, &samples)?;
    write_meta(&meta_path(path), img.spacing_mm(), img.wavelength_px())
}

/// Write a 16-bit grayscale PNG plus its `.meta` sidecar.
pub fn save_image_png(img: &Image, path: &Path) -> Result<()> {
    let samples: Vec<u16> = img
        .pixels()
        .data()
        .iter()
        .map(|&v| quantize(v, 65535.0))
        .collect();
    let buf: ImageBuffer<Luma<u16>, Vec<u16>> =
        ImageBuffer::from_raw(img.width() as u32, img.height() as u32, samples)
            .expect("buffer size matches dimensions");
    buf.save(path)
        .map_err(|e| Error::format("PNG file", e.to_string()))?;
    write_meta(&meta_path(path), img.spacing_mm(), img.wavelength_px())
}

pub fn save_labelmap(lm: &LabelMap, path: &Path) -> Result<()> {
    let samples: Vec<u16> = lm.labels().iter().map(|&l| l as u16).collect();
    write_pgm(path, lm.width(), lm.height(), 255, &samples)
}

/// Load a label map; the scheme is inferred (BFG iff any bone pixel) unless given.
pub fn load_labelmap(path: &Path, scheme: Option<Scheme>) -> Result<LabelMap> {
    let pgm = read_pgm(path)?;
    let labels = pgm
        .samples
        .iter()
        .map(|&v| {
            u8::try_from(v)
                .ok()
                .and_then(Label::from_u8)
                .ok_or_else(|| Error::format("label map", format!("label value {v} not in {{0,1,2}}")))
        })
        .collect::<Result<Vec<_>>>()?;
    let scheme = scheme.unwrap_or(if labels.contains(&Label::Bone) {
        Scheme::Bfg
    } else {
        Scheme::Cbg
    });
    LabelMap::new(pgm.width, pgm.height, labels, scheme)
}

pub fn save_delineation(d: &Delineation, path: &Path) -> Result<()> {
    let mut out = String::from("col,depth_px\n");
    for (c, depth) in d.iter() {
        out.push_str(&format!("{c},{depth}\n"));
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn load_delineation(path: &Path, spacing_mm: f64) -> Result<Delineation> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    match lines.next().map(str::trim) {
        Some("col,depth_px") => {}
        other => {
            return Err(Error::format(
                "delineation CSV",
                format!("expected header 'col,depth_px', got {other:?}"),
            ))
        }
    }
    let mut d = Delineation::new(spacing_mm);
    for (n, line) in lines.enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let err = || Error::format("delineation CSV", format!("line {}: '{line}'", n + 2));
        let (c, depth) = line.split_once(',').ok_or_else(err)?;
        let c: usize = c.trim().parse().map_err(|_| err())?;
        let depth: f64 = depth.trim().parse().map_err(|_| err())?;
        if !depth.is_finite() || depth < 0.0 {
            return Err(err());
        }
        if d.get(c).is_some() {
            return Err(Error::format(
                "delineation CSV",
                format!("column {c} listed twice"),
            ));
        }
        d.insert(c, depth);
    }
    Ok(d)
}
