use super::{Delineation, Image};
use crate::error::{Error, Result};
use crate::raster::Raster;

/// Bilinear sample at fractional (row, col), clamping to the border pixels.
pub fn sample_bilinear(r: &Raster, y: f64, x: f64) -> f64 {
    let y = y.clamp(0.0, (r.height() - 1) as f64);
    let x = x.clamp(0.0, (r.width() - 1) as f64);
    let y0 = y.floor() as usize;
    let x0 = x.floor() as usize;
    let y1 = (y0 + 1).min(r.height() - 1);
    let x1 = (x0 + 1).min(r.width() - 1);
    let fy = y - y0 as f64;
    let fx = x - x0 as f64;
    let top = r.get(y0, x0) * (1.0 - fx) + r.get(y0, x1) * fx;
    let bottom = r.get(y1, x0) * (1.0 - fx) + r.get(y1, x1) * fx;
    top * (1.0 - fy) + bottom * fy
}

/// Source coordinate of output sample `i` when mapping `n_in` samples onto `n_out`
/// over the same field of view (pixel centers aligned).
#[inline]
fn source_coord(i: usize, n_in: usize, n_out: usize) -> f64 {
    (i as f64 + 0.5) * (n_in as f64 / n_out as f64) - 0.5
}

fn resize_raster(r: &Raster, out_w: usize, out_h: usize) -> Raster {
    let xs: Vec<f64> = (0..out_w).map(|c| source_coord(c, r.width(), out_w)).collect();
    Raster::from_fn(out_w, out_h, |row, col| {
        sample_bilinear(r, source_coord(row, r.height(), out_h), xs[col])
    })
}

/// Resample to a new isotropic pixel spacing.
pub fn resample_bilinear(img: &Image, new_spacing_mm: f64) -> Result<Image> {
    if !(new_spacing_mm > 0.0 && new_spacing_mm.is_finite()) {
        return Err(Error::invalid(format!(
            "new spacing must be > 0, got {new_spacing_mm}"
        )));
    }
    let scale = img.spacing_mm() / new_spacing_mm;
    let out_w = (img.width() as f64 * scale).round() as usize;
    let out_h = (img.height() as f64 * scale).round() as usize;
    if out_w == 0 || out_h == 0 {
        return Err(Error::invalid(format!(
            "resampling {}x{} to spacing {new_spacing_mm} mm leaves no pixels",
            img.width(),
            img.height()
        )));
    }
    let pixels = resize_raster(img.pixels(), out_w, out_h).map(|v| v.clamp(0.0, 1.0));
    Image::new(pixels, new_spacing_mm, img.wavelength_px() * scale)
}

/// Distance (in source pixels) from every source pixel to the nearest delineation point.
fn distance_map(d: &Delineation, width: usize, height: usize) -> Raster {
    let points: Vec<Option<f64>> = (0..width).map(|c| d.get(c)).collect();
    Raster::from_fn(width, height, |r, c| {
        let mut best = f64::INFINITY;
        // Search outward; a column |dc| away is at least |dc| distant.
        for dc in 0..width {
            if dc as f64 >= best {
                break;
            }
            for col in [c.checked_sub(dc), Some(c + dc).filter(|&x| x < width)]
                .into_iter()
                .flatten()
            {
                if let Some(depth) = points[col] {
                    let dy = r as f64 - depth;
                    let dist = ((dc * dc) as f64 + dy * dy).sqrt();
                    best = best.min(dist);
                }
            }
        }
        best
    })
}

/// Carry a delineation from the pixel grid of `from` onto that of `to`.
///
/// The curve is rasterized to a distance map, bilinearly resized and thresholded at
/// half the coarser of the two spacings. In each target column the topmost run of
/// pixels under the threshold is taken and the depth is refined to sub-pixel
/// precision by fitting a V to the distance minimum.
pub fn resize_delineation(d: &Delineation, from: &Image, to: &Image) -> Delineation {
    let mut out = Delineation::new(to.spacing_mm());
    if d.is_empty() {
        return out;
    }
    if from.width() == to.width() && from.height() == to.height() {
        return d.clone().with_spacing(to.spacing_mm());
    }
    let src_mm = distance_map(d, from.width(), from.height()).map(|v| v * from.spacing_mm());
    let (w, h) = (to.width(), to.height());
    let dist = resize_raster(&src_mm, w, h);
    let threshold = 0.5 * from.spacing_mm().max(to.spacing_mm()) * (1.0 + 1e-9);
    for c in 0..w {
        let Some(top) = (0..h).find(|&r| dist.get(r, c) <= threshold) else {
            continue;
        };
        let mut end = top;
        while end + 1 < h && dist.get(end + 1, c) <= threshold {
            end += 1;
        }
        let best = (top..=end)
            .min_by(|&a, &b| dist.get(a, c).total_cmp(&dist.get(b, c)))
            .expect("run is nonempty");
        let mut depth = best as f64;
        if best > 0 && best + 1 < h {
            let (a, b, cc) = (dist.get(best - 1, c), dist.get(best, c), dist.get(best + 1, c));
            let slope = a.max(cc) - b;
            if slope > 0.0 {
                depth += ((a - cc) / (2.0 * slope)).clamp(-0.5, 0.5);
            }
        }
        out.insert(c, depth.clamp(0.0, (h - 1) as f64));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_survives_resampling() {
        let img = Image::new(Raster::filled(7, 5, 0.7), 0.2, 4.0).unwrap();
        for sp in [0.1, 0.13, 0.4] {
            let out = resample_bilinear(&img, sp).unwrap();
            assert!(out.pixels().data().iter().all(|&v| (v - 0.7).abs() < 1e-12));
        }
    }

    #[test]
    fn output_dimensions_round() {
        let img = Image::new(Raster::filled(10, 4, 0.0), 0.3, 4.0).unwrap();
        let out = resample_bilinear(&img, 0.2).unwrap();
        assert_eq!((out.width(), out.height()), (15, 6));
        assert!((out.wavelength_px() - 6.0).abs() < 1e-12);
        assert!(resample_bilinear(&img, 100.0).is_err());
    }

    #[test]
    fn horizontal_blend_is_symmetric() {
        let r = Raster::new(2, 2, vec![0.0, 1.0, 0.0, 1.0]);
        let img = Image::new(r, 0.2, 2.0).unwrap();
        let up = resample_bilinear(&img, 0.1).unwrap();
        assert_eq!(up.width(), 4);
        for row in 0..4 {
            let mid = 0.5 * (up.get(row, 1) + up.get(row, 2));
            assert!((mid - 0.5).abs() < 1e-12);
        }
        assert!((sample_bilinear(img.pixels(), 0.0, 0.5) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn single_point_upsampled() {
        let a = Image::new(Raster::filled(8, 16, 0.0), 0.2, 2.0).unwrap();
        let b = resample_bilinear(&a, 0.1).unwrap();
        let d = Delineation::from_entries(0.2, [(4, 10.0)]);
        let out = resize_delineation(&d, &a, &b);
        let depth = out.get(8).expect("column 8 present");
        assert!((depth - 20.5).abs() <= 1.0, "depth {depth}");
        assert!(out.iter().all(|(c, _)| (7..=10).contains(&c)));
    }
}
