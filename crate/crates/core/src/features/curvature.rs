//! Isophote curvature `K = −∇·(∇I/|∇I|)`.

use crate::raster::Raster;

/// Gradient magnitudes below this are treated as flat (K = 0).
pub const FLAT_GRADIENT: f64 = 1e-8;

fn central_diffs(r: &Raster) -> (Raster, Raster) {
    let (w, h) = (r.width(), r.height());
    let dx = Raster::from_fn(w, h, |row, c| {
        let (ri, ci) = (row as isize, c as isize);
        0.5 * (r.get_mirrored(ri, ci + 1) - r.get_mirrored(ri, ci - 1))
    });
    let dy = Raster::from_fn(w, h, |row, c| {
        let (ri, ci) = (row as isize, c as isize);
        0.5 * (r.get_mirrored(ri + 1, ci) - r.get_mirrored(ri - 1, ci))
    });
    (dx, dy)
}

pub fn curvature_map(img: &Raster) -> Raster {
    let (gx, gy) = central_diffs(img);
    let (w, h) = (img.width(), img.height());
    let mut nx = Raster::filled(w, h, 0.0);
    let mut ny = nx.clone();
    let mut flat = vec![false; w * h];
    for r in 0..h {
        for c in 0..w {
            let (a, b) = (gx.get(r, c), gy.get(r, c));
            let m = a.hypot(b);
            if m < FLAT_GRADIENT {
                flat[r * w + c] = true;
            } else {
                nx.set(r, c, a / m);
                ny.set(r, c, b / m);
            }
        }
    }
    let (dnx, _) = central_diffs(&nx);
    let (_, dny) = central_diffs(&ny);
    Raster::from_fn(w, h, |r, c| {
        if flat[r * w + c] {
            0.0
        } else {
            -(dnx.get(r, c) + dny.get(r, c))
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ramp_and_constant() {
        let ramp = Raster::from_fn(10, 10, |r, c| 0.05 * r as f64 + 0.02 * c as f64);
        let k = curvature_map(&ramp);
        for r in 2..8 {
            for c in 2..8 {
                assert!(k.get(r, c).abs() < 1e-12);
            }
        }
        assert!(curvature_map(&Raster::filled(5, 5, 0.2)).data().iter().all(|&v| v == 0.0));
    }
}
