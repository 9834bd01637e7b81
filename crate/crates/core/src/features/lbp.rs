//! Local binary patterns and census transforms, in the 3×3 and the 5×5 checkerboard form.

use crate::raster::Raster;

/// 3×3 ring, clockwise from the top-left neighbor. Neighbor `b` drives bit `b`.
pub const RING: [(isize, isize); 8] = [
    (-1, -1),
    (-1, 0),
    (-1, 1),
    (0, 1),
    (1, 1),
    (1, 0),
    (1, -1),
    (0, -1),
];

/// Even-parity (checkerboard) offsets of the 5×5 neighborhood, center excluded, in
/// row-major order. Offset `b` drives bit `b`; its partner is the point reflection `-b`.
pub const CHECKERBOARD: [(isize, isize); 12] = [
    (-2, -2),
    (-2, 0),
    (-2, 2),
    (-1, -1),
    (-1, 1),
    (0, -2),
    (0, 2),
    (1, -1),
    (1, 1),
    (2, -2),
    (2, 0),
    (2, 2),
];

#[derive(Debug, Clone)]
pub struct LbpMaps {
    pub lbp: Raster,
    pub mct: Raster,
    pub ext_lbp: Raster,
    pub ext_mct: Raster,
}

/// `a ≥ b` up to a relative tolerance, so that rounding from affine rescaling
/// cannot flip a tie.
#[inline]
fn ge_tol(a: f64, b: f64, scale: f64) -> bool {
    a - b >= -1e-9 * scale
}

pub fn lbp_family(img: &Raster) -> LbpMaps {
    let (w, h) = (img.width(), img.height());
    let mut lbp = Raster::filled(w, h, 0.0);
    let mut mct = lbp.clone();
    let mut ext_lbp = lbp.clone();
    let mut ext_mct = lbp.clone();
    for r in 0..h {
        for c in 0..w {
            let (ri, ci) = (r as isize, c as isize);
            let at = |dr: isize, dc: isize| img.get_mirrored(ri + dr, ci + dc);
            let center = img.get(r, c);

            // Differences from the center keep the threshold tests affine-invariant.
            let ring: Vec<f64> = RING.iter().map(|&(dr, dc)| at(dr, dc) - center).collect();
            let ring_mean = ring.iter().sum::<f64>() / 9.0;
            let ring_scale = ring.iter().fold(0.0f64, |m, d| m.max(d.abs()));
            let mut code_lbp = 0u32;
            let mut code_mct = 0u32;
            for (b, d) in ring.iter().enumerate() {
                if *d >= 0.0 {
                    code_lbp |= 1 << b;
                }
                if ge_tol(*d, ring_mean, ring_scale) {
                    code_mct |= 1 << b;
                }
            }

            let mut sum25 = 0.0;
            let mut scale25 = 0.0f64;
            for dr in -2..=2 {
                for dc in -2..=2 {
                    let d = at(dr, dc) - center;
                    sum25 += d;
                    scale25 = scale25.max(d.abs());
                }
            }
            // center − mean of the 25 values, expressed in center-relative units.
            let ext_threshold = -sum25 / 25.0;
            let mut code_elbp = 0u32;
            let mut code_emct = 0u32;
            for (b, &(dr, dc)) in CHECKERBOARD.iter().enumerate() {
                let diff = at(dr, dc) - at(-dr, -dc);
                if diff >= 0.0 {
                    code_elbp |= 1 << b;
                }
                if ge_tol(diff, ext_threshold, scale25) {
                    code_emct |= 1 << b;
                }
            }

            lbp.set(r, c, code_lbp as f64 / 256.0);
            mct.set(r, c, code_mct as f64 / 256.0);
            ext_lbp.set(r, c, code_elbp as f64 / 4096.0);
            ext_mct.set(r, c, code_emct as f64 / 4096.0);
        }
    }
    LbpMaps {
        lbp,
        mct,
        ext_lbp,
        ext_mct,
    }
}
