mod common;

use bonetrace::confmap::{confidence_map, ConfMapParams};
use bonetrace::imagecore::Image;
use bonetrace::raster::Raster;
use common::*;

fn image(px: Raster) -> Image {
    Image::new(px, 0.1, 1.0).unwrap()
}

#[test]
fn boundary_rows_are_exact() {
    for seed in 0..5 {
        let cm = confidence_map(&image(random_raster(seed, 20, 24)), &ConfMapParams::default()).unwrap();
        for c in 0..20 {
            assert_eq!(cm.values.get(0, c), 1.0);
            assert_eq!(cm.values.get(23, c), 0.0);
        }
    }
}

#[test]
fn interior_strictly_inside_unit_interval() {
    for seed in 0..10 {
        let cm = confidence_map(&image(random_raster(50 + seed, 32, 32)), &ConfMapParams::default()).unwrap();
        for r in 1..31 {
            for c in 0..32 {
                let v = cm.values.get(r, c);
                assert!(v > 0.0 && v < 1.0, "seed {seed} ({r},{c}) = {v}");
            }
        }
    }
}

#[test]
fn constant_image_is_row_constant_and_decreasing() {
    let cm = confidence_map(&image(Raster::filled(17, 25, 0.4)), &ConfMapParams::default()).unwrap();
    let mut prev = f64::INFINITY;
    for r in 0..25 {
        let row: Vec<f64> = (0..17).map(|c| cm.values.get(r, c)).collect();
        let spread = row.iter().copied().fold(f64::NEG_INFINITY, f64::max) - row.iter().copied().fold(f64::INFINITY, f64::min);
        assert!(spread < 1e-6, "row {r} spread {spread}");
        assert!(row[0] <= prev + 1e-12);
        prev = row[0];
    }
}

#[test]
fn hand_built_two_by_three_system() {
    let params = ConfMapParams::default();
    for px in [
        [[0.4, 0.4], [0.4, 0.4], [0.4, 0.4]],
        [[0.2, 0.9], [0.5, 0.1], [0.7, 0.3]],
        [[1.0, 0.0], [0.0, 1.0], [0.5, 0.5]],
    ] {
        let raster = Raster::from_fn(2, 3, |r, c| px[r][c]);
        let cm = confidence_map(&image(raster), &params).unwrap();
        let (x0, x1) = hand_confidence_2x3(px, &params);
        assert!((cm.values.get(1, 0) - x0).abs() < 1e-9, "{} vs {x0}", cm.values.get(1, 0));
        assert!((cm.values.get(1, 1) - x1).abs() < 1e-9);
    }
}
