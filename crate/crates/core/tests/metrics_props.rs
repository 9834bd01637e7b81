use bonetrace::imagecore::Delineation;
use bonetrace::metrics::{evaluate, mean_metric, MetricsReport};
use proptest::prelude::*;

fn curve(depths: &[Option<f64>], spacing: f64) -> Delineation {
    Delineation::from_entries(spacing, depths.iter().enumerate().filter_map(|(c, d)| d.map(|d| (c, d))))
}

fn report(rmse: f64, ohd: f64, shd: f64) -> MetricsReport {
    MetricsReport {
        rmse_mm: rmse,
        med_mm: 0.0,
        ohd_mm: ohd,
        shd_mm: shd,
        ohd95_mm: 0.0,
        shd95_mm: 0.0,
        mse_mm: 0.0,
        mp_percent: 0.0,
        gs_columns: 0,
        pred_columns: 0,
        both_columns: 0,
        gs_only_columns: 0,
    }
}

#[test]
fn reference_rows_average() {
    assert!((mean_metric(&report(0.42, 1.35, 2.77)) - 1.51).abs() < 0.005);
    assert!((mean_metric(&report(0.56, 1.59, 3.37)) - 1.84).abs() < 0.005);
}

#[test]
fn uniform_offset() {
    let gs = curve(&vec![Some(20.0); 40], 0.1);
    let pred = curve(&vec![Some(23.0); 40], 0.1);
    let r = evaluate(&pred, &gs, 0.1).unwrap();
    for v in [r.rmse_mm, r.mse_mm, r.ohd_mm] {
        assert!((v - 0.3).abs() < 1e-12);
    }
}

fn depths() -> impl Strategy<Value = Vec<Option<f64>>> {
    prop::collection::vec(prop::option::weighted(0.8, 0.0f64..100.0), 2..40)
}

proptest! {
    #[test]
    fn identity_is_zero(d in depths()) {
        prop_assume!(d.iter().any(Option::is_some));
        let c = curve(&d, 0.2);
        let r = evaluate(&c, &c, 0.2).unwrap();
        for v in [r.rmse_mm, r.med_mm, r.ohd_mm, r.shd_mm, r.ohd95_mm, r.shd95_mm, r.mse_mm, r.mp_percent] {
            prop_assert_eq!(v, 0.0);
        }
    }

    #[test]
    fn common_shift_leaves_metrics(a in depths(), b in depths(), shift in -10.0f64..10.0) {
        prop_assume!(a.iter().any(Option::is_some) && b.iter().any(Option::is_some));
        let up = |v: &[Option<f64>]| v.iter().map(|d| d.map(|x| x + shift)).collect::<Vec<_>>();
        let r0 = evaluate(&curve(&a, 0.1), &curve(&b, 0.1), 0.1).unwrap();
        let r1 = evaluate(&curve(&up(&a), 0.1), &curve(&up(&b), 0.1), 0.1).unwrap();
        for (x, y) in [(r0.rmse_mm, r1.rmse_mm), (r0.ohd_mm, r1.ohd_mm), (r0.shd_mm, r1.shd_mm), (r0.mse_mm, r1.mse_mm)] {
            prop_assert!((x - y).abs() <= 1e-9 * (1.0 + x.abs()) || (x.is_infinite() && y.is_infinite()));
        }
        prop_assert_eq!(r0.mp_percent, r1.mp_percent);
    }

    #[test]
    fn distances_scale_with_spacing(a in depths(), b in depths(), k in 0.1f64..10.0) {
        prop_assume!(a.iter().any(Option::is_some) && b.iter().any(Option::is_some));
        let r0 = evaluate(&curve(&a, 0.1), &curve(&b, 0.1), 0.1).unwrap();
        let r1 = evaluate(&curve(&a, 0.1 * k), &curve(&b, 0.1 * k), 0.1 * k).unwrap();
        if r0.rmse_mm.is_finite() {
            prop_assert!((r1.rmse_mm - k * r0.rmse_mm).abs() <= 1e-9 * (1.0 + r1.rmse_mm));
            if r0.shd_mm.is_finite() {
                prop_assert!((r1.shd_mm - k * r0.shd_mm).abs() <= 1e-9 * (1.0 + r1.shd_mm));
            } else {
                // No shared columns: undefined at every spacing.
                prop_assert_eq!(r1.shd_mm, f64::INFINITY);
            }
        }
    }

    #[test]
    fn shd_bounds_ohd(a in depths(), b in depths()) {
        prop_assume!(a.iter().any(Option::is_some) && b.iter().any(Option::is_some));
        let r = evaluate(&curve(&a, 0.1), &curve(&b, 0.1), 0.1).unwrap();
        prop_assert!(r.rmse_mm <= r.ohd_mm + 1e-12);
        prop_assert!(r.med_mm <= r.rmse_mm + 1e-12);
        prop_assert!((0.0..=100.0).contains(&r.mp_percent));
    }
}
