//! Curve-to-curve distances between predicted and gold-standard delineations.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::imagecore::Delineation;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsReport {
    pub rmse_mm: f64,
    pub med_mm: f64,
    pub ohd_mm: f64,
    pub shd_mm: f64,
    pub ohd95_mm: f64,
    pub shd95_mm: f64,
    /// Mean vertical error over columns present in both delineations.
    pub mse_mm: f64,
    pub mp_percent: f64,
    pub gs_columns: usize,
    pub pred_columns: usize,
    pub both_columns: usize,
    pub gs_only_columns: usize,
}

pub const CSV_HEADER: &str = "image,rmse_mm,med_mm,ohd_mm,shd_mm,ohd95_mm,shd95_mm,mse_mm,mp_percent,gs_columns,pred_columns,both_columns,gs_only_columns";

/// Percentile with linear interpolation between order statistics (`q` in `[0, 1]`).
pub fn percentile(values: &[f64], q: f64) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (pos - lo as f64) * (v[hi] - v[lo])
}

fn points(d: &Delineation, spacing: f64) -> Vec<(f64, f64)> {
    d.iter().map(|(c, z)| (c as f64 * spacing, z * spacing)).collect()
}

/// For each point of `from`, distance to the nearest point of `to`.
fn directed(from: &[(f64, f64)], to: &[(f64, f64)]) -> Vec<f64> {
    from.iter()
        .map(|&(x, y)| {
            to.iter()
                .map(|&(u, v)| (x - u).hypot(y - v))
                .fold(f64::INFINITY, f64::min)
        })
        .collect()
}

fn max_of(v: &[f64]) -> f64 {
    v.iter().copied().fold(0.0, f64::max)
}

pub fn evaluate(pred: &Delineation, gs: &Delineation, spacing_mm: f64) -> Result<MetricsReport> {
    if gs.is_empty() {
        return Err(Error::invalid("gold standard delineation is empty"));
    }
    if !(spacing_mm > 0.0) {
        return Err(Error::invalid("spacing must be > 0"));
    }
    let g = points(gs, spacing_mm);
    let p = points(pred, spacing_mm);
    let both: Vec<(f64, f64)> = gs
        .iter()
        .filter_map(|(c, z)| pred.get(c).map(|pz| (z, pz)))
        .collect();
    let gs_only = gs.len() - both.len();
    let mp = 100.0 * gs_only as f64 / gs.len() as f64;
    let inf = f64::INFINITY;
    let mut r = MetricsReport {
        rmse_mm: inf,
        med_mm: inf,
        ohd_mm: inf,
        shd_mm: inf,
        ohd95_mm: inf,
        shd95_mm: inf,
        mse_mm: inf,
        mp_percent: mp,
        gs_columns: gs.len(),
        pred_columns: pred.len(),
        both_columns: both.len(),
        gs_only_columns: gs_only,
    };
    if p.is_empty() {
        return Ok(r);
    }
    let d = directed(&g, &p);
    let n = d.len() as f64;
    r.rmse_mm = (d.iter().map(|x| x * x).sum::<f64>() / n).sqrt();
    r.med_mm = d.iter().sum::<f64>() / n;
    r.ohd_mm = max_of(&d);
    r.ohd95_mm = percentile(&d, 0.95);

    let restricted: Vec<(f64, f64)> = pred
        .iter()
        .filter(|(c, _)| gs.get(*c).is_some())
        .map(|(c, z)| (c as f64 * spacing_mm, z * spacing_mm))
        .collect();
    if !restricted.is_empty() {
        let a = directed(&g, &restricted);
        let b = directed(&restricted, &g);
        r.shd_mm = max_of(&a).max(max_of(&b));
        let pooled: Vec<f64> = a.into_iter().chain(b).collect();
        r.shd95_mm = percentile(&pooled, 0.95);
    }
    if !both.is_empty() {
        r.mse_mm = both.iter().map(|(a, b)| (a - b).abs() * spacing_mm).sum::<f64>() / both.len() as f64;
    }
    Ok(r)
}

/// Mean of RMSE, oHD and sHD, the model-selection objective.
pub fn mean_metric(r: &MetricsReport) -> f64 {
    (r.rmse_mm + r.ohd_mm + r.shd_mm) / 3.0
}

impl MetricsReport {
    fn csv_fields(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            self.rmse_mm,
            self.med_mm,
            self.ohd_mm,
            self.shd_mm,
            self.ohd95_mm,
            self.shd95_mm,
            self.mse_mm,
            self.mp_percent,
            self.gs_columns,
            self.pred_columns,
            self.both_columns,
            self.gs_only_columns
        )
    }
}

/// Field-wise mean of a set of reports (counts are summed).
pub fn aggregate(reports: &[MetricsReport]) -> Option<MetricsReport> {
    if reports.is_empty() {
        return None;
    }
    let n = reports.len() as f64;
    let mean = |f: fn(&MetricsReport) -> f64| reports.iter().map(f).sum::<f64>() / n;
    let sum = |f: fn(&MetricsReport) -> usize| reports.iter().map(f).sum::<usize>();
    Some(MetricsReport {
        rmse_mm: mean(|r| r.rmse_mm),
        med_mm: mean(|r| r.med_mm),
        ohd_mm: mean(|r| r.ohd_mm),
        shd_mm: mean(|r| r.shd_mm),
        ohd95_mm: mean(|r| r.ohd95_mm),
        shd95_mm: mean(|r| r.shd95_mm),
        mse_mm: mean(|r| r.mse_mm),
        mp_percent: mean(|r| r.mp_percent),
        gs_columns: sum(|r| r.gs_columns),
        pred_columns: sum(|r| r.pred_columns),
        both_columns: sum(|r| r.both_columns),
        gs_only_columns: sum(|r| r.gs_only_columns),
    })
}

/// One row per image plus a trailing `mean` row.
pub fn to_csv(rows: &[(String, MetricsReport)]) -> String {
    let mut s = String::new();
    writeln!(s, "{CSV_HEADER}").unwrap();
    for (name, r) in rows {
        writeln!(s, "{name},{}", r.csv_fields()).unwrap();
    }
    let reports: Vec<MetricsReport> = rows.iter().map(|(_, r)| *r).collect();
    if let Some(agg) = aggregate(&reports) {
        writeln!(s, "mean,{}", agg.csv_fields()).unwrap();
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat(cols: impl IntoIterator<Item = usize>, depth: f64) -> Delineation {
        Delineation::from_entries(0.1, cols.into_iter().map(|c| (c, depth)))
    }

    #[test]
    fn identity_is_zero() {
        let gs = Delineation::from_entries(0.1, [(0, 3.0), (1, 4.5), (5, 2.0)]);
        let r = evaluate(&gs, &gs, 0.1).unwrap();
        assert_eq!((r.rmse_mm, r.med_mm, r.ohd_mm, r.shd_mm, r.mse_mm, r.mp_percent), (0.0, 0.0, 0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn uniform_offset() {
        let r = evaluate(&flat(0..20, 13.0), &flat(0..20, 10.0), 0.1).unwrap();
        for v in [r.rmse_mm, r.mse_mm, r.ohd_mm, r.shd_mm, r.med_mm] {
            assert!((v - 0.3).abs() < 1e-12, "{v}");
        }
    }

    #[test]
    fn miss_percentage_and_empty() {
        let r = evaluate(&flat(0..2, 5.0), &flat(0..4, 5.0), 0.1).unwrap();
        assert_eq!(r.mp_percent, 50.0);
        let r = evaluate(&Delineation::new(0.1), &flat(0..4, 5.0), 0.1).unwrap();
        assert_eq!(r.mp_percent, 100.0);
        assert!(r.rmse_mm.is_infinite() && r.shd_mm.is_infinite());
        assert!(evaluate(&flat(0..2, 5.0), &Delineation::new(0.1), 0.1).is_err());
    }

    #[test]
    fn percentile_interpolates() {
        assert_eq!(percentile(&[0.0, 10.0], 0.95), 9.5);
        assert_eq!(percentile(&[3.0], 0.95), 3.0);
        assert_eq!(percentile(&[1.0, 2.0, 3.0, 4.0, 5.0], 0.5), 3.0);
    }

    #[test]
    fn csv_has_mean_row() {
        let r = evaluate(&flat(0..2, 5.0), &flat(0..2, 5.0), 0.1).unwrap();
        let csv = to_csv(&[("a".into(), r), ("b".into(), r)]);
        assert_eq!(csv.lines().count(), 4);
        assert!(csv.lines().last().unwrap().starts_with("mean,0,"));
    }
}
