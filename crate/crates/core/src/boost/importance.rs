//! Out-of-bag permutation importance and greedy backward group elimination.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{train, BoostConfig, BoostModel, TrainingSet};
use crate::error::{Error, Result};

/// Permutations averaged per feature.
pub const PERMUTATIONS: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct Importance {
    /// OOB misclassification rate of the unpermuted model.
    pub baseline_error: f64,
    /// Per feature, in registry order.
    pub features: Vec<(String, f64)>,
    /// Max over member features, groups in first-appearance order.
    pub groups: Vec<(String, f64)>,
}

impl Importance {
    pub fn group(&self, name: &str) -> Option<f64> {
        self.groups.iter().find(|(g, _)| g == name).map(|(_, v)| *v)
    }

    /// Group with the smallest importance (first in order on ties).
    pub fn weakest_group(&self) -> Option<&str> {
        let mut best: Option<&(String, f64)> = None;
        for g in &self.groups {
            if best.is_none_or(|b| g.1 < b.1) {
                best = Some(g);
            }
        }
        best.map(|(g, _)| g.as_str())
    }
}

fn error_rate(f: &[f64], rows: &[usize], labels: &[u8]) -> f64 {
    let wrong = rows
        .iter()
        .zip(f)
        .filter(|(&i, &fi)| (fi > 0.0) != (labels[i] == 1))
        .count();
    wrong as f64 / rows.len() as f64
}

/// Permutation importance on the rows each tree did not see during training.
pub fn oob_importance(m: &BoostModel, ts: &TrainingSet) -> Result<Importance> {
    if ts.len() != m.n_train || ts.features() != m.features.as_slice() {
        return Err(Error::invalid("OOB importance needs the set the model was trained on"));
    }
    let n = ts.len();
    let oob_rows: Vec<usize> = (0..n).filter(|&i| m.rounds.iter().any(|r| !r.in_bag(i))).collect();
    if oob_rows.is_empty() {
        return Err(Error::invalid("no out-of-bag rows (bag_fraction = 1?)"));
    }
    let s = m.config.shrinkage;
    let f_base: Vec<f64> = oob_rows
        .iter()
        .map(|&i| {
            m.rounds
                .iter()
                .filter(|r| !r.in_bag(i))
                .map(|r| s * r.tree.predict(ts.row(i)))
                .sum()
        })
        .collect();
    let baseline = error_rate(&f_base, &oob_rows, ts.labels());

    let d = ts.n_features();
    let mut per_feature = Vec::with_capacity(d);
    for j in 0..d {
        let using: Vec<usize> = (0..m.rounds.len()).filter(|&t| m.rounds[t].tree.uses_feature(j)).collect();
        let mut total = 0.0;
        if !using.is_empty() {
            for k in 0..PERMUTATIONS {
                let mut rng = ChaCha8Rng::seed_from_u64(m.config.seed);
                rng.set_stream((j * PERMUTATIONS + k) as u64 + 1);
                let mut perm = oob_rows.clone();
                perm.shuffle(&mut rng);
                let f: Vec<f64> = oob_rows
                    .iter()
                    .zip(&perm)
                    .zip(&f_base)
                    .map(|((&i, &src), &fb)| {
                        let x = ts.row(i);
                        let v = ts.row(src)[j];
                        let mut fi = fb;
                        for &t in &using {
                            let r = &m.rounds[t];
                            if !r.in_bag(i) {
                                fi += s * (r.tree.predict_with(x, j, v) - r.tree.predict(x));
                            }
                        }
                        fi
                    })
                    .collect();
                total += error_rate(&f, &oob_rows, ts.labels()) - baseline;
            }
        }
        per_feature.push((ts.features()[j].name.clone(), total / PERMUTATIONS as f64));
    }
    let groups = ts
        .groups()
        .into_iter()
        .map(|g| {
            let v = ts
                .features()
                .iter()
                .zip(&per_feature)
                .filter(|(fi, _)| fi.group == g)
                .map(|(_, (_, v))| *v)
                .fold(f64::NEG_INFINITY, f64::max);
            (g, v)
        })
        .collect();
    Ok(Importance { baseline_error: baseline, features: per_feature, groups })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EliminationStep {
    /// Groups dropped before this step (shadow, tissue); `None` for the initial full sets.
    pub removed_shadow: Option<String>,
    pub removed_tissue: Option<String>,
    pub shadow_groups: Vec<String>,
    pub tissue_groups: Vec<String>,
    pub shadow_features: usize,
    pub tissue_features: usize,
    /// Evaluator output for the models trained on the remaining groups.
    pub metric: f64,
}

/// Drop each classifier's least important group until one group remains.
///
/// `evaluator(shadow_model, tissue_model)` scores a model pair on held-out data.
pub fn greedy_backward_elimination<F>(
    shadow: &TrainingSet,
    tissue: &TrainingSet,
    cfg: &BoostConfig,
    mut evaluator: F,
) -> Result<Vec<EliminationStep>>
where
    F: FnMut(&BoostModel, &BoostModel) -> Result<f64>,
{
    let mut sg = shadow.groups();
    let mut tg = tissue.groups();
    if sg.len() < 2 || tg.len() < 2 {
        return Err(Error::invalid("backward elimination needs at least 2 feature groups"));
    }
    let mut trace = Vec::new();
    let (mut rs, mut rt) = (None, None);
    loop {
        let s_set = shadow.select_groups(&sg);
        let t_set = tissue.select_groups(&tg);
        let ms = train(&s_set, cfg)?;
        let mt = train(&t_set, cfg)?;
        let metric = evaluator(&ms, &mt)?;
        log::info!("elimination: {} / {} groups, metric {metric}", sg.len(), tg.len());
        trace.push(EliminationStep {
            removed_shadow: rs.take(),
            removed_tissue: rt.take(),
            shadow_groups: sg.clone(),
            tissue_groups: tg.clone(),
            shadow_features: s_set.n_features(),
            tissue_features: t_set.n_features(),
            metric,
        });
        if sg.len() <= 1 && tg.len() <= 1 {
            break;
        }
        if sg.len() > 1 {
            let imp = oob_importance(&ms, &s_set)?;
            let g = imp.weakest_group().expect("non-empty").to_string();
            sg.retain(|x| *x != g);
            rs = Some(g);
        }
        if tg.len() > 1 {
            let imp = oob_importance(&mt, &t_set)?;
            let g = imp.weakest_group().expect("non-empty").to_string();
            tg.retain(|x| *x != g);
            rt = Some(g);
        }
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boost::{FeatureInfo, RowSource};

    #[test]
    fn unused_feature_has_zero_importance() {
        let feats = vec![
            FeatureInfo { name: "a/x".into(), group: "a".into() },
            FeatureInfo { name: "b/x".into(), group: "b".into() },
        ];
        let mut ts = TrainingSet::new(feats);
        for i in 0..200 {
            let v = i as f64 / 200.0;
            ts.push(&[v, 0.25], (v > 0.5) as u8, RowSource { image: 0, row: i, col: 0 }).unwrap();
        }
        let m = train(&ts, &BoostConfig { t_size: 10, ..BoostConfig::default() }).unwrap();
        let imp = oob_importance(&m, &ts).unwrap();
        assert_eq!(imp.group("b"), Some(0.0));
        assert!(imp.group("a").unwrap() > 0.2);
        assert_eq!(imp.weakest_group(), Some("b"));
        let full = train(&ts, &BoostConfig { t_size: 2, bag_fraction: 1.0, ..BoostConfig::default() }).unwrap();
        assert!(oob_importance(&full, &ts).is_err());
    }
}
