//! Feature-group selection by greedy backward elimination, and per-group timing.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use image::{Rgb, RgbImage};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::config::RunConfig;
use super::{ps_map, sample_training_pixels, score, solve_maps, Models, PreparedSample, ProbabilityMaps};
use crate::boost::{greedy_backward_elimination, EliminationStep};
use crate::confmap::RandomWalkFeatures;
use crate::error::{Error, Result};
use crate::features::{compute_group, FeatureInput, GROUPS};
use crate::imagecore::{Image, Scheme};
use crate::metrics::mean_metric;
use crate::phasesym::PsMap;

#[derive(Debug, Clone, PartialEq)]
pub struct FeatselectReport {
    pub trace: Vec<EliminationStep>,
    /// Median wall-clock milliseconds per feature group.
    pub timing: Vec<(String, f64)>,
}

/// Groups whose maps come out of the random-walk solve; their timing includes it.
const RANDOM_WALK_GROUPS: [&str; 3] = ["confidence map", "attenuation", "log-/Shadowing"];

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Median over `repeats` runs of each group's extraction on one image.
pub fn group_timing(img: &Image, cfg: &RunConfig, repeats: usize) -> Result<Vec<(String, f64)>> {
    let rw = RandomWalkFeatures::compute(img, &cfg.confmap, &cfg.cps_scales)?;
    let mut out = Vec::new();
    for group in GROUPS {
        let mut times = Vec::with_capacity(repeats);
        for _ in 0..repeats.max(1) {
            let t0 = Instant::now();
            let own;
            let random_walk = if RANDOM_WALK_GROUPS.contains(&group) {
                own = RandomWalkFeatures::compute(img, &cfg.confmap, &cfg.cps_scales)?;
                &own
            } else {
                &rw
            };
            let input = FeatureInput { image: img, config: &cfg.features, random_walk };
            let maps = compute_group(group, &input)?;
            std::hint::black_box(maps);
            times.push(t0.elapsed().as_secs_f64() * 1e3);
        }
        out.push((group.to_string(), median(times)));
    }
    Ok(out)
}

/// Split sample positions into (train, held-out).
pub fn holdout_split(n: usize, fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if n < 2 {
        return Err(Error::invalid("feature selection needs at least 2 samples"));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(0xfe);
    perm.shuffle(&mut rng);
    let k = ((fraction * n as f64).round() as usize).clamp(1, n - 1);
    let mut held: Vec<usize> = perm[..k].to_vec();
    let mut train: Vec<usize> = perm[k..].to_vec();
    held.sort_unstable();
    train.sort_unstable();
    Ok((train, held))
}

pub fn run_feature_selection(samples: &[PreparedSample], cfg: &RunConfig) -> Result<FeatselectReport> {
    let (train_idx, held_idx) = holdout_split(samples.len(), cfg.holdout_fraction, cfg.seed)?;
    let items: Vec<_> = train_idx
        .iter()
        .filter_map(|&i| samples[i].labels.as_ref().map(|l| (samples[i].sample.id, &samples[i].prepared.stack, l)))
        .collect();
    if items.is_empty() {
        return Err(Error::invalid("no training samples carry label maps"));
    }
    let (shadow, tissue) = sample_training_pixels(&items, cfg.per_image, cfg.seed)?;
    let ps: Vec<Option<PsMap>> = held_idx
        .iter()
        .map(|&i| match cfg.graph.scheme {
            Scheme::Cbg => ps_map(&samples[i].prepared.image, &cfg.ps).map(Some),
            Scheme::Bfg => Ok(None),
        })
        .collect::<Result<_>>()?;
    let evaluator = |ms: &crate::boost::BoostModel, mt: &crate::boost::BoostModel| -> Result<f64> {
        let models = Models { shadow: ms.clone(), tissue: mt.clone() };
        let scores: Vec<f64> = held_idx
            .par_iter()
            .zip(&ps)
            .map(|(&i, ps)| {
                let s = &samples[i];
                let probs = ProbabilityMaps {
                    p_tissue: models.tissue.predict_map(&s.prepared.stack)?,
                    p_shadow: models.shadow.predict_map(&s.prepared.stack)?,
                };
                let solved = solve_maps(&s.sample.image, &s.prepared.image, &probs, ps.as_ref(), cfg)?;
                Ok(mean_metric(&score(&s.sample, &solved.delineation)?))
            })
            .collect::<Result<_>>()?;
        Ok(scores.iter().sum::<f64>() / scores.len() as f64)
    };
    let trace = greedy_backward_elimination(&shadow, &tissue, &cfg.boost_config(), evaluator)?;
    let timing = group_timing(&samples[train_idx[0]].prepared.image, cfg, cfg.timing_repeats)?;
    Ok(FeatselectReport { trace, timing })
}

pub fn elimination_csv(trace: &[EliminationStep]) -> String {
    let mut s = String::from("step,removed_shadow,removed_tissue,shadow_groups,tissue_groups,shadow_features,tissue_features,mean_metric_mm\n");
    for (k, st) in trace.iter().enumerate() {
        writeln!(
            s,
            "{k},{},{},{},{},{},{},{}",
            st.removed_shadow.as_deref().unwrap_or(""),
            st.removed_tissue.as_deref().unwrap_or(""),
            st.shadow_groups.len(),
            st.tissue_groups.len(),
            st.shadow_features,
            st.tissue_features,
            st.metric
        )
        .unwrap();
    }
    s
}

pub fn timing_csv(timing: &[(String, f64)]) -> String {
    let mut s = String::from("group,median_ms\n");
    for (g, t) in timing {
        writeln!(s, "{g},{t:.3}").unwrap();
    }
    s
}

/// Bar per elimination step, height proportional to the metric (non-finite steps drawn red).
pub fn plot_trace(trace: &[EliminationStep], path: &Path) -> Result<()> {
    let (bar, gap, h) = (24u32, 8u32, 240u32);
    let w = (trace.len() as u32 * (bar + gap) + gap).max(1);
    let mut img = RgbImage::from_pixel(w, h, Rgb([255, 255, 255]));
    let finite_max = trace.iter().map(|s| s.metric).filter(|m| m.is_finite()).fold(0.0, f64::max);
    for (k, st) in trace.iter().enumerate() {
        let (height, color) = if st.metric.is_finite() && finite_max > 0.0 {
            (((st.metric / finite_max) * (h - 20) as f64).round() as u32, Rgb([40, 90, 170]))
        } else {
            (h - 20, Rgb([200, 40, 40]))
        };
        let x0 = gap + k as u32 * (bar + gap);
        for x in x0..x0 + bar {
            for y in h - height..h {
                img.put_pixel(x, y, color);
            }
        }
    }
    img.save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| Error::io(path, std::io::Error::other(e)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_is_disjoint() {
        let (a, b) = holdout_split(10, 0.3, 4).unwrap();
        assert_eq!((a.len(), b.len()), (7, 3));
        assert!(a.iter().all(|i| !b.contains(i)));
        assert!(holdout_split(1, 0.3, 4).is_err());
    }

    #[test]
    fn median_even_odd() {
        assert_eq!(median(vec![3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(vec![4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
