//! Cross-validated grid search over the phase-symmetry and graph parameters.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::config::{parse_f64_list, parse_usize_list, RunConfig};
use super::{classify, ps_map, score, solve_maps, train_on, PreparedSample, ProbabilityMaps};
use crate::error::{Error, Result};
use crate::metrics::{mean_metric, MetricsReport};
use crate::phasesym::{PsConfig, PsMap};

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub lambda_px: Vec<f64>,
    pub half_angle: Vec<f64>,
    pub n_orient: Vec<usize>,
    pub sigma0: Vec<f64>,
    pub mu: Vec<f64>,
    pub k1: Vec<f64>,
    pub k2: Vec<f64>,
    pub k3: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub lambda_px: f64,
    pub half_angle: f64,
    pub n_orient: usize,
    pub sigma0: f64,
    pub mu: f64,
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
}

impl GridPoint {
    pub fn apply(&self, cfg: &RunConfig) -> RunConfig {
        let mut c = cfg.clone();
        c.ps.lambda_px = self.lambda_px;
        c.ps.half_angle = self.half_angle;
        c.ps.n_orient = self.n_orient;
        c.ps.sigma0 = self.sigma0;
        c.graph.mu = self.mu;
        c.graph.k1 = self.k1;
        c.graph.k2 = self.k2;
        c.graph.k3 = self.k3;
        c
    }

    fn csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.lambda_px, self.half_angle, self.n_orient, self.sigma0, self.mu, self.k1, self.k2, self.k3
        )
    }
}

impl GridSpec {
    /// The single point of the current configuration.
    pub fn from_config(cfg: &RunConfig) -> GridSpec {
        GridSpec {
            lambda_px: vec![cfg.ps.lambda_px],
            half_angle: vec![cfg.ps.half_angle],
            n_orient: vec![cfg.ps.n_orient],
            sigma0: vec![cfg.ps.sigma0],
            mu: vec![cfg.graph.mu],
            k1: vec![cfg.graph.k1],
            k2: vec![cfg.graph.k2],
            k3: vec![cfg.graph.k3],
        }
    }

    /// `key = v1,v2,...` lines using the config key names; unlisted keys keep the config value.
    pub fn parse(text: &str, cfg: &RunConfig) -> Result<GridSpec> {
        let mut g = GridSpec::from_config(cfg);
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::format("grid", format!("line {}: expected 'key = v1,v2'", n + 1)))?;
            let (k, v) = (k.trim(), v.trim());
            match k {
                "ps.lambda_px" => g.lambda_px = parse_f64_list(k, v)?,
                "ps.half_angle" => g.half_angle = parse_f64_list(k, v)?,
                "ps.n_orient" => g.n_orient = parse_usize_list(k, v)?,
                "ps.sigma0" => g.sigma0 = parse_f64_list(k, v)?,
                "graph.mu" => g.mu = parse_f64_list(k, v)?,
                "graph.k1" => g.k1 = parse_f64_list(k, v)?,
                "graph.k2" => g.k2 = parse_f64_list(k, v)?,
                "graph.k3" => g.k3 = parse_f64_list(k, v)?,
                _ => return Err(Error::invalid(format!("unknown grid key '{k}'"))),
            }
        }
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        let eps = 1e-9;
        let check = |name: &str, v: &[f64], lo: f64, hi: f64| -> Result<()> {
            if v.is_empty() {
                return Err(Error::invalid(format!("grid {name} is empty")));
            }
            if let Some(x) = v.iter().find(|&&x| !(x >= lo - eps && x <= hi + eps)) {
                return Err(Error::invalid(format!("grid {name} value {x} outside [{lo}, {hi}]")));
            }
            Ok(())
        };
        check("ps.lambda_px", &self.lambda_px, 25.0, 75.0)?;
        check("ps.half_angle", &self.half_angle, PI / 12.0, PI / 3.0)?;
        let n: Vec<f64> = self.n_orient.iter().map(|&x| x as f64).collect();
        check("ps.n_orient", &n, 1.0, 3.0)?;
        check("ps.sigma0", &self.sigma0, 0.01, 10.0)?;
        check("graph.mu", &self.mu, 0.1, 5.0)?;
        check("graph.k1", &self.k1, 0.1, 1.0)?;
        check("graph.k2", &self.k2, 0.1, 1.0)?;
        check("graph.k3", &self.k3, 0.1, 1000.0)
    }

    /// Cartesian product in key order, last key varying fastest.
    pub fn points(&self) -> Vec<GridPoint> {
        let mut out = Vec::new();
        for &lambda_px in &self.lambda_px {
            for &half_angle in &self.half_angle {
                for &n_orient in &self.n_orient {
                    for &sigma0 in &self.sigma0 {
                        for &mu in &self.mu {
                            for &k1 in &self.k1 {
                                for &k2 in &self.k2 {
                                    for &k3 in &self.k3 {
                                        out.push(GridPoint { lambda_px, half_angle, n_orient, sigma0, mu, k1, k2, k3 });
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

/// Best grid point of one subset with its cross-validated scores.
#[derive(Debug, Clone, PartialEq)]
pub struct SubsetResult {
    pub subset: usize,
    pub point: GridPoint,
    pub rmse_mm: f64,
    pub ohd_mm: f64,
    pub shd_mm: f64,
    pub mean_mm: f64,
}

/// Objective of every grid point on every subset.
#[derive(Debug, Clone, PartialEq)]
pub struct GridReport {
    pub best: Vec<SubsetResult>,
    pub all: Vec<SubsetResult>,
}

pub const REPORT_HEADER: &str = "subset,lambda_ps,angle_ps,n_r,sigma0,mu,k1,k2,k3,rmse_mm,ohd_mm,shd_mm,mean_mm";

pub fn report_csv(rows: &[SubsetResult]) -> String {
    let mut s = String::new();
    writeln!(s, "{REPORT_HEADER}").unwrap();
    for r in rows {
        writeln!(s, "{},{},{},{},{},{}", r.subset, r.point.csv(), r.rmse_mm, r.ohd_mm, r.shd_mm, r.mean_mm).unwrap();
    }
    s
}

/// Partition sample positions into `subsets` leave-out groups and return each subset.
pub fn build_subsets(n: usize, subsets: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut perm: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    perm.shuffle(&mut rng);
    (0..subsets)
        .map(|s| {
            let mut keep: Vec<usize> = perm.iter().enumerate().filter(|(k, _)| k % subsets != s).map(|(_, &i)| i).collect();
            keep.sort_unstable();
            keep
        })
        .collect()
}

fn ps_key(p: &PsConfig) -> (u64, u64, usize) {
    (p.lambda_px.to_bits(), p.half_angle.to_bits(), p.n_orient)
}

struct FoldScores {
    rmse: f64,
    ohd: f64,
    shd: f64,
    mean: f64,
}

fn mean_of(v: &[MetricsReport]) -> FoldScores {
    let n = v.len() as f64;
    let avg = |f: fn(&MetricsReport) -> f64| v.iter().map(f).sum::<f64>() / n;
    FoldScores {
        rmse: avg(|r| r.rmse_mm),
        ohd: avg(|r| r.ohd_mm),
        shd: avg(|r| r.shd_mm),
        mean: v.iter().map(mean_metric).sum::<f64>() / n,
    }
}

/// For each subset, run k-fold cross-validation at every grid point and keep the point with
/// the lowest mean metric averaged over folds. Failing points score ∞.
pub fn crossval_gridsearch(samples: &[PreparedSample], grid: &GridSpec, cfg: &RunConfig) -> Result<GridReport> {
    grid.validate()?;
    let points = grid.points();
    let n = samples.len();
    if n < cfg.subsets {
        return Err(Error::invalid(format!("{n} samples cannot form {} subsets", cfg.subsets)));
    }

    // Phase symmetry depends only on the filter parameters; compute each variant once.
    let mut ps_cache: HashMap<(usize, (u64, u64, usize)), PsMap> = HashMap::new();
    for p in &points {
        let pc = p.apply(cfg).ps;
        for (i, s) in samples.iter().enumerate() {
            if let std::collections::hash_map::Entry::Vacant(e) = ps_cache.entry((i, ps_key(&pc))) {
                e.insert(ps_map(&s.prepared.image, &pc)?);
            }
        }
    }

    let mut best = Vec::new();
    let mut all = Vec::new();
    for (si, subset) in build_subsets(n, cfg.subsets, cfg.seed).into_iter().enumerate() {
        if subset.len() < cfg.folds {
            return Err(Error::invalid(format!(
                "subset {si} has {} samples, fewer than {} folds",
                subset.len(),
                cfg.folds
            )));
        }
        let mut order = subset.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(si as u64 + 1);
        order.shuffle(&mut rng);
        // Per fold: the held-out positions and their probability maps.
        let mut folds: Vec<Vec<(usize, ProbabilityMaps)>> = Vec::new();
        for f in 0..cfg.folds {
            let test: Vec<usize> = order.iter().enumerate().filter(|(k, _)| k % cfg.folds == f).map(|(_, &i)| i).collect();
            let train: Vec<&PreparedSample> = order
                .iter()
                .enumerate()
                .filter(|(k, _)| k % cfg.folds != f)
                .map(|(_, &i)| &samples[i])
                .collect();
            let models = train_on(&train, cfg)?;
            let probs = test
                .par_iter()
                .map(|&i| Ok((i, classify(&samples[i].prepared.stack, &models)?)))
                .collect::<Result<Vec<_>>>()?;
            folds.push(probs);
        }
        let mut best_row: Option<SubsetResult> = None;
        for p in &points {
            let pc = p.apply(cfg);
            let key = ps_key(&pc.ps);
            let fold_scores: Vec<FoldScores> = folds
                .iter()
                .map(|fold| {
                    let reports: Result<Vec<MetricsReport>> = fold
                        .par_iter()
                        .map(|(i, probs)| {
                            let s = &samples[*i];
                            let ps = ps_cache.get(&(*i, key));
                            let solved = solve_maps(&s.sample.image, &s.prepared.image, probs, ps, &pc)?;
                            score(&s.sample, &solved.delineation)
                        })
                        .collect();
                    match reports {
                        Ok(r) => mean_of(&r),
                        Err(e) => {
                            log::warn!("grid point {p:?} failed: {e}");
                            FoldScores { rmse: f64::INFINITY, ohd: f64::INFINITY, shd: f64::INFINITY, mean: f64::INFINITY }
                        }
                    }
                })
                .collect();
            let k = fold_scores.len() as f64;
            let row = SubsetResult {
                subset: si,
                point: *p,
                rmse_mm: fold_scores.iter().map(|f| f.rmse).sum::<f64>() / k,
                ohd_mm: fold_scores.iter().map(|f| f.ohd).sum::<f64>() / k,
                shd_mm: fold_scores.iter().map(|f| f.shd).sum::<f64>() / k,
                mean_mm: fold_scores.iter().map(|f| f.mean).sum::<f64>() / k,
            };
            log::info!("subset {si} point {p:?}: mean {}", row.mean_mm);
            if best_row.as_ref().is_none_or(|b| row.mean_mm < b.mean_mm) {
                best_row = Some(row.clone());
            }
            all.push(row);
        }
        best.push(best_row.expect("grid has at least one point"));
    }
    Ok(GridReport { best, all })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn subsets_leave_each_sample_out_once() {
        let subs = build_subsets(12, 5, 1);
        assert_eq!(subs.len(), 5);
        for i in 0..12 {
            assert_eq!(subs.iter().filter(|s| !s.contains(&i)).count(), 1);
        }
    }

    #[test]
    fn grid_parsing_and_ranges() {
        let cfg = RunConfig::default();
        let g = GridSpec::parse("graph.k3 = 0.1, 100\nps.sigma0 = 0.01,10", &cfg).unwrap();
        assert_eq!(g.points().len(), 4);
        assert!(GridSpec::parse("graph.k3 = 2000", &cfg).is_err());
        assert!(GridSpec::parse("graph.k9 = 1", &cfg).is_err());
        assert_eq!(GridSpec::from_config(&cfg).points().len(), 1);
    }
}
