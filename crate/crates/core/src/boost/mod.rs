//! Bagged LogitBoost with shallow regression trees.

mod importance;
pub mod tree;

pub use importance::{greedy_backward_elimination, oob_importance, EliminationStep, Importance};
pub use tree::{Node, Tree};

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureStack;
use crate::raster::Raster;
use tree::{fit_tree, FitParams, Presorted};

/// Working responses are clamped to this magnitude.
pub const Z_MAX: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoostConfig {
    pub t_size: usize,
    pub tree_depth: usize,
    pub bag_fraction: f64,
    pub shrinkage: f64,
    pub min_leaf: usize,
    pub seed: u64,
}

impl Default for BoostConfig {
    fn default() -> Self {
        BoostConfig {
            t_size: 50,
            tree_depth: 2,
            bag_fraction: 0.632,
            shrinkage: 0.1,
            min_leaf: 20,
            seed: 0,
        }
    }
}

impl BoostConfig {
    pub fn validate(&self) -> Result<()> {
        if self.t_size == 0 {
            return Err(Error::invalid("boost.t_size must be >= 1"));
        }
        if !(self.bag_fraction > 0.0 && self.bag_fraction <= 1.0) {
            return Err(Error::invalid("boost.bag_fraction must be in (0,1]"));
        }
        if !(self.shrinkage > 0.0 && self.shrinkage.is_finite()) {
            return Err(Error::invalid("boost.shrinkage must be > 0"));
        }
        if self.tree_depth == 0 {
            return Err(Error::invalid("boost.tree_depth must be >= 1"));
        }
        Ok(())
    }
}

/// Feature identity recorded in datasets and models.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureInfo {
    pub name: String,
    pub group: String,
}

/// Where a training row came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RowSource {
    pub image: usize,
    pub row: usize,
    pub col: usize,
}

/// Row-major binary training data.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    features: Vec<FeatureInfo>,
    x: Vec<f64>,
    labels: Vec<u8>,
    sources: Vec<RowSource>,
}

impl TrainingSet {
    pub fn new(features: Vec<FeatureInfo>) -> Self {
        TrainingSet { features, x: Vec::new(), labels: Vec::new(), sources: Vec::new() }
    }

    /// Features registered in stack order.
    pub fn for_stack(stack: &FeatureStack) -> Self {
        let features = stack
            .names()
            .into_iter()
            .enumerate()
            .map(|(i, name)| FeatureInfo { name, group: stack.group_of(i).to_string() })
            .collect();
        TrainingSet::new(features)
    }

    pub fn push(&mut self, row: &[f64], label: u8, source: RowSource) -> Result<()> {
        if row.len() != self.features.len() {
            return Err(Error::dims(self.features.len(), row.len()));
        }
        if label > 1 {
            return Err(Error::invalid(format!("label {label} is not binary")));
        }
        if let Some(v) = row.iter().find(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite feature value {v}")));
        }
        self.x.extend_from_slice(row);
        self.labels.push(label);
        self.sources.push(source);
        Ok(())
    }

    pub fn extend(&mut self, other: &TrainingSet) -> Result<()> {
        if other.features != self.features {
            return Err(Error::invalid("training sets have different feature registries"));
        }
        self.x.extend_from_slice(&other.x);
        self.labels.extend_from_slice(&other.labels);
        self.sources.extend_from_slice(&other.sources);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.features.len()
    }

    pub fn features(&self) -> &[FeatureInfo] {
        &self.features
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let d = self.features.len();
        &self.x[i * d..(i + 1) * d]
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn sources(&self) -> &[RowSource] {
        &self.sources
    }

    /// Group names in order of first appearance.
    pub fn groups(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for f in &self.features {
            if !out.contains(&f.group) {
                out.push(f.group.clone());
            }
        }
        out
    }

    /// Copy restricted to features of the listed groups.
    pub fn select_groups(&self, groups: &[String]) -> TrainingSet {
        let keep: Vec<usize> = (0..self.features.len())
            .filter(|&j| groups.contains(&self.features[j].group))
            .collect();
        let mut x = Vec::with_capacity(self.len() * keep.len());
        for i in 0..self.len() {
            let row = self.row(i);
            x.extend(keep.iter().map(|&j| row[j]));
        }
        TrainingSet {
            features: keep.iter().map(|&j| self.features[j].clone()).collect(),
            x,
            labels: self.labels.clone(),
            sources: self.sources.clone(),
        }
    }

    /// Same rows with every label inverted.
    pub fn label_swapped(&self) -> TrainingSet {
        TrainingSet { labels: self.labels.iter().map(|&l| 1 - l).collect(), ..self.clone() }
    }

    fn columns(&self) -> Vec<Vec<f64>> {
        let d = self.features.len();
        (0..d).map(|j| (0..self.len()).map(|i| self.x[i * d + j]).collect()).collect()
    }
}

/// One boosting round: the fitted tree and which rows it was trained on.
#[derive(Debug, Clone, PartialEq)]
pub struct Round {
    pub tree: Tree,
    pub bag: Vec<u64>,
}

impl Round {
    pub fn in_bag(&self, row: usize) -> bool {
        self.bag[row / 64] >> (row % 64) & 1 == 1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoostModel {
    pub config: BoostConfig,
    pub features: Vec<FeatureInfo>,
    pub rounds: Vec<Round>,
    /// Rows in the training set the bag masks refer to.
    pub n_train: usize,
    /// Mean negative log-likelihood on the training set after each round.
    pub loss_history: Vec<f64>,
}

#[inline]
fn logistic(f: f64) -> f64 {
    1.0 / (1.0 + (-2.0 * f).exp())
}

/// `mean log(1 + e^{−2 y F})` with `y ∈ {−1, +1}`.
fn nll(f: &[f64], labels: &[u8]) -> f64 {
    let s: f64 = f
        .iter()
        .zip(labels)
        .map(|(&fi, &l)| {
            let m = if l == 1 { 2.0 * fi } else { -2.0 * fi };
            // log(1 + e^{−m}) without overflow.
            if m > 0.0 {
                (-m).exp().ln_1p()
            } else {
                -m + m.exp().ln_1p()
            }
        })
        .sum();
    s / f.len() as f64
}

fn bag_size(n: usize, fraction: f64) -> usize {
    ((fraction * n as f64).round() as usize).clamp(1, n)
}

pub fn train(ts: &TrainingSet, cfg: &BoostConfig) -> Result<BoostModel> {
    cfg.validate()?;
    let n = ts.len();
    if n == 0 {
        return Err(Error::Training("empty training set".into()));
    }
    if ts.n_features() == 0 {
        return Err(Error::Training("training set has no features".into()));
    }
    let positives = ts.labels.iter().filter(|&&l| l == 1).count();
    if positives == 0 || positives == n {
        return Err(Error::Training("training set contains a single class".into()));
    }
    let columns = ts.columns();
    let data = Presorted::new(&columns);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let params = FitParams { max_depth: cfg.tree_depth, min_leaf: cfg.min_leaf };
    let m = bag_size(n, cfg.bag_fraction);
    let words = n.div_ceil(64);

    let mut f = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut rounds = Vec::with_capacity(cfg.t_size);
    let mut loss_history = Vec::with_capacity(cfg.t_size);
    for _ in 0..cfg.t_size {
        for i in 0..n {
            let p = logistic(f[i]);
            let y = ts.labels[i] as f64;
            let pq = (p * (1.0 - p)).max(1e-12);
            z[i] = ((y - p) / pq).clamp(-Z_MAX, Z_MAX);
            w[i] = pq;
        }
        let mut member = vec![false; n];
        let mut bag = vec![0u64; words];
        let picked = if m == n {
            (0..n).collect::<Vec<_>>()
        } else {
            rand::seq::index::sample(&mut rng, n, m).into_vec()
        };
        for r in picked {
            member[r] = true;
            bag[r / 64] |= 1 << (r % 64);
        }
        let tree = fit_tree(&data, &z, &w, &member, &params);
        for i in 0..n {
            f[i] += cfg.shrinkage * tree.predict(ts.row(i));
        }
        loss_history.push(nll(&f, &ts.labels));
        rounds.push(Round { tree, bag });
    }
    Ok(BoostModel {
        config: *cfg,
        features: ts.features.clone(),
        rounds,
        n_train: n,
        loss_history,
    })
}

impl BoostModel {
    /// Additive score `F(x)`.
    pub fn score(&self, x: &[f64]) -> f64 {
        self.rounds.iter().map(|r| self.config.shrinkage * r.tree.predict(x)).sum()
    }

    /// Probability of the positive class.
    pub fn predict_proba(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.features.len() {
            return Err(Error::dims(self.features.len(), x.len()));
        }
        if x.iter().any(|v| v.is_nan()) {
            return Err(Error::invalid("NaN feature value"));
        }
        Ok(logistic(self.score(x)))
    }

    pub fn predict_batch(&self, ts: &TrainingSet) -> Result<Vec<f64>> {
        if ts.features.len() != self.features.len() {
            return Err(Error::dims(self.features.len(), ts.features.len()));
        }
        (0..ts.len()).into_par_iter().map(|i| self.predict_proba(ts.row(i))).collect()
    }

    /// Per-pixel probability map over a feature stack containing every model feature.
    pub fn predict_map(&self, stack: &FeatureStack) -> Result<Raster> {
        let names: Vec<String> = self.features.iter().map(|f| f.name.clone()).collect();
        let idx = stack.indices_of(&names)?;
        let (w, h) = (stack.width(), stack.height());
        let rows: Vec<Vec<f64>> = (0..h)
            .into_par_iter()
            .map(|r| {
                (0..w)
                    .map(|c| logistic(self.score(&stack.pixel_selected(r, c, &idx))))
                    .collect()
            })
            .collect();
        Ok(Raster::new(w, h, rows.concat()))
    }

    pub fn groups(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for f in &self.features {
            if !out.contains(&f.group) {
                out.push(f.group.clone());
            }
        }
        out
    }

    pub fn to_json(&self) -> String {
        let file = ModelFile {
            format: FORMAT,
            config: self.config,
            features: self.features.clone(),
            n_train: self.n_train,
            loss_history: self.loss_history.clone(),
            trees: self
                .rounds
                .iter()
                .map(|r| TreeFile { nodes: r.tree.nodes.clone(), bag: bitset_to_hex(&r.bag) })
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<BoostModel> {
        let file: ModelFile =
            serde_json::from_str(text).map_err(|e| Error::format("model file", e.to_string()))?;
        if file.format != FORMAT {
            return Err(Error::format("model file", format!("unsupported format {}", file.format)));
        }
        let d = file.features.len();
        let mut rounds = Vec::with_capacity(file.trees.len());
        for t in file.trees {
            for node in &t.nodes {
                match node {
                    Node::Split { feature, threshold, left, right } => {
                        if *feature >= d || !threshold.is_finite() || *left >= t.nodes.len() || *right >= t.nodes.len() {
                            return Err(Error::format("model file", "invalid split node"));
                        }
                    }
                    Node::Leaf { value } if !value.is_finite() => {
                        return Err(Error::format("model file", "non-finite leaf value"));
                    }
                    Node::Leaf { .. } => {}
                }
            }
            if t.nodes.is_empty() {
                return Err(Error::format("model file", "empty tree"));
            }
            let bag = hex_to_bitset(&t.bag, file.n_train)?;
            rounds.push(Round { tree: Tree { nodes: t.nodes }, bag });
        }
        Ok(BoostModel {
            config: file.config,
            features: file.features,
            rounds,
            n_train: file.n_train,
            loss_history: file.loss_history,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<BoostModel> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        BoostModel::from_json(&text)
    }
}

const FORMAT: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: u32,
    config: BoostConfig,
    features: Vec<FeatureInfo>,
    n_train: usize,
    loss_history: Vec<f64>,
    trees: Vec<TreeFile>,
}

#[derive(Serialize, Deserialize)]
struct TreeFile {
    nodes: Vec<Node>,
    /// In-bag rows as a hex bitset, row 0 in the lowest bit of the first word.
    bag: String,
}

fn bitset_to_hex(words: &[u64]) -> String {
    words.iter().map(|w| format!("{w:016x}")).collect()
}

fn hex_to_bitset(s: &str, n: usize) -> Result<Vec<u64>> {
    let words = n.div_ceil(64);
    if s.len() != words * 16 {
        return Err(Error::format("model file", "bag bitset length does not match n_train"));
    }
    (0..words)
        .map(|i| {
            u64::from_str_radix(&s[i * 16..(i + 1) * 16], 16)
                .map_err(|_| Error::format("model file", "bad bag bitset"))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_feature(values: &[(f64, u8)]) -> TrainingSet {
        let mut ts = TrainingSet::new(vec![FeatureInfo { name: "g/x".into(), group: "g".into() }]);
        for (i, &(v, l)) in values.iter().enumerate() {
            ts.push(&[v], l, RowSource { image: 0, row: i, col: 0 }).unwrap();
        }
        ts
    }

    #[test]
    fn rejects_single_class() {
        let ts = one_feature(&[(0.0, 1), (1.0, 1)]);
        assert!(matches!(train(&ts, &BoostConfig::default()), Err(Error::Training(_))));
    }

    #[test]
    fn stump_probabilities() {
        let model = BoostModel {
            config: BoostConfig { shrinkage: 1.0, ..BoostConfig::default() },
            features: vec![FeatureInfo { name: "g/x".into(), group: "g".into() }],
            rounds: vec![Round {
                tree: Tree {
                    nodes: vec![
                        Node::Split { feature: 0, threshold: 0.0, left: 1, right: 2 },
                        Node::Leaf { value: -1.0 },
                        Node::Leaf { value: 1.0 },
                    ],
                },
                bag: vec![0],
            }],
            n_train: 1,
            loss_history: vec![],
        };
        let hi = model.predict_proba(&[1.0]).unwrap();
        let lo = model.predict_proba(&[-1.0]).unwrap();
        assert!((hi - 1.0 / (1.0 + (-2f64).exp())).abs() < 1e-15);
        assert!((lo - 1.0 / (1.0 + 2f64.exp())).abs() < 1e-15);
        assert!(model.predict_proba(&[f64::NAN]).is_err());
        let empty = BoostModel { rounds: vec![], ..model };
        assert_eq!(empty.predict_proba(&[3.0]).unwrap(), 0.5);
    }

    #[test]
    fn bitset_hex_round_trip() {
        let words = vec![0x8000_0000_0000_0001, 0x3];
        assert_eq!(hex_to_bitset(&bitset_to_hex(&words), 66).unwrap(), words);
        assert!(hex_to_bitset("00", 66).is_err());
    }

    #[test]
    fn json_round_trip() {
        let pts: Vec<(f64, u8)> = (0..100).map(|i| (i as f64, (i >= 50) as u8)).collect();
        let ts = one_feature(&pts);
        let m = train(&ts, &BoostConfig { t_size: 5, ..BoostConfig::default() }).unwrap();
        let back = BoostModel::from_json(&m.to_json()).unwrap();
        assert_eq!(back, m);
    }
}
