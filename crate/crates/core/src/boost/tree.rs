//! Weighted least-squares regression trees on presorted columns.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        /// Index of the `x <= threshold` child; the other child follows its subtree.
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
    },
}

/// Regression tree stored as a preorder node list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { value } => return value,
                Node::Split { feature, threshold, left, right } => {
                    i = if x[feature] <= threshold { left } else { right };
                }
            }
        }
    }

    /// Same as [`Tree::predict`] with one feature value substituted.
    pub fn predict_with(&self, x: &[f64], feature: usize, value: f64) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { value } => return value,
                Node::Split { feature: f, threshold, left, right } => {
                    let v = if f == feature { value } else { x[f] };
                    i = if v <= threshold { left } else { right };
                }
            }
        }
    }

    pub fn uses_feature(&self, feature: usize) -> bool {
        self.nodes
            .iter()
            .any(|n| matches!(n, Node::Split { feature: f, .. } if *f == feature))
    }

    pub fn features(&self) -> impl Iterator<Item = usize> + '_ {
        self.nodes.iter().filter_map(|n| match n {
            Node::Split { feature, .. } => Some(*feature),
            Node::Leaf { .. } => None,
        })
    }
}

/// Column-major view of the training matrix with one sort order per feature.
pub struct Presorted<'a> {
    pub columns: &'a [Vec<f64>],
    pub order: Vec<Vec<u32>>,
}

impl<'a> Presorted<'a> {
    pub fn new(columns: &'a [Vec<f64>]) -> Self {
        let order = columns
            .iter()
            .map(|col| {
                let mut idx: Vec<u32> = (0..col.len() as u32).collect();
                idx.sort_by(|&a, &b| col[a as usize].total_cmp(&col[b as usize]).then(a.cmp(&b)));
                idx
            })
            .collect();
        Presorted { columns, order }
    }
}

pub struct FitParams {
    pub max_depth: usize,
    pub min_leaf: usize,
}

/// Fit `z` with weights `w` on the rows where `member[r]` is true.
pub fn fit_tree(data: &Presorted<'_>, z: &[f64], w: &[f64], member: &[bool], params: &FitParams) -> Tree {
    // node_of[r]: id of the open node row r currently sits in, u32::MAX if not in the bag.
    let mut node_of: Vec<u32> = member.iter().map(|&m| if m { 0 } else { u32::MAX }).collect();
    let mut nodes = Vec::new();
    let mut next_id = 1u32;
    grow(data, z, w, &mut node_of, 0, 0, params, &mut nodes, &mut next_id);
    Tree { nodes }
}

struct Split {
    feature: usize,
    threshold: f64,
    gain: f64,
}

fn leaf_value(z: &[f64], w: &[f64], node_of: &[u32], id: u32) -> (f64, usize) {
    let (mut swz, mut sw, mut n) = (0.0, 0.0, 0);
    for r in 0..z.len() {
        if node_of[r] == id {
            swz += w[r] * z[r];
            sw += w[r];
            n += 1;
        }
    }
    (if sw > 1e-300 { swz / sw } else { 0.0 }, n)
}

fn best_split(data: &Presorted<'_>, z: &[f64], w: &[f64], node_of: &[u32], id: u32, min_leaf: usize) -> Option<Split> {
    let (mut tz, mut tw, mut tn) = (0.0, 0.0, 0usize);
    for r in 0..z.len() {
        if node_of[r] == id {
            tz += w[r] * z[r];
            tw += w[r];
            tn += 1;
        }
    }
    if tn < 2 * min_leaf.max(1) || tw <= 1e-300 {
        return None;
    }
    let base = tz * tz / tw;
    let mut best: Option<Split> = None;
    for (j, order) in data.order.iter().enumerate() {
        let col = &data.columns[j];
        let (mut lz, mut lw, mut ln) = (0.0, 0.0, 0usize);
        let mut prev = f64::NAN;
        for &r in order {
            let r = r as usize;
            if node_of[r] != id {
                continue;
            }
            let v = col[r];
            if ln >= min_leaf.max(1) && tn - ln >= min_leaf.max(1) && v > prev {
                let rw = tw - lw;
                if lw > 1e-300 && rw > 1e-300 {
                    let rz = tz - lz;
                    let gain = lz * lz / lw + rz * rz / rw - base;
                    if gain > 1e-12 * base.abs().max(1e-12) && best.as_ref().is_none_or(|b| gain > b.gain) {
                        best = Some(Split { feature: j, threshold: 0.5 * (prev + v), gain });
                    }
                }
            }
            lz += w[r] * z[r];
            lw += w[r];
            ln += 1;
            prev = v;
        }
    }
    best
}

#[allow(clippy::too_many_arguments)]
fn grow(
    data: &Presorted<'_>,
    z: &[f64],
    w: &[f64],
    node_of: &mut [u32],
    id: u32,
    depth: usize,
    params: &FitParams,
    nodes: &mut Vec<Node>,
    next_id: &mut u32,
) -> usize {
    let at = nodes.len();
    let split = if depth < params.max_depth {
        best_split(data, z, w, node_of, id, params.min_leaf)
    } else {
        None
    };
    let Some(split) = split else {
        let (value, _) = leaf_value(z, w, node_of, id);
        nodes.push(Node::Leaf { value });
        return at;
    };
    let (lid, rid) = (*next_id, *next_id + 1);
    *next_id += 2;
    let col = &data.columns[split.feature];
    for r in 0..node_of.len() {
        if node_of[r] == id {
            node_of[r] = if col[r] <= split.threshold { lid } else { rid };
        }
    }
    nodes.push(Node::Leaf { value: 0.0 });
    let left = grow(data, z, w, node_of, lid, depth + 1, params, nodes, next_id);
    let right = grow(data, z, w, node_of, rid, depth + 1, params, nodes, next_id);
    nodes[at] = Node::Split { feature: split.feature, threshold: split.threshold, left, right };
    at
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stump_on_step() {
        let cols = vec![vec![0.0, 1.0, 2.0, 3.0]];
        let data = Presorted::new(&cols);
        let z = [-1.0, -1.0, 1.0, 1.0];
        let t = fit_tree(&data, &z, &[1.0; 4], &[true; 4], &FitParams { max_depth: 1, min_leaf: 1 });
        assert_eq!(t.nodes.len(), 3);
        assert_eq!(t.predict(&[0.5]), -1.0);
        assert_eq!(t.predict(&[2.5]), 1.0);
        assert!(matches!(t.nodes[0], Node::Split { threshold, .. } if threshold == 1.5));
    }

    #[test]
    fn min_leaf_blocks_split() {
        let cols = vec![vec![0.0, 1.0, 2.0, 3.0]];
        let data = Presorted::new(&cols);
        let z = [-1.0, 1.0, 1.0, 1.0];
        let t = fit_tree(&data, &z, &[1.0; 4], &[true; 4], &FitParams { max_depth: 2, min_leaf: 2 });
        // Only the 2|2 split is allowed.
        assert_eq!(t.predict(&[0.0]), 0.0);
        assert_eq!(t.predict(&[3.0]), 1.0);
    }

    #[test]
    fn constant_target_is_leaf() {
        let cols = vec![vec![0.0, 1.0, 2.0]];
        let data = Presorted::new(&cols);
        let t = fit_tree(&data, &[2.0; 3], &[0.5; 3], &[true; 3], &FitParams { max_depth: 2, min_leaf: 1 });
        assert_eq!(t.nodes, vec![Node::Leaf { value: 2.0 }]);
    }
}
