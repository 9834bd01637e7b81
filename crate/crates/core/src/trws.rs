//! Sequential tree-reweighted message passing on pairwise lattice graphs.
//!
//! Messages are stored as reparameterizations of the unary and pairwise tables, so
//! `Σ min U + Σ min E` is a valid lower bound at any point and never decreases.

use crate::error::{Error, Result};
use crate::graphmodel::FactorGraph;
use crate::imagecore::{Label, LabelMap, Scheme};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrwsConfig {
    pub max_iter: usize,
    /// Stop when `(E_best − LB) / |E_best|` drops to this.
    pub rel_gap_tol: f64,
    /// Bound increase (relative) below which an iteration counts as stalled.
    pub stall_tol: f64,
    pub stall_iters: usize,
}

impl Default for TrwsConfig {
    fn default() -> Self {
        TrwsConfig {
            max_iter: 200,
            rel_gap_tol: 1e-4,
            stall_tol: 1e-7,
            stall_iters: 5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    Gap,
    Stalled,
    MaxIter,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrwsResult {
    /// Best labeling found (state index per node).
    pub labels: Vec<usize>,
    pub energy: f64,
    pub lower_bound: f64,
    pub iterations: usize,
    pub stop: StopReason,
    /// Lower bound after each iteration.
    pub bound_history: Vec<f64>,
}

impl TrwsResult {
    pub fn converged(&self) -> bool {
        self.stop == StopReason::Gap
    }
}

struct Adjacency {
    incoming: Vec<Vec<usize>>,
    outgoing: Vec<Vec<usize>>,
}

fn adjacency(g: &FactorGraph) -> Adjacency {
    let n = g.n_nodes();
    let mut incoming = vec![Vec::new(); n];
    let mut outgoing = vec![Vec::new(); n];
    for (e, f) in g.factors.iter().enumerate() {
        outgoing[f.i].push(e);
        incoming[f.j].push(e);
    }
    Adjacency { incoming, outgoing }
}

fn lower_bound(u: &[f64], e: &[f64], a: usize) -> f64 {
    let mins = |v: &[f64], k: usize| -> f64 {
        v.chunks_exact(k)
            .map(|c| c.iter().copied().fold(f64::INFINITY, f64::min))
            .sum::<f64>()
    };
    mins(u, a) + mins(e, a * a)
}

pub fn solve(graph: &FactorGraph, cfg: &TrwsConfig) -> Result<TrwsResult> {
    let n = graph.n_nodes();
    let a = graph.arity;
    if n == 0 || a == 0 {
        return Err(Error::invalid("empty factor graph"));
    }
    let aa = a * a;
    let adj = adjacency(graph);
    let mut u = graph.unary.clone();
    let mut e: Vec<f64> = graph
        .factors
        .iter()
        .flat_map(|f| f.table.iter().map(|v| v * graph.mu))
        .collect();
    let gamma: Vec<f64> = (0..n)
        .map(|s| {
            let k = adj.incoming[s].len().max(adj.outgoing[s].len());
            if k == 0 {
                0.0
            } else {
                1.0 / k as f64
            }
        })
        .collect();

    let mut labels = vec![0usize; n];
    let mut best_labels = labels.clone();
    let mut best_energy = f64::INFINITY;
    let mut history = Vec::new();
    let mut stalled = 0;
    let mut stop = StopReason::MaxIter;
    let mut m = vec![0.0; a];
    let mut score = vec![0.0; a];

    for _ in 0..cfg.max_iter {
        // Forward pass: pull from earlier neighbours, extract a label, push to later ones.
        for s in 0..n {
            let us = s * a;
            for &f in &adj.incoming[s] {
                let t = &mut e[f * aa..(f + 1) * aa];
                for y in 0..a {
                    m[y] = (0..a).map(|x| t[x * a + y]).fold(f64::INFINITY, f64::min);
                }
                for x in 0..a {
                    for y in 0..a {
                        t[x * a + y] -= m[y];
                    }
                }
                for y in 0..a {
                    u[us + y] += m[y];
                }
            }
            for y in 0..a {
                let mut sc = u[us + y];
                for &f in &adj.incoming[s] {
                    sc += e[f * aa + labels[graph.factors[f].i] * a + y];
                }
                for &f in &adj.outgoing[s] {
                    let row = &e[f * aa + y * a..f * aa + (y + 1) * a];
                    sc += row.iter().copied().fold(f64::INFINITY, f64::min);
                }
                score[y] = sc;
            }
            labels[s] = argmin(&score);
            let g = gamma[s];
            for &f in &adj.outgoing[s] {
                let t = &mut e[f * aa..(f + 1) * aa];
                for x in 0..a {
                    for y in 0..a {
                        t[x * a + y] += g * u[us + x];
                    }
                }
            }
            let keep = 1.0 - g * adj.outgoing[s].len() as f64;
            for y in 0..a {
                u[us + y] *= keep;
            }
        }

        let energy = graph.energy(&labels);
        if energy < best_energy {
            best_energy = energy;
            best_labels.clone_from(&labels);
        }

        // Backward pass: the mirror image of the forward pass.
        for s in (0..n).rev() {
            let us = s * a;
            for &f in &adj.outgoing[s] {
                let t = &mut e[f * aa..(f + 1) * aa];
                for x in 0..a {
                    let row = &mut t[x * a..(x + 1) * a];
                    let mn = row.iter().copied().fold(f64::INFINITY, f64::min);
                    row.iter_mut().for_each(|v| *v -= mn);
                    u[us + x] += mn;
                }
            }
            let g = gamma[s];
            for &f in &adj.incoming[s] {
                let t = &mut e[f * aa..(f + 1) * aa];
                for x in 0..a {
                    for y in 0..a {
                        t[x * a + y] += g * u[us + y];
                    }
                }
            }
            let keep = 1.0 - g * adj.incoming[s].len() as f64;
            for y in 0..a {
                u[us + y] *= keep;
            }
        }

        let lb = lower_bound(&u, &e, a);
        if let Some(&prev) = history.last() {
            assert!(lb >= prev - 1e-9 * (1.0 + f64::abs(prev)), "bound decreased {prev} -> {lb}");
            if lb - prev < cfg.stall_tol * prev.abs().max(1.0) {
                stalled += 1;
            } else {
                stalled = 0;
            }
        }
        history.push(lb);
        let gap = (best_energy - lb) / best_energy.abs().max(1e-12);
        if gap <= cfg.rel_gap_tol {
            stop = StopReason::Gap;
            break;
        }
        if stalled >= cfg.stall_iters {
            stop = StopReason::Stalled;
            break;
        }
    }

    let lb = history.last().copied().unwrap_or(f64::NEG_INFINITY);
    log::debug!(
        "trws: {} iterations, energy {best_energy}, bound {lb}, stop {stop:?}",
        history.len()
    );
    Ok(TrwsResult {
        labels: best_labels,
        energy: best_energy,
        lower_bound: lb,
        iterations: history.len(),
        stop,
        bound_history: history,
    })
}

fn argmin(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x < v[best] {
            best = i;
        }
    }
    best
}

/// Largest search space the exhaustive solver accepts.
pub const BRUTE_FORCE_LIMIT: f64 = 1e7;

/// Exact minimizer by depth-first enumeration. Ties keep the lexicographically first labeling.
pub fn brute_force(graph: &FactorGraph) -> Result<(Vec<usize>, f64)> {
    let n = graph.n_nodes();
    let a = graph.arity;
    if (a as f64).powi(n as i32) > BRUTE_FORCE_LIMIT {
        return Err(Error::invalid(format!(
            "brute force over {a}^{n} labelings exceeds the limit"
        )));
    }
    // Factors are charged at their later endpoint.
    let mut closing: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (k, f) in graph.factors.iter().enumerate() {
        closing[f.j].push(k);
    }
    let nonneg = graph.unary.iter().all(|&v| v >= 0.0)
        && graph.mu >= 0.0
        && graph.factors.iter().all(|f| f.table.iter().all(|&v| v >= 0.0));

    let mut labels = vec![0usize; n];
    let mut partial = vec![0.0; n + 1];
    let mut best = f64::INFINITY;
    let mut best_labels = labels.clone();
    let mut depth = 0usize;
    let mut next = vec![0usize; n];
    loop {
        if next[depth] == a {
            next[depth] = 0;
            if depth == 0 {
                break;
            }
            depth -= 1;
            continue;
        }
        let x = next[depth];
        next[depth] += 1;
        labels[depth] = x;
        let mut cost = partial[depth] + graph.unary[depth * a + x];
        for &k in &closing[depth] {
            let f = &graph.factors[k];
            cost += graph.mu * f.table[labels[f.i] * a + x];
        }
        if nonneg && cost >= best {
            continue;
        }
        partial[depth + 1] = cost;
        if depth + 1 == n {
            if cost < best {
                best = cost;
                best_labels.clone_from(&labels);
            }
        } else {
            depth += 1;
        }
    }
    Ok((best_labels, best))
}

/// State indices to a label map (unchecked: raw solver output may violate the order).
pub fn to_labelmap(graph: &FactorGraph, labels: &[usize], scheme: Scheme) -> LabelMap {
    let ls: Vec<Label> = labels.iter().map(|&k| scheme.label(k)).collect();
    LabelMap::new_unchecked(graph.width, graph.height, ls, scheme)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphmodel::{Direction, Factor};

    fn chain(unary: Vec<f64>, table: Vec<f64>, a: usize) -> FactorGraph {
        let n = unary.len() / a;
        FactorGraph {
            width: 1,
            height: n,
            arity: a,
            mu: 1.0,
            unary,
            factors: (0..n - 1)
                .map(|i| Factor { i, j: i + 1, dir: Direction::V, table: table.clone() })
                .collect(),
        }
    }

    #[test]
    fn chain_is_exact() {
        let g = chain(vec![0.0, 1.0, 2.0, 0.0, 0.5, 0.4], vec![0.0, 1.0, 1.0, 0.0], 2);
        let r = solve(&g, &TrwsConfig::default()).unwrap();
        let (bl, be) = brute_force(&g).unwrap();
        assert_eq!(r.labels, bl);
        assert!((r.energy - be).abs() < 1e-12);
        assert!((r.lower_bound - be).abs() < 1e-9);
        assert!(r.converged());
    }

    #[test]
    fn brute_force_tie_is_lexicographic() {
        let g = chain(vec![0.0; 6], vec![0.0; 4], 2);
        assert_eq!(brute_force(&g).unwrap(), (vec![0, 0, 0], 0.0));
    }

    #[test]
    fn isolated_nodes() {
        let g = FactorGraph {
            width: 2,
            height: 1,
            arity: 2,
            mu: 1.0,
            unary: vec![1.0, 0.0, 0.0, 2.0],
            factors: vec![],
        };
        let r = solve(&g, &TrwsConfig::default()).unwrap();
        assert_eq!(r.labels, vec![1, 0]);
        assert_eq!(r.energy, 0.0);
    }
}
