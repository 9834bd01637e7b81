//! Lattice factor graphs encoding the tissue → bone → shadow propagation order.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::imagecore::Scheme;
use crate::raster::Raster;

/// Stand-in for the forbidden transitions; finite so message passing stays numeric.
pub const INF_COST: f64 = 1e4;
/// Probabilities are clamped into `[P_MIN, 1 − P_MIN]` before taking logs.
pub const P_MIN: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    /// Lateral neighbor (same row, next column).
    H,
    /// Next row down in the same column.
    V,
    /// `l` rows down in the same column.
    J,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::H => "H",
            Direction::V => "V",
            Direction::J => "J",
        }
    }

    fn parse(s: &str) -> Option<Direction> {
        match s {
            "H" => Some(Direction::H),
            "V" => Some(Direction::V),
            "J" => Some(Direction::J),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraphParams {
    pub scheme: Scheme,
    /// Pairwise weight μ.
    pub mu: f64,
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    /// Bone band thickness in pixels (BFG only).
    pub l: usize,
}

impl Default for GraphParams {
    fn default() -> Self {
        GraphParams {
            scheme: Scheme::Cbg,
            mu: 5.0,
            k1: 0.1,
            k2: 0.5,
            k3: 100.0,
            l: 2,
        }
    }
}

impl GraphParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0) {
            return Err(Error::invalid("graph.mu must be > 0"));
        }
        for (name, v) in [("graph.k1", self.k1), ("graph.k2", self.k2), ("graph.k3", self.k3)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{name} must be finite and >= 0")));
            }
        }
        if self.scheme == Scheme::Bfg && self.l == 0 {
            return Err(Error::invalid("graph.l must be >= 1"));
        }
        Ok(())
    }

    /// Default bone thickness for a given wavelength.
    pub fn default_l(wavelength_px: f64) -> usize {
        ((1.5 * wavelength_px).round() as usize).max(1)
    }
}

/// Per-node unary cost tables.
#[derive(Debug, Clone, PartialEq)]
pub struct Unaries {
    pub width: usize,
    pub height: usize,
    pub arity: usize,
    /// `costs[node * arity + label]`
    pub costs: Vec<f64>,
}

/// Negative log-likelihood unaries from tissue and shadow probability maps.
///
/// CBG: the pair `(pT, pS)` is renormalized. BFG: bone gets `(1−pT)(1−pS)` and the
/// triple is renormalized.
pub fn build_unaries(p_tissue: &Raster, p_shadow: &Raster, scheme: Scheme) -> Result<Unaries> {
    if !p_tissue.same_shape(p_shadow) {
        return Err(Error::dims(
            format!("{}x{}", p_tissue.width(), p_tissue.height()),
            format!("{}x{}", p_shadow.width(), p_shadow.height()),
        ));
    }
    let arity = scheme.arity();
    let mut costs = Vec::with_capacity(p_tissue.len() * arity);
    for (&pt, &ps) in p_tissue.data().iter().zip(p_shadow.data()) {
        let pt = pt.clamp(P_MIN, 1.0 - P_MIN);
        let ps = ps.clamp(P_MIN, 1.0 - P_MIN);
        match scheme {
            Scheme::Cbg => {
                let z = pt + ps;
                costs.push(-(pt / z).ln());
                costs.push(-(ps / z).ln());
            }
            Scheme::Bfg => {
                let pb = (1.0 - pt) * (1.0 - ps);
                let z = pt + pb + ps;
                costs.push(-(pt / z).ln());
                costs.push(-(pb / z).ln());
                costs.push(-(ps / z).ln());
            }
        }
    }
    Ok(Unaries {
        width: p_tissue.width(),
        height: p_tissue.height(),
        arity,
        costs,
    })
}

/// BFG cost table `[label(i)][label(j)]`, row-major, labels ordered T, B, S.
pub fn pairwise_table_bfg(dir: Direction, p: &GraphParams) -> [f64; 9] {
    let inf = INF_COST;
    match dir {
        Direction::H => [p.k1, 1.0, 1.0, 1.0, p.k2, 1.0, 1.0, 1.0, p.k1],
        Direction::V => [p.k2, p.k3, inf, inf, p.k2, p.k3, inf, inf, p.k2],
        Direction::J => [0.0, 0.0, inf, inf, inf, 0.0, inf, inf, 0.0],
    }
}

/// CBG cost table `[label(i)][label(j)]`, labels ordered T, S. `f` is `f_PS` at node `i`.
pub fn pairwise_table_cbg(dir: Direction, p: &GraphParams, f: f64) -> Result<[f64; 4]> {
    match dir {
        Direction::H => Ok([p.k1, 1.0, 1.0, p.k1]),
        Direction::V => Ok([p.k2, p.k3 * f, INF_COST, p.k2]),
        Direction::J => Err(Error::invalid("CBG has no jump edges")),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Factor {
    /// Upper/left node.
    pub i: usize,
    /// Lower/right node (always `j > i`).
    pub j: usize,
    pub dir: Direction,
    /// `arity × arity` costs indexed `[label(i) * arity + label(j)]`, before μ.
    pub table: Vec<f64>,
}

/// Pairwise MRF on an `H × W` lattice. Node index is `row * width + col`.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorGraph {
    pub width: usize,
    pub height: usize,
    pub arity: usize,
    pub mu: f64,
    pub unary: Vec<f64>,
    pub factors: Vec<Factor>,
}

impl FactorGraph {
    pub fn n_nodes(&self) -> usize {
        self.width * self.height
    }

    /// `Σ unary + μ·Σ pairwise` for a labeling given as per-node state indices.
    pub fn energy(&self, labels: &[usize]) -> f64 {
        let a = self.arity;
        let unary: f64 = labels
            .iter()
            .enumerate()
            .map(|(n, &x)| self.unary[n * a + x])
            .sum();
        let pair: f64 = self
            .factors
            .iter()
            .map(|f| f.table[labels[f.i] * a + labels[f.j]])
            .sum();
        unary + self.mu * pair
    }

    pub fn count(&self, dir: Direction) -> usize {
        self.factors.iter().filter(|f| f.dir == dir).count()
    }

    /// Text dump: header, one `u` line per node, one `i j dir c..` line per factor.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        writeln!(s, "# factor graph").unwrap();
        writeln!(s, "width {}", self.width).unwrap();
        writeln!(s, "height {}", self.height).unwrap();
        writeln!(s, "arity {}", self.arity).unwrap();
        writeln!(s, "mu {}", self.mu).unwrap();
        for n in 0..self.n_nodes() {
            write!(s, "u {n}").unwrap();
            for c in &self.unary[n * self.arity..(n + 1) * self.arity] {
                write!(s, " {c}").unwrap();
            }
            s.push('\n');
        }
        for f in &self.factors {
            write!(s, "{} {} {}", f.i, f.j, f.dir.as_str()).unwrap();
            for c in &f.table {
                write!(s, " {c}").unwrap();
            }
            s.push('\n');
        }
        s
    }

    pub fn parse_dump(text: &str) -> Result<FactorGraph> {
        let bad = |d: String| Error::format("graph dump", d);
        let mut header = [None::<f64>; 4];
        let keys = ["width", "height", "arity", "mu"];
        let mut unary_lines = Vec::new();
        let mut factors = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let parts: Vec<&str> = line.split_whitespace().collect();
            let num = |s: &str| -> Result<f64> {
                s.parse::<f64>().map_err(|_| bad(format!("line {}: bad number '{s}'", n + 1)))
            };
            if let Some(k) = keys.iter().position(|k| *k == parts[0]) {
                if parts.len() != 2 {
                    return Err(bad(format!("line {}: expected '{} <value>'", n + 1, keys[k])));
                }
                header[k] = Some(num(parts[1])?);
            } else if parts[0] == "u" {
                let node = num(parts.get(1).copied().unwrap_or(""))? as usize;
                let costs = parts[2..].iter().map(|s| num(s)).collect::<Result<Vec<_>>>()?;
                unary_lines.push((node, costs));
            } else {
                if parts.len() < 3 {
                    return Err(bad(format!("line {}: too few fields", n + 1)));
                }
                let i = num(parts[0])? as usize;
                let j = num(parts[1])? as usize;
                let dir = Direction::parse(parts[2])
                    .ok_or_else(|| bad(format!("line {}: bad direction '{}'", n + 1, parts[2])))?;
                let table = parts[3..].iter().map(|s| num(s)).collect::<Result<Vec<_>>>()?;
                factors.push(Factor { i, j, dir, table });
            }
        }
        let get = |k: usize| header[k].ok_or_else(|| bad(format!("missing '{}'", keys[k])));
        let (width, height, arity, mu) = (get(0)? as usize, get(1)? as usize, get(2)? as usize, get(3)?);
        let n = width * height;
        let mut unary = vec![f64::NAN; n * arity];
        for (node, costs) in unary_lines {
            if node >= n || costs.len() != arity {
                return Err(bad(format!("bad unary line for node {node}")));
            }
            unary[node * arity..(node + 1) * arity].copy_from_slice(&costs);
        }
        if unary.iter().any(|v| v.is_nan()) {
            return Err(bad("missing unary lines".into()));
        }
        for f in &factors {
            if f.i >= n || f.j >= n || f.i >= f.j || f.table.len() != arity * arity {
                return Err(bad(format!("bad factor {} {}", f.i, f.j)));
            }
        }
        Ok(FactorGraph { width, height, arity, mu, unary, factors })
    }
}

/// Assemble the lattice: H and V factors everywhere, plus J factors for BFG.
///
/// BFG nodes in the first `l` rows also pay `μ·J(T, x)`, the jump factor from the tissue
/// assumed above the image.
///
/// CBG requires `f_ps`, the per-pixel `f_PS` map, sampled at the upper node of each V edge.
pub fn build_graph(unaries: &Unaries, params: &GraphParams, f_ps: Option<&Raster>) -> Result<FactorGraph> {
    params.validate()?;
    let (w, h) = (unaries.width, unaries.height);
    if unaries.arity != params.scheme.arity() {
        return Err(Error::invalid(format!(
            "unaries have {} labels but scheme {} needs {}",
            unaries.arity,
            params.scheme,
            params.scheme.arity()
        )));
    }
    if params.scheme == Scheme::Bfg && params.l >= h {
        return Err(Error::invalid(format!(
            "bone thickness l={} must be below image height {h}",
            params.l
        )));
    }
    let f_ps = match (params.scheme, f_ps) {
        (Scheme::Cbg, None) => {
            return Err(Error::invalid("CBG graph needs a phase-symmetry map"));
        }
        (Scheme::Cbg, Some(f)) => {
            if f.width() != w || f.height() != h {
                return Err(Error::dims(format!("{w}x{h}"), format!("{}x{}", f.width(), f.height())));
            }
            Some(f)
        }
        (Scheme::Bfg, _) => None,
    };
    let table = |dir: Direction, r: usize, c: usize| -> Result<Vec<f64>> {
        Ok(match params.scheme {
            Scheme::Bfg => pairwise_table_bfg(dir, params).to_vec(),
            Scheme::Cbg => {
                let f = f_ps.map_or(1.0, |m| m.get(r, c));
                pairwise_table_cbg(dir, params, f)?.to_vec()
            }
        })
    };
    let mut factors = Vec::new();
    for r in 0..h {
        for c in 0..w {
            let i = r * w + c;
            if c + 1 < w {
                factors.push(Factor { i, j: i + 1, dir: Direction::H, table: table(Direction::H, r, c)? });
            }
            if r + 1 < h {
                factors.push(Factor { i, j: i + w, dir: Direction::V, table: table(Direction::V, r, c)? });
            }
            if params.scheme == Scheme::Bfg && r + params.l < h {
                factors.push(Factor {
                    i,
                    j: i + params.l * w,
                    dir: Direction::J,
                    table: table(Direction::J, r, c)?,
                });
            }
        }
    }
    let mut unary = unaries.costs.clone();
    if params.scheme == Scheme::Bfg {
        // Rows above the transducer act as tissue: the first l rows carry the jump
        // cost from a virtual T node, which keeps every B run ending in S exactly l long.
        let j = pairwise_table_bfg(Direction::J, params);
        for node in 0..params.l * w {
            for x in 0..3 {
                unary[node * 3 + x] += params.mu * j[x];
            }
        }
    }
    Ok(FactorGraph {
        width: w,
        height: h,
        arity: unaries.arity,
        mu: params.mu,
        unary,
        factors,
    })
}
