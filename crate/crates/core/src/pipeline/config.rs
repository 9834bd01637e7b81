//! Run configuration as a flat `key = value` file with dotted keys.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use crate::boost::BoostConfig;
use crate::confmap::ConfMapParams;
use crate::delineate::BaselineConfig;
use crate::error::{Error, Result};
use crate::features::FeatureConfig;
use crate::graphmodel::GraphParams;
use crate::imagecore::Scheme;
use crate::phasesym::PsConfig;
use crate::trws::TrwsConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    /// Default dataset directory for commands that take one.
    pub dataset: String,
    pub features: FeatureConfig,
    pub confmap: ConfMapParams,
    /// Window scales (in wavelengths) of the attenuation and shadowing maps.
    pub cps_scales: Vec<f64>,
    pub ps: PsConfig,
    pub boost: BoostConfig,
    pub graph: GraphParams,
    /// Bone thickness; `None` derives it from the wavelength.
    pub graph_l: Option<usize>,
    pub solver: TrwsConfig,
    /// Pixels drawn per image and classifier.
    pub per_image: usize,
    pub baseline_threshold: f64,
    pub folds: usize,
    pub subsets: usize,
    /// Share of the dataset held out for scoring during feature selection.
    pub holdout_fraction: f64,
    pub timing_repeats: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            dataset: String::new(),
            features: FeatureConfig::default(),
            confmap: ConfMapParams::default(),
            cps_scales: vec![1.0, 2.0, 4.0],
            ps: PsConfig::default(),
            boost: BoostConfig::default(),
            graph: GraphParams::default(),
            graph_l: None,
            solver: TrwsConfig::default(),
            per_image: 1000,
            baseline_threshold: 0.1,
            folds: 6,
            subsets: 5,
            holdout_fraction: 0.3,
            timing_repeats: 5,
        }
    }
}

pub const PRESETS: [&str; 1] = ["cbg-paper"];

fn fmt_list<T: std::fmt::Display>(v: &[T]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

fn bad(key: &str, value: &str, what: &str) -> Error {
    Error::invalid(format!("{key}: cannot parse '{value}' as {what}"))
}

/// Plain float, or `pi`, `pi/N`, `M*pi/N`.
pub fn parse_f64(key: &str, s: &str) -> Result<f64> {
    let s = s.trim();
    if let Ok(v) = s.parse::<f64>() {
        return Ok(v);
    }
    let (num, den) = match s.split_once('/') {
        Some((a, b)) => (a.trim(), b.trim().parse::<f64>().map_err(|_| bad(key, s, "number"))?),
        None => (s, 1.0),
    };
    let mult = match num.strip_suffix("pi") {
        Some("") => 1.0,
        Some(m) => m.trim_end_matches('*').trim().parse::<f64>().map_err(|_| bad(key, s, "number"))?,
        None => return Err(bad(key, s, "number")),
    };
    Ok(mult * PI / den)
}

fn parse_usize(key: &str, s: &str) -> Result<usize> {
    s.trim().parse().map_err(|_| bad(key, s, "non-negative integer"))
}

fn parse_u64(key: &str, s: &str) -> Result<u64> {
    s.trim().parse().map_err(|_| bad(key, s, "non-negative integer"))
}

pub fn parse_f64_list(key: &str, s: &str) -> Result<Vec<f64>> {
    s.split(',').map(|x| parse_f64(key, x)).collect()
}

pub fn parse_usize_list(key: &str, s: &str) -> Result<Vec<usize>> {
    s.split(',').map(|x| parse_usize(key, x)).collect()
}

impl RunConfig {
    pub fn preset(name: &str) -> Result<RunConfig> {
        match name {
            "cbg-paper" => {
                let mut c = RunConfig::default();
                c.graph.scheme = Scheme::Cbg;
                c.ps.lambda_px = 25.0;
                c.ps.half_angle = PI / 3.0;
                c.ps.n_orient = 3;
                c.ps.sigma0 = 0.01;
                c.graph.mu = 5.0;
                c.graph.k1 = 0.1;
                c.graph.k2 = 0.5;
                c.graph.k3 = 100.0;
                Ok(c)
            }
            _ => Err(Error::invalid(format!("unknown preset '{name}' (known: {})", PRESETS.join(", ")))),
        }
    }

    /// Every key with its current value, in file order.
    pub fn to_pairs(&self) -> Vec<(&'static str, String)> {
        let f = &self.features;
        let p = &self.ps;
        vec![
            ("seed", self.seed.to_string()),
            ("data.dataset", self.dataset.clone()),
            ("features.patch_scales", fmt_list(&f.patch_scales)),
            ("features.cw_scales", fmt_list(&f.cw_scales)),
            ("features.cw_orders", fmt_list(&f.cw_orders)),
            ("features.rayleigh_scale", f.rayleigh_scale.to_string()),
            ("features.rayleigh_bins", f.rayleigh_bins.to_string()),
            ("features.gabor_theta", f.gabor_theta.to_string()),
            ("features.gabor_period_px", f.gabor_period_px.to_string()),
            ("features.gabor_sigma_mm", fmt_list(&[f.gabor_sigma_mm.0, f.gabor_sigma_mm.1])),
            ("features.haar_scales", fmt_list(&f.haar_scales)),
            ("features.entropy_bins", f.entropy_bins.to_string()),
            ("confmap.alpha", self.confmap.alpha.to_string()),
            ("confmap.beta", self.confmap.beta.to_string()),
            ("confmap.gamma", self.confmap.gamma.to_string()),
            ("confmap.cps_scales", fmt_list(&self.cps_scales)),
            ("ps.n_orient", p.n_orient.to_string()),
            ("ps.n_scales", p.n_scales.to_string()),
            ("ps.lambda_px", p.lambda_px.to_string()),
            ("ps.kappa_ratio", p.kappa_ratio.to_string()),
            ("ps.sigma_phi", p.sigma_phi.to_string()),
            ("ps.half_angle", p.half_angle.to_string()),
            ("ps.noise_factor", p.noise_factor.to_string()),
            ("ps.epsilon", p.epsilon.to_string()),
            ("ps.sigma0", p.sigma0.to_string()),
            ("ps.scale_mult", p.scale_mult.to_string()),
            ("boost.t_size", self.boost.t_size.to_string()),
            ("boost.tree_depth", self.boost.tree_depth.to_string()),
            ("boost.bag_fraction", self.boost.bag_fraction.to_string()),
            ("boost.shrinkage", self.boost.shrinkage.to_string()),
            ("boost.min_leaf", self.boost.min_leaf.to_string()),
            ("graph.scheme", self.graph.scheme.to_string()),
            ("graph.mu", self.graph.mu.to_string()),
            ("graph.k1", self.graph.k1.to_string()),
            ("graph.k2", self.graph.k2.to_string()),
            ("graph.k3", self.graph.k3.to_string()),
            ("graph.l", self.graph_l.map_or("auto".to_string(), |l| l.to_string())),
            ("solver.max_iter", self.solver.max_iter.to_string()),
            ("solver.rel_gap_tol", self.solver.rel_gap_tol.to_string()),
            ("solver.stall_tol", self.solver.stall_tol.to_string()),
            ("solver.stall_iters", self.solver.stall_iters.to_string()),
            ("sampling.per_image", self.per_image.to_string()),
            ("baseline.threshold", self.baseline_threshold.to_string()),
            ("gridsearch.folds", self.folds.to_string()),
            ("gridsearch.subsets", self.subsets.to_string()),
            ("featselect.holdout_fraction", self.holdout_fraction.to_string()),
            ("featselect.timing_repeats", self.timing_repeats.to_string()),
        ]
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        let f = &mut self.features;
        let p = &mut self.ps;
        match key {
            "seed" => self.seed = parse_u64(key, v)?,
            "data.dataset" => self.dataset = v.to_string(),
            "features.patch_scales" => f.patch_scales = parse_f64_list(key, v)?,
            "features.cw_scales" => f.cw_scales = parse_f64_list(key, v)?,
            "features.cw_orders" => f.cw_orders = parse_usize_list(key, v)?,
            "features.rayleigh_scale" => f.rayleigh_scale = parse_f64(key, v)?,
            "features.rayleigh_bins" => f.rayleigh_bins = parse_usize(key, v)?,
            "features.gabor_theta" => f.gabor_theta = parse_f64(key, v)?,
            "features.gabor_period_px" => f.gabor_period_px = parse_f64(key, v)?,
            "features.gabor_sigma_mm" => match parse_f64_list(key, v)?.as_slice() {
                &[a, b] => f.gabor_sigma_mm = (a, b),
                _ => return Err(bad(key, v, "two numbers 'lateral,axial'")),
            },
            "features.haar_scales" => f.haar_scales = parse_usize_list(key, v)?,
            "features.entropy_bins" => f.entropy_bins = parse_usize(key, v)?,
            "confmap.alpha" => self.confmap.alpha = parse_f64(key, v)?,
            "confmap.beta" => self.confmap.beta = parse_f64(key, v)?,
            "confmap.gamma" => self.confmap.gamma = parse_f64(key, v)?,
            "confmap.cps_scales" => self.cps_scales = parse_f64_list(key, v)?,
            "ps.n_orient" => p.n_orient = parse_usize(key, v)?,
            "ps.n_scales" => p.n_scales = parse_usize(key, v)?,
            "ps.lambda_px" => p.lambda_px = parse_f64(key, v)?,
            "ps.kappa_ratio" => p.kappa_ratio = parse_f64(key, v)?,
            "ps.sigma_phi" => p.sigma_phi = parse_f64(key, v)?,
            "ps.half_angle" => p.half_angle = parse_f64(key, v)?,
            "ps.noise_factor" => p.noise_factor = parse_f64(key, v)?,
            "ps.epsilon" => p.epsilon = parse_f64(key, v)?,
            "ps.sigma0" => p.sigma0 = parse_f64(key, v)?,
            "ps.scale_mult" => p.scale_mult = parse_f64(key, v)?,
            "boost.t_size" => self.boost.t_size = parse_usize(key, v)?,
            "boost.tree_depth" => self.boost.tree_depth = parse_usize(key, v)?,
            "boost.bag_fraction" => self.boost.bag_fraction = parse_f64(key, v)?,
            "boost.shrinkage" => self.boost.shrinkage = parse_f64(key, v)?,
            "boost.min_leaf" => self.boost.min_leaf = parse_usize(key, v)?,
            "graph.scheme" => self.graph.scheme = v.parse()?,
            "graph.mu" => self.graph.mu = parse_f64(key, v)?,
            "graph.k1" => self.graph.k1 = parse_f64(key, v)?,
            "graph.k2" => self.graph.k2 = parse_f64(key, v)?,
            "graph.k3" => self.graph.k3 = parse_f64(key, v)?,
            "graph.l" => self.graph_l = if v == "auto" { None } else { Some(parse_usize(key, v)?) },
            "solver.max_iter" => self.solver.max_iter = parse_usize(key, v)?,
            "solver.rel_gap_tol" => self.solver.rel_gap_tol = parse_f64(key, v)?,
            "solver.stall_tol" => self.solver.stall_tol = parse_f64(key, v)?,
            "solver.stall_iters" => self.solver.stall_iters = parse_usize(key, v)?,
            "sampling.per_image" => self.per_image = parse_usize(key, v)?,
            "baseline.threshold" => self.baseline_threshold = parse_f64(key, v)?,
            "gridsearch.folds" => self.folds = parse_usize(key, v)?,
            "gridsearch.subsets" => self.subsets = parse_usize(key, v)?,
            "featselect.holdout_fraction" => self.holdout_fraction = parse_f64(key, v)?,
            "featselect.timing_repeats" => self.timing_repeats = parse_usize(key, v)?,
            _ => return Err(Error::invalid(format!("unknown config key '{key}'"))),
        }
        Ok(())
    }

    /// Apply `key = value` lines on top of `self`. `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::format("config", format!("line {}: expected 'key = value'", n + 1)))?;
            self.set(k.trim(), v)?;
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<RunConfig> {
        let mut c = RunConfig::default();
        c.apply_text(text)?;
        c.validate()?;
        Ok(c)
    }

    /// A preset name or a config file path.
    pub fn load(source: &str) -> Result<RunConfig> {
        if PRESETS.contains(&source) && !Path::new(source).exists() {
            return RunConfig::preset(source);
        }
        let path = Path::new(source);
        if !path.exists() {
            return Err(Error::invalid(format!(
                "--config '{source}' is neither a file nor a preset ({})",
                PRESETS.join(", ")
            )));
        }
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        RunConfig::parse(&text)
    }

    pub fn serialize(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.to_pairs() {
            writeln!(s, "{k} = {v}").unwrap();
        }
        s
    }

    pub fn validate(&self) -> Result<()> {
        self.features.validate()?;
        self.ps.validate()?;
        self.boost.validate()?;
        self.graph.validate()?;
        if self.graph_l == Some(0) {
            return Err(Error::invalid("graph.l must be >= 1"));
        }
        if self.solver.max_iter == 0 {
            return Err(Error::invalid("solver.max_iter must be >= 1"));
        }
        if self.cps_scales.is_empty() || self.cps_scales.iter().any(|&s| !(s > 0.0)) {
            return Err(Error::invalid("confmap.cps_scales must be positive"));
        }
        if !(self.confmap.alpha >= 0.0 && self.confmap.beta > 0.0 && self.confmap.gamma >= 0.0) {
            return Err(Error::invalid("confmap.alpha, confmap.gamma must be >= 0 and confmap.beta > 0"));
        }
        if self.per_image < 2 {
            return Err(Error::invalid("sampling.per_image must be >= 2"));
        }
        if self.folds < 2 || self.subsets < 1 {
            return Err(Error::invalid("gridsearch.folds must be >= 2 and gridsearch.subsets >= 1"));
        }
        if !(self.holdout_fraction > 0.0 && self.holdout_fraction < 1.0) {
            return Err(Error::invalid("featselect.holdout_fraction must be in (0,1)"));
        }
        if self.timing_repeats == 0 {
            return Err(Error::invalid("featselect.timing_repeats must be >= 1"));
        }
        Ok(())
    }

    /// Graph parameters with the bone thickness resolved for an image.
    pub fn graph_params(&self, wavelength_px: f64) -> GraphParams {
        GraphParams {
            l: self.graph_l.unwrap_or_else(|| GraphParams::default_l(wavelength_px)),
            ..self.graph
        }
    }

    pub fn boost_config(&self) -> BoostConfig {
        BoostConfig { seed: self.seed, ..self.boost }
    }

    pub fn baseline_config(&self) -> BaselineConfig {
        BaselineConfig {
            ps: self.ps,
            confmap: self.confmap,
            cps_scales: self.cps_scales.clone(),
            threshold: self.baseline_threshold,
        }
    }
}
