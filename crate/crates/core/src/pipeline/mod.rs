//! End-to-end orchestration: features, classifiers, graph inference, evaluation.

pub mod config;
pub mod dataset;
pub mod featselect;
pub mod gridsearch;
pub mod provenance;
mod sampling;

pub use config::RunConfig;
pub use dataset::{Dataset, Sample};
pub use sampling::{sample_image, sample_training_pixels};

use std::path::Path;

use rayon::prelude::*;

use crate::boost::{train, BoostModel, TrainingSet};
use crate::confmap::RandomWalkFeatures;
use crate::delineate::{baseline_from_maps, interface_from_cbg, midline_from_bfg, Baseline};
use crate::error::{Error, Result};
use crate::features::{extract_all, FeatureStack};
use crate::graphmodel::{build_graph, build_unaries};
use crate::imagecore::{resample_bilinear, resize_delineation, Delineation, Image, LabelMap, Scheme};
use crate::metrics::{evaluate, MetricsReport};
use crate::phasesym::{f_ps, phase_symmetry, PsConfig, PsMap};
use crate::raster::Raster;
use crate::trws::{solve, to_labelmap, TrwsResult};

/// Resample to one pixel per wavelength if needed.
pub fn working_image(img: &Image) -> Result<Image> {
    if (img.wavelength_px() - 1.0).abs() < 1e-9 {
        return Ok(img.clone());
    }
    resample_bilinear(img, img.spacing_mm() * img.wavelength_px()).map_err(|e| e.at("resample"))
}

/// Nearest-neighbour label map resize into the working frame.
pub fn resize_labels(lm: &LabelMap, width: usize, height: usize) -> Result<LabelMap> {
    if lm.width() == width && lm.height() == height {
        return Ok(lm.clone());
    }
    let pick = |i: usize, n_out: usize, n_in: usize| {
        ((((i as f64 + 0.5) * n_in as f64 / n_out as f64) - 0.5).round().max(0.0) as usize).min(n_in - 1)
    };
    let labels = (0..height)
        .flat_map(|r| (0..width).map(move |c| (r, c)))
        .map(|(r, c)| lm.get(pick(r, height, lm.height()), pick(c, width, lm.width())))
        .collect();
    LabelMap::new(width, height, labels, lm.scheme())
}

/// An image in its working frame with its random-walk maps and feature stack.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub original: Image,
    pub image: Image,
    pub random_walk: RandomWalkFeatures,
    pub stack: FeatureStack,
}

pub fn prepare(img: &Image, cfg: &RunConfig) -> Result<Prepared> {
    let image = working_image(img)?;
    let random_walk = RandomWalkFeatures::compute(&image, &cfg.confmap, &cfg.cps_scales).map_err(|e| e.at("confmap"))?;
    let stack = extract_all(&image, &cfg.features, &random_walk, None).map_err(|e| e.at("features"))?;
    Ok(Prepared { original: img.clone(), image, random_walk, stack })
}

/// The shadow and tissue classifiers.
#[derive(Debug, Clone, PartialEq)]
pub struct Models {
    pub shadow: BoostModel,
    pub tissue: BoostModel,
}

impl Models {
    pub fn save(&self, dir: &Path) -> Result<()> {
        self.shadow.save(&dir.join("shadow_model.json"))?;
        self.tissue.save(&dir.join("tissue_model.json"))
    }

    pub fn load(dir: &Path) -> Result<Models> {
        Ok(Models {
            shadow: BoostModel::load(&dir.join("shadow_model.json"))?,
            tissue: BoostModel::load(&dir.join("tissue_model.json"))?,
        })
    }
}

pub fn train_models(shadow: &TrainingSet, tissue: &TrainingSet, cfg: &RunConfig) -> Result<Models> {
    let bc = cfg.boost_config();
    Ok(Models {
        shadow: train(shadow, &bc).map_err(|e| e.at("train shadow"))?,
        tissue: train(tissue, &bc).map_err(|e| e.at("train tissue"))?,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityMaps {
    pub p_tissue: Raster,
    pub p_shadow: Raster,
}

pub fn classify(stack: &FeatureStack, models: &Models) -> Result<ProbabilityMaps> {
    Ok(ProbabilityMaps {
        p_tissue: models.tissue.predict_map(stack).map_err(|e| e.at("classify"))?,
        p_shadow: models.shadow.predict_map(stack).map_err(|e| e.at("classify"))?,
    })
}

pub fn ps_map(image: &Image, ps: &PsConfig) -> Result<PsMap> {
    phase_symmetry(image.pixels(), ps).map_err(|e| e.at("phasesym"))
}

#[derive(Debug, Clone)]
pub struct Solved {
    /// In the frame of the original image.
    pub delineation: Delineation,
    /// In the working frame.
    pub labels: LabelMap,
    pub report: TrwsResult,
}

/// Graph construction, inference and label-map readout for precomputed maps.
pub fn solve_maps(original: &Image, image: &Image, probs: &ProbabilityMaps, ps: Option<&PsMap>, cfg: &RunConfig) -> Result<Solved> {
    let params = cfg.graph_params(image.wavelength_px());
    let unaries = build_unaries(&probs.p_tissue, &probs.p_shadow, params.scheme).map_err(|e| e.at("graph"))?;
    let f = match params.scheme {
        Scheme::Cbg => {
            let ps = ps.ok_or_else(|| Error::invalid("CBG needs a phase-symmetry map").at("graph"))?;
            Some(f_ps(ps, cfg.ps.sigma0))
        }
        Scheme::Bfg => None,
    };
    let graph = build_graph(&unaries, &params, f.as_ref()).map_err(|e| e.at("graph"))?;
    let report = solve(&graph, &cfg.solver).map_err(|e| e.at("solve"))?;
    let labels = to_labelmap(&graph, &report.labels, params.scheme);
    let d = match params.scheme {
        Scheme::Cbg => interface_from_cbg(&labels, image.spacing_mm()),
        Scheme::Bfg => midline_from_bfg(&labels, image.spacing_mm()),
    }
    .map_err(|e| e.at("delineate"))?;
    let delineation = if image.width() == original.width() && image.height() == original.height() {
        d.with_spacing(original.spacing_mm())
    } else {
        resize_delineation(&d, image, original)
    };
    Ok(Solved { delineation, labels, report })
}

/// Full chain for one image.
pub fn delineate_image(img: &Image, models: &Models, cfg: &RunConfig) -> Result<Solved> {
    let prep = prepare(img, cfg)?;
    let probs = classify(&prep.stack, models)?;
    let ps = match cfg.graph.scheme {
        Scheme::Cbg => Some(ps_map(&prep.image, &cfg.ps)?),
        Scheme::Bfg => None,
    };
    solve_maps(img, &prep.image, &probs, ps.as_ref(), cfg)
}

/// Baseline delineation in the original frame.
pub fn run_baseline(img: &Image, kind: Baseline, cfg: &RunConfig) -> Result<Delineation> {
    let image = working_image(img)?;
    let ps = ps_map(&image, &cfg.ps)?;
    let shadowing = if kind == Baseline::CpsUp {
        Some(
            RandomWalkFeatures::compute(&image, &cfg.confmap, &cfg.cps_scales)
                .map_err(|e| e.at("confmap"))?
                .shadowing,
        )
    } else {
        None
    };
    let d = baseline_from_maps(kind, &ps.normalized, shadowing.as_ref(), cfg.baseline_threshold, image.spacing_mm())
        .map_err(|e| e.at("baseline"))?;
    Ok(if image.width() == img.width() && image.height() == img.height() {
        d.with_spacing(img.spacing_mm())
    } else {
        resize_delineation(&d, &image, img)
    })
}

/// Samples prepared for training and scoring.
pub struct PreparedSample {
    pub sample: Sample,
    pub prepared: Prepared,
    /// Label map in the working frame.
    pub labels: Option<LabelMap>,
}

pub fn prepare_samples(samples: Vec<Sample>, cfg: &RunConfig) -> Result<Vec<PreparedSample>> {
    samples
        .into_par_iter()
        .map(|s| {
            let prepared = prepare(&s.image, cfg)?;
            let labels = match &s.labels {
                Some(lm) => Some(resize_labels(lm, prepared.image.width(), prepared.image.height())?),
                None => None,
            };
            Ok(PreparedSample { sample: s, prepared, labels })
        })
        .collect()
}

/// Train both classifiers on the labelled samples.
pub fn train_on(samples: &[&PreparedSample], cfg: &RunConfig) -> Result<Models> {
    let items: Vec<(usize, &FeatureStack, &LabelMap)> = samples
        .iter()
        .filter_map(|p| p.labels.as_ref().map(|l| (p.sample.id, &p.prepared.stack, l)))
        .collect();
    if items.is_empty() {
        return Err(Error::invalid("no training samples carry label maps"));
    }
    let (shadow, tissue) = sample_training_pixels(&items, cfg.per_image, cfg.seed)?;
    train_models(&shadow, &tissue, cfg)
}

/// Metrics of a delineation against the sample's gold standard.
pub fn score(sample: &Sample, pred: &Delineation) -> Result<MetricsReport> {
    evaluate(pred, &sample.gs, sample.image.spacing_mm())
}
