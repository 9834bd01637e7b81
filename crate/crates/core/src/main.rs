use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use bonetrace::delineate::{render_overlay, Baseline};
use bonetrace::features::{save_stack, FeatureStack};
use bonetrace::imagecore::{load_delineation, load_image, save_delineation, save_labelmap, MetaOverride};
use bonetrace::metrics::{evaluate, to_csv, MetricsReport};
use bonetrace::phantom::{generate_dataset, PhantomRanges};
use bonetrace::pipeline::featselect::{elimination_csv, plot_trace, run_feature_selection, timing_csv};
use bonetrace::pipeline::gridsearch::{crossval_gridsearch, report_csv, GridSpec};
use bonetrace::pipeline::provenance::write_provenance;
use bonetrace::pipeline::{
    delineate_image, prepare, prepare_samples, ps_map, run_baseline, score, train_on, Dataset, Models, RunConfig,
};
use bonetrace::{Error, Result};

#[derive(Parser)]
#[command(name = "bonetrace", version, about = "Bone surface delineation in B-mode ultrasound")]
struct Cli {
    /// Config file or preset name (`cbg-paper`).
    #[arg(long, global = true)]
    config: Option<String>,
    /// Override a config key, e.g. `--set graph.k3=100`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthetic phantoms.
    #[command(subcommand)]
    Phantom(PhantomCmd),
    /// Feature extraction.
    #[command(subcommand)]
    Features(FeaturesCmd),
    /// Train the shadow and tissue classifiers on a dataset.
    Train(DatasetArg),
    /// Delineate one image or every image of a dataset.
    Delineate {
        /// Directory holding shadow_model.json and tissue_model.json.
        #[arg(long)]
        models: PathBuf,
        #[command(flatten)]
        input: Input,
        /// Also write PNG overlays.
        #[arg(long)]
        overlay: bool,
    },
    /// Score prediction CSVs against a dataset's gold standard.
    Evaluate {
        #[command(flatten)]
        data: DatasetArg,
        /// Directory with pred_NNNN.csv files.
        #[arg(long)]
        pred: PathBuf,
    },
    /// Cross-validated grid search.
    Gridsearch {
        #[command(flatten)]
        data: DatasetArg,
        /// Grid file of `key=v1,v2,...` lines; unlisted parameters keep the config value.
        #[arg(long)]
        grid: Option<PathBuf>,
    },
    /// Greedy backward elimination of feature groups plus group timing.
    Featselect(DatasetArg),
    /// Phase-symmetry baselines.
    Baseline {
        kind: Baseline,
        #[command(flatten)]
        input: Input,
    },
}

#[derive(Subcommand)]
enum PhantomCmd {
    /// Write a randomized phantom dataset.
    Gen {
        #[arg(long, default_value_t = 10)]
        n: usize,
        #[arg(long, default_value_t = 128)]
        width: usize,
        #[arg(long, default_value_t = 128)]
        height: usize,
    },
}

#[derive(Subcommand)]
enum FeaturesCmd {
    /// Extract the feature stack of one image.
    Extract {
        #[arg(long)]
        image: PathBuf,
        #[command(flatten)]
        meta: MetaArgs,
        /// Also write the normalized phase-symmetry map.
        #[arg(long)]
        ps: bool,
    },
}

#[derive(Args)]
struct DatasetArg {
    /// Dataset directory with manifest.csv (defaults to `data.dataset`).
    #[arg(long)]
    dataset: Option<PathBuf>,
}

#[derive(Args)]
struct Input {
    #[arg(long, conflicts_with = "dataset")]
    image: Option<PathBuf>,
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[command(flatten)]
    meta: MetaArgs,
}

#[derive(Args)]
struct MetaArgs {
    #[arg(long)]
    spacing: Option<f64>,
    #[arg(long)]
    wavelength: Option<f64>,
}

impl MetaArgs {
    fn overrides(&self) -> MetaOverride {
        MetaOverride { spacing_mm: self.spacing, wavelength_px: self.wavelength }
    }
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::Io { path: path.to_path_buf(), source: e })
}

fn dataset_dir(arg: &Option<PathBuf>, cfg: &RunConfig) -> Result<PathBuf> {
    match arg {
        Some(p) => Ok(p.clone()),
        None if !cfg.dataset.is_empty() => Ok(PathBuf::from(&cfg.dataset)),
        None => Err(invalid("no dataset given (use --dataset or data.dataset)")),
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(src) => RunConfig::load(src)?,
        None => RunConfig::default(),
    };
    for kv in &cli.overrides {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| invalid(format!("--set expects key=value, got '{kv}'")))?;
        cfg.set(k.trim(), v.trim())?;
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn command_name(c: &Command) -> String {
    match c {
        Command::Phantom(_) => "phantom gen".into(),
        Command::Features(_) => "features extract".into(),
        Command::Train(_) => "train".into(),
        Command::Delineate { .. } => "delineate".into(),
        Command::Evaluate { .. } => "evaluate".into(),
        Command::Gridsearch { .. } => "gridsearch".into(),
        Command::Featselect(_) => "featselect".into(),
        Command::Baseline { kind, .. } => format!("baseline {kind}"),
    }
}

/// Delineate each image of the input and write pred CSVs; returns metrics rows when a GS exists.
fn predict_all<F>(input: &Input, cfg: &RunConfig, out: &Path, predict: F) -> Result<()>
where
    F: Fn(&bonetrace::imagecore::Image) -> Result<(bonetrace::imagecore::Delineation, Option<bonetrace::imagecore::LabelMap>)>
        + Sync,
{
    if let Some(path) = &input.image {
        let img = load_image(path, &input.meta.overrides())?;
        let (d, lm) = predict(&img)?;
        save_delineation(&d, &out.join("pred.csv"))?;
        if let Some(lm) = lm {
            save_labelmap(&lm, &out.join("labels.pgm"))?;
        }
        return Ok(());
    }
    let dir = dataset_dir(&input.dataset, cfg)?;
    let ds = Dataset::load(&dir)?;
    let rows: Vec<(String, MetricsReport)> = (0..ds.len())
        .into_par_iter()
        .map(|i| {
            let s = ds.sample(i)?;
            let (d, _) = predict(&s.image)?;
            save_delineation(&d, &out.join(format!("pred_{:04}.csv", s.id)))?;
            Ok((s.id.to_string(), score(&s, &d)?))
        })
        .collect::<Result<_>>()?;
    write(&out.join("metrics.csv"), &to_csv(&rows))
}

fn run(cli: &Cli) -> Result<()> {
    let cfg = load_config(cli)?;
    let out = &cli.out;
    std::fs::create_dir_all(out).map_err(|e| Error::Io { path: out.clone(), source: e })?;
    write_provenance(out, &command_name(&cli.command), &cfg)?;

    match &cli.command {
        Command::Phantom(PhantomCmd::Gen { n, width, height }) => {
            let ranges = PhantomRanges { width: *width, height: *height, ..PhantomRanges::default() };
            generate_dataset(out, *n, &ranges, cfg.seed)
        }
        Command::Features(FeaturesCmd::Extract { image, meta, ps }) => {
            let img = load_image(image, &meta.overrides())?;
            let prep = prepare(&img, &cfg)?;
            save_stack(&prep.stack, &out.join("features.bin"))?;
            let names: String = prep.stack.names().iter().map(|n| format!("{n}\n")).collect();
            write(&out.join("features.txt"), &format!("feature\n{names}"))?;
            if *ps {
                let map = ps_map(&prep.image, &cfg.ps)?;
                let mut stack = FeatureStack::new(map.normalized.width(), map.normalized.height());
                stack.push("phase symmetry", "ps", map.normalized)?;
                save_stack(&stack, &out.join("ps.bin"))?;
            }
            Ok(())
        }
        Command::Train(d) => {
            let ds = Dataset::load(&dataset_dir(&d.dataset, &cfg)?)?;
            let samples = prepare_samples(ds.samples()?, &cfg)?;
            let refs: Vec<_> = samples.iter().collect();
            train_on(&refs, &cfg)?.save(out)
        }
        Command::Delineate { models, input, overlay } => {
            let models = Models::load(models)?;
            predict_all(input, &cfg, out, |img| {
                let solved = delineate_image(img, &models, &cfg)?;
                if *overlay && input.image.is_some() {
                    render_overlay(img, &solved.delineation, None, &out.join("overlay.png"))?;
                }
                Ok((solved.delineation, Some(solved.labels)))
            })
        }
        Command::Evaluate { data, pred } => {
            let ds = Dataset::load(&dataset_dir(&data.dataset, &cfg)?)?;
            let rows: Vec<(String, MetricsReport)> = (0..ds.len())
                .map(|i| {
                    let s = ds.sample(i)?;
                    let spacing = s.image.spacing_mm();
                    let p = load_delineation(&pred.join(format!("pred_{:04}.csv", s.id)), spacing)?;
                    Ok((s.id.to_string(), evaluate(&p, &s.gs, spacing)?))
                })
                .collect::<Result<_>>()?;
            write(&out.join("metrics.csv"), &to_csv(&rows))
        }
        Command::Gridsearch { data, grid } => {
            let spec = match grid {
                Some(p) => {
                    let text = std::fs::read_to_string(p).map_err(|e| Error::Io { path: p.clone(), source: e })?;
                    GridSpec::parse(&text, &cfg)?
                }
                None => GridSpec::from_config(&cfg),
            };
            spec.validate()?;
            let ds = Dataset::load(&dataset_dir(&data.dataset, &cfg)?)?;
            let samples = prepare_samples(ds.samples()?, &cfg)?;
            let report = crossval_gridsearch(&samples, &spec, &cfg)?;
            write(&out.join("gridsearch.csv"), &report_csv(&report.best))?;
            write(&out.join("gridsearch_all.csv"), &report_csv(&report.all))
        }
        Command::Featselect(d) => {
            let ds = Dataset::load(&dataset_dir(&d.dataset, &cfg)?)?;
            let samples = prepare_samples(ds.samples()?, &cfg)?;
            let report = run_feature_selection(&samples, &cfg)?;
            write(&out.join("elimination.csv"), &elimination_csv(&report.trace))?;
            write(&out.join("timing.csv"), &timing_csv(&report.timing))?;
            plot_trace(&report.trace, &out.join("elimination.png"))
        }
        Command::Baseline { kind, input } => predict_all(input, &cfg, out, |img| Ok((run_baseline(img, *kind, &cfg)?, None))),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if cli.jobs > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.jobs).build_global() {
            log::warn!("could not size the worker pool: {e}");
        }
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 2 } else { 3 })
        }
    }
}
