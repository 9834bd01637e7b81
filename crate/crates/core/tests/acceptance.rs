//! Acceptance suite: every criterion prints one PASS/FAIL line; any failure exits non-zero.

mod common;

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use bonetrace::boost::{oob_importance, train, BoostConfig};
use bonetrace::confmap::{attenuation_cps, confidence_map, shadowing_cps, ConfMapParams};
use bonetrace::delineate::Baseline;
use bonetrace::features::{cw_cumulative, cw_local_statistics, haar_center_surround, lbp_family, patch_statistics};
use bonetrace::graphmodel::{build_graph, build_unaries, GraphParams};
use bonetrace::imagecore::{column_is_ordered, Delineation, Image, Label, LabelMap, Scheme};
use bonetrace::metrics::{evaluate, mean_metric, MetricsReport};
use bonetrace::phantom::{dataset_phantom, generate_dataset, PhantomRanges};
use bonetrace::phasesym::{f_ps, phase_symmetry, PsConfig};
use bonetrace::pipeline::{
    classify, prepare_samples, ps_map, run_baseline, score, solve_maps, train_on, Dataset, PreparedSample,
    ProbabilityMaps, RunConfig,
};
use bonetrace::raster::Raster;
use bonetrace::trws::{brute_force, solve, to_labelmap, TrwsConfig, TrwsResult};
use common::*;
use rand::Rng;

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(t: Instant, limit: Duration) -> Result<(), String> {
    ensure(t.elapsed() < limit, || format!("took {:.1?}, limit {limit:?}", t.elapsed()))
}

/// Every solve of the suite goes through here so the bound history can be re-checked.
fn checked_solve(g: &bonetrace::graphmodel::FactorGraph) -> TrwsResult {
    let r = solve(g, &TrwsConfig::default()).unwrap();
    for w in r.bound_history.windows(2) {
        assert!(w[1] >= w[0] - 1e-9 * (1.0 + w[0].abs()), "bound decreased");
    }
    r
}

fn random_graph(seed: u64, w: usize, h: usize, scheme: Scheme) -> bonetrace::graphmodel::FactorGraph {
    let mut rng = rng(seed);
    let pt = Raster::from_fn(w, h, |_, _| rng.random_range(0.0..1.0));
    let ps = Raster::from_fn(w, h, |_, _| rng.random_range(0.0..1.0));
    let f = Raster::from_fn(w, h, |_, _| rng.random_range(1e-3..1.0));
    let params = GraphParams {
        scheme,
        mu: rng.random_range(0.1..5.0),
        k1: rng.random_range(0.1..1.0),
        k2: rng.random_range(0.1..1.0),
        k3: 10f64.powf(rng.random_range(-1.0..3.0)),
        l: 2,
    };
    build_graph(&build_unaries(&pt, &ps, scheme).unwrap(), &params, Some(&f)).unwrap()
}

fn c1_tree_exactness() -> Outcome {
    let t = Instant::now();
    let mut worst = 0.0f64;
    for scheme in [Scheme::Cbg, Scheme::Bfg] {
        for seed in 0..100 {
            let g = random_graph(seed, 1, 8, scheme);
            let r = checked_solve(&g);
            let (_, opt) = brute_force(&g).unwrap();
            worst = worst.max((r.energy - opt).abs());
        }
    }
    ensure(worst < 1e-9, || format!("max |E - E*| = {worst:e}"))?;
    within(t, Duration::from_secs(10))?;
    Ok(format!("200 chains, max |E - E*| = {worst:.1e}, {:.2?}", t.elapsed()))
}

fn c2_loopy_bounds() -> Outcome {
    let t = Instant::now();
    let (mut bounded, mut close) = (0, 0);
    for seed in 0..200 {
        let g = random_graph(1000 + seed, 4, 4, Scheme::Cbg);
        let r = checked_solve(&g);
        let (_, opt) = brute_force(&g).unwrap();
        let tol = 1e-9 * (1.0 + opt.abs());
        if r.lower_bound <= opt + tol && opt <= r.energy + tol {
            bounded += 1;
        }
        if r.energy - opt <= 1e-4 * opt.abs() {
            close += 1;
        }
    }
    ensure(bounded == 200, || format!("bounds held on {bounded}/200"))?;
    ensure(close >= 190, || format!("{close}/200 within 1e-4"))?;
    within(t, Duration::from_secs(60))?;
    Ok(format!("bounds 200/200, within gap {close}/200, {:.2?}", t.elapsed()))
}

/// Probabilities from the true labels with uniform noise.
fn noisy_probs(labels: &LabelMap, seed: u64) -> (Raster, Raster) {
    let mut rng = rng(seed);
    let (w, h) = (labels.width(), labels.height());
    let mut pt = Raster::filled(w, h, 0.0);
    let mut ps = Raster::filled(w, h, 0.0);
    for r in 0..h {
        for c in 0..w {
            let l = labels.get(r, c);
            let base = |hit: bool| -> f64 { if hit { 0.7 } else { 0.3 } };
            pt.set(r, c, (base(l == Label::Tissue) + rng.random_range(-0.25..0.25)).clamp(0.01, 0.99));
            ps.set(r, c, (base(l == Label::Shadow) + rng.random_range(-0.25..0.25)).clamp(0.01, 0.99));
        }
    }
    (pt, ps)
}

fn c3_structure() -> Outcome {
    let ranges = PhantomRanges::default();
    let l = GraphParams::default_l(1.0);
    let (mut columns, mut order_bad, mut run_bad) = (0, 0, 0);
    for scheme in [Scheme::Cbg, Scheme::Bfg] {
        for k in 0..8 {
            let (_, p) = dataset_phantom(&ranges, 33, k).map_err(|e| e.to_string())?;
            let (pt, pss) = noisy_probs(&p.labels, k as u64);
            let params = GraphParams { scheme, l, ..GraphParams::default() };
            let f = f_ps(&phase_symmetry(p.image.pixels(), &PsConfig::default()).unwrap(), 0.01);
            let g = build_graph(&build_unaries(&pt, &pss, scheme).unwrap(), &params, Some(&f)).unwrap();
            let lm = to_labelmap(&g, &checked_solve(&g).labels, scheme);
            for c in 0..lm.width() {
                let col = lm.column(c);
                columns += 1;
                if !column_is_ordered(&col, scheme) {
                    order_bad += 1;
                }
                let bones = col.iter().filter(|&&x| x == Label::Bone).count();
                if scheme == Scheme::Bfg && bones > 0 && col.contains(&Label::Shadow) && bones != l {
                    run_bad += 1;
                }
            }
        }
    }
    ensure(columns >= 1000, || format!("only {columns} columns"))?;
    ensure(order_bad == 0 && run_bad == 0, || format!("{order_bad} order and {run_bad} run-length violations"))?;
    Ok(format!("{columns} columns, 0 order violations, BFG runs all l={l}"))
}

fn max_abs(a: &Raster, b: &Raster) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn c5_feature_oracles() -> Outcome {
    let t = Instant::now();
    let mut worst = BTreeMap::new();
    let mut note = |name: &'static str, e: f64| {
        let w = worst.entry(name).or_insert(0.0f64);
        *w = w.max(e);
    };
    for seed in 0..10 {
        let img = random_raster(500 + seed, 32, 32);
        let s = patch_statistics(&img, 2, 32);
        let maps = [&s.mean, &s.median, &s.variance, &s.std, &s.skewness, &s.kurtosis, &s.entropy, &s.energy];
        let (sum, mean, std) = cw_cumulative(&img);
        let haar = haar_center_surround(&img, 5);
        for r in 0..32 {
            for c in 0..32 {
                let want = naive_patch_stats(&img, r, c, 2, 32);
                for (k, m) in maps.iter().enumerate() {
                    note("patch", (m.get(r, c) - want[k]).abs());
                }
                let (a, b, d) = naive_cumulative(&img, r, c);
                note("cumulative", (sum.get(r, c) - a).abs().max((mean.get(r, c) - b).abs()).max((std.get(r, c) - d).abs()));
                note("haar", (haar.get(r, c) - naive_haar(&img, r, c, 5)).abs());
            }
        }
        let halves = [1, 2, 4];
        note("attenuation", max_abs(&attenuation_cps(&img, &halves), &naive_attenuation(&img, &halves)));
        note("shadowing", max_abs(&shadowing_cps(&img, &halves).0, &naive_shadowing(&img, &halves)));
    }
    for (name, e) in &worst {
        ensure(*e < 1e-6, || format!("{name} error {e:e}"))?;
    }
    within(t, Duration::from_secs(30))?;
    let worst_all = worst.values().copied().fold(0.0, f64::max);
    Ok(format!("5 families x 10 images, max error {worst_all:.1e}, {:.2?}", t.elapsed()))
}

fn c6_filters() -> Outcome {
    let img = random_raster(600, 3, 128);
    let (o0, o1) = (cw_local_statistics(&img, 5.0, 0), cw_local_statistics(&img, 5.0, 1));
    let mut fd = 0.0f64;
    for c in 0..3 {
        for r in 1..127 {
            fd = fd.max((o1.get(r, c) - (o0.get(r + 1, c) - o0.get(r - 1, c)) / 2.0).abs());
        }
    }
    ensure(fd < 1e-3, || format!("finite-difference deviation {fd:e}"))?;
    let flat = phase_symmetry(&Raster::filled(48, 40, 0.37), &PsConfig::default()).unwrap();
    ensure(flat.raw.data().iter().all(|&v| v == 0.0), || "PS of a constant image is not 0".into())?;
    let (mut hits, mut total) = (0, 0);
    for seed in 0..20 {
        let (img, rows) = line_image(seed, 96, 96);
        let ps = phase_symmetry(&img, &PsConfig::default()).unwrap();
        for (c, &row) in rows.iter().enumerate() {
            let best = (0..96).fold(0, |b, r| if ps.normalized.get(r, c) > ps.normalized.get(b, c) { r } else { b });
            total += 1;
            hits += ((best as f64 - row).abs() <= 1.0) as usize;
        }
    }
    let frac = hits as f64 / total as f64;
    ensure(frac >= 0.95, || format!("line localized on {:.1}% of columns", 100.0 * frac))?;
    Ok(format!("FD dev {fd:.1e}, constant PS = 0, line hit rate {:.1}%", 100.0 * frac))
}

fn c7_texture_invariance() -> Outcome {
    let img = random_raster(700, 24, 24);
    let base = lbp_family(&img);
    let mut rng = rng(701);
    for k in 0..20 {
        let (gamma, gain) = (rng.random_range(0.2..5.0), rng.random_range(0.1..10.0));
        let m = lbp_family(&img.map(|v| gain * v.powf(gamma) + v));
        ensure(m.lbp.data() == base.lbp.data() && m.ext_lbp.data() == base.ext_lbp.data(), || {
            format!("LBP changed under monotone map {k}")
        })?;
        let (a, b) = (rng.random_range(0.01..100.0), rng.random_range(-10.0..10.0));
        let m = lbp_family(&img.map(|v| a * v + b));
        ensure(m.mct.data() == base.mct.data() && m.ext_mct.data() == base.ext_mct.data(), || {
            format!("MCT changed under affine map {k}")
        })?;
    }
    Ok("20 monotone + 20 affine transforms, codes identical".into())
}

fn c8_confidence() -> Outcome {
    let params = ConfMapParams::default();
    for seed in 0..5 {
        let img = Image::new(random_raster(800 + seed, 24, 24), 0.1, 1.0).unwrap();
        let cm = confidence_map(&img, &params).unwrap().values;
        for c in 0..24 {
            ensure(cm.get(0, c) == 1.0 && cm.get(23, c) == 0.0, || "boundary rows not 1/0".into())?;
            for r in 1..23 {
                let v = cm.get(r, c);
                ensure(v > 0.0 && v < 1.0, || format!("interior value {v} at ({r},{c})"))?;
            }
        }
    }
    let flat = confidence_map(&Image::new(Raster::filled(15, 20, 0.5), 0.1, 1.0).unwrap(), &params).unwrap().values;
    let mut spread = 0.0f64;
    for r in 0..20 {
        let row: Vec<f64> = (0..15).map(|c| flat.get(r, c)).collect();
        spread = spread.max(row.iter().copied().fold(f64::MIN, f64::max) - row.iter().copied().fold(f64::MAX, f64::min));
    }
    ensure(spread < 1e-6, || format!("row spread {spread:e}"))?;
    let px = [[0.2, 0.9], [0.5, 0.1], [0.7, 0.3]];
    let cm = confidence_map(&Image::new(Raster::from_fn(2, 3, |r, c| px[r][c]), 0.1, 1.0).unwrap(), &params)
        .unwrap()
        .values;
    let (x0, x1) = hand_confidence_2x3(px, &params);
    let hand = (cm.get(1, 0) - x0).abs().max((cm.get(1, 1) - x1).abs());
    ensure(hand < 1e-9, || format!("2x3 system off by {hand:e}"))?;
    Ok(format!("bounds hold, constant-image spread {spread:.1e}, 2x3 error {hand:.1e}"))
}

fn c9_classifier() -> Outcome {
    let ts = separable_set(900, 400);
    let m = train(&ts, &BoostConfig { t_size: 30, ..BoostConfig::default() }).map_err(|e| e.to_string())?;
    let p = m.predict_batch(&ts).unwrap();
    let acc = p.iter().zip(ts.labels()).filter(|(p, &y)| (**p > 0.5) == (y == 1)).count() as f64 / ts.len() as f64;
    ensure(acc == 1.0, || format!("separable accuracy {acc}"))?;
    let mut wins = 0;
    for seed in 0..20u64 {
        let planted = (seed as usize * 7) % 10;
        let ts = planted_set(910 + seed, 600, 10, planted);
        let m = train(&ts, &BoostConfig { seed, ..BoostConfig::default() }).unwrap();
        let imp = oob_importance(&m, &ts).unwrap();
        let best = imp.groups.iter().max_by(|a, b| a.1.total_cmp(&b.1)).unwrap();
        wins += (best.0 == format!("g{}", planted / 2)) as usize;
    }
    ensure(wins >= 19, || format!("planted group first in {wins}/20"))?;
    let ts = planted_set(950, 500, 6, 3);
    let (a, b) = (train(&ts, &BoostConfig::default()).unwrap(), train(&ts.label_swapped(), &BoostConfig::default()).unwrap());
    let sym = (0..ts.len())
        .map(|i| (a.predict_proba(ts.row(i)).unwrap() + b.predict_proba(ts.row(i)).unwrap() - 1.0).abs())
        .fold(0.0, f64::max);
    ensure(sym < 1e-9, || format!("label-swap asymmetry {sym:e}"))?;
    Ok(format!("accuracy 1.0, planted first {wins}/20, swap asymmetry {sym:.1e}"))
}

fn oracle_probs(lm: &LabelMap) -> ProbabilityMaps {
    let (w, h) = (lm.width(), lm.height());
    ProbabilityMaps {
        p_tissue: Raster::from_fn(w, h, |r, c| if lm.get(r, c) == Label::Tissue { 0.9 } else { 0.1 }),
        p_shadow: Raster::from_fn(w, h, |r, c| if lm.get(r, c) == Label::Shadow { 0.9 } else { 0.1 }),
    }
}

fn mean_of(v: &[MetricsReport], f: fn(&MetricsReport) -> f64) -> f64 {
    v.iter().map(f).sum::<f64>() / v.len() as f64
}

fn c10_phantom_benchmark() -> Outcome {
    let t = Instant::now();
    let cfg = RunConfig::preset("cbg-paper").unwrap();
    let ranges = PhantomRanges::default();
    let mse_target = 2.0 * ranges.spacing_mm;

    // Calibration: the verified solver on oracle probabilities must reach the targets,
    // otherwise they are unattainable by construction and the benchmark is meaningless.
    let mut calib = Vec::new();
    for k in 0..5 {
        let (_, p) = dataset_phantom(&ranges, 4242, k).unwrap();
        let ps = ps_map(&p.image, &cfg.ps).unwrap();
        let solved = solve_maps(&p.image, &p.image, &oracle_probs(&p.labels), Some(&ps), &cfg).unwrap();
        calib.push(evaluate(&solved.delineation, &p.gs, ranges.spacing_mm).unwrap());
    }
    let (cmp, cmse) = (mean_of(&calib, |r| r.mp_percent), mean_of(&calib, |r| r.mse_mm));
    assert!(
        cmp <= 5.0 && cmse <= mse_target,
        "targets structurally unattainable: oracle-probability MP {cmp:.2}%, MSE {cmse:.3} mm"
    );

    let dir = tempfile::tempdir().unwrap();
    generate_dataset(dir.path(), 50, &ranges, 2024).map_err(|e| e.to_string())?;
    let samples = prepare_samples(Dataset::load(dir.path()).unwrap().samples().unwrap(), &cfg).map_err(|e| e.to_string())?;
    let (train_set, test_set) = samples.split_at(30);
    let refs: Vec<&PreparedSample> = train_set.iter().collect();
    let models = train_on(&refs, &cfg).map_err(|e| e.to_string())?;
    let (mut cbg, mut cbg_adv, mut ps_adv) = (Vec::new(), Vec::new(), Vec::new());
    for s in test_set {
        let probs = classify(&s.prepared.stack, &models).unwrap();
        let ps = ps_map(&s.prepared.image, &cfg.ps).unwrap();
        let solved = solve_maps(&s.sample.image, &s.prepared.image, &probs, Some(&ps), &cfg).map_err(|e| e.to_string())?;
        let r = score(&s.sample, &solved.delineation).unwrap();
        if s.sample.adversarial {
            cbg_adv.push(r);
            let base = run_baseline(&s.sample.image, Baseline::PsUp, &cfg).unwrap();
            ps_adv.push(score(&s.sample, &base).unwrap());
        }
        cbg.push(r);
    }
    let (mp, mse) = (mean_of(&cbg, |r| r.mp_percent), mean_of(&cbg, |r| r.mse_mm));
    let (shd_cbg, shd_ps) = (mean_of(&cbg_adv, |r| r.shd_mm), mean_of(&ps_adv, |r| r.shd_mm));
    let summary = format!(
        "MP {mp:.2}% (<= 5), MSE {mse:.3} mm (<= {mse_target:.2}), adversarial sHD CBG {shd_cbg:.2} vs PS-up {shd_ps:.2} mm over {} images, mean_f {:.3} mm, {:.0?}",
        cbg_adv.len(),
        mean_of(&cbg, mean_metric),
        t.elapsed()
    );
    ensure(!cbg_adv.is_empty(), || "no adversarial phantoms in the test split".into())?;
    ensure(mp <= 5.0 && mse <= mse_target && shd_cbg < shd_ps, || summary.clone())?;
    within(t, Duration::from_secs(15 * 60))?;
    Ok(summary)
}

fn c11_metrics() -> Outcome {
    let gs = Delineation::from_entries(0.1, (0..50).map(|c| (c, 30.0 + (c as f64 * 0.3).sin())));
    let same = evaluate(&gs, &gs, 0.1).unwrap();
    let zero = [same.rmse_mm, same.med_mm, same.ohd_mm, same.shd_mm, same.ohd95_mm, same.shd95_mm, same.mse_mm, same.mp_percent];
    ensure(zero.iter().all(|&v| v == 0.0), || format!("identity report {same:?}"))?;
    let flat = Delineation::from_entries(0.1, (0..50).map(|c| (c, 30.0)));
    let shifted = Delineation::from_entries(0.1, (0..50).map(|c| (c, 33.0)));
    let r = evaluate(&shifted, &flat, 0.1).unwrap();
    for v in [r.rmse_mm, r.mse_mm, r.ohd_mm] {
        ensure((v - 0.3).abs() < 1e-12, || format!("offset report {r:?}"))?;
    }
    let mut row = r;
    let mut reference = Vec::new();
    for (vals, want) in [((0.42, 1.35, 2.77), 1.51), ((0.56, 1.59, 3.37), 1.84)] {
        (row.rmse_mm, row.ohd_mm, row.shd_mm) = vals;
        let got = mean_metric(&row);
        ensure((got - want).abs() < 0.005, || format!("mean_metric {got} vs {want}"))?;
        reference.push(format!("{got:.3}"));
    }
    Ok(format!("identity 0, offset 0.3 mm, reference rows -> {}", reference.join(", ")))
}

fn files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    for e in std::fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        let name = p.file_name().unwrap().to_string_lossy().to_string();
        // Wall-clock timings are the one intentionally non-reproducible output.
        if p.is_file() && name != "timing.csv" {
            out.insert(name, std::fs::read(&p).unwrap());
        }
    }
    out
}

fn c12_determinism() -> Outcome {
    let root = tempfile::tempdir().unwrap();
    let r = root.path();
    let bin = env!("CARGO_BIN_EXE_bonetrace");
    let data = r.join("data");
    let s = |p: &Path| p.to_str().unwrap().to_string();
    let small = ["--seed", "5", "--set", "sampling.per_image=200", "--set", "boost.t_size=10", "--set", "gridsearch.folds=3", "--set", "gridsearch.subsets=2"];
    let run = |args: Vec<String>, out: &Path| -> Result<(), String> {
        let o = Command::new(bin).args(&args).args(small).arg("--out").arg(out).output().unwrap();
        ensure(o.status.success(), || format!("{args:?}: {}", String::from_utf8_lossy(&o.stderr)))
    };
    run(vec!["phantom".into(), "gen".into(), "--n".into(), "6".into()], &data)?;
    run(vec!["train".into(), "--dataset".into(), s(&data)], &r.join("models"))?;
    let img = data.join("img_0000.pgm");
    let grid = r.join("grid.txt");
    std::fs::write(&grid, "graph.k3=100,0.1\n").unwrap();
    let commands: Vec<(&str, Vec<String>)> = vec![
        ("phantom gen", vec!["phantom".into(), "gen".into(), "--n".into(), "6".into()]),
        ("features extract", vec!["features".into(), "extract".into(), "--image".into(), s(&img), "--ps".into()]),
        ("train", vec!["train".into(), "--dataset".into(), s(&data)]),
        ("delineate", vec!["delineate".into(), "--models".into(), s(&r.join("models")), "--dataset".into(), s(&data)]),
        ("evaluate", vec!["evaluate".into(), "--dataset".into(), s(&data), "--pred".into(), s(&r.join("delineate_a"))]),
        ("gridsearch", vec!["gridsearch".into(), "--dataset".into(), s(&data), "--grid".into(), s(&grid)]),
        ("featselect", vec!["featselect".into(), "--dataset".into(), s(&data)]),
        ("baseline ps-up", vec!["baseline".into(), "ps-up".into(), "--dataset".into(), s(&data)]),
        ("baseline ps-max", vec!["baseline".into(), "ps-max".into(), "--dataset".into(), s(&data)]),
        ("baseline cps-up", vec!["baseline".into(), "cps-up".into(), "--dataset".into(), s(&data)]),
    ];
    let mut csvs = 0;
    for (name, args) in commands {
        let key = name.replace(' ', "_");
        let (a, b) = (r.join(format!("{key}_a")), r.join(format!("{key}_b")));
        run(args.clone(), &a)?;
        run(args, &b)?;
        let (fa, fb) = (files(&a), files(&b));
        ensure(fa == fb, || format!("{name}: outputs differ between runs"))?;
        csvs += fa.keys().filter(|k| k.ends_with(".csv")).count();
    }
    Ok(format!("10 commands x 2 runs, {csvs} CSV files bit-identical"))
}

fn main() {
    let criteria: [(u32, &str, fn() -> Outcome); 11] = [
        (1, "oracle exactness on trees", c1_tree_exactness),
        (2, "oracle bounds on loopy graphs", c2_loopy_bounds),
        (3, "structural invariants", c3_structure),
        (5, "feature oracles", c5_feature_oracles),
        (6, "filter correctness", c6_filters),
        (7, "texture-descriptor invariance", c7_texture_invariance),
        (8, "confidence map", c8_confidence),
        (9, "classifier sanity", c9_classifier),
        (10, "end-to-end phantom benchmark", c10_phantom_benchmark),
        (11, "metrics", c11_metrics),
        (12, "CLI determinism", c12_determinism),
    ];
    let mut results: BTreeMap<u32, (String, Outcome)> = BTreeMap::new();
    let only: Option<u32> = std::env::args().nth(1).and_then(|a| a.parse().ok());
    for (id, name, check) in criteria {
        if only.is_some_and(|o| o != id) {
            continue;
        }
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into());
            Err(msg)
        });
        print_line(id, name, &outcome);
        results.insert(id, (name.to_string(), outcome));
    }
    // The solver asserts bound monotonicity on every iteration; reaching this point with
    // no "bound decreased" panic above means it held in every solve of the suite.
    if only.is_none_or(|o| o == 4) {
        let broke = results.values().any(|(_, o)| matches!(o, Err(m) if m.contains("bound decreased")));
        let outcome = if broke { Err("a solve reported a decreasing bound".into()) } else { Ok("lower bound non-decreasing in every solve".into()) };
        print_line(4, "dual monotonicity", &outcome);
        results.insert(4, ("dual monotonicity".into(), outcome));
    }
    let failed = results.values().filter(|(_, o)| o.is_err()).count();
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

fn print_line(id: u32, name: &str, outcome: &Outcome) {
    match outcome {
        Ok(d) => println!("criterion {id:>2} PASS  {name}: {d}"),
        Err(d) => println!("criterion {id:>2} FAIL  {name}: {d}"),
    }
}
