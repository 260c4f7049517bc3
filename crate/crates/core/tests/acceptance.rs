//! Acceptance suite. Runs every criterion in order, prints one PASS/FAIL
//! line each and exits non-zero if any fails. A name filter may be passed
//! as a free argument.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use surveil_core::adnn::{
    grad_check, product_layer_backward, product_layer_forward, sum_layer_backward,
    sum_layer_forward, train, AdnnConfig, AdnnModel, DistKernel, GradCheckLayer, InferencePlan, TrainConfig,
};
use surveil_core::frame_io::{load_sequence, write_sequence, FrameSource};
use surveil_core::histogram::{sample_training_set, Histogram, TemporalWindow};
use surveil_core::mask::{BinaryMask, Confusion};
use surveil_core::mil::{score_forward, train_mil, MilParams, MilWeights};
use surveil_core::pipeline::manifest::TIMING_FILES;
use surveil_core::pipeline::stages::{timed_score, MASKS_DIR, MIL_DIR, TRIMMED_DIR, WEIGHTS_FILE};
use surveil_core::pipeline::{cmd_e2e, cmd_report, E2eOutcome, PipelineConfig, StageReport};
use surveil_core::refine::{refine, RefineParams};
use surveil_core::synth::{gaussian_bags, generate_scene, write_demo, SceneSpec};
use surveil_core::trim::{
    emit_trimmed, foreground_ratio, map_to_original, select_frames, TrimConfig, TrimSegmentMap, MAP_FILE_NAME,
};
use surveil_core::SequenceStats;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn rand_vec(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}

fn odd_bins(rng: &mut ChaCha8Rng, max: usize) -> usize {
    2 * rng.random_range(1..=(max - 1) / 2) + 1
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn hist(v: &[f64]) -> Histogram {
    Histogram::from_bins(v.to_vec()).unwrap()
}

fn kernel(v: &[f64]) -> DistKernel {
    DistKernel::new(v.to_vec()).unwrap()
}

fn gradients() -> Outcome {
    let t = Instant::now();
    let layers = [
        ("sum", GradCheckLayer::Sum),
        ("product", GradCheckLayer::Product),
        ("classifier", GradCheckLayer::Classifier),
    ];
    let mut worst = Vec::new();
    for (i, (name, layer)) in layers.iter().enumerate() {
        worst.push((name, grad_check(*layer, 21, 100, 1e-5, 11 + i as u64).unwrap()));
    }
    let secs = t.elapsed().as_secs_f64();
    let pass = worst.iter().all(|(_, e)| *e <= 1e-4) && secs < 10.0;
    let detail = worst
        .iter()
        .map(|(n, e)| format!("{n} {e:.2e}"))
        .collect::<Vec<_>>()
        .join(", ");
    outcome(pass, format!("max relative error {detail} (limit 1e-4), {secs:.2}s (limit 10s)"))
}

fn mass_conservation() -> Outcome {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let b = odd_bins(&mut rng, 201);
        let x = rand_vec(&mut rng, b, 0.0, 1.0);
        let w = rand_vec(&mut rng, b, -1.0, 1.0);
        let expected = x.iter().sum::<f64>() * w.iter().sum::<f64>();
        for out in [
            sum_layer_forward(&hist(&x), &kernel(&w)).unwrap(),
            product_layer_forward(&hist(&x), &kernel(&w)).unwrap(),
        ] {
            worst = worst.max((out.total() - expected).abs());
        }
    }
    let secs = t.elapsed().as_secs_f64();
    outcome(
        worst <= 1e-9 && secs < 5.0,
        format!("max |sum out - sum X * sum W| {worst:.2e} (limit 1e-9), {secs:.2}s (limit 5s)"),
    )
}

/// Value-domain reference: every pair of grid values is combined and the
/// result is rounded back onto the grid, halves going up. Positions are exact
/// multiples of 1/2, so a small nudge absorbs float error at the ties.
fn naive_forward(x: &[f64], w: &[f64], product: bool) -> Vec<f64> {
    let b = x.len();
    let half = ((b - 1) / 2) as f64;
    let value = |i: usize| (i as f64 - half) / half;
    let mut out = vec![0.0; b];
    for i in 0..b {
        for j in 0..b {
            let v = if product { value(i) * value(j) } else { value(i) + value(j) };
            let k = ((v + 1.0) * half + 1e-9).round().clamp(0.0, (b - 1) as f64) as usize;
            out[k] += x[i] * w[j];
        }
    }
    out
}

fn oracle_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let b = odd_bins(&mut rng, 101);
        let x = rand_vec(&mut rng, b, 0.0, 1.0);
        let w = rand_vec(&mut rng, b, -1.0, 1.0);
        let sum = sum_layer_forward(&hist(&x), &kernel(&w)).unwrap();
        let prod = product_layer_forward(&hist(&x), &kernel(&w)).unwrap();
        for (got, want) in [(sum.bins(), naive_forward(&x, &w, false)), (prod.bins(), naive_forward(&x, &w, true))] {
            for (g, r) in got.iter().zip(&want) {
                worst = worst.max((g - r).abs());
            }
        }
    }
    let mut identity_ok = true;
    for _ in 0..100 {
        let b = odd_bins(&mut rng, 201);
        let x = hist(&rand_vec(&mut rng, b, 0.0, 1.0));
        let s = sum_layer_forward(&x, &DistKernel::sum_identity(b).unwrap()).unwrap();
        let p = product_layer_forward(&x, &DistKernel::product_identity(b).unwrap()).unwrap();
        let bits = |h: &Histogram| h.bins().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        identity_ok &= bits(&s) == bits(&x) && bits(&p) == bits(&x);
    }
    outcome(
        worst <= 1e-12 && identity_ok,
        format!("max deviation from the naive oracle {worst:.2e} (limit 1e-12), identity kernels bitwise: {identity_ok}"),
    )
}

fn adjoints() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let mut worst = 0.0f64;
    for product in [false, true] {
        let fwd = |x: &[f64], w: &[f64]| {
            if product {
                product_layer_forward(&hist(x), &kernel(w)).unwrap().into_bins()
            } else {
                sum_layer_forward(&hist(x), &kernel(w)).unwrap().into_bins()
            }
        };
        for _ in 0..100 {
            let b = odd_bins(&mut rng, 101);
            let x = rand_vec(&mut rng, b, 0.0, 1.0);
            let w = rand_vec(&mut rng, b, -1.0, 1.0);
            let u = rand_vec(&mut rng, b, -1.0, 1.0);
            let v = rand_vec(&mut rng, b, -1.0, 1.0);
            let back = if product {
                product_layer_backward(&u, &hist(&x), &kernel(&w)).unwrap()
            } else {
                sum_layer_backward(&u, &hist(&x), &kernel(&w)).unwrap()
            };
            // Bilinear: the Jacobian in X applies the layer to v with W fixed,
            // and the Jacobian in W applies it with X fixed.
            worst = worst.max((dot(&u, &fwd(&v, &w)) - dot(&back.d_input, &v)).abs());
            worst = worst.max((dot(&u, &fwd(&x, &v)) - dot(&back.d_kernel, &v)).abs());
        }
    }
    outcome(worst <= 1e-9, format!("max |<u, Jv> - <J^T u, v>| {worst:.2e} (limit 1e-9)"))
}

fn background_subtraction() -> Outcome {
    let t = Instant::now();
    let scene = generate_scene(&SceneSpec::looping()).unwrap();
    let seq = scene.sequence();
    let window = TemporalWindow::new(50).unwrap();
    let labeled: Vec<(usize, BinaryMask)> = (0..10).map(|i| 60 + 24 * i).map(|t| (t, scene.truth[t].clone())).collect();
    let set = sample_training_set(&seq, &labeled, 2000, 0, window, 201).unwrap();
    let model = AdnnModel::new(AdnnConfig::default(), 0).unwrap();
    let (model, curve) = train(model, &set.samples, &TrainConfig::default()).unwrap();
    let plan = InferencePlan::new(&model);
    let mut conf = Confusion::default();
    let held_out: Vec<usize> = (0..20).map(|k| 61 + 12 * k).collect();
    for &t in &held_out {
        let raw = plan.predict_mask(&seq, t, window, 0.5).unwrap();
        let mask = refine(&raw, &scene.frames[t], &RefineParams::default()).unwrap();
        conf.accumulate(&mask, &scene.truth[t]);
    }
    let f = conf.f_measure();
    let secs = t.elapsed().as_secs_f64();
    outcome(
        f >= 0.90 && secs <= 300.0,
        format!(
            "F-measure {f:.4} on 20 held-out frames (limit 0.90), final loss {:.5}, {secs:.1}s (limit 300s)",
            curve.last().unwrap()
        ),
    )
}

fn refinement_sanity() -> Outcome {
    let scene = generate_scene(&SceneSpec::looping()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(61);
    let (mut isolated, mut removed, mut truth_fg, mut truth_lost) = (0usize, 0usize, 0usize, 0usize);
    for t in (20..300).step_by(28) {
        let truth = &scene.truth[t];
        let (w, h) = (truth.width(), truth.height());
        let mut salted = truth.clone();
        let salt = (w * h) / 50;
        let mut placed = Vec::new();
        while placed.len() < salt {
            let (x, y) = (rng.random_range(0..w), rng.random_range(0..h));
            if !salted.get(x, y) {
                salted.set(x, y, true);
                placed.push((x, y));
            }
        }
        let lonely: Vec<(usize, usize)> = placed
            .iter()
            .copied()
            .filter(|&(x, y)| {
                (y.saturating_sub(1)..=(y + 1).min(h - 1))
                    .flat_map(|ny| (x.saturating_sub(1)..=(x + 1).min(w - 1)).map(move |nx| (nx, ny)))
                    .all(|(nx, ny)| (nx, ny) == (x, y) || !salted.get(nx, ny))
            })
            .collect();
        let refined = refine(&salted, &scene.frames[t], &RefineParams::default()).unwrap();
        isolated += lonely.len();
        removed += lonely.iter().filter(|&&(x, y)| !refined.get(x, y)).count();
        for y in 0..h {
            for x in 0..w {
                if truth.get(x, y) {
                    truth_fg += 1;
                    truth_lost += usize::from(!refined.get(x, y));
                }
            }
        }
    }
    let removed_frac = removed as f64 / isolated as f64;
    let lost_frac = truth_lost as f64 / truth_fg as f64;
    outcome(
        removed_frac >= 0.90 && lost_frac < 0.02,
        format!(
            "removed {removed}/{isolated} isolated false positives ({:.1}%, limit 90%), flipped {truth_lost}/{truth_fg} true foreground ({:.2}%, limit 2%)",
            100.0 * removed_frac,
            100.0 * lost_frac
        ),
    )
}

struct Demo {
    _dir: tempfile::TempDir,
    root: PathBuf,
    cfg: PipelineConfig,
    first: E2eOutcome,
    second_out: PathBuf,
}

fn demo() -> &'static Demo {
    static DEMO: OnceLock<Demo> = OnceLock::new();
    DEMO.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().to_path_buf();
        write_demo(&root, 300, 50, 0).unwrap();
        let cfg = PipelineConfig::load(root.join("pipeline.conf")).unwrap();
        let first = cmd_e2e(&cfg).unwrap();
        let mut other = cfg.clone();
        other.set("paths.output", "out_again").unwrap();
        cmd_e2e(&other).unwrap();
        Demo {
            second_out: other.output_dir(),
            _dir: dir,
            root,
            cfg,
            first,
        }
    })
}

fn trimming() -> Outcome {
    let scene = generate_scene(&SceneSpec::burst(300)).unwrap();
    let map = select_frames(&scene.truth, &TrimConfig::default());
    let kept: Vec<usize> = map.kept_indices().collect();
    let brute: Vec<usize> = (0..300).filter(|&t| foreground_ratio(&scene.truth[t]) >= 0.05).collect();
    let moving: Vec<usize> = (100..200).collect();
    let round_trip = kept
        .iter()
        .enumerate()
        .all(|(k, &t)| map_to_original(&map, k).unwrap() == t)
        && TrimSegmentMap::parse(&map.to_text()).unwrap() == map;

    let dir = tempfile::tempdir().unwrap();
    write_sequence(&scene.frames, dir.path().join("frames")).unwrap();
    let seq = load_sequence(dir.path().join("frames")).unwrap();
    let trimmed = emit_trimmed(&seq, &map, dir.path().join("trimmed")).unwrap();
    let copies = trimmed.frame_count() == kept.len()
        && kept
            .iter()
            .enumerate()
            .all(|(k, &t)| fs::read(&trimmed.files()[k]).unwrap() == fs::read(&seq.files()[t]).unwrap());

    // The same check on the masks the pipeline inferred for the demo scene.
    let d = demo();
    let masks_dir = d.cfg.output_dir().join(MASKS_DIR);
    let pipeline_map = TrimSegmentMap::read(d.cfg.output_dir().join(TRIMMED_DIR).join(MAP_FILE_NAME)).unwrap();
    let pipeline_brute: Vec<usize> = (0..300)
        .filter(|&t| {
            let p = masks_dir.join(format!("{t:06}.pgm"));
            p.exists() && foreground_ratio(&surveil_core::frame_io::read_mask(&p).unwrap()) >= 0.05
        })
        .collect();
    let pipeline_ok = pipeline_map.kept_indices().collect::<Vec<_>>() == pipeline_brute;

    outcome(
        kept == brute && kept == moving && round_trip && copies && pipeline_ok,
        format!(
            "ground-truth masks keep {} frames {:?} (brute force {}), map round trip {round_trip}, copies exact {copies}, inferred masks keep {} = brute force {}",
            kept.len(),
            map.runs(),
            brute.len(),
            pipeline_map.total_kept(),
            pipeline_ok
        ),
    )
}

fn proportionality() -> Outcome {
    let d = demo();
    let full = load_sequence(d.root.join("frames")).unwrap();
    let trimmed = load_sequence(d.cfg.output_dir().join(TRIMMED_DIR)).unwrap();
    let weights = MilWeights::load(d.cfg.output_dir().join(MIL_DIR).join(WEIGHTS_FILE)).unwrap();
    let scratch = tempfile::tempdir().unwrap();
    let (mut t_full, mut t_trim) = (f64::INFINITY, f64::INFINITY);
    for _ in 0..15 {
        t_full = t_full.min(timed_score(32, &full, &weights, None, scratch.path()).unwrap().1);
        t_trim = t_trim.min(timed_score(32, &trimmed, &weights, None, scratch.path()).unwrap().1);
    }
    let frame_ratio = trimmed.frame_count() as f64 / full.frame_count() as f64;
    let limit = 1.25 * frame_ratio * t_full;
    outcome(
        t_trim <= limit,
        format!(
            "trimmed {:.2} ms vs full {:.2} ms (time ratio {:.3}), frame ratio {}/{} = {frame_ratio:.3}, limit {:.2} ms",
            1e3 * t_trim,
            1e3 * t_full,
            t_trim / t_full,
            trimmed.frame_count(),
            full.frame_count(),
            1e3 * limit
        ),
    )
}

fn graph_structure() -> Outcome {
    let s = &demo().first.summary;
    outcome(
        s.correlation >= 0.8,
        format!(
            "Spearman {:.4} between full ({} frames) and trimmed ({} frames) graphs (limit 0.8)",
            s.correlation, s.full_frames, s.trimmed_frames
        ),
    )
}

fn mil_separability() -> Outcome {
    let t = Instant::now();
    let bags = gaussian_bags(20, 20, 32, 20, 4, 3.0, 71);
    let (weights, history) = train_mil(&bags, &MilParams::default()).unwrap();
    let held = gaussian_bags(20, 20, 32, 20, 4, 3.0, 72);
    let max_score = |i: usize| score_forward(&held[i].features, &weights).unwrap().max();
    let wins = (0..20).filter(|&i| max_score(i) > max_score(20 + i)).count();
    let (h0, h1) = (history.hinge[0], *history.hinge.last().unwrap());
    let drop = (h0 - h1) / h0;
    let secs = t.elapsed().as_secs_f64();
    outcome(
        wins >= 19 && drop >= 0.8 && secs <= 120.0,
        format!(
            "{wins}/20 held-out pairs ranked correctly (limit 95%), hinge {h0:.4} -> {h1:.4} ({:.1}% drop, limit 80%), {secs:.1}s (limit 120s)",
            100.0 * drop
        ),
    )
}

fn report_rows() -> Outcome {
    let row = |frames, fps, bytes, secs| StageReport {
        stage: "score".into(),
        input: SequenceStats::new(frames, fps, bytes, secs),
        output: None,
        wall_seconds: secs,
    };
    let video1 = cmd_report(&[row(11937, 30.0, 90_500_000, 789.0), row(7470, 30.0, 68_500_000, 540.0)]);
    let video2 = cmd_report(&[row(8990, 30.05, 40_600_000, 610.0), row(1950, 30.05, 10_200_000, 137.0)]);
    let v1: Vec<&str> = video1.lines().skip(1).collect();
    let v2: Vec<&str> = video2.lines().skip(1).collect();
    let v1_ok = v1 == ["06:37 | 90.5 | 11937 | 789", "04:09 | 68.5 | 7470 | 540"];
    let v2_ok = v2 == ["04:59 | 40.6 | 8990 | 610", "01:04 | 10.2 | 1950 | 137"];
    outcome(
        v1_ok && v2_ok,
        format!(
            "Video 1 rows {v1:?} exact: {v1_ok}; Video 2 rows {v2:?} (the reference trimmed row of video 2 reads 1:04, unpadded)"
        ),
    )
}

fn files_under(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            let name = path.file_name().unwrap().to_string_lossy().to_string();
            if path.is_dir() {
                stack.push(path);
            } else if !TIMING_FILES.contains(&name.as_str()) && name != ".lock" {
                out.insert(path.strip_prefix(root).unwrap().to_path_buf(), fs::read(&path).unwrap());
            }
        }
    }
    out
}

fn determinism() -> Outcome {
    let d = demo();
    let a = files_under(&d.cfg.output_dir());
    let b = files_under(&d.second_out);
    let differing: Vec<String> = a
        .keys()
        .chain(b.keys())
        .filter(|k| a.get(*k) != b.get(*k))
        .map(|k| k.display().to_string())
        .collect();
    outcome(
        differing.is_empty() && !a.is_empty(),
        format!(
            "{} non-timing files compared across two runs, {} differ{}",
            a.len(),
            differing.len(),
            if differing.is_empty() { String::new() } else { format!(": {differing:?}") }
        ),
    )
}

fn main() {
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let criteria: [(&str, fn() -> Outcome); 12] = [
        ("gradient correctness", gradients),
        ("mass conservation", mass_conservation),
        ("oracle equivalence", oracle_equivalence),
        ("adjoint property", adjoints),
        ("synthetic background subtraction", background_subtraction),
        ("refinement sanity", refinement_sanity),
        ("trimming correctness", trimming),
        ("trimmed scoring time proportionality", proportionality),
        ("graph structure preservation", graph_structure),
        ("MIL separability", mil_separability),
        ("report fidelity", report_rows),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        if !filters.is_empty() && !filters.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let o = run();
        failed += usize::from(!o.pass);
        println!("criterion {:>2} {} {name}: {}", i + 1, if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
