//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Pass criterion numbers as arguments to run a subset, e.g.
//! `cargo test --test acceptance -- 4 5 10`.

mod common;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::Instant;

use common::grad;
use common::{conv_oracle_worst, oks_mismatches, ap_worst, worked_example, ConvKindRef};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thermopose::cli::{
    cmd_beta_sweep, cmd_evaluate, cmd_gen_data, default_betas, train_teacher_on, FoldSelection, RunConfig, Source, SweepRow,
};
use thermopose::evalkit::{loso_folds, MeanStd};
use thermopose::heatmap::{decode, encode, DEFAULT_SIGMA, HM_H, HM_W};
use thermopose::keypoints::{CoordFrame, Keypoint, KeypointSet, NUM_KEYPOINTS};
use thermopose::losses::{composite, composite_value, AWingParams, CompositeWeights};
use thermopose::numerics::{Graph, Tensor};
use thermopose::posemodel::{build_decoder, build_student, load_checkpoint, EncoderConfig, PoseModel};
use thermopose::synthtug::read_dataset;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond { Ok(()) } else { Err(msg.into()) }
}

fn within_budget(label: &str, t: Instant, limit_s: f64) -> Result<f64, String> {
    let s = t.elapsed().as_secs_f64();
    ensure(s < limit_s, format!("{label} took {s:.1} s, budget {limit_s} s"))?;
    Ok(s)
}

fn c1_gradients() -> Outcome {
    let t = Instant::now();
    let mut worst: f64 = 0.0;
    for (name, _) in grad::CASES {
        let w = grad::worst(name);
        ensure(w <= grad::TOL, format!("{name}: relative error {w:e} > {:e}", grad::TOL))?;
        worst = worst.max(w);
    }
    let s = within_budget("gradient checks", t, 60.0)?;
    Ok(format!("{} ops × {} instances, worst rel err {worst:.1e}, {s:.1} s", grad::CASES.len(), grad::INSTANCES))
}

fn c2_conv_oracles() -> Outcome {
    let t = Instant::now();
    let mut parts = Vec::new();
    for (i, kind) in [ConvKindRef::Dense, ConvKindRef::Depthwise, ConvKindRef::Transposed].into_iter().enumerate() {
        let w = conv_oracle_worst(kind, 200, 100 + i as u64);
        ensure(w <= 1e-12, format!("{kind:?} deviates by {w:e}"))?;
        parts.push(format!("{kind:?} {w:.1e}"));
    }
    let s = within_budget("convolution oracles", t, 30.0)?;
    Ok(format!("200 shapes each, max |Δ| {}, {s:.1} s", parts.join(", ")))
}

fn c3_metric_oracles() -> Outcome {
    let t = Instant::now();
    let bad = oks_mismatches(1000, 21);
    ensure(bad == 0, format!("{bad} OKS instances differ from the definition"))?;
    let w = ap_worst(1000, 22);
    ensure(w <= 1e-12, format!("AP deviates from brute force by {w:e}"))?;
    let (ap50, ap75, ap) = worked_example();
    ensure(
        (ap50 - 2.0 / 3.0).abs() <= 1e-12 && (ap75 - 1.0 / 3.0).abs() <= 1e-12 && (ap - 0.4).abs() <= 1e-12,
        format!("worked example gave AP50 {ap50}, AP75 {ap75}, AP {ap}"),
    )?;
    let s = within_budget("metric oracles", t, 30.0)?;
    Ok(format!("1000 OKS bitwise, 1000 AP sets max |Δ| {w:.1e}, worked example ok, {s:.1} s"))
}

/// Log branch `ω ln(1 + (Δ/ε)^(α−y))` evaluated straight from the definition.
fn awing_log(p: &AWingParams, delta: f64, y: f64) -> f64 {
    p.omega * (1.0 + (delta / p.epsilon).powf(p.alpha - y)).ln()
}

fn c4_loss_algebra() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let (ll, lh) = (rng.random_range(0.0..5.0), rng.random_range(0.0..5.0));
        let at = |beta: f64| {
            let mut g = Graph::new();
            let a = g.input(Tensor::scalar(ll));
            let b = g.input(Tensor::scalar(lh));
            let w = CompositeWeights::new(beta).unwrap();
            let v = composite(&mut g, a, b, w).unwrap();
            (g.value(v).item(), composite_value(ll, lh, w).unwrap())
        };
        let (c0, c1) = (at(0.0).0, at(1.0).0);
        for i in 0..=10 {
            let beta = i as f64 / 10.0;
            let (graph, scalar) = at(beta);
            let line = (1.0 - beta) * c0 + beta * c1;
            worst = worst.max((graph - line).abs()).max((scalar - line).abs());
        }
    }
    ensure(worst <= 1e-12, format!("composite departs from the endpoint line by {worst:e}"))?;
    let p = AWingParams::default();
    let mut gap: f64 = 0.0;
    for y in [0.0, 0.25, 0.5, 0.75, 1.0] {
        for sign in [1.0, -1.0] {
            let linear = p.value_and_grad(y + sign * p.theta, y).0;
            gap = gap.max((linear - awing_log(&p, p.theta, y)).abs());
        }
        let zero = p.value_and_grad(y, y).0;
        ensure(zero == 0.0, format!("AWing(y, y) = {zero} at y = {y}"))?;
    }
    ensure(gap <= 1e-9, format!("AWing branches meet with gap {gap:e}"))?;
    Ok(format!("affine to {worst:.1e} over 200 pairs × 11 β; branch gap {gap:.1e}; AWing(y, y) = 0"))
}

fn c5_heatmap_codec() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let margin = 3.0 * DEFAULT_SIGMA * 4.0;
    let (xmax, ymax) = (4.0 * (HM_W - 1) as f64 - margin, 4.0 * (HM_H - 1) as f64 - margin);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 / NUM_KEYPOINTS + 1 {
        let pts: [Keypoint; NUM_KEYPOINTS] =
            std::array::from_fn(|_| Keypoint::new(rng.random_range(margin..=xmax), rng.random_range(margin..=ymax), 2));
        let kps = KeypointSet::new(CoordFrame::Crop, pts);
        let d = decode(&encode(&kps, DEFAULT_SIGMA));
        for (p, q) in kps.points.iter().zip(&d.points) {
            worst = worst.max(((p.x - q.x).powi(2) + (p.y - q.y).powi(2)).sqrt());
        }
    }
    ensure(worst <= 2.0, format!("round trip error {worst:.3} px > 2 px"))?;
    let (u, v) = (20, 30);
    let mut pts = [Keypoint::new(0.0, 0.0, 0); NUM_KEYPOINTS];
    pts[3] = Keypoint::new(4.0 * u as f64, 4.0 * v as f64, 2);
    let hm = encode(&KeypointSet::new(CoordFrame::Crop, pts), 2.0);
    ensure(hm.at(3, u, v) == 1.0, format!("peak {} ≠ 1", hm.at(3, u, v)))?;
    let want = (-1.0f64 / 8.0).exp();
    for (du, dv) in [(1, 0), (0, 1)] {
        let n = hm.at(3, u + du, v + dv);
        ensure((n - want).abs() <= 1e-12, format!("neighbor {n} ≠ exp(-1/8)"))?;
    }
    Ok(format!("{} keypoints, worst round trip {worst:.3} px; peak 1, neighbor exp(-1/8)", (1000 / NUM_KEYPOINTS + 1) * NUM_KEYPOINTS))
}

fn c6_shapes_and_config(freeze: Option<&FreezeCheck>) -> Outcome {
    let cfg = RunConfig::default();
    let student = PoseModel::new(cfg.student_model(), 6).map_err(|e| e.to_string())?;
    ensure(student.input_shape() == [1, 256, 192], format!("input shape {:?}", student.input_shape()))?;
    let out = student.infer(&vec![0.1; 256 * 192]).map_err(|e| e.to_string())?;
    ensure(student.heatmap_shape() == [17, 64, 48] && out.heatmap.len() == 17 * 64 * 48, format!("heatmap shape {:?}", student.heatmap_shape()))?;
    ensure(out.latent.len() == 32 * 16 * 12, format!("latent has {} values", out.latent.len()))?;
    let base = EncoderConfig::default();
    let mut bad_stride = base.clone();
    bad_stride.bottleneck_specs[3].2 = 1;
    let mut bad_stem = base.clone();
    bad_stem.stem_stride = 4;
    let mut seven = base.clone();
    seven.bottleneck_specs.pop();
    let mut nine = base.clone();
    nine.bottleneck_specs.push((64, 32, 1));
    for (what, c) in [("stride plan 8", &bad_stride), ("stride plan 32", &bad_stem), ("7 bottlenecks", &seven), ("9 bottlenecks", &nine)] {
        ensure(c.validate().is_err(), format!("{what} was accepted"))?;
    }
    base.validate().map_err(|e| e.to_string())?;
    let Some(f) = freeze else {
        return Err("freeze contract needs the distillation run of criterion 8".into());
    };
    ensure(f.teacher_bytes_before == f.teacher_bytes_after, "teacher checkpoint changed during distillation")?;
    ensure(f.student_decoder == f.teacher_decoder, "student decoder differs from the teacher decoder")?;
    Ok("1×256×192 → 17×64×48, latent 32×16×12; bad stride plans and bottleneck counts rejected; teacher and decoder bytes unchanged".into())
}

/// One hand-written layer row: kind, c_in, c_out, k, input h×w, output
/// h×w, relu.
#[derive(Clone, Copy)]
enum K {
    Dense,
    Dw,
    Up,
}

fn row_params(k: K, ci: u64, co: u64, ks: u64) -> u64 {
    match k {
        K::Dense | K::Up => ks * ks * ci * co + co,
        K::Dw => ks * ks * co + co,
    }
}

fn row_flops(k: K, ci: u64, co: u64, ks: u64, hin: (u64, u64), hout: (u64, u64), relu: bool) -> u64 {
    let macs = match k {
        K::Dense => ks * ks * ci * co * hout.0 * hout.1,
        K::Dw => ks * ks * co * hout.0 * hout.1,
        K::Up => ks * ks * ci * co * hin.0 * hin.1,
    };
    2 * macs + if relu { co * hout.0 * hout.1 } else { 0 }
}

fn c10_counters() -> Outcome {
    use K::*;
    #[rustfmt::skip]
    let encoder: &[(K, u64, u64, u64, (u64, u64), (u64, u64), bool)] = &[
        (Dense, 1, 8, 3, (256, 192), (128, 96), true),
        (Dense, 8, 16, 1, (128, 96), (128, 96), true), (Dw, 16, 16, 3, (128, 96), (64, 48), true), (Dense, 16, 12, 1, (64, 48), (64, 48), false),
        (Dense, 12, 24, 1, (64, 48), (64, 48), true), (Dw, 24, 24, 3, (64, 48), (32, 24), true), (Dense, 24, 16, 1, (32, 24), (32, 24), false),
        (Dense, 16, 32, 1, (32, 24), (32, 24), true), (Dw, 32, 32, 3, (32, 24), (32, 24), true), (Dense, 32, 16, 1, (32, 24), (32, 24), false),
        (Dense, 16, 48, 1, (32, 24), (32, 24), true), (Dw, 48, 48, 3, (32, 24), (16, 12), true), (Dense, 48, 24, 1, (16, 12), (16, 12), false),
        (Dense, 24, 48, 1, (16, 12), (16, 12), true), (Dw, 48, 48, 3, (16, 12), (16, 12), true), (Dense, 48, 24, 1, (16, 12), (16, 12), false),
        (Dense, 24, 48, 1, (16, 12), (16, 12), true), (Dw, 48, 48, 3, (16, 12), (16, 12), true), (Dense, 48, 32, 1, (16, 12), (16, 12), false),
        (Dense, 32, 64, 1, (16, 12), (16, 12), true), (Dw, 64, 64, 3, (16, 12), (16, 12), true), (Dense, 64, 32, 1, (16, 12), (16, 12), false),
        (Dense, 32, 64, 1, (16, 12), (16, 12), true), (Dw, 64, 64, 3, (16, 12), (16, 12), true), (Dense, 64, 32, 1, (16, 12), (16, 12), false),
        (Dense, 32, 32, 1, (16, 12), (16, 12), false),
    ];
    // Identity shortcuts on b2, b4, b6, b7: one add per output element.
    let residual_adds = 16 * 32 * 24 + 24 * 16 * 12 + 32 * 16 * 12 + 32 * 16 * 12;
    #[rustfmt::skip]
    let decoder: &[(K, u64, u64, u64, (u64, u64), (u64, u64), bool)] = &[
        (Up, 32, 16, 4, (16, 12), (32, 24), true),
        (Up, 16, 16, 4, (32, 24), (64, 48), true),
        (Dense, 16, 17, 1, (64, 48), (64, 48), false),
    ];
    let sums = |rows: &[(K, u64, u64, u64, (u64, u64), (u64, u64), bool)]| {
        rows.iter().fold((0, 0), |(p, f), &(k, ci, co, ks, hi, ho, r)| (p + row_params(k, ci, co, ks), f + row_flops(k, ci, co, ks, hi, ho, r)))
    };
    let (enc_p, enc_f) = sums(encoder);
    let enc_f = enc_f + residual_adds;
    let (dec_p, dec_f) = sums(decoder);

    let cfg = RunConfig::default();
    let arch_e = build_student(&cfg.student).map_err(|e| e.to_string())?;
    let arch_d = build_decoder(&cfg.decoder).map_err(|e| e.to_string())?;
    let got_ef = arch_e.count_flops([1, 256, 192]).map_err(|e| e.to_string())?;
    let got_df = arch_d.count_flops([32, 16, 12]).map_err(|e| e.to_string())?;
    ensure(arch_e.count_params() == enc_p, format!("encoder params {} vs audit {enc_p}", arch_e.count_params()))?;
    ensure(got_ef == enc_f, format!("encoder FLOPs {got_ef} vs audit {enc_f}"))?;
    ensure(arch_d.count_params() == dec_p, format!("decoder params {} vs audit {dec_p}", arch_d.count_params()))?;
    ensure(got_df == dec_f, format!("decoder FLOPs {got_df} vs audit {dec_f}"))?;
    let student = PoseModel::new(cfg.student_model(), 1).map_err(|e| e.to_string())?;
    let teacher = PoseModel::new(cfg.teacher_model(), 1).map_err(|e| e.to_string())?;
    ensure(student.count_params() == enc_p + dec_p, "student+decoder params disagree with the parts")?;
    let sf = student.count_flops().map_err(|e| e.to_string())?;
    let tf = teacher.count_flops().map_err(|e| e.to_string())?;
    ensure(sf == enc_f + dec_f, "student+decoder FLOPs disagree with the parts")?;
    ensure(sf < tf, format!("student+decoder {sf} FLOPs not below teacher+decoder {tf}"))?;
    Ok(format!(
        "encoder {enc_p} params / {enc_f} FLOPs, decoder {dec_p} / {dec_f}; student+decoder {sf} < teacher+decoder {tf} FLOPs"
    ))
}

fn c9_loso(data: &Path, scratch: &Path) -> Outcome {
    let dataset = read_dataset(data).map_err(|e| e.to_string())?;
    let folds = loso_folds(&dataset.manifest).map_err(|e| e.to_string())?;
    let ids = dataset.manifest.subject_ids();
    ensure(folds.len() == ids.len(), format!("{} folds for {} subjects", folds.len(), ids.len()))?;
    let mut held: Vec<u32> = folds.iter().map(|f| f.held_out_subject).collect();
    held.sort_unstable();
    ensure(held == ids, "held-out subjects do not cover every subject once")?;
    for f in &folds {
        let mut all = f.train_subjects.clone();
        ensure(!all.contains(&f.held_out_subject), format!("fold {} trains on its held-out subject", f.held_out_subject))?;
        all.push(f.held_out_subject);
        all.sort_unstable();
        ensure(all == ids, format!("fold {} is not a partition", f.held_out_subject))?;
    }
    let cfg = RunConfig { dataset: data.to_path_buf(), out: scratch.join("loso_oracle"), ..RunConfig::default() };
    let report = cmd_evaluate(&cfg, &Source::Oracle, FoldSelection::All, false).map_err(|e| e.to_string())?;
    ensure(report.folds.len() == 10, format!("{} fold rows", report.folds.len()))?;
    let csv = fs::read_to_string(cfg.out.join("metrics.csv")).map_err(|e| e.to_string())?;
    for s in 0..10 {
        ensure(csv.lines().any(|l| l.starts_with(&format!("{s},AP,"))), format!("no AP row for fold {s}"))?;
    }
    ensure(csv.contains("\nmean,AP,") && csv.contains("\nstd,AP,"), "report lacks mean/std rows")?;
    let style = |s: &str| {
        let (m, sd) = s.split_once(" ± ").unwrap_or(("", ""));
        [m, sd].iter().all(|x| x.len() == 5 && x.as_bytes()[1] == b'.' && x.parse::<f64>().is_ok())
    };
    let ap = report.summary.formatted.iter().find(|(k, _)| k.as_str() == "AP").map(|(_, v)| v.clone()).unwrap_or_default();
    ensure(style(&ap), format!("summary {ap:?} is not in 0.000 ± 0.000 style"))?;
    let sample = MeanStd { mean: 0.8612, std: 0.0714 }.to_string();
    ensure(sample == "0.861 ± 0.071", format!("formatter gave {sample:?}"))?;
    Ok(format!("10 disjoint folds covering all subjects; report has 10 rows plus mean±std, AP {ap}"))
}

struct FreezeCheck {
    teacher_bytes_before: Vec<u8>,
    teacher_bytes_after: Vec<u8>,
    teacher_decoder: String,
    student_decoder: String,
}

struct Heavy {
    teacher_ap50: f64,
    teacher_epochs: usize,
    teacher_s: f64,
    sweep: Vec<SweepRow>,
    sweep_s: f64,
    freeze: FreezeCheck,
}

/// Trains the default teacher on the default dataset and runs the full β sweep.
fn heavy_runs(data: &Path, scratch: &Path) -> Result<Heavy, String> {
    let cfg = RunConfig { dataset: data.to_path_buf(), ..RunConfig::default() };
    let dataset = read_dataset(data).map_err(|e| e.to_string())?;
    let tdir = scratch.join("teacher");
    fs::create_dir_all(&tdir).map_err(|e| e.to_string())?;
    let t = Instant::now();
    let run = train_teacher_on(&cfg, &dataset, &tdir, None).map_err(|e| e.to_string())?;
    let teacher_s = t.elapsed().as_secs_f64();
    drop(dataset);
    let before = fs::read(&run.checkpoint).map_err(|e| e.to_string())?;
    let sweep_cfg = RunConfig { out: scratch.join("sweep"), ..cfg.clone() };
    let t = Instant::now();
    let sweep = cmd_beta_sweep(&sweep_cfg, &run.checkpoint, &default_betas(), false).map_err(|e| e.to_string())?;
    let sweep_s = t.elapsed().as_secs_f64();
    let after = fs::read(&run.checkpoint).map_err(|e| e.to_string())?;
    let student = load_checkpoint(&sweep_cfg.out.join("beta_0.40").join("student.tpck")).map_err(|e| e.to_string())?;
    Ok(Heavy {
        teacher_ap50: run.metrics.ap50,
        teacher_epochs: run.outcome.logs.len(),
        teacher_s,
        sweep,
        sweep_s,
        freeze: FreezeCheck {
            teacher_bytes_before: before,
            teacher_bytes_after: after,
            teacher_decoder: run.model.param_digest("decoder"),
            student_decoder: student.model.param_digest("decoder"),
        },
    })
}

fn ap_at_beta(rows: &[SweepRow], beta: f64) -> Result<&SweepRow, String> {
    rows.iter().find(|r| (r.beta - beta).abs() < 1e-9).ok_or_else(|| format!("no sweep row for β = {beta}"))
}

fn c7_learning(h: &Heavy) -> Outcome {
    ensure(h.teacher_epochs <= 200, format!("teacher ran {} epochs", h.teacher_epochs))?;
    ensure(h.teacher_s <= 900.0, format!("teacher took {:.0} s", h.teacher_s))?;
    ensure(h.teacher_ap50 >= 0.80, format!("teacher AP50 {:.3} < 0.80", h.teacher_ap50))?;
    let s = ap_at_beta(&h.sweep, 0.4)?;
    ensure(s.ap50 >= h.teacher_ap50 - 0.15, format!("student AP50 {:.3} trails teacher {:.3} by more than 0.15", s.ap50, h.teacher_ap50))?;
    Ok(format!(
        "teacher AP50 {:.3} after {} epochs in {:.0} s; student (β=0.4) AP50 {:.3}",
        h.teacher_ap50, h.teacher_epochs, h.teacher_s, s.ap50
    ))
}

fn c8_sweep(h: &Heavy) -> Outcome {
    ensure(h.sweep.len() == 11, format!("{} sweep points", h.sweep.len()))?;
    ensure(h.sweep_s <= 5400.0, format!("sweep took {:.0} s", h.sweep_s))?;
    let (a0, a1, a4) = (ap_at_beta(&h.sweep, 0.0)?.ap, ap_at_beta(&h.sweep, 0.1)?.ap, ap_at_beta(&h.sweep, 0.4)?.ap);
    let curve: Vec<String> = h.sweep.iter().map(|r| format!("{:.1}:{:.3}", r.beta, r.ap)).collect();
    let detail = format!("AP by β {}; {:.0} s", curve.join(" "), h.sweep_s);
    ensure(a4 >= a0, format!("AP(0.4) {a4:.3} < AP(0.0) {a0:.3}; {detail}"))?;
    ensure(a1 - a0 >= 0.0, format!("AP(0.1) {a1:.3} < AP(0.0) {a0:.3}; {detail}"))?;
    Ok(detail)
}

/// Every file under `dir` with its bytes, sorted by relative path.
fn snapshot(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

const TINY: &str = r#"{
  "synth": { "subjects": 3, "trials": 2, "motion": { "duration_s": 2.0, "fps": 4 } },
  "teacher_train": { "max_epochs": 2, "batch_size": 4, "frame_stride": 2 },
  "student_train": { "max_epochs": 2, "batch_size": 4, "frame_stride": 2 }
}"#;

fn c11_determinism(scratch: &Path) -> Outcome {
    let root = scratch.join("determinism");
    fs::create_dir_all(&root).map_err(|e| e.to_string())?;
    let config = root.join("tiny.json");
    fs::write(&config, TINY).map_err(|e| e.to_string())?;
    let p = |s: &str| root.join(s).to_str().unwrap().to_string();
    let c = config.to_str().unwrap().to_string();
    let runs: Vec<Vec<String>> = [
        vec!["gen-data"],
        vec!["train-teacher", "--data", &p("data")],
        vec!["distill", "--data", &p("data"), "--teacher", &(p("teacher") + "/teacher.tpck")],
        vec!["evaluate", "--data", &p("data"), "--checkpoint", &(p("student") + "/student.tpck")],
        vec!["beta-sweep", "--data", &p("data"), "--teacher", &(p("teacher") + "/teacher.tpck"), "--betas", "0,0.5"],
        vec!["loso", "--data", &p("data")],
        vec!["annotate", "--data", &p("data"), "--checkpoint", &(p("student") + "/student.tpck"), "--frame", "1:0:2"],
    ]
    .iter()
    .map(|v| v.iter().map(|s| s.to_string()).collect())
    .collect();
    let outs = ["data", "teacher", "student", "eval", "sweep", "loso", "annotate"];
    let mut first = Vec::new();
    for pass in 0..2 {
        for (args, out) in runs.iter().zip(outs) {
            let mut cmd = Command::new(env!("CARGO_BIN_EXE_thermopose"));
            cmd.args(["--seed", "11", "--config", &c, "--out", &p(out)]);
            if pass == 1 {
                cmd.arg("--force");
            }
            let o = cmd.args(args).output().map_err(|e| e.to_string())?;
            ensure(o.status.success(), format!("{} failed: {}", args[0], String::from_utf8_lossy(&o.stderr)))?;
            let snap = snapshot(&root.join(out));
            if pass == 0 {
                first.push(snap);
            } else {
                let prev = &first[outs.iter().position(|x| *x == out).unwrap()];
                ensure(prev.len() == snap.len(), format!("{} wrote a different file set", args[0]))?;
                for ((pa, a), (pb, b)) in prev.iter().zip(&snap) {
                    ensure(pa == pb && a == b, format!("{} output {} differs on rerun", args[0], pa.display()))?;
                }
            }
        }
    }
    let files: usize = first.iter().map(Vec::len).sum();
    Ok(format!("7 commands rerun with --force, {files} files bitwise identical"))
}

fn main() -> ExitCode {
    let wanted: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let want = |n: u32| wanted.is_empty() || wanted.contains(&n);
    let scratch = tempfile::tempdir().expect("temp dir");
    let mut failed = 0;
    let mut report = |n: u32, name: &str, r: Outcome| {
        match &r {
            Ok(d) => println!("[PASS] {n:>2} {name}: {d}"),
            Err(e) => {
                failed += 1;
                println!("[FAIL] {n:>2} {name}: {e}");
            }
        }
    };
    if want(1) {
        report(1, "gradient correctness", c1_gradients());
    }
    if want(2) {
        report(2, "convolution oracles", c2_conv_oracles());
    }
    if want(3) {
        report(3, "OKS/AP oracles", c3_metric_oracles());
    }
    if want(4) {
        report(4, "loss algebra", c4_loss_algebra());
    }
    if want(5) {
        report(5, "heatmap codec", c5_heatmap_codec());
    }
    if want(10) {
        report(10, "parameter and FLOP counters", c10_counters());
    }
    if want(11) {
        report(11, "determinism", c11_determinism(scratch.path()));
    }
    let needs_data = [6, 7, 8, 9].iter().any(|&n| want(n));
    if needs_data {
        let data = scratch.path().join("data");
        let gen = RunConfig { out: data.clone(), ..RunConfig::default() };
        match cmd_gen_data(&gen, false) {
            Err(e) => {
                for (n, name) in [(6, "shape and freeze contracts"), (7, "desk-scale learning"), (8, "β-sweep trend"), (9, "LOSO harness")] {
                    if want(n) {
                        report(n, name, Err(format!("default dataset generation failed: {e}")));
                    }
                }
            }
            Ok(_) => {
                if want(9) {
                    report(9, "LOSO harness", c9_loso(&data, scratch.path()));
                }
                let heavy = (want(6) || want(7) || want(8)).then(|| heavy_runs(&data, scratch.path()));
                match heavy {
                    Some(Ok(h)) => {
                        if want(6) {
                            report(6, "shape and freeze contracts", c6_shapes_and_config(Some(&h.freeze)));
                        }
                        if want(7) {
                            report(7, "desk-scale learning", c7_learning(&h));
                        }
                        if want(8) {
                            report(8, "β-sweep trend", c8_sweep(&h));
                        }
                    }
                    Some(Err(e)) => {
                        for (n, name) in [(6, "shape and freeze contracts"), (7, "desk-scale learning"), (8, "β-sweep trend")] {
                            if want(n) {
                                report(n, name, Err(format!("training failed: {e}")));
                            }
                        }
                    }
                    None => {}
                }
            }
        }
    }
    if failed == 0 {
        println!("acceptance: all selected criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failed} criteria failed");
        ExitCode::FAILURE
    }
}
