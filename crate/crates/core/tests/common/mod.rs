//! Reference implementations shared by the integration tests and the
//! acceptance harness. Everything here is written from the definitions with
//! plain loops and shares no code with the library's fast paths.

#![allow(dead_code)]

pub mod grad;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thermopose::evalkit::{ap_at, average_precision, oks, ApInterpolation, DetInstance, FrameInstances, GtInstance, OksConstants};
use thermopose::keypoints::{CoordFrame, Keypoint, KeypointSet, NUM_KEYPOINTS};
use thermopose::numerics::{Graph, Tensor, Var};

pub fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

/// Dense convolution; kernel c_out×c_in×k×k. Returns (output, h_out, w_out).
#[allow(clippy::too_many_arguments)]
pub fn naive_conv2d(
    x: &[f64],
    (c_in, h, w): (usize, usize, usize),
    kern: &[f64],
    c_out: usize,
    k: usize,
    stride: usize,
    pad: usize,
    bias: Option<&[f64]>,
) -> (Vec<f64>, usize, usize) {
    let ho = (h + 2 * pad - k) / stride + 1;
    let wo = (w + 2 * pad - k) / stride + 1;
    let mut out = vec![0.0; c_out * ho * wo];
    for co in 0..c_out {
        for oy in 0..ho {
            for ox in 0..wo {
                let mut acc = bias.map_or(0.0, |b| b[co]);
                for ci in 0..c_in {
                    for ky in 0..k {
                        for kx in 0..k {
                            let iy = (oy * stride + ky) as isize - pad as isize;
                            let ix = (ox * stride + kx) as isize - pad as isize;
                            if iy >= 0 && ix >= 0 && (iy as usize) < h && (ix as usize) < w {
                                acc += kern[((co * c_in + ci) * k + ky) * k + kx] * x[(ci * h + iy as usize) * w + ix as usize];
                            }
                        }
                    }
                }
                out[(co * ho + oy) * wo + ox] = acc;
            }
        }
    }
    (out, ho, wo)
}

/// Depthwise convolution; kernel c×1×k×k.
pub fn naive_depthwise(
    x: &[f64],
    (c, h, w): (usize, usize, usize),
    kern: &[f64],
    k: usize,
    stride: usize,
    pad: usize,
    bias: Option<&[f64]>,
) -> (Vec<f64>, usize, usize) {
    let ho = (h + 2 * pad - k) / stride + 1;
    let wo = (w + 2 * pad - k) / stride + 1;
    let mut out = vec![0.0; c * ho * wo];
    for ch in 0..c {
        for oy in 0..ho {
            for ox in 0..wo {
                let mut acc = bias.map_or(0.0, |b| b[ch]);
                for ky in 0..k {
                    for kx in 0..k {
                        let iy = (oy * stride + ky) as isize - pad as isize;
                        let ix = (ox * stride + kx) as isize - pad as isize;
                        if iy >= 0 && ix >= 0 && (iy as usize) < h && (ix as usize) < w {
                            acc += kern[(ch * k + ky) * k + kx] * x[(ch * h + iy as usize) * w + ix as usize];
                        }
                    }
                }
                out[(ch * ho + oy) * wo + ox] = acc;
            }
        }
    }
    (out, ho, wo)
}

/// Transposed convolution as a scatter: every input pixel stamps its
/// kernel onto the output. Kernel c_in×c_out×k×k.
#[allow(clippy::too_many_arguments)]
pub fn naive_conv_transpose(
    x: &[f64],
    (c_in, h, w): (usize, usize, usize),
    kern: &[f64],
    c_out: usize,
    k: usize,
    stride: usize,
    pad: usize,
    bias: Option<&[f64]>,
) -> (Vec<f64>, usize, usize) {
    let ho = (h - 1) * stride + k - 2 * pad;
    let wo = (w - 1) * stride + k - 2 * pad;
    let mut out = vec![0.0; c_out * ho * wo];
    for co in 0..c_out {
        let b = bias.map_or(0.0, |b| b[co]);
        out[co * ho * wo..(co + 1) * ho * wo].iter_mut().for_each(|v| *v = b);
    }
    for ci in 0..c_in {
        for iy in 0..h {
            for ix in 0..w {
                let xv = x[(ci * h + iy) * w + ix];
                for co in 0..c_out {
                    for ky in 0..k {
                        for kx in 0..k {
                            let oy = (iy * stride + ky) as isize - pad as isize;
                            let ox = (ix * stride + kx) as isize - pad as isize;
                            if oy >= 0 && ox >= 0 && (oy as usize) < ho && (ox as usize) < wo {
                                out[(co * ho + oy as usize) * wo + ox as usize] += xv * kern[((ci * c_out + co) * k + ky) * k + kx];
                            }
                        }
                    }
                }
            }
        }
    }
    (out, ho, wo)
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Builds a scalar from leaf tensors; the closure receives one `Var` per leaf.
pub type Build<'a> = dyn Fn(&mut Graph, &[Var]) -> Var + 'a;

/// Worst normwise relative error, `‖a − n‖∞ / max(‖a‖∞, ‖n‖∞)` per leaf,
/// between analytic gradients and central differences with step `h`.
pub fn gradcheck(leaves: &[Tensor], build: &Build, h: f64) -> f64 {
    let mut g = Graph::new();
    let vars: Vec<Var> = leaves.iter().map(|t| g.tracked(t.clone())).collect();
    let out = build(&mut g, &vars);
    let grads = g.grads(out).unwrap();
    let eval = |perturbed: &[Tensor]| {
        let mut g = Graph::new();
        let vars: Vec<Var> = perturbed.iter().map(|t| g.input(t.clone())).collect();
        let out = build(&mut g, &vars);
        g.value(out).item()
    };
    let mut worst: f64 = 0.0;
    for (li, leaf) in leaves.iter().enumerate() {
        let analytic = grads.get(vars[li]).map(|s| s.to_vec()).unwrap_or_else(|| vec![0.0; leaf.len()]);
        let numeric: Vec<f64> = (0..leaf.len())
            .map(|i| {
                let mut plus = leaves.to_vec();
                plus[li].data_mut()[i] += h;
                let mut minus = leaves.to_vec();
                minus[li].data_mut()[i] -= h;
                (eval(&plus) - eval(&minus)) / (2.0 * h)
            })
            .collect();
        let norm = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        worst = worst.max(max_abs_diff(&analytic, &numeric) / norm(&analytic).max(norm(&numeric)).max(1e-8));
    }
    worst
}

/// Random weighted sum so every output element carries an independent weight.
pub fn project(g: &mut Graph, v: Var, weights: &[f64]) -> Var {
    let prod = g.map_with(v, weights, |x, w| (x * w, w)).unwrap();
    g.sum(prod)
}

/// OKS straight from its definition, with the gt scale given explicitly.
pub fn oks_reference(det: &[[f64; 2]; NUM_KEYPOINTS], gt: &[[f64; 3]; NUM_KEYPOINTS], scale_sq: f64, k: &[f64; NUM_KEYPOINTS]) -> Option<f64> {
    let visible: Vec<usize> = (0..NUM_KEYPOINTS).filter(|&i| gt[i][2] > 0.0).collect();
    if visible.is_empty() {
        return None;
    }
    let mut total = 0.0;
    for &i in &visible {
        let dx = det[i][0] - gt[i][0];
        let dy = det[i][1] - gt[i][1];
        total += (-(dx * dx + dy * dy) / (2.0 * scale_sq * k[i] * k[i])).exp();
    }
    Some(total / visible.len() as f64)
}

/// Average precision at one threshold from first principles: greedy
/// matching per frame in descending score order, a global ranking, and the
/// area under the best precision achievable at or beyond each recall level.
/// Ties rank by the OKS a detection holds (its claim, else its best), then
/// frame, then index.
pub fn ap_reference(frames: &[(Vec<f64>, Vec<Vec<f64>>, usize)], threshold: f64) -> f64 {
    let total_gt: usize = frames.iter().map(|f| f.2).sum();
    let mut ranked: Vec<(f64, f64, usize, usize, bool)> = Vec::new();
    for (fi, (scores, oks, n_gt)) in frames.iter().enumerate() {
        let best = |d: usize| oks[d].iter().fold(0.0f64, |a, &b| a.max(b));
        let mut idx: Vec<usize> = (0..scores.len()).collect();
        idx.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap().then(best(b).partial_cmp(&best(a)).unwrap()).then(a.cmp(&b)));
        let mut taken = vec![false; *n_gt];
        for d in idx {
            let mut choice: Option<usize> = None;
            for g in 0..*n_gt {
                if !taken[g] && oks[d][g] >= threshold && choice.is_none_or(|c| oks[d][g] > oks[d][c]) {
                    choice = Some(g);
                }
            }
            match choice {
                Some(g) => {
                    taken[g] = true;
                    ranked.push((scores[d], oks[d][g], fi, d, true));
                }
                None => ranked.push((scores[d], best(d), fi, d, false)),
            }
        }
    }
    ranked.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(b.1.partial_cmp(&a.1).unwrap()).then(a.2.cmp(&b.2)).then(a.3.cmp(&b.3)));
    let pr: Vec<(f64, usize)> = (1..=ranked.len())
        .map(|n| {
            let tp = ranked[..n].iter().filter(|r| r.4).count();
            (tp as f64 / n as f64, tp)
        })
        .collect();
    let mut area = 0.0;
    for level in 1..=total_gt {
        let p = pr.iter().filter(|(_, tp)| *tp >= level).map(|(p, _)| *p).fold(0.0, f64::max);
        area += p / total_gt as f64;
    }
    area
}

/// Frames holding the given OKS matrices and scores, for the library side.
pub fn frames_from(frames: &[(Vec<f64>, Vec<Vec<f64>>, usize)]) -> Vec<FrameInstances> {
    frames
        .iter()
        .enumerate()
        .map(|(i, (scores, oks, n_gt))| FrameInstances {
            frame_id: i as u64,
            dets: scores
                .iter()
                .map(|&s| DetInstance { keypoints: KeypointSet::invisible(CoordFrame::Thermal), score: s })
                .collect(),
            n_gt: *n_gt,
            oks: oks.clone(),
        })
        .collect()
}

/// Random small result set: up to 5 frames, 0–2 detections and 1–2 gts each.
/// Scores and OKS come from a coarse grid so ties are common.
pub fn random_result_set(rng: &mut ChaCha8Rng) -> Vec<(Vec<f64>, Vec<Vec<f64>>, usize)> {
    let n_frames = rng.random_range(1..=5);
    (0..n_frames)
        .map(|_| {
            let n_det = rng.random_range(0..=2);
            let n_gt = rng.random_range(1..=2);
            let scores = (0..n_det).map(|_| rng.random_range(0..5) as f64 / 4.0).collect();
            let oks = (0..n_det).map(|_| (0..n_gt).map(|_| rng.random_range(0..=20) as f64 / 20.0).collect()).collect();
            (scores, oks, n_gt)
        })
        .collect()
}

pub fn oks_consts() -> OksConstants {
    OksConstants::default()
}

pub fn gt_instance(points: &[[f64; 3]; NUM_KEYPOINTS]) -> Option<GtInstance> {
    let kps = KeypointSet::new(CoordFrame::Thermal, points.map(|p| Keypoint::new(p[0], p[1], p[2] as u8)));
    GtInstance::from_keypoints(kps)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConvKindRef {
    Dense,
    Depthwise,
    Transposed,
}

/// Worst deviation from the nested-loop references over `n` random shapes
/// with channels ≤ 8 and spatial extent ≤ 16, for one convolution kind.
pub fn conv_oracle_worst(kind: ConvKindRef, n: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    let mut done = 0;
    while done < n {
        let (ci, co, h, w) = (rng.random_range(1..=8), rng.random_range(1..=8), rng.random_range(1..=16), rng.random_range(1..=16));
        let (k, s, p) = (rng.random_range(1..=4), rng.random_range(1..=3), rng.random_range(0..=2));
        if p >= k || k > h + 2 * p || k > w + 2 * p {
            continue;
        }
        if kind == ConvKindRef::Transposed && ((h - 1) * s + k <= 2 * p || (w - 1) * s + k <= 2 * p) {
            continue;
        }
        let x = random_vec(&mut rng, ci * h * w);
        let b = random_vec(&mut rng, if kind == ConvKindRef::Depthwise { ci } else { co });
        let mut g = Graph::new();
        let xv = g.input(Tensor::new(&[ci, h, w], x.clone()).unwrap());
        let bv = g.input(Tensor::new(&[b.len()], b.clone()).unwrap());
        let (want, got) = match kind {
            ConvKindRef::Dense => {
                let kern = random_vec(&mut rng, co * ci * k * k);
                let kv = g.input(Tensor::new(&[co, ci, k, k], kern.clone()).unwrap());
                let y = g.conv2d(xv, kv, Some(bv), s, p).unwrap();
                (naive_conv2d(&x, (ci, h, w), &kern, co, k, s, p, Some(&b)).0, y)
            }
            ConvKindRef::Depthwise => {
                let kern = random_vec(&mut rng, ci * k * k);
                let kv = g.input(Tensor::new(&[ci, 1, k, k], kern.clone()).unwrap());
                let y = g.depthwise_conv2d(xv, kv, Some(bv), s, p).unwrap();
                (naive_depthwise(&x, (ci, h, w), &kern, k, s, p, Some(&b)).0, y)
            }
            ConvKindRef::Transposed => {
                let kern = random_vec(&mut rng, ci * co * k * k);
                let kv = g.input(Tensor::new(&[ci, co, k, k], kern.clone()).unwrap());
                let y = g.conv_transpose2d(xv, kv, Some(bv), s, p).unwrap();
                (naive_conv_transpose(&x, (ci, h, w), &kern, co, k, s, p, Some(&b)).0, y)
            }
        };
        worst = worst.max(max_abs_diff(g.value(got).data(), &want));
        done += 1;
    }
    worst
}

/// Random pose in thermal pixels with ~80% of keypoints visible (at least
/// one), and a detection jittered by up to 6 px.
pub fn random_pose(rng: &mut ChaCha8Rng) -> ([[f64; 3]; NUM_KEYPOINTS], [[f64; 2]; NUM_KEYPOINTS]) {
    let mut gt = [[0.0; 3]; NUM_KEYPOINTS];
    let mut det = [[0.0; 2]; NUM_KEYPOINTS];
    for i in 0..NUM_KEYPOINTS {
        gt[i] = [rng.random_range(0.0..80.0), rng.random_range(0.0..60.0), if rng.random_bool(0.8) { 2.0 } else { 0.0 }];
        det[i] = [gt[i][0] + rng.random_range(-6.0..6.0), gt[i][1] + rng.random_range(-6.0..6.0)];
    }
    gt[0][2] = 2.0;
    (gt, det)
}

/// Number of random instances where the library OKS differs from the
/// reference in any bit.
pub fn oks_mismatches(n: usize, seed: u64) -> usize {
    let consts = oks_consts();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .filter(|_| {
            let (gt, det) = random_pose(&mut rng);
            let gti = gt_instance(&gt).unwrap();
            let d = DetInstance { keypoints: KeypointSet::new(CoordFrame::Thermal, det.map(|p| Keypoint::new(p[0], p[1], 2))), score: 1.0 };
            oks(&d, &gti, &consts).ok() != oks_reference(&det, &gt, gti.scale_sq, &consts.k)
        })
        .count()
}

/// Largest gap between library and reference AP over `n` random result
/// sets, across all ten thresholds and the averaged AP.
pub fn ap_worst(n: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..n {
        let set = random_result_set(&mut rng);
        let frames = frames_from(&set);
        let res = average_precision(&frames, ApInterpolation::AllPoint).unwrap();
        let mut sum = 0.0;
        for i in 0..10 {
            let t = (50 + 5 * i) as f64 / 100.0;
            let want = ap_reference(&set, t);
            sum += want;
            worst = worst.max((ap_at(&frames, t, ApInterpolation::AllPoint).unwrap() - want).abs());
        }
        worst = worst.max((res.ap - sum / 10.0).abs());
    }
    worst
}

/// Scores {0.9, 0.8, 0.7} on three single-person frames with OKS
/// {0.9, 0.6, 0.4}; returns (AP50, AP75, AP).
pub fn worked_example() -> (f64, f64, f64) {
    let set = vec![(vec![0.9], vec![vec![0.9]], 1), (vec![0.8], vec![vec![0.6]], 1), (vec![0.7], vec![vec![0.4]], 1)];
    let r = average_precision(&frames_from(&set), ApInterpolation::AllPoint).unwrap();
    (r.ap50, r.ap75, r.ap)
}
