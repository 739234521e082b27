//! Finite-difference gradient cases, one per differentiable operation.

use super::{gradcheck, project, random_vec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thermopose::numerics::Tensor;
use thermopose::losses::{awing, composite, latent_l1, AWingParams, CompositeWeights};

pub const STEP: f64 = 1e-5;
pub const TOL: f64 = 1e-6;
pub const INSTANCES: usize = 100;

pub type Case = fn(&mut ChaCha8Rng) -> f64;

pub const CASES: &[(&str, Case)] = &[
    ("conv2d", conv2d),
    ("depthwise", depthwise),
    ("conv_transpose", conv_transpose),
    ("combine_add_sub", combine_add_sub),
    ("channel_affine", channel_affine),
    ("relu_abs_scale", relu_abs_scale),
    ("mean_sum", mean_sum),
    ("awing", awing_case),
    ("composite", composite_case),
];

/// Worst relative error of `case` over `INSTANCES` random instances.
pub fn worst(name: &str) -> f64 {
    let case = CASES.iter().find(|(n, _)| *n == name).expect("known case").1;
    let mut rng = ChaCha8Rng::seed_from_u64(name.bytes().fold(7919u64, |h, b| h.wrapping_mul(31).wrapping_add(b as u64)));
    (0..INSTANCES).map(|_| case(&mut rng)).fold(0.0, f64::max)
}

fn tensor(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape, random_vec(rng, n)).unwrap()
}

/// Uniform in ±1 but at least `gap` from zero.
fn away_from_zero(rng: &mut ChaCha8Rng, shape: &[usize], gap: f64) -> Tensor {
    let n: usize = shape.iter().product();
    let v = (0..n)
        .map(|_| {
            let m = rng.random_range(gap..1.0);
            if rng.random_bool(0.5) { m } else { -m }
        })
        .collect();
    Tensor::new(shape, v).unwrap()
}

fn conv2d(rng: &mut ChaCha8Rng) -> f64 {
    let (ci, co, h, w) = (rng.random_range(1..=3), rng.random_range(1..=3), rng.random_range(3..=6), rng.random_range(3..=6));
    let (k, s) = (rng.random_range(1..=3), rng.random_range(1..=2));
    let p = rng.random_range(0..k);
    let leaves = [tensor(rng, &[ci, h, w]), tensor(rng, &[co, ci, k, k]), tensor(rng, &[co])];
    let n = co * ((h + 2 * p - k) / s + 1) * ((w + 2 * p - k) / s + 1);
    let weights = random_vec(rng, n);
    gradcheck(&leaves, &|g, v| {
        let y = g.conv2d(v[0], v[1], Some(v[2]), s, p).unwrap();
        project(g, y, &weights)
    }, STEP)
}

fn depthwise(rng: &mut ChaCha8Rng) -> f64 {
    let (c, h, w) = (rng.random_range(1..=4), rng.random_range(3..=6), rng.random_range(3..=6));
    let (k, s) = (rng.random_range(1..=3), rng.random_range(1..=2));
    let p = rng.random_range(0..k);
    let leaves = [tensor(rng, &[c, h, w]), tensor(rng, &[c, 1, k, k]), tensor(rng, &[c])];
    let n = c * ((h + 2 * p - k) / s + 1) * ((w + 2 * p - k) / s + 1);
    let weights = random_vec(rng, n);
    gradcheck(&leaves, &|g, v| {
        let y = g.depthwise_conv2d(v[0], v[1], Some(v[2]), s, p).unwrap();
        project(g, y, &weights)
    }, STEP)
}

fn conv_transpose(rng: &mut ChaCha8Rng) -> f64 {
    let (ci, co, h, w) = (rng.random_range(1..=3), rng.random_range(1..=3), rng.random_range(2..=4), rng.random_range(2..=4));
    let (k, s) = (rng.random_range(2..=4), rng.random_range(1..=2));
    let p = rng.random_range(0..k / 2 + 1);
    let leaves = [tensor(rng, &[ci, h, w]), tensor(rng, &[ci, co, k, k]), tensor(rng, &[co])];
    let n = co * ((h - 1) * s + k - 2 * p) * ((w - 1) * s + k - 2 * p);
    let weights = random_vec(rng, n);
    gradcheck(&leaves, &|g, v| {
        let y = g.conv_transpose2d(v[0], v[1], Some(v[2]), s, p).unwrap();
        project(g, y, &weights)
    }, STEP)
}

fn combine_add_sub(rng: &mut ChaCha8Rng) -> f64 {
    let shape = [2, 3, 4];
    let (ca, cb) = (rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
    let leaves = [tensor(rng, &shape), tensor(rng, &shape)];
    let weights = random_vec(rng, 24);
    gradcheck(&leaves, &|g, v| {
        let a = g.combine(v[0], ca, v[1], cb).unwrap();
        let b = g.add(a, v[1]).unwrap();
        let c = g.sub(b, v[0]).unwrap();
        project(g, c, &weights)
    }, STEP)
}

fn channel_affine(rng: &mut ChaCha8Rng) -> f64 {
    let leaves = [tensor(rng, &[3, 2, 5]), tensor(rng, &[3]), tensor(rng, &[3])];
    let weights = random_vec(rng, 30);
    gradcheck(&leaves, &|g, v| {
        let y = g.channel_affine(v[0], v[1], v[2]).unwrap();
        project(g, y, &weights)
    }, STEP)
}

fn relu_abs_scale(rng: &mut ChaCha8Rng) -> f64 {
    let leaves = [away_from_zero(rng, &[2, 4, 4], 1e-4)];
    let c = rng.random_range(-3.0..3.0);
    let weights = random_vec(rng, 32);
    gradcheck(&leaves, &|g, v| {
        let r = g.relu(v[0]);
        let a = g.abs(v[0]);
        let s = g.scale(a, c);
        let y = g.add(r, s).unwrap();
        project(g, y, &weights)
    }, STEP)
}

fn mean_sum(rng: &mut ChaCha8Rng) -> f64 {
    let leaves = [tensor(rng, &[3, 3, 3])];
    let weights = random_vec(rng, 27);
    gradcheck(&leaves, &|g, v| {
        let p = project(g, v[0], &weights);
        let m = g.mean(v[0]);
        let s = g.sum(v[0]);
        let a = g.combine(p, 1.0, m, 2.0).unwrap();
        g.combine(a, 1.0, s, -0.5).unwrap()
    }, STEP)
}

/// Predictions in [-0.5, 1.5] with |Δ| ≥ 0.01, since `|Δ|^(α−y)` has
/// unbounded curvature at Δ = 0, and |Δ − θ| ≥ 1e-4.
fn awing_pair(rng: &mut ChaCha8Rng, n: usize, theta: f64) -> (Vec<f64>, Vec<f64>) {
    let mut pred = Vec::with_capacity(n);
    let mut target = Vec::with_capacity(n);
    while pred.len() < n {
        let y: f64 = rng.random_range(0.0..=1.0);
        let p: f64 = rng.random_range(-0.5..1.5);
        let d = (p - y).abs();
        if d >= 0.01 && (d - theta).abs() >= 1e-4 {
            pred.push(p);
            target.push(y);
        }
    }
    (pred, target)
}

fn awing_case(rng: &mut ChaCha8Rng) -> f64 {
    let p = AWingParams::default();
    let (pred, target) = awing_pair(rng, 24, p.theta);
    let leaves = [Tensor::new(&[2, 3, 4], pred).unwrap()];
    gradcheck(&leaves, &|g, v| awing(g, v[0], &target, &p).unwrap(), STEP)
}

fn composite_case(rng: &mut ChaCha8Rng) -> f64 {
    let p = AWingParams::default();
    let beta = rng.random_range(0.0..=1.0);
    let (pred, target) = awing_pair(rng, 12, p.theta);
    let z = away_from_zero(rng, &[2, 2, 3], 1e-4);
    let zt = vec![0.0; 12];
    let leaves = [z, Tensor::new(&[3, 2, 2], pred).unwrap()];
    gradcheck(&leaves, &|g, v| {
        let ll = latent_l1(g, v[0], &zt).unwrap();
        let lh = awing(g, v[1], &target, &p).unwrap();
        composite(g, ll, lh, CompositeWeights::new(beta).unwrap()).unwrap()
    }, STEP)
}
