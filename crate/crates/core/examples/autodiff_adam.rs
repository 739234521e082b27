//! Fits a 3×3 convolution to a hidden target kernel with the reverse-mode
//! graph and Adam.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thermopose::numerics::{AdamState, Graph, ParamStore, Tensor};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut rand_t = |shape: &[usize]| {
        let n = shape.iter().product();
        Tensor::new(shape, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    };
    let hidden = rand_t(&[2, 1, 3, 3]);
    let inputs: Vec<Tensor> = (0..8).map(|_| rand_t(&[1, 12, 12])).collect();
    let targets: Vec<Tensor> = inputs
        .iter()
        .map(|x| {
            let mut g = Graph::new();
            let (xv, kv) = (g.input(x.clone()), g.input(hidden.clone()));
            let y = g.conv2d(xv, kv, None, 1, 1).unwrap();
            g.value(y).clone()
        })
        .collect();

    let mut store = ParamStore::new();
    store.insert("k", Tensor::zeros(&[2, 1, 3, 3]))?;
    let mut adam = AdamState::new(&store, 0.05);
    for step in 0..=300 {
        store.zero_grad();
        let mut total = 0.0;
        for (x, t) in inputs.iter().zip(&targets) {
            let mut g = Graph::new();
            let xv = g.input(x.clone());
            let k = g.param_by_name(&store, "k")?;
            let y = g.conv2d(xv, k, None, 1, 1)?;
            let d = g.map_with(y, t.data(), |a, b| ((a - b) * (a - b), 2.0 * (a - b)))?;
            let loss = g.mean(d);
            let loss = g.scale(loss, 1.0 / inputs.len() as f64);
            total += g.value(loss).item();
            g.backward(loss, &mut store)?;
        }
        adam.step(&mut store)?;
        if step % 50 == 0 {
            println!("step {step:>3}: mse {total:.3e}");
        }
    }
    let learned = store.by_name("k").unwrap();
    let gap = learned.data().iter().zip(hidden.data()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    println!("max kernel error {gap:.2e}");
    Ok(())
}
