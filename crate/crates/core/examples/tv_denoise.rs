//! Non-negative total-variation denoising of a noisy square with the prox
//! used inside the reconstruction solvers.

use ndarray::{ArrayD, IxDyn};
use patmg::optim::{prox_tv, tv};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let noise = Normal::new(0.0, 0.2).unwrap();
    let clean = ArrayD::from_shape_fn(IxDyn(&[32, 32]), |ix| {
        if (8..24).contains(&ix[0]) && (8..24).contains(&ix[1]) { 1.0 } else { 0.0 }
    });
    let noisy = clean.mapv(|v| v + noise.sample(&mut rng));
    let err = |x: &ArrayD<f64>| (x - &clean).mapv(|v| v * v).sum().sqrt();
    println!("noisy:    error {:.3}, TV {:.1}", err(&noisy), tv(&noisy));
    for lambda in [0.05, 0.1, 0.2] {
        let x = prox_tv(&noisy, lambda, 1.0, true, 200);
        println!("lambda {lambda:<4}: error {:.3}, TV {:.1}", err(&x), tv(&x));
    }
}
