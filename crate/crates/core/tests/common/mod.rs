#![allow(dead_code)]

use ndarray::{Array2, ArrayD, IxDyn};
use patmg::LinearOperator;
use patmg::{ForwardOperator, Grid, Medium, SensorArray, SensorData, WaveOptions};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn small_grid(n: usize, pml: usize, nt: usize, c_max: f64) -> Grid {
    let h = 1e-4;
    let dt = Grid::cfl_dt(&[h, h], c_max, 0.3);
    Grid::new(vec![n, n], vec![h, h], pml, 2.0, dt, nt, c_max).unwrap()
}

/// Smooth random heterogeneity around water.
pub fn wobbly_medium(grid: &Grid, alpha0: f64, seed: u64) -> Medium {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (a, b): (f64, f64) = (rng.random_range(0.0..6.0), rng.random_range(0.0..6.0));
    let n = grid.dims[0] as f64;
    let c = ArrayD::from_shape_fn(IxDyn(&grid.dims), |ix| {
        1500.0 + 60.0 * ((ix[0] as f64 / n * 6.0 + a).sin() * (ix[1] as f64 / n * 5.0 + b).cos())
    });
    let r = c.mapv(|c| 1000.0 + (c - 1500.0) * 0.8);
    let al = ArrayD::from_elem(IxDyn(&grid.dims), alpha0);
    Medium::new(c, r, al, 1.5).unwrap()
}

pub fn ring_sensors(grid: &Grid, count: usize) -> SensorArray {
    let r = 0.8 * grid.interior_half_extent(0);
    SensorArray::arc(count, r, 0.3, 5.0)
}

pub fn random_image(grid: &Grid, rng: &mut ChaCha8Rng) -> ArrayD<f64> {
    ArrayD::from_shape_fn(IxDyn(&grid.interior_dims()), |_| rng.random_range(-1.0..1.0))
}

pub fn random_data(op: &ForwardOperator, rng: &mut ChaCha8Rng) -> SensorData {
    let g = op.grid();
    let s = op.propagator().num_sensors();
    SensorData {
        samples: Array2::from_shape_fn((s, g.nt), |_| rng.random_range(-1.0..1.0)),
        dt: g.dt,
    }
}

pub fn inner(a: &ArrayD<f64>, b: &ArrayD<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &ArrayD<f64>) -> f64 {
    inner(a, a).sqrt()
}

/// `|<Hx, y> - <x, H*y>| / (|Hx| |y|)`.
pub fn dot_test(op: &ForwardOperator, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = random_image(op.grid(), &mut rng);
    let y = random_data(op, &mut rng);
    let hx = op.forward(&x).unwrap();
    let hty = op.adjoint_operator().adjoint(&y).unwrap();
    (hx.dot(&y) - inner(&x, &hty)).abs() / (hx.norm() * y.norm())
}

pub fn operator(grid: Grid, medium: Medium, sensors: SensorArray) -> ForwardOperator {
    ForwardOperator::new(grid, medium, sensors, WaveOptions::default()).unwrap()
}

/// A shrunken copy of the shipped desk experiment that runs in seconds.
pub fn tiny_config() -> patmg::config::ExperimentConfig {
    let text = patmg::config::DESK_2D
        .replace("dims = [168, 168]", "dims = [56, 56]")
        .replace("spacing = [1.5e-4, 1.5e-4]", "spacing = [1.6e-4, 1.6e-4]")
        .replace("pml_thickness = 20", "pml_thickness = 8")
        .replace("dims = [128, 128]", "dims = [48, 48]")
        .replace("pml_thickness = 16", "pml_thickness = 8")
        .replace("nt = 280", "nt = 90")
        .replace("radius = 7.6e-3", "radius = 2.6e-3")
        .replace("radius = 6.8e-3", "radius = 2.3e-3")
        .replace("extent = 5.5e-3", "extent = 1.6e-3")
        .replace("thickness = 5e-4", "thickness = 2.5e-4")
        .replace("count = 200", "count = 24")
        .replace("radius = 8e-3", "radius = 2.8e-3")
        .replace("name = \"2d-desk\"", "name = \"tiny\"");
    patmg::config::ExperimentConfig::from_toml(&text).unwrap()
}

pub fn half_sq(op: &dyn LinearOperator, x: &ArrayD<f64>, d: &SensorData) -> f64 {
    let hx = op.apply(x).unwrap();
    0.5 * (&hx.samples - &d.samples).mapv(|v| v * v).sum()
}

/// Full gradient against per-component central differences.
pub fn data_gradient_error(alpha0: f64) -> f64 {
    let g = small_grid(32, 8, 60, 1560.0);
    let op = operator(g.clone(), wobbly_medium(&g, alpha0, 8), ring_sensors(&g, 8));
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let data = op.forward(&random_image(&g, &mut rng).mapv(f64::abs)).unwrap();
    let x = random_image(&g, &mut rng);
    let grad = patmg::optim::grad_data(&op, &x, &data).unwrap();
    let h = 1e-3;
    let mut fd = ArrayD::zeros(grad.raw_dim());
    for (ix, v) in fd.indexed_iter_mut() {
        let mut xp = x.clone();
        xp[&ix] += h;
        let mut xm = x.clone();
        xm[&ix] -= h;
        *v = (half_sq(&op, &xp, &data) - half_sq(&op, &xm, &data)) / (2.0 * h);
    }
    norm(&(&grad - &fd)) / norm(&fd)
}

/// Independent reference: plain projected gradient on the dual of
/// `min ½‖x − z‖² + w TV(x) + δ(x ≥ 0)`, written without the library's
/// difference operators.
pub fn prox_oracle(z: &Array2<f64>, w: f64, iters: usize) -> Array2<f64> {
    let (n, m) = z.dim();
    let mut px = Array2::<f64>::zeros((n, m));
    let mut py = Array2::<f64>::zeros((n, m));
    let primal = |px: &Array2<f64>, py: &Array2<f64>| {
        Array2::from_shape_fn((n, m), |(i, j)| {
            let mut div = 0.0;
            if i + 1 < n {
                div += px[[i, j]];
            }
            if i > 0 {
                div -= px[[i - 1, j]];
            }
            if j + 1 < m {
                div += py[[i, j]];
            }
            if j > 0 {
                div -= py[[i, j - 1]];
            }
            (z[[i, j]] + w * div).max(0.0)
        })
    };
    let step = 1.0 / (8.0 * w);
    for _ in 0..iters {
        let x = primal(&px, &py);
        for i in 0..n {
            for j in 0..m {
                let gx = if i + 1 < n { x[[i + 1, j]] - x[[i, j]] } else { 0.0 };
                let gy = if j + 1 < m { x[[i, j + 1]] - x[[i, j]] } else { 0.0 };
                let (a, b) = (px[[i, j]] + step * gx, py[[i, j]] + step * gy);
                let s = a.hypot(b).max(1.0);
                px[[i, j]] = a / s;
                py[[i, j]] = b / s;
            }
        }
    }
    primal(&px, &py)
}

pub fn prox_objective(x: &ArrayD<f64>, z: &ArrayD<f64>, w: f64) -> f64 {
    0.5 * (x - z).mapv(|v| v * v).sum() + w * patmg::optim::tv(x)
}

/// Largest violation of `y + P(x_c − R y) ≥ 0` for a coarse point on or
/// above the restricted bounds.
pub fn worst_violation(y: &ArrayD<f64>, slack: &ArrayD<f64>) -> f64 {
    let lb = patmg::multigrid::restrict_constraints(y).unwrap();
    let xc0 = patmg::multigrid::restrict(y).unwrap();
    let xc = &lb + slack;
    let x = y + &patmg::multigrid::prolong(&(&xc - &xc0));
    x.iter().fold(0.0f64, |m, &v| m.max(-v))
}

/// Worst violation over `trials` random 16×16 points mixing zeros, spikes
/// and ramps, half of them with the coarse point exactly on its bounds.
pub fn feasibility_search(trials: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for trial in 0..trials {
        let sparsity = rng.random_range(0.0..1.0);
        let y = ArrayD::from_shape_fn(IxDyn(&[16, 16]), |ix| {
            if rng.random_range(0.0..1.0) < sparsity {
                0.0
            } else {
                rng.random_range(0.0..3.0) * (1.0 + (ix[0] + ix[1]) as f64 * 0.1)
            }
        });
        let slack = if trial % 2 == 0 {
            ArrayD::zeros(IxDyn(&[8, 8]))
        } else {
            ArrayD::from_shape_fn(IxDyn(&[8, 8]), |_| rng.random_range(0.0..0.5))
        };
        worst = worst.max(worst_violation(&y, &slack));
    }
    worst
}
