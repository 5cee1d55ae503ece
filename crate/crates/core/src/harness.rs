//! Numerical experiments that check the solver against closed-form
//! behaviour; shared by the test suite and the examples.

use std::f64::consts::PI;

use ndarray::{ArrayD, IxDyn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::grid::Grid;
use crate::medium::{db_to_neper, Medium};
use crate::operator::LinearOperator;
use crate::sensors::{SensorArray, SensorData};
use crate::wave::{ForwardOperator, WaveOptions};

/// `|⟨Hx, y⟩ − ⟨x, H*y⟩| / (‖Hx‖ ‖y‖)` for seeded uniform random `x`, `y`.
pub fn dot_test(op: &dyn LinearOperator, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = ArrayD::from_shape_fn(IxDyn(&op.image_dims()), |_| rng.random_range(-1.0..1.0));
    let (s, nt) = op.data_shape();
    let hx = op.apply(&x)?;
    let y = SensorData {
        samples: ndarray::Array2::from_shape_fn((s, nt), |_| rng.random_range(-1.0..1.0)),
        dt: hx.dt,
    };
    let hty = op.apply_adjoint(&y)?;
    let xh: f64 = x.iter().zip(hty.iter()).map(|(a, b)| a * b).sum();
    Ok((hx.dot(&y) - xh).abs() / (hx.norm() * y.norm()))
}

/// Amplitude decay of a plane wave at one probe frequency.
#[derive(Clone, Debug, PartialEq)]
pub struct AbsorptionProbe {
    /// Hz.
    pub frequency: f64,
    /// Measured attenuation, Np/m.
    pub measured: f64,
    /// `α0 ω^y`, Np/m.
    pub target: f64,
}

/// Launches a Gaussian plane wave along x in a homogeneous periodic medium
/// (no PML) and compares the spectra recorded at two downstream points
/// 10 mm apart.
pub fn plane_wave_absorption(alpha0_db: f64, y: f64, frequencies: &[f64]) -> Result<Vec<AbsorptionProbe>> {
    let (nx, ny) = (1024, 8);
    let h = 5e-5;
    let c0 = 1500.0;
    let dt = Grid::cfl_dt(&[h, h], c0, 0.3);
    let nt = 1200;
    let grid = Grid::new(vec![nx, ny], vec![h, h], 0, 0.0, dt, nt, c0)?;
    let medium = Medium::homogeneous(&grid, c0, 1000.0, alpha0_db, y)?;
    let src = 200;
    let (near, far) = (src + 60, src + 260);
    let sensors = SensorArray::new(vec![
        vec![grid.coord(0, near), grid.coord(1, 3)],
        vec![grid.coord(0, far), grid.coord(1, 3)],
    ]);
    let distance = (far - near) as f64 * h;
    let op = ForwardOperator::new(grid.clone(), medium, sensors, WaveOptions::default())?;
    let sigma = 2.0 * h;
    let x0 = grid.coord(0, src);
    let image = ArrayD::from_shape_fn(IxDyn(&grid.interior_dims()), |ix| {
        let d = grid.coord(0, ix[0]) - x0;
        (-d * d / (2.0 * sigma * sigma)).exp()
    });
    let data = op.forward(&image)?;
    let amplitude = |row: usize, f: f64| {
        let (mut re, mut im) = (0.0, 0.0);
        for (n, &v) in data.samples.row(row).iter().enumerate() {
            let ph = 2.0 * PI * f * n as f64 * dt;
            re += v * ph.cos();
            im -= v * ph.sin();
        }
        re.hypot(im)
    };
    let a0 = db_to_neper(alpha0_db, y);
    Ok(frequencies
        .iter()
        .map(|&f| AbsorptionProbe {
            frequency: f,
            measured: (amplitude(0, f) / amplitude(1, f)).ln() / distance,
            target: a0 * (2.0 * PI * f).powf(y),
        })
        .collect())
}

/// Least-squares fit of `log α = log a + y log ω`; returns `(y, a)` with `a`
/// in Np·m⁻¹·(rad/s)^-y.
pub fn fit_power_law(probes: &[AbsorptionProbe]) -> (f64, f64) {
    let pts: Vec<(f64, f64)> = probes
        .iter()
        .map(|p| ((2.0 * PI * p.frequency).ln(), p.measured.ln()))
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let slope = sxy / sxx;
    (slope, (my - slope * mx).exp())
}
