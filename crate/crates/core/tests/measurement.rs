mod common;

use ndarray::{Array2, ArrayD, IxDyn};
use patmg::experiment::{sha256_hex, Experiment};
use patmg::measurement::{add_awgn, perturb_medium, resample_image, MediumSpec, Region, Shape, Tissue};
use patmg::{Grid, SensorData};
use proptest::prelude::*;

fn bytes(x: &ArrayD<f64>) -> Vec<u8> {
    x.iter().flat_map(|v| v.to_le_bytes()).collect()
}

// frozen from the first run of the shipped desk configuration
const DESK_PHANTOM_SHA256: &str = "0024636bc8c12e27cd04552b090dcb34f4000fc80238560929a860d6570c24eb";

#[test]
fn desk_phantom_matches_golden_hash() {
    let cfg = patmg::config::ExperimentConfig::from_toml(patmg::config::DESK_2D).unwrap();
    let exp = Experiment::new(cfg).unwrap();
    assert_eq!(exp.phantom.shape(), &[128, 128]);
    assert_eq!(exp.phantom.iter().cloned().fold(0.0, f64::max), 2.0);
    assert_eq!(sha256_hex(&bytes(&exp.phantom)), DESK_PHANTOM_SHA256);
}

fn skin_ring(outer: f64) -> MediumSpec {
    MediumSpec {
        background: Tissue { c0: 1500.0, rho0: 1000.0, alpha0: 0.002 },
        y: 1.5,
        regions: vec![Region {
            shape: Shape::Disc { center: vec![0.0, 0.0], radius: outer },
            tissue: Tissue { c0: 1730.0, rho0: 1150.0, alpha0: 0.75 },
            interface: true,
        }],
    }
}

/// Outermost node along +x that still carries the skin speed.
fn edge(grid: &Grid, c0: &ArrayD<f64>) -> f64 {
    let j = grid.dims[1] / 2;
    (0..grid.dims[0])
        .filter(|&i| c0[[i, j]] == 1730.0)
        .map(|i| grid.coord(0, i))
        .fold(f64::NEG_INFINITY, f64::max)
}

#[test]
fn two_percent_shift_of_eleven_mm_moves_interface_by_022_mm() {
    let h = 2e-5;
    let g = Grid::new(vec![1200, 1200], vec![h, h], 0, 0.0, 1e-8, 1, 1730.0).unwrap();
    let spec = skin_ring(11e-3);
    let before = edge(&g, &spec.build(&g).unwrap().c0);
    let after = edge(&g, &perturb_medium(&spec, &g, None, 0.02 * 11e-3, 0).unwrap().c0);
    assert!(((before - after) - 0.22e-3).abs() <= h, "moved {}", before - after);
}

#[test]
fn awgn_snr_on_large_record() {
    let d = SensorData {
        samples: Array2::from_shape_fn((200, 600), |(i, j)| ((i as f64) * 0.3 + j as f64 * 0.05).sin() * (1.0 + i as f64 / 200.0)),
        dt: 1e-8,
    };
    assert!(d.samples.len() >= 100_000);
    let noisy = add_awgn(&d, 30.0, 11).unwrap();
    let signal: f64 = d.samples.iter().map(|v| v * v).sum();
    let noise: f64 = (&noisy.samples - &d.samples).iter().map(|v| v * v).sum();
    let snr = 10.0 * (signal / noise).log10();
    assert!((snr - 30.0).abs() < 0.5, "{snr}");
    assert_eq!(noisy, add_awgn(&d, 30.0, 11).unwrap());
    assert_ne!(noisy, add_awgn(&d, 30.0, 12).unwrap());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn resampling_preserves_constants_between_desk_grids(c in -4.0f64..4.0) {
        let cfg = patmg::config::ExperimentConfig::from_toml(patmg::config::DESK_2D).unwrap();
        let (a, b) = (cfg.simulation_grid().unwrap(), cfg.reconstruction_grid().unwrap());
        let x = ArrayD::from_elem(IxDyn(&a.interior_dims()), c);
        let y = resample_image(&x, &a, &b).unwrap();
        prop_assert!(y.iter().all(|v| (v - c).abs() < 1e-12));
    }
}
