mod common;

use common::*;
use ndarray::{Array2, ArrayD, IxDyn};
use patmg::operator::MatrixOperator;
use patmg::optim::{
    composite_value, fista, ista, prox_tv, proximal_gradient, tv, tv_smooth_grad, tv_smooth_value,
    Callbacks, Momentum, ObjectiveConfig, Problem, SolverOptions, StopReason,
};
use patmg::{LinearOperator, SensorData};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rand_field(dims: &[usize], rng: &mut ChaCha8Rng) -> ArrayD<f64> {
    ArrayD::from_shape_fn(IxDyn(dims), |_| rng.random_range(-1.0..1.0))
}

#[test]
fn data_gradient_matches_finite_differences() {
    let e = data_gradient_error(0.0);
    assert!(e <= 1e-4, "{e}");
}

#[test]
fn smoothed_tv_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for rho in [1e-2, 1e-1, 1.0] {
        let x = rand_field(&[16, 16], &mut rng);
        let dir = rand_field(&[16, 16], &mut rng);
        let h = 1e-5;
        let fd = (tv_smooth_value(&(&x + &(&dir * h)), rho) - tv_smooth_value(&(&x - &(&dir * h)), rho)) / (2.0 * h);
        let an = inner(&tv_smooth_grad(&x, rho), &dir);
        assert!((fd - an).abs() <= 1e-6 * an.abs(), "rho {rho}: {fd} vs {an}");
    }
}

#[test]
fn prox_matches_long_projected_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for case in 0..20 {
        let z = rand_field(&[8, 8], &mut rng).mapv(|v| 2.0 * v + 0.5);
        let lambda = rng.random_range(0.05..0.5);
        let alpha = rng.random_range(0.5..2.0);
        let w = lambda * alpha;
        let z2 = z.clone().into_dimensionality().unwrap();
        let reference = prox_oracle(&z2, w, 10_000).into_dyn();
        let ours = prox_tv(&z, lambda, alpha, true, 200);
        let (a, b) = (prox_objective(&ours, &z, w), prox_objective(&reference, &z, w));
        assert!(ours.iter().all(|&v| v >= 0.0));
        assert!((a - b).abs() <= 1e-4 * b.abs().max(1.0), "case {case}: {a} vs {b}");
    }
}

fn toy_problem(seed: u64) -> (MatrixOperator, SensorData) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = Array2::from_shape_fn((90, 64), |_| rng.random_range(-1.0..1.0));
    let op = MatrixOperator::new(a, vec![8, 8]).unwrap();
    let truth = ArrayD::from_shape_fn(IxDyn(&[8, 8]), |ix| if (2..6).contains(&ix[0]) && ix[1] > 3 { 1.0 } else { 0.0 });
    let data = op.apply(&truth).unwrap();
    (op, data)
}

fn toy_lipschitz(op: &MatrixOperator) -> f64 {
    patmg::optim::lipschitz(op, 200, 0).unwrap().value * 1.01
}

#[test]
fn ista_decreases_monotonically() {
    let (op, data) = toy_problem(1);
    for scale in [1.0, 1.9] {
        let p = Problem {
            op: &op,
            data: &data,
            lipschitz: toy_lipschitz(&op),
            objective: ObjectiveConfig { lambda: 0.05, step_scale: scale, prox_iters: 100, ..Default::default() },
        };
        let opts = SolverOptions { max_iters: 60, eps_d: 1e-12, ..Default::default() };
        let res = ista(&p, None, &opts, &mut Callbacks::default()).unwrap();
        for w in res.records.windows(2) {
            assert!(w[1].f <= w[0].f * (1.0 + 1e-6), "{} -> {}", w[0].f, w[1].f);
        }
    }
}

#[test]
fn forced_zero_momentum_reproduces_ista_bitwise() {
    let (op, data) = toy_problem(2);
    let p = Problem {
        op: &op,
        data: &data,
        lipschitz: toy_lipschitz(&op),
        objective: ObjectiveConfig { lambda: 0.02, ..Default::default() },
    };
    let opts = SolverOptions { max_iters: 40, ..Default::default() };
    let a = ista(&p, None, &opts, &mut Callbacks::default()).unwrap();
    let b = proximal_gradient(&p, None, &opts, Momentum::ForcedZero, &mut Callbacks::default()).unwrap();
    assert_eq!(a.x, b.x);
    let fa: Vec<f64> = a.records.iter().map(|r| r.f).collect();
    let fb: Vec<f64> = b.records.iter().map(|r| r.f).collect();
    assert_eq!(fa, fb);
}

#[test]
fn fine_loop_stops_exactly_at_tolerance() {
    let (op, data) = toy_problem(3);
    let p = Problem {
        op: &op,
        data: &data,
        lipschitz: toy_lipschitz(&op),
        objective: ObjectiveConfig { lambda: 0.05, ..Default::default() },
    };
    let opts = SolverOptions { max_iters: 500, eps_d: 1e-3, ..Default::default() };
    for res in [
        ista(&p, None, &opts, &mut Callbacks::default()).unwrap(),
        fista(&p, None, &opts, &mut Callbacks::default()).unwrap(),
    ] {
        assert_eq!(res.stop, StopReason::Tolerance);
        let dec = |w: &[patmg::optim::IterationRecord]| (w[0].f - w[1].f) / w[0].f.abs().max(w[1].f.abs());
        let n = res.records.len();
        assert!(dec(&res.records[n - 2..]) < 1e-3);
        assert!(res.records[..n - 1].windows(2).all(|w| dec(w) >= 1e-3));
    }
}

#[test]
fn divergent_step_is_reported() {
    let (op, data) = toy_problem(6);
    let p = Problem {
        op: &op,
        data: &data,
        lipschitz: toy_lipschitz(&op) / 50.0,
        objective: ObjectiveConfig { lambda: 0.01, step_scale: 2.0, ..Default::default() },
    };
    let err = ista(&p, None, &SolverOptions::default(), &mut Callbacks::default()).unwrap_err();
    assert!(matches!(err, patmg::PatError::OptimizerDivergence { .. }), "{err}");
}

#[test]
fn infeasible_points_have_infinite_objective() {
    let x = ArrayD::from_elem(IxDyn(&[3, 3]), -1e-9);
    let r = SensorData::zeros(1, 1, 1.0);
    assert_eq!(composite_value(&r, &x, 0.1), f64::INFINITY);
    let tiny = ArrayD::from_elem(IxDyn(&[3, 3]), -1e-13);
    assert_eq!(composite_value(&r, &tiny, 0.1), 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn prox_output_is_feasible_and_no_worse_than_input(seed in 0u64..10_000, lambda in 0.01f64..1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let z = rand_field(&[6, 7], &mut rng);
        let x = prox_tv(&z, lambda, 1.0, true, 50);
        prop_assert!(x.iter().all(|&v| v >= 0.0));
        let zp = z.mapv(|v| v.max(0.0));
        prop_assert!(prox_objective(&x, &z, lambda) <= prox_objective(&zp, &z, lambda) + 1e-9);
    }

    #[test]
    fn tv_is_shift_invariant_and_homogeneous(seed in 0u64..10_000, c in -3.0f64..3.0, s in 0.0f64..4.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = rand_field(&[5, 9], &mut rng);
        prop_assert!((tv(&x.mapv(|v| v + c)) - tv(&x)).abs() < 1e-10);
        prop_assert!((tv(&(&x * s)) - s * tv(&x)).abs() < 1e-10 * (1.0 + tv(&x) * s));
    }
}
