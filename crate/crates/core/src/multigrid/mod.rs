//! Two-level line-search multigrid around ISTA/FISTA.
//!
//! At a fine point `y` the solver either takes an ordinary proximal-gradient
//! step or, when the restricted gradient is large enough, builds a coarse
//! model `φ(x) = F_c(x) + ⟨v, x⟩` whose gradient at `R y` matches `R ∇F(y)`,
//! minimises it under lower bounds that keep the prolonged correction
//! feasible, and moves `y` by the prolonged coarse displacement.

mod transfer;

pub use transfer::{
    half_band_taps, neighbourhood_min, prolong, restrict, restrict_data, restriction_norm,
    DATA_FILTER_HALF_WIDTH,
};

use std::time::Instant;

use ndarray::{ArrayD, Zip};
use serde::{Deserialize, Serialize};

use crate::error::{PatError, Result};
use crate::optim::tv::{tv_smooth_grad, tv_smooth_lipschitz, tv_smooth_value};
use crate::optim::{
    check_divergence, check_start, extrapolate, extrapolate_data, next_t, prox_tv, relative_decrease,
    Callbacks, IterationRecord, Momentum, Problem, SolveResult, SolverOptions, StepKind, StopReason,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MgConfig {
    /// Gradient-ratio threshold of the decision rule.
    pub kappa: f64,
    /// Relative distance from the last recursion point that allows a new one.
    pub vartheta: f64,
    /// Consecutive direct steps after which recursion is allowed regardless.
    pub q_d: usize,
    /// Coarse iteration cap; 0 makes every recursion a no-op.
    pub q_c: usize,
    pub eps_c: f64,
    pub eps_d: f64,
    /// TV smoothing for gradients used by recursive steps.
    pub rho_tv: f64,
}

impl Default for MgConfig {
    fn default() -> Self {
        Self::defaults_for(2)
    }
}

impl MgConfig {
    pub fn defaults_for(ndim: usize) -> Self {
        let three = ndim == 3;
        Self {
            kappa: if three { 1.0 / 8.0 } else { 0.25 },
            vartheta: 0.1,
            q_d: 3,
            q_c: 8,
            eps_c: 1e-2,
            eps_d: 1e-3,
            rho_tv: if three { 3e-2 } else { 1e-2 },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if !(self.kappa > 0.0) {
            errs.push(format!("kappa must be positive, got {}", self.kappa));
        }
        if !(self.vartheta > 0.0 && self.vartheta < 1.0) {
            errs.push(format!("vartheta must lie in (0, 1), got {}", self.vartheta));
        }
        if self.q_d < 1 {
            errs.push("q_d must be at least 1".into());
        }
        if !(self.eps_c > 0.0) || !(self.eps_d > 0.0) {
            errs.push("eps_c and eps_d must be positive".into());
        }
        if !(self.rho_tv > 0.0) {
            errs.push(format!("rho_tv must be positive, got {}", self.rho_tv));
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(PatError::Config(errs))
        }
    }
}

fn norm(x: &ArrayD<f64>) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn dot(a: &ArrayD<f64>, b: &ArrayD<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

/// Decision rule for a recursive search direction at `y`.
pub fn should_recurse(
    cfg: &MgConfig,
    grad_norm: f64,
    restricted_grad_norm: f64,
    y: &ArrayD<f64>,
    y_tilde: Option<&ArrayD<f64>>,
    k_r: usize,
    k_d: usize,
) -> bool {
    if !(restricted_grad_norm > cfg.kappa * grad_norm) {
        return false;
    }
    if k_r == 0 || k_d > cfg.q_d {
        return true;
    }
    match y_tilde {
        Some(t) => norm(&(y - t)) > cfg.vartheta * norm(t),
        None => true,
    }
}

/// `v = R ∇F(y) − ∇F_c(R y)`.
pub fn coherence_term(restricted_fine_grad: &ArrayD<f64>, coarse_grad_at_start: &ArrayD<f64>) -> ArrayD<f64> {
    restricted_fine_grad - coarse_grad_at_start
}

/// Coarse lower bounds `R y − min_{j ∈ I_i} y_j`.
pub fn restrict_constraints(y: &ArrayD<f64>) -> Result<ArrayD<f64>> {
    Ok(restrict(y)? - neighbourhood_min(y)?)
}

/// A fine problem and its coarse counterpart.
pub struct LevelPair<'a> {
    pub fine: Problem<'a>,
    /// Coarse operator, restricted data and coarse Lipschitz constant; the
    /// objective settings are taken from the fine problem.
    pub coarse: Problem<'a>,
}

/// Diagnostics of one recursive step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecursionLog {
    pub k: usize,
    /// `‖∇φ(R y) − R ∇F(y)‖ / ‖R ∇F(y)‖`.
    pub coherence_error: f64,
    pub coarse_iters: usize,
    pub coarse_values: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct MgResult {
    pub result: SolveResult,
    pub recursions: Vec<RecursionLog>,
    /// Smallest entry over every fine iterate.
    pub min_iterate: f64,
}

struct CoarseOutcome {
    displacement: ArrayD<f64>,
    log: RecursionLog,
}

/// Smoothed objective value and gradient of one level from its `Hx`.
fn smooth_grad(problem: &Problem, x: &ArrayD<f64>, hx: &crate::sensors::SensorData, rho: f64) -> Result<ArrayD<f64>> {
    let mut g = problem.data_gradient_with(hx)?;
    let lambda = problem.objective.lambda;
    Zip::from(&mut g)
        .and(&tv_smooth_grad(x, rho))
        .for_each(|g, &t| *g += lambda * t);
    Ok(g)
}

fn coarse_step(
    pair: &LevelPair,
    cfg: &MgConfig,
    momentum: Momentum,
    k: usize,
    y: &ArrayD<f64>,
    restricted_grad: &ArrayD<f64>,
) -> Result<CoarseOutcome> {
    let coarse = &pair.coarse;
    let lambda = pair.fine.objective.lambda;
    let rho = cfg.rho_tv;
    let x0 = restrict(y)?;
    let lb = restrict_constraints(y)?;
    let hx0 = coarse.op.apply(&x0)?;
    let g0 = smooth_grad(coarse, &x0, &hx0, rho)?;
    let v = coherence_term(restricted_grad, &g0);
    let phi = |x: &ArrayD<f64>, hx: &crate::sensors::SensorData| {
        let r = coarse.residual(hx).norm();
        0.5 * r * r + lambda * tv_smooth_value(x, rho) + dot(&v, x)
    };
    let grad_phi0 = &g0 + &v;
    let coherence_error = norm(&(&grad_phi0 - restricted_grad)) / norm(restricted_grad).max(f64::MIN_POSITIVE);
    let alpha = pair.fine.objective.step_scale / (coarse.lipschitz + lambda * tv_smooth_lipschitz(y.ndim(), rho));
    let mut x = x0.clone();
    let mut hx = hx0;
    let mut value = phi(&x, &hx);
    let mut values = vec![value];
    let mut yc = x.clone();
    let mut hy = hx.clone();
    let mut grad = grad_phi0;
    let mut t = 1.0;
    let mut iters = 0;
    while iters < cfg.q_c {
        if iters > 0 {
            grad = &smooth_grad(coarse, &yc, &hy, rho)? + &v;
        }
        let x_new = Zip::from(&yc)
            .and(&grad)
            .and(&lb)
            .map_collect(|&y, &g, &l| (y - alpha * g).max(l));
        let hx_new = coarse.op.apply(&x_new)?;
        let value_new = phi(&x_new, &hx_new);
        iters += 1;
        values.push(value_new);
        let t_next = next_t(t);
        let theta = momentum.theta(t, t_next);
        yc = extrapolate(&x_new, &x, theta);
        hy = extrapolate_data(&hx_new, &hx, theta);
        let done = relative_decrease(value, value_new) < cfg.eps_c;
        x = x_new;
        hx = hx_new;
        value = value_new;
        t = t_next;
        if done {
            break;
        }
    }
    Ok(CoarseOutcome {
        displacement: prolong(&(&x - &x0)),
        log: RecursionLog {
            k,
            coherence_error,
            coarse_iters: iters,
            coarse_values: values,
        },
    })
}

/// The multigrid outer loop. `momentum` selects the base solver: `Nesterov`
/// for FISTA, `None` for ISTA.
pub fn mg_solve(
    pair: &LevelPair,
    x0: Option<&ArrayD<f64>>,
    cfg: &MgConfig,
    options: &SolverOptions,
    momentum: Momentum,
    callbacks: &mut Callbacks,
) -> Result<MgResult> {
    cfg.validate()?;
    let fine = &pair.fine;
    fine.objective.validate(momentum == Momentum::Nesterov)?;
    let clock = Instant::now();
    let obj = &fine.objective;
    let alpha = obj.step_scale / fine.lipschitz;
    let mut x = check_start(fine, x0)?;
    let mut hx = fine.op.apply(&x)?;
    let mut f = fine.value_with(&x, &hx);
    let f0 = f;
    let mut min_iterate = x.iter().cloned().fold(f64::INFINITY, f64::min);
    let first = IterationRecord {
        k: 0,
        kind: StepKind::Direct,
        cpu_seconds: clock.elapsed().as_secs_f64(),
        f,
        res: fine.residual(&hx).norm(),
        re: callbacks.re(&x),
    };
    callbacks.emit(&first, &x);
    let mut records = vec![first];
    let mut recursions = Vec::new();
    let mut y = x.clone();
    let mut hy = hx.clone();
    let mut t = 1.0;
    let mut k_d = 0usize;
    let mut k_r = 0usize;
    let mut y_tilde: Option<ArrayD<f64>> = None;
    let mut stop = StopReason::MaxIters;
    for k in 1..=options.max_iters {
        let g = fine.data_gradient_with(&hy)?;
        let mut recurse = false;
        let mut restricted_grad = None;
        if k > 1 {
            let mut grad_rho = g.clone();
            Zip::from(&mut grad_rho)
                .and(&tv_smooth_grad(&y, cfg.rho_tv))
                .for_each(|g, &t| *g += obj.lambda * t);
            let rg = restrict(&grad_rho)?;
            recurse = should_recurse(cfg, norm(&grad_rho), norm(&rg), &y, y_tilde.as_ref(), k_r, k_d);
            restricted_grad = Some(rg);
        }
        let (x_new, kind) = if recurse {
            let out = coarse_step(pair, cfg, momentum, k, &y, restricted_grad.as_ref().unwrap())?;
            recursions.push(out.log);
            k_r += 1;
            k_d = 0;
            y_tilde = Some(y.clone());
            (&y + &out.displacement, StepKind::Recursive)
        } else {
            k_d += 1;
            let z = Zip::from(&y).and(&g).map_collect(|&y, &g| y - alpha * g);
            (prox_tv(&z, obj.lambda, alpha, obj.nonneg, obj.prox_iters), StepKind::Direct)
        };
        let hx_new = fine.op.apply(&x_new)?;
        let f_new = fine.value_with(&x_new, &hx_new);
        min_iterate = x_new.iter().cloned().fold(min_iterate, f64::min);
        let rec = IterationRecord {
            k,
            kind,
            cpu_seconds: clock.elapsed().as_secs_f64(),
            f: f_new,
            res: fine.residual(&hx_new).norm(),
            re: callbacks.re(&x_new),
        };
        callbacks.emit(&rec, &x_new);
        records.push(rec);
        check_divergence(k, f_new, f0, options.divergence_factor)?;
        let t_next = next_t(t);
        let theta = momentum.theta(t, t_next);
        y = extrapolate(&x_new, &x, theta);
        hy = extrapolate_data(&hx_new, &hx, theta);
        let converged = relative_decrease(f, f_new) < cfg.eps_d;
        x = x_new;
        hx = hx_new;
        f = f_new;
        t = t_next;
        if converged {
            stop = StopReason::Tolerance;
            break;
        }
    }
    Ok(MgResult {
        result: SolveResult { x, records, stop },
        recursions,
        min_iterate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::IxDyn;

    fn cfg() -> MgConfig {
        MgConfig::default()
    }

    #[test]
    fn zero_gradient_never_recurses() {
        let y = ArrayD::zeros(IxDyn(&[4, 4]));
        assert!(!should_recurse(&cfg(), 0.0, 0.0, &y, None, 0, 10));
    }

    #[test]
    fn first_recursion_ignores_distance() {
        let y = ArrayD::from_elem(IxDyn(&[4, 4]), 1.0);
        assert!(should_recurse(&cfg(), 1.0, 0.3, &y, Some(&y), 0, 0));
    }

    #[test]
    fn same_point_blocks_recursion() {
        let y = ArrayD::from_elem(IxDyn(&[4, 4]), 1.0);
        assert!(!should_recurse(&cfg(), 1.0, 0.3, &y, Some(&y), 2, 3));
        assert!(should_recurse(&cfg(), 1.0, 0.3, &y, Some(&y), 2, 4));
        let far = &y * 1.5;
        assert!(should_recurse(&cfg(), 1.0, 0.3, &far, Some(&y), 2, 0));
        assert!(!should_recurse(&cfg(), 1.0, 0.2, &far, Some(&y), 0, 0));
    }

    #[test]
    fn constant_images_give_zero_bounds() {
        let c = ArrayD::from_elem(IxDyn(&[8, 6]), 0.7);
        assert!(restrict_constraints(&c).unwrap().iter().all(|v| v.abs() < 1e-15));
        let z = ArrayD::zeros(IxDyn(&[8, 6]));
        assert!(restrict_constraints(&z).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn defaults_follow_dimension() {
        assert_eq!(MgConfig::defaults_for(2).kappa, 0.25);
        assert_eq!(MgConfig::defaults_for(3).kappa, 0.125);
        assert_eq!(MgConfig::defaults_for(3).rho_tv, 3e-2);
        assert!(MgConfig { vartheta: 1.0, ..cfg() }.validate().is_err());
    }
}
