//! Fixed-grid proximal-gradient solvers for
//! `F(x) = ½‖Hx − p̂‖² + λ TV(x)` subject to `x ≥ 0`.

mod lipschitz;
mod prox;
pub mod tv;

pub use lipschitz::{cache_dir_from_env, lipschitz, lipschitz_cached, LipschitzEstimate, CACHE_ENV};
pub use prox::prox_tv;
pub use tv::{tv, tv_smooth_grad, tv_smooth_value};

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use ndarray::{ArrayD, IxDyn, Zip};
use serde::{Deserialize, Serialize};

use crate::error::{PatError, Result};
use crate::operator::LinearOperator;
use crate::sensors::SensorData;

/// Entries below this count as infeasible when evaluating `F`.
pub const FEASIBILITY_SLACK: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ObjectiveConfig {
    /// Regularisation weight.
    pub lambda: f64,
    /// Constrain iterates to `x ≥ 0`.
    pub nonneg: bool,
    /// TV smoothing used by multigrid steps.
    pub rho_tv: f64,
    /// Dual iterations of the TV proximal map.
    pub prox_iters: usize,
    /// Step size as a multiple of `1/L_f`.
    pub step_scale: f64,
}

impl Default for ObjectiveConfig {
    fn default() -> Self {
        Self {
            lambda: 1e-4,
            nonneg: true,
            rho_tv: 1e-2,
            prox_iters: 20,
            step_scale: 1.0,
        }
    }
}

impl ObjectiveConfig {
    pub fn validate(&self, accelerated: bool) -> Result<()> {
        let mut errs = Vec::new();
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            errs.push(format!("lambda must be positive, got {}", self.lambda));
        }
        if !(self.rho_tv > 0.0) {
            errs.push(format!("rho_tv must be positive, got {}", self.rho_tv));
        }
        let max = if accelerated { 1.0 } else { 2.0 };
        if !(self.step_scale > 0.0 && self.step_scale <= max) {
            errs.push(format!("step_scale must lie in (0, {max}], got {}", self.step_scale));
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(PatError::Config(errs))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StepKind {
    Direct,
    Recursive,
}

impl fmt::Display for StepKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StepKind::Direct => "direct",
            StepKind::Recursive => "recursive",
        })
    }
}

impl FromStr for StepKind {
    type Err = PatError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "direct" => Ok(StepKind::Direct),
            "recursive" => Ok(StepKind::Recursive),
            _ => Err(PatError::Format(format!("unknown step kind {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub k: usize,
    pub kind: StepKind,
    pub cpu_seconds: f64,
    #[serde(rename = "F")]
    pub f: f64,
    #[serde(rename = "RES")]
    pub res: f64,
    #[serde(rename = "RE")]
    pub re: Option<f64>,
}

pub const CSV_HEADER: &str = "k,kind,cpu_seconds,F,RES,RE";

pub fn records_to_csv(records: &[IterationRecord]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in records {
        let re = r.re.map(|v| format!("{v:e}")).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{:e},{:e},{:e},{}\n",
            r.k, r.kind, r.cpu_seconds, r.f, r.res, re
        ));
    }
    out
}

pub fn records_from_csv(text: &str) -> Result<Vec<IterationRecord>> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(CSV_HEADER) {
        return Err(PatError::Format("unexpected CSV header".into()));
    }
    let num = |s: &str| -> Result<f64> {
        s.parse::<f64>()
            .map_err(|e| PatError::Format(format!("bad number {s:?}: {e}")))
    };
    lines
        .filter(|l| !l.trim().is_empty())
        .map(|line| {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 6 {
                return Err(PatError::Format(format!("expected 6 columns: {line:?}")));
            }
            Ok(IterationRecord {
                k: f[0]
                    .parse()
                    .map_err(|_| PatError::Format(format!("bad index {:?}", f[0])))?,
                kind: f[1].parse()?,
                cpu_seconds: num(f[2])?,
                f: num(f[3])?,
                res: num(f[4])?,
                re: if f[5].is_empty() { None } else { Some(num(f[5])?) },
            })
        })
        .collect()
}

pub fn write_records(path: &Path, records: &[IterationRecord]) -> Result<()> {
    fs::write(path, records_to_csv(records))?;
    Ok(())
}

pub fn read_records(path: &Path) -> Result<Vec<IterationRecord>> {
    records_from_csv(&fs::read_to_string(path)?)
}

/// Options shared by every outer loop.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    pub max_iters: usize,
    /// Fine-level tolerance on the relative decrease of `F`.
    pub eps_d: f64,
    /// Abort once `F` exceeds this multiple of its starting value.
    pub divergence_factor: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_iters: 100,
            eps_d: 1e-3,
            divergence_factor: 10.0,
        }
    }
}

/// A least-squares + TV problem on one grid.
pub struct Problem<'a> {
    pub op: &'a dyn LinearOperator,
    pub data: &'a SensorData,
    /// Lipschitz constant of `∇f`.
    pub lipschitz: f64,
    pub objective: ObjectiveConfig,
}

impl Problem<'_> {
    pub fn zeros(&self) -> ArrayD<f64> {
        ArrayD::zeros(IxDyn(&self.op.image_dims()))
    }

    /// `Hx − p̂` from a precomputed `Hx`.
    pub fn residual(&self, hx: &SensorData) -> SensorData {
        SensorData {
            samples: &hx.samples - &self.data.samples,
            dt: hx.dt,
        }
    }

    /// `F(x)` from a precomputed `Hx`, unsmoothed TV.
    pub fn value_with(&self, x: &ArrayD<f64>, hx: &SensorData) -> f64 {
        composite_value(&self.residual(hx), x, self.objective.lambda)
    }

    /// `∇f(x) = H*(Hx − p̂)` from a precomputed `Hx`.
    pub fn data_gradient_with(&self, hx: &SensorData) -> Result<ArrayD<f64>> {
        self.op.apply_adjoint(&self.residual(hx))
    }
}

/// `½‖r‖² + λ TV(x)`, or `+∞` when `x` has entries below `−1e−12`.
pub fn composite_value(residual: &SensorData, x: &ArrayD<f64>, lambda: f64) -> f64 {
    if x.iter().any(|&v| v < -FEASIBILITY_SLACK) {
        return f64::INFINITY;
    }
    let r = residual.norm();
    let reg = if lambda == 0.0 { 0.0 } else { lambda * tv(x) };
    0.5 * r * r + reg
}

/// `∇f(x) = H*(Hx − p̂)`.
pub fn grad_data(op: &dyn LinearOperator, x: &ArrayD<f64>, data: &SensorData) -> Result<ArrayD<f64>> {
    let hx = op.apply(x)?;
    op.apply_adjoint(&SensorData {
        samples: &hx.samples - &data.samples,
        dt: hx.dt,
    })
}

/// `(F_k − F_{k+1}) / max(F_k, F_{k+1})`, zero when both vanish.
pub fn relative_decrease(prev: f64, next: f64) -> f64 {
    let m = prev.abs().max(next.abs());
    if m == 0.0 {
        0.0
    } else {
        (prev - next) / m
    }
}

/// `t_{k+1} = (1 + √(1 + 4t_k²)) / 2`.
pub fn next_t(t: f64) -> f64 {
    (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Momentum {
    /// Plain ISTA.
    None,
    /// FISTA extrapolation.
    Nesterov,
    /// FISTA bookkeeping with every `θ_k` forced to zero.
    ForcedZero,
}

impl Momentum {
    pub fn theta(self, t: f64, t_next: f64) -> f64 {
        match self {
            Momentum::Nesterov => (t - 1.0) / t_next,
            Momentum::None | Momentum::ForcedZero => 0.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    Tolerance,
    MaxIters,
}

#[derive(Clone, Debug)]
pub struct SolveResult {
    pub x: ArrayD<f64>,
    pub records: Vec<IterationRecord>,
    pub stop: StopReason,
}

/// Hooks invoked from the solver loop.
#[derive(Default)]
pub struct Callbacks<'a> {
    /// Relative error (percent) of an iterate, when a ground truth exists.
    pub relative_error: Option<&'a dyn Fn(&ArrayD<f64>) -> f64>,
    /// Called after every record with the current iterate.
    pub on_iterate: Option<&'a mut dyn FnMut(&IterationRecord, &ArrayD<f64>)>,
}

impl Callbacks<'_> {
    pub(crate) fn emit(&mut self, record: &IterationRecord, x: &ArrayD<f64>) {
        if let Some(f) = self.on_iterate.as_mut() {
            f(record, x);
        }
    }

    pub(crate) fn re(&self, x: &ArrayD<f64>) -> Option<f64> {
        self.relative_error.map(|f| f(x))
    }
}

/// `a + θ(a − b)` without touching `a` when `θ = 0`.
pub(crate) fn extrapolate(a: &ArrayD<f64>, b: &ArrayD<f64>, theta: f64) -> ArrayD<f64> {
    Zip::from(a).and(b).map_collect(|&a, &b| a + theta * (a - b))
}

pub(crate) fn extrapolate_data(a: &SensorData, b: &SensorData, theta: f64) -> SensorData {
    SensorData {
        samples: Zip::from(&a.samples)
            .and(&b.samples)
            .map_collect(|&a, &b| a + theta * (a - b)),
        dt: a.dt,
    }
}

pub(crate) fn check_start(problem: &Problem, x0: Option<&ArrayD<f64>>) -> Result<ArrayD<f64>> {
    let dims = problem.op.image_dims();
    match x0 {
        Some(x) if x.shape() != dims.as_slice() => Err(PatError::ShapeMismatch(format!(
            "start image {:?} vs operator domain {:?}",
            x.shape(),
            dims
        ))),
        Some(x) => Ok(x.clone()),
        None => Ok(problem.zeros()),
    }
}

pub(crate) fn check_divergence(k: usize, f: f64, f0: f64, factor: f64) -> Result<()> {
    if !f.is_finite() || (f > factor * f0 && f > 0.0) {
        return Err(PatError::OptimizerDivergence {
            iteration: k,
            value: f,
            start: f0,
        });
    }
    Ok(())
}

/// Proximal-gradient loop shared by ISTA and FISTA. `Hy` is carried by
/// linearity so each iteration costs one forward and one adjoint solve.
pub fn proximal_gradient(
    problem: &Problem,
    x0: Option<&ArrayD<f64>>,
    options: &SolverOptions,
    momentum: Momentum,
    callbacks: &mut Callbacks,
) -> Result<SolveResult> {
    problem
        .objective
        .validate(momentum == Momentum::Nesterov)?;
    let clock = Instant::now();
    let cfg = &problem.objective;
    let alpha = cfg.step_scale / problem.lipschitz;
    let mut x = check_start(problem, x0)?;
    let mut hx = problem.op.apply(&x)?;
    let mut f = problem.value_with(&x, &hx);
    let f0 = f;
    let first = IterationRecord {
        k: 0,
        kind: StepKind::Direct,
        cpu_seconds: clock.elapsed().as_secs_f64(),
        f,
        res: problem.residual(&hx).norm(),
        re: callbacks.re(&x),
    };
    callbacks.emit(&first, &x);
    let mut records = vec![first];
    let mut y = x.clone();
    let mut hy = hx.clone();
    let mut t = 1.0;
    let mut stop = StopReason::MaxIters;
    for k in 1..=options.max_iters {
        let g = problem.data_gradient_with(&hy)?;
        let z = Zip::from(&y).and(&g).map_collect(|&y, &g| y - alpha * g);
        let x_new = prox_tv(&z, cfg.lambda, alpha, cfg.nonneg, cfg.prox_iters);
        let hx_new = problem.op.apply(&x_new)?;
        let f_new = problem.value_with(&x_new, &hx_new);
        let rec = IterationRecord {
            k,
            kind: StepKind::Direct,
            cpu_seconds: clock.elapsed().as_secs_f64(),
            f: f_new,
            res: problem.residual(&hx_new).norm(),
            re: callbacks.re(&x_new),
        };
        callbacks.emit(&rec, &x_new);
        records.push(rec);
        check_divergence(k, f_new, f0, options.divergence_factor)?;
        let t_next = next_t(t);
        let theta = momentum.theta(t, t_next);
        y = extrapolate(&x_new, &x, theta);
        hy = extrapolate_data(&hx_new, &hx, theta);
        let converged = relative_decrease(f, f_new) < options.eps_d;
        x = x_new;
        hx = hx_new;
        f = f_new;
        t = t_next;
        if converged {
            stop = StopReason::Tolerance;
            break;
        }
    }
    Ok(SolveResult { x, records, stop })
}

pub fn ista(
    problem: &Problem,
    x0: Option<&ArrayD<f64>>,
    options: &SolverOptions,
    callbacks: &mut Callbacks,
) -> Result<SolveResult> {
    proximal_gradient(problem, x0, options, Momentum::None, callbacks)
}

pub fn fista(
    problem: &Problem,
    x0: Option<&ArrayD<f64>>,
    options: &SolverOptions,
    callbacks: &mut Callbacks,
) -> Result<SolveResult> {
    proximal_gradient(problem, x0, options, Momentum::Nesterov, callbacks)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn momentum_sequence_start() {
        let t2 = next_t(1.0);
        assert!((t2 - (1.0 + 5f64.sqrt()) / 2.0).abs() < 1e-15);
        assert_eq!(Momentum::Nesterov.theta(1.0, t2), 0.0);
    }

    #[test]
    fn relative_decrease_handles_zero() {
        assert_eq!(relative_decrease(0.0, 0.0), 0.0);
        assert!((relative_decrease(2.0, 1.0) - 0.5).abs() < 1e-15);
        assert!(relative_decrease(1.0, 2.0) < 0.0);
    }

    #[test]
    fn csv_roundtrip() {
        let recs = vec![
            IterationRecord { k: 0, kind: StepKind::Direct, cpu_seconds: 0.0, f: 3.5, res: 2.0, re: Some(100.0) },
            IterationRecord { k: 1, kind: StepKind::Recursive, cpu_seconds: 0.25, f: 1.0, res: 1.25, re: None },
        ];
        let text = records_to_csv(&recs);
        assert!(text.starts_with("k,kind,cpu_seconds,F,RES,RE\n"));
        assert_eq!(records_from_csv(&text).unwrap(), recs);
    }

    #[test]
    fn config_validation_lists_every_problem() {
        let c = ObjectiveConfig { lambda: 0.0, rho_tv: 0.0, step_scale: 1.5, ..Default::default() };
        match c.validate(true) {
            Err(PatError::Config(v)) => assert_eq!(v.len(), 3),
            other => panic!("{other:?}"),
        }
        let ok = ObjectiveConfig { step_scale: 2.0, ..Default::default() };
        assert!(ok.validate(false).is_ok());
        assert!(ok.validate(true).is_err());
    }
}
