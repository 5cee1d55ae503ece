//! Isotropic discrete total variation with forward differences and
//! reflexive (Neumann) boundaries, plus its smoothed surrogate.

use ndarray::{ArrayD, Axis, Slice, Zip};

/// Forward differences along every axis; the last entry on each axis is 0.
pub fn gradient(x: &ArrayD<f64>) -> Vec<ArrayD<f64>> {
    (0..x.ndim())
        .map(|ax| {
            let n = x.shape()[ax];
            let mut g = ArrayD::zeros(x.raw_dim());
            if n > 1 {
                let hi = x.slice_axis(Axis(ax), Slice::from(1..n));
                let lo = x.slice_axis(Axis(ax), Slice::from(0..n - 1));
                Zip::from(g.slice_axis_mut(Axis(ax), Slice::from(0..n - 1)))
                    .and(&hi)
                    .and(&lo)
                    .for_each(|g, &a, &b| *g = a - b);
            }
            g
        })
        .collect()
}

/// Discrete divergence, the negative transpose of [`gradient`].
pub fn divergence(q: &[ArrayD<f64>]) -> ArrayD<f64> {
    let mut out = ArrayD::zeros(q[0].raw_dim());
    for (ax, qa) in q.iter().enumerate() {
        let n = qa.shape()[ax];
        if n < 2 {
            continue;
        }
        // out_j += q_j for j <= n-2, out_j -= q_{j-1} for j >= 1
        Zip::from(out.slice_axis_mut(Axis(ax), Slice::from(0..n - 1)))
            .and(qa.slice_axis(Axis(ax), Slice::from(0..n - 1)))
            .for_each(|o, &v| *o += v);
        Zip::from(out.slice_axis_mut(Axis(ax), Slice::from(1..n)))
            .and(qa.slice_axis(Axis(ax), Slice::from(0..n - 1)))
            .for_each(|o, &v| *o -= v);
    }
    out
}

fn magnitude2(g: &[ArrayD<f64>]) -> ArrayD<f64> {
    let mut m = g[0].mapv(|v| v * v);
    for ga in &g[1..] {
        Zip::from(&mut m).and(ga).for_each(|m, &v| *m += v * v);
    }
    m
}

/// `TV(x) = Σ |∇x|`.
pub fn tv(x: &ArrayD<f64>) -> f64 {
    magnitude2(&gradient(x)).iter().map(|m| m.sqrt()).sum()
}

/// `Σ √(|∇x|² + ρ²) − ρ`.
pub fn tv_smooth_value(x: &ArrayD<f64>, rho: f64) -> f64 {
    let r2 = rho * rho;
    magnitude2(&gradient(x)).iter().map(|m| (m + r2).sqrt() - rho).sum()
}

/// Gradient of [`tv_smooth_value`]: `−∇·(∇x / √(|∇x|² + ρ²))`.
pub fn tv_smooth_grad(x: &ArrayD<f64>, rho: f64) -> ArrayD<f64> {
    let mut g = gradient(x);
    let denom = magnitude2(&g).mapv(|m| (m + rho * rho).sqrt());
    for ga in g.iter_mut() {
        Zip::from(ga).and(&denom).for_each(|v, &d| *v /= d);
    }
    -divergence(&g)
}

/// Bound on the Lipschitz constant of [`tv_smooth_grad`]: `‖∇‖² / ρ ≤ 4d/ρ`.
pub fn tv_smooth_lipschitz(ndim: usize, rho: f64) -> f64 {
    4.0 * ndim as f64 / rho
}
