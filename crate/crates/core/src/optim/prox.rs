//! Proximal map of `λ TV + δ_{x ≥ 0}` by the fast gradient projection
//! method on the dual.

use ndarray::{ArrayD, Zip};

use super::tv::{divergence, gradient};

/// Approximately solves
/// `argmin_x λ TV(x) + δ_C(x) + ‖x − z‖² / (2α)` with `C = {x ≥ 0}` when
/// `nonneg` is set, using `iters` dual iterations.
pub fn prox_tv(z: &ArrayD<f64>, lambda: f64, alpha: f64, nonneg: bool, iters: usize) -> ArrayD<f64> {
    let project = |x: ArrayD<f64>| if nonneg { x.mapv(|v| v.max(0.0)) } else { x };
    let weight = lambda * alpha;
    if weight == 0.0 || iters == 0 {
        return project(z.clone());
    }
    let d = z.ndim();
    let step = 1.0 / (4.0 * d as f64 * weight);
    let primal = |p: &[ArrayD<f64>]| {
        let mut x = divergence(p);
        Zip::from(&mut x).and(z).for_each(|x, &z| *x = z + weight * *x);
        project(x)
    };
    let mut p: Vec<ArrayD<f64>> = (0..d).map(|_| ArrayD::zeros(z.raw_dim())).collect();
    let mut r = p.clone();
    let mut t = 1.0_f64;
    for _ in 0..iters {
        let x = primal(&r);
        let g = gradient(&x);
        let mut next: Vec<ArrayD<f64>> = r.iter().zip(&g).map(|(r, g)| r + &(g * step)).collect();
        // project each dual vector onto the unit ball
        let mut norm = next[0].mapv(|v| v * v);
        for na in &next[1..] {
            Zip::from(&mut norm).and(na).for_each(|n, &v| *n += v * v);
        }
        norm.mapv_inplace(|n| n.sqrt().max(1.0));
        for na in next.iter_mut() {
            *na /= &norm;
        }
        let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        let beta = (t - 1.0) / t_next;
        r = next
            .iter()
            .zip(&p)
            .map(|(n, o)| n + &((n - o) * beta))
            .collect();
        p = next;
        t = t_next;
    }
    primal(&p)
}
