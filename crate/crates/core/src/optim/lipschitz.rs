//! Power-method estimate of `‖H*H‖` with an on-disk cache.

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::{ArrayD, IxDyn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{PatError, Result};
use crate::operator::{fingerprint, LinearOperator};

/// Environment variable naming the Lipschitz cache directory.
pub const CACHE_ENV: &str = "PATMG_CACHE_DIR";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LipschitzEstimate {
    pub value: f64,
    /// Rayleigh quotient after each power iteration.
    pub sequence: Vec<f64>,
    /// Relative change of the last two quotients was below 1e-3.
    pub converged: bool,
    #[serde(skip)]
    pub cache_hit: bool,
}

fn norm(v: &ArrayD<f64>) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// Runs `iters` power iterations on `H*H` from a seeded Gaussian start.
pub fn lipschitz(op: &dyn LinearOperator, iters: usize, seed: u64) -> Result<LipschitzEstimate> {
    if iters < 10 {
        return Err(PatError::InvalidArgument(format!(
            "power method needs at least 10 iterations, got {iters}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v = ArrayD::from_shape_fn(IxDyn(&op.image_dims()), |_| StandardNormal.sample(&mut rng));
    v /= norm(&v);
    let mut sequence: Vec<f64> = Vec::with_capacity(iters);
    for _ in 0..iters {
        let w = op.apply_adjoint(&op.apply(&v)?)?;
        sequence.push(v.iter().zip(w.iter()).map(|(a, b)| a * b).sum());
        let n = norm(&w);
        if n == 0.0 {
            break;
        }
        v = w / n;
    }
    let value = *sequence.last().unwrap();
    let converged = match sequence.len() {
        n if n >= 2 => (sequence[n - 1] - sequence[n - 2]).abs() <= 1e-3 * value.abs(),
        _ => true,
    };
    Ok(LipschitzEstimate {
        value,
        sequence,
        converged,
        cache_hit: false,
    })
}

/// Cache directory from the environment, if set.
pub fn cache_dir_from_env() -> Option<PathBuf> {
    std::env::var_os(CACHE_ENV).map(PathBuf::from)
}

/// Like [`lipschitz`], but reads and writes `<dir>/lipschitz-<hash>.json`
/// keyed by the operator fingerprint, iteration count and seed. Operators
/// without a fingerprint are never cached.
pub fn lipschitz_cached(
    op: &dyn LinearOperator,
    iters: usize,
    seed: u64,
    dir: Option<&Path>,
) -> Result<LipschitzEstimate> {
    let (Some(dir), Some(fp)) = (dir, op.fingerprint()) else {
        return lipschitz(op, iters, seed);
    };
    let key = fingerprint(&(fp, iters, seed));
    let path = dir.join(format!("lipschitz-{}.json", &key[..32]));
    if let Ok(text) = fs::read_to_string(&path) {
        if let Ok(mut est) = serde_json::from_str::<LipschitzEstimate>(&text) {
            est.cache_hit = true;
            return Ok(est);
        }
    }
    let est = lipschitz(op, iters, seed)?;
    fs::create_dir_all(dir)?;
    fs::write(&path, serde_json::to_string_pretty(&est)?)?;
    Ok(est)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::MatrixOperator;
    use ndarray::Array2;

    #[test]
    fn identity_has_unit_constant() {
        let op = MatrixOperator::identity(vec![4, 5]);
        let est = lipschitz(&op, 10, 1).unwrap();
        assert!((est.value - 1.0).abs() < 1e-10);
        assert!(lipschitz(&op, 9, 1).is_err());
    }

    #[test]
    fn rayleigh_sequence_is_nondecreasing() {
        let m = Array2::from_shape_fn((12, 8), |(i, j)| ((i * 7 + j * 3) % 5) as f64 - 2.0 + 0.1 * i as f64);
        let op = MatrixOperator::new(m.clone(), vec![8]).unwrap();
        let est = lipschitz(&op, 40, 3).unwrap();
        for w in est.sequence.windows(2) {
            assert!(w[1] >= w[0] - 1e-12 * w[1].abs());
        }
        // compare against the dense eigenvalue bound by brute power on MᵀM
        let mtm = m.t().dot(&m);
        let mut v = ndarray::Array1::from_elem(8, 1.0);
        for _ in 0..2000 {
            let w = mtm.dot(&v);
            v = &w / w.dot(&w).sqrt();
        }
        let lmax = v.dot(&mtm.dot(&v));
        assert!((est.value - lmax).abs() < 1e-6 * lmax);
    }
}
