//! Grid transfer between a fine level and the level with half the points.
//!
//! Prolongation `P` is cell-centred multilinear interpolation (weights 3/4
//! and 1/4 per axis, edge values clamped); restriction is `R = Pᵀ / 2^d`, so
//! both preserve constants and `⟨R a, b⟩ = ⟨a, P b⟩ / 2^d`.

use std::f64::consts::PI;

use ndarray::{Array2, ArrayD, ArrayView1, ArrayViewMut1, Axis, IxDyn, Zip};

use crate::error::{PatError, Result};
use crate::sensors::SensorData;

fn along_axes(
    x: &ArrayD<f64>,
    out_len: impl Fn(usize) -> usize,
    f: impl Fn(ArrayView1<f64>, ArrayViewMut1<f64>),
) -> ArrayD<f64> {
    let mut cur = x.clone();
    for ax in 0..x.ndim() {
        let mut shape = cur.shape().to_vec();
        shape[ax] = out_len(shape[ax]);
        let mut next = ArrayD::zeros(IxDyn(&shape));
        Zip::from(cur.lanes(Axis(ax)))
            .and(next.lanes_mut(Axis(ax)))
            .for_each(|a, b| f(a, b));
        cur = next;
    }
    cur
}

/// Row `j` of the 1-D prolongation as `(coarse index, weight)` pairs.
fn prolong_row(j: usize, nc: usize) -> [(usize, f64); 2] {
    let i = j / 2;
    let other = if j % 2 == 0 { i.saturating_sub(1) } else { (i + 1).min(nc - 1) };
    [(i, 0.75), (other, 0.25)]
}

pub fn prolong(coarse: &ArrayD<f64>) -> ArrayD<f64> {
    along_axes(
        coarse,
        |n| 2 * n,
        |c, mut f| {
            let nc = c.len();
            for j in 0..f.len() {
                f[j] = prolong_row(j, nc).iter().map(|&(i, w)| w * c[i]).sum();
            }
        },
    )
}

pub fn restrict(fine: &ArrayD<f64>) -> Result<ArrayD<f64>> {
    if fine.shape().iter().any(|n| n % 2 != 0) {
        return Err(PatError::ShapeMismatch(format!(
            "cannot restrict odd shape {:?}",
            fine.shape()
        )));
    }
    Ok(along_axes(
        fine,
        |n| n / 2,
        |f, mut c| {
            let nc = c.len();
            for j in 0..f.len() {
                for (i, w) in prolong_row(j, nc) {
                    c[i] += 0.5 * w * f[j];
                }
            }
        },
    ))
}

/// Minimum of `fine` over the support of each prolongation column: the
/// coarse node's own 2^d cells plus one neighbouring fine cell on each side
/// per axis (a 4^d block, clipped at the boundary).
pub fn neighbourhood_min(fine: &ArrayD<f64>) -> Result<ArrayD<f64>> {
    if fine.shape().iter().any(|n| n % 2 != 0) {
        return Err(PatError::ShapeMismatch(format!(
            "cannot restrict odd shape {:?}",
            fine.shape()
        )));
    }
    Ok(along_axes(
        fine,
        |n| n / 2,
        |f, mut c| {
            let nf = f.len();
            for i in 0..c.len() {
                let lo = (2 * i).saturating_sub(1);
                let hi = (2 * i + 2).min(nf - 1);
                c[i] = (lo..=hi).map(|j| f[j]).fold(f64::INFINITY, f64::min);
            }
        },
    ))
}

/// Operator norm of the restriction, `2^(-d/2)`.
pub fn restriction_norm(ndim: usize) -> f64 {
    0.5f64.powf(ndim as f64 / 2.0)
}

/// Half-band low-pass taps: Blackman-windowed sinc with cutoff at a quarter
/// of the sampling rate, normalised to unit DC gain.
pub fn half_band_taps(half_width: usize) -> Vec<f64> {
    let m = half_width as f64;
    let mut taps: Vec<f64> = (-(half_width as isize)..=half_width as isize)
        .map(|k| {
            let k = k as f64;
            let sinc = if k == 0.0 { 0.5 } else { (PI * k / 2.0).sin() / (PI * k) };
            let w = 0.42 + 0.5 * (PI * k / (m + 1.0)).cos() + 0.08 * (2.0 * PI * k / (m + 1.0)).cos();
            sinc * w
        })
        .collect();
    let s: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= s);
    taps
}

pub const DATA_FILTER_HALF_WIDTH: usize = 24;

/// Low-pass filters each sensor trace with the half-band filter (mirrored
/// ends) and keeps the even samples, doubling `dt`.
pub fn restrict_data(data: &SensorData) -> Result<SensorData> {
    let nt = data.nt();
    if nt % 2 != 0 {
        return Err(PatError::InvalidArgument(format!("cannot halve odd nt {nt}")));
    }
    let taps = half_band_taps(DATA_FILTER_HALF_WIDTH);
    let hw = DATA_FILTER_HALF_WIDTH as isize;
    let reflect = |i: isize| -> usize {
        let n = nt as isize;
        if n == 1 {
            return 0;
        }
        let period = 2 * (n - 1);
        let mut m = i.rem_euclid(period);
        if m >= n {
            m = period - m;
        }
        m as usize
    };
    let mut out = Array2::zeros((data.num_sensors(), nt / 2));
    for (row, mut orow) in data.samples.rows().into_iter().zip(out.rows_mut()) {
        for (c, o) in orow.iter_mut().enumerate() {
            let centre = 2 * c as isize;
            *o = taps
                .iter()
                .enumerate()
                .map(|(t, &w)| w * row[reflect(centre + t as isize - hw)])
                .sum();
        }
    }
    Ok(SensorData {
        samples: out,
        dt: data.dt * 2.0,
    })
}
