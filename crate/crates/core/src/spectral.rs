//! N-dimensional FFTs, wavenumber tables and spectral multipliers.
//!
//! Every real-to-real operator here has the form `Re(F⁻¹ m F x)`. Its exact
//! transpose is the same construction with `conj(m)`, which the adjoint
//! solver relies on.

use std::f64::consts::PI;
use std::sync::Arc;

use ndarray::{ArrayD, IxDyn, Zip};
use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// Angular wavenumbers for `n` samples at spacing `h`, in DFT ordering.
/// The Nyquist entry of an even-length axis is negative.
pub fn wavenumbers(n: usize, h: f64) -> Vec<f64> {
    let scale = 2.0 * PI / (n as f64 * h);
    (0..n)
        .map(|m| {
            let signed = if m < n.div_ceil(2) { m as isize } else { m as isize - n as isize };
            signed as f64 * scale
        })
        .collect()
}

/// Per-axis FFT plans plus wavenumber tables for one array shape.
pub struct Spectral {
    dims: Vec<usize>,
    fwd: Vec<Arc<dyn Fft<f64>>>,
    inv: Vec<Arc<dyn Fft<f64>>>,
    /// Angular wavenumber vector per axis.
    pub k: Vec<Vec<f64>>,
}

impl std::fmt::Debug for Spectral {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Spectral").field("dims", &self.dims).finish()
    }
}

impl Spectral {
    pub fn new(dims: &[usize], spacing: &[f64]) -> Self {
        let mut planner = FftPlanner::new();
        let fwd = dims.iter().map(|&n| planner.plan_fft_forward(n)).collect();
        let inv = dims.iter().map(|&n| planner.plan_fft_inverse(n)).collect();
        let k = dims
            .iter()
            .zip(spacing)
            .map(|(&n, &h)| wavenumbers(n, h))
            .collect();
        Self {
            dims: dims.to_vec(),
            fwd,
            inv,
            k,
        }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// |k| on the full spectral grid.
    pub fn k_magnitude(&self) -> ArrayD<f64> {
        ArrayD::from_shape_fn(IxDyn(&self.dims), |ix| {
            (0..self.dims.len())
                .map(|ax| self.k[ax][ix[ax]].powi(2))
                .sum::<f64>()
                .sqrt()
        })
    }

    /// |k|^power with the zero-wavenumber entry of negative powers set to 0.
    pub fn k_power(&self, power: f64) -> ArrayD<f64> {
        self.k_magnitude().mapv(|km| {
            if km == 0.0 {
                if power > 0.0 {
                    0.0
                } else if power == 0.0 {
                    1.0
                } else {
                    0.0
                }
            } else {
                km.powf(power)
            }
        })
    }

    /// Unnormalised forward transform of a real array.
    pub fn forward(&self, x: &ArrayD<f64>) -> ArrayD<Complex64> {
        let mut c = x.mapv(|v| Complex64::new(v, 0.0));
        self.transform(&mut c, true);
        c
    }

    /// Normalised inverse transform, keeping the real part.
    pub fn inverse_real(&self, mut c: ArrayD<Complex64>) -> ArrayD<f64> {
        self.transform(&mut c, false);
        let scale = 1.0 / self.len() as f64;
        c.mapv(|z| z.re * scale)
    }

    /// `Re(F⁻¹ (m ⊙ X))` for a spectrum `X` that is left untouched.
    pub fn apply_to_spectrum(&self, spectrum: &ArrayD<Complex64>, m: &ArrayD<Complex64>) -> ArrayD<f64> {
        let mut c = spectrum * m;
        self.transform(&mut c, false);
        let scale = 1.0 / self.len() as f64;
        c.mapv(|z| z.re * scale)
    }

    /// `Re(F⁻¹ (m ⊙ X))` for a real multiplier.
    pub fn apply_real_to_spectrum(&self, spectrum: &ArrayD<Complex64>, m: &ArrayD<f64>) -> ArrayD<f64> {
        let mut c = spectrum.clone();
        Zip::from(&mut c).and(m).for_each(|z, &w| *z *= w);
        self.inverse_real(c)
    }

    /// Filters a real field with a real multiplier.
    pub fn filter(&self, x: &ArrayD<f64>, m: &ArrayD<f64>) -> ArrayD<f64> {
        let spec = self.forward(x);
        self.apply_real_to_spectrum(&spec, m)
    }

    /// Collocated spectral first derivative along `axis`.
    pub fn derivative(&self, x: &ArrayD<f64>, axis: usize) -> ArrayD<f64> {
        let m = ArrayD::from_shape_fn(IxDyn(&self.dims), |ix| Complex64::new(0.0, self.k[axis][ix[axis]]));
        let spec = self.forward(x);
        self.apply_to_spectrum(&spec, &m)
    }

    /// Spectral Laplacian `∇²x`.
    pub fn laplacian(&self, x: &ArrayD<f64>) -> ArrayD<f64> {
        let m = self.k_magnitude().mapv(|km| -km * km);
        self.filter(x, &m)
    }

    /// Fractional Laplacian `(-∇²)^s x`, multiplier |k|^(2s).
    pub fn fractional_laplacian(&self, x: &ArrayD<f64>, s: f64) -> ArrayD<f64> {
        self.filter(x, &self.k_power(2.0 * s))
    }

    fn transform(&self, data: &mut ArrayD<Complex64>, forward: bool) {
        let ndim = self.dims.len();
        let slice = data
            .as_slice_mut()
            .expect("spectral arrays are in standard layout");
        for axis in 0..ndim {
            let plan = if forward { &self.fwd[axis] } else { &self.inv[axis] };
            let n = self.dims[axis];
            let inner: usize = self.dims[axis + 1..].iter().product();
            if inner == 1 {
                process_rows(plan.as_ref(), slice, n);
            } else {
                let outer: usize = self.dims[..axis].iter().product();
                // gather lanes into contiguous rows, transform, scatter back
                let mut buf = vec![Complex64::default(); slice.len()];
                for o in 0..outer {
                    let base = o * n * inner;
                    for i in 0..n {
                        for j in 0..inner {
                            buf[base + j * n + i] = slice[base + i * inner + j];
                        }
                    }
                }
                process_rows(plan.as_ref(), &mut buf, n);
                for o in 0..outer {
                    let base = o * n * inner;
                    for i in 0..n {
                        for j in 0..inner {
                            slice[base + i * inner + j] = buf[base + j * n + i];
                        }
                    }
                }
            }
        }
    }
}

fn process_rows(plan: &dyn Fft<f64>, data: &mut [Complex64], n: usize) {
    let rows = data.len() / n;
    let threads = rayon::current_num_threads();
    if threads > 1 && rows >= 2 * threads {
        let chunk_rows = rows.div_ceil(threads);
        data.par_chunks_mut(chunk_rows * n).for_each(|chunk| {
            let mut scratch = vec![Complex64::default(); plan.get_inplace_scratch_len()];
            plan.process_with_scratch(chunk, &mut scratch);
        });
    } else {
        let mut scratch = vec![Complex64::default(); plan.get_inplace_scratch_len()];
        plan.process_with_scratch(data, &mut scratch);
    }
}
