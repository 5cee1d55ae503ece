//! k-space pseudospectral solver for the first-order acoustic system with
//! power-law absorption and dispersion.
//!
//! Spatial derivatives are spectral with the k-space correction
//! `sinc(c_ref |k| dt / 2)`; velocity components live on grids staggered by
//! half a cell along their own axis; the density is split per axis so the
//! PML can damp each direction separately. One step cycles through the
//! momentum equation, the continuity equation and the equation of state.
//! The adjoint runs the same cycle with the coefficients of the loss terms
//! moved inside the fractional Laplacians and with a mass source.

mod adjoint;
mod forward;
mod time_reversal;

pub use adjoint::AdjointOperator;
pub use forward::ForwardOperator;

use std::f64::consts::PI;

use ndarray::{ArrayD, IxDyn, Zip};
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{PatError, Result};
use crate::grid::Grid;
use crate::medium::Medium;
use crate::sensors::{SensorArray, Stencil};
use crate::spectral::Spectral;

/// Which equation of state closes the system.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StateEquation {
    /// `p = c0² ρ`.
    Lossless,
    /// `p = c0² {1 - τ ∂t (-∇²)^(y/2-1) - η (-∇²)^((y-1)/2)} ρ`.
    PowerLaw,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WaveOptions {
    /// Filter the initial pressure (and, in the adjoint, the output) with
    /// the Blackman source smoother.
    pub smooth_source: bool,
    /// Filter sound speed and density maps before use.
    pub smooth_medium: bool,
    /// `None` picks `Lossless` when the absorption map is identically zero.
    pub state_equation: Option<StateEquation>,
    /// Stretch of the source window relative to this grid's Nyquist; 2 on a
    /// coarse level reproduces the fine level's filter.
    #[serde(default = "unit_scale")]
    pub source_filter_scale: f64,
}

fn unit_scale() -> f64 {
    1.0
}

impl Default for WaveOptions {
    fn default() -> Self {
        Self {
            smooth_source: true,
            smooth_medium: false,
            state_equation: None,
            source_filter_scale: 1.0,
        }
    }
}

/// The (p, u, ρ) field triple on the full grid.
#[derive(Clone, Debug, PartialEq)]
pub struct AcousticState {
    pub p: ArrayD<f64>,
    /// One velocity map per axis, staggered by half a cell along that axis.
    pub u: Vec<ArrayD<f64>>,
    /// Split acoustic density; the total density is the sum.
    pub rho: Vec<ArrayD<f64>>,
}

impl AcousticState {
    pub fn zeros(grid: &Grid) -> Self {
        Self {
            p: grid.zeros(),
            u: (0..grid.ndim()).map(|_| grid.zeros()).collect(),
            rho: (0..grid.ndim()).map(|_| grid.zeros()).collect(),
        }
    }

    pub fn total_density(&self) -> ArrayD<f64> {
        let mut total = self.rho[0].clone();
        for r in &self.rho[1..] {
            total += r;
        }
        total
    }

    /// Discrete acoustic energy `Σ p²/(2ρ0c0²) + Σ ρ0|u|²/2`.
    pub fn energy(&self, medium: &Medium) -> f64 {
        let mut e = 0.0;
        Zip::from(&self.p)
            .and(&medium.rho0)
            .and(&medium.c0)
            .for_each(|&p, &r, &c| e += p * p / (2.0 * r * c * c));
        for u in &self.u {
            Zip::from(u).and(&medium.rho0).for_each(|&v, &r| e += 0.5 * r * v * v);
        }
        e
    }

    fn is_finite(&self) -> bool {
        self.p.iter().all(|v| v.is_finite())
    }
}

/// Real, even Blackman window over the wavenumbers of `dims`, equal to 1 at DC.
pub fn blackman_window(dims: &[usize]) -> ArrayD<f64> {
    blackman_window_scaled(dims, 1.0)
}

/// Blackman window whose support reaches `scale` times the Nyquist
/// wavenumber, so a grid twice as coarse can reproduce the response of a
/// fine-grid window with `scale = 2`.
pub fn blackman_window_scaled(dims: &[usize], scale: f64) -> ArrayD<f64> {
    let dc = 0.42 + 0.5 + 0.08;
    let profile = |n: usize| -> Vec<f64> {
        (0..n)
            .map(|m| {
                let signed = if m < n.div_ceil(2) { m as f64 } else { m as f64 - n as f64 };
                let r = signed.abs() / (n as f64 / 2.0) / scale;
                let b = 0.42 + 0.5 * (PI * r).cos() + 0.08 * (2.0 * PI * r).cos();
                (b / dc).max(0.0)
            })
            .collect()
    };
    let profiles: Vec<Vec<f64>> = dims.iter().map(|&n| profile(n)).collect();
    ArrayD::from_shape_fn(IxDyn(dims), |ix| {
        (0..dims.len()).map(|ax| profiles[ax][ix[ax]]).product()
    })
}

/// Self-adjoint smoothing of an image by the Blackman window on its own dims.
#[derive(Debug)]
pub struct SourceSmoother {
    spectral: Spectral,
    window: ArrayD<f64>,
}

impl SourceSmoother {
    pub fn new(dims: &[usize]) -> Self {
        Self::with_scale(dims, 1.0)
    }

    pub fn with_scale(dims: &[usize], scale: f64) -> Self {
        Self {
            spectral: Spectral::new(dims, &vec![1.0; dims.len()]),
            window: blackman_window_scaled(dims, scale),
        }
    }

    pub fn apply(&self, image: &ArrayD<f64>) -> ArrayD<f64> {
        self.spectral.filter(image, &self.window)
    }
}

/// Smooths an image on `grid`'s interior with the Blackman source window.
pub fn smooth_source(image: &ArrayD<f64>, grid: &Grid) -> Result<ArrayD<f64>> {
    grid.check_interior(image)?;
    Ok(SourceSmoother::new(&grid.interior_dims()).apply(image))
}

/// Blackman-filters the sound speed and density maps and re-derives the
/// loss coefficients.
pub fn smooth_medium(medium: &Medium) -> Result<Medium> {
    let smoother = SourceSmoother::new(medium.c0.shape());
    Medium::new(
        smoother.apply(&medium.c0),
        smoother.apply(&medium.rho0),
        medium.alpha0.clone(),
        medium.y,
    )
}

fn pml_profile(grid: &Grid, axis: usize, shift: f64) -> Vec<f64> {
    let n = grid.dims[axis];
    let pml = grid.pml_thickness as f64;
    let scale = grid.pml_alpha_max * grid.c_ref / grid.spacing[axis];
    (0..n)
        .map(|j| {
            if grid.pml_thickness == 0 {
                return 1.0;
            }
            let s = j as f64 + shift;
            let depth = (pml - s).max(0.0).max(s - (n as f64 - 1.0 - pml)).max(0.0);
            (-scale * (depth / pml).powi(4) * grid.dt / 2.0).exp()
        })
        .collect()
}

fn broadcast_axis(dims: &[usize], axis: usize, profile: &[f64]) -> ArrayD<f64> {
    ArrayD::from_shape_fn(IxDyn(dims), |ix| profile[ix[axis]])
}

/// Precomputed tables shared by the forward, adjoint and time-reversal runs.
#[derive(Debug)]
pub struct Propagator {
    pub grid: Grid,
    /// Medium as used by the solver (smoothed when requested).
    pub medium: Medium,
    pub sensors: SensorArray,
    pub options: WaveOptions,
    pub(crate) stencils: Vec<Stencil>,
    spectral: Spectral,
    /// Node-to-staggered derivative multipliers per axis.
    grad_plus: Vec<ArrayD<Complex64>>,
    /// Staggered-to-node derivative multipliers per axis.
    div_minus: Vec<ArrayD<Complex64>>,
    pml_node: Option<Vec<ArrayD<f64>>>,
    pml_stag: Option<Vec<ArrayD<f64>>>,
    rho0_stag: Vec<ArrayD<f64>>,
    c2: ArrayD<f64>,
    absorb_nabla1: ArrayD<f64>,
    absorb_nabla2: ArrayD<f64>,
    state_equation: StateEquation,
    smoother: Option<SourceSmoother>,
}

impl Propagator {
    pub fn new(grid: Grid, medium: Medium, sensors: SensorArray, options: WaveOptions) -> Result<Self> {
        grid.validate()?;
        medium.validate_for(&grid)?;
        if !(options.source_filter_scale >= 1.0) {
            return Err(PatError::InvalidArgument(format!(
                "source filter scale must be at least 1, got {}",
                options.source_filter_scale
            )));
        }
        let stencils = sensors.stencils(&grid)?;
        let medium = if options.smooth_medium {
            smooth_medium(&medium)?
        } else {
            medium
        };
        let d = grid.ndim();
        let dims = grid.dims.clone();
        let spectral = Spectral::new(&dims, &grid.spacing);
        let kmag = spectral.k_magnitude();
        let kappa = kmag.mapv(|km| {
            let x = grid.c_ref * km * grid.dt / 2.0;
            if x == 0.0 {
                1.0
            } else {
                x.sin() / x
            }
        });
        let mut grad_plus = Vec::with_capacity(d);
        let mut div_minus = Vec::with_capacity(d);
        for ax in 0..d {
            let h = grid.spacing[ax];
            let k = &spectral.k[ax];
            let make = |sign: f64| {
                ArrayD::from_shape_fn(IxDyn(&dims), |ix| {
                    let kk = k[ix[ax]];
                    let shift = Complex64::from_polar(1.0, sign * kk * h / 2.0);
                    Complex64::new(0.0, kk) * shift * kappa[&ix]
                })
            };
            grad_plus.push(make(1.0));
            div_minus.push(make(-1.0));
        }
        let has_pml = grid.pml_thickness > 0 && grid.pml_alpha_max > 0.0;
        let pml_node = has_pml.then(|| {
            (0..d)
                .map(|ax| broadcast_axis(&dims, ax, &pml_profile(&grid, ax, 0.0)))
                .collect()
        });
        let pml_stag = has_pml.then(|| {
            (0..d)
                .map(|ax| broadcast_axis(&dims, ax, &pml_profile(&grid, ax, 0.5)))
                .collect()
        });
        let rho0_stag = (0..d)
            .map(|ax| {
                let n = dims[ax];
                ArrayD::from_shape_fn(IxDyn(&dims), |ix| {
                    let mut next = ix.clone();
                    next[ax] = (ix[ax] + 1).min(n - 1);
                    0.5 * (medium.rho0[&ix] + medium.rho0[&next])
                })
            })
            .collect();
        let c2 = medium.c0.mapv(|c| c * c);
        let y = medium.y;
        let absorb_nabla1 = spectral.k_power(y - 2.0);
        let absorb_nabla2 = spectral.k_power(y - 1.0);
        let state_equation = options.state_equation.unwrap_or(if medium.is_lossless() {
            StateEquation::Lossless
        } else {
            StateEquation::PowerLaw
        });
        let smoother = options
            .smooth_source
            .then(|| SourceSmoother::with_scale(&grid.interior_dims(), options.source_filter_scale));
        Ok(Self {
            grid,
            medium,
            sensors,
            options,
            stencils,
            spectral,
            grad_plus,
            div_minus,
            pml_node,
            pml_stag,
            rho0_stag,
            c2,
            absorb_nabla1,
            absorb_nabla2,
            state_equation,
            smoother,
        })
    }

    pub fn state_equation(&self) -> StateEquation {
        self.state_equation
    }

    pub fn num_sensors(&self) -> usize {
        self.stencils.len()
    }

    /// Applies the source smoother (identity when smoothing is off).
    pub fn smooth(&self, image: &ArrayD<f64>) -> ArrayD<f64> {
        match &self.smoother {
            Some(s) => s.apply(image),
            None => image.clone(),
        }
    }

    /// Initial state for an interior image: `p = ρ c0² = S x`, and the
    /// velocity set half a step back so the first update centres `u(0) = 0`.
    pub fn initial_state(&self, image: &ArrayD<f64>) -> Result<AcousticState> {
        self.grid.check_interior(image)?;
        let p = self.grid.embed(&self.smooth(image))?;
        let d = self.grid.ndim() as f64;
        let rho_each = Zip::from(&p).and(&self.c2).map_collect(|&p, &c2| p / (d * c2));
        let spec = self.spectral.forward(&p);
        let half = self.grid.dt / 2.0;
        let u = (0..self.grid.ndim())
            .map(|ax| {
                let mut g = self.spectral.apply_to_spectrum(&spec, &self.grad_plus[ax]);
                Zip::from(&mut g)
                    .and(&self.rho0_stag[ax])
                    .for_each(|g, &r| *g *= half / r);
                g
            })
            .collect();
        Ok(AcousticState {
            p,
            u,
            rho: vec![rho_each; self.grid.ndim()],
        })
    }

    /// `u_i ← pml(pml·u_i − dt/ρ0 ∂i⁺ p)` for every axis.
    pub(crate) fn momentum(&self, st: &mut AcousticState) {
        let spec = self.spectral.forward(&st.p);
        let dt = self.grid.dt;
        for ax in 0..self.grid.ndim() {
            let g = self.spectral.apply_to_spectrum(&spec, &self.grad_plus[ax]);
            let u = &mut st.u[ax];
            match &self.pml_stag {
                Some(pml) => Zip::from(u)
                    .and(&g)
                    .and(&self.rho0_stag[ax])
                    .and(&pml[ax])
                    .for_each(|u, &g, &r, &w| *u = w * (w * *u - dt / r * g)),
                None => Zip::from(u)
                    .and(&g)
                    .and(&self.rho0_stag[ax])
                    .for_each(|u, &g, &r| *u -= dt / r * g),
            }
        }
    }

    /// `ρ_i ← pml(pml·ρ_i − dt ρ0 ∂i⁻ u_i)`; returns the total divergence.
    pub(crate) fn continuity(&self, st: &mut AcousticState, scale: f64) -> ArrayD<f64> {
        let dt = self.grid.dt * scale;
        let mut div = self.grid.zeros();
        for ax in 0..self.grid.ndim() {
            let spec = self.spectral.forward(&st.u[ax]);
            let du = self.spectral.apply_to_spectrum(&spec, &self.div_minus[ax]);
            let rho = &mut st.rho[ax];
            match &self.pml_node {
                Some(pml) if scale == 1.0 => Zip::from(rho)
                    .and(&du)
                    .and(&self.medium.rho0)
                    .and(&pml[ax])
                    .for_each(|r, &du, &r0, &w| *r = w * (w * *r - dt * r0 * du)),
                _ => Zip::from(rho)
                    .and(&du)
                    .and(&self.medium.rho0)
                    .for_each(|r, &du, &r0| *r -= dt * r0 * du),
            }
            div += &du;
        }
        div
    }

    /// Forward equation of state. `rate` is `∂ρ/∂t`, `tau_sign` flips the
    /// absorption term (time reversal).
    pub(crate) fn pressure(&self, st: &mut AcousticState, rate: &ArrayD<f64>, tau_sign: f64) {
        let rho = st.total_density();
        match self.state_equation {
            StateEquation::Lossless => {
                st.p = rho * &self.c2;
            }
            StateEquation::PowerLaw => {
                let absorb = self.spectral.filter(rate, &self.absorb_nabla1);
                let disperse = self.spectral.filter(&rho, &self.absorb_nabla2);
                let m = &self.medium;
                let mut p = Zip::from(&rho)
                    .and(&absorb)
                    .and(&disperse)
                    .and(&m.tau)
                    .and(&m.eta)
                    .map_collect(|&r, &a, &dsp, &tau, &eta| r - (tau_sign * tau * a + eta * dsp));
                p *= &self.c2;
                st.p = p;
            }
        }
    }

    /// Adjoint equation of state:
    /// `p* = ρ0 {1 − ∂t L_a τ − L_d η} (c0²/ρ0) ρ*`, coefficients inside.
    pub(crate) fn adjoint_pressure(&self, st: &mut AcousticState, rate: &ArrayD<f64>) {
        let rho = st.total_density();
        match self.state_equation {
            StateEquation::Lossless => {
                st.p = rho * &self.c2;
            }
            StateEquation::PowerLaw => {
                let m = &self.medium;
                let tau_rate = Zip::from(rate)
                    .and(&m.tau)
                    .and(&self.c2)
                    .and(&m.rho0)
                    .map_collect(|&q, &t, &c2, &r0| t * c2 / r0 * q);
                let eta_rho = Zip::from(&rho)
                    .and(&m.eta)
                    .and(&self.c2)
                    .and(&m.rho0)
                    .map_collect(|&q, &e, &c2, &r0| e * c2 / r0 * q);
                let absorb = self.spectral.filter(&tau_rate, &self.absorb_nabla1);
                let disperse = self.spectral.filter(&eta_rho, &self.absorb_nabla2);
                st.p = Zip::from(&rho)
                    .and(&absorb)
                    .and(&disperse)
                    .and(&self.c2)
                    .and(&m.rho0)
                    .map_collect(|&r, &a, &dsp, &c2, &r0| c2 * r - r0 * (a + dsp));
            }
        }
    }

    /// One forward step: momentum, continuity, equation of state.
    pub fn step(&self, st: &mut AcousticState, n: usize) -> Result<()> {
        self.momentum(st);
        let div = self.continuity(st, 1.0);
        let rate = Zip::from(&div).and(&self.medium.rho0).map_collect(|&d, &r| -r * d);
        self.pressure(st, &rate, 1.0);
        if !st.is_finite() {
            return Err(PatError::Divergence { step: n });
        }
        Ok(())
    }
}
