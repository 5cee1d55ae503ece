//! Acoustic media and power-law loss coefficients.

use std::f64::consts::{E, PI};

use ndarray::{ArrayD, IxDyn, Zip};
use serde::{Deserialize, Serialize};

use crate::error::{PatError, Result};
use crate::grid::Grid;

/// Converts an absorption coefficient in dB·MHz^-y·cm^-1 to
/// nepers·(rad/s)^-y·m^-1.
pub fn db_to_neper(alpha_db: f64, y: f64) -> f64 {
    100.0 * alpha_db * (1e-6 / (2.0 * PI)).powf(y) / (20.0 * E.log10())
}

/// Spatial maps of the acoustic properties on a full grid (halo included).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Medium {
    /// Sound speed, m/s.
    pub c0: ArrayD<f64>,
    /// Ambient density, kg/m³.
    pub rho0: ArrayD<f64>,
    /// Absorption coefficient, dB·MHz^-y·cm^-1.
    pub alpha0: ArrayD<f64>,
    /// Power-law exponent.
    pub y: f64,
    /// Absorption proportionality map.
    pub tau: ArrayD<f64>,
    /// Dispersion proportionality map.
    pub eta: ArrayD<f64>,
}

impl Medium {
    /// Builds a medium and derives `tau` and `eta` from the other maps.
    pub fn new(c0: ArrayD<f64>, rho0: ArrayD<f64>, alpha0: ArrayD<f64>, y: f64) -> Result<Self> {
        let dims = c0.shape().to_vec();
        let medium = Medium {
            tau: ArrayD::zeros(IxDyn(&dims)),
            eta: ArrayD::zeros(IxDyn(&dims)),
            c0,
            rho0,
            alpha0,
            y,
        };
        medium.derive_loss_coefficients()
    }

    pub fn homogeneous(grid: &Grid, c0: f64, rho0: f64, alpha0: f64, y: f64) -> Result<Self> {
        let d = IxDyn(&grid.dims);
        Self::new(
            ArrayD::from_elem(d.clone(), c0),
            ArrayD::from_elem(d.clone(), rho0),
            ArrayD::from_elem(d, alpha0),
            y,
        )
    }

    /// Recomputes `tau = -2 α c^(y-1)` and `eta = 2 α c^y tan(πy/2)` pointwise,
    /// with `α` converted to SI units.
    pub fn derive_loss_coefficients(mut self) -> Result<Self> {
        self.check()?;
        let y = self.y;
        let tan = (PI * y / 2.0).tan();
        Zip::from(&mut self.tau)
            .and(&mut self.eta)
            .and(&self.alpha0)
            .and(&self.c0)
            .for_each(|tau, eta, &a_db, &c| {
                let a = db_to_neper(a_db, y);
                *tau = -2.0 * a * c.powf(y - 1.0);
                *eta = 2.0 * a * c.powf(y) * tan;
            });
        Ok(self)
    }

    fn check(&self) -> Result<()> {
        let dims = self.c0.shape();
        if self.rho0.shape() != dims || self.alpha0.shape() != dims {
            return Err(PatError::InvalidMedium("maps differ in shape".into()));
        }
        if !(self.y > 1.0 && self.y < 3.0) {
            return Err(PatError::InvalidMedium(format!(
                "power-law exponent must satisfy 1 < y < 3, got {}",
                self.y
            )));
        }
        if self.c0.iter().any(|&c| !(c > 0.0 && c.is_finite())) {
            return Err(PatError::InvalidMedium("sound speed must be positive".into()));
        }
        if self.rho0.iter().any(|&r| !(r > 0.0 && r.is_finite())) {
            return Err(PatError::InvalidMedium("density must be positive".into()));
        }
        if self.alpha0.iter().any(|&a| !(a >= 0.0 && a.is_finite())) {
            return Err(PatError::InvalidMedium("absorption must be non-negative".into()));
        }
        Ok(())
    }

    pub fn validate_for(&self, grid: &Grid) -> Result<()> {
        self.check()?;
        if self.c0.shape() != grid.dims.as_slice() {
            return Err(PatError::InvalidMedium(format!(
                "maps have shape {:?}, grid is {:?}",
                self.c0.shape(),
                grid.dims
            )));
        }
        Ok(())
    }

    pub fn is_lossless(&self) -> bool {
        self.alpha0.iter().all(|&a| a == 0.0)
    }

    pub fn c_max(&self) -> f64 {
        self.c0.iter().cloned().fold(f64::MIN, f64::max)
    }

    pub fn c_min(&self) -> f64 {
        self.c0.iter().cloned().fold(f64::MAX, f64::min)
    }

    /// Averages each 2^d block of every map; used to build a coarse level.
    pub fn coarsen(&self) -> Result<Self> {
        let avg = |m: &ArrayD<f64>| -> Result<ArrayD<f64>> {
            let shape = m.shape();
            if shape.iter().any(|n| n % 2 != 0) {
                return Err(PatError::InvalidMedium("cannot coarsen odd-sized maps".into()));
            }
            let coarse: Vec<usize> = shape.iter().map(|n| n / 2).collect();
            let d = shape.len();
            let w = 1.0 / (1usize << d) as f64;
            Ok(ArrayD::from_shape_fn(IxDyn(&coarse), |ix| {
                let mut acc = 0.0;
                let mut fine = vec![0usize; d];
                for corner in 0..(1usize << d) {
                    for ax in 0..d {
                        fine[ax] = 2 * ix[ax] + ((corner >> ax) & 1);
                    }
                    acc += m[IxDyn(&fine)];
                }
                acc * w
            }))
        };
        Medium::new(avg(&self.c0)?, avg(&self.rho0)?, avg(&self.alpha0)?, self.y)
    }
}
