use std::sync::Arc;

use ndarray::{ArrayD, Zip};

use super::{AcousticState, Propagator};
use crate::error::{PatError, Result};
use crate::sensors::{spread_all, SensorData};

/// The adjoint `H*`: sensor data to an image, via the time-reversed adjoint
/// system with the data injected as a mass source.
#[derive(Clone, Debug)]
pub struct AdjointOperator {
    prop: Arc<Propagator>,
}

impl AdjointOperator {
    pub fn from_propagator(prop: Arc<Propagator>) -> Self {
        Self { prop }
    }

    pub fn propagator(&self) -> &Arc<Propagator> {
        &self.prop
    }

    pub fn adjoint(&self, residual: &SensorData) -> Result<ArrayD<f64>> {
        let prop = &*self.prop;
        let grid = &prop.grid;
        residual.check_against(&prop.sensors, grid)?;
        let d = grid.ndim() as f64;
        let dt = grid.dt;
        let rho0 = &prop.medium.rho0;
        let source = |n: usize| {
            let mut s = grid.zeros();
            spread_all(&prop.stencils, residual.samples.column(n).iter().cloned(), &mut s);
            s
        };
        let mut st = AcousticState::zeros(grid);
        for n in (1..grid.nt).rev() {
            let src = source(n);
            let div = prop.continuity(&mut st, 1.0);
            for rho in st.rho.iter_mut() {
                Zip::from(rho)
                    .and(&src)
                    .and(rho0)
                    .for_each(|r, &s, &r0| *r += r0 * s / d);
            }
            let rate = Zip::from(&div)
                .and(&src)
                .and(rho0)
                .map_collect(|&dv, &s, &r0| r0 * (s / dt - dv));
            prop.adjoint_pressure(&mut st, &rate);
            if !st.is_finite() {
                return Err(PatError::Divergence { step: n });
            }
            prop.momentum(&mut st);
        }
        // closing half step back to t = 0
        let src = source(0);
        prop.continuity(&mut st, 0.5);
        let mut total = st.total_density();
        Zip::from(&mut total)
            .and(&src)
            .and(rho0)
            .for_each(|t, &s, &r0| *t = *t / r0 + s);
        if !total.iter().all(|v| v.is_finite()) {
            return Err(PatError::Divergence { step: 0 });
        }
        Ok(prop.smooth(&grid.extract(&total)?))
    }
}
