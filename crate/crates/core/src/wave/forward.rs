use std::sync::Arc;

use ndarray::ArrayD;

use super::{AdjointOperator, Propagator, WaveOptions};
use crate::error::Result;
use crate::grid::Grid;
use crate::medium::Medium;
use crate::operator::LinearOperator;
use crate::sensors::{sample_all, SensorArray, SensorData};

/// The discrete forward map `H`: initial pressure image to sensor data.
#[derive(Clone, Debug)]
pub struct ForwardOperator {
    prop: Arc<Propagator>,
}

impl ForwardOperator {
    pub fn new(grid: Grid, medium: Medium, sensors: SensorArray, options: WaveOptions) -> Result<Self> {
        Ok(Self {
            prop: Arc::new(Propagator::new(grid, medium, sensors, options)?),
        })
    }

    pub fn from_propagator(prop: Arc<Propagator>) -> Self {
        Self { prop }
    }

    pub fn propagator(&self) -> &Arc<Propagator> {
        &self.prop
    }

    pub fn grid(&self) -> &Grid {
        &self.prop.grid
    }

    /// The adjoint sharing this operator's tables.
    pub fn adjoint_operator(&self) -> AdjointOperator {
        AdjointOperator::from_propagator(self.prop.clone())
    }

    pub fn forward(&self, image: &ArrayD<f64>) -> Result<SensorData> {
        let prop = &*self.prop;
        let grid = &prop.grid;
        let mut data = SensorData::zeros(prop.num_sensors(), grid.nt, grid.dt);
        let mut st = prop.initial_state(image)?;
        let record = |p: &ArrayD<f64>, n: usize, data: &mut SensorData| {
            for (s, v) in sample_all(&prop.stencils, p).into_iter().enumerate() {
                data.samples[[s, n]] = v;
            }
        };
        record(&st.p, 0, &mut data);
        for n in 1..grid.nt {
            prop.step(&mut st, n)?;
            record(&st.p, n, &mut data);
        }
        Ok(data)
    }
}

impl LinearOperator for ForwardOperator {
    fn image_dims(&self) -> Vec<usize> {
        self.prop.grid.interior_dims()
    }

    fn data_shape(&self) -> (usize, usize) {
        (self.prop.num_sensors(), self.prop.grid.nt)
    }

    fn apply(&self, x: &ArrayD<f64>) -> Result<SensorData> {
        self.forward(x)
    }

    fn apply_adjoint(&self, r: &SensorData) -> Result<ArrayD<f64>> {
        self.adjoint_operator().adjoint(r)
    }

    fn fingerprint(&self) -> Option<String> {
        let p = &*self.prop;
        Some(crate::operator::fingerprint(&(&p.grid, &p.medium, &p.sensors, &p.options)))
    }
}
