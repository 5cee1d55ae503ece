//! Point detectors and the time series they record.

use std::f64::consts::PI;

use ndarray::{Array2, ArrayD};
use serde::{Deserialize, Serialize};

use crate::error::{PatError, Result};
use crate::grid::Grid;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Interp {
    #[default]
    Linear,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensorArray {
    /// Detector coordinates in meters; each entry has one value per axis.
    pub positions: Vec<Vec<f64>>,
    #[serde(default)]
    pub interp: Interp,
}

impl SensorArray {
    pub fn new(positions: Vec<Vec<f64>>) -> Self {
        Self {
            positions,
            interp: Interp::Linear,
        }
    }

    /// `count` detectors spaced evenly on the arc of a circle in the (x, y)
    /// plane, from `start` to `start + span` radians, endpoints included.
    pub fn arc(count: usize, radius: f64, start: f64, span: f64) -> Self {
        let step = if count > 1 { span / (count - 1) as f64 } else { 0.0 };
        Self::new(
            (0..count)
                .map(|i| {
                    let a = start + step * i as f64;
                    vec![radius * a.cos(), radius * a.sin()]
                })
                .collect(),
        )
    }

    /// Detectors on the half circle facing negative x.
    pub fn left_half_circle(count: usize, radius: f64) -> Self {
        Self::arc(count, radius, PI / 2.0, PI)
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Linear-interpolation stencils of every detector on `grid`.
    pub fn stencils(&self, grid: &Grid) -> Result<Vec<Stencil>> {
        let d = grid.ndim();
        let lo = grid.pml_thickness as f64;
        self.positions
            .iter()
            .enumerate()
            .map(|(s, pos)| {
                if pos.len() != d {
                    return Err(PatError::InvalidSensors(format!(
                        "sensor {s} has {} coordinates on a {d}-D grid",
                        pos.len()
                    )));
                }
                let mut base = vec![0usize; d];
                let mut frac = vec![0.0; d];
                for ax in 0..d {
                    let f = grid.index_of(ax, pos[ax]);
                    let hi = (grid.dims[ax] - grid.pml_thickness - 1) as f64;
                    if !(f >= lo && f <= hi) || !f.is_finite() {
                        return Err(PatError::InvalidSensors(format!(
                            "sensor {s} at {pos:?} lies outside the PML-free interior"
                        )));
                    }
                    let i0 = (f.floor() as usize).min(grid.dims[ax] - grid.pml_thickness - 2);
                    base[ax] = i0;
                    frac[ax] = f - i0 as f64;
                }
                let mut nodes = Vec::with_capacity(1 << d);
                for corner in 0..(1usize << d) {
                    let mut flat = 0usize;
                    let mut w = 1.0;
                    for ax in 0..d {
                        let bit = (corner >> ax) & 1;
                        let i = base[ax] + bit;
                        flat = flat * grid.dims[ax] + i;
                        w *= if bit == 1 { frac[ax] } else { 1.0 - frac[ax] };
                    }
                    if w != 0.0 {
                        nodes.push((flat, w));
                    }
                }
                Ok(Stencil { nodes })
            })
            .collect()
    }
}

/// Flat node indices and weights of one detector's interpolation stencil.
#[derive(Clone, Debug, PartialEq)]
pub struct Stencil {
    pub nodes: Vec<(usize, f64)>,
}

impl Stencil {
    pub fn sample(&self, field: &[f64]) -> f64 {
        self.nodes.iter().map(|&(i, w)| w * field[i]).sum()
    }

    pub fn spread(&self, value: f64, field: &mut [f64]) {
        for &(i, w) in &self.nodes {
            field[i] += w * value;
        }
    }
}

/// Samples a full-grid field at every stencil.
pub fn sample_all(stencils: &[Stencil], field: &ArrayD<f64>) -> Vec<f64> {
    let data = field.as_slice().expect("standard layout");
    stencils.iter().map(|s| s.sample(data)).collect()
}

/// Transpose of [`sample_all`]: accumulates detector values onto the grid.
pub fn spread_all(stencils: &[Stencil], values: impl Iterator<Item = f64>, field: &mut ArrayD<f64>) {
    let data = field.as_slice_mut().expect("standard layout");
    for (s, v) in stencils.iter().zip(values) {
        s.spread(v, data);
    }
}

/// Pressure time series recorded at the detectors, one row per sensor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensorData {
    pub samples: Array2<f64>,
    pub dt: f64,
}

impl SensorData {
    pub fn zeros(num_sensors: usize, nt: usize, dt: f64) -> Self {
        Self {
            samples: Array2::zeros((num_sensors, nt)),
            dt,
        }
    }

    pub fn num_sensors(&self) -> usize {
        self.samples.nrows()
    }

    pub fn nt(&self) -> usize {
        self.samples.ncols()
    }

    pub fn norm(&self) -> f64 {
        self.samples.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &SensorData) -> f64 {
        self.samples
            .iter()
            .zip(other.samples.iter())
            .map(|(a, b)| a * b)
            .sum()
    }

    pub fn is_finite(&self) -> bool {
        self.samples.iter().all(|v| v.is_finite())
    }

    pub fn check_against(&self, sensors: &SensorArray, grid: &Grid) -> Result<()> {
        if self.num_sensors() != sensors.len() || self.nt() != grid.nt {
            return Err(PatError::ShapeMismatch(format!(
                "data is {}x{}, geometry expects {}x{}",
                self.num_sensors(),
                self.nt(),
                sensors.len(),
                grid.nt
            )));
        }
        Ok(())
    }
}
