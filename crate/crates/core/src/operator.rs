//! The linear-operator interface the optimizers work against.

use ndarray::{Array2, ArrayD, IxDyn};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{PatError, Result};
use crate::sensors::SensorData;

/// A linear map from images to sensor data together with its adjoint.
pub trait LinearOperator {
    fn image_dims(&self) -> Vec<usize>;

    /// `(num_sensors, nt)` of the data space.
    fn data_shape(&self) -> (usize, usize);

    fn apply(&self, x: &ArrayD<f64>) -> Result<SensorData>;

    fn apply_adjoint(&self, r: &SensorData) -> Result<ArrayD<f64>>;

    /// Stable identity of the operator, used to key cached constants.
    fn fingerprint(&self) -> Option<String> {
        None
    }
}

/// Hex SHA-256 of the JSON encoding of `value`.
pub fn fingerprint<T: Serialize>(value: &T) -> String {
    let json = serde_json::to_vec(value).expect("serialisable");
    let digest = Sha256::digest(&json);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// A dense matrix acting on flattened images; data is a single column.
#[derive(Clone, Debug)]
pub struct MatrixOperator {
    pub matrix: Array2<f64>,
    pub image_dims: Vec<usize>,
}

impl MatrixOperator {
    pub fn new(matrix: Array2<f64>, image_dims: Vec<usize>) -> Result<Self> {
        if image_dims.iter().product::<usize>() != matrix.ncols() {
            return Err(PatError::ShapeMismatch(format!(
                "matrix has {} columns, image dims {:?}",
                matrix.ncols(),
                image_dims
            )));
        }
        Ok(Self { matrix, image_dims })
    }

    pub fn identity(image_dims: Vec<usize>) -> Self {
        let n = image_dims.iter().product();
        Self {
            matrix: Array2::eye(n),
            image_dims,
        }
    }
}

impl LinearOperator for MatrixOperator {
    fn image_dims(&self) -> Vec<usize> {
        self.image_dims.clone()
    }

    fn data_shape(&self) -> (usize, usize) {
        (self.matrix.nrows(), 1)
    }

    fn apply(&self, x: &ArrayD<f64>) -> Result<SensorData> {
        let flat = x
            .view()
            .into_shape_with_order(self.matrix.ncols())
            .map_err(|e| PatError::ShapeMismatch(e.to_string()))?;
        let y = self.matrix.dot(&flat);
        Ok(SensorData {
            samples: y.into_shape_with_order((self.matrix.nrows(), 1)).unwrap(),
            dt: 1.0,
        })
    }

    fn apply_adjoint(&self, r: &SensorData) -> Result<ArrayD<f64>> {
        let col = r.samples.column(0);
        let g = self.matrix.t().dot(&col);
        Ok(g.into_shape_with_order(IxDyn(&self.image_dims)).unwrap())
    }
}
