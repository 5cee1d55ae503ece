//! Photoacoustic tomography reconstruction with a lossy k-space wave model,
//! its adjoint, TV-regularised proximal-gradient solvers and a two-level
//! multigrid acceleration.

pub mod config;
pub mod error;
pub mod evaluation;
pub mod experiment;
pub mod field_io;
pub mod grid;
pub mod harness;
pub mod measurement;
pub mod multigrid;
pub mod medium;
pub mod operator;
pub mod optim;
pub mod sensors;
pub mod spectral;
pub mod wave;

pub use error::{PatError, Result};
pub use grid::Grid;
pub use medium::Medium;
pub use operator::LinearOperator;
pub use sensors::{SensorArray, SensorData};
pub use wave::{AdjointOperator, ForwardOperator, WaveOptions};
