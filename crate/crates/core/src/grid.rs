//! Uniform Cartesian grids with a perfectly-matched-layer halo.
//!
//! Nodes are cell-centred: node `i` on an axis with `n` points and spacing
//! `dx` sits at `(i + 0.5 - n/2) * dx`, so the grid is centred on the origin
//! and a grid with half the points and twice the spacing has its nodes at the
//! centres of 2^d blocks of the finer grid. Maps are stored row-major with
//! axis order (x, y[, z]) and include the halo; images cover the interior only.

use ndarray::{ArrayD, IxDyn, Slice, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{PatError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    /// Point counts per axis, halo included.
    pub dims: Vec<usize>,
    /// Meters per axis.
    pub spacing: Vec<f64>,
    /// PML points on each side of every axis.
    pub pml_thickness: usize,
    /// PML absorption in nepers per grid point.
    pub pml_alpha_max: f64,
    pub dt: f64,
    pub nt: usize,
    /// Reference sound speed for the k-space correction.
    pub c_ref: f64,
}

impl Grid {
    pub fn new(
        dims: Vec<usize>,
        spacing: Vec<f64>,
        pml_thickness: usize,
        pml_alpha_max: f64,
        dt: f64,
        nt: usize,
        c_ref: f64,
    ) -> Result<Self> {
        let grid = Self {
            dims,
            spacing,
            pml_thickness,
            pml_alpha_max,
            dt,
            nt,
            c_ref,
        };
        grid.validate()?;
        Ok(grid)
    }

    /// Time step from the CFL rule `dt = cfl * min(spacing) / c_max`.
    pub fn cfl_dt(spacing: &[f64], c_max: f64, cfl: f64) -> f64 {
        let h = spacing.iter().cloned().fold(f64::INFINITY, f64::min);
        cfl * h / c_max
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(PatError::InvalidGrid(m));
        if !(2..=3).contains(&self.dims.len()) {
            return bad(format!("expected 2 or 3 axes, got {}", self.dims.len()));
        }
        if self.spacing.len() != self.dims.len() {
            return bad("spacing and dims differ in length".into());
        }
        if let Some(n) = self.dims.iter().find(|&&n| n < 8) {
            return bad(format!("every axis needs at least 8 points, got {n}"));
        }
        if self.spacing.iter().any(|&h| !(h > 0.0 && h.is_finite())) {
            return bad("spacing must be positive".into());
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad("dt must be positive".into());
        }
        if self.nt < 1 {
            return bad("nt must be at least 1".into());
        }
        let min_dim = *self.dims.iter().min().unwrap();
        if 2 * self.pml_thickness >= min_dim {
            return bad(format!(
                "pml thickness {} must be below half the smallest axis ({min_dim})",
                self.pml_thickness
            ));
        }
        if !(self.pml_alpha_max >= 0.0) {
            return bad("pml_alpha_max must be non-negative".into());
        }
        if !(self.c_ref > 0.0) {
            return bad("c_ref must be positive".into());
        }
        Ok(())
    }

    pub fn ndim(&self) -> usize {
        self.dims.len()
    }

    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn interior_dims(&self) -> Vec<usize> {
        self.dims.iter().map(|&n| n - 2 * self.pml_thickness).collect()
    }

    /// Physical coordinate of node `i` along `axis`.
    pub fn coord(&self, axis: usize, i: usize) -> f64 {
        (i as f64 + 0.5 - self.dims[axis] as f64 / 2.0) * self.spacing[axis]
    }

    /// Continuous node index of a physical coordinate along `axis`.
    pub fn index_of(&self, axis: usize, x: f64) -> f64 {
        x / self.spacing[axis] + self.dims[axis] as f64 / 2.0 - 0.5
    }

    /// Half-width of the interior along `axis` in meters.
    pub fn interior_half_extent(&self, axis: usize) -> f64 {
        (self.dims[axis] - 2 * self.pml_thickness) as f64 * self.spacing[axis] / 2.0
    }

    /// Highest frequency (Hz) resolved along each axis for sound speed `c_min`.
    pub fn max_frequency(&self, c_min: f64) -> Vec<f64> {
        self.spacing.iter().map(|h| c_min / (2.0 * h)).collect()
    }

    pub fn zeros(&self) -> ArrayD<f64> {
        ArrayD::zeros(IxDyn(&self.dims))
    }

    pub fn interior_zeros(&self) -> ArrayD<f64> {
        ArrayD::zeros(IxDyn(&self.interior_dims()))
    }

    /// Zero-pads an interior image out to the full grid.
    pub fn embed(&self, image: &ArrayD<f64>) -> Result<ArrayD<f64>> {
        self.check_interior(image)?;
        let mut full = self.zeros();
        self.interior_view_mut(&mut full).assign(image);
        Ok(full)
    }

    /// Copies the interior block out of a full-grid map.
    pub fn extract(&self, full: &ArrayD<f64>) -> Result<ArrayD<f64>> {
        if full.shape() != self.dims.as_slice() {
            return Err(PatError::ShapeMismatch(format!(
                "map shape {:?} does not match grid {:?}",
                full.shape(),
                self.dims
            )));
        }
        let mut view = full.view();
        for ax in 0..self.ndim() {
            let n = self.dims[ax];
            view.slice_axis_inplace(
                Axis(ax),
                Slice::from(self.pml_thickness..n - self.pml_thickness),
            );
        }
        Ok(view.to_owned())
    }

    fn interior_view_mut<'a>(&self, full: &'a mut ArrayD<f64>) -> ndarray::ArrayViewMutD<'a, f64> {
        let mut view = full.view_mut();
        for ax in 0..self.ndim() {
            let n = self.dims[ax];
            view.slice_axis_inplace(
                Axis(ax),
                Slice::from(self.pml_thickness..n - self.pml_thickness),
            );
        }
        view
    }

    pub fn check_interior(&self, image: &ArrayD<f64>) -> Result<()> {
        if image.shape() != self.interior_dims().as_slice() {
            return Err(PatError::ShapeMismatch(format!(
                "image shape {:?} does not match interior {:?}",
                image.shape(),
                self.interior_dims()
            )));
        }
        Ok(())
    }

    /// The next coarser level: half the points, half the PML, twice the
    /// spacing and time step, half the time steps.
    pub fn coarsen(&self) -> Result<Grid> {
        if self.dims.iter().any(|n| n % 2 != 0) {
            return Err(PatError::InvalidGrid(format!(
                "cannot coarsen odd dims {:?}",
                self.dims
            )));
        }
        if self.pml_thickness % 2 != 0 {
            return Err(PatError::InvalidGrid(format!(
                "cannot halve odd PML thickness {}",
                self.pml_thickness
            )));
        }
        if self.nt % 2 != 0 {
            return Err(PatError::InvalidGrid(format!("cannot halve odd nt {}", self.nt)));
        }
        Grid::new(
            self.dims.iter().map(|n| n / 2).collect(),
            self.spacing.iter().map(|h| h * 2.0).collect(),
            self.pml_thickness / 2,
            self.pml_alpha_max,
            self.dt * 2.0,
            self.nt / 2,
            self.c_ref,
        )
    }

    /// True when both grids image the same physical interior.
    pub fn same_extent(&self, other: &Grid) -> bool {
        self.ndim() == other.ndim()
            && (0..self.ndim()).all(|ax| {
                let a = self.interior_half_extent(ax);
                let b = other.interior_half_extent(ax);
                (a - b).abs() <= 1e-9 * a.abs().max(b.abs())
            })
    }
}
