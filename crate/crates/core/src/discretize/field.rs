use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::par::compensated_sum;

use super::grid::Grid;

/// Scalar values on the active cells of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl GridField {
    pub fn new(grid: Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::input(format!(
                "field has {} values but the grid has {} cells",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::input("field values must be finite"));
        }
        Ok(GridField { grid, values })
    }

    pub fn from_fn<F: Fn(Point) -> f64>(grid: &Arc<Grid>, f: F) -> Result<Self> {
        let values = (0..grid.len()).map(|c| f(grid.center(c))).collect();
        GridField::new(grid.clone(), values)
    }

    pub fn constant(grid: &Arc<Grid>, c: f64) -> Result<Self> {
        GridField::new(grid.clone(), vec![c; grid.len()])
    }

    pub fn zeros(grid: &Arc<Grid>) -> Self {
        GridField {
            grid: grid.clone(),
            values: vec![0.0; grid.len()],
        }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Same grid, new values.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        GridField::new(self.grid.clone(), values)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn same_grid(&self, other: &GridField) -> Result<()> {
        if Arc::ptr_eq(&self.grid, &other.grid) || self.grid == other.grid {
            Ok(())
        } else {
            Err(Error::input("fields live on different grids"))
        }
    }

    /// `sum w h^m`.
    pub fn mass(&self) -> f64 {
        compensated_sum(self.values.iter().copied()) * self.grid.cell_measure()
    }

    pub fn mean(&self) -> f64 {
        compensated_sum(self.values.iter().copied()) / self.len() as f64
    }

    /// Discrete `L^2` norm `(sum w^2 h^m)^{1/2}`.
    pub fn l2_norm(&self) -> f64 {
        (compensated_sum(self.values.iter().map(|v| v * v)) * self.grid.cell_measure()).sqrt()
    }

    pub fn l2_distance(&self, other: &GridField) -> Result<f64> {
        self.same_grid(other)?;
        let s = compensated_sum(self.values.iter().zip(&other.values).map(|(a, b)| (a - b).powi(2)));
        Ok((s * self.grid.cell_measure()).sqrt())
    }

    pub fn max_abs_difference(&self, other: &GridField) -> Result<f64> {
        self.same_grid(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// One `m`-vector per active cell, stored contiguously.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl VectorField {
    pub fn new(grid: Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() * grid.dim() {
            return Err(Error::input("vector field length does not match the grid"));
        }
        Ok(VectorField { grid, values })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn at(&self, c: usize) -> &[f64] {
        let m = self.grid.dim();
        &self.values[c * m..(c + 1) * m]
    }

    /// Plain Euclidean inner product of the stacked components.
    pub fn dot(&self, other: &VectorField) -> f64 {
        compensated_sum(self.values.iter().zip(&other.values).map(|(a, b)| a * b))
    }
}
