//! Masked finite-difference grids, fields, the adjoint gradient/divergence
//! pair and the discrete energies.

mod field;
mod grid;
pub mod io;
mod ops;

pub use field::{GridField, VectorField};
pub use grid::{Grid, NONE};
pub use ops::{
    cell_densities, div, div_into, energy, energy_with, grad, grad_into, gradient_term,
    gradient_term_with, second_difference_norm, weighted_gradient_integral,
};
