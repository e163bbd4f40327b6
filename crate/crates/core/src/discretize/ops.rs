use crate::error::{Error, Result};
use crate::integrand::{ConvexWeight, Density};
use crate::par::{compensated_sum, Exec};

use super::field::{GridField, VectorField};
use super::grid::{Grid, NONE};

/// Forward differences; a component is zero when the forward neighbour is
/// not active (zero flux through the boundary).
pub fn grad_into(grid: &Grid, w: &[f64], out: &mut [f64]) {
    let m = grid.dim();
    let inv_h = 1.0 / grid.spacing();
    for c in 0..grid.len() {
        for d in 0..m {
            let n = grid.next(c, d);
            out[c * m + d] = if n == NONE { 0.0 } else { (w[n] - w[c]) * inv_h };
        }
    }
}

/// Negative adjoint of [`grad_into`].
pub fn div_into(grid: &Grid, p: &[f64], out: &mut [f64]) {
    let m = grid.dim();
    let inv_h = 1.0 / grid.spacing();
    for c in 0..grid.len() {
        let mut s = 0.0;
        for d in 0..m {
            if grid.next(c, d) != NONE {
                s += p[c * m + d];
            }
            let b = grid.prev(c, d);
            if b != NONE {
                s -= p[b * m + d];
            }
        }
        out[c] = s * inv_h;
    }
}

pub fn grad(w: &GridField) -> VectorField {
    let grid = w.grid();
    let mut out = vec![0.0; grid.len() * grid.dim()];
    grad_into(grid, w.values(), &mut out);
    VectorField::new(grid.clone(), out).expect("length matches")
}

pub fn div(p: &VectorField) -> GridField {
    let grid = p.grid();
    let mut out = vec![0.0; grid.len()];
    div_into(grid, p.values(), &mut out);
    GridField::new(grid.clone(), out).expect("finite input gives finite output")
}

/// Per-cell `Phi(grad w)`.
pub fn cell_densities<D: Density + ?Sized>(w: &GridField, phi: &D, exec: Exec) -> Result<Vec<f64>> {
    let grid = w.grid();
    let m = grid.dim();
    if phi.dim() != m {
        return Err(Error::input(format!(
            "integrand dimension {} does not match the grid dimension {m}",
            phi.dim()
        )));
    }
    let g = grad(w);
    let g = g.values();
    Ok(exec.map(grid.len(), |c| phi.value(&g[c * m..(c + 1) * m])))
}

/// `sum Phi(grad w) h^m`.
pub fn gradient_term<D: Density + ?Sized>(w: &GridField, phi: &D) -> Result<f64> {
    gradient_term_with(w, phi, Exec::default())
}

pub fn gradient_term_with<D: Density + ?Sized>(w: &GridField, phi: &D, exec: Exec) -> Result<f64> {
    let cells = cell_densities(w, phi, exec)?;
    Ok(compensated_sum(cells) * w.grid().cell_measure())
}

/// `lambda sum Phi(grad w) h^m + 1/2 sum (w - f)^2 h^m`.
pub fn energy<D: Density + ?Sized>(w: &GridField, f: &GridField, phi: &D, lambda: f64) -> Result<f64> {
    energy_with(w, f, phi, lambda, Exec::default())
}

pub fn energy_with<D: Density + ?Sized>(
    w: &GridField,
    f: &GridField,
    phi: &D,
    lambda: f64,
    exec: Exec,
) -> Result<f64> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::input(format!("lambda must be positive, got {lambda}")));
    }
    w.same_grid(f)?;
    let reg = gradient_term_with(w, phi, exec)?;
    let fid = compensated_sum(w.values().iter().zip(f.values()).map(|(a, b)| (a - b).powi(2)))
        * w.grid().cell_measure();
    Ok(lambda * reg + 0.5 * fid)
}

/// `sum Psi(Phi(grad w)) h^m`.
pub fn weighted_gradient_integral<D: Density + ?Sized>(
    w: &GridField,
    phi: &D,
    psi: &ConvexWeight,
) -> Result<f64> {
    let cells = cell_densities(w, phi, Exec::default())?;
    Ok(compensated_sum(cells.into_iter().map(|v| psi.eval(v))) * w.grid().cell_measure())
}

/// Discrete `W^{2,2}` seminorm monitor `(sum |D^2 w|^2 h^m)^{1/2}` from
/// second differences of the forward gradient.
pub fn second_difference_norm(w: &GridField) -> f64 {
    let grid = w.grid();
    let m = grid.dim();
    let g = grad(w);
    let inv_h = 1.0 / grid.spacing();
    let mut acc = Vec::with_capacity(grid.len() * m * m);
    for c in 0..grid.len() {
        for d in 0..m {
            for e in 0..m {
                let n = grid.next(c, e);
                if n != NONE {
                    let v = (g.at(n)[d] - g.at(c)[d]) * inv_h;
                    acc.push(v * v);
                }
            }
        }
    }
    (compensated_sum(acc) * grid.cell_measure()).sqrt()
}
