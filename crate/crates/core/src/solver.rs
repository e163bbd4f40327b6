//! Damped Newton minimization of the mollified discrete energy and the
//! epsilon-continuation toward the linear-growth problem.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::discretize::{div_into, energy_with, grad_into, GridField};
use crate::error::{Error, Result};
use crate::integrand::{mollify, Integrand, MollifiedIntegrand, SmoothDensity, DEFAULT_QUADRATURE_ORDER};
use crate::linalg::{LinearSolver, NewtonSystem};
use crate::par::{compensated_sum, Exec};

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub solution: GridField,
    /// `E^{lambda,eps}_g(u)`.
    pub energy: f64,
    /// Euclidean norm of the discrete Euler-Lagrange defect.
    pub residual: f64,
    pub iterations: usize,
    pub backtracks: usize,
    pub epsilon: f64,
    /// Seconds.
    pub wall_time: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContinuationSchedule {
    pub eps0: f64,
    pub factor: f64,
    /// `K`: the schedule has `K + 1` stages `eps0 * factor^k`.
    pub steps: usize,
    pub tol: f64,
}

impl ContinuationSchedule {
    pub fn new(eps0: f64, factor: f64, steps: usize, tol: f64) -> Result<Self> {
        let s = ContinuationSchedule {
            eps0,
            factor,
            steps,
            tol,
        };
        s.validate()?;
        Ok(s)
    }

    /// `eps0 = h / 2`, factor 1/2, `K = 10`, tolerance `1e-10`.
    pub fn default_for_spacing(h: f64) -> Self {
        ContinuationSchedule {
            eps0: 0.5 * h,
            factor: 0.5,
            steps: 10,
            tol: 1e-10,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps0 > 0.0 && self.eps0.is_finite()) {
            return Err(Error::input("schedule eps0 must be positive"));
        }
        if !(self.factor > 0.0 && self.factor < 1.0) {
            return Err(Error::input("schedule factor must lie in (0, 1)"));
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Error::input("schedule tolerance must be positive"));
        }
        Ok(())
    }

    pub fn epsilons(&self) -> Vec<f64> {
        (0..=self.steps)
            .map(|k| self.eps0 * self.factor.powi(k as i32))
            .collect()
    }

    pub fn final_epsilon(&self) -> f64 {
        self.eps0 * self.factor.powi(self.steps as i32)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iterations: usize,
    /// Armijo sufficient-decrease parameter.
    pub armijo: f64,
    pub max_backtracks: usize,
    pub linear_solver: Option<LinearSolver>,
    pub quadrature_order: usize,
    pub exec: Exec,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-10,
            max_iterations: 200,
            armijo: 1e-4,
            max_backtracks: 60,
            linear_solver: None,
            quadrature_order: DEFAULT_QUADRATURE_ORDER,
            exec: Exec::default(),
        }
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(Error::input(format!("lambda must be positive, got {lambda}")))
    }
}

struct Workspace<'a> {
    g: &'a GridField,
    phi: &'a MollifiedIntegrand,
    lambda: f64,
    exec: Exec,
    gradient: Vec<f64>,
    flux: Vec<f64>,
    divergence: Vec<f64>,
}

impl<'a> Workspace<'a> {
    fn new(g: &'a GridField, phi: &'a MollifiedIntegrand, lambda: f64, exec: Exec) -> Self {
        let n = g.len();
        let m = g.grid().dim();
        Workspace {
            g,
            phi,
            lambda,
            exec,
            gradient: vec![0.0; n * m],
            flux: vec![0.0; n * m],
            divergence: vec![0.0; n],
        }
    }

    /// `u - g - lambda div(D Phi_eps(grad u))`.
    fn residual(&mut self, u: &[f64]) -> Vec<f64> {
        let grid = self.g.grid();
        let m = grid.dim();
        grad_into(grid, u, &mut self.gradient);
        let gradient = &self.gradient;
        let phi = self.phi;
        let flux: Vec<[f64; 2]> = self.exec.map(grid.len(), |c| {
            let mut out = [0.0; 2];
            phi.gradient(&gradient[c * m..(c + 1) * m], &mut out[..m]);
            out
        });
        for (c, f) in flux.iter().enumerate() {
            self.flux[c * m..(c + 1) * m].copy_from_slice(&f[..m]);
        }
        div_into(grid, &self.flux, &mut self.divergence);
        u.iter()
            .zip(self.g.values())
            .zip(&self.divergence)
            .map(|((u, g), d)| u - g - self.lambda * d)
            .collect()
    }

    /// Cell Hessians at the gradient of the last residual call.
    fn hessians(&self) -> Vec<f64> {
        let m = self.g.grid().dim();
        let gradient = &self.gradient;
        let phi = self.phi;
        let blocks: Vec<[f64; 4]> = self.exec.map(self.g.len(), |c| {
            let mut out = [0.0; 4];
            phi.hessian(&gradient[c * m..(c + 1) * m], &mut out[..m * m]);
            out
        });
        blocks.iter().flat_map(|b| b[..m * m].iter().copied()).collect()
    }

    fn energy(&self, u: &[f64]) -> Result<f64> {
        let w = self.g.with_values(u.to_vec())?;
        energy_with(&w, self.g, self.phi, self.lambda, self.exec)
    }
}

fn norm(v: &[f64]) -> f64 {
    compensated_sum(v.iter().map(|x| x * x)).sqrt()
}

/// Euclidean norm of `u - g - lambda div(D Phi_eps(grad u))`.
pub fn el_residual(u: &GridField, g: &GridField, phi: &MollifiedIntegrand, lambda: f64) -> Result<f64> {
    check_lambda(lambda)?;
    u.same_grid(g)?;
    let mut ws = Workspace::new(g, phi, lambda, Exec::default());
    Ok(norm(&ws.residual(u.values())))
}

/// Residual (relative to `1 + |g|`) below which a stalled line search is
/// accepted as having reached the floating-point floor.
pub const STAGNATION_LIMIT: f64 = 1e-6;

/// Step halvings tried once the energy decrease is below roundoff.
const ROUNDOFF_BACKTRACKS: usize = 12;

/// Minimizes `E^{lambda,eps}_g` starting from `g`.
pub fn solve_regularized(
    g: &GridField,
    phi: &MollifiedIntegrand,
    lambda: f64,
    tol: f64,
) -> Result<SolveReport> {
    let options = SolverOptions {
        tol,
        ..SolverOptions::default()
    };
    solve_regularized_from(g, g, phi, lambda, &options)
}

/// Damped Newton with Armijo backtracking, from an arbitrary initial iterate.
pub fn solve_regularized_from(
    initial: &GridField,
    g: &GridField,
    phi: &MollifiedIntegrand,
    lambda: f64,
    options: &SolverOptions,
) -> Result<SolveReport> {
    check_lambda(lambda)?;
    if !(options.tol > 0.0) {
        return Err(Error::input("solver tolerance must be positive"));
    }
    initial.same_grid(g)?;
    let grid = g.grid();
    if phi.dim() != grid.dim() {
        return Err(Error::input("integrand and grid dimensions differ"));
    }
    let start = Instant::now();
    let solver = options
        .linear_solver
        .unwrap_or_else(|| LinearSolver::for_size(grid.len()));
    let mut system = NewtonSystem::new(grid, solver);
    let mut ws = Workspace::new(g, phi, lambda, options.exec);
    let cell = grid.cell_measure();

    let g_norm = norm(g.values());
    let mut u = initial.values().to_vec();
    let mut energy = ws.energy(&u)?;
    let mut backtracks = 0;
    let report = |u: Vec<f64>, energy, residual, iterations, backtracks| -> Result<SolveReport> {
        Ok(SolveReport {
            solution: g.with_values(u)?,
            energy,
            residual,
            iterations,
            backtracks,
            epsilon: phi.epsilon(),
            wall_time: start.elapsed().as_secs_f64(),
        })
    };
    for iteration in 0..=options.max_iterations {
        let r = ws.residual(&u);
        let rnorm = norm(&r);
        if !rnorm.is_finite() {
            return Err(Error::Internal("non-finite Euler-Lagrange residual".into()));
        }
        if rnorm <= options.tol {
            return report(u, energy, rnorm, iteration, backtracks);
        }
        if iteration == options.max_iterations {
            break;
        }
        system.assemble(lambda, grid.spacing(), &ws.hessians());
        let rhs: Vec<f64> = r.iter().map(|v| -v).collect();
        let d = system.solve(&rhs)?;
        let slope = cell * compensated_sum(r.iter().zip(&d).map(|(a, b)| a * b));
        if !(slope < 0.0) {
            // At roundoff level the direction carries no information.
            if rnorm <= 1e3 * options.tol {
                return report(u, energy, rnorm, iteration, backtracks);
            }
            return Err(Error::Internal("Newton direction is not a descent direction".into()));
        }
        let slack = 4.0 * f64::EPSILON * energy.abs();
        // Once the predicted decrease is at the roundoff level of the energy,
        // steps are judged by the residual instead.
        let roundoff = -slope <= 1e3 * f64::EPSILON * energy.abs().max(1.0);
        let mut t = 1.0;
        let mut accepted = false;
        let limit = if roundoff {
            options.max_backtracks.min(ROUNDOFF_BACKTRACKS)
        } else {
            options.max_backtracks
        };
        for _ in 0..=limit {
            let trial: Vec<f64> = u.iter().zip(&d).map(|(u, d)| u + t * d).collect();
            let good = if roundoff {
                (norm(&ws.residual(&trial)) < rnorm).then(|| ws.energy(&trial)).transpose()?
            } else {
                let e = ws.energy(&trial)?;
                (e <= energy + options.armijo * t * slope + slack).then_some(e)
            };
            if let Some(e) = good {
                energy = e;
                u = trial;
                accepted = true;
                break;
            }
            t *= 0.5;
            backtracks += 1;
        }
        if !accepted {
            if roundoff && rnorm <= STAGNATION_LIMIT * (1.0 + g_norm) {
                // The Newton direction always decreases the residual in exact
                // arithmetic, so this is the floating-point floor.
                return report(u, energy, rnorm, iteration + 1, backtracks);
            }
            let r = ws.residual(&u);
            let best = report(u, energy, norm(&r), iteration + 1, backtracks)?;
            return Err(Error::NonConvergence { best: Box::new(best) });
        }
    }
    let r = ws.residual(&u);
    let best = report(u, energy, norm(&r), options.max_iterations, backtracks)?;
    Err(Error::NonConvergence { best: Box::new(best) })
}

/// Maximum nesting of intermediate smoothing levels inserted by [`bridged_solve`].
const MAX_BRIDGE_DEPTH: usize = 24;

/// Newton iterations allowed before a stage is bridged.
const BRIDGE_TRIAL_ITERATIONS: usize = 60;

/// Solves at `eps` from `initial` (itself a solution at `prev`, or the datum
/// when `prev` is infinite). When Newton stalls, first solves at an
/// intermediate level (the geometric mean, or `16 eps` above the first
/// stage) and retries from there.
#[allow(clippy::too_many_arguments)]
fn bridged_solve(
    initial: &GridField,
    f: &GridField,
    phi: &Integrand,
    lambda: f64,
    prev: f64,
    eps: f64,
    options: &SolverOptions,
    depth: usize,
) -> Result<SolveReport> {
    let phi_eps = mollify(phi, eps, options.quadrature_order)?;
    let mid = if prev.is_finite() { (prev * eps).sqrt() } else { 16.0 * eps };
    let can_bridge = depth < MAX_BRIDGE_DEPTH && mid > eps * (1.0 + 1e-3);
    // Newton either converges quickly from a good warm start or not at all,
    // so an attempt that can still be bridged gets a short budget.
    let attempt = SolverOptions {
        max_iterations: if can_bridge {
            options.max_iterations.min(BRIDGE_TRIAL_ITERATIONS)
        } else {
            options.max_iterations
        },
        ..*options
    };
    match solve_regularized_from(initial, f, &phi_eps, lambda, &attempt) {
        Err(e) if e.is_non_convergence() && can_bridge => {
            let between = bridged_solve(initial, f, phi, lambda, prev, mid, options, depth + 1)?;
            bridged_solve(&between.solution, f, phi, lambda, mid, eps, options, depth + 1)
        }
        other => other,
    }
}

/// Solves with `Phi_{eps_0}, ..., Phi_{eps_K}`, warm-starting each stage.
pub fn continuation_solve(
    f: &GridField,
    phi: &Integrand,
    lambda: f64,
    schedule: &ContinuationSchedule,
) -> Result<Vec<SolveReport>> {
    continuation_solve_with(f, phi, lambda, schedule, &SolverOptions::default())
}

pub fn continuation_solve_with(
    f: &GridField,
    phi: &Integrand,
    lambda: f64,
    schedule: &ContinuationSchedule,
    options: &SolverOptions,
) -> Result<Vec<SolveReport>> {
    check_lambda(lambda)?;
    schedule.validate()?;
    let options = SolverOptions {
        tol: schedule.tol,
        ..*options
    };
    let mut reports: Vec<SolveReport> = Vec::with_capacity(schedule.steps + 1);
    for (stage, eps) in schedule.epsilons().into_iter().enumerate() {
        let wrap = |source: Error| Error::Stage {
            stage,
            epsilon: eps,
            source: Box::new(source),
        };
        let (initial, prev) = match reports.last() {
            Some(r) => (&r.solution, r.epsilon),
            None => (f, f64::INFINITY),
        };
        let report = bridged_solve(initial, f, phi, lambda, prev, eps, &options, 0).map_err(wrap)?;
        reports.push(report);
    }
    Ok(reports)
}
