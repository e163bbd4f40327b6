use std::sync::Arc;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bvtools::{singular_mass, BVFunction1D};
use crate::discretize::{cell_densities, div, energy, grad, weighted_gradient_integral, Grid, GridField, VectorField};
use crate::error::{Error, Result};
use crate::flow::{flow_solve, monitor_report};
use crate::geometry::Domain;
use crate::integrand::{mollify, superlinear_weight_for, ConvexWeight, Integrand, DEFAULT_QUADRATURE_ORDER};
use crate::par::{compensated_sum, Exec};
use crate::solver::{continuation_solve, ContinuationSchedule, SolveReport};

use super::EstimateReport;

/// Exact minimizer of the total-variation problem for a one-jump datum on
/// `(a, b)`: each plateau moves towards the other by `lambda` over its length,
/// or both merge into the mean.
pub fn step_minimizer(a: f64, b: f64, c: f64, low: f64, high: f64, lambda: f64) -> Result<BVFunction1D> {
    if !(a < c && c < b) {
        return Err(Error::input("step location must lie inside the interval"));
    }
    let (left, right) = (c - a, b - c);
    let jump = high - low;
    let shrink = lambda / left + lambda / right;
    if jump.abs() <= shrink {
        let mean = (low * left + high * right) / (b - a);
        return BVFunction1D::polynomial(a, b, vec![mean]);
    }
    let s = jump.signum();
    BVFunction1D::step(a, b, c, low + s * lambda / left, high - s * lambda / right)
}

/// Jump height `max(0, h0 - 4 lambda)` of the unit-interval step at 1/2.
pub fn step_jump_height(h0: f64, lambda: f64) -> f64 {
    (h0 - 4.0 * lambda).max(0.0)
}

/// Sum of the jump heights extracted from a 1D grid field.
pub fn extracted_jump(u: &GridField) -> Result<f64> {
    Ok(BVFunction1D::from_grid_field(u)?.jumps().iter().map(|j| j.height).sum())
}

/// Seeded piecewise-constant datum on `(0, 1)` with 1 to 5 jumps of height
/// in `[-2, 2]`.
pub fn random_piecewise(rng: &mut ChaCha8Rng) -> Result<BVFunction1D> {
    let k = rng.random_range(1..=5usize);
    let mut breaks: Vec<f64> = Vec::with_capacity(k);
    while breaks.len() < k {
        let x: f64 = rng.random_range(0.05..0.95);
        if breaks.iter().all(|b| (b - x).abs() > 0.05) {
            breaks.push(x);
        }
    }
    breaks.sort_by(f64::total_cmp);
    let mut values = vec![rng.random_range(-1.0..1.0)];
    for _ in 0..k {
        let mut hgt: f64 = rng.random_range(-2.0..2.0);
        if hgt.abs() < 1e-3 {
            hgt = 1e-3;
        }
        let last = *values.last().expect("nonempty");
        values.push(last + hgt);
    }
    BVFunction1D::piecewise_constant(0.0, 1.0, breaks, values)
}

/// Singular-mass shrinkage on random piecewise-constant data, plus the step
/// scenario's exact jump height.
pub fn dsuest_suite(count: usize, n: usize, lambda: f64, seed: u64, exec: Exec) -> Result<Vec<EstimateReport>> {
    let phi = Integrand::euclidean(1)?;
    let grid = Arc::new(Grid::new(Domain::interval(0.0, 1.0)?, n)?);
    let h = grid.spacing();
    let schedule = ContinuationSchedule::default_for_spacing(h);
    let rows = exec.map_tasks(count + 1, |k| -> Result<EstimateReport> {
        if k == count {
            let f = BVFunction1D::step(0.0, 1.0, 0.5, 0.0, 1.0)?;
            let fg = f.to_grid_field(&grid)?;
            let reports = continuation_solve(&fg, &phi, lambda, &schedule)?;
            let jump = extracted_jump(&reports.last().expect("stage").solution)?;
            let expected = step_jump_height(1.0, lambda);
            return Ok(EstimateReport::new(
                "step_jump_height",
                (jump - expected).abs(),
                0.0,
                2.0 * h,
                format!("unit step at 0.5, lambda={lambda}, n={n}, jump={jump}, expected={expected}"),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(k as u64));
        let f = random_piecewise(&mut rng)?;
        let fg = f.to_grid_field(&grid)?;
        let reports = continuation_solve(&fg, &phi, lambda, &schedule)?;
        let u = BVFunction1D::from_grid_field(&reports.last().expect("stage").solution)?;
        let lhs = singular_mass(&u, &phi)?;
        let sf = singular_mass(&f, &phi)?;
        Ok(EstimateReport::new(
            "dsuest",
            lhs,
            1.01 * sf + 2.0 * h,
            0.0,
            format!("seed={} case={k} jumps={} lambda={lambda} n={n}", seed, f.jumps().len()),
        ))
    });
    rows.into_iter().collect()
}

/// Flow of the unit step: `TV(t)` against `max(0, 1 - 4t)` at every step, and
/// the monitor table's monotonicity and mass checks.
pub fn flow_suite(cells: usize, steps: usize, t_final: f64) -> Result<Vec<EstimateReport>> {
    let phi = Integrand::euclidean(1)?;
    let grid = Arc::new(Grid::new(Domain::interval(0.0, 1.0)?, cells)?);
    let h = grid.spacing();
    let u0 = BVFunction1D::step(0.0, 1.0, 0.5, 0.0, 1.0)?.to_grid_field(&grid)?;
    let weights = [
        ConvexWeight::absolute(),
        ConvexWeight::square(),
        ConvexWeight::shifted_positive_part(2.0)?,
    ];
    let traj = flow_solve(&u0, t_final, steps, &phi, &weights)?;
    let worst = traj
        .rows
        .iter()
        .map(|r| (r.gradient_term - step_jump_height(1.0, r.time)).abs())
        .fold(0.0, f64::max);
    let report = monitor_report(&traj);
    let scenario = format!("unit step, n={cells}, steps={steps}, T={t_final}");
    let mass_drift = traj
        .rows
        .iter()
        .map(|r| (r.mass - traj.rows[0].mass).abs())
        .fold(0.0, f64::max);
    let mut increase: f64 = 0.0;
    for w in report.rows.windows(2) {
        for c in 2..w[0].len() {
            increase = increase.max(w[1][c] - w[0][c]);
        }
    }
    Ok(vec![
        EstimateReport::new("flow_total_variation", worst, 0.0, 2.0 * h + 1e-3, scenario.clone()),
        EstimateReport::new("flow_monitors_nonincreasing", increase, 0.0, crate::flow::MONOTONE_TOL, scenario.clone()),
        EstimateReport::new("flow_mass", mass_drift, 0.0, crate::flow::MASS_TOL, scenario),
    ])
}

/// Slack allowed in the decrease of consecutive gamma gaps.
pub const GAMMA_MONOTONE_TOL: f64 = 1e-6;

/// `|E^{lambda,eps_k}(u^{eps_k}) - reference|` along a continuation run.
pub fn gamma_gaps(reports: &[SolveReport], reference: f64) -> Vec<f64> {
    reports.iter().map(|r| (r.energy - reference).abs()).collect()
}

/// Monotone decrease of the gaps over the last `window` stages and the final
/// gap against `final_tol`.
pub fn gamma_reports(gaps: &[f64], window: usize, final_tol: f64, scenario: &str) -> Vec<EstimateReport> {
    let start = gaps.len().saturating_sub(window);
    let tail = &gaps[start..];
    let increase = tail.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
    vec![
        EstimateReport::new("gamma_gap_monotone", increase.max(0.0), 0.0, GAMMA_MONOTONE_TOL, scenario),
        EstimateReport::new(
            "gamma_gap_final",
            *gaps.last().unwrap_or(&f64::INFINITY),
            final_tol,
            0.0,
            scenario,
        ),
    ]
}

/// Discrete energy with the unmollified integrand.
pub fn limit_energy(u: &GridField, f: &GridField, phi: &Integrand, lambda: f64) -> Result<f64> {
    energy(u, f, phi, lambda)
}

/// Gamma diagnostic on the unit step: stage energies against the unmollified
/// energy of the final iterate.
pub fn gamma_suite(n: usize, lambda: f64, schedule: &ContinuationSchedule) -> Result<Vec<EstimateReport>> {
    let phi = Integrand::euclidean(1)?;
    let grid = Arc::new(Grid::new(Domain::interval(0.0, 1.0)?, n)?);
    let f = BVFunction1D::step(0.0, 1.0, 0.5, 0.0, 1.0)?.to_grid_field(&grid)?;
    let reports = continuation_solve(&f, &phi, lambda, schedule)?;
    let last = &reports.last().expect("stage").solution;
    let reference = limit_energy(last, &f, &phi, lambda)?;
    let gaps = gamma_gaps(&reports, reference);
    let scenario = format!(
        "unit step, n={n}, lambda={lambda}, eps0={}, factor={}, K={}",
        schedule.eps0, schedule.factor, schedule.steps
    );
    Ok(gamma_reports(&gaps, 5, 1e-4, &scenario))
}

/// `|<grad w, p> + <w, div p>|` relative to `|grad w| |p|`, for seeded
/// random `w` and `p`.
pub fn adjointness_defect(grid: &Arc<Grid>, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = grid.dim();
    let w = GridField::new(grid.clone(), (0..grid.len()).map(|_| rng.random_range(-1.0..1.0)).collect())?;
    let p = VectorField::new(
        grid.clone(),
        (0..grid.len() * m).map(|_| rng.random_range(-1.0..1.0)).collect(),
    )?;
    let g = grad(&w);
    let d = div(&p);
    let lhs = g.dot(&p);
    let rhs = -compensated_sum(w.values().iter().zip(d.values()).map(|(a, b)| a * b));
    let scale = (g.dot(&g) * p.dot(&p)).sqrt().max(f64::MIN_POSITIVE);
    Ok((lhs - rhs).abs() / scale)
}

/// Smallest `E(u + delta v) - E(u)` over `count` seeded unit perturbations.
pub fn minimality_margin(
    report: &SolveReport,
    f: &GridField,
    phi: &Integrand,
    lambda: f64,
    count: usize,
    delta: f64,
    seed: u64,
) -> Result<f64> {
    let phi_eps = mollify(phi, report.epsilon, DEFAULT_QUADRATURE_ORDER)?;
    let u = &report.solution;
    let e0 = energy(u, f, &phi_eps, lambda)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::INFINITY;
    for _ in 0..count {
        let v: Vec<f64> = (0..u.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let vf = u.with_values(v)?;
        let norm = vf.l2_norm();
        let moved: Vec<f64> = u
            .values()
            .iter()
            .zip(vf.values())
            .map(|(a, b)| a + delta * b / norm)
            .collect();
        let e = energy(&u.with_values(moved)?, f, &phi_eps, lambda)?;
        worst = worst.min(e - e0);
    }
    Ok(worst)
}

/// Discrete analogues of the superlinear and `L^2` bounds at every stage.
pub fn continuation_bound_reports(
    reports: &[SolveReport],
    f: &GridField,
    phi: &Integrand,
    scenario: &str,
) -> Result<Vec<EstimateReport>> {
    let densities = cell_densities(f, phi, Exec::default())?;
    let psi = superlinear_weight_for(&densities)?;
    let rhs_super = weighted_gradient_integral(f, phi, &psi)? + 1.0;
    let rhs_l2 = 4.0 * f.l2_norm().powi(2) + 1.0;
    let mut out = Vec::new();
    for r in reports {
        let lhs = weighted_gradient_integral(&r.solution, phi, &psi)?;
        out.push(
            EstimateReport::new("superbound", lhs, rhs_super, 0.05 * rhs_super, scenario).at_epsilon(r.epsilon),
        );
        out.push(
            EstimateReport::new("l2bound", r.solution.l2_norm().powi(2), rhs_l2, 0.0, scenario)
                .at_epsilon(r.epsilon),
        );
    }
    Ok(out)
}

/// Adjointness on four grids, the minimality certificate and the stage
/// bounds on a 1D and a 2D run.
pub fn structure_suite(seed: u64) -> Result<Vec<EstimateReport>> {
    let mut out = Vec::new();
    let domains = [
        (Domain::interval(0.0, 1.0)?, 128),
        (Domain::unit_square(), 32),
        (Domain::disc([0.0, 0.0], 1.0)?, 32),
        (Domain::polygon(vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])?, 32),
    ];
    for (k, (d, n)) in domains.iter().enumerate() {
        let grid = Arc::new(Grid::new(d.clone(), *n)?);
        let defect = adjointness_defect(&grid, seed.wrapping_add(k as u64))?;
        out.push(EstimateReport::new("grad_div_adjoint", defect, 0.0, 1e-12, format!("{d} n={n}")));
    }
    let runs = [
        (Domain::interval(0.0, 1.0)?, 128, crate::datum::Datum::Rough(seed)),
        (
            Domain::unit_square(),
            24,
            crate::datum::Datum::Bump {
                center: None,
                radius: None,
                amplitude: 1.0,
            },
        ),
    ];
    for (d, n, datum) in runs {
        let grid = Arc::new(Grid::new(d.clone(), n)?);
        let f = datum.sample(&grid)?;
        let phi = Integrand::euclidean(d.dim())?;
        let lambda = 0.05;
        let schedule = ContinuationSchedule::default_for_spacing(grid.spacing());
        let reports = continuation_solve(&f, &phi, lambda, &schedule)?;
        let scenario = format!("{d} n={n} datum={} lambda={lambda}", datum.spec_string());
        let last = reports.last().expect("stage");
        let margin = minimality_margin(last, &f, &phi, lambda, 100, 1e-3, seed)?;
        out.push(EstimateReport::new("minimality_certificate", -margin, 0.0, 1e-9, scenario.clone()));
        out.extend(continuation_bound_reports(&reports, &f, &phi, &scenario)?);
    }
    Ok(out)
}
