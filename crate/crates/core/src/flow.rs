//! Minimizing movements: iterated resolvents `u_k = argmin E^tau_{u_{k-1}}`
//! approximating the gradient flow of the relaxed functional.

use std::io::Write;

use crate::bvtools::{singular_mass, BVFunction1D};
use crate::discretize::{gradient_term, weighted_gradient_integral, GridField};
use crate::error::{Error, Result};
use crate::integrand::{ConvexWeight, Integrand};
use crate::solver::{continuation_solve, ContinuationSchedule, SolveReport};

/// Absolute per-step slack for the non-increasing monitor columns.
pub const MONOTONE_TOL: f64 = 1e-8;
/// Absolute slack for mass conservation.
pub const MASS_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct MonitorRow {
    pub time: f64,
    pub mass: f64,
    /// `int Psi(Phi(grad u))`, one entry per monitored weight.
    pub weighted: Vec<f64>,
    /// Gradient part `int Phi(grad u)` of the discrete functional.
    pub gradient_term: f64,
    /// Jump part priced by the recession function (1D only).
    pub singular_mass: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct FlowTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<GridField>,
    /// Resolvent steps per unit time, `n / T`.
    pub steps_per_unit: f64,
    pub tau: f64,
    /// Final-stage report of each resolvent step.
    pub reports: Vec<SolveReport>,
    pub weights: Vec<ConvexWeight>,
    pub rows: Vec<MonitorRow>,
}

impl FlowTrajectory {
    pub fn final_state(&self) -> &GridField {
        self.states.last().expect("trajectory starts with the initial state")
    }
}

fn monitor(u: &GridField, time: f64, phi: &Integrand, weights: &[ConvexWeight]) -> Result<MonitorRow> {
    let weighted = weights
        .iter()
        .map(|w| weighted_gradient_integral(u, phi, w))
        .collect::<Result<Vec<_>>>()?;
    let singular = if u.grid().dim() == 1 {
        Some(singular_mass(&BVFunction1D::from_grid_field(u)?, phi)?)
    } else {
        None
    };
    Ok(MonitorRow {
        time,
        mass: u.mass(),
        weighted,
        gradient_term: gradient_term(u, phi)?,
        singular_mass: singular,
    })
}

/// One implicit Euler step: the minimizer of `E^tau_{u_prev}`, with every
/// continuation report.
pub fn resolvent_solve(
    u_prev: &GridField,
    tau: f64,
    phi: &Integrand,
    schedule: &ContinuationSchedule,
) -> Result<Vec<SolveReport>> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::input(format!("time step must be positive, got {tau}")));
    }
    continuation_solve(u_prev, phi, tau, schedule)
}

pub fn resolvent_step(
    u_prev: &GridField,
    tau: f64,
    phi: &Integrand,
    schedule: &ContinuationSchedule,
) -> Result<GridField> {
    let mut reports = resolvent_solve(u_prev, tau, phi, schedule)?;
    Ok(reports.pop().expect("nonempty schedule").solution)
}

/// `n` resolvent steps of size `T / n` with the default schedule for the grid.
pub fn flow_solve(
    u0: &GridField,
    t_final: f64,
    n: usize,
    phi: &Integrand,
    weights: &[ConvexWeight],
) -> Result<FlowTrajectory> {
    let schedule = ContinuationSchedule::default_for_spacing(u0.grid().spacing());
    flow_solve_with(u0, t_final, n, phi, weights, &schedule)
}

pub fn flow_solve_with(
    u0: &GridField,
    t_final: f64,
    n: usize,
    phi: &Integrand,
    weights: &[ConvexWeight],
    schedule: &ContinuationSchedule,
) -> Result<FlowTrajectory> {
    if n == 0 {
        return Err(Error::input("flow needs at least one step"));
    }
    if !(t_final > 0.0 && t_final.is_finite()) {
        return Err(Error::input("final time must be positive"));
    }
    let tau = t_final / n as f64;
    let mut traj = FlowTrajectory {
        times: vec![0.0],
        states: vec![u0.clone()],
        steps_per_unit: n as f64 / t_final,
        tau,
        reports: Vec::with_capacity(n),
        weights: weights.to_vec(),
        rows: vec![monitor(u0, 0.0, phi, weights)?],
    };
    for step in 1..=n {
        let prev = traj.final_state().clone();
        let reports = match resolvent_solve(&prev, tau, phi, schedule) {
            Ok(r) => r,
            Err(source) => {
                return Err(Error::Flow {
                    step,
                    partial: Box::new(traj),
                    source: Box::new(source),
                })
            }
        };
        let report = reports.into_iter().last().expect("nonempty schedule");
        let time = step as f64 * tau;
        traj.rows.push(monitor(&report.solution, time, phi, weights)?);
        traj.times.push(time);
        traj.states.push(report.solution.clone());
        traj.reports.push(report);
    }
    Ok(traj)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonitorReport {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    /// Human-readable descriptions of every flagged row.
    pub violations: Vec<String>,
}

impl MonitorReport {
    pub fn pass(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Tabulates the monitors; flags increases of any weighted column, the
/// gradient term or the singular mass beyond [`MONOTONE_TOL`], and mass
/// drift beyond [`MASS_TOL`].
pub fn monitor_report(traj: &FlowTrajectory) -> MonitorReport {
    let mut columns = vec!["time".to_string(), "mass".to_string()];
    columns.extend(traj.weights.iter().map(|w| format!("psi_{w}")));
    columns.push("gradient_term".into());
    let has_singular = traj.rows.first().is_some_and(|r| r.singular_mass.is_some());
    if has_singular {
        columns.push("singular_mass".into());
    }
    let rows: Vec<Vec<f64>> = traj
        .rows
        .iter()
        .map(|r| {
            let mut v = vec![r.time, r.mass];
            v.extend_from_slice(&r.weighted);
            v.push(r.gradient_term);
            if let Some(s) = r.singular_mass {
                v.push(s);
            }
            v
        })
        .collect();
    let mut violations = Vec::new();
    if let Some(first) = rows.first() {
        for (k, row) in rows.iter().enumerate().skip(1) {
            if (row[1] - first[1]).abs() > MASS_TOL {
                violations.push(format!(
                    "t={}: mass drifted by {:.3e}",
                    row[0],
                    row[1] - first[1]
                ));
            }
            for c in 2..row.len() {
                let inc = row[c] - rows[k - 1][c];
                if inc > MONOTONE_TOL {
                    violations.push(format!("t={}: {} increased by {inc:.3e}", row[0], columns[c]));
                }
            }
        }
    }
    MonitorReport {
        columns,
        rows,
        violations,
    }
}

/// CSV of the monitor table.
pub fn write_trajectory_csv<W: Write>(traj: &FlowTrajectory, out: W) -> Result<()> {
    let report = monitor_report(traj);
    let mut w = csv::Writer::from_writer(out);
    w.write_record(&report.columns)?;
    for row in &report.rows {
        w.write_record(row.iter().map(|v| format!("{v}")))?;
    }
    w.flush()?;
    Ok(())
}
