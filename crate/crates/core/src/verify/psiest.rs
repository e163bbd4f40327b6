use std::sync::Arc;

use crate::datum::Datum;
use crate::discretize::{weighted_gradient_integral, Grid, GridField};
use crate::error::{Error, Result};
use crate::geometry::Domain;
use crate::integrand::{mollify, ConvexWeight, Integrand, DEFAULT_QUADRATURE_ORDER};
use crate::par::Exec;
use crate::solver::{continuation_solve, ContinuationSchedule};

use super::EstimateReport;

/// Relative part of the discrete-vs-continuum budget.
pub const TOL_REL: f64 = 1e-2;

/// `TOL_REL * rhs + 2 h * perimeter`.
pub fn psiest_tolerance(rhs: f64, grid: &Grid) -> f64 {
    TOL_REL * rhs.abs() + 2.0 * grid.spacing() * grid.domain().perimeter()
}

/// Checks `int Psi(Phi(grad u)) <= int Psi(Phi(grad f))` for the continuation
/// minimizer `u`, and the per-stage `Phi_eps` version of the same inequality.
///
/// Non-convex domains are rejected unless `allow_nonconvex`, in which case all
/// rows are demonstrations.
pub fn check_psiest(
    f: &GridField,
    phi: &Integrand,
    lambda: f64,
    weights: &[ConvexWeight],
    schedule: &ContinuationSchedule,
    allow_nonconvex: bool,
) -> Result<Vec<EstimateReport>> {
    let grid = f.grid();
    let convex = grid.domain().is_convex();
    if !convex && !allow_nonconvex {
        return Err(Error::Unsupported(format!("domain not convex: {}", grid.domain())));
    }
    if f.values().iter().any(|v| !v.is_finite()) {
        return Err(Error::input("datum has non-finite values"));
    }
    let reports = continuation_solve(f, phi, lambda, schedule)?;
    let base = format!(
        "domain={} phi={} lambda={lambda} n={}",
        grid.domain(),
        phi.spec_string(),
        grid.len()
    );
    let mut out = Vec::new();
    let u = &reports.last().expect("at least one stage").solution;
    for psi in weights {
        let lhs = weighted_gradient_integral(u, phi, psi)?;
        let rhs = weighted_gradient_integral(f, phi, psi)?;
        let scenario = format!("{base} psi={psi}");
        out.push(EstimateReport::new("psiest", lhs, rhs, psiest_tolerance(rhs, grid), scenario));
    }
    for r in &reports {
        let phi_eps = mollify(phi, r.epsilon, DEFAULT_QUADRATURE_ORDER)?;
        for psi in weights {
            let lhs = weighted_gradient_integral(&r.solution, &phi_eps, psi)?;
            let rhs = weighted_gradient_integral(f, &phi_eps, psi)?;
            let scenario = format!("{base} psi={psi} eps={:e}", r.epsilon);
            out.push(
                EstimateReport::new("superest_stage", lhs, rhs, psiest_tolerance(rhs, grid), scenario)
                    .at_epsilon(r.epsilon),
            );
        }
    }
    if !convex {
        out = out.into_iter().map(EstimateReport::as_demonstration).collect();
    }
    Ok(out)
}

/// One entry of the standard suite.
#[derive(Debug, Clone)]
pub struct PsiestScenario {
    pub domain: Domain,
    pub n: usize,
    pub datum: Datum,
    pub phi: Integrand,
    pub lambda: f64,
}

impl PsiestScenario {
    pub fn label(&self) -> String {
        format!("datum={} grid={}", self.datum.spec_string(), self.n)
    }

    pub fn run(&self, weights: &[ConvexWeight], allow_nonconvex: bool) -> Result<Vec<EstimateReport>> {
        let grid = Arc::new(Grid::new(self.domain.clone(), self.n)?);
        let f = self.datum.sample(&grid)?;
        let schedule = ContinuationSchedule::default_for_spacing(grid.spacing());
        let mut rows = check_psiest(&f, &self.phi, self.lambda, weights, &schedule, allow_nonconvex)?;
        let label = self.label();
        for r in &mut rows {
            r.scenario = format!("{} {label}", r.scenario);
        }
        Ok(rows)
    }
}

/// `|.|`, square and `(|p| - 5)_+`.
pub fn standard_weights() -> Vec<ConvexWeight> {
    vec![
        ConvexWeight::absolute(),
        ConvexWeight::square(),
        ConvexWeight::shifted_positive_part(5.0).expect("valid level"),
    ]
}

/// Interval, square, disc and triangle against a bump, a tilted plane and a
/// rough profile, with the euclidean integrand and `lambda = 0.05`.
pub fn standard_scenarios(seed: u64) -> Vec<PsiestScenario> {
    let domains = [
        (Domain::interval(0.0, 1.0).unwrap(), 256),
        (Domain::unit_square(), 64),
        (Domain::disc([0.5, 0.5], 0.5).unwrap(), 64),
        (Domain::polygon(vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]).unwrap(), 64),
    ];
    let mut out = Vec::new();
    for (domain, n) in domains {
        let data = [
            Datum::Bump {
                center: None,
                radius: None,
                amplitude: 1.0,
            },
            Datum::Plane([0.0, 1.0, 0.5]),
            Datum::Rough(seed),
        ];
        for datum in data {
            out.push(PsiestScenario {
                phi: Integrand::euclidean(domain.dim()).unwrap(),
                domain: domain.clone(),
                n,
                datum,
                lambda: 0.05,
            });
        }
    }
    out
}

/// Runs scenarios in parallel; rows keep the scenario order.
pub fn psiest_suite(
    scenarios: &[PsiestScenario],
    weights: &[ConvexWeight],
    allow_nonconvex: bool,
    exec: Exec,
) -> Result<Vec<EstimateReport>> {
    let chunks = exec.map_tasks(scenarios.len(), |k| scenarios[k].run(weights, allow_nonconvex));
    let mut out = Vec::new();
    for c in chunks {
        out.extend(c?);
    }
    Ok(out)
}

/// The L-shape run recorded without assertion.
pub fn lshape_demonstration() -> PsiestScenario {
    PsiestScenario {
        domain: Domain::l_shape([0.0, 0.0], 1.0).unwrap(),
        n: 48,
        datum: Datum::Plane([0.0, 1.0, 1.0]),
        phi: Integrand::euclidean(2).unwrap(),
        lambda: 0.05,
    }
}
