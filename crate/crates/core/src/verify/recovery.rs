use std::f64::consts::TAU;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::bvtools::{relaxed_weighted_gradient_term, BVFunction1D};
use crate::discretize::{weighted_gradient_integral, Grid, GridField};
use crate::error::{Error, Result};
use crate::geometry::{Dilation, Domain, Point};
use crate::integrand::{mollify, ConvexWeight, Density, Integrand, MollifiedIntegrand, DEFAULT_QUADRATURE_ORDER};
use crate::kernel::kernel;
use crate::par::{compensated_sum, Exec};
use crate::quadrature::GaussRule;

use super::EstimateReport;

/// A function that can be evaluated anywhere in its (closed) domain.
pub trait PointSampler: Sync {
    fn sample(&self, x: Point) -> f64;
}

impl PointSampler for GridField {
    /// Value of the nearest active cell.
    fn sample(&self, x: Point) -> f64 {
        let grid = self.grid();
        if let Some(c) = grid.locate(x) {
            return self.values()[c];
        }
        let mut best = (f64::INFINITY, 0);
        for c in 0..grid.len() {
            let p = grid.center(c);
            let d = (p[0] - x[0]).powi(2) + (p[1] - x[1]).powi(2);
            if d < best.0 {
                best = (d, c);
            }
        }
        self.values()[best.1]
    }
}

impl PointSampler for BVFunction1D {
    fn sample(&self, x: Point) -> f64 {
        let (a, b) = self.interval();
        self.eval(x[0].clamp(a, b))
    }
}

/// Wraps a closure as a [`PointSampler`].
pub struct FnSampler<F>(pub F);

impl<F: Fn(Point) -> f64 + Sync> PointSampler for FnSampler<F> {
    fn sample(&self, x: Point) -> f64 {
        (self.0)(x)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct RecoveryOptions {
    /// Grid cells along the longest axis of the domain.
    pub n: usize,
    /// Dilation center; the centroid when absent.
    pub x0: Option<Point>,
    /// Mollifier quadrature order (per axis).
    pub rule_order: usize,
    /// Gauss order of the collar quadrature (per axis).
    pub collar_order: usize,
    pub exec: Exec,
}

impl Default for RecoveryOptions {
    fn default() -> Self {
        RecoveryOptions {
            n: 64,
            x0: None,
            rule_order: 8,
            collar_order: 8,
            exec: Exec::default(),
        }
    }
}

/// One smoothing level of the recovery family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryStage {
    pub epsilon: f64,
    /// Mollification width `sqrt(eps) * diam`.
    pub delta: f64,
    /// Smallest dilation with `Omega + B_delta` inside `S_mu(Omega)`.
    pub mu: f64,
    /// `int_{Omega^eps} Psi(Phi_eps(grad w^eps))`: grid part plus collar part.
    pub energy: f64,
    pub collar_energy: f64,
    /// `int_{Omega^eps \ Omega} (w^eps)^2`.
    pub collar_l2: f64,
    /// Largest gradient seen on the grid and in the collar.
    pub sup_gradient: f64,
    /// `|Omega^eps| max_{|xi| <= sup_gradient} |Psi_eps - Psi|`.
    pub pr1_value: f64,
    /// `int_{collar} Psi(Phi(grad w^eps))`.
    pub pr2_value: f64,
    pub pr1: bool,
    pub pr2: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryReport {
    pub target: f64,
    pub spacing: f64,
    pub stages: Vec<RecoveryStage>,
}

impl RecoveryReport {
    /// `|energy - target|` per stage.
    pub fn errors(&self) -> Vec<f64> {
        self.stages.iter().map(|s| (s.energy - self.target).abs()).collect()
    }

    /// Convergence within `2h` at the last stage and collar integral at most
    /// `collar_tol` there.
    pub fn estimate_reports(&self, scenario: &str, collar_tol: f64) -> Vec<EstimateReport> {
        let mut out = Vec::new();
        if let Some(last) = self.stages.last() {
            out.push(
                EstimateReport::new(
                    "recseq_energy",
                    (last.energy - self.target).abs(),
                    0.0,
                    2.0 * self.spacing,
                    scenario,
                )
                .at_epsilon(last.epsilon),
            );
            out.push(
                EstimateReport::new("recseq_collar_l2", last.collar_l2, collar_tol, 0.0, scenario)
                    .at_epsilon(last.epsilon),
            );
        }
        out
    }
}

/// A point of the collar `(Omega + B_eps) \ Omega` with its quadrature weight.
type CollarNode = (Point, f64);

fn collar_nodes(domain: &Domain, eps: f64, order: usize) -> Result<Vec<CollarNode>> {
    let rule = GaussRule::new(order);
    let on = |a: f64, b: f64| -> Vec<(f64, f64)> {
        let (c, r) = (0.5 * (a + b), 0.5 * (b - a));
        rule.nodes.iter().zip(&rule.weights).map(|(x, w)| (c + r * x, r * w)).collect()
    };
    let mut out = Vec::new();
    match domain {
        Domain::Interval { a, b } => {
            for (x, w) in on(a - eps, *a).into_iter().chain(on(*b, b + eps)) {
                out.push(([x, 0.0], w));
            }
        }
        Domain::Disc { center, radius } => {
            let panels = 64;
            for k in 0..panels {
                let t0 = TAU * k as f64 / panels as f64;
                for (t, wt) in on(t0, t0 + TAU / panels as f64) {
                    for (r, wr) in on(*radius, radius + eps) {
                        out.push(([center[0] + r * t.cos(), center[1] + r * t.sin()], wt * wr * r));
                    }
                }
            }
        }
        _ => {
            if !domain.is_convex() {
                return Err(Error::Unsupported(format!("domain not convex: {domain}")));
            }
            let mut v = domain.vertices().expect("polygonal domain");
            let area2: f64 = (0..v.len())
                .map(|i| {
                    let (p, q) = (v[i], v[(i + 1) % v.len()]);
                    p[0] * q[1] - q[0] * p[1]
                })
                .sum();
            if area2 < 0.0 {
                v.reverse();
            }
            let n = v.len();
            let normal = |i: usize| {
                let (p, q) = (v[i], v[(i + 1) % n]);
                let (ex, ey) = (q[0] - p[0], q[1] - p[1]);
                let l = ex.hypot(ey);
                ([ey / l, -ex / l], l)
            };
            for i in 0..n {
                let (nu, len) = normal(i);
                let (p, q) = (v[i], v[(i + 1) % n]);
                for (s, ws) in on(0.0, 1.0) {
                    for (t, wt) in on(0.0, eps) {
                        let x = [
                            p[0] + s * (q[0] - p[0]) + t * nu[0],
                            p[1] + s * (q[1] - p[1]) + t * nu[1],
                        ];
                        out.push((x, ws * wt * len));
                    }
                }
                // corner sector between the normals of edges i - 1 and i
                let (nprev, _) = normal((i + n - 1) % n);
                let a0 = nprev[1].atan2(nprev[0]);
                let mut a1 = nu[1].atan2(nu[0]);
                while a1 < a0 {
                    a1 += TAU;
                }
                for (a, wa) in on(a0, a1) {
                    for (r, wr) in on(0.0, eps) {
                        out.push(([p[0] + r * a.cos(), p[1] + r * a.sin()], wa * wr * r));
                    }
                }
            }
        }
    }
    Ok(out)
}

/// `w^eps(x) = sum_q W_q w(P(S^{-1}(x - delta z_q)))` with `P` the projection
/// onto the closed domain.
struct Recovered<'a, S: PointSampler + ?Sized> {
    w: &'a S,
    domain: &'a Domain,
    dilation: Dilation,
    delta: f64,
    rule: &'a [([f64; 2], f64)],
    dim: usize,
}

impl<S: PointSampler + ?Sized> Recovered<'_, S> {
    fn value(&self, x: Point) -> f64 {
        let mut acc = 0.0;
        for (z, wq) in self.rule {
            let y = [x[0] - self.delta * z[0], x[1] - self.delta * z[1]];
            let mut p = self.dilation.inverse(y);
            if self.dim == 1 {
                p[1] = 0.0;
            }
            if !self.domain.contains(p) {
                p = self.domain.project(p);
            }
            acc += wq * self.w.sample(p);
        }
        acc
    }

    fn gradient(&self, x: Point, eta: f64) -> [f64; 2] {
        let mut g = [0.0; 2];
        for (d, gd) in g.iter_mut().enumerate().take(self.dim) {
            let mut a = x;
            let mut b = x;
            a[d] += eta;
            b[d] -= eta;
            *gd = (self.value(a) - self.value(b)) / (2.0 * eta);
        }
        g
    }
}

/// Builds the recovery family at each `eps` and compares its energies with
/// `target`.
#[allow(clippy::too_many_arguments)]
pub fn recovery_sequence<S: PointSampler + ?Sized>(
    w: &S,
    target: f64,
    domain: &Domain,
    epsilons: &[f64],
    psi: &ConvexWeight,
    phi: &Integrand,
    options: &RecoveryOptions,
) -> Result<RecoveryReport> {
    if !domain.is_convex() {
        return Err(Error::Unsupported(format!("domain not convex: {domain}")));
    }
    if phi.dim() != domain.dim() {
        return Err(Error::input("integrand and domain dimensions differ"));
    }
    let x0 = options.x0.unwrap_or_else(|| domain.centroid());
    if !domain.is_interior(x0) {
        return Err(Error::input("dilation center must be an interior point"));
    }
    let grid = Arc::new(Grid::new(domain.clone(), options.n)?);
    let h = grid.spacing();
    let m = domain.dim();
    let rule = kernel(m).ball_rule(options.rule_order);
    let centers = grid.centers();
    let mut stages = Vec::with_capacity(epsilons.len());
    for &eps in epsilons {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::input(format!("epsilon must be positive, got {eps}")));
        }
        let phi_eps = mollify(phi, eps, DEFAULT_QUADRATURE_ORDER)?;
        let delta = eps.sqrt() * domain.diameter();
        let mu = domain.smallest_dilation(delta, x0)?;
        let rec = Recovered {
            w,
            domain,
            dilation: Dilation { center: x0, factor: mu },
            delta,
            rule: &rule,
            dim: m,
        };
        let values = options.exec.map(centers.len(), |c| rec.value(centers[c]));
        let field = GridField::new(grid.clone(), values)?;
        let interior = weighted_gradient_integral(&field, &phi_eps, psi)?;
        let grid_sup = crate::discretize::grad(&field)
            .values()
            .chunks(m)
            .map(|g| g.iter().map(|x| x * x).sum::<f64>().sqrt())
            .fold(0.0, f64::max);

        let nodes = collar_nodes(domain, eps, options.collar_order)?;
        let eta = 1e-2 * delta.min(h);
        let per_node = options.exec.map(nodes.len(), |k| {
            let (x, wt) = nodes[k];
            let g = rec.gradient(x, eta);
            let v = rec.value(x);
            let gv = &g[..m];
            (
                wt * psi.eval(phi_eps.value(gv)),
                wt * v * v,
                wt * psi.eval(phi.value(gv)),
                gv.iter().map(|x| x * x).sum::<f64>().sqrt(),
                wt,
            )
        });
        let collar_energy = compensated_sum(per_node.iter().map(|p| p.0));
        let collar_l2 = compensated_sum(per_node.iter().map(|p| p.1));
        let pr2_value = compensated_sum(per_node.iter().map(|p| p.2));
        let collar_sup = per_node.iter().map(|p| p.3).fold(0.0, f64::max);
        let collar_area = compensated_sum(per_node.iter().map(|p| p.4));
        let sup_gradient = grid_sup.max(collar_sup);
        let pr1_value = (grid.active_measure() + collar_area)
            * max_weighted_gap(phi, &phi_eps, psi, sup_gradient);
        stages.push(RecoveryStage {
            epsilon: eps,
            delta,
            mu,
            energy: interior + collar_energy,
            collar_energy,
            collar_l2,
            sup_gradient,
            pr1_value,
            pr2_value,
            pr1: pr1_value <= 0.5 * delta,
            pr2: pr2_value <= 0.5 * delta,
        });
    }
    Ok(RecoveryReport {
        target,
        spacing: h,
        stages,
    })
}

/// `max |Psi(Phi_eps(xi)) - Psi(Phi(xi))|` over `|xi| <= radius` (sampled).
fn max_weighted_gap(phi: &Integrand, phi_eps: &MollifiedIntegrand, psi: &ConvexWeight, radius: f64) -> f64 {
    let m = phi.dim();
    let dirs = if m == 1 { 2 } else { 16 };
    let mut best: f64 = 0.0;
    for k in 0..dirs {
        let a = TAU * k as f64 / dirs as f64;
        let d = if m == 1 { [if k == 0 { 1.0 } else { -1.0 }, 0.0] } else { [a.cos(), a.sin()] };
        for i in 0..=64 {
            let r = radius * i as f64 / 64.0;
            let xi = [r * d[0], r * d[1]];
            let gap = psi.eval(phi_eps.value(&xi[..m])) - psi.eval(phi.value(&xi[..m]));
            best = best.max(gap.abs());
        }
    }
    best
}

/// Target `sum Psi(Phi(grad_h w)) h^m` on the options' grid.
pub fn discrete_target<S: PointSampler + ?Sized>(
    w: &S,
    domain: &Domain,
    psi: &ConvexWeight,
    phi: &Integrand,
    n: usize,
) -> Result<f64> {
    let grid = Arc::new(Grid::new(domain.clone(), n)?);
    let field = GridField::from_fn(&grid, |p| w.sample(p))?;
    weighted_gradient_integral(&field, phi, psi)
}

/// Recovery family of a sampled field, against its discrete weighted energy.
pub fn recovery_for_field(
    w: &GridField,
    epsilons: &[f64],
    psi: &ConvexWeight,
    phi: &Integrand,
    options: &RecoveryOptions,
) -> Result<RecoveryReport> {
    let domain = w.grid().domain().clone();
    let target = discrete_target(w, &domain, psi, phi, options.n)?;
    recovery_sequence(w, target, &domain, epsilons, psi, phi, options)
}

/// Recovery family of a 1D BV function, against its relaxed weighted energy.
pub fn recovery_for_bv(
    w: &BVFunction1D,
    epsilons: &[f64],
    psi: &ConvexWeight,
    phi: &Integrand,
    options: &RecoveryOptions,
) -> Result<RecoveryReport> {
    let (a, b) = w.interval();
    let domain = Domain::interval(a, b)?;
    let target = relaxed_weighted_gradient_term(w, phi, psi)?;
    recovery_sequence(w, target, &domain, epsilons, psi, phi, options)
}

/// `1e-2, 1e-3, ..., 1e-6`.
pub fn standard_epsilons() -> Vec<f64> {
    (2..=6).map(|k| 10f64.powi(-k)).collect()
}

/// The 1D unit step (relaxed target) and a 2D smooth bump on the unit square.
pub fn recovery_suite(exec: Exec) -> Result<Vec<EstimateReport>> {
    let eps = standard_epsilons();
    let phi1 = Integrand::euclidean(1)?;
    let step = BVFunction1D::step(0.0, 1.0, 0.5, 0.0, 1.0)?;
    let opts1 = RecoveryOptions {
        n: 256,
        rule_order: 16,
        exec,
        ..RecoveryOptions::default()
    };
    let r1 = recovery_for_bv(&step, &eps, &ConvexWeight::absolute(), &phi1, &opts1)?;
    let mut out = r1.estimate_reports("1D unit step, phi=euclidean, psi=abs, n=256", 1e-3);

    let square = Domain::unit_square();
    let bump = crate::datum::Datum::Bump {
        center: None,
        radius: None,
        amplitude: 1.0,
    }
    .evaluator(&square);
    let phi2 = Integrand::euclidean(2)?;
    let opts2 = RecoveryOptions {
        n: 64,
        exec,
        ..RecoveryOptions::default()
    };
    let sampler = FnSampler(bump);
    let psi = ConvexWeight::square();
    let target = discrete_target(&sampler, &square, &psi, &phi2, opts2.n)?;
    let r2 = recovery_sequence(&sampler, target, &square, &eps, &psi, &phi2, &opts2)?;
    out.extend(r2.estimate_reports("2D bump on the unit square, phi=euclidean, psi=square, n=64", 1e-3));
    Ok(out)
}
