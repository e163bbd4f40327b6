//! Convex integrands of linear growth, their mollifications and recession
//! functions, and the even convex weights used to measure gradients.

use std::fmt;

use crate::error::{Error, Result};
use crate::kernel::{kernel, Kernel};
use crate::syntax::{parse_call, Call};

/// Evaluation of a convex density `R^m -> [0, inf)` on raw slices.
///
/// Callers are responsible for passing slices of length [`Density::dim`];
/// the checked entry points live on the concrete types.
pub trait Density: Sync {
    fn dim(&self) -> usize;
    fn value(&self, xi: &[f64]) -> f64;
}

/// A density with gradient and Hessian, as needed by Newton's method.
pub trait SmoothDensity: Density {
    fn gradient(&self, xi: &[f64], out: &mut [f64]);
    /// Row-major `dim x dim` Hessian.
    fn hessian(&self, xi: &[f64], out: &mut [f64]);
}

#[derive(Debug, Clone, PartialEq)]
pub enum IntegrandKind {
    /// `|xi|`
    Euclidean,
    /// `sqrt(1 + |xi|^2)`
    Area,
    /// `sum_i w_i |xi_i|`
    AnisotropicL1(Vec<f64>),
    /// `|xi - a| + |a|`
    Shifted(Vec<f64>),
    /// One-dimensional `max(plus * xi, -minus * xi)`.
    Asymmetric { plus: f64, minus: f64 },
}

/// A convex integrand `Phi` of linear growth: `C1 |xi| <= Phi(xi) <= C2 (1 + |xi|)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Integrand {
    kind: IntegrandKind,
    dim: usize,
    growth_lower: f64,
    growth_upper: f64,
    minimizer_at_zero: bool,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn check_dim(dim: usize) -> Result<()> {
    if dim == 1 || dim == 2 {
        Ok(())
    } else {
        Err(Error::input(format!("integrand dimension must be 1 or 2, got {dim}")))
    }
}

impl Integrand {
    pub fn euclidean(dim: usize) -> Result<Self> {
        check_dim(dim)?;
        Ok(Integrand {
            kind: IntegrandKind::Euclidean,
            dim,
            growth_lower: 1.0,
            growth_upper: 1.0,
            minimizer_at_zero: true,
        })
    }

    pub fn area(dim: usize) -> Result<Self> {
        check_dim(dim)?;
        Ok(Integrand {
            kind: IntegrandKind::Area,
            dim,
            growth_lower: 1.0,
            growth_upper: 1.0,
            minimizer_at_zero: true,
        })
    }

    pub fn anisotropic_l1(weights: Vec<f64>) -> Result<Self> {
        check_dim(weights.len())?;
        if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::input("anisotropic weights must be positive and finite"));
        }
        let lo = weights.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = weights.iter().cloned().fold(0.0, f64::max);
        let dim = weights.len();
        Ok(Integrand {
            kind: IntegrandKind::AnisotropicL1(weights),
            dim,
            growth_lower: lo,
            growth_upper: hi * (dim as f64).sqrt(),
            minimizer_at_zero: true,
        })
    }

    pub fn shifted(a: Vec<f64>) -> Result<Self> {
        check_dim(a.len())?;
        if a.iter().any(|x| !x.is_finite()) {
            return Err(Error::input("shift must be finite"));
        }
        let na = norm(&a);
        let dim = a.len();
        Ok(Integrand {
            kind: IntegrandKind::Shifted(a),
            dim,
            growth_lower: 1.0,
            growth_upper: (2.0 * na).max(1.0),
            minimizer_at_zero: na == 0.0,
        })
    }

    pub fn asymmetric(plus: f64, minus: f64) -> Result<Self> {
        if !(plus > 0.0 && minus > 0.0 && plus.is_finite() && minus.is_finite()) {
            return Err(Error::input("asymmetric slopes must be positive and finite"));
        }
        Ok(Integrand {
            kind: IntegrandKind::Asymmetric { plus, minus },
            dim: 1,
            growth_lower: plus.min(minus),
            growth_upper: plus.max(minus),
            minimizer_at_zero: true,
        })
    }

    /// Parses `euclidean`, `area`, `anisotropic_l1(w1,..)`, `shifted(a1,..)`
    /// or `asymmetric(p,q)`. Dimension-free names take `dim` from the domain.
    pub fn parse(spec: &str, dim: usize) -> Result<Self> {
        let Call { name, args } = parse_call(spec)?;
        let phi = match name.as_str() {
            "euclidean" if args.is_empty() => Integrand::euclidean(dim)?,
            "area" if args.is_empty() => Integrand::area(dim)?,
            "anisotropic_l1" => Integrand::anisotropic_l1(args)?,
            "shifted" => Integrand::shifted(args)?,
            "asymmetric" if args.len() == 2 => Integrand::asymmetric(args[0], args[1])?,
            _ => return Err(Error::input(format!("unknown integrand `{spec}`"))),
        };
        if phi.dim != dim {
            return Err(Error::input(format!(
                "integrand `{spec}` has dimension {} but the domain has dimension {dim}",
                phi.dim
            )));
        }
        Ok(phi)
    }

    pub fn kind(&self) -> &IntegrandKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn growth_lower(&self) -> f64 {
        self.growth_lower
    }

    pub fn growth_upper(&self) -> f64 {
        self.growth_upper
    }

    pub fn minimizer_at_zero(&self) -> bool {
        self.minimizer_at_zero
    }

    /// `Phi(-xi) = Phi(xi)` for every `xi`.
    pub fn is_even(&self) -> bool {
        match &self.kind {
            IntegrandKind::Shifted(a) => a.iter().all(|x| *x == 0.0),
            IntegrandKind::Asymmetric { plus, minus } => plus == minus,
            _ => true,
        }
    }

    fn validate(&self, xi: &[f64]) -> Result<()> {
        if xi.len() != self.dim {
            return Err(Error::input(format!(
                "expected a vector of length {}, got {}",
                self.dim,
                xi.len()
            )));
        }
        if xi.iter().any(|x| !x.is_finite()) {
            return Err(Error::input("non-finite argument"));
        }
        Ok(())
    }

    /// Checked evaluation of `Phi(xi)`.
    pub fn eval(&self, xi: &[f64]) -> Result<f64> {
        self.validate(xi)?;
        Ok(Density::value(self, xi))
    }

    /// An almost-everywhere gradient (a subgradient where `Phi` has a kink).
    pub fn subgradient(&self, xi: &[f64], out: &mut [f64]) {
        match &self.kind {
            IntegrandKind::Euclidean => {
                let r = norm(xi);
                for (o, x) in out.iter_mut().zip(xi) {
                    *o = if r > 0.0 { x / r } else { 0.0 };
                }
            }
            IntegrandKind::Area => {
                let s = (1.0 + xi.iter().map(|x| x * x).sum::<f64>()).sqrt();
                for (o, x) in out.iter_mut().zip(xi) {
                    *o = x / s;
                }
            }
            IntegrandKind::AnisotropicL1(w) => {
                for ((o, x), wi) in out.iter_mut().zip(xi).zip(w) {
                    *o = wi * sign0(*x);
                }
            }
            IntegrandKind::Shifted(a) => {
                let d: Vec<f64> = xi.iter().zip(a).map(|(x, a)| x - a).collect();
                let r = norm(&d);
                for (o, x) in out.iter_mut().zip(&d) {
                    *o = if r > 0.0 { x / r } else { 0.0 };
                }
            }
            IntegrandKind::Asymmetric { plus, minus } => {
                out[0] = if xi[0] > 0.0 {
                    *plus
                } else if xi[0] < 0.0 {
                    -*minus
                } else {
                    0.5 * (plus - minus)
                };
            }
        }
    }

    /// Almost-everywhere Hessian; the singular part on kinks is not represented.
    pub fn hessian_ae(&self, xi: &[f64], out: &mut [f64]) {
        let m = self.dim;
        out.iter_mut().for_each(|v| *v = 0.0);
        let radial = |d: &[f64], out: &mut [f64]| {
            let r = norm(d);
            if r > 0.0 && m == 2 {
                for i in 0..2 {
                    for j in 0..2 {
                        let id = if i == j { 1.0 } else { 0.0 };
                        out[i * 2 + j] = (id - d[i] * d[j] / (r * r)) / r;
                    }
                }
            }
        };
        match &self.kind {
            IntegrandKind::Euclidean => radial(xi, out),
            IntegrandKind::Shifted(a) => {
                let d: Vec<f64> = xi.iter().zip(a).map(|(x, a)| x - a).collect();
                radial(&d, out)
            }
            IntegrandKind::Area => {
                let r2: f64 = xi.iter().map(|x| x * x).sum();
                let s = (1.0 + r2).sqrt();
                for i in 0..m {
                    for j in 0..m {
                        let id = if i == j { 1.0 + r2 } else { 0.0 };
                        out[i * m + j] = (id - xi[i] * xi[j]) / (s * s * s);
                    }
                }
            }
            IntegrandKind::AnisotropicL1(_) | IntegrandKind::Asymmetric { .. } => {}
        }
    }

    /// Exact recession value `lim Phi(t d) / t` for a unit direction, when known.
    pub fn exact_recession(&self, dir: &[f64]) -> Option<f64> {
        Some(match &self.kind {
            IntegrandKind::Euclidean | IntegrandKind::Area | IntegrandKind::Shifted(_) => norm(dir),
            IntegrandKind::AnisotropicL1(w) => w.iter().zip(dir).map(|(w, d)| w * d.abs()).sum(),
            IntegrandKind::Asymmetric { plus, minus } => {
                if dir[0] >= 0.0 {
                    plus * dir[0]
                } else {
                    -minus * dir[0]
                }
            }
        })
    }

    fn check_direction(&self, dir: &[f64]) -> Result<()> {
        self.validate(dir)?;
        if (norm(dir) - 1.0).abs() > 1e-12 {
            return Err(Error::input("recession direction must be a unit vector"));
        }
        Ok(())
    }

    /// The recession function `Phi^inf` on the unit sphere.
    pub fn recession(&self, dir: &[f64]) -> Result<f64> {
        self.check_direction(dir)?;
        match self.exact_recession(dir) {
            Some(v) => Ok(v),
            None => self.recession_numeric(dir),
        }
    }

    /// Recession by doubling `t` until `Phi(t d) / t` settles.
    pub fn recession_numeric(&self, dir: &[f64]) -> Result<f64> {
        self.check_direction(dir)?;
        let mut buf = vec![0.0; self.dim];
        numeric_recession(|t| {
            for (b, d) in buf.iter_mut().zip(dir) {
                *b = t * d;
            }
            Density::value(self, &buf)
        })
    }

    /// The spec string this integrand parses from.
    pub fn spec_string(&self) -> String {
        let list = |v: &[f64]| v.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(",");
        match &self.kind {
            IntegrandKind::Euclidean => "euclidean".into(),
            IntegrandKind::Area => "area".into(),
            IntegrandKind::AnisotropicL1(w) => format!("anisotropic_l1({})", list(w)),
            IntegrandKind::Shifted(a) => format!("shifted({})", list(a)),
            IntegrandKind::Asymmetric { plus, minus } => format!("asymmetric({plus},{minus})"),
        }
    }

    /// True when `phi_eps * Phi` has a closed-form (profile based) evaluation.
    pub fn has_closed_form_mollification(&self) -> bool {
        !matches!(self.kind, IntegrandKind::Area)
    }
}

impl fmt::Display for Integrand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.spec_string())
    }
}

fn sign0(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Doubles `t` from 1 until the relative change of `f(t) / t` drops below
/// `1e-8`; gives up after 60 doublings.
pub fn numeric_recession<F: FnMut(f64) -> f64>(mut f: F) -> Result<f64> {
    let mut t = 1.0;
    let mut prev = f(t) / t;
    for _ in 0..60 {
        t *= 2.0;
        let ratio = f(t) / t;
        if !ratio.is_finite() {
            return Err(Error::Divergence {
                doublings: 60,
                last: ratio,
            });
        }
        if (ratio - prev).abs() <= 1e-8 * ratio.abs().max(f64::MIN_POSITIVE) {
            return Ok(ratio);
        }
        prev = ratio;
    }
    Err(Error::Divergence {
        doublings: 60,
        last: prev,
    })
}

impl Density for Integrand {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, xi: &[f64]) -> f64 {
        match &self.kind {
            IntegrandKind::Euclidean => norm(xi),
            IntegrandKind::Area => (1.0 + xi.iter().map(|x| x * x).sum::<f64>()).sqrt(),
            IntegrandKind::AnisotropicL1(w) => w.iter().zip(xi).map(|(w, x)| w * x.abs()).sum(),
            IntegrandKind::Shifted(a) => {
                let d2: f64 = xi.iter().zip(a).map(|(x, a)| (x - a).powi(2)).sum();
                d2.sqrt() + norm(a)
            }
            IntegrandKind::Asymmetric { plus, minus } => (plus * xi[0]).max(-minus * xi[0]),
        }
    }
}

/// How `phi_eps * Phi` is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Evaluation {
    /// Through the tabulated 1D profile (and the radial reduction in 2D).
    ClosedForm,
    /// Fixed symmetric quadrature on the mollifier support.
    Quadrature,
}

/// `Phi_eps = phi_eps * Phi + (eps / 2) |xi|^2`.
#[derive(Debug, Clone)]
pub struct MollifiedIntegrand {
    base: Integrand,
    epsilon: f64,
    evaluation: Evaluation,
    /// Unit-ball nodes and normalized weights (only used for quadrature).
    rule: Vec<([f64; 2], f64)>,
    kernel: &'static Kernel,
}

/// Default Gauss order per axis of the support quadrature.
pub const DEFAULT_QUADRATURE_ORDER: usize = 16;

/// Builds `Phi_eps`, using the closed form where one exists.
pub fn mollify(phi: &Integrand, epsilon: f64, quadrature_order: usize) -> Result<MollifiedIntegrand> {
    let evaluation = if phi.has_closed_form_mollification() {
        Evaluation::ClosedForm
    } else {
        Evaluation::Quadrature
    };
    MollifiedIntegrand::new(phi, epsilon, quadrature_order, evaluation)
}

/// Builds `Phi_eps` evaluated purely by quadrature, whatever the integrand.
pub fn mollify_quadrature(
    phi: &Integrand,
    epsilon: f64,
    quadrature_order: usize,
) -> Result<MollifiedIntegrand> {
    MollifiedIntegrand::new(phi, epsilon, quadrature_order, Evaluation::Quadrature)
}

impl MollifiedIntegrand {
    fn new(
        phi: &Integrand,
        epsilon: f64,
        quadrature_order: usize,
        evaluation: Evaluation,
    ) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::input(format!("epsilon must be positive, got {epsilon}")));
        }
        if quadrature_order == 0 {
            return Err(Error::input("quadrature order must be at least 1"));
        }
        let kernel = kernel(phi.dim);
        let rule = match evaluation {
            Evaluation::Quadrature => kernel.ball_rule(quadrature_order),
            Evaluation::ClosedForm => Vec::new(),
        };
        Ok(MollifiedIntegrand {
            base: phi.clone(),
            epsilon,
            evaluation,
            rule,
            kernel,
        })
    }

    pub fn base(&self) -> &Integrand {
        &self.base
    }

    pub fn dim(&self) -> usize {
        self.base.dim
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn evaluation(&self) -> Evaluation {
        self.evaluation
    }

    /// Checked `Phi_eps(xi)`.
    pub fn eval(&self, xi: &[f64]) -> Result<f64> {
        self.base.validate(xi)?;
        Ok(Density::value(self, xi))
    }

    /// Checked gradient of `Phi_eps`.
    pub fn grad(&self, xi: &[f64]) -> Result<Vec<f64>> {
        self.base.validate(xi)?;
        let mut out = vec![0.0; self.base.dim];
        self.gradient(xi, &mut out);
        Ok(out)
    }

    /// Checked row-major Hessian of `Phi_eps`.
    pub fn hess(&self, xi: &[f64]) -> Result<Vec<f64>> {
        self.base.validate(xi)?;
        let mut out = vec![0.0; self.base.dim * self.base.dim];
        self.hessian(xi, &mut out);
        Ok(out)
    }

    /// Value of the convolution part `phi_eps * Phi` alone.
    pub fn convolution(&self, xi: &[f64]) -> f64 {
        let eps = self.epsilon;
        match self.evaluation {
            Evaluation::Quadrature => {
                let m = self.base.dim;
                let mut shifted = [0.0; 2];
                let mut acc = 0.0;
                for (z, w) in &self.rule {
                    for i in 0..m {
                        shifted[i] = xi[i] - eps * z[i];
                    }
                    acc += w * Density::value(&self.base, &shifted[..m]);
                }
                acc
            }
            Evaluation::ClosedForm => match &self.base.kind {
                IntegrandKind::Euclidean => self.norm_conv(xi),
                IntegrandKind::Shifted(a) => {
                    let d = [xi[0] - a[0], if a.len() > 1 { xi[1] - a[1] } else { 0.0 }];
                    self.norm_conv(&d[..a.len()]) + norm(a)
                }
                IntegrandKind::AnisotropicL1(w) => w
                    .iter()
                    .zip(xi)
                    .map(|(w, x)| w * eps * self.kernel.profile(x / eps).value)
                    .sum(),
                IntegrandKind::Asymmetric { plus, minus } => {
                    0.5 * (plus - minus) * xi[0]
                        + 0.5 * (plus + minus) * eps * self.kernel.profile(xi[0] / eps).value
                }
                IntegrandKind::Area => unreachable!("area has no closed form"),
            },
        }
    }

    fn norm_conv(&self, d: &[f64]) -> f64 {
        let eps = self.epsilon;
        if d.len() == 1 {
            eps * self.kernel.profile(d[0] / eps).value
        } else {
            eps * self.kernel.radial(norm(d) / eps).value
        }
    }

    fn norm_conv_derivs(&self, d: &[f64], grad: &mut [f64], hess: Option<&mut [f64]>) {
        let eps = self.epsilon;
        if d.len() == 1 {
            let j = self.kernel.profile(d[0] / eps);
            grad[0] += j.d1;
            if let Some(h) = hess {
                h[0] += j.d2 / eps;
            }
            return;
        }
        let r = norm(d);
        let jet = self.kernel.radial(r / eps);
        for i in 0..2 {
            grad[i] += jet.d1_over_r * d[i] / eps;
        }
        if let Some(h) = hess {
            let (e0, e1) = if r > 0.0 { (d[0] / r, d[1] / r) } else { (1.0, 0.0) };
            let e = [e0, e1];
            for i in 0..2 {
                for j in 0..2 {
                    let id = if i == j { 1.0 } else { 0.0 };
                    h[i * 2 + j] +=
                        (jet.d2 * e[i] * e[j] + jet.d1_over_r * (id - e[i] * e[j])) / eps;
                }
            }
        }
    }

    fn conv_derivs(&self, xi: &[f64], grad: &mut [f64], mut hess: Option<&mut [f64]>) {
        let m = self.base.dim;
        let eps = self.epsilon;
        grad.iter_mut().for_each(|g| *g = 0.0);
        if let Some(h) = hess.as_deref_mut() {
            h.iter_mut().for_each(|v| *v = 0.0);
        }
        match self.evaluation {
            Evaluation::Quadrature => {
                let mut shifted = [0.0; 2];
                let mut g = [0.0; 2];
                let mut hh = [0.0; 4];
                for (z, w) in &self.rule {
                    for i in 0..m {
                        shifted[i] = xi[i] - eps * z[i];
                    }
                    self.base.subgradient(&shifted[..m], &mut g[..m]);
                    for i in 0..m {
                        grad[i] += w * g[i];
                    }
                    if let Some(h) = hess.as_deref_mut() {
                        self.base.hessian_ae(&shifted[..m], &mut hh[..m * m]);
                        for k in 0..m * m {
                            h[k] += w * hh[k];
                        }
                    }
                }
            }
            Evaluation::ClosedForm => match &self.base.kind {
                IntegrandKind::Euclidean => self.norm_conv_derivs(xi, grad, hess),
                IntegrandKind::Shifted(a) => {
                    let d = [xi[0] - a[0], if m > 1 { xi[1] - a[1] } else { 0.0 }];
                    self.norm_conv_derivs(&d[..m], grad, hess)
                }
                IntegrandKind::AnisotropicL1(w) => {
                    for i in 0..m {
                        let j = self.kernel.profile(xi[i] / eps);
                        grad[i] = w[i] * j.d1;
                        if let Some(h) = hess.as_deref_mut() {
                            h[i * m + i] = w[i] * j.d2 / eps;
                        }
                    }
                }
                IntegrandKind::Asymmetric { plus, minus } => {
                    let j = self.kernel.profile(xi[0] / eps);
                    grad[0] = 0.5 * (plus - minus) + 0.5 * (plus + minus) * j.d1;
                    if let Some(h) = hess {
                        h[0] = 0.5 * (plus + minus) * j.d2 / eps;
                    }
                }
                IntegrandKind::Area => unreachable!("area has no closed form"),
            },
        }
    }

    /// Gradient of `phi_eps * Phi` (without the `eps xi` term).
    pub fn convolution_gradient(&self, xi: &[f64], out: &mut [f64]) {
        self.conv_derivs(xi, out, None);
    }

    /// Empirical constant `C` in `|D Phi_eps(xi)| <= C + eps |xi|`: the largest
    /// `|D(phi_eps * Phi)|` over a coarse polar grid of radius 100, together
    /// with the recession slopes along the grid directions.
    pub fn calibrate_gradient_constant(&self) -> f64 {
        let m = self.base.dim;
        let mut out = [0.0; 2];
        let mut best: f64 = 0.0;
        let dirs = if m == 1 { 2 } else { 32 };
        for k in 0..dirs {
            let a = k as f64 * std::f64::consts::TAU / dirs as f64;
            let dir = if m == 1 {
                [if k == 0 { 1.0 } else { -1.0 }, 0.0]
            } else {
                [a.cos(), a.sin()]
            };
            for i in 0..=200 {
                let r = 100.0 * (i as f64 / 200.0).powi(2);
                let xi = [r * dir[0], r * dir[1]];
                self.convolution_gradient(&xi[..m], &mut out[..m]);
                best = best.max(norm(&out[..m]));
            }
            if let Ok(slope) = self.base.recession(&dir[..m]) {
                best = best.max(slope);
            }
        }
        best
    }
}

impl Density for MollifiedIntegrand {
    fn dim(&self) -> usize {
        self.base.dim
    }

    fn value(&self, xi: &[f64]) -> f64 {
        let sq: f64 = xi.iter().map(|x| x * x).sum();
        self.convolution(xi) + 0.5 * self.epsilon * sq
    }
}

impl SmoothDensity for MollifiedIntegrand {
    fn gradient(&self, xi: &[f64], out: &mut [f64]) {
        self.conv_derivs(xi, out, None);
        for (o, x) in out.iter_mut().zip(xi) {
            *o += self.epsilon * x;
        }
    }

    fn hessian(&self, xi: &[f64], out: &mut [f64]) {
        let m = self.base.dim;
        let mut g = [0.0; 2];
        self.conv_derivs(xi, &mut g[..m], Some(out));
        for i in 0..m {
            out[i * m + i] += self.epsilon;
        }
        if m == 2 {
            let sym = 0.5 * (out[1] + out[2]);
            out[1] = sym;
            out[2] = sym;
        }
    }
}

/// Shape of an even convex weight `Psi : R -> [0, inf)`.
#[derive(Debug, Clone, PartialEq)]
pub enum WeightKind {
    Absolute,
    Square,
    /// `(|p| - l)_+`
    ShiftedPositivePart(f64),
    /// Piecewise linear with slope 1 on `[0, knots[0])`, the slope growing by
    /// one at every knot and at every dyadic multiple of the last knot.
    Superlinear { knots: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvexWeight {
    kind: WeightKind,
}

impl ConvexWeight {
    pub fn absolute() -> Self {
        ConvexWeight {
            kind: WeightKind::Absolute,
        }
    }

    pub fn square() -> Self {
        ConvexWeight {
            kind: WeightKind::Square,
        }
    }

    pub fn shifted_positive_part(l: f64) -> Result<Self> {
        if !(l >= 0.0 && l.is_finite()) {
            return Err(Error::input(format!("truncation level must be >= 0, got {l}")));
        }
        Ok(ConvexWeight {
            kind: WeightKind::ShiftedPositivePart(l),
        })
    }

    /// Builds the superlinear family from increasing, positive knots.
    pub fn superlinear(mut knots: Vec<f64>) -> Result<Self> {
        if knots.iter().any(|k| !(k.is_finite() && *k > 0.0)) {
            return Err(Error::input("superlinear knots must be positive and finite"));
        }
        knots.sort_by(f64::total_cmp);
        if knots.is_empty() {
            knots.push(1.0);
        }
        Ok(ConvexWeight {
            kind: WeightKind::Superlinear { knots },
        })
    }

    /// Parses `abs`, `square` or `shifted(l)`.
    pub fn parse(spec: &str) -> Result<Self> {
        let Call { name, args } = parse_call(spec)?;
        match (name.as_str(), args.as_slice()) {
            ("abs" | "absolute", []) => Ok(ConvexWeight::absolute()),
            ("square", []) => Ok(ConvexWeight::square()),
            ("shifted" | "positive_part", [l]) => ConvexWeight::shifted_positive_part(*l),
            _ => Err(Error::input(format!("unknown weight `{spec}`"))),
        }
    }

    pub fn kind(&self) -> &WeightKind {
        &self.kind
    }

    pub fn eval(&self, p: f64) -> f64 {
        let a = p.abs();
        match &self.kind {
            WeightKind::Absolute => a,
            WeightKind::Square => a * a,
            WeightKind::ShiftedPositivePart(l) => (a - l).max(0.0),
            WeightKind::Superlinear { knots } => {
                let mut v = a;
                for k in knots {
                    if *k >= a {
                        break;
                    }
                    v += a - k;
                }
                let last = *knots.last().expect("at least one knot");
                let mut k = 2.0 * last;
                while k < a {
                    v += a - k;
                    k *= 2.0;
                }
                v
            }
        }
    }

    /// `lim Psi(p) / p` as `p -> inf` (infinite for superlinear weights).
    pub fn recession_slope(&self) -> f64 {
        match &self.kind {
            WeightKind::Absolute | WeightKind::ShiftedPositivePart(_) => 1.0,
            WeightKind::Square | WeightKind::Superlinear { .. } => f64::INFINITY,
        }
    }

    pub fn spec_string(&self) -> String {
        match &self.kind {
            WeightKind::Absolute => "abs".into(),
            WeightKind::Square => "square".into(),
            WeightKind::ShiftedPositivePart(l) => format!("shifted({l})"),
            WeightKind::Superlinear { knots } => format!("superlinear[{} knots]", knots.len()),
        }
    }
}

impl fmt::Display for ConvexWeight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.spec_string())
    }
}

/// Superlinear even convex weight keeping `sum Psi(s_i)` finite for the given
/// samples (de la Vallee Poussin construction).
///
/// Knot `a_k` is the smallest sample value whose strict upper tail carries at
/// most `2^-k` of the total mass; the slope grows by one at each knot. Then
/// `sum Psi(s_i) <= 2 sum s_i`.
pub fn superlinear_weight_for(samples: &[f64]) -> Result<ConvexWeight> {
    if samples.is_empty() {
        return Err(Error::input("superlinear weight needs at least one sample"));
    }
    if samples.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
        return Err(Error::input("samples must be finite and non-negative"));
    }
    let mut sorted: Vec<f64> = samples.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let total: f64 = sorted.iter().sum();
    let max = sorted[0];
    if total == 0.0 {
        return ConvexWeight::superlinear(vec![1.0]);
    }
    // Strict upper tails: tail[i] = sum of samples strictly above sorted[i].
    let mut tails = Vec::with_capacity(sorted.len());
    let mut acc = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let v = sorted[i];
        let mut j = i;
        while j < sorted.len() && sorted[j] == v {
            j += 1;
        }
        tails.push((v, acc));
        acc += v * (j - i) as f64;
        i = j;
    }
    let mut knots = Vec::new();
    for k in 1..=64 {
        let target = total * 0.5f64.powi(k);
        let knot = tails
            .iter()
            .filter(|(v, tail)| *tail <= target && *v > 0.0)
            .map(|(v, _)| *v)
            .fold(f64::INFINITY, f64::min);
        let knot = if knot.is_finite() { knot } else { max };
        knots.push(knot);
        if knot >= max {
            break;
        }
    }
    ConvexWeight::superlinear(knots)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eval_examples() {
        assert_eq!(Integrand::euclidean(2).unwrap().eval(&[0.0, 0.0]).unwrap(), 0.0);
        assert_eq!(Integrand::area(2).unwrap().eval(&[0.0, 0.0]).unwrap(), 1.0);
        let aniso = Integrand::anisotropic_l1(vec![1.0, 2.0]).unwrap();
        assert_eq!(aniso.eval(&[3.0, -4.0]).unwrap(), 11.0);
    }

    #[test]
    fn eval_rejects_bad_input() {
        let phi = Integrand::euclidean(2).unwrap();
        assert!(matches!(phi.eval(&[1.0]), Err(Error::Input(_))));
        assert!(matches!(phi.eval(&[1.0, f64::NAN]), Err(Error::Input(_))));
    }

    #[test]
    fn mollify_absolute_value_on_affine_piece() {
        let phi = Integrand::euclidean(1).unwrap();
        let m = mollify(&phi, 0.1, 16).unwrap();
        assert!((m.eval(&[1.0]).unwrap() - 1.05).abs() < 1e-14);
        assert!((m.grad(&[1.0]).unwrap()[0] - 1.1).abs() < 1e-14);
        let at_zero = m.eval(&[0.0]).unwrap();
        assert!(at_zero > 0.0 && at_zero < 0.1);
        assert_eq!(m.grad(&[0.0]).unwrap()[0], 0.0);
    }

    #[test]
    fn mollify_rejects_nonpositive_epsilon() {
        let phi = Integrand::euclidean(1).unwrap();
        assert!(matches!(mollify(&phi, 0.0, 16), Err(Error::Input(_))));
        assert!(matches!(mollify(&phi, -1.0, 16), Err(Error::Input(_))));
    }

    #[test]
    fn recession_examples() {
        let e = Integrand::euclidean(2).unwrap();
        assert_eq!(e.recession(&[0.6, 0.8]).unwrap(), 1.0);
        let a = Integrand::area(2).unwrap();
        assert!((a.recession(&[1.0, 0.0]).unwrap() - 1.0).abs() < 1e-15);
        let an = Integrand::anisotropic_l1(vec![1.0, 2.0]).unwrap();
        assert_eq!(an.recession(&[0.0, 1.0]).unwrap(), 2.0);
        assert!(matches!(e.recession(&[1.0, 1.0]), Err(Error::Input(_))));
    }

    #[test]
    fn numeric_recession_agrees_and_detects_divergence() {
        let a = Integrand::area(2).unwrap();
        let v = a.recession_numeric(&[0.0, -1.0]).unwrap();
        assert!((v - 1.0).abs() < 1e-7);
        let s = Integrand::shifted(vec![0.5, -0.25]).unwrap();
        let v = s.recession_numeric(&[0.6, 0.8]).unwrap();
        assert!((v - 1.0).abs() < 1e-6);
        assert!(matches!(numeric_recession(|t| t * t), Err(Error::Divergence { .. })));
    }

    #[test]
    fn parse_round_trips_spec_strings() {
        for (s, m) in [
            ("euclidean", 1),
            ("area", 2),
            ("anisotropic_l1(1,2)", 2),
            ("shifted(0.5)", 1),
            ("asymmetric(1,2)", 1),
        ] {
            let phi = Integrand::parse(s, m).unwrap();
            assert_eq!(Integrand::parse(&phi.spec_string(), m).unwrap(), phi);
        }
        assert!(Integrand::parse("anisotropic_l1(1,2)", 1).is_err());
        assert!(Integrand::parse("cubic", 1).is_err());
    }

    #[test]
    fn shifted_integrand_minimum_is_off_origin() {
        let s = Integrand::shifted(vec![1.0]).unwrap();
        assert!(!s.minimizer_at_zero());
        assert_eq!(s.eval(&[1.0]).unwrap(), 1.0);
        assert_eq!(s.eval(&[0.0]).unwrap(), 2.0);
    }

    #[test]
    fn weights_examples() {
        let w = ConvexWeight::parse("shifted(5)").unwrap();
        assert_eq!(w.eval(7.0), 2.0);
        assert_eq!(w.eval(-3.0), 0.0);
        assert_eq!(ConvexWeight::square().eval(-3.0), 9.0);
        assert!(ConvexWeight::shifted_positive_part(-1.0).is_err());
    }

    #[test]
    fn superlinear_weight_examples() {
        assert!(superlinear_weight_for(&[]).is_err());
        let w = superlinear_weight_for(&[1.0; 50]).unwrap();
        assert_eq!(w.eval(-3.0), w.eval(3.0));
        for k in 0..40 {
            let p = 1.0 + k as f64 * 0.7;
            assert!(w.eval(2.0 * p) >= 2.0 * w.eval(p));
        }
        assert!(w.eval(1e6) / 1e6 > 10.0);
        // Geometric tail: direct summation oracle.
        let samples: Vec<f64> = (0..40).map(|k| 0.5f64.powi(k)).collect();
        let w = superlinear_weight_for(&samples).unwrap();
        let weighted: f64 = samples.iter().map(|s| w.eval(*s)).sum();
        let plain: f64 = samples.iter().sum();
        assert!(weighted.is_finite() && weighted <= 2.0 * plain + 1e-12);
    }
}
