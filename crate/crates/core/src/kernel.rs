//! The standard bump mollifier and the one-dimensional profiles derived from it.
//!
//! The mollifier is `c_m exp(-1 / (1 - |z|^2))` on the unit ball of `R^m`.
//! Convolving `|.|` in one variable with its marginal density gives the profile
//! `H(s) = int m(z) |s - z| dz`, which is tabulated once per dimension on
//! `[0, 1]` together with `H' = 2M - 1` and `H'' = 2m` (`M` the marginal CDF)
//! and interpolated with quintic Hermite pieces, so the interpolant's
//! derivatives are exactly the derivatives of the interpolated value.

use std::f64::consts::PI;
use std::sync::OnceLock;

use crate::quadrature::GaussRule;

const TABLE_CELLS: usize = 4096;
const CELL_ORDER: usize = 8;
const SLICE_ORDER: usize = 48;
const RADIAL_ORDER: usize = 48;
const RADIAL_CELLS: usize = 4096;
const RADIAL_SPAN: f64 = 2.0;
const RADIAL_TERMS: usize = 40;

/// Quintic Hermite interpolation of `(f, f', f'')` tabulated at spacing `dx`
/// from zero; returns the interpolant and its first two derivatives at `x`.
fn hermite(value: &[f64], d1: &[f64], d2: &[f64], dx: f64, x: f64) -> (f64, f64, f64) {
    let cells = value.len() - 1;
    let pos = x / dx;
    let i = (pos.floor() as usize).min(cells - 1);
    let t = pos - i as f64;
    let (f0, g0, c0) = (value[i], d1[i] * dx, d2[i] * dx * dx);
    let (f1, g1, c1) = (value[i + 1], d1[i + 1] * dx, d2[i + 1] * dx * dx);
    let a0 = f0;
    let a1 = g0;
    let a2 = 0.5 * c0;
    let big_f = f1 - (a0 + a1 + a2);
    let big_g = g1 - (a1 + 2.0 * a2);
    let big_k = c1 - 2.0 * a2;
    let a3 = 10.0 * big_f - 4.0 * big_g + 0.5 * big_k;
    let a4 = -15.0 * big_f + 7.0 * big_g - big_k;
    let a5 = 6.0 * big_f - 3.0 * big_g + 0.5 * big_k;
    let p = a0 + t * (a1 + t * (a2 + t * (a3 + t * (a4 + t * a5))));
    let dp = a1 + t * (2.0 * a2 + t * (3.0 * a3 + t * (4.0 * a4 + t * 5.0 * a5)));
    let ddp = 2.0 * a2 + t * (6.0 * a3 + t * (12.0 * a4 + t * 20.0 * a5));
    (p, dp / dx, ddp / (dx * dx))
}

/// Unnormalized bump as a function of the squared radius.
pub fn bump(r2: f64) -> f64 {
    if r2 >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - r2)).exp()
    }
}

/// Value and first two derivatives of a one-dimensional profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet {
    pub value: f64,
    pub d1: f64,
    pub d2: f64,
}

/// Value and derivatives of the radial profile `G(r) = (phi * |.|)(r e)` in 2D.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialJet {
    pub value: f64,
    pub d1: f64,
    /// `G'(r) / r`, continuous at `r = 0`.
    pub d1_over_r: f64,
    pub d2: f64,
}

/// Normalized mollifier in dimension 1 or 2 with its tabulated profile.
#[derive(Debug)]
pub struct Kernel {
    dim: usize,
    norm: f64,
    value: Vec<f64>,
    d1: Vec<f64>,
    d2: Vec<f64>,
    radial_rule: GaussRule,
    radial: Option<RadialTable>,
}

/// Tabulated radial profile on `[0, RADIAL_SPAN]` and, beyond it, the
/// coefficients `c_k M_k` of the excess `sum_k c_k M_k r^-(2k+1)`.
#[derive(Debug)]
struct RadialTable {
    value: Vec<f64>,
    d1: Vec<f64>,
    d2: Vec<f64>,
    series: Vec<f64>,
}

static KERNEL_1D: OnceLock<Kernel> = OnceLock::new();
static KERNEL_2D: OnceLock<Kernel> = OnceLock::new();

/// Shared kernel for dimension `dim` (1 or 2).
pub fn kernel(dim: usize) -> &'static Kernel {
    match dim {
        1 => KERNEL_1D.get_or_init(|| Kernel::build(1)),
        2 => KERNEL_2D.get_or_init(|| Kernel::build(2)),
        _ => panic!("mollifier kernel supports dimensions 1 and 2, got {dim}"),
    }
}

impl Kernel {
    fn build(dim: usize) -> Self {
        let fine = GaussRule::new(CELL_ORDER);
        let raw_mass = match dim {
            1 => fine.integrate_composite(-1.0, 1.0, 512, |z| bump(z * z)),
            _ => 2.0 * PI * fine.integrate_composite(0.0, 1.0, 512, |r| r * bump(r * r)),
        };
        let norm = 1.0 / raw_mass;
        let slice = GaussRule::new(SLICE_ORDER);
        let marginal = |z: f64| -> f64 {
            match dim {
                1 => norm * bump(z * z),
                _ => {
                    let w2 = 1.0 - z * z;
                    if w2 <= 0.0 {
                        return 0.0;
                    }
                    let w = w2.sqrt();
                    norm * slice.integrate(-w, w, |y| bump(z * z + y * y))
                }
            }
        };

        let k = TABLE_CELLS;
        let step = 1.0 / k as f64;
        let dens: Vec<f64> = (0..=k).map(|i| marginal(i as f64 * step)).collect();
        // Per-cell integrals of m and z m.
        let mut mass = vec![0.0; k];
        let mut moment = vec![0.0; k];
        for i in 0..k {
            let lo = i as f64 * step;
            mass[i] = fine.integrate(lo, lo + step, marginal);
            moment[i] = fine.integrate(lo, lo + step, |z| z * marginal(z));
        }
        let half: f64 = mass.iter().sum();
        let scale = 0.5 / half;

        let mut cdf = vec![0.5; k + 1];
        for i in 0..k {
            cdf[i + 1] = cdf[i] + scale * mass[i];
        }
        let mut tail = vec![0.0; k + 1];
        for i in (0..k).rev() {
            tail[i] = tail[i + 1] + scale * moment[i];
        }
        let mut value = vec![0.0; k + 1];
        let mut d1 = vec![0.0; k + 1];
        let mut d2 = vec![0.0; k + 1];
        for i in 0..=k {
            let s = i as f64 * step;
            value[i] = s * (2.0 * cdf[i] - 1.0) + 2.0 * tail[i];
            d1[i] = 2.0 * cdf[i] - 1.0;
            d2[i] = 2.0 * scale * dens[i];
        }
        value[k] = 1.0;
        d1[k] = 1.0;
        d2[k] = 0.0;

        let mut kernel = Kernel {
            dim,
            norm: norm * scale,
            value,
            d1,
            d2,
            radial_rule: GaussRule::new(RADIAL_ORDER),
            radial: None,
        };
        if dim == 2 {
            kernel.radial = Some(kernel.build_radial());
        }
        kernel
    }

    fn build_radial(&self) -> RadialTable {
        let step = RADIAL_SPAN / RADIAL_CELLS as f64;
        let jets: Vec<RadialJet> = (0..=RADIAL_CELLS)
            .map(|i| self.radial_quadrature(i as f64 * step))
            .collect();
        let fine = GaussRule::new(CELL_ORDER);
        // M_k = int_0^1 (H(s) - s) s^(2k) ds, times the binomial series
        // coefficients of (1 - s^2/r^2)^(-1/2).
        let mut series = Vec::with_capacity(RADIAL_TERMS);
        let mut c = 1.0;
        for k in 0..RADIAL_TERMS {
            let moment = fine.integrate_composite(0.0, 1.0, 256, |s| {
                (self.profile(s).value - s) * s.powi(2 * k as i32)
            });
            series.push(c * moment);
            c *= (2 * k + 1) as f64 / (2 * k + 2) as f64;
        }
        RadialTable {
            value: jets.iter().map(|j| j.value).collect(),
            d1: jets.iter().map(|j| j.d1).collect(),
            d2: jets.iter().map(|j| j.d2).collect(),
            series,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Normalized mollifier density at a point of the unit ball.
    pub fn density(&self, r2: f64) -> f64 {
        self.norm * bump(r2)
    }

    /// `H(s)`, the convolution of `|.|` with the marginal density, for unit width.
    pub fn profile(&self, s: f64) -> Jet {
        let a = s.abs();
        let sign = if s < 0.0 { -1.0 } else { 1.0 };
        if a >= 1.0 {
            return Jet {
                value: a,
                d1: sign,
                d2: 0.0,
            };
        }
        let (p, dp, ddp) = hermite(&self.value, &self.d1, &self.d2, 1.0 / TABLE_CELLS as f64, a);
        Jet {
            value: p,
            d1: sign * dp,
            // H'' = 2m is nonnegative; the interpolant can dip below zero in the flat tail.
            d2: ddp.max(0.0),
        }
    }

    /// Radial profile of the 2D convolution `phi * |.|` at radius `r >= 0`, unit width.
    ///
    /// Uses `|x| = (1/2) int_0^pi |x . theta| d alpha`, which turns the 2D
    /// convolution into an angular average of the 1D profile; only the arc
    /// where `|x . theta| < 1` differs from `|x|`.
    pub fn radial(&self, r: f64) -> RadialJet {
        debug_assert_eq!(self.dim, 2);
        let r = r.abs();
        let radial = self.radial.as_ref().expect("radial table exists in 2D");
        if r == 0.0 {
            let d2 = radial.d2[0];
            return RadialJet {
                value: radial.value[0],
                d1: 0.0,
                d1_over_r: d2,
                d2,
            };
        }
        if r < RADIAL_SPAN {
            let (p, dp, ddp) = hermite(&radial.value, &radial.d1, &radial.d2, RADIAL_SPAN / RADIAL_CELLS as f64, r);
            return RadialJet {
                value: p,
                d1: dp,
                d1_over_r: dp / r,
                d2: ddp.max(0.0),
            };
        }
        // Beyond r = 1 the excess is int_0^1 (H(s) - s) / sqrt(r^2 - s^2) ds,
        // expanded in powers of 1/r^2.
        let x = 1.0 / (r * r);
        let (mut e, mut e1, mut e2) = (0.0, 0.0, 0.0);
        for (k, c) in radial.series.iter().enumerate().rev() {
            let n = (2 * k + 1) as f64;
            e = e * x + c;
            e1 = e1 * x + n * c;
            e2 = e2 * x + n * (n + 1.0) * c;
        }
        let d1 = 1.0 - e1 * x;
        RadialJet {
            value: r + e / r,
            d1,
            d1_over_r: d1 / r,
            d2: e2 * x / r,
        }
    }

    /// The radial profile by direct angular quadrature of the 1D profile.
    fn radial_quadrature(&self, r: f64) -> RadialJet {
        let r = r.abs();
        let d2_at_zero = self.profile(0.0).d2 * PI / 4.0;
        if r == 0.0 {
            return RadialJet {
                value: self.profile(0.0).value * PI / 2.0,
                d1: 0.0,
                d1_over_r: d2_at_zero,
                d2: d2_at_zero,
            };
        }
        let inside = r <= 1.0;
        let upper = if inside { PI / 2.0 } else { (1.0 / r).asin() };
        let mut excess = 0.0;
        let mut slope = 0.0;
        let mut curv = 0.0;
        let half = 0.5 * upper;
        for (x, w) in self.radial_rule.nodes.iter().zip(&self.radial_rule.weights) {
            let t = half * (1.0 + x);
            let (st, _) = t.sin_cos();
            let jet = self.profile(r * st);
            excess += w * (jet.value - r * st);
            slope += w * if inside { jet.d1 * st } else { (jet.d1 - 1.0) * st };
            curv += w * jet.d2 * st * st;
        }
        excess *= half;
        slope *= half;
        curv *= half;
        let d1 = if inside { slope } else { 1.0 + slope };
        RadialJet {
            value: r + excess,
            d1,
            d1_over_r: d1 / r,
            d2: curv,
        }
    }

    /// Symmetric quadrature on the unit ball with weights that sum to one.
    ///
    /// 1D: Gauss-Legendre with `order` nodes. 2D: `order` Gauss radial nodes
    /// times `2 * order` equispaced angles.
    pub fn ball_rule(&self, order: usize) -> Vec<([f64; 2], f64)> {
        let radial = GaussRule::new(order.max(1));
        let mut out = Vec::new();
        match self.dim {
            1 => {
                for (x, w) in radial.nodes.iter().zip(&radial.weights) {
                    out.push(([*x, 0.0], w * bump(x * x)));
                }
            }
            _ => {
                let angles = 2 * order.max(1);
                for (x, w) in radial.nodes.iter().zip(&radial.weights) {
                    let rho = 0.5 * (1.0 + x);
                    let wr = 0.5 * w * rho * bump(rho * rho);
                    for j in 0..angles {
                        let a = (j as f64 + 0.5) * 2.0 * PI / angles as f64;
                        out.push(([rho * a.cos(), rho * a.sin()], wr));
                    }
                }
            }
        }
        let total: f64 = out.iter().map(|(_, w)| w).sum();
        for (_, w) in &mut out {
            *w /= total;
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profile_matches_absolute_value_outside_support() {
        for dim in [1, 2] {
            let k = kernel(dim);
            let j = k.profile(1.5);
            assert_eq!(j.value, 1.5);
            assert_eq!(j.d1, 1.0);
            let j = k.profile(-0.999_999);
            assert!((j.value - 0.999_999).abs() < 1e-12);
            assert!((j.d1 + 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn profile_is_even_with_positive_curvature() {
        let k = kernel(1);
        for i in 0..200 {
            let s = -1.0 + i as f64 * 0.01;
            let a = k.profile(s);
            let b = k.profile(-s);
            assert!((a.value - b.value).abs() < 1e-15);
            assert!((a.d1 + b.d1).abs() < 1e-15);
            assert!(a.d2 >= -1e-12);
        }
        assert_eq!(k.profile(0.0).d1, 0.0);
    }

    #[test]
    fn profile_at_zero_is_first_absolute_moment() {
        // Independent route: direct quadrature of int phi(z)|z| dz.
        let rule = GaussRule::new(16);
        for dim in [1usize, 2] {
            let k = kernel(dim);
            let moment = match dim {
                1 => 2.0 * rule.integrate_composite(0.0, 1.0, 256, |z| k.density(z * z) * z),
                _ => {
                    // marginal first moment: int int phi(z,y)|z| dz dy
                    let inner = |z: f64| {
                        let w = (1.0 - z * z).max(0.0).sqrt();
                        rule.integrate_composite(-w, w, 8, |y| k.density(z * z + y * y))
                    };
                    2.0 * rule.integrate_composite(0.0, 1.0, 256, |z| inner(z) * z)
                }
            };
            let got = k.profile(0.0).value;
            assert!((got - moment).abs() < 1e-10, "dim {dim}: {got} vs {moment}");
        }
    }

    #[test]
    fn radial_profile_matches_direct_ball_quadrature() {
        let k = kernel(2);
        let rule = GaussRule::new(24);
        for &r in &[0.0, 0.3, 0.9, 1.2, 3.0] {
            // Polar quadrature of phi(z) |r e1 - z| with the kink resolved by many angles.
            let n_ang = 2000;
            let val = rule.integrate_composite(0.0, 1.0, 16, |rho| {
                let mut acc = 0.0;
                for j in 0..n_ang {
                    let a = (j as f64 + 0.5) * 2.0 * PI / n_ang as f64;
                    let (s, c) = a.sin_cos();
                    acc += ((r - rho * c).powi(2) + (rho * s).powi(2)).sqrt();
                }
                rho * k.density(rho * rho) * acc * 2.0 * PI / n_ang as f64
            });
            let got = k.radial(r).value;
            assert!((got - val).abs() < 2e-6, "r={r}: {got} vs {val}");
        }
    }

    #[test]
    fn radial_table_and_series_match_angular_quadrature() {
        let k = kernel(2);
        for i in 0..=400 {
            let r = 0.0125 * i as f64 + 1e-3;
            let a = k.radial(r);
            let b = k.radial_quadrature(r);
            assert!((a.value - b.value).abs() < 1e-12, "r={r}");
            assert!((a.d1 - b.d1).abs() < 1e-10, "r={r}");
            assert!((a.d2 - b.d2).abs() < 1e-7 * (1.0 + b.d2), "r={r}: {} vs {}", a.d2, b.d2);
        }
        for r in [10.0, 1e3, 1e6] {
            let a = k.radial(r);
            let b = k.radial_quadrature(r);
            assert!((a.value - b.value).abs() < 1e-12 * r);
            assert!((a.d1 - b.d1).abs() < 1e-12);
        }
    }

    #[test]
    fn ball_rule_is_normalized_and_centered() {
        for dim in [1, 2] {
            let rule = kernel(dim).ball_rule(16);
            let total: f64 = rule.iter().map(|(_, w)| w).sum();
            let cx: f64 = rule.iter().map(|(p, w)| p[0] * w).sum();
            let cy: f64 = rule.iter().map(|(p, w)| p[1] * w).sum();
            assert!((total - 1.0).abs() < 1e-14);
            assert!(cx.abs() < 1e-15 && cy.abs() < 1e-15);
        }
    }
}
