use std::f64::consts::PI;

use nalgebra::{Matrix2, SymmetricEigen};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::integrand::{mollify, Integrand, MollifiedIntegrand, SmoothDensity, DEFAULT_QUADRATURE_ORDER};
use crate::kernel::kernel;
use crate::par::Exec;
use crate::quadrature::simpson;

use super::EstimateReport;

/// Radii of the sweep: log-spaced from `1e-3` to `1e3`.
pub const SWEEP_RADII: usize = 601;
/// Directions of the sweep in 2D.
pub const SWEEP_DIRS: usize = 32;
/// Random Hessian sample points per integrand and epsilon.
pub const HESSIAN_SAMPLES: usize = 10_000;

/// Integrands shipped with the library, in both dimensions where that makes sense.
pub fn library_integrands() -> Vec<Integrand> {
    vec![
        Integrand::euclidean(1).unwrap(),
        Integrand::euclidean(2).unwrap(),
        Integrand::area(1).unwrap(),
        Integrand::area(2).unwrap(),
        Integrand::anisotropic_l1(vec![1.0, 2.0]).unwrap(),
        Integrand::shifted(vec![0.5]).unwrap(),
        Integrand::shifted(vec![0.3, -0.2]).unwrap(),
        Integrand::asymmetric(1.0, 2.0).unwrap(),
    ]
}

/// `||D phi||_{L^1}` of the unit-width mollifier.
pub fn kernel_gradient_l1(dim: usize) -> f64 {
    let k = kernel(dim);
    if dim == 1 {
        2.0 * k.density(0.0)
    } else {
        2.0 * PI * simpson(0.0, 1.0, 2048, |r| k.density(r * r))
    }
}

fn directions(m: usize) -> Vec<[f64; 2]> {
    if m == 1 {
        vec![[1.0, 0.0], [-1.0, 0.0]]
    } else {
        (0..SWEEP_DIRS)
            .map(|k| {
                let a = 2.0 * PI * (k as f64 + 0.25) / SWEEP_DIRS as f64;
                [a.cos(), a.sin()]
            })
            .collect()
    }
}

/// `(r, max_theta |D Phi_eps(r theta)| - eps r)` on the radial sweep.
pub fn radial_sweep(phi: &MollifiedIntegrand) -> Vec<(f64, f64)> {
    let m = phi.dim();
    let eps = phi.epsilon();
    let dirs = directions(m);
    let mut g = [0.0; 2];
    (0..SWEEP_RADII)
        .map(|i| {
            let r = 10f64.powf(-3.0 + 6.0 * i as f64 / (SWEEP_RADII - 1) as f64);
            let worst = dirs
                .iter()
                .map(|d| {
                    let xi = [r * d[0], r * d[1]];
                    phi.gradient(&xi[..m], &mut g[..m]);
                    g[..m].iter().map(|x| x * x).sum::<f64>().sqrt() - eps * r
                })
                .fold(f64::NEG_INFINITY, f64::max);
            (r, worst)
        })
        .collect()
}

/// Least-squares slope of `y` against `log10 r` over the last decade.
pub fn trailing_slope(sweep: &[(f64, f64)]) -> f64 {
    let rmax = sweep.iter().map(|p| p.0).fold(0.0, f64::max);
    let tail: Vec<(f64, f64)> = sweep
        .iter()
        .filter(|p| p.0 >= rmax / 10.0 * (1.0 - 1e-12))
        .map(|p| (p.0.log10(), p.1))
        .collect();
    let n = tail.len() as f64;
    let mx = tail.iter().map(|p| p.0).sum::<f64>() / n;
    let my = tail.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = tail.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = tail.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// Hessian statistics at seeded random points: worst mixed-derivative excess
/// `|H_ij| - (H_ii + H_jj)/2`, smallest eigenvalue, largest eigenvalue.
pub fn hessian_samples(phi: &MollifiedIntegrand, count: usize, seed: u64) -> (f64, f64, f64) {
    let m = phi.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut h = [0.0; 4];
    let mut mixed = f64::NEG_INFINITY;
    let mut lo = f64::INFINITY;
    let mut hi: f64 = 0.0;
    for _ in 0..count {
        let r = 10f64.powf(rng.random_range(-3.0..3.0));
        let a = rng.random_range(0.0..2.0 * PI);
        let xi = if m == 1 {
            [if a < PI { r } else { -r }, 0.0]
        } else {
            [r * a.cos(), r * a.sin()]
        };
        phi.hessian(&xi[..m], &mut h[..m * m]);
        if m == 1 {
            mixed = mixed.max(0.0);
            lo = lo.min(h[0]);
            hi = hi.max(h[0].abs());
        } else {
            mixed = mixed.max(h[1].abs() - 0.5 * (h[0] + h[3]));
            let eig = SymmetricEigen::new(Matrix2::new(h[0], h[1], h[2], h[3])).eigenvalues;
            lo = lo.min(eig.min());
            hi = hi.max(eig.amax());
        }
    }
    (mixed, lo, hi)
}

/// Reports for one integrand and one epsilon.
pub fn derivative_bounds(phi: &Integrand, eps: f64, seed: u64) -> Result<Vec<EstimateReport>> {
    let p = mollify(phi, eps, DEFAULT_QUADRATURE_ORDER)?;
    let scenario = format!("{} eps={eps:e} seed={seed}", phi.spec_string());
    let sweep = radial_sweep(&p);
    let c = sweep.iter().map(|s| s.1).fold(f64::NEG_INFINITY, f64::max);
    let slope = trailing_slope(&sweep);
    let (mixed, lo, hi) = hessian_samples(&p, HESSIAN_SAMPLES, seed);
    let bound = phi.growth_upper() * kernel_gradient_l1(phi.dim()) / eps + eps;
    Ok(vec![
        EstimateReport::new("dphi_eps_constant", c, phi.growth_upper(), 1e-9, scenario.clone())
            .at_epsilon(eps),
        EstimateReport::new("dphi_eps_trailing_slope", slope.abs(), 1e-3, 0.0, scenario.clone())
            .at_epsilon(eps),
        EstimateReport::new("hessian_mixed_derivative", mixed, 0.0, 1e-9 * hi.max(1.0), scenario.clone())
            .at_epsilon(eps),
        EstimateReport::new("hessian_lower_eigenvalue", eps, lo, 1e-9 * hi.max(1.0), scenario.clone())
            .at_epsilon(eps),
        EstimateReport::new("hessian_upper_bound", hi, bound, 1e-9 * bound, scenario).at_epsilon(eps),
    ])
}

/// [`derivative_bounds`] over every pair, scenarios in parallel.
pub fn derivative_bound_suite(
    phis: &[Integrand],
    epsilons: &[f64],
    seed: u64,
    exec: Exec,
) -> Result<Vec<EstimateReport>> {
    let pairs: Vec<(usize, usize)> = (0..phis.len())
        .flat_map(|i| (0..epsilons.len()).map(move |j| (i, j)))
        .collect();
    let chunks = exec.map_tasks(pairs.len(), |k| {
        let (i, j) = pairs[k];
        derivative_bounds(&phis[i], epsilons[j], seed.wrapping_add(k as u64))
    });
    let mut out = Vec::new();
    for c in chunks {
        out.extend(c?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_gradient_norms() {
        // the 1D bump is 0.443994 / e at the origin
        assert!((kernel_gradient_l1(1) - 2.0 * (-1f64).exp() / 0.443_993_816_168_079_4).abs() < 1e-9);
        assert!(kernel_gradient_l1(2) > 0.0);
    }

    #[test]
    fn euclidean_line_constant_is_one() {
        let p = mollify(&Integrand::euclidean(1).unwrap(), 0.1, 16).unwrap();
        let s = radial_sweep(&p);
        let c = s.iter().map(|x| x.1).fold(f64::NEG_INFINITY, f64::max);
        assert!((c - 1.0).abs() < 1e-6, "{c}");
        assert!(trailing_slope(&s).abs() < 1e-12);
    }
}
