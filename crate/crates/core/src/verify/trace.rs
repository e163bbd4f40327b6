use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::par::Exec;

use super::EstimateReport;

fn spectral_norm_sym(a: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(a.clone())
        .eigenvalues
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()))
}

fn check_symmetric(name: &str, a: &DMatrix<f64>) -> Result<()> {
    if !a.is_square() {
        return Err(Error::input(format!("{name} must be square")));
    }
    let scale = a.amax().max(1.0);
    if (a - a.transpose()).amax() > 1e-12 * scale {
        return Err(Error::input(format!("{name} is not symmetric")));
    }
    Ok(())
}

fn check_psd(name: &str, a: &DMatrix<f64>) -> Result<()> {
    let eig = SymmetricEigen::new(a.clone()).eigenvalues;
    let scale = a.amax().max(1.0);
    if eig.iter().any(|l| *l < -1e-12 * scale) {
        return Err(Error::input(format!("{name} is not positive semidefinite")));
    }
    Ok(())
}

/// `tr(A C B C)` for symmetric PSD `A`, `B` and symmetric `C`.
pub fn trace_acbc(a: &DMatrix<f64>, b: &DMatrix<f64>, c: &DMatrix<f64>) -> Result<f64> {
    check_symmetric("A", a)?;
    check_symmetric("B", b)?;
    check_symmetric("C", c)?;
    if a.shape() != b.shape() || a.shape() != c.shape() {
        return Err(Error::input("A, B and C must have the same size"));
    }
    check_psd("A", a)?;
    check_psd("B", b)?;
    Ok((a * c * b * c).trace())
}

/// `1e-10 ||A|| ||B|| ||C||^2` in spectral norms.
pub fn trace_scale(a: &DMatrix<f64>, b: &DMatrix<f64>, c: &DMatrix<f64>) -> f64 {
    spectral_norm_sym(a) * spectral_norm_sym(b) * spectral_norm_sym(c).powi(2)
}

/// Seeded random instance: Gram matrices `G^T G` (with a random rank) and a
/// symmetrized Gaussian `C`.
pub fn random_instance(m: usize, rng: &mut ChaCha8Rng) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
    let mut gauss = |r: usize, c: usize| DMatrix::from_fn(r, c, |_, _| StandardNormal.sample(rng));
    let ka = 1 + (m * 7 + 3) % m.max(1);
    let ga: DMatrix<f64> = gauss(ka.max(1), m);
    let gb: DMatrix<f64> = gauss(m, m);
    let mc: DMatrix<f64> = gauss(m, m);
    let a = ga.transpose() * &ga;
    let b = gb.transpose() * &gb;
    let c = (&mc + mc.transpose()) * 0.5;
    (a, b, c)
}

/// `count` random instances per dimension `1..=max_dim`; one report per
/// dimension with `lhs = -min tr(ACBC)/scale`.
pub fn trace_suite(max_dim: usize, count: usize, seed: u64, exec: Exec) -> Result<Vec<EstimateReport>> {
    let rows = exec.map_tasks(max_dim, |k| -> Result<EstimateReport> {
        let m = k + 1;
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(m as u64));
        let mut worst = f64::INFINITY;
        for _ in 0..count {
            let (a, b, c) = random_instance(m, &mut rng);
            let t = trace_acbc(&a, &b, &c)?;
            let s = trace_scale(&a, &b, &c);
            worst = worst.min(if s > 0.0 { t / s } else { 0.0 });
        }
        Ok(EstimateReport::new(
            "trace_acbc_nonnegative",
            -worst,
            0.0,
            1e-10,
            format!("m={m}, {count} instances, seed={seed}"),
        ))
    });
    rows.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_example() {
        for m in 1..=4 {
            let i = DMatrix::<f64>::identity(m, m);
            assert_eq!(trace_acbc(&i, &i, &i).unwrap(), m as f64);
        }
    }

    #[test]
    fn off_diagonal_example() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let b = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 1.0]);
        let c = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        assert_eq!(trace_acbc(&a, &b, &c).unwrap(), 1.0);
    }

    #[test]
    fn preconditions() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        let i = DMatrix::<f64>::identity(2, 2);
        assert!(trace_acbc(&a, &i, &i).is_err());
        let neg = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(trace_acbc(&neg, &i, &i).is_err());
        assert!(trace_acbc(&i, &neg, &neg).is_err());
        assert!(trace_acbc(&i, &i, &neg).is_ok());
    }
}
