//! Krylov estimates of operator norms.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

const START_SEED: u64 = 0x5eed_0f_1a_2c;
const MAX_KRYLOV: usize = 120;

fn start_vector(n: usize) -> CVector {
    let mut rng = ChaCha8Rng::seed_from_u64(START_SEED ^ n as u64);
    let v = CVector::from_fn(n, |_, _| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    let norm = v.norm();
    v / Complex64::from(norm)
}

/// Largest singular value of the operator given by `apply` and its adjoint.
///
/// Lanczos on `T^H T` with full reorthogonalization, stopped when the top
/// Ritz value moves by less than `tol` (relative).
pub fn top_singular_value(
    n: usize,
    apply: &dyn Fn(&CVector) -> CVector,
    apply_adjoint: &dyn Fn(&CVector) -> CVector,
    tol: f64,
) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let steps = n.min(MAX_KRYLOV);
    let mut basis: Vec<CVector> = Vec::with_capacity(steps);
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut q = start_vector(n);
    let mut theta_prev = f64::NAN;
    let mut theta = 0.0;
    for j in 0..steps {
        let mut w = apply_adjoint(&apply(&q));
        let alpha = q.dotc(&w).re;
        basis.push(q.clone());
        alphas.push(alpha);
        // two passes of Gram–Schmidt against the whole basis
        for _ in 0..2 {
            for b in &basis {
                let c = b.dotc(&w);
                w.axpy(-c, b, Complex64::from(1.0));
            }
        }
        theta = tridiagonal_max(&alphas, &betas);
        let beta = w.norm();
        let converged = j > 0 && (theta - theta_prev).abs() <= tol * theta.abs();
        if converged || beta <= 1e-14 * theta.abs().max(1e-300) || theta == 0.0 && beta == 0.0 {
            break;
        }
        theta_prev = theta;
        betas.push(beta);
        q = w / Complex64::from(beta);
    }
    theta.max(0.0).sqrt()
}

fn tridiagonal_max(alphas: &[f64], betas: &[f64]) -> f64 {
    let m = alphas.len();
    let t = DMatrix::<f64>::from_fn(m, m, |i, j| {
        if i == j {
            alphas[i]
        } else if i + 1 == j {
            betas[i]
        } else if j + 1 == i {
            betas[j]
        } else {
            0.0
        }
    });
    t.symmetric_eigenvalues().max()
}

/// Spectral norm of a dense matrix.
pub fn spectral_norm(a: &CMatrix) -> f64 {
    debug_assert!(a.is_square());
    let adj = a.adjoint();
    top_singular_value(a.nrows(), &|v| a * v, &|v| &adj * v, 1e-12)
}

/// Plain power iteration on `A^H A`; slower than [`spectral_norm`], kept for cross-checks.
pub fn power_iteration_norm(a: &CMatrix, tol: f64, max_iter: usize) -> f64 {
    let n = a.nrows();
    if n == 0 {
        return 0.0;
    }
    let mut v = start_vector(n);
    let mut sigma = 0.0;
    for _ in 0..max_iter {
        let av = a * &v;
        let next = av.norm();
        let w = a.ad_mul(&av);
        let wn = w.norm();
        if wn == 0.0 {
            return 0.0;
        }
        v = w / Complex64::from(wn);
        if (next - sigma).abs() <= tol * next {
            return next;
        }
        sigma = next;
    }
    sigma
}

/// Exact induced 1-norm (max column sum).
pub fn one_norm(a: &CMatrix) -> f64 {
    a.column_iter().map(|c| c.iter().map(|z| z.norm()).sum::<f64>()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scaled_identity() {
        let a = CMatrix::identity(7, 7) * Complex64::new(0.0, -2.5);
        assert!((spectral_norm(&a) - 2.5).abs() < 1e-12);
        assert!((power_iteration_norm(&a, 1e-12, 100) - 2.5).abs() < 1e-12);
    }

    #[test]
    fn zero_matrix() {
        assert_eq!(spectral_norm(&CMatrix::zeros(5, 5)), 0.0);
    }

    #[test]
    fn matches_dense_svd() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 40;
        let a = CMatrix::from_fn(n, n, |_, _| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        let svd = a.clone().svd(false, false).singular_values.max();
        assert!((spectral_norm(&a) - svd).abs() < 1e-10 * svd);
    }
}
