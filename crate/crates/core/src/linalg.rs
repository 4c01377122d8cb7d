//! Minimal complex Hermitian linear algebra for the tap-domain solve.
//!
//! Matrices are dense row-major `n x n`; only the lower triangle of the
//! Cholesky factor is referenced after decomposition. Sizes here are the
//! number of channel taps, so cubic costs are irrelevant.


use alloc::vec::Vec;
use num_complex::Complex64;
#[cfg(not(feature = "std"))]
use num_traits::Float;

/// In-place lower Cholesky factorization of a Hermitian positive-definite
/// matrix. Fails when a pivot is not strictly positive.
pub(crate) fn cholesky_in_place(a: &mut [Complex64], n: usize) -> Result<(), ()> {
    debug_assert_eq!(a.len(), n * n);
    for j in 0..n {
        let mut d = a[j * n + j].re;
        for p in 0..j {
            d -= a[j * n + p].norm_sqr();
        }
        if !d.is_finite() || d <= 0.0 {
            return Err(());
        }
        let l_jj = d.sqrt();
        a[j * n + j] = Complex64::new(l_jj, 0.0);
        for i in (j + 1)..n {
            let mut s = a[i * n + j];
            for p in 0..j {
                s -= a[i * n + p] * a[j * n + p].conj();
            }
            a[i * n + j] = s / l_jj;
        }
    }
    Ok(())
}

/// Solve `L y = b` in place (lower triangular forward substitution).
pub(crate) fn forward_solve(l: &[Complex64], n: usize, b: &mut [Complex64]) {
    for i in 0..n {
        let mut s = b[i];
        for p in 0..i {
            s -= l[i * n + p] * b[p];
        }
        b[i] = s / l[i * n + i].re;
    }
}

/// Solve `L^H x = y` in place (conjugate-transposed back substitution).
pub(crate) fn backward_solve(l: &[Complex64], n: usize, b: &mut [Complex64]) {
    for i in (0..n).rev() {
        let mut s = b[i];
        for p in (i + 1)..n {
            s -= l[p * n + i].conj() * b[p];
        }
        b[i] = s / l[i * n + i].re;
    }
}

/// Solve `A x = b` given the Cholesky factor of `A`.
pub(crate) fn chol_solve(l: &[Complex64], n: usize, b: &[Complex64]) -> Vec<Complex64> {
    let mut x = b.to_vec();
    forward_solve(l, n, &mut x);
    backward_solve(l, n, &mut x);
    x
}

/// `v^H A^{-1} v = |L^{-1} v|^2` given the Cholesky factor of `A`.
pub(crate) fn quadratic_form_inv(l: &[Complex64], n: usize, v: &[Complex64]) -> f64 {
    let mut u = v.to_vec();
    forward_solve(l, n, &mut u);
    u.iter().map(|z| z.norm_sqr()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn solves_known_hermitian_system() {
        // A = B B^H + I for a fixed B, solution checked by residual.
        let n = 3;
        let b_mat = [
            c(1.0, 0.5),
            c(0.2, -0.3),
            c(0.0, 1.0),
            c(-0.7, 0.1),
            c(0.4, 0.4),
            c(1.2, 0.0),
            c(0.3, -0.9),
            c(0.5, 0.2),
            c(-0.1, 0.6),
        ];
        let mut a = vec![c(0.0, 0.0); n * n];
        for i in 0..n {
            for j in 0..n {
                let mut s = if i == j { c(1.0, 0.0) } else { c(0.0, 0.0) };
                for p in 0..n {
                    s += b_mat[i * n + p] * b_mat[j * n + p].conj();
                }
                a[i * n + j] = s;
            }
        }
        let rhs = [c(1.0, -1.0), c(0.5, 0.25), c(-2.0, 0.1)];
        let mut l = a.clone();
        cholesky_in_place(&mut l, n).unwrap();
        let x = chol_solve(&l, n, &rhs);
        for i in 0..n {
            let mut r = c(0.0, 0.0);
            for j in 0..n {
                r += a[i * n + j] * x[j];
            }
            assert!((r - rhs[i]).norm() < 1e-12);
        }
        // Quadratic form against the explicit solve.
        let q = quadratic_form_inv(&l, n, &rhs);
        let direct: Complex64 = rhs.iter().zip(&x).map(|(r, xi)| r.conj() * xi).sum();
        assert!((q - direct.re).abs() < 1e-12);
    }

    #[test]
    fn rejects_indefinite_matrix() {
        let mut a = vec![c(-1.0, 0.0)];
        assert!(cholesky_in_place(&mut a, 1).is_err());
    }
}
