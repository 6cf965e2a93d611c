//! Minimal dense linear algebra for the small (p x p) systems produced by
//! the regression fitters. Row-major storage throughout.

use crate::error::{Error, Result};

/// Solve `A x = b` for a symmetric positive definite matrix via Cholesky.
/// `names` provides the design-column labels used to report the failing
/// pivot when the system is (numerically) rank deficient.
pub fn solve_spd(a: &[f64], b: &[f64], p: usize, names: &[String]) -> Result<Vec<f64>> {
    assert_eq!(a.len(), p * p);
    assert_eq!(b.len(), p);
    assert_eq!(names.len(), p);

    let max_diag = (0..p).map(|k| a[k * p + k].abs()).fold(0.0f64, f64::max);
    let tol = 1e-12 * max_diag.max(1.0);

    // Lower-triangular factor, stored dense.
    let mut l = vec![0.0; p * p];
    for k in 0..p {
        let mut pivot = a[k * p + k];
        for j in 0..k {
            pivot -= l[k * p + j] * l[k * p + j];
        }
        if !(pivot > tol) {
            return Err(Error::LinearAlgebra {
                message: format!("non-positive pivot {pivot:.3e} during factorization"),
                column: names[k].clone(),
            });
        }
        let lkk = pivot.sqrt();
        l[k * p + k] = lkk;
        for i in (k + 1)..p {
            let mut v = a[i * p + k];
            for j in 0..k {
                v -= l[i * p + j] * l[k * p + j];
            }
            l[i * p + k] = v / lkk;
        }
    }

    // Forward then backward substitution.
    let mut y = vec![0.0; p];
    for i in 0..p {
        let mut v = b[i];
        for j in 0..i {
            v -= l[i * p + j] * y[j];
        }
        y[i] = v / l[i * p + i];
    }
    let mut x = vec![0.0; p];
    for i in (0..p).rev() {
        let mut v = y[i];
        for j in (i + 1)..p {
            v -= l[j * p + i] * x[j];
        }
        x[i] = v / l[i * p + i];
    }
    Ok(x)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// rank-1 update: m += scale * v v' (dense symmetric, full storage).
pub fn add_outer(m: &mut [f64], v: &[f64], scale: f64) {
    let p = v.len();
    for i in 0..p {
        for j in 0..p {
            m[i * p + j] += scale * v[i] * v[j];
        }
    }
}

pub fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |acc, x| acc.max(x.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("c{i}")).collect()
    }

    #[test]
    fn solves_a_known_spd_system() {
        // A = [[4,2],[2,3]], b = [2,5] -> x = [-0.5, 2]
        let a = [4.0, 2.0, 2.0, 3.0];
        let x = solve_spd(&a, &[2.0, 5.0], 2, &names(2)).unwrap();
        assert!((x[0] + 0.5).abs() < 1e-12);
        assert!((x[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn reports_the_failing_column() {
        // Second column is a duplicate of the first: singular at pivot 1.
        let a = [1.0, 1.0, 1.0, 1.0];
        let err = solve_spd(&a, &[1.0, 1.0], 2, &names(2)).unwrap_err();
        match err {
            Error::LinearAlgebra { column, .. } => assert_eq!(column, "c1"),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn empty_system_is_fine() {
        let x = solve_spd(&[], &[], 0, &[]).unwrap();
        assert!(x.is_empty());
    }
}
