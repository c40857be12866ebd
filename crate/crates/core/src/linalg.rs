//! Small dense helpers shared by the physics modules.

use faer::{c64, Col, Mat, Side};

use crate::{Error, Result};

pub const ZERO: c64 = c64 { re: 0.0, im: 0.0 };
pub const ONE: c64 = c64 { re: 1.0, im: 0.0 };
pub const I: c64 = c64 { re: 0.0, im: 1.0 };

#[inline]
pub fn real(x: f64) -> c64 {
    c64::new(x, 0.0)
}

pub fn zeros(rows: usize, cols: usize) -> Mat<c64> {
    Mat::zeros(rows, cols)
}

pub fn identity(n: usize) -> Mat<c64> {
    Mat::from_fn(n, n, |i, j| if i == j { ONE } else { ZERO })
}

pub fn dagger(a: &Mat<c64>) -> Mat<c64> {
    a.adjoint().to_owned()
}

pub fn scale(a: &Mat<c64>, s: c64) -> Mat<c64> {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] * s)
}

pub fn trace(a: &Mat<c64>) -> c64 {
    (0..a.nrows().min(a.ncols())).map(|i| a[(i, i)]).sum()
}

/// Largest elementwise modulus.
pub fn max_abs(a: &Mat<c64>) -> f64 {
    let mut m = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            m = m.max(a[(i, j)].norm());
        }
    }
    m
}

pub fn max_abs_diff(a: &Mat<c64>, b: &Mat<c64>) -> f64 {
    assert_eq!((a.nrows(), a.ncols()), (b.nrows(), b.ncols()));
    let mut m = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            m = m.max((a[(i, j)] - b[(i, j)]).norm());
        }
    }
    m
}

pub fn frobenius(a: &Mat<c64>) -> f64 {
    let mut s = 0.0;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            s += a[(i, j)].norm_sqr();
        }
    }
    s.sqrt()
}

/// Induced 1-norm (maximum absolute column sum).
pub fn norm_one(a: &Mat<c64>) -> f64 {
    (0..a.ncols())
        .map(|j| (0..a.nrows()).map(|i| a[(i, j)].norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Max elementwise deviation from Hermiticity, ‖A − A†‖_max.
pub fn hermiticity_defect(a: &Mat<c64>) -> f64 {
    let n = a.nrows();
    let mut m = 0.0f64;
    for j in 0..n {
        for i in 0..=j {
            m = m.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    m
}

/// (A + A†)/2
pub fn hermitize(a: &Mat<c64>) -> Mat<c64> {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| {
        (a[(i, j)] + a[(j, i)].conj()) * 0.5
    })
}

/// Kronecker product `A ⊗ B`.
pub fn kron(a: &Mat<c64>, b: &Mat<c64>) -> Mat<c64> {
    let (ar, ac) = (a.nrows(), a.ncols());
    let (br, bc) = (b.nrows(), b.ncols());
    let mut out = Mat::zeros(ar * br, ac * bc);
    for ja in 0..ac {
        for ia in 0..ar {
            let s = a[(ia, ja)];
            if s == ZERO {
                continue;
            }
            for jb in 0..bc {
                for ib in 0..br {
                    out[(ia * br + ib, ja * bc + jb)] = s * b[(ib, jb)];
                }
            }
        }
    }
    out
}

/// Eigenvalues of a Hermitian matrix in ascending order. Only the lower
/// triangle is read, so callers should hermitize first.
pub fn hermitian_eigenvalues(a: &Mat<c64>) -> Result<Vec<f64>> {
    a.self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::NoConvergence(format!("{e:?}")))
}

pub fn min_eigenvalue(rho: &Mat<c64>) -> Result<f64> {
    let ev = hermitian_eigenvalues(&hermitize(rho))?;
    Ok(ev.first().copied().unwrap_or(0.0))
}

pub fn col_max_abs(v: &Col<c64>) -> f64 {
    (0..v.nrows()).map(|i| v[i].norm()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kron_block_layout() {
        let a = Mat::from_fn(2, 2, |i, j| real((1 + i + 2 * j) as f64));
        let b = identity(2);
        let k = kron(&a, &b);
        assert_eq!(k.nrows(), 4);
        // block (0,1) of A ⊗ I is a[0,1]·I
        assert_eq!(k[(0, 2)], real(3.0));
        assert_eq!(k[(1, 3)], real(3.0));
        assert_eq!(k[(0, 3)], ZERO);
    }

    #[test]
    fn hermitize_is_projection() {
        let a = Mat::from_fn(3, 3, |i, j| c64::new(i as f64, j as f64 * 0.5));
        let h = hermitize(&a);
        assert!(hermiticity_defect(&h) < 1e-15);
        assert!(max_abs_diff(&hermitize(&h), &h) < 1e-15);
    }

    #[test]
    fn one_norm_is_column_sum() {
        let a = Mat::from_fn(2, 2, |i, j| real(if j == 1 { -(i as f64 + 2.0) } else { 1.0 }));
        assert_eq!(norm_one(&a), 5.0);
    }
}
