//! Scaling-and-squaring matrix exponential with diagonal Padé approximants
//! (degrees 3, 5, 7, 9, 13; Higham 2005).

use faer::linalg::solvers::Solve;
use faer::{c64, Mat};

use crate::linalg::{identity, norm_one};
use crate::superop::Liouvillian;
use crate::{Error, Result};

const THETA: [(usize, f64); 5] = [
    (3, 1.495585217958292e-2),
    (5, 2.539398330063230e-1),
    (7, 9.504178996162932e-1),
    (9, 2.097847961257068e0),
    (13, 5.371920351148152e0),
];

const B3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const B5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const B7: [f64; 8] = [17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0];
const B9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const B13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

/// Deepest squaring chain we accept before reporting overflow.
const MAX_SQUARINGS: u64 = 64;

/// Propagator `exp(ℒ t)` over the full Liouville space.
pub fn expm_pade(lv: &Liouvillian, t: f64) -> Result<Mat<c64>> {
    if !t.is_finite() {
        return Err(Error::param("t", format!("time must be finite, got {t}")));
    }
    let n = lv.matrix().nrows();
    let a = Mat::from_fn(n, n, |i, j| lv.matrix()[(i, j)] * t);
    expm(&a)
}

/// `exp(A)` for a dense complex matrix.
pub fn expm(a: &Mat<c64>) -> Result<Mat<c64>> {
    let n = a.nrows();
    let norm = norm_one(a);
    if !norm.is_finite() {
        return Err(Error::ExpmOverflow {
            norm,
            squarings: u64::MAX,
        });
    }
    if n == 0 || norm == 0.0 {
        return Ok(identity(n));
    }

    for &(m, theta) in &THETA[..4] {
        if norm <= theta {
            let coeffs: &[f64] = match m {
                3 => &B3,
                5 => &B5,
                7 => &B7,
                _ => &B9,
            };
            return pade_low(a, coeffs);
        }
    }

    let theta13 = THETA[4].1;
    let squarings = (norm / theta13).log2().ceil().max(0.0) as u64;
    if squarings > MAX_SQUARINGS {
        return Err(Error::ExpmOverflow { norm, squarings });
    }
    let s = 0.5f64.powi(squarings as i32);
    let scaled = Mat::from_fn(n, n, |i, j| a[(i, j)] * s);
    let mut x = pade13(&scaled)?;
    for _ in 0..squarings {
        x = &x * &x;
    }
    if !x.norm_max().is_finite() {
        return Err(Error::ExpmOverflow { norm, squarings });
    }
    Ok(x)
}

fn lincomb(terms: &[(f64, &Mat<c64>)], n: usize) -> Mat<c64> {
    Mat::from_fn(n, n, |i, j| {
        terms.iter().map(|(c, m)| m[(i, j)] * *c).sum()
    })
}

fn add_diag(m: &mut Mat<c64>, c: f64) {
    for i in 0..m.nrows() {
        m[(i, i)] += c64::new(c, 0.0);
    }
}

/// Solves `(V − U) X = V + U`.
fn pade_ratio(u: Mat<c64>, v: Mat<c64>) -> Result<Mat<c64>> {
    let n = u.nrows();
    let p = Mat::from_fn(n, n, |i, j| v[(i, j)] + u[(i, j)]);
    let q = Mat::from_fn(n, n, |i, j| v[(i, j)] - u[(i, j)]);
    let x = q.partial_piv_lu().solve(&p);
    if !x.norm_max().is_finite() {
        return Err(Error::NoConvergence("singular Padé denominator".into()));
    }
    Ok(x)
}

fn pade_low(a: &Mat<c64>, b: &[f64]) -> Result<Mat<c64>> {
    let n = a.nrows();
    let a2 = a * a;
    // powers A², A⁴, … up to the degree
    let mut even_powers = vec![identity(n), a2.clone()];
    while 2 * even_powers.len() < b.len() {
        let next = even_powers.last().unwrap() * &a2;
        even_powers.push(next);
    }
    let odd: Vec<(f64, &Mat<c64>)> = (0..b.len() / 2).map(|k| (b[2 * k + 1], &even_powers[k])).collect();
    let even: Vec<(f64, &Mat<c64>)> = (0..b.len() / 2).map(|k| (b[2 * k], &even_powers[k])).collect();
    let u = a * lincomb(&odd, n);
    let v = lincomb(&even, n);
    pade_ratio(u, v)
}

fn pade13(a: &Mat<c64>) -> Result<Mat<c64>> {
    let n = a.nrows();
    let b = &B13;
    let a2 = a * a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let inner_u = lincomb(&[(b[13], &a6), (b[11], &a4), (b[9], &a2)], n);
    let mut tail_u = lincomb(&[(b[7], &a6), (b[5], &a4), (b[3], &a2)], n);
    add_diag(&mut tail_u, b[1]);
    let u = a * (&a6 * &inner_u + &tail_u);

    let inner_v = lincomb(&[(b[12], &a6), (b[10], &a4), (b[8], &a2)], n);
    let mut tail_v = lincomb(&[(b[6], &a6), (b[4], &a4), (b[2], &a2)], n);
    add_diag(&mut tail_v, b[0]);
    let v = &a6 * &inner_v + &tail_v;
    pade_ratio(u, v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{max_abs_diff, real};

    fn diag(vals: &[c64]) -> Mat<c64> {
        let n = vals.len();
        Mat::from_fn(n, n, |i, j| if i == j { vals[i] } else { c64::new(0.0, 0.0) })
    }

    #[test]
    fn zero_matrix_gives_identity() {
        let z = Mat::<c64>::zeros(4, 4);
        assert_eq!(max_abs_diff(&expm(&z).unwrap(), &identity(4)), 0.0);
    }

    #[test]
    fn diagonal_matches_scalar_exp_across_degrees() {
        for scale in [1e-3, 0.1, 0.8, 2.0, 5.0, 40.0, 300.0] {
            let vals = [c64::new(-scale, 0.3 * scale), c64::new(-0.5 * scale, -scale), real(0.0)];
            let e = expm(&diag(&vals)).unwrap();
            for (k, v) in vals.iter().enumerate() {
                let rel = (e[(k, k)] - v.exp()).norm() / v.exp().norm().max(1e-300);
                assert!(rel < 1e-12, "scale {scale}: {rel}");
            }
        }
    }

    #[test]
    fn nilpotent_series_terminates() {
        // exp([[0, x], [0, 0]]) = [[1, x], [0, 1]]
        let mut a = Mat::<c64>::zeros(2, 2);
        a[(0, 1)] = real(7.5);
        let e = expm(&a).unwrap();
        let mut expect = identity(2);
        expect[(0, 1)] = real(7.5);
        assert!(max_abs_diff(&e, &expect) < 1e-12);
    }

    #[test]
    fn rotation_generator() {
        // exp(θ [[0, −1], [1, 0]]) is a rotation
        let theta = 2.3;
        let mut a = Mat::<c64>::zeros(2, 2);
        a[(0, 1)] = real(-theta);
        a[(1, 0)] = real(theta);
        let e = expm(&a).unwrap();
        assert!((e[(0, 0)] - real(theta.cos())).norm() < 1e-14);
        assert!((e[(1, 0)] - real(theta.sin())).norm() < 1e-14);
    }

    #[test]
    fn overflow_is_reported() {
        let a = diag(&[real(1e300), real(-1e300)]);
        assert!(matches!(expm(&a), Err(Error::ExpmOverflow { .. })));
        let inf = diag(&[real(f64::INFINITY)]);
        assert!(matches!(expm(&inf), Err(Error::ExpmOverflow { .. })));
    }
}
