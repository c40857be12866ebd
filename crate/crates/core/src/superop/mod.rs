//! Superoperator representation of the Lindblad generator.
//!
//! Density matrices are vectorized by stacking columns, so that
//! `vec(A X B) = (Bᵀ ⊗ A) vec(X)`. The Liouvillian is a dense `D² × D²`
//! matrix in that convention and its spectrum is computed on the
//! number-diagonal sector (see [`Spectrum`]).

mod liouvillian;
mod spectrum;

pub use liouvillian::{Liouvillian, LiouvillianTag};
pub use spectrum::{spectrum, steady_state, SpectralOptions, Spectrum, SteadyState};

use faer::{c64, Col, Mat};

use crate::{Error, Result};

/// Column-stacking vectorization, `vec(ρ)[i + D·j] = ρ[i, j]`.
pub fn vectorize(rho: &Mat<c64>) -> Col<c64> {
    let d = rho.nrows();
    Col::from_fn(d * rho.ncols(), |k| rho[(k % d, k / d)])
}

/// Inverse of [`vectorize`] for square matrices.
pub fn devectorize(v: &Col<c64>) -> Result<Mat<c64>> {
    let n = v.nrows();
    let d = (n as f64).sqrt().round() as usize;
    if d * d != n {
        return Err(Error::NotSquare(n));
    }
    Ok(Mat::from_fn(d, d, |i, j| v[i + d * j]))
}
