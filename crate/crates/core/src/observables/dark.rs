use std::f64::consts::PI;

use faer::{c64, Col};

use crate::model::{build_bond, Basis, BondPhase, Boundary, LatticeSpec};
use crate::Result;

/// Phase mismatch and annihilation residual tolerance.
const DARK_TOL: f64 = 1e-12;

/// `k = 2πn/L` for `n ∈ (−L/2, L/2]`.
pub fn momentum_grid(l: usize) -> Vec<f64> {
    let l = l as i64;
    let lo = -(l / 2) + if l % 2 == 0 { 1 } else { 0 };
    (lo..=l / 2).map(|n| 2.0 * PI * n as f64 / l as f64).collect()
}

/// Normalized `L^{-1/2} Σⱼ e^{ikj} |j⟩` in the one-particle basis.
pub fn plane_wave(l: usize, k: f64) -> Col<c64> {
    let norm = (l as f64).sqrt().recip();
    Col::from_fn(l, |i| c64::from_polar(norm, k * (i + 1) as f64))
}

/// Largest `‖Oⱼ|k⟩‖` over the periodic bond operators with unit rate.
pub fn bond_annihilation_residual(l: usize, phase: BondPhase, q: usize, k: f64) -> Result<f64> {
    let spec = LatticeSpec::new(l, 1.0, Boundary::Periodic)?;
    let ops = build_bond(&spec, &Basis::single_particle(l), 1.0, phase, q)?;
    let psi = plane_wave(l, k);
    Ok(ops
        .iter()
        .map(|o| {
            let out = o.matrix() * &psi;
            (0..l).map(|i| out[i].norm_sqr()).sum::<f64>().sqrt()
        })
        .fold(0.0, f64::max))
}

/// Momenta whose plane waves are dark under every periodic bond operator
/// `(|j⟩ + a|j+q⟩)(⟨j| − a⟨j+q|)`, i.e. those with `a·e^{ikq} = 1`.
/// Each candidate is confirmed against the explicit operators.
pub fn dark_momenta(l: usize, phase: BondPhase, q: usize) -> Result<Vec<f64>> {
    let a = phase.sign();
    let mut out = Vec::new();
    for k in momentum_grid(l) {
        let mismatch = (c64::from_polar(a, k * q as f64) - c64::new(1.0, 0.0)).norm();
        if mismatch < DARK_TOL && bond_annihilation_residual(l, phase, q, k)? < DARK_TOL {
            out.push(k);
        }
    }
    Ok(out)
}
