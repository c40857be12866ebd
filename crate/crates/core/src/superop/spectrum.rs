//! Biorthogonal eigendecomposition of a Liouvillian.
//!
//! Modes are computed on the number-diagonal sector of Liouville space, the
//! span of `|i⟩⟨j|` with `N_i = N_j`. The generator never couples that
//! sector to coherences between different particle numbers, and physical
//! density matrices live entirely inside it, so the sector carries every
//! mode that a state can populate. Without particle-number labels the
//! sector is the whole space.
//!
//! Gauge conventions:
//! - eigenvalues sorted by descending `Re λ`, then ascending `|Im λ|`, then
//!   ascending `Im λ`, with ties resolved at `degeneracy_tol`;
//! - inside a cluster of degenerate eigenvalues the basis is rotated so that
//!   the left modes are ordered by ascending coupling to site populations
//!   (modes blind to every diagonal state come first);
//! - right modes have unit Frobenius norm and their largest entry is real
//!   positive, except zero modes with nonzero trace, which get unit trace;
//! - left modes are the rows of the inverse right-mode matrix, hence
//!   `Tr[lᵢ† rⱼ] = δᵢⱼ`.

use faer::linalg::solvers::DenseSolveCore;
use faer::{c64, Col, Mat};

use super::Liouvillian;
use crate::linalg::{hermiticity_defect, hermitize, min_eigenvalue, real, trace, ZERO};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct SpectralOptions {
    /// Largest accepted condition number of the right-mode matrix.
    pub cond_limit: f64,
    /// Eigenvalues closer than this are treated as one degenerate cluster.
    pub degeneracy_tol: f64,
    /// `|λ|` below this counts as a zero mode.
    pub zero_tol: f64,
}

impl Default for SpectralOptions {
    fn default() -> Self {
        Self {
            cond_limit: 1e8,
            degeneracy_tol: 1e-9,
            zero_tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Spectrum {
    dim: usize,
    sector: Vec<usize>,
    /// position of each vectorized index inside `sector`, or `usize::MAX`
    slot: Vec<usize>,
    eigenvalues: Vec<c64>,
    /// sector × modes, column j is vec(rⱼ) restricted to the sector
    right: Mat<c64>,
    /// modes × sector, row j is vec(lⱼ)† restricted to the sector
    left_adj: Mat<c64>,
    cond_estimate: f64,
    generator: Mat<c64>,
    zero_tol: f64,
}

/// Full biorthogonal spectrum with default options.
pub fn spectrum(lv: &Liouvillian) -> Result<Spectrum> {
    Spectrum::compute(lv, SpectralOptions::default())
}

impl Spectrum {
    pub fn compute(lv: &Liouvillian, opts: SpectralOptions) -> Result<Self> {
        let d = lv.dim();
        let sector = lv.sector_indices();
        let mut slot = vec![usize::MAX; d * d];
        for (p, &k) in sector.iter().enumerate() {
            slot[k] = p;
        }
        let n = sector.len();
        let full = lv.matrix();
        let generator = Mat::from_fn(n, n, |i, j| full[(sector[i], sector[j])]);

        let evd = generator
            .eigen()
            .map_err(|e| Error::NoConvergence(format!("{e:?}")))?;
        let raw: Vec<c64> = (0..n).map(|k| evd.S().column_vector()[k]).collect();
        if raw.iter().any(|l| !l.re.is_finite() || !l.im.is_finite()) {
            return Err(Error::NoConvergence("non-finite eigenvalue".into()));
        }
        let order = sorted_order(&raw, opts.degeneracy_tol);
        let vecs = evd.U();
        let mut eigenvalues: Vec<c64> = order.iter().map(|&k| raw[k]).collect();
        let mut right = Mat::from_fn(n, n, |i, j| vecs[(i, order[j])]);
        normalize_columns(&mut right);

        let cond_estimate = condition_number(&right)?;
        if !(cond_estimate <= opts.cond_limit) {
            return Err(Error::DefectiveSpectrum {
                cond: cond_estimate,
                limit: opts.cond_limit,
                closest: closest_pair(&eigenvalues),
            });
        }
        let mut left_adj = right.partial_piv_lu().inverse();

        let populations: Vec<usize> = (0..d).map(|s| slot[s + d * s]).collect();
        for range in clusters(&eigenvalues, opts.degeneracy_tol) {
            if range.len() > 1 {
                fix_cluster_gauge(&mut right, &mut left_adj, &mut eigenvalues, range, &populations)?;
            }
        }

        // final per-mode scale and phase
        for j in 0..n {
            let col_norm = (0..n).map(|i| right[(i, j)].norm_sqr()).sum::<f64>().sqrt();
            let tr: c64 = populations.iter().map(|&p| right[(p, j)]).sum();
            let factor = if eigenvalues[j].norm() < opts.zero_tol && tr.norm() > 1e-12 * col_norm {
                tr.inv()
            } else {
                let lead = leading_entry(&right, j);
                (lead.conj() / lead.norm()) / col_norm
            };
            for i in 0..n {
                right[(i, j)] *= factor;
            }
            let inv = factor.inv();
            for i in 0..n {
                left_adj[(j, i)] *= inv;
            }
        }

        Ok(Self {
            dim: d,
            sector,
            slot,
            eigenvalues,
            right,
            left_adj,
            cond_estimate,
            generator,
            zero_tol: opts.zero_tol,
        })
    }

    /// Hilbert-space dimension `D`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of modes (the size of the number-diagonal sector).
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn eigenvalues(&self) -> &[c64] {
        &self.eigenvalues
    }

    pub fn eigenvalue(&self, j: usize) -> Result<c64> {
        self.check_index(j)?;
        Ok(self.eigenvalues[j])
    }

    pub fn cond_estimate(&self) -> f64 {
        self.cond_estimate
    }

    pub fn zero_tol(&self) -> f64 {
        self.zero_tol
    }

    /// Vectorized indices spanned by the modes.
    pub fn sector(&self) -> &[usize] {
        &self.sector
    }

    fn check_index(&self, j: usize) -> Result<()> {
        if j >= self.len() {
            return Err(Error::ModeOutOfRange {
                index: j,
                count: self.len(),
            });
        }
        Ok(())
    }

    fn embed(&self, v: impl Fn(usize) -> c64) -> Mat<c64> {
        let d = self.dim;
        let mut m = Mat::zeros(d, d);
        for (p, &k) in self.sector.iter().enumerate() {
            m[(k % d, k / d)] = v(p);
        }
        m
    }

    pub fn right_mode(&self, j: usize) -> Result<Mat<c64>> {
        self.check_index(j)?;
        Ok(self.embed(|p| self.right[(p, j)]))
    }

    pub fn left_mode(&self, j: usize) -> Result<Mat<c64>> {
        self.check_index(j)?;
        Ok(self.embed(|p| self.left_adj[(j, p)].conj()))
    }

    /// Restricts `ρ` to the sector, rejecting weight outside it.
    pub fn project(&self, rho: &Mat<c64>) -> Result<Col<c64>> {
        let d = self.dim;
        if rho.nrows() != d || rho.ncols() != d {
            return Err(Error::DimensionMismatch {
                context: "density matrix vs spectrum",
                expected: d,
                found: rho.nrows(),
            });
        }
        let mut outside = 0.0f64;
        for j in 0..d {
            for i in 0..d {
                if self.slot[i + d * j] == usize::MAX {
                    outside = outside.max(rho[(i, j)].norm());
                }
            }
        }
        if outside > 1e-12 {
            return Err(Error::OutsideSector(outside));
        }
        Ok(Col::from_fn(self.sector.len(), |p| {
            let k = self.sector[p];
            rho[(k % d, k / d)]
        }))
    }

    pub fn unproject(&self, v: &Col<c64>) -> Mat<c64> {
        self.embed(|p| v[p])
    }

    /// Modal coefficients `αⱼ = Tr[lⱼ† ρ]`.
    pub fn decompose(&self, rho: &Mat<c64>) -> Result<Vec<c64>> {
        let v = self.project(rho)?;
        let a = &self.left_adj * &v;
        Ok((0..a.nrows()).map(|j| a[j]).collect())
    }

    /// `Σⱼ cⱼ rⱼ`.
    pub fn reconstruct(&self, coeffs: &[c64]) -> Result<Mat<c64>> {
        if coeffs.len() != self.len() {
            return Err(Error::DimensionMismatch {
                context: "modal coefficients",
                expected: self.len(),
                found: coeffs.len(),
            });
        }
        let c = Col::from_fn(coeffs.len(), |j| coeffs[j]);
        Ok(self.unproject(&(&self.right * &c)))
    }

    /// `Tr[lⱼ† ρ]` for a single mode.
    pub fn amplitude(&self, j: usize, rho: &Mat<c64>) -> Result<c64> {
        self.check_index(j)?;
        let v = self.project(rho)?;
        Ok((0..v.nrows()).map(|p| self.left_adj[(j, p)] * v[p]).sum())
    }

    /// `Tr[lⱼ† X]` for every mode and an arbitrary sector vector `X`.
    pub(crate) fn amplitudes_of(&self, v: &Col<c64>) -> Col<c64> {
        &self.left_adj * v
    }

    pub(crate) fn combine(&self, coeffs: &Col<c64>) -> Col<c64> {
        &self.right * coeffs
    }

    /// Sector × modes matrix of right modes.
    pub(crate) fn right_matrix(&self) -> &Mat<c64> {
        &self.right
    }

    /// Modes × sector matrix whose rows are `vec(lⱼ)†`.
    pub(crate) fn left_adj_matrix(&self) -> &Mat<c64> {
        &self.left_adj
    }

    /// Sector block of the generator the modes diagonalize.
    pub fn generator(&self) -> &Mat<c64> {
        &self.generator
    }

    /// `max |Tr[lᵢ† rⱼ] − δᵢⱼ|`.
    pub fn biorthonormality_residual(&self) -> f64 {
        let g = &self.left_adj * &self.right;
        let n = self.len();
        let mut m = 0.0f64;
        for j in 0..n {
            for i in 0..n {
                let target = if i == j { 1.0 } else { 0.0 };
                m = m.max((g[(i, j)] - real(target)).norm());
            }
        }
        m
    }

    /// Indices of modes with `|λ| <` the zero tolerance.
    pub fn zero_modes(&self) -> Vec<usize> {
        (0..self.len())
            .filter(|&j| self.eigenvalues[j].norm() < self.zero_tol)
            .collect()
    }

    /// Index of the mode whose eigenvalue is the complex conjugate of mode `j`
    /// (mode `j` itself for real eigenvalues), when one exists.
    pub fn conjugate_partner(&self, j: usize, tol: f64) -> Option<usize> {
        let target = self.eigenvalues.get(j)?.conj();
        if (target - self.eigenvalues[j]).norm() < tol {
            return Some(j);
        }
        let lo = j.saturating_sub(2);
        let hi = (j + 3).min(self.len());
        (lo..hi)
            .filter(|&k| k != j)
            .find(|&k| (self.eigenvalues[k] - target).norm() < tol)
    }
}

#[derive(Debug, Clone)]
pub struct SteadyState {
    rho: Mat<c64>,
}

impl SteadyState {
    pub fn rho(&self) -> &Mat<c64> {
        &self.rho
    }

    pub fn into_rho(self) -> Mat<c64> {
        self.rho
    }
}

/// Unit-trace, Hermitized zero mode. Fails on a degenerate or traceless
/// zero eigenspace instead of picking one arbitrarily.
pub fn steady_state(spec: &Spectrum) -> Result<SteadyState> {
    let zeros = spec.zero_modes();
    if zeros.len() != 1 {
        return Err(Error::DegenerateSteadyState(zeros.len()));
    }
    let r0 = spec.right_mode(zeros[0])?;
    let tr = trace(&r0);
    if tr.norm() < 1e-12 {
        return Err(Error::TracelessZeroMode(tr.norm()));
    }
    let inv = tr.inv();
    let rho = hermitize(&Mat::from_fn(r0.nrows(), r0.ncols(), |i, j| r0[(i, j)] * inv));

    let tr = trace(&rho);
    if (tr - real(1.0)).norm() > 1e-12 {
        return Err(Error::SteadyStateCheck(format!("trace {tr}")));
    }
    let herm = hermiticity_defect(&rho);
    if herm > 1e-12 {
        return Err(Error::SteadyStateCheck(format!("Hermiticity defect {herm:.3e}")));
    }
    let min = min_eigenvalue(&rho)?;
    if min < -1e-10 {
        return Err(Error::SteadyStateCheck(format!("negative eigenvalue {min:.3e}")));
    }
    let v = spec.project(&rho)?;
    let res = spec.generator() * &v;
    let res = (0..res.nrows()).map(|k| res[k].norm()).fold(0.0, f64::max);
    if res > 1e-10 {
        return Err(Error::SteadyStateCheck(format!("‖ℒ[ρ_ss]‖ = {res:.3e}")));
    }
    Ok(SteadyState { rho })
}

/// Sort key: descending real part, then ascending |imag|, then ascending imag.
/// Values within `tol` compare equal at each level so that round-off never
/// reorders degenerate partners.
fn sorted_order(vals: &[c64], tol: f64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..vals.len()).collect();
    idx.sort_by(|&a, &b| vals[b].re.total_cmp(&vals[a].re));
    let mut out = Vec::with_capacity(idx.len());
    for group in split_runs(&idx, |k| -vals[k].re, tol) {
        let mut g = group.to_vec();
        g.sort_by(|&a, &b| vals[a].im.abs().total_cmp(&vals[b].im.abs()));
        for sub in split_runs(&g, |k| vals[k].im.abs(), tol) {
            let mut s = sub.to_vec();
            s.sort_by(|&a, &b| vals[a].im.total_cmp(&vals[b].im));
            out.extend(s);
        }
    }
    out
}

/// Splits an ascending-by-`key` slice into runs whose keys stay within `tol`
/// of the first element of the run.
fn split_runs(idx: &[usize], key: impl Fn(usize) -> f64, tol: f64) -> Vec<&[usize]> {
    let mut runs = Vec::new();
    let mut start = 0;
    for k in 1..=idx.len() {
        if k == idx.len() || key(idx[k]) - key(idx[start]) > tol {
            runs.push(&idx[start..k]);
            start = k;
        }
    }
    runs
}

fn clusters(vals: &[c64], tol: f64) -> Vec<std::ops::Range<usize>> {
    let mut out = Vec::new();
    let mut start = 0;
    for k in 1..=vals.len() {
        if k == vals.len() || (vals[k] - vals[start]).norm() > tol {
            out.push(start..k);
            start = k;
        }
    }
    out
}

fn normalize_columns(m: &mut Mat<c64>) {
    for j in 0..m.ncols() {
        let norm = (0..m.nrows()).map(|i| m[(i, j)].norm_sqr()).sum::<f64>().sqrt();
        if norm > 0.0 {
            for i in 0..m.nrows() {
                m[(i, j)] /= norm;
            }
        }
    }
}

fn condition_number(m: &Mat<c64>) -> Result<f64> {
    let sv = m
        .singular_values()
        .map_err(|e| Error::NoConvergence(format!("{e:?}")))?;
    let max = sv.first().copied().unwrap_or(0.0);
    let min = sv.last().copied().unwrap_or(0.0);
    Ok(if min > 0.0 { max / min } else { f64::INFINITY })
}

fn closest_pair(vals: &[c64]) -> (c64, c64) {
    let mut best = (f64::INFINITY, ZERO, ZERO);
    for i in 0..vals.len() {
        for j in i + 1..vals.len() {
            let dist = (vals[i] - vals[j]).norm();
            if dist < best.0 {
                best = (dist, vals[i], vals[j]);
            }
        }
    }
    (best.1, best.2)
}

/// First entry whose modulus is within a relative 1e-8 of the column maximum.
fn leading_entry(m: &Mat<c64>, j: usize) -> c64 {
    let max = (0..m.nrows()).map(|i| m[(i, j)].norm()).fold(0.0, f64::max);
    (0..m.nrows())
        .map(|i| m[(i, j)])
        .find(|v| v.norm() >= max * (1.0 - 1e-8))
        .unwrap_or(real(1.0))
}

/// Rotates a degenerate block by the left singular vectors of its
/// population-coupling matrix `C[i, s] = Tr[lᵢ† |s⟩⟨s|]`, smallest coupling first.
fn fix_cluster_gauge(
    right: &mut Mat<c64>,
    left_adj: &mut Mat<c64>,
    eigenvalues: &mut [c64],
    range: std::ops::Range<usize>,
    populations: &[usize],
) -> Result<()> {
    let k = range.len();
    let n = right.nrows();
    let coupling = Mat::from_fn(k, populations.len(), |i, s| {
        let p = populations[s];
        if p == usize::MAX {
            ZERO
        } else {
            left_adj[(range.start + i, p)]
        }
    });
    let svd = coupling
        .svd()
        .map_err(|e| Error::NoConvergence(format!("{e:?}")))?;
    // singular values come in nonincreasing order; reverse for ascending coupling
    let u = Mat::from_fn(k, k, |i, j| svd.U()[(i, k - 1 - j)]);

    let block_r = Mat::from_fn(n, k, |i, j| right[(i, range.start + j)]);
    let block_l = Mat::from_fn(k, n, |i, j| left_adj[(range.start + i, j)]);
    let new_r = &block_r * &u;
    let new_l = u.adjoint() * &block_l;
    for j in 0..k {
        for i in 0..n {
            right[(i, range.start + j)] = new_r[(i, j)];
            left_adj[(range.start + j, i)] = new_l[(j, i)];
        }
    }
    let mean = eigenvalues[range.clone()].iter().sum::<c64>() / real(k as f64);
    for v in &mut eigenvalues[range] {
        *v = mean;
    }
    Ok(())
}
