//! Single-particle lattice models: basis, tight-binding Hamiltonian and
//! jump-operator families.
//!
//! Sites are numbered `1..=L`. In the single-particle basis site `j` sits at
//! index `j - 1`; the vacuum-extended basis puts the vacuum at index 0 and
//! site `j` at index `j`. Loss channels need the vacuum-extended basis since
//! they leave the one-particle sector.

use faer::{c64, Mat};
use serde::{Deserialize, Serialize};

use crate::linalg::{hermiticity_defect, real, ZERO};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Open,
    Periodic,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatticeSpec {
    sites: usize,
    hopping: f64,
    boundary: Boundary,
}

impl LatticeSpec {
    pub fn new(sites: usize, hopping: f64, boundary: Boundary) -> Result<Self> {
        if sites < 2 {
            return Err(Error::param("L", format!("need at least 2 sites, got {sites}")));
        }
        if !hopping.is_finite() {
            return Err(Error::param("J", "hopping must be finite"));
        }
        Ok(Self {
            sites,
            hopping,
            boundary,
        })
    }

    /// Open chain with `J = 1`.
    pub fn open(sites: usize) -> Result<Self> {
        Self::new(sites, 1.0, Boundary::Open)
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn hopping(&self) -> f64 {
        self.hopping
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    /// Site pairs `(j, j + distance)` covered by a translation-invariant
    /// two-site term, 1-based. Open chains stop at the edge; periodic ones wrap.
    pub fn pairs(&self, distance: usize) -> Vec<(usize, usize)> {
        let l = self.sites;
        match self.boundary {
            Boundary::Open => (1..=l.saturating_sub(distance)).map(|j| (j, j + distance)).collect(),
            Boundary::Periodic => (1..=l).map(|j| (j, (j - 1 + distance) % l + 1)).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisKind {
    SingleParticle,
    VacuumExtended,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Basis {
    kind: BasisKind,
    sites: usize,
}

impl Basis {
    pub fn new(kind: BasisKind, sites: usize) -> Self {
        Self { kind, sites }
    }

    pub fn single_particle(sites: usize) -> Self {
        Self::new(BasisKind::SingleParticle, sites)
    }

    pub fn vacuum_extended(sites: usize) -> Self {
        Self::new(BasisKind::VacuumExtended, sites)
    }

    pub fn kind(&self) -> BasisKind {
        self.kind
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn dim(&self) -> usize {
        match self.kind {
            BasisKind::SingleParticle => self.sites,
            BasisKind::VacuumExtended => self.sites + 1,
        }
    }

    pub fn vacuum_index(&self) -> Option<usize> {
        match self.kind {
            BasisKind::SingleParticle => None,
            BasisKind::VacuumExtended => Some(0),
        }
    }

    /// Basis index of 1-based site `j`.
    pub fn site_index(&self, site: usize) -> Result<usize> {
        if site == 0 || site > self.sites {
            return Err(Error::param(
                "site",
                format!("site {site} outside 1..={}", self.sites),
            ));
        }
        Ok(match self.kind {
            BasisKind::SingleParticle => site - 1,
            BasisKind::VacuumExtended => site,
        })
    }

    /// Particle number of each basis state.
    pub fn particle_numbers(&self) -> Vec<u32> {
        (0..self.dim())
            .map(|i| u32::from(Some(i) != self.vacuum_index()))
            .collect()
    }

    /// Number operator `N` (identity on the one-particle block, zero on the vacuum).
    pub fn number_operator(&self) -> Operator {
        let n = self.particle_numbers();
        Operator(Mat::from_fn(self.dim(), self.dim(), |i, j| {
            if i == j {
                real(f64::from(n[i]))
            } else {
                ZERO
            }
        }))
    }

    /// Density matrix `Σ w |site⟩⟨site|` for a classical mixture of localized states.
    pub fn site_mixture(&self, weights: &[(usize, f64)]) -> Result<Mat<c64>> {
        let d = self.dim();
        let mut rho = Mat::zeros(d, d);
        for &(site, w) in weights {
            let k = self.site_index(site)?;
            rho[(k, k)] += real(w);
        }
        Ok(rho)
    }

    pub fn vacuum_state(&self) -> Result<Mat<c64>> {
        let v = self.vacuum_index().ok_or(Error::LossNeedsVacuum)?;
        let mut rho = Mat::zeros(self.dim(), self.dim());
        rho[(v, v)] = real(1.0);
        Ok(rho)
    }

    fn check(&self, spec: &LatticeSpec) -> Result<()> {
        if self.sites != spec.sites {
            return Err(Error::DimensionMismatch {
                context: "basis sites vs lattice sites",
                expected: spec.sites,
                found: self.sites,
            });
        }
        Ok(())
    }
}

/// Dense operator on a fixed basis.
#[derive(Debug, Clone, PartialEq)]
pub struct Operator(pub Mat<c64>);

impl Operator {
    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &Mat<c64> {
        &self.0
    }

    pub fn into_matrix(self) -> Mat<c64> {
        self.0
    }

    pub fn hermiticity_defect(&self) -> f64 {
        hermiticity_defect(&self.0)
    }
}

/// Relative phase of the two sites a bond operator locks together.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BondPhase {
    /// `a = +1`, drives pairs into `|j⟩ + |j+q⟩`.
    InPhase,
    /// `a = -1`, drives pairs into `|j⟩ − |j+q⟩`.
    OutOfPhase,
}

impl BondPhase {
    pub fn from_sign(a: i64) -> Result<Self> {
        match a {
            1 => Ok(BondPhase::InPhase),
            -1 => Ok(BondPhase::OutOfPhase),
            other => Err(Error::param("a", format!("must be +1 or -1, got {other}"))),
        }
    }

    pub fn sign(self) -> f64 {
        match self {
            BondPhase::InPhase => 1.0,
            BondPhase::OutOfPhase => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DissipationChannel {
    Dephasing {
        rate: f64,
    },
    BoundaryLoss {
        left: f64,
        right: f64,
    },
    /// `range` is the bond distance, written `q` or `p` in the literature.
    Bond {
        rate: f64,
        phase: BondPhase,
        range: usize,
    },
}

impl DissipationChannel {
    /// Expands the channel into its jump operators.
    pub fn operators(&self, spec: &LatticeSpec, basis: &Basis) -> Result<Vec<Operator>> {
        match *self {
            DissipationChannel::Dephasing { rate } => build_dephasing(spec, basis, rate),
            DissipationChannel::BoundaryLoss { left, right } => {
                build_boundary_loss(spec, basis, left, right)
            }
            DissipationChannel::Bond { rate, phase, range } => {
                build_bond(spec, basis, rate, phase, range)
            }
        }
    }

    pub fn conserves_number(&self) -> bool {
        !matches!(self, DissipationChannel::BoundaryLoss { .. })
    }
}

fn check_rate(name: &'static str, rate: f64) -> Result<()> {
    if !(rate >= 0.0 && rate.is_finite()) {
        return Err(Error::param(name, format!("rate must be finite and ≥ 0, got {rate}")));
    }
    Ok(())
}

/// Nearest-neighbour hopping `J Σ (c†_j c_{j+1} + h.c.)` restricted to the
/// basis. The vacuum row and column stay zero.
pub fn build_hamiltonian(spec: &LatticeSpec, basis: &Basis) -> Result<Operator> {
    basis.check(spec)?;
    let d = basis.dim();
    let mut h = Mat::zeros(d, d);
    let hop = real(spec.hopping);
    for (a, b) in spec.pairs(1) {
        let (i, j) = (basis.site_index(a)?, basis.site_index(b)?);
        h[(i, j)] += hop;
        h[(j, i)] += hop;
    }
    Ok(Operator(h))
}

/// On-site dephasing `√γ c†_j c_j`, one operator per site.
pub fn build_dephasing(spec: &LatticeSpec, basis: &Basis, rate: f64) -> Result<Vec<Operator>> {
    basis.check(spec)?;
    check_rate("gamma_d", rate)?;
    let d = basis.dim();
    let amp = real(rate.sqrt());
    (1..=spec.sites)
        .map(|site| {
            let k = basis.site_index(site)?;
            let mut o = Mat::zeros(d, d);
            o[(k, k)] = amp;
            Ok(Operator(o))
        })
        .collect()
}

/// Edge loss `√γ₁ c_1` and `√γ_L c_L`, mapping the edge sites onto the vacuum.
pub fn build_boundary_loss(
    spec: &LatticeSpec,
    basis: &Basis,
    left: f64,
    right: f64,
) -> Result<Vec<Operator>> {
    basis.check(spec)?;
    check_rate("gamma_1", left)?;
    check_rate("gamma_L", right)?;
    let vac = basis.vacuum_index().ok_or(Error::LossNeedsVacuum)?;
    let d = basis.dim();
    [(1, left), (spec.sites, right)]
        .into_iter()
        .map(|(site, rate)| {
            let mut o = Mat::zeros(d, d);
            o[(vac, basis.site_index(site)?)] = real(rate.sqrt());
            Ok(Operator(o))
        })
        .collect()
}

/// Bond dissipation `√Γ (c†_j + a c†_{j+q})(c_j − a c_{j+q})`, one operator per
/// bond. Open chains use `j = 1..=L−q`; periodic chains wrap `j + q` mod `L`.
pub fn build_bond(
    spec: &LatticeSpec,
    basis: &Basis,
    rate: f64,
    phase: BondPhase,
    range: usize,
) -> Result<Vec<Operator>> {
    basis.check(spec)?;
    check_rate("Gamma", rate)?;
    let l = spec.sites;
    if range == 0 {
        return Err(Error::param("range", "bond range q must be ≥ 1"));
    }
    match spec.boundary {
        Boundary::Open if range >= l => {
            return Err(Error::param(
                "range",
                format!("q = {range} leaves no bonds on an open chain of {l} sites"),
            ));
        }
        Boundary::Periodic if range % l == 0 => {
            return Err(Error::param(
                "range",
                format!("q = {range} is a multiple of L = {l}; every bond collapses onto one site"),
            ));
        }
        _ => {}
    }
    let a = phase.sign();
    let amp = rate.sqrt();
    let d = basis.dim();
    spec.pairs(range)
        .into_iter()
        .map(|(s1, s2)| {
            let (i, j) = (basis.site_index(s1)?, basis.site_index(s2)?);
            // outer product of ket (e_i + a e_j) with bra (e_i − a e_j)
            let ket = [(i, 1.0), (j, a)];
            let bra = [(i, 1.0), (j, -a)];
            let mut o = Mat::zeros(d, d);
            for &(r, kr) in &ket {
                for &(c, bc) in &bra {
                    o[(r, c)] += real(amp * kr * bc);
                }
            }
            Ok(Operator(o))
        })
        .collect()
}

/// Checks the Hamiltonian invariant used by every caller.
pub fn assert_hermitian(op: &Operator, tol: f64) -> Result<()> {
    let defect = op.hermiticity_defect();
    if defect > tol {
        return Err(Error::NotHermitian(defect));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{hermitian_eigenvalues, max_abs, max_abs_diff};
    use faer::Col;
    use std::f64::consts::PI;

    fn sorted(mut v: Vec<f64>) -> Vec<f64> {
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v
    }

    #[test]
    fn two_site_hamiltonian() {
        let spec = LatticeSpec::open(2).unwrap();
        let h = build_hamiltonian(&spec, &Basis::single_particle(2)).unwrap();
        assert_eq!(h.0[(0, 1)], real(1.0));
        assert_eq!(h.0[(1, 0)], real(1.0));
        assert_eq!(h.0[(0, 0)], ZERO);
        assert_eq!(h.0[(1, 1)], ZERO);
    }

    #[test]
    fn periodic_band_is_cosine() {
        let spec = LatticeSpec::new(20, 1.0, Boundary::Periodic).unwrap();
        let h = build_hamiltonian(&spec, &Basis::single_particle(20)).unwrap();
        let ev = sorted(hermitian_eigenvalues(h.matrix()).unwrap());
        let expect = sorted((-9..=10).map(|n| 2.0 * (2.0 * PI * n as f64 / 20.0).cos()).collect());
        for (a, b) in ev.iter().zip(&expect) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn open_chain_spectrum() {
        let spec = LatticeSpec::open(10).unwrap();
        let h = build_hamiltonian(&spec, &Basis::single_particle(10)).unwrap();
        let ev = sorted(hermitian_eigenvalues(h.matrix()).unwrap());
        let expect = sorted((1..=10).map(|m| 2.0 * (m as f64 * PI / 11.0).cos()).collect());
        for (a, b) in ev.iter().zip(&expect) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn vacuum_row_of_hamiltonian_is_zero() {
        let spec = LatticeSpec::open(4).unwrap();
        let h = build_hamiltonian(&spec, &Basis::vacuum_extended(4)).unwrap();
        for k in 0..5 {
            assert_eq!(h.0[(0, k)], ZERO);
            assert_eq!(h.0[(k, 0)], ZERO);
        }
        assert_eq!(h.0[(1, 2)], real(1.0));
        assert!(h.hermiticity_defect() < 1e-14);
    }

    #[test]
    fn basis_mismatch_is_rejected() {
        let spec = LatticeSpec::open(4).unwrap();
        assert!(matches!(
            build_hamiltonian(&spec, &Basis::single_particle(5)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn dephasing_operators() {
        let spec = LatticeSpec::open(20).unwrap();
        let basis = Basis::single_particle(20);
        let ops = build_dephasing(&spec, &basis, 0.01).unwrap();
        assert_eq!(ops.len(), 20);
        let o9 = &ops[8];
        let k = basis.site_index(9).unwrap();
        assert!((o9.0[(k, k)] - real(0.1)).norm() < 1e-15);
        let mut rest = o9.0.clone();
        rest[(k, k)] = ZERO;
        assert_eq!(max_abs(&rest), 0.0);

        let zero = build_dephasing(&spec, &basis, 0.0).unwrap();
        assert!(zero.iter().all(|o| max_abs(o.matrix()) == 0.0));
        assert!(build_dephasing(&spec, &basis, -1.0).is_err());
    }

    #[test]
    fn boundary_loss_operators() {
        let spec = LatticeSpec::open(10).unwrap();
        let basis = Basis::vacuum_extended(10);
        let ops = build_boundary_loss(&spec, &basis, 0.2, 0.2).unwrap();
        assert_eq!(ops.len(), 2);
        assert!((ops[0].0[(0, 1)] - real(0.2f64.sqrt())).norm() < 1e-15);
        assert!((ops[1].0[(0, 10)] - real(0.2f64.sqrt())).norm() < 1e-15);
        // O†O = γ |1⟩⟨1|
        let odo = ops[0].0.adjoint() * &ops[0].0;
        let mut expect = Mat::<c64>::zeros(11, 11);
        expect[(1, 1)] = real(0.2);
        assert!(max_abs_diff(&odo, &expect) < 1e-15);

        let off = build_boundary_loss(&spec, &basis, 0.0, 0.2).unwrap();
        assert_eq!(max_abs(off[0].matrix()), 0.0);

        assert!(matches!(
            build_boundary_loss(&spec, &Basis::single_particle(10), 0.2, 0.2),
            Err(Error::LossNeedsVacuum)
        ));
        assert!(build_boundary_loss(&spec, &basis, -0.1, 0.2).is_err());
    }

    #[test]
    fn bond_count_and_errors() {
        let spec = LatticeSpec::open(10).unwrap();
        let basis = Basis::single_particle(10);
        let ops = build_bond(&spec, &basis, 0.4, BondPhase::OutOfPhase, 2).unwrap();
        assert_eq!(ops.len(), 8);
        assert!(build_bond(&spec, &basis, 0.4, BondPhase::InPhase, 10).is_err());
        assert!(build_bond(&spec, &basis, 0.4, BondPhase::InPhase, 0).is_err());
        assert!(BondPhase::from_sign(2).is_err());
        let pbc = LatticeSpec::new(10, 1.0, Boundary::Periodic).unwrap();
        assert_eq!(build_bond(&pbc, &basis, 0.4, BondPhase::InPhase, 2).unwrap().len(), 10);
    }

    #[test]
    fn bond_dark_and_bright_states() {
        let spec = LatticeSpec::open(6).unwrap();
        let basis = Basis::vacuum_extended(6);
        let gamma = 0.7;
        for phase in [BondPhase::InPhase, BondPhase::OutOfPhase] {
            let a = phase.sign();
            let ops = build_bond(&spec, &basis, gamma, phase, 2).unwrap();
            // operator for j = 3 couples sites 3 and 5
            let o = ops[2].matrix();
            let (i, j) = (basis.site_index(3).unwrap(), basis.site_index(5).unwrap());
            let s = 1.0 / 2f64.sqrt();
            let dark = Col::from_fn(7, |k| {
                real(if k == i { s } else if k == j { a * s } else { 0.0 })
            });
            let bright = Col::from_fn(7, |k| {
                real(if k == i { s } else if k == j { -a * s } else { 0.0 })
            });
            let out = o * &dark;
            assert!((0..7).all(|k| out[k].norm() < 1e-15));
            let out = o * &bright;
            let c = 2f64.sqrt() * gamma.sqrt();
            for k in 0..7 {
                let expect = if k == i { c } else if k == j { a * c } else { 0.0 };
                assert!((out[k] - real(expect)).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn bond_scales_with_sqrt_rate() {
        let spec = LatticeSpec::open(5).unwrap();
        let basis = Basis::single_particle(5);
        let a = build_bond(&spec, &basis, 0.3, BondPhase::InPhase, 1).unwrap();
        let b = build_bond(&spec, &basis, 1.2, BondPhase::InPhase, 1).unwrap();
        for (x, y) in a.iter().zip(&b) {
            let twice = crate::linalg::scale(x.matrix(), real(2.0));
            assert!(max_abs_diff(&twice, y.matrix()) < 1e-15);
        }
    }

    #[test]
    fn number_conserving_channels_commute_with_n() {
        let spec = LatticeSpec::open(6).unwrap();
        let basis = Basis::vacuum_extended(6);
        let n = basis.number_operator();
        let mut ops = build_dephasing(&spec, &basis, 0.3).unwrap();
        ops.extend(build_bond(&spec, &basis, 0.5, BondPhase::OutOfPhase, 1).unwrap());
        for o in &ops {
            let comm = o.matrix() * n.matrix() - n.matrix() * o.matrix();
            assert!(max_abs(&comm) < 1e-14);
        }
    }
}
