//! Relaxation diagnostics: trace distance, slow-mode amplitudes, the
//! first-order quench transfer, Mpemba crossings and dark momenta.
//!
//! Mode amplitudes are always taken with respect to the spectrum passed in,
//! which for a quench protocol is the unperturbed one, so `μⱼ(t)` is a
//! continuous curve through the quench window.

mod dark;
mod mpemba;

pub use dark::{bond_annihilation_residual, dark_momenta, momentum_grid, plane_wave};
pub use mpemba::{detect_mpemba, detect_mpemba_with_baseline, FinalOrder, MpembaReport, Verdict};

use faer::{c64, Col, Mat};

use crate::evolve::Trajectory;
use crate::linalg::{hermitian_eigenvalues, hermiticity_defect, hermitize, trace};
use crate::model::Basis;
use crate::superop::{vectorize, Liouvillian, Spectrum};
use crate::{Error, Result};

/// Inputs further than this from Hermitian are rejected by [`trace_distance`].
pub const HERMITIAN_TOL: f64 = 1e-8;

/// Default cut on `|αⱼ|·‖rⱼ‖_F` below which a mode counts as unpopulated.
pub const NEGLIGIBLE_WEIGHT: f64 = 1e-10;

/// `½ Tr|ρ − σ|`.
pub fn trace_distance(rho: &Mat<c64>, sigma: &Mat<c64>) -> Result<f64> {
    if rho.nrows() != sigma.nrows() || rho.ncols() != sigma.ncols() || rho.nrows() != rho.ncols() {
        return Err(Error::DimensionMismatch {
            context: "trace distance operands",
            expected: rho.nrows(),
            found: sigma.nrows(),
        });
    }
    for m in [rho, sigma] {
        let defect = hermiticity_defect(m);
        if defect > HERMITIAN_TOL {
            return Err(Error::NotHermitian(defect));
        }
    }
    let diff = hermitize(&(rho - sigma));
    let ev = hermitian_eigenvalues(&diff)?;
    Ok(0.5 * ev.iter().map(|e| e.abs()).sum::<f64>())
}

/// `μⱼ = Tr[lⱼ† ρ]`.
pub fn mode_amplitude(spec: &Spectrum, j: usize, rho: &Mat<c64>) -> Result<c64> {
    spec.amplitude(j, rho)
}

/// `Tr[N ρ]`.
pub fn particle_number(basis: &Basis, rho: &Mat<c64>) -> f64 {
    let n = basis.particle_numbers();
    (0..rho.nrows()).map(|i| f64::from(n[i]) * rho[(i, i)].re).sum()
}

#[derive(Debug, Clone)]
pub struct ModeAmplitudeSeries {
    pub mode_index: usize,
    pub times: Vec<f64>,
    pub values: Vec<c64>,
}

impl ModeAmplitudeSeries {
    pub fn from_trajectory(spec: &Spectrum, j: usize, traj: &Trajectory) -> Result<Self> {
        let values = traj
            .states()
            .iter()
            .map(|rho| spec.amplitude(j, rho))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            mode_index: j,
            times: traj.times().to_vec(),
            values,
        })
    }

    pub fn abs(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm()).collect()
    }

    /// Value at the last sample with time `t` (the post-boundary side when
    /// `t` is a segment boundary).
    pub fn at(&self, t: f64) -> Option<c64> {
        self.times
            .iter()
            .rposition(|&s| (s - t).abs() < crate::evolve::TIME_TOL)
            .map(|k| self.values[k])
    }
}

/// Per-sample diagnostics of one trajectory.
#[derive(Debug, Clone)]
pub struct TrajectoryObservables {
    pub times: Vec<f64>,
    pub trace_distance: Vec<f64>,
    pub trace: Vec<f64>,
    pub particle_number: Vec<f64>,
    pub modes: Vec<ModeAmplitudeSeries>,
}

impl TrajectoryObservables {
    pub fn compute(
        traj: &Trajectory,
        rho_ss: &Mat<c64>,
        spec: &Spectrum,
        basis: &Basis,
        modes: &[usize],
    ) -> Result<Self> {
        let trace_distance = trace_distances(traj, rho_ss)?;
        let modes = modes
            .iter()
            .map(|&j| ModeAmplitudeSeries::from_trajectory(spec, j, traj))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            times: traj.times().to_vec(),
            trace_distance,
            trace: traj.states().iter().map(|r| trace(r).re).collect(),
            particle_number: traj.states().iter().map(|r| particle_number(basis, r)).collect(),
            modes,
        })
    }
}

/// `D(t) = ½‖ρ(t) − ρ_ss‖₁` at every sample.
pub fn trace_distances(traj: &Trajectory, rho_ss: &Mat<c64>) -> Result<Vec<f64>> {
    traj.states().iter().map(|r| trace_distance(r, rho_ss)).collect()
}

/// First-order change of `μ_m` caused by switching `ℒ₀ → ℒ₁` for a short time.
#[derive(Debug, Clone)]
pub struct DeltaMu {
    /// `τ · Tr[l_m† (ℒ₁ − ℒ₀)[ρ(t₁)]]`
    pub delta: c64,
    /// `Tr[l_m† (ℒ₁ − ℒ₀)[rⱼ]]` for every mode `j`
    pub transfer: Vec<c64>,
    /// `e^{λⱼ t₁} αⱼ = Tr[lⱼ† ρ(t₁)]`
    pub weights: Vec<c64>,
}

impl DeltaMu {
    /// `τ Σⱼ weightⱼ · transferⱼ`; equals `delta` by linearity.
    pub fn mode_sum(&self, tau: f64) -> c64 {
        self.transfer
            .iter()
            .zip(&self.weights)
            .map(|(t, w)| t * w)
            .sum::<c64>()
            * tau
    }
}

/// Perturbative transfer into mode `mode` of `spec0` during a quench of
/// length `tau` starting from `rho_t1`.
pub fn perturbative_delta_mu(
    spec0: &Spectrum,
    lv1: &Liouvillian,
    rho_t1: &Mat<c64>,
    tau: f64,
    mode: usize,
) -> Result<DeltaMu> {
    if lv1.dim() != spec0.dim() {
        return Err(Error::DimensionMismatch {
            context: "quenched Liouvillian vs unperturbed spectrum",
            expected: spec0.dim(),
            found: lv1.dim(),
        });
    }
    if !(tau >= 0.0 && tau.is_finite()) {
        return Err(Error::param("tau", format!("must be finite and ≥ 0, got {tau}")));
    }
    spec0.eigenvalue(mode)?;
    let sector = spec0.sector();
    let n = sector.len();
    let full = lv1.matrix();
    let g0 = spec0.generator();
    let delta_gen = Mat::from_fn(n, n, |i, j| full[(sector[i], sector[j])] - g0[(i, j)]);

    let row: Mat<c64> = spec0.left_adj_matrix().subrows(mode, 1) * &delta_gen;
    let transfer_row = &row * spec0.right_matrix();
    let transfer: Vec<c64> = (0..n).map(|j| transfer_row[(0, j)]).collect();

    let v = spec0.project(rho_t1)?;
    let w = spec0.amplitudes_of(&v);
    let weights: Vec<c64> = (0..n).map(|j| w[j]).collect();

    // evaluate the perturbation on the full vectorized state so that any
    // weight of ℒ₁[ρ] leaving the sector is dropped rather than misassigned
    let image: Col<c64> = full * vectorize(rho_t1);
    let image = Col::from_fn(n, |p| image[sector[p]]) - g0 * &v;
    let delta = (0..n).map(|p| spec0.left_adj_matrix()[(mode, p)] * image[p]).sum::<c64>() * tau;
    Ok(DeltaMu {
        delta,
        transfer,
        weights,
    })
}

/// [`perturbative_delta_mu`] for the slowest nontrivial mode.
pub fn perturbative_delta_mu1(
    spec0: &Spectrum,
    lv1: &Liouvillian,
    rho_t1: &Mat<c64>,
    tau: f64,
) -> Result<DeltaMu> {
    perturbative_delta_mu(spec0, lv1, rho_t1, tau, 1)
}

/// Slowest nontrivial mode that `rho0` actually populates.
pub fn dominant_slow_mode(spec: &Spectrum, rho0: &Mat<c64>, negligible: f64) -> Result<usize> {
    if !(negligible > 0.0) {
        return Err(Error::param("negligible", "threshold must be positive"));
    }
    let alpha = spec.decompose(rho0)?;
    let zero = spec.zero_modes();
    let weight = |j: usize| -> Result<f64> {
        let norm = crate::linalg::frobenius(&spec.right_mode(j)?);
        Ok(alpha[j].norm() * norm)
    };
    let tol = 1e-9;
    for j in 1..spec.len() {
        if zero.contains(&j) {
            continue;
        }
        let own = weight(j)?;
        let partner = spec.conjugate_partner(j, tol).filter(|&p| p != j && !zero.contains(&p));
        let joint = match partner {
            Some(p) => own.hypot(weight(p)?),
            None => own,
        };
        if joint > negligible {
            return Ok(match partner {
                Some(p) if p < j => p,
                _ => j,
            });
        }
    }
    Err(Error::NoNontrivialWeight(negligible))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{identity, real, scale};
    use crate::model::{build_dephasing, build_hamiltonian, LatticeSpec};
    use crate::superop::{spectrum, steady_state};

    #[test]
    fn trace_distance_examples() {
        let basis = Basis::single_particle(20);
        let rho = basis.site_mixture(&[(9, 1.0)]).unwrap();
        assert_eq!(trace_distance(&rho, &rho).unwrap(), 0.0);
        let other = basis.site_mixture(&[(3, 1.0)]).unwrap();
        assert!((trace_distance(&rho, &other).unwrap() - 1.0).abs() < 1e-14);
        let uniform = scale(&identity(20), real(1.0 / 20.0));
        assert!((trace_distance(&rho, &uniform).unwrap() - 0.95).abs() < 1e-13);
    }

    #[test]
    fn trace_distance_rejects_non_hermitian() {
        let mut m = Mat::<c64>::zeros(2, 2);
        m[(0, 1)] = real(1.0);
        assert!(matches!(
            trace_distance(&m, &identity(2)),
            Err(Error::NotHermitian(_))
        ));
    }

    fn dephasing(l: usize) -> (Liouvillian, Spectrum) {
        let spec = LatticeSpec::open(l).unwrap();
        let basis = Basis::single_particle(l);
        let h = build_hamiltonian(&spec, &basis).unwrap();
        let lv = Liouvillian::assemble(&h, &build_dephasing(&spec, &basis, 0.1).unwrap()).unwrap();
        let s = spectrum(&lv).unwrap();
        (lv, s)
    }

    #[test]
    fn amplitudes_of_steady_state() {
        let (_, s) = dephasing(5);
        let ss = steady_state(&s).unwrap();
        assert!((mode_amplitude(&s, 0, ss.rho()).unwrap() - real(1.0)).norm() < 1e-10);
        for j in 1..s.len() {
            assert!(mode_amplitude(&s, j, ss.rho()).unwrap().norm() < 1e-8);
        }
        assert!(matches!(
            dominant_slow_mode(&s, ss.rho(), NEGLIGIBLE_WEIGHT),
            Err(Error::NoNontrivialWeight(_))
        ));
    }

    #[test]
    fn unperturbed_quench_transfers_nothing() {
        let (lv, s) = dephasing(4);
        let rho = Basis::single_particle(4).site_mixture(&[(2, 1.0)]).unwrap();
        let d = perturbative_delta_mu1(&s, &lv, &rho, 0.3).unwrap();
        assert!(d.delta.norm() < 1e-15);
        let d = perturbative_delta_mu1(&s, &lv, &rho, 0.0).unwrap();
        assert_eq!(d.delta, real(0.0));
    }
}
