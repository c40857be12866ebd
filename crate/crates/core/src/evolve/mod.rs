//! Piecewise-constant Liouvillian evolution.
//!
//! A [`QuenchProtocol`] is an ordered list of segments, each with its own
//! generator and precomputed spectrum. States are propagated segment by
//! segment, `ρ(t) = e^{ℒ_k (t − s_k)} ⋯ e^{ℒ_1 d_1} e^{ℒ_0 d_0} ρ(0)`, either
//! through the spectral expansion (default) or through Padé propagators
//! (independent cross-check).

mod pade;

pub use pade::{expm, expm_pade};

use std::sync::Arc;

use faer::{c64, Col, Mat};
use serde::{Deserialize, Serialize};

use crate::linalg::hermitize;
use crate::superop::{devectorize, vectorize, Liouvillian, Spectrum};
use crate::{Error, Result};

/// Times closer than this are treated as the same instant.
pub const TIME_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SegmentLabel {
    Pre,
    Quench,
    Post,
}

/// One constant-generator stretch of a protocol.
#[derive(Debug, Clone)]
pub struct Segment {
    pub liouvillian: Arc<Liouvillian>,
    pub spectrum: Arc<Spectrum>,
    pub duration: f64,
    pub label: SegmentLabel,
}

#[derive(Debug, Clone)]
pub struct QuenchProtocol {
    segments: Vec<Segment>,
    starts: Vec<f64>,
}

impl QuenchProtocol {
    pub fn new(segments: Vec<Segment>) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::InvalidProtocol("no segments".into()));
        }
        let dim = segments[0].liouvillian.dim();
        let mut starts = Vec::with_capacity(segments.len());
        let mut t = 0.0;
        for (k, s) in segments.iter().enumerate() {
            if !(s.duration >= 0.0 && s.duration.is_finite()) {
                return Err(Error::InvalidProtocol(format!(
                    "segment {k} has duration {}",
                    s.duration
                )));
            }
            if s.liouvillian.dim() != dim || s.spectrum.dim() != dim {
                return Err(Error::DimensionMismatch {
                    context: "protocol segment dimension",
                    expected: dim,
                    found: s.liouvillian.dim(),
                });
            }
            starts.push(t);
            t += s.duration;
        }
        if t <= 0.0 {
            return Err(Error::InvalidProtocol("total duration must be positive".into()));
        }
        Ok(Self { segments, starts })
    }

    /// Plain relaxation under one generator for `horizon`.
    pub fn relaxation(lv: Arc<Liouvillian>, spec: Arc<Spectrum>, horizon: f64) -> Result<Self> {
        Self::new(vec![Segment {
            liouvillian: lv,
            spectrum: spec,
            duration: horizon,
            label: SegmentLabel::Pre,
        }])
    }

    /// The three-stretch schedule `ℒ₀` on `[0, t1)`, `ℒ₁` on `[t1, t2)`,
    /// `ℒ₀` on `[t2, horizon]`.
    pub fn quench(
        base: (Arc<Liouvillian>, Arc<Spectrum>),
        quenched: (Arc<Liouvillian>, Arc<Spectrum>),
        t1: f64,
        t2: f64,
        horizon: f64,
    ) -> Result<Self> {
        if !(0.0 <= t1 && t1 <= t2 && t2 <= horizon) {
            return Err(Error::InvalidProtocol(format!(
                "need 0 ≤ t1 ≤ t2 ≤ T, got t1 = {t1}, t2 = {t2}, T = {horizon}"
            )));
        }
        Self::new(vec![
            Segment {
                liouvillian: base.0.clone(),
                spectrum: base.1.clone(),
                duration: t1,
                label: SegmentLabel::Pre,
            },
            Segment {
                liouvillian: quenched.0,
                spectrum: quenched.1,
                duration: t2 - t1,
                label: SegmentLabel::Quench,
            },
            Segment {
                liouvillian: base.0,
                spectrum: base.1,
                duration: horizon - t2,
                label: SegmentLabel::Post,
            },
        ])
    }

    /// `ℒ₀` throughout, split at `t1` and `t2` so that samples line up with
    /// those of the matching [`QuenchProtocol::quench`].
    pub fn unquenched(
        base: (Arc<Liouvillian>, Arc<Spectrum>),
        t1: f64,
        t2: f64,
        horizon: f64,
    ) -> Result<Self> {
        let copy = base.clone();
        let mut p = Self::quench(base, copy, t1, t2, horizon)?;
        p.segments[1].label = SegmentLabel::Pre;
        Ok(p)
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn dim(&self) -> usize {
        self.segments[0].liouvillian.dim()
    }

    pub fn horizon(&self) -> f64 {
        let last = self.segments.len() - 1;
        self.starts[last] + self.segments[last].duration
    }

    pub fn start_of(&self, seg: usize) -> f64 {
        self.starts[seg]
    }

    /// Interior segment boundaries, strictly inside `(0, T)`.
    pub fn interior_boundaries(&self) -> Vec<f64> {
        let horizon = self.horizon();
        self.starts[1..]
            .iter()
            .copied()
            .filter(|&b| b > TIME_TOL && b < horizon - TIME_TOL)
            .collect()
    }

    /// Segments whose closed interval contains `t`, in protocol order.
    fn segments_containing(&self, t: f64) -> Vec<usize> {
        let horizon = self.horizon();
        if t <= TIME_TOL {
            return vec![0];
        }
        if t >= horizon - TIME_TOL {
            return vec![self.segments.len() - 1];
        }
        (0..self.segments.len())
            .filter(|&k| {
                let s = self.starts[k];
                let e = s + self.segments[k].duration;
                t >= s - TIME_TOL && t <= e + TIME_TOL
            })
            .collect()
    }
}

/// Which propagator a trajectory evaluates states with.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Backend {
    Spectral,
    Pade,
}

/// States sampled along a protocol.
#[derive(Debug, Clone)]
pub struct Trajectory {
    times: Vec<f64>,
    states: Vec<Mat<c64>>,
    segment_of: Vec<usize>,
    protocol: QuenchProtocol,
    backend: Backend,
    /// state at the start of each segment
    starts: Vec<Mat<c64>>,
}

impl Trajectory {
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[Mat<c64>] {
        &self.states
    }

    pub fn segment_of(&self) -> &[usize] {
        &self.segment_of
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn protocol(&self) -> &QuenchProtocol {
        &self.protocol
    }

    pub fn backend(&self) -> Backend {
        self.backend
    }

    pub fn initial(&self) -> &Mat<c64> {
        &self.starts[0]
    }

    pub fn last(&self) -> &Mat<c64> {
        self.states.last().expect("trajectory has at least one sample")
    }

    /// Evaluates `ρ(t)` at an arbitrary time, off the sample grid.
    pub fn state_at(&self, t: f64) -> Result<Mat<c64>> {
        let horizon = self.protocol.horizon();
        if !(t >= -TIME_TOL && t <= horizon + TIME_TOL) {
            return Err(Error::TimeOutOfRange { time: t, horizon });
        }
        let seg = *self
            .protocol
            .segments_containing(t)
            .last()
            .expect("every time in range lies in a segment");
        let tau = (t - self.protocol.start_of(seg)).max(0.0);
        advance(&self.protocol, self.backend, seg, tau, &self.starts[seg])
    }
}

/// `Σⱼ e^{λⱼt} Tr[lⱼ†ρ] rⱼ`, Hermitized.
pub fn expm_action_spectral(spec: &Spectrum, t: f64, rho: &Mat<c64>) -> Result<Mat<c64>> {
    let v = spec.project(rho)?;
    let alpha = spec.amplitudes_of(&v);
    let evolved = Col::from_fn(alpha.nrows(), |j| {
        let lt = spec.eigenvalues()[j] * t;
        if lt.re < -745.0 {
            c64::new(0.0, 0.0)
        } else {
            alpha[j] * lt.exp()
        }
    });
    Ok(hermitize(&spec.unproject(&spec.combine(&evolved))))
}

fn advance(
    protocol: &QuenchProtocol,
    backend: Backend,
    seg: usize,
    tau: f64,
    start: &Mat<c64>,
) -> Result<Mat<c64>> {
    let segment = &protocol.segments[seg];
    match backend {
        Backend::Spectral => expm_action_spectral(&segment.spectrum, tau, start),
        Backend::Pade => {
            if tau == 0.0 {
                return Ok(start.clone());
            }
            let p = expm_pade(&segment.liouvillian, tau)?;
            Ok(hermitize(&devectorize(&(p * vectorize(start)))?))
        }
    }
}

/// Propagates `rho0` through `protocol` with the spectral backend.
pub fn propagate(rho0: &Mat<c64>, protocol: &QuenchProtocol, sample_times: &[f64]) -> Result<Trajectory> {
    propagate_with(rho0, protocol, sample_times, Backend::Spectral)
}

/// Same as [`propagate`] with Padé propagators, used for validation.
pub fn propagate_pade(
    rho0: &Mat<c64>,
    protocol: &QuenchProtocol,
    sample_times: &[f64],
) -> Result<Trajectory> {
    propagate_with(rho0, protocol, sample_times, Backend::Pade)
}

pub fn propagate_with(
    rho0: &Mat<c64>,
    protocol: &QuenchProtocol,
    sample_times: &[f64],
    backend: Backend,
) -> Result<Trajectory> {
    let d = protocol.dim();
    if rho0.nrows() != d || rho0.ncols() != d {
        return Err(Error::DimensionMismatch {
            context: "initial state vs protocol",
            expected: d,
            found: rho0.nrows(),
        });
    }
    let horizon = protocol.horizon();
    for (k, &t) in sample_times.iter().enumerate() {
        if !(t >= -TIME_TOL && t <= horizon + TIME_TOL) {
            return Err(Error::TimeOutOfRange { time: t, horizon });
        }
        if k > 0 && t < sample_times[k - 1] {
            return Err(Error::UnsortedTimes(k));
        }
    }

    let mut starts = Vec::with_capacity(protocol.segments.len());
    starts.push(rho0.clone());
    for k in 0..protocol.segments.len() - 1 {
        let next = advance(protocol, backend, k, protocol.segments[k].duration, &starts[k])?;
        starts.push(next);
    }

    let grid = merge_times(sample_times, &protocol.interior_boundaries());
    let mut times = Vec::new();
    let mut states = Vec::new();
    let mut segment_of = Vec::new();
    for t in grid {
        for seg in protocol.segments_containing(t) {
            let tau = (t - protocol.start_of(seg)).clamp(0.0, protocol.segments[seg].duration);
            states.push(advance(protocol, backend, seg, tau, &starts[seg])?);
            times.push(t);
            segment_of.push(seg);
        }
    }
    Ok(Trajectory {
        times,
        states,
        segment_of,
        protocol: protocol.clone(),
        backend,
        starts,
    })
}

/// Sorted union of two time lists, collapsing points within [`TIME_TOL`]
/// onto the first occurrence (boundaries win over grid points).
fn merge_times(a: &[f64], boundaries: &[f64]) -> Vec<f64> {
    let mut all: Vec<(f64, bool)> = a.iter().map(|&t| (t.max(0.0), false)).collect();
    all.extend(boundaries.iter().map(|&b| (b, true)));
    all.sort_by(|x, y| x.0.total_cmp(&y.0).then(y.1.cmp(&x.1)));
    let mut out: Vec<f64> = Vec::with_capacity(all.len());
    for (t, is_boundary) in all {
        match out.last_mut() {
            Some(last) if (t - *last).abs() <= TIME_TOL => {
                if is_boundary {
                    *last = t;
                }
            }
            _ => out.push(t),
        }
    }
    out
}

/// Uniform grid `0, dt, 2dt, …` up to `horizon`, with `horizon` and every
/// entry of `forced` included.
pub fn sample_grid(horizon: f64, dt: f64, forced: &[f64]) -> Result<Vec<f64>> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::param("dt", format!("must be positive, got {dt}")));
    }
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::param("T", format!("must be positive, got {horizon}")));
    }
    let steps = (horizon / dt + 1e-9).floor() as usize;
    let mut grid: Vec<f64> = (0..=steps).map(|k| k as f64 * dt).collect();
    let mut extra: Vec<f64> = forced.iter().copied().filter(|t| *t >= 0.0 && *t <= horizon).collect();
    extra.push(horizon);
    grid.retain(|&t| t <= horizon + TIME_TOL);
    Ok(merge_times(&grid, &extra))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{max_abs_diff, real};
    use crate::model::{build_dephasing, build_hamiltonian, Basis, LatticeSpec};
    use crate::superop::spectrum;

    fn dephasing(l: usize, rate: f64, hop: f64) -> (Arc<Liouvillian>, Arc<Spectrum>) {
        let spec = LatticeSpec::new(l, hop, crate::model::Boundary::Open).unwrap();
        let basis = Basis::single_particle(l);
        let h = build_hamiltonian(&spec, &basis).unwrap();
        let lv = Liouvillian::assemble(&h, &build_dephasing(&spec, &basis, rate).unwrap()).unwrap();
        let s = spectrum(&lv).unwrap();
        (Arc::new(lv), Arc::new(s))
    }

    #[test]
    fn two_site_pure_dephasing_closed_form() {
        // J = 0, both sites dephase at γ: ρ₁₂(t) = ρ₁₂(0) e^{−γt}
        let gamma = 0.7;
        let (_, s) = dephasing(2, gamma, 0.0);
        let rho = Mat::from_fn(2, 2, |_, _| real(0.5));
        for t in [0.0, 0.3, 1.0, 4.0] {
            let out = expm_action_spectral(&s, t, &rho).unwrap();
            assert!((out[(0, 1)] - real(0.5 * (-gamma * t).exp())).norm() < 1e-12);
            assert!((out[(0, 0)] - real(0.5)).norm() < 1e-12);
        }
    }

    #[test]
    fn zero_time_is_identity() {
        let (_, s) = dephasing(4, 0.1, 1.0);
        let rho = Basis::single_particle(4).site_mixture(&[(2, 1.0)]).unwrap();
        let out = expm_action_spectral(&s, 0.0, &rho).unwrap();
        assert!(max_abs_diff(&out, &rho) < 1e-10);
    }

    #[test]
    fn pade_fixed_point_of_uniform_state() {
        let (lv, _) = dephasing(4, 0.2, 1.0);
        let p = expm_pade(&lv, 3.7).unwrap();
        let uniform = Mat::from_fn(4, 4, |i, j| real(if i == j { 0.25 } else { 0.0 }));
        let out = devectorize(&(p * vectorize(&uniform))).unwrap();
        assert!(max_abs_diff(&out, &uniform) < 1e-13);
        assert!(max_abs_diff(&expm_pade(&lv, 0.0).unwrap(), &crate::linalg::identity(16)) == 0.0);
    }

    #[test]
    fn grid_includes_boundaries() {
        let g = sample_grid(1.0, 0.3, &[0.45, 0.6]).unwrap();
        let expect = [0.0, 0.3, 0.45, 0.6, 0.9, 1.0];
        assert_eq!(g.len(), expect.len());
        assert!(g.iter().zip(expect).all(|(a, b)| (a - b).abs() < 1e-12), "{g:?}");
        let g = sample_grid(1.0, 0.25, &[0.5]).unwrap();
        assert_eq!(g, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert!(sample_grid(1.0, 0.0, &[]).is_err());
    }

    #[test]
    fn boundaries_are_sampled_on_both_sides() {
        let base = dephasing(3, 0.1, 1.0);
        let q = dephasing(3, 0.5, 1.0);
        let p = QuenchProtocol::quench(base, q, 1.0, 2.0, 3.0).unwrap();
        let rho = Basis::single_particle(3).site_mixture(&[(1, 1.0)]).unwrap();
        let tr = propagate(&rho, &p, &[0.0, 0.5, 1.5, 3.0]).unwrap();
        assert_eq!(tr.times(), &[0.0, 0.5, 1.0, 1.0, 1.5, 2.0, 2.0, 3.0]);
        assert_eq!(tr.segment_of(), &[0, 0, 0, 1, 1, 1, 2, 2]);
        // continuity across each boundary
        assert!(max_abs_diff(&tr.states()[2], &tr.states()[3]) < 1e-12);
        assert!(max_abs_diff(&tr.states()[5], &tr.states()[6]) < 1e-12);
        let mid = tr.state_at(1.5).unwrap();
        assert!(max_abs_diff(&mid, &tr.states()[4]) < 1e-14);
    }

    #[test]
    fn invalid_samples_are_rejected() {
        let (lv, s) = dephasing(3, 0.1, 1.0);
        let p = QuenchProtocol::relaxation(lv, s, 2.0).unwrap();
        let rho = Basis::single_particle(3).site_mixture(&[(1, 1.0)]).unwrap();
        assert!(matches!(propagate(&rho, &p, &[0.0, 1.0, 0.5]), Err(Error::UnsortedTimes(2))));
        assert!(matches!(propagate(&rho, &p, &[0.0, 2.5]), Err(Error::TimeOutOfRange { .. })));
        assert!(QuenchProtocol::quench(dephasing(3, 0.1, 1.0), dephasing(3, 0.1, 1.0), 2.0, 1.0, 3.0).is_err());
    }
}
