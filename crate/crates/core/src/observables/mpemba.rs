use faer::{c64, Mat};
use serde::Serialize;

use super::{trace_distance, trace_distances};
use crate::evolve::{SegmentLabel, Trajectory, TIME_TOL};
use crate::linalg::max_abs_diff;
use crate::{Error, Result};

/// Differences in `D` smaller than this count as ties.
const DISTANCE_TOL: f64 = 1e-10;
/// Crossing times are refined until the bracket is this narrow.
const CROSSING_RESOLUTION: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    None,
    #[serde(rename = "QME")]
    Qme,
    #[serde(rename = "anti-QME")]
    AntiQme,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::None => "none",
            Verdict::Qme => "QME",
            Verdict::AntiQme => "anti-QME",
        }
    }
}

/// Which trajectory is closer to the steady state at the horizon.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FinalOrder {
    A,
    B,
    Tie,
}

#[derive(Debug, Clone, Serialize)]
pub struct MpembaReport {
    pub crossing_times: Vec<f64>,
    pub final_order: FinalOrder,
    pub verdict: Verdict,
    pub initial_distance: (f64, f64),
    pub final_distance: (f64, f64),
}

impl MpembaReport {
    /// `D_A(T) − D_B(T)`.
    pub fn final_gap(&self) -> f64 {
        self.final_distance.0 - self.final_distance.1
    }
}

/// Compares two relaxation curves toward `rho_ss`.
///
/// Different initial states: QME when A starts farther, ends closer, and the
/// curves cross at least once. Same initial state: anti-QME when A is the
/// quenched trajectory, B the unquenched one, and A ends strictly farther out.
pub fn detect_mpemba(a: &Trajectory, b: &Trajectory, rho_ss: &Mat<c64>) -> Result<MpembaReport> {
    detect_mpemba_with_baseline(a, b, rho_ss, None)
}

/// [`detect_mpemba`] with A's own no-quench trajectory as extra context.
///
/// When A and B start at the same distance, the crossing criterion is
/// undecidable; the baseline then decides: QME when B would have won without
/// the quench and the quenched A wins.
pub fn detect_mpemba_with_baseline(
    a: &Trajectory,
    b: &Trajectory,
    rho_ss: &Mat<c64>,
    baseline_a: Option<&Trajectory>,
) -> Result<MpembaReport> {
    check_grid(a, b)?;
    let da = trace_distances(a, rho_ss)?;
    let db = trace_distances(b, rho_ss)?;
    let last = da.len() - 1;
    let gaps: Vec<f64> = da.iter().zip(&db).map(|(x, y)| x - y).collect();

    let mut crossing_times = Vec::new();
    let mut prev: Option<usize> = None;
    for (k, &g) in gaps.iter().enumerate() {
        if g.abs() <= DISTANCE_TOL {
            continue;
        }
        if let Some(p) = prev {
            if gaps[p].signum() != g.signum() {
                crossing_times.push(refine(a, b, rho_ss, a.times()[p], a.times()[k], gaps[p])?);
            }
        }
        prev = Some(k);
    }

    let final_order = if gaps[last] < -DISTANCE_TOL {
        FinalOrder::A
    } else if gaps[last] > DISTANCE_TOL {
        FinalOrder::B
    } else {
        FinalOrder::Tie
    };

    let same_start = max_abs_diff(a.initial(), b.initial()) < 1e-12;
    let verdict = if same_start {
        if is_quenched(a) && !is_quenched(b) && gaps[last] > DISTANCE_TOL {
            Verdict::AntiQme
        } else {
            Verdict::None
        }
    } else if gaps[0] > DISTANCE_TOL {
        if final_order == FinalOrder::A && !crossing_times.is_empty() {
            Verdict::Qme
        } else {
            Verdict::None
        }
    } else if gaps[0].abs() <= DISTANCE_TOL {
        match baseline_a {
            Some(base) => {
                check_grid(base, b)?;
                let base_final = trace_distance(base.last(), rho_ss)?;
                if base_final - db[last] > DISTANCE_TOL && final_order == FinalOrder::A {
                    Verdict::Qme
                } else {
                    Verdict::None
                }
            }
            None => Verdict::None,
        }
    } else {
        Verdict::None
    };

    Ok(MpembaReport {
        crossing_times,
        final_order,
        verdict,
        initial_distance: (da[0], db[0]),
        final_distance: (da[last], db[last]),
    })
}

fn is_quenched(t: &Trajectory) -> bool {
    t.protocol()
        .segments()
        .iter()
        .any(|s| s.label == SegmentLabel::Quench && s.duration > 0.0)
}

fn check_grid(a: &Trajectory, b: &Trajectory) -> Result<()> {
    let same = a.len() == b.len()
        && !a.is_empty()
        && a.times().iter().zip(b.times()).all(|(x, y)| (x - y).abs() <= TIME_TOL);
    if same {
        Ok(())
    } else {
        Err(Error::GridMismatch)
    }
}

/// Bisection on `D_A − D_B` between two bracketing times.
fn refine(a: &Trajectory, b: &Trajectory, rho_ss: &Mat<c64>, mut lo: f64, mut hi: f64, gap_lo: f64) -> Result<f64> {
    let sign_lo = gap_lo.signum();
    while hi - lo > CROSSING_RESOLUTION {
        let mid = 0.5 * (lo + hi);
        let g = trace_distance(&a.state_at(mid)?, rho_ss)? - trace_distance(&b.state_at(mid)?, rho_ss)?;
        if g.signum() == sign_lo && g.abs() > DISTANCE_TOL {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
