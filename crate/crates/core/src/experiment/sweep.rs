//! Parameter sweeps over the quench settings.
//!
//! Every grid cell reruns the quench on all initial states against a shared
//! unperturbed model. Each (cell, state) pair becomes one row of `sweep.csv`:
//! QME when the quenched state overtakes another state's no-quench curve,
//! anti-QME when it ends farther out than its own no-quench curve.

use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::config::check_quench;
use super::output;
use super::{baseline_id, evaluate, quench_id, ExperimentConfig, Model};
use crate::observables::Verdict;
use crate::{Error, Result};

pub const MAX_SWEEP_CELLS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    Gamma,
    A,
    Q,
    T1,
    T2,
}

impl SweepParam {
    pub const ALL: [SweepParam; 5] = [SweepParam::Gamma, SweepParam::A, SweepParam::Q, SweepParam::T1, SweepParam::T2];

    pub fn name(self) -> &'static str {
        match self {
            SweepParam::Gamma => "Gamma",
            SweepParam::A => "a",
            SweepParam::Q => "q",
            SweepParam::T1 => "t1",
            SweepParam::T2 => "t2",
        }
    }

    fn parse(name: &str) -> Result<Self> {
        match name {
            "Gamma" | "gamma" => Ok(SweepParam::Gamma),
            "a" => Ok(SweepParam::A),
            "q" | "p" | "range" => Ok(SweepParam::Q),
            "t1" => Ok(SweepParam::T1),
            "t2" => Ok(SweepParam::T2),
            other => Err(Error::config(
                "axis",
                format!("unknown sweep parameter {other:?}; expected Gamma, a, q, t1 or t2"),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepAxis {
    pub param: SweepParam,
    pub values: Vec<f64>,
}

/// Parses `name=v1,v2,...`.
pub fn parse_axis(spec: &str) -> Result<SweepAxis> {
    let (name, list) = spec
        .split_once('=')
        .ok_or_else(|| Error::config("axis", format!("expected name=v1,v2,..., got {spec:?}")))?;
    let param = SweepParam::parse(name.trim())?;
    let values = list
        .split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| Error::config("axis", format!("{}: cannot parse {v:?}", param.name())))
        })
        .collect::<Result<Vec<_>>>()?;
    if values.is_empty() {
        return Err(Error::config("axis", format!("{} has no values", param.name())));
    }
    Ok(SweepAxis { param, values })
}

/// Cartesian product of the axes in row-major order (last axis fastest).
/// Parameters without an axis keep the template value. Columns follow
/// [`SweepParam::ALL`].
pub fn sweep_cells(template: &ExperimentConfig, axes: &[SweepAxis]) -> Result<Vec<[f64; 5]>> {
    let q = template
        .quench
        .as_ref()
        .ok_or_else(|| Error::config("quench", "a sweep needs an enabled [quench] section"))?;
    for (k, ax) in axes.iter().enumerate() {
        if axes[..k].iter().any(|o| o.param == ax.param) {
            return Err(Error::config("axis", format!("{} given twice", ax.param.name())));
        }
    }
    let count = axes
        .iter()
        .try_fold(1usize, |acc, ax| acc.checked_mul(ax.values.len()))
        .filter(|&c| c <= MAX_SWEEP_CELLS)
        .ok_or_else(|| Error::config("axis", format!("grid exceeds {MAX_SWEEP_CELLS} cells")))?;
    let base = [q.rate, q.a as f64, q.range as f64, q.t1, q.t2];
    let mut cells = Vec::with_capacity(count);
    for mut idx in 0..count {
        let mut cell = base;
        for ax in axes.iter().rev() {
            let n = ax.values.len();
            cell[SweepParam::ALL.iter().position(|&p| p == ax.param).unwrap()] = ax.values[idx % n];
            idx /= n;
        }
        cells.push(cell);
    }
    Ok(cells)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub cell: usize,
    pub params: [f64; 5],
    pub state: String,
    /// `Err` carries the message of a failed cell.
    pub outcome: std::result::Result<RowOutcome, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RowOutcome {
    pub verdict: Verdict,
    /// Trajectory the quenched state was compared against.
    pub partner: String,
    /// `D_quench(T) − D_partner(T)`.
    pub final_delta_d: f64,
    pub crossings: usize,
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
}

impl SweepReport {
    pub fn failed_rows(&self) -> usize {
        self.rows.iter().filter(|r| r.outcome.is_err()).count()
    }
}

fn cell_config(template: &ExperimentConfig, p: &[f64; 5]) -> Result<ExperimentConfig> {
    let mut cfg = template.clone();
    let q = cfg.quench.as_mut().expect("checked by sweep_cells");
    let integer = |name: &str, v: f64| -> Result<i64> {
        if v.fract() == 0.0 && v.is_finite() {
            Ok(v as i64)
        } else {
            Err(Error::config(format!("quench.{name}"), format!("must be an integer, got {v}")))
        }
    };
    q.rate = p[0];
    q.a = integer("a", p[1])?;
    let range = integer("range", p[2])?;
    if range < 1 {
        return Err(Error::config("quench.range", format!("must be ≥ 1, got {range}")));
    }
    q.range = range as usize;
    q.t1 = p[3];
    q.t2 = p[4];
    check_quench(q, &cfg.lattice, cfg.run.horizon)?;
    Ok(cfg)
}

fn run_cell(template: &ExperimentConfig, base: &Model, p: &[f64; 5]) -> Result<Vec<RowOutcome>> {
    let cfg = cell_config(template, p)?;
    let model = base.with_quench(&cfg)?;
    let res = evaluate(&cfg, model)?;
    let labels: Vec<&str> = cfg.run.initial_states.iter().map(|s| s.label()).collect();
    let mut out = Vec::with_capacity(labels.len());
    for (i, label) in labels.iter().enumerate() {
        let qid = quench_id(label);
        let qme = labels
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, other)| baseline_id(other))
            .find_map(|bid| {
                res.report(&qid, &bid)
                    .filter(|r| r.verdict == Verdict::Qme)
                    .map(|r| (bid.clone(), r))
            });
        let own = baseline_id(label);
        let (partner, report) = match qme {
            Some(found) => found,
            None => {
                let r = res.report(&qid, &own).expect("quench-vs-baseline report");
                (own, r)
            }
        };
        out.push(RowOutcome {
            verdict: report.verdict,
            partner,
            final_delta_d: report.final_gap(),
            crossings: report.crossing_times.len(),
        });
    }
    Ok(out)
}

/// Evaluates every cell of the grid. Failing cells become error rows; only
/// a failure of the shared unperturbed model aborts the sweep.
pub fn run_sweep(template: &ExperimentConfig, axes: &[SweepAxis]) -> Result<SweepReport> {
    let cells = sweep_cells(template, axes)?;
    let base = Model::build(template)?;
    let labels: Vec<String> = template.run.initial_states.iter().map(|s| s.label().to_string()).collect();
    let rows = cells
        .par_iter()
        .enumerate()
        .map(|(c, p)| {
            let outcome = run_cell(template, &base, p);
            labels
                .iter()
                .enumerate()
                .map(|(i, label)| SweepRow {
                    cell: c,
                    params: *p,
                    state: label.clone(),
                    outcome: match &outcome {
                        Ok(v) => Ok(v[i].clone()),
                        Err(e) => Err(e.to_string()),
                    },
                })
                .collect::<Vec<_>>()
        })
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect();
    Ok(SweepReport { rows })
}

pub fn sweep_csv(report: &SweepReport) -> Result<Vec<u8>> {
    let mut header: Vec<String> = vec!["cell".into()];
    header.extend(SweepParam::ALL.iter().map(|p| p.name().to_string()));
    header.extend(["state", "verdict", "partner", "final_delta_d", "crossings", "error"].map(String::from));
    let rows: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|r| {
            let mut row = vec![r.cell.to_string()];
            row.extend(r.params.iter().map(|v| output::num(*v)));
            row.push(r.state.clone());
            match &r.outcome {
                Ok(o) => row.extend([
                    o.verdict.as_str().to_string(),
                    o.partner.clone(),
                    output::num(o.final_delta_d),
                    o.crossings.to_string(),
                    String::new(),
                ]),
                Err(e) => row.extend(["error".to_string(), String::new(), String::new(), String::new(), e.clone()]),
            }
            row
        })
        .collect();
    output::csv_bytes(&header, &rows)
}

/// Writes `sweep.csv` into `dir`.
pub fn write_sweep(report: &SweepReport, dir: &Path) -> Result<PathBuf> {
    let written = output::write_all(dir, &[("sweep.csv".to_string(), sweep_csv(report)?)])?;
    Ok(written.into_iter().next().expect("one file"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::parse_config;

    fn template() -> ExperimentConfig {
        parse_config(
            r#"
[lattice]
L = 4
[channels]
dephasing = 0.2
[quench]
Gamma = 0.3
a = 1
q = 1
t1 = 0.5
t2 = 1.0
[run]
T = 2.0
dt = 0.5
initial_states = [{ sites = [[1, 1.0]] }, { uniform = [2, 3] }]
"#,
        )
        .unwrap()
    }

    #[test]
    fn axis_parsing() {
        let ax = parse_axis("Gamma=0, 0.5").unwrap();
        assert_eq!(ax.param, SweepParam::Gamma);
        assert_eq!(ax.values, vec![0.0, 0.5]);
        assert_eq!(parse_axis("p=2").unwrap().param, SweepParam::Q);
        assert!(parse_axis("b=1").unwrap_err().is_config());
        assert!(parse_axis("a=x").is_err());
        assert!(parse_axis("a").is_err());
    }

    #[test]
    fn grid_is_row_major_and_bounded() {
        let t = template();
        let axes = [parse_axis("a=1,-1").unwrap(), parse_axis("q=1,2").unwrap()];
        let cells = sweep_cells(&t, &axes).unwrap();
        let aq: Vec<(f64, f64)> = cells.iter().map(|c| (c[1], c[2])).collect();
        assert_eq!(aq, vec![(1.0, 1.0), (1.0, 2.0), (-1.0, 1.0), (-1.0, 2.0)]);
        assert_eq!(cells[0][0], 0.3);
        let big: Vec<f64> = (0..101).map(f64::from).collect();
        let huge = [
            SweepAxis { param: SweepParam::Gamma, values: big.clone() },
            SweepAxis { param: SweepParam::T1, values: big },
        ];
        assert!(sweep_cells(&t, &huge).unwrap_err().is_config());
    }

    #[test]
    fn bad_cells_become_error_rows() {
        let t = template();
        let report = run_sweep(&t, &[parse_axis("a=1,3").unwrap()]).unwrap();
        assert_eq!(report.rows.len(), 4);
        assert_eq!(report.failed_rows(), 2);
        let csv = String::from_utf8(sweep_csv(&report).unwrap()).unwrap();
        assert!(csv.lines().nth(3).unwrap().contains(",error,"));
    }

    #[test]
    fn zero_rate_cell_has_no_effect() {
        let report = run_sweep(&template(), &[parse_axis("Gamma=0").unwrap()]).unwrap();
        for r in &report.rows {
            let o = r.outcome.as_ref().unwrap();
            assert_eq!(o.verdict, Verdict::None);
        }
    }
}
