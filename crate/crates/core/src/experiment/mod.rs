//! Configuration-driven experiment runner.
//!
//! [`compute_experiment`] does all numerical work in memory;
//! [`run_experiment`] additionally writes the CSV and manifest files. Every
//! initial state gets a no-quench trajectory and, when the config enables a
//! quench, a quenched one on the same sample grid.

mod config;
mod output;
mod sweep;

pub use config::{
    default_dt, load_config, parse_config, ChannelsConfig, ExperimentConfig, InitialState,
    LatticeConfig, LossRates, QuenchConfig, RunConfig,
};
pub use output::num as format_number;
pub use sweep::{
    parse_axis, run_sweep, sweep_cells, write_sweep, SweepAxis, SweepParam, SweepReport, SweepRow,
    MAX_SWEEP_CELLS,
};

use std::path::{Path, PathBuf};
use std::sync::Arc;

use faer::{c64, Mat};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::evolve::{propagate, propagate_pade, sample_grid, QuenchProtocol, Trajectory};
use crate::linalg::{hermiticity_defect, max_abs_diff, min_eigenvalue, trace};
use crate::model::{Basis, DissipationChannel, LatticeSpec, Operator};
use crate::observables::{
    detect_mpemba_with_baseline, dominant_slow_mode, MpembaReport, TrajectoryObservables,
    NEGLIGIBLE_WEIGHT,
};
use crate::superop::{spectrum, steady_state, Liouvillian, LiouvillianTag, Spectrum};
use crate::{Error, Result};

pub const PRESETS: [&str; 3] = ["fig2", "fig3-qme", "fig3-anti"];

/// Random times used for the spectral-vs-Padé spot check of every run.
const BACKEND_CHECK_SAMPLES: usize = 3;

/// Source text of a shipped preset.
pub fn preset_text(name: &str) -> Result<&'static str> {
    match name {
        "fig2" => Ok(include_str!("../../presets/fig2.toml")),
        "fig3-qme" => Ok(include_str!("../../presets/fig3-qme.toml")),
        "fig3-anti" => Ok(include_str!("../../presets/fig3-anti.toml")),
        other => Err(Error::config(
            "preset",
            format!("unknown preset {other:?}; expected one of {}", PRESETS.join(", ")),
        )),
    }
}

pub fn preset(name: &str) -> Result<ExperimentConfig> {
    parse_config(preset_text(name)?)
}

/// Generators, spectra and steady state shared by every trajectory of a run.
#[derive(Debug, Clone)]
pub struct Model {
    pub lattice: LatticeSpec,
    pub basis: Basis,
    pub base: (Arc<Liouvillian>, Arc<Spectrum>),
    pub quenched: Option<(Arc<Liouvillian>, Arc<Spectrum>)>,
    pub steady_state: Mat<c64>,
}

fn base_channels(cfg: &ExperimentConfig) -> Vec<DissipationChannel> {
    let mut out = Vec::new();
    if let Some(rate) = cfg.channels.dephasing {
        out.push(DissipationChannel::Dephasing { rate });
    }
    if let Some(l) = cfg.channels.boundary_loss {
        out.push(DissipationChannel::BoundaryLoss {
            left: l.left,
            right: l.right,
        });
    }
    out
}

fn basis_for(cfg: &ExperimentConfig) -> Basis {
    if cfg.channels.boundary_loss.is_some() {
        Basis::vacuum_extended(cfg.lattice.sites)
    } else {
        Basis::single_particle(cfg.lattice.sites)
    }
}

fn assemble(
    lattice: &LatticeSpec,
    basis: &Basis,
    channels: &[DissipationChannel],
    tag: LiouvillianTag,
) -> Result<Liouvillian> {
    let h = crate::model::build_hamiltonian(lattice, basis)?;
    let mut ops: Vec<Operator> = Vec::new();
    for c in channels {
        ops.extend(c.operators(lattice, basis)?);
    }
    Liouvillian::assemble(&h, &ops)?
        .with_tag(tag)
        .with_number_sectors(basis.particle_numbers())
}

/// `ℒ₁ = ℒ₀ + bond dissipation` for the config's quench section.
fn build_quenched(cfg: &ExperimentConfig, lattice: &LatticeSpec, basis: &Basis) -> Result<Option<(Arc<Liouvillian>, Arc<Spectrum>)>> {
    let Some(q) = &cfg.quench else {
        return Ok(None);
    };
    let mut channels = base_channels(cfg);
    channels.push(DissipationChannel::Bond {
        rate: q.rate,
        phase: q.phase(),
        range: q.range,
    });
    let lv = assemble(lattice, basis, &channels, LiouvillianTag::Quenched)
        .map_err(|e| e.context("assembling the quenched Liouvillian"))?;
    let s = spectrum(&lv).map_err(|e| e.context("diagonalizing the quenched Liouvillian"))?;
    Ok(Some((Arc::new(lv), Arc::new(s))))
}

impl Model {
    pub fn build(cfg: &ExperimentConfig) -> Result<Self> {
        let lattice = LatticeSpec::new(cfg.lattice.sites, cfg.lattice.hopping, cfg.lattice.bc)?;
        let basis = basis_for(cfg);
        let base_job = || -> Result<(Arc<Liouvillian>, Arc<Spectrum>, Mat<c64>)> {
            let lv = assemble(&lattice, &basis, &base_channels(cfg), LiouvillianTag::Unperturbed)
                .map_err(|e| e.context("assembling the unperturbed Liouvillian"))?;
            let s = spectrum(&lv).map_err(|e| e.context("diagonalizing the unperturbed Liouvillian"))?;
            let ss = steady_state(&s).map_err(|e| e.context("steady state of the unperturbed Liouvillian"))?;
            Ok((Arc::new(lv), Arc::new(s), ss.into_rho()))
        };
        let (base, quenched) = rayon::join(base_job, || build_quenched(cfg, &lattice, &basis));
        let (l0, s0, steady_state) = base?;
        Ok(Self {
            lattice,
            basis,
            base: (l0, s0),
            quenched: quenched?,
            steady_state,
        })
    }

    /// Same base generator, quench rebuilt from `cfg` (used by sweeps).
    fn with_quench(&self, cfg: &ExperimentConfig) -> Result<Self> {
        Ok(Self {
            quenched: build_quenched(cfg, &self.lattice, &self.basis)?,
            ..self.clone()
        })
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct MatrixFile {
    re: Vec<Vec<f64>>,
    #[serde(default)]
    im: Option<Vec<Vec<f64>>>,
}

/// Density matrix of a configured initial state, checked to be a valid state.
pub fn initial_density(basis: &Basis, state: &InitialState) -> Result<Mat<c64>> {
    let field = || format!("initial state {}", state.label());
    let rho = match state {
        InitialState::Sites { weights, .. } => basis.site_mixture(weights)?,
        InitialState::Matrix { path, .. } => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::config(field(), format!("cannot read {}: {e}", path.display())))?;
            let m: MatrixFile = serde_json::from_str(&text)
                .map_err(|e| Error::config(field(), format!("{}: {e}", path.display())))?;
            let d = basis.dim();
            let shape_ok = |rows: &Vec<Vec<f64>>| rows.len() == d && rows.iter().all(|r| r.len() == d);
            if !shape_ok(&m.re) || !m.im.as_ref().is_none_or(shape_ok) {
                return Err(Error::config(field(), format!("matrix must be {d} × {d}")));
            }
            Mat::from_fn(d, d, |i, j| {
                c64::new(m.re[i][j], m.im.as_ref().map_or(0.0, |im| im[i][j]))
            })
        }
    };
    let defect = hermiticity_defect(&rho);
    let tr = trace(&rho);
    if defect > 1e-12 || (tr - c64::new(1.0, 0.0)).norm() > 1e-10 {
        return Err(Error::config(
            field(),
            format!("not a unit-trace Hermitian matrix (trace {tr}, Hermiticity defect {defect:.1e})"),
        ));
    }
    let min = min_eigenvalue(&rho)?;
    if min < -1e-10 {
        return Err(Error::config(field(), format!("negative eigenvalue {min:.3e}")));
    }
    Ok(rho)
}

#[derive(Debug, Clone)]
pub struct TrajectoryRecord {
    pub id: String,
    pub state: usize,
    pub quenched: bool,
    pub trajectory: Trajectory,
    pub observables: TrajectoryObservables,
}

#[derive(Debug, Clone, Serialize)]
pub struct PairReport {
    pub a: String,
    pub b: String,
    #[serde(flatten)]
    pub report: MpembaReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct BackendCheck {
    pub seed: u64,
    pub trajectory: String,
    pub times: Vec<f64>,
    pub max_abs_diff: f64,
}

#[derive(Debug, Clone)]
pub struct ExperimentResults {
    pub config: ExperimentConfig,
    pub model: Model,
    pub initial_states: Vec<Mat<c64>>,
    pub trajectories: Vec<TrajectoryRecord>,
    pub reports: Vec<PairReport>,
    /// Dominant slow mode of each initial state under `ℒ₀`, when any is populated.
    pub dominant_modes: Vec<Option<usize>>,
    pub backend_check: Option<BackendCheck>,
}

impl ExperimentResults {
    pub fn trajectory(&self, id: &str) -> Option<&TrajectoryRecord> {
        self.trajectories.iter().find(|t| t.id == id)
    }

    pub fn report(&self, a: &str, b: &str) -> Option<&MpembaReport> {
        self.reports.iter().find(|r| r.a == a && r.b == b).map(|r| &r.report)
    }
}

pub fn baseline_id(label: &str) -> String {
    format!("{label}_baseline")
}

pub fn quench_id(label: &str) -> String {
    format!("{label}_quench")
}

/// Runs every trajectory and comparison of `cfg` without touching the disk.
pub fn compute_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResults> {
    let model = Model::build(cfg)?;
    let mut results = evaluate(cfg, model)?;
    results.backend_check = Some(backend_check(cfg, &results)?);
    Ok(results)
}

fn evaluate(cfg: &ExperimentConfig, model: Model) -> Result<ExperimentResults> {
    let horizon = cfg.run.horizon;
    let forced: Vec<f64> = cfg.quench.iter().flat_map(|q| [q.t1, q.t2]).collect();
    let times = sample_grid(horizon, cfg.run.dt, &forced)?;
    let baseline = match &cfg.quench {
        Some(q) => QuenchProtocol::unquenched(model.base.clone(), q.t1, q.t2, horizon)?,
        None => QuenchProtocol::relaxation(model.base.0.clone(), model.base.1.clone(), horizon)?,
    };
    let quenched = match (&cfg.quench, &model.quenched) {
        (Some(q), Some(l1)) => Some(QuenchProtocol::quench(model.base.clone(), l1.clone(), q.t1, q.t2, horizon)?),
        _ => None,
    };

    let initial_states = cfg
        .run
        .initial_states
        .iter()
        .map(|s| initial_density(&model.basis, s))
        .collect::<Result<Vec<_>>>()?;

    let mut jobs: Vec<(usize, bool)> = Vec::new();
    for k in 0..initial_states.len() {
        jobs.push((k, false));
        if quenched.is_some() {
            jobs.push((k, true));
        }
    }
    let trajectories = jobs
        .par_iter()
        .map(|&(k, is_quench)| {
            let label = cfg.run.initial_states[k].label();
            let id = if is_quench { quench_id(label) } else { baseline_id(label) };
            let protocol = if is_quench { quenched.as_ref().expect("quench protocol") } else { &baseline };
            let traj = propagate(&initial_states[k], protocol, &times).map_err(|e| e.context(format!("trajectory {id}")))?;
            let observables = TrajectoryObservables::compute(
                &traj,
                &model.steady_state,
                &model.base.1,
                &model.basis,
                &cfg.run.modes_to_track,
            )
            .map_err(|e| e.context(format!("observables of {id}")))?;
            Ok(TrajectoryRecord {
                id,
                state: k,
                quenched: is_quench,
                trajectory: traj,
                observables,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let n = trajectories.len();
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|ia| (0..n).filter(move |&ib| ib != ia).map(move |ib| (ia, ib)))
        .collect();
    let reports = pairs
        .par_iter()
        .map(|&(ia, ib)| {
            let (a, b) = (&trajectories[ia], &trajectories[ib]);
            let own_baseline = if a.quenched {
                trajectories.iter().find(|t| t.state == a.state && !t.quenched).map(|t| &t.trajectory)
            } else {
                None
            };
            let report = detect_mpemba_with_baseline(&a.trajectory, &b.trajectory, &model.steady_state, own_baseline)
                .map_err(|e| e.context(format!("comparing {} with {}", a.id, b.id)))?;
            Ok(PairReport {
                a: a.id.clone(),
                b: b.id.clone(),
                report,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let dominant_modes = initial_states
        .iter()
        .map(|rho| dominant_slow_mode(&model.base.1, rho, NEGLIGIBLE_WEIGHT).ok())
        .collect();

    Ok(ExperimentResults {
        config: cfg.clone(),
        model,
        initial_states,
        trajectories,
        reports,
        dominant_modes,
        backend_check: None,
    })
}

/// Recomputes the first quenched (else first) trajectory with Padé
/// propagators at a few seeded random times.
fn backend_check(cfg: &ExperimentConfig, res: &ExperimentResults) -> Result<BackendCheck> {
    let rec = res
        .trajectories
        .iter()
        .find(|t| t.quenched)
        .unwrap_or(&res.trajectories[0]);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.run.seed);
    let mut times: Vec<f64> = (0..BACKEND_CHECK_SAMPLES)
        .map(|_| rng.random_range(0.0..=cfg.run.horizon))
        .collect();
    times.sort_by(f64::total_cmp);
    let protocol = rec.trajectory.protocol();
    let pade = propagate_pade(rec.trajectory.initial(), protocol, &times)?;
    let mut worst = 0.0f64;
    for (t, state) in pade.times().iter().zip(pade.states()) {
        worst = worst.max(max_abs_diff(&rec.trajectory.state_at(*t)?, state));
    }
    Ok(BackendCheck {
        seed: cfg.run.seed,
        trajectory: rec.id.clone(),
        times,
        max_abs_diff: worst,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct OutputEntry {
    pub id: String,
    pub state: String,
    pub quenched: bool,
    pub path: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectrumSummary {
    pub tag: String,
    pub path: String,
    pub modes: usize,
    pub cond_estimate: f64,
    /// `(Re λⱼ, Im λⱼ)` for `j = 0..=5`.
    pub leading: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DominantMode {
    pub state: String,
    pub mode: Option<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub version: String,
    pub config: ExperimentConfig,
    pub outputs: Vec<OutputEntry>,
    pub spectra: Vec<SpectrumSummary>,
    pub dominant_slow_modes: Vec<DominantMode>,
    pub mpemba: Vec<PairReport>,
    pub backend_check: Option<BackendCheck>,
}

fn spectrum_csv(s: &Spectrum) -> Result<Vec<u8>> {
    let rows: Vec<Vec<String>> = s
        .eigenvalues()
        .iter()
        .enumerate()
        .map(|(j, l)| vec![j.to_string(), output::num(l.re), output::num(l.im)])
        .collect();
    output::csv_bytes(&["index".into(), "re_lambda".into(), "im_lambda".into()], &rows)
}

fn trajectory_csv(rec: &TrajectoryRecord) -> Result<Vec<u8>> {
    let obs = &rec.observables;
    let mut header: Vec<String> = ["t", "trace_distance", "trace", "particle_number"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend(obs.modes.iter().map(|m| format!("mu_abs_{}", m.mode_index)));
    for m in &obs.modes {
        header.push(format!("mu_re_{}", m.mode_index));
        header.push(format!("mu_im_{}", m.mode_index));
    }
    let rows: Vec<Vec<String>> = (0..obs.times.len())
        .map(|k| {
            let mut r = vec![
                output::num(obs.times[k]),
                output::num(obs.trace_distance[k]),
                output::num(obs.trace[k]),
                output::num(obs.particle_number[k]),
            ];
            r.extend(obs.modes.iter().map(|m| output::num(m.values[k].norm())));
            for m in &obs.modes {
                r.push(output::num(m.values[k].re));
                r.push(output::num(m.values[k].im));
            }
            r
        })
        .collect();
    output::csv_bytes(&header, &rows)
}

fn mpemba_csv(reports: &[PairReport]) -> Result<Vec<u8>> {
    let header: Vec<String> = [
        "a",
        "b",
        "verdict",
        "crossings",
        "crossing_times",
        "final_order",
        "d_a_initial",
        "d_b_initial",
        "d_a_final",
        "d_b_final",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    let rows: Vec<Vec<String>> = reports
        .iter()
        .map(|p| {
            let r = &p.report;
            vec![
                p.a.clone(),
                p.b.clone(),
                r.verdict.as_str().to_string(),
                r.crossing_times.len().to_string(),
                r.crossing_times.iter().map(|t| output::num(*t)).collect::<Vec<_>>().join(";"),
                format!("{:?}", r.final_order).to_lowercase(),
                output::num(r.initial_distance.0),
                output::num(r.initial_distance.1),
                output::num(r.final_distance.0),
                output::num(r.final_distance.1),
            ]
        })
        .collect();
    output::csv_bytes(&header, &rows)
}

fn summarize(tag: &str, path: &str, s: &Spectrum) -> SpectrumSummary {
    SpectrumSummary {
        tag: tag.into(),
        path: path.into(),
        modes: s.len(),
        cond_estimate: s.cond_estimate(),
        leading: s.eigenvalues().iter().take(6).map(|l| (l.re, l.im)).collect(),
    }
}

/// Spectrum CSV files (`spectrum_L0.csv`, and `spectrum_L1.csv` with a quench).
fn spectrum_files(model: &Model) -> Result<Vec<(String, Vec<u8>)>> {
    let mut files = vec![("spectrum_L0.csv".to_string(), spectrum_csv(&model.base.1)?)];
    if let Some((_, s1)) = &model.quenched {
        files.push(("spectrum_L1.csv".to_string(), spectrum_csv(s1)?));
    }
    Ok(files)
}

/// Builds the manifest and every output file of a finished computation.
pub fn render(res: &ExperimentResults) -> Result<(RunManifest, Vec<(String, Vec<u8>)>)> {
    let mut files = spectrum_files(&res.model)?;
    let mut spectra = vec![summarize("L0", "spectrum_L0.csv", &res.model.base.1)];
    if let Some((_, s1)) = &res.model.quenched {
        spectra.push(summarize("L1", "spectrum_L1.csv", s1));
    }
    let mut outputs = Vec::new();
    for rec in &res.trajectories {
        let name = format!("traj_{}.csv", rec.id);
        files.push((name.clone(), trajectory_csv(rec)?));
        outputs.push(OutputEntry {
            id: rec.id.clone(),
            state: res.config.run.initial_states[rec.state].label().to_string(),
            quenched: rec.quenched,
            path: name,
        });
    }
    files.push(("mpemba.csv".to_string(), mpemba_csv(&res.reports)?));
    let manifest = RunManifest {
        version: crate::VERSION.to_string(),
        config: res.config.clone(),
        outputs,
        spectra,
        dominant_slow_modes: res
            .config
            .run
            .initial_states
            .iter()
            .zip(&res.dominant_modes)
            .map(|(s, m)| DominantMode {
                state: s.label().to_string(),
                mode: *m,
            })
            .collect(),
        mpemba: res.reports.clone(),
        backend_check: res.backend_check.clone(),
    };
    let mut json = serde_json::to_vec_pretty(&manifest)?;
    json.push(b'\n');
    files.push(("manifest.json".to_string(), json));
    Ok((manifest, files))
}

/// Computes `cfg` and writes its outputs to `cfg.run.output_dir`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunManifest> {
    let res = compute_experiment(cfg)?;
    let (manifest, files) = render(&res)?;
    output::write_all(&cfg.run.output_dir, &files)?;
    Ok(manifest)
}

/// Writes only the spectrum CSVs of `cfg` into `dir`.
pub fn write_spectra(cfg: &ExperimentConfig, dir: &Path) -> Result<Vec<PathBuf>> {
    let model = Model::build(cfg)?;
    output::write_all(dir, &spectrum_files(&model)?)
}
