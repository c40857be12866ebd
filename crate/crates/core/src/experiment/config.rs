//! TOML experiment configuration.
//!
//! ```toml
//! [lattice]
//! L = 20            # sites
//! J = 1.0           # hopping, default 1
//! bc = "open"       # or "periodic", default open
//!
//! [channels]
//! dephasing = 0.01                          # γ on every site, and/or
//! boundary_loss = { left = 0.2, right = 0.2 }
//!
//! [quench]
//! enabled = true    # default true
//! Gamma = 0.01
//! a = 1             # +1 in phase, -1 out of phase
//! range = 1         # bond distance, also accepted as `q` or `p`
//! t1 = 45.0
//! t2 = 65.0
//!
//! [run]
//! T = 300.0
//! dt = 1.0          # default 0.1 for T ≤ 50, else 1.0
//! modes_to_track = [1, 2]
//! output_dir = "out/fig2"
//! seed = 7
//! initial_states = [
//!   { label = "rho1", sites = [[9, 1.0]] },
//!   { uniform = [11, 12, 13] },
//!   { matrix = "state.json" },   # {"re": [[...]], "im": [[...]]}
//! ]
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::model::{BondPhase, Boundary};
use crate::{Error, Result};

/// Weights of a mixture must sum to one within this.
const WEIGHT_TOL: f64 = 1e-12;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    lattice: RawLattice,
    channels: RawChannels,
    quench: Option<RawQuench>,
    run: RawRun,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLattice {
    #[serde(rename = "L")]
    sites: i64,
    #[serde(rename = "J")]
    hopping: Option<f64>,
    bc: Option<Boundary>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawChannels {
    dephasing: Option<f64>,
    boundary_loss: Option<LossRates>,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct LossRates {
    pub left: f64,
    pub right: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawQuench {
    enabled: Option<bool>,
    #[serde(rename = "Gamma", alias = "gamma")]
    rate: Option<f64>,
    a: Option<i64>,
    #[serde(alias = "q", alias = "p")]
    range: Option<i64>,
    t1: Option<f64>,
    t2: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRun {
    #[serde(rename = "T")]
    horizon: f64,
    dt: Option<f64>,
    modes_to_track: Option<Vec<i64>>,
    output_dir: Option<PathBuf>,
    seed: Option<u64>,
    initial_states: Vec<RawState>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawState {
    label: Option<String>,
    sites: Option<Vec<(i64, f64)>>,
    uniform: Option<Vec<i64>>,
    matrix: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LatticeConfig {
    #[serde(rename = "L")]
    pub sites: usize,
    #[serde(rename = "J")]
    pub hopping: f64,
    pub bc: Boundary,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChannelsConfig {
    pub dephasing: Option<f64>,
    pub boundary_loss: Option<LossRates>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuenchConfig {
    pub enabled: bool,
    #[serde(rename = "Gamma")]
    pub rate: f64,
    pub a: i64,
    pub range: usize,
    pub t1: f64,
    pub t2: f64,
}

impl QuenchConfig {
    pub fn phase(&self) -> BondPhase {
        BondPhase::from_sign(self.a).expect("validated sign")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum InitialState {
    /// Classical mixture `Σ w |site⟩⟨site|`.
    Sites {
        label: String,
        weights: Vec<(usize, f64)>,
    },
    /// Explicit density matrix loaded from a JSON file.
    Matrix { label: String, path: PathBuf },
}

impl InitialState {
    pub fn label(&self) -> &str {
        match self {
            InitialState::Sites { label, .. } | InitialState::Matrix { label, .. } => label,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    #[serde(rename = "T")]
    pub horizon: f64,
    pub dt: f64,
    pub modes_to_track: Vec<usize>,
    pub output_dir: PathBuf,
    pub seed: u64,
    pub initial_states: Vec<InitialState>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub lattice: LatticeConfig,
    pub channels: ChannelsConfig,
    pub quench: Option<QuenchConfig>,
    pub run: RunConfig,
}

/// Sampling step used when a config leaves `dt` out.
pub fn default_dt(horizon: f64) -> f64 {
    if horizon <= 50.0 {
        0.1
    } else {
        1.0
    }
}

/// Parses and validates a configuration document. Relative matrix paths are
/// kept as written.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    parse_config_in(text, None)
}

/// Reads a configuration file; relative matrix paths resolve against its directory.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::config("config", format!("cannot read {}: {e}", path.display())))?;
    parse_config_in(&text, path.parent())
}

fn parse_config_in(text: &str, base: Option<&Path>) -> Result<ExperimentConfig> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| {
        let field = e.span().map_or_else(|| "document".to_string(), |s| locate(text, s.start));
        Error::config(field, e.message().trim().to_string())
    })?;
    validate(raw, base)
}

/// Dotted section path of the key at byte `offset`, for error messages.
fn locate(text: &str, offset: usize) -> String {
    let before = &text[..offset.min(text.len())];
    let section = before
        .lines()
        .rev()
        .find_map(|l| {
            let l = l.trim();
            (l.starts_with('[') && l.ends_with(']')).then(|| l.trim_matches(['[', ']']).to_string())
        });
    let key = text[offset.min(text.len())..]
        .split(['=', '\n', ' ', ','])
        .next()
        .unwrap_or("")
        .trim()
        .to_string();
    match (section, key.is_empty()) {
        (Some(s), false) => format!("{s}.{key}"),
        (Some(s), true) => s,
        (None, false) => key,
        (None, true) => "document".into(),
    }
}

fn positive(field: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::config(field, format!("must be positive and finite, got {v}")))
    }
}

fn rate(field: &str, v: f64) -> Result<f64> {
    if v >= 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::config(field, format!("rate must be finite and ≥ 0, got {v}")))
    }
}

fn validate(raw: RawConfig, base: Option<&Path>) -> Result<ExperimentConfig> {
    if raw.lattice.sites < 2 {
        return Err(Error::config("lattice.L", format!("need at least 2 sites, got {}", raw.lattice.sites)));
    }
    let sites = raw.lattice.sites as usize;
    let hopping = raw.lattice.hopping.unwrap_or(1.0);
    if !hopping.is_finite() {
        return Err(Error::config("lattice.J", "must be finite"));
    }
    let lattice = LatticeConfig {
        sites,
        hopping,
        bc: raw.lattice.bc.unwrap_or(Boundary::Open),
    };

    let dephasing = raw.channels.dephasing.map(|g| rate("channels.dephasing", g)).transpose()?;
    if let Some(l) = raw.channels.boundary_loss {
        rate("channels.boundary_loss.left", l.left)?;
        rate("channels.boundary_loss.right", l.right)?;
    }
    if dephasing.is_none() && raw.channels.boundary_loss.is_none() {
        return Err(Error::config("channels", "set `dephasing` and/or `boundary_loss`"));
    }
    let channels = ChannelsConfig {
        dephasing,
        boundary_loss: raw.channels.boundary_loss,
    };

    let horizon = positive("run.T", raw.run.horizon)?;
    let quench = raw.quench.map(|q| validate_quench(q, &lattice, horizon)).transpose()?.flatten();

    let dt = match raw.run.dt {
        Some(dt) => positive("run.dt", dt)?,
        None => default_dt(horizon),
    };
    let modes_to_track = match raw.run.modes_to_track {
        None => vec![1, 2],
        Some(m) => m
            .into_iter()
            .map(|j| {
                usize::try_from(j).map_err(|_| Error::config("run.modes_to_track", format!("negative index {j}")))
            })
            .collect::<Result<_>>()?,
    };
    let dim = if channels.boundary_loss.is_some() { sites + 1 } else { sites };
    if let Some(&j) = modes_to_track.iter().find(|&&j| j >= dim * dim) {
        return Err(Error::config("run.modes_to_track", format!("mode {j} ≥ D² = {}", dim * dim)));
    }

    if raw.run.initial_states.is_empty() {
        return Err(Error::config("run.initial_states", "at least one initial state is required"));
    }
    let initial_states = raw
        .run
        .initial_states
        .into_iter()
        .enumerate()
        .map(|(k, s)| validate_state(k, s, sites, base))
        .collect::<Result<Vec<_>>>()?;
    for (k, st) in initial_states.iter().enumerate() {
        if initial_states[..k].iter().any(|o| o.label() == st.label()) {
            return Err(Error::config(
                format!("run.initial_states[{k}]"),
                format!("duplicate label {:?}", st.label()),
            ));
        }
    }

    Ok(ExperimentConfig {
        lattice,
        channels,
        quench,
        run: RunConfig {
            horizon,
            dt,
            modes_to_track,
            output_dir: raw.run.output_dir.unwrap_or_else(|| PathBuf::from("out")),
            seed: raw.run.seed.unwrap_or(0),
            initial_states,
        },
    })
}

fn validate_quench(q: RawQuench, lattice: &LatticeConfig, horizon: f64) -> Result<Option<QuenchConfig>> {
    if !q.enabled.unwrap_or(true) {
        return Ok(None);
    }
    let missing = |name: &str| Error::config(format!("quench.{name}"), "missing");
    let range = q.range.ok_or_else(|| missing("range"))?;
    if range < 1 {
        return Err(Error::config("quench.range", format!("must be ≥ 1, got {range}")));
    }
    let cfg = QuenchConfig {
        enabled: true,
        rate: q.rate.ok_or_else(|| missing("Gamma"))?,
        a: q.a.ok_or_else(|| missing("a"))?,
        range: range as usize,
        t1: q.t1.ok_or_else(|| missing("t1"))?,
        t2: q.t2.ok_or_else(|| missing("t2"))?,
    };
    check_quench(&cfg, lattice, horizon)?;
    Ok(Some(cfg))
}

/// Invariants of an enabled quench section.
pub(crate) fn check_quench(q: &QuenchConfig, lattice: &LatticeConfig, horizon: f64) -> Result<()> {
    rate("quench.Gamma", q.rate)?;
    if BondPhase::from_sign(q.a).is_err() {
        return Err(Error::config("quench.a", format!("must be +1 or -1, got {}", q.a)));
    }
    match lattice.bc {
        _ if q.range == 0 => return Err(Error::config("quench.range", "must be ≥ 1, got 0")),
        Boundary::Open if q.range >= lattice.sites => {
            return Err(Error::config(
                "quench.range",
                format!("q = {} leaves no bonds on {} open sites", q.range, lattice.sites),
            ))
        }
        Boundary::Periodic if q.range % lattice.sites == 0 => {
            return Err(Error::config("quench.range", format!("q = {} is a multiple of L", q.range)))
        }
        _ => {}
    }
    let (t1, t2) = (q.t1, q.t2);
    if !(t1.is_finite() && t2.is_finite() && 0.0 <= t1 && t1 < t2 && t2 <= horizon) {
        return Err(Error::config(
            "quench",
            format!("need 0 ≤ t1 < t2 ≤ T, got t1 = {t1}, t2 = {t2}, T = {horizon}"),
        ));
    }
    Ok(())
}

fn validate_state(k: usize, s: RawState, sites: usize, base: Option<&Path>) -> Result<InitialState> {
    let field = format!("run.initial_states[{k}]");
    let label = s.label.unwrap_or_else(|| format!("rho{}", k + 1));
    if label.is_empty() || !label.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
        return Err(Error::config(&field, format!("label {label:?} must be non-empty [A-Za-z0-9_-]")));
    }
    let given = [s.sites.is_some(), s.uniform.is_some(), s.matrix.is_some()];
    if given.iter().filter(|&&g| g).count() != 1 {
        return Err(Error::config(&field, "give exactly one of `sites`, `uniform`, `matrix`"));
    }
    let check_site = |site: i64| -> Result<usize> {
        if site < 1 || site as usize > sites {
            Err(Error::config(&field, format!("site {site} outside 1..={sites}")))
        } else {
            Ok(site as usize)
        }
    };
    if let Some(path) = s.matrix {
        let path = match base {
            Some(b) if path.is_relative() => b.join(path),
            _ => path,
        };
        return Ok(InitialState::Matrix { label, path });
    }
    let weights: Vec<(usize, f64)> = if let Some(list) = s.uniform {
        if list.is_empty() {
            return Err(Error::config(&field, "`uniform` needs at least one site"));
        }
        let w = 1.0 / list.len() as f64;
        list.into_iter().map(|site| Ok((check_site(site)?, w))).collect::<Result<_>>()?
    } else {
        s.sites
            .unwrap_or_default()
            .into_iter()
            .map(|(site, w)| Ok((check_site(site)?, w)))
            .collect::<Result<_>>()?
    };
    if weights.is_empty() {
        return Err(Error::config(&field, "mixture is empty"));
    }
    if let Some((_, w)) = weights.iter().find(|(_, w)| !(*w >= 0.0 && w.is_finite())) {
        return Err(Error::config(&field, format!("weight {w} is negative")));
    }
    let total: f64 = weights.iter().map(|(_, w)| w).sum();
    if (total - 1.0).abs() > WEIGHT_TOL {
        return Err(Error::config(&field, format!("weights sum to {total}, not 1")));
    }
    Ok(InitialState::Sites { label, weights })
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[lattice]
L = 2
[channels]
dephasing = 1.0
[run]
T = 1.0
initial_states = [{ sites = [[1, 1.0]] }]
"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = parse_config(MINIMAL).unwrap();
        assert_eq!(cfg.lattice.hopping, 1.0);
        assert_eq!(cfg.lattice.bc, Boundary::Open);
        assert_eq!(cfg.run.dt, 0.1);
        assert_eq!(cfg.run.modes_to_track, vec![1, 2]);
        assert!(cfg.quench.is_none());
        assert_eq!(cfg.run.initial_states[0].label(), "rho1");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = MINIMAL.replace("L = 2", "L = 2\nsize = 3");
        let err = parse_config(&text).unwrap_err();
        assert!(err.is_config());
        assert!(err.to_string().contains("size"), "{err}");
    }

    #[test]
    fn inverted_quench_window_names_section() {
        let text = format!("{MINIMAL}\n[quench]\nGamma = 0.1\na = 1\nq = 1\nt1 = 0.8\nt2 = 0.4\n");
        let err = parse_config(&text).unwrap_err();
        assert!(matches!(&err, Error::Config { field, .. } if field == "quench"), "{err}");
    }

    #[test]
    fn range_aliases() {
        for key in ["range", "q", "p"] {
            let text = format!("{MINIMAL}\n[quench]\nGamma = 0.1\na = -1\n{key} = 1\nt1 = 0.2\nt2 = 0.4\n");
            let q = parse_config(&text).unwrap().quench.unwrap();
            assert_eq!(q.range, 1);
            assert_eq!(q.phase(), BondPhase::OutOfPhase);
        }
    }

    #[test]
    fn weights_must_sum_to_one() {
        let text = MINIMAL.replace("[[1, 1.0]]", "[[1, 0.5], [2, 0.4]]");
        let err = parse_config(&text).unwrap_err();
        assert!(err.to_string().contains("initial_states[0]"), "{err}");
        let text = MINIMAL.replace("{ sites = [[1, 1.0]] }", "{ uniform = [1, 2] }");
        let cfg = parse_config(&text).unwrap();
        assert_eq!(
            cfg.run.initial_states[0],
            InitialState::Sites {
                label: "rho1".into(),
                weights: vec![(1, 0.5), (2, 0.5)]
            }
        );
    }

    #[test]
    fn bad_values_name_their_field() {
        let cases = [
            (MINIMAL.replace("L = 2", "L = 1"), "lattice.L"),
            (MINIMAL.replace("T = 1.0", "T = -1.0"), "run.T"),
            (MINIMAL.replace("dephasing = 1.0", "dephasing = -1.0"), "channels.dephasing"),
            (MINIMAL.replace("[[1, 1.0]]", "[[3, 1.0]]"), "run.initial_states[0]"),
        ];
        for (text, field) in cases {
            match parse_config(&text).unwrap_err() {
                Error::Config { field: f, .. } => assert_eq!(f, field),
                other => panic!("{other}"),
            }
        }
    }
}
