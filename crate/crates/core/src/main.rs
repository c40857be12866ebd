use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use qme_core::experiment::{
    self, load_config, parse_axis, preset, run_experiment, run_sweep, write_spectra, write_sweep,
    ExperimentConfig, RunManifest,
};
use qme_core::Error;

/// Lindblad quench simulations of Mpemba-type relaxation in lattice models.
#[derive(Parser)]
#[command(name = "qme", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory, overriding `run.output_dir`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Sample spacing, overriding `run.dt`.
        #[arg(long)]
        dt: Option<f64>,
    },
    /// Run one of the shipped presets (fig2, fig3-qme, fig3-anti).
    Preset {
        name: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sweep quench parameters, e.g. `--axis a=1,-1 --axis q=1,2`.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long = "axis", required = true)]
        axes: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the eigenvalue CSVs of the unperturbed and quenched generators.
    Spectrum {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Parse and validate a config without running it.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERIC: u8 = 3;
const EXIT_PARTIAL_SWEEP: u8 = 4;

fn fail(e: &Error) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(if e.is_config() { EXIT_CONFIG } else { EXIT_NUMERIC })
}

fn summarize(m: &RunManifest) {
    for p in &m.mpemba {
        if p.report.verdict != qme_core::observables::Verdict::None {
            println!("{} vs {}: {}", p.a, p.b, p.report.verdict.as_str());
        }
    }
    println!("wrote {} trajectories to {}", m.outputs.len(), m.config.run.output_dir.display());
}

fn with_out(mut cfg: ExperimentConfig, out: Option<PathBuf>) -> ExperimentConfig {
    if let Some(dir) = out {
        cfg.run.output_dir = dir;
    }
    cfg
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result: Result<ExitCode, Error> = (|| match cli.command {
        Command::Run { config, out, dt } => {
            let mut cfg = with_out(load_config(&config)?, out);
            if let Some(dt) = dt {
                if !(dt > 0.0 && dt.is_finite()) {
                    return Err(Error::Config {
                        field: "--dt".into(),
                        message: format!("must be positive, got {dt}"),
                    });
                }
                cfg.run.dt = dt;
            }
            summarize(&run_experiment(&cfg)?);
            Ok(ExitCode::SUCCESS)
        }
        Command::Preset { name, out } => {
            let cfg = with_out(preset(&name)?, out);
            summarize(&run_experiment(&cfg)?);
            Ok(ExitCode::SUCCESS)
        }
        Command::Sweep { config, axes, out } => {
            let cfg = with_out(load_config(&config)?, out);
            let axes = axes.iter().map(|a| parse_axis(a)).collect::<Result<Vec<_>, _>>()?;
            let report = run_sweep(&cfg, &axes)?;
            let path = write_sweep(&report, &cfg.run.output_dir)?;
            let failed = report.failed_rows();
            println!("wrote {} rows to {}", report.rows.len(), path.display());
            if failed > 0 {
                eprintln!("{failed} rows failed");
                return Ok(ExitCode::from(EXIT_PARTIAL_SWEEP));
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Spectrum { config, out } => {
            let cfg = with_out(load_config(&config)?, out);
            for p in write_spectra(&cfg, &cfg.run.output_dir)? {
                println!("{}", p.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Validate { config } => {
            let cfg = load_config(&config)?;
            for s in &cfg.run.initial_states {
                if let experiment::InitialState::Matrix { path, .. } = s {
                    if !path.exists() {
                        return Err(Error::Config {
                            field: format!("initial state {}", s.label()),
                            message: format!("{} does not exist", path.display()),
                        });
                    }
                }
            }
            println!(
                "ok: L = {}, {} initial states, quench {}",
                cfg.lattice.sites,
                cfg.run.initial_states.len(),
                if cfg.quench.is_some() { "enabled" } else { "disabled" }
            );
            Ok(ExitCode::SUCCESS)
        }
    })();
    result.unwrap_or_else(|e| fail(&e))
}
