use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use typica_cli::config::MomentsConfig;
use typica_cli::{cmd_evolve, cmd_moments, cmd_predict, cmd_sample, CliError, ExperimentConfig};

#[derive(Parser)]
#[command(name = "typica", version, about = "Constrained Hilbert-space sampling, predictions and dynamics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// Experiment config file (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for output files.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Number of Monte Carlo samples (or time steps for `evolve`).
    #[arg(long, global = true)]
    n: Option<usize>,
    /// Do not print the report to stdout.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form predictions for the configured composite.
    Predict,
    /// Monte Carlo sampling of the accessible region.
    Sample,
    /// Schrödinger evolution under a constraint-respecting Hamiltonian.
    Evolve,
    /// Sphere moment closed form vs Monte Carlo.
    Moments {
        #[arg(long)]
        radius: Option<f64>,
        #[arg(long)]
        dim: Option<usize>,
        #[arg(long)]
        ul: Option<u32>,
        #[arg(long)]
        um: Option<u32>,
    },
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join(name), contents)?;
    Ok(())
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialize");
    s.push('\n');
    s
}

fn run(cli: Cli) -> Result<(), CliError> {
    let c = &cli.common;
    let mut cfg = match &c.config {
        Some(path) => ExperimentConfig::load(path)?,
        None if matches!(cli.command, Command::Moments { .. }) => ExperimentConfig::from_toml("")?,
        None => return Err(CliError::Config("--config is required".into())),
    };
    if c.seed.is_some() {
        cfg.seed = c.seed;
    }
    let emit = |name: &str, json: String| -> Result<(), CliError> {
        if let Some(dir) = &c.out {
            write_file(dir, name, &json)?;
        }
        if !c.quiet {
            print!("{json}");
        }
        Ok(())
    };

    match cli.command {
        Command::Predict => {
            if c.n.is_some() {
                cfg.predict.n = c.n;
            }
            emit("report.json", to_json(&cmd_predict(&cfg)?))
        }
        Command::Sample => {
            if c.n.is_some() {
                cfg.sample.n = c.n;
            }
            let out = cmd_sample(&cfg)?;
            if let Some(dir) = &c.out {
                write_file(dir, "samples.csv", &out.samples_csv)?;
                write_file(dir, "summary.csv", &out.summary_csv)?;
            }
            emit("report.json", to_json(&out.report))
        }
        Command::Evolve => {
            if c.n.is_some() {
                cfg.evolve.steps = c.n;
            }
            let out = cmd_evolve(&cfg)?;
            if let Some(dir) = &c.out {
                write_file(dir, "trajectory.csv", &out.trajectory_csv)?;
                for (k, snap) in out.snapshots.iter().enumerate() {
                    write_file(&dir.join("states"), &format!("state_{k:06}.csv"), snap)?;
                }
            }
            emit("report.json", to_json(&out.report))?;
            if !out.report.conserved {
                return Err(CliError::Validation(format!(
                    "conservation breached: W_AB drift {:e}, W_E drift {:e}, norm drift {:e}",
                    out.report.max_subspace_weight_drift,
                    out.report.max_shell_weight_drift,
                    out.report.max_norm_drift
                )));
            }
            Ok(())
        }
        Command::Moments { radius, dim, ul, um } => {
            let m = cfg.moments.get_or_insert(MomentsConfig {
                radius: None,
                dim: None,
                u_l: None,
                u_m: None,
                n: None,
            });
            m.radius = radius.or(m.radius);
            m.dim = dim.or(m.dim);
            m.u_l = ul.or(m.u_l);
            m.u_m = um.or(m.u_m);
            m.n = c.n.or(m.n);
            emit("report.json", to_json(&cmd_moments(&cfg)?))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("typica: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
