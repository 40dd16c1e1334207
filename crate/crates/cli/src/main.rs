// Negated comparisons reject NaN parameters along with out-of-range ones.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod config;

use config::{ConfigError, ExperimentConfig};

#[derive(Parser)]
#[command(name = "plap", version, about = "p-Laplacian Robin problems as p tends to 1")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
pub struct Common {
    /// Experiment configuration (JSON).
    #[arg(short, long)]
    config: PathBuf,
    /// Override a configuration key, e.g. `--set solver.p=1.25`.
    #[arg(long = "set", value_name = "PATH=VALUE")]
    overrides: Vec<String>,
    /// Output directory; overrides `output.directory`.
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the regularized problem at one p.
    Solve {
        #[command(flatten)]
        common: Common,
        /// Exponent; overrides `solver.p`.
        #[arg(short)]
        p: Option<f64>,
    },
    /// Continue in p towards 1 and classify the data.
    Sweep {
        #[command(flatten)]
        common: Common,
    },
    /// Estimate the threshold M(f, g, λ).
    Threshold {
        #[command(flatten)]
        common: Common,
    },
    /// Dump closed-form radial solutions and their limit.
    Radial {
        #[command(flatten)]
        common: Common,
        /// Radius samples per p.
        #[arg(long, default_value_t = 101)]
        samples: usize,
    },
    /// Run the limit checks on a saved solution.
    Verify {
        #[command(flatten)]
        common: Common,
        /// solution.csv written by `solve`.
        #[arg(long)]
        solution: PathBuf,
        /// Exponent the solution was computed at; overrides `solver.p`.
        #[arg(short)]
        p: Option<f64>,
    },
    /// Randomized battery for the mixed-norm inequalities.
    CheckIneq {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

/// Outcome classes mapped to exit codes.
pub enum Failure {
    Config(anyhow::Error),
    Numerical(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Numerical(_) => 3,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            Failure::Config(_) => "config",
            Failure::Numerical(_) => "numerical",
        }
    }

    fn error(&self) -> &anyhow::Error {
        match self {
            Failure::Config(e) | Failure::Numerical(e) => e,
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.into())
    }
}

impl From<plap_core::Error> for Failure {
    fn from(e: plap_core::Error) -> Self {
        use plap_core::Error::*;
        match e {
            NonFinite(_) | LinearSolveBreakdown { .. } | NotConverged { .. } | InsufficientData { .. } => {
                Failure::Numerical(e.into())
            }
            _ => Failure::Config(e.into()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Config(e.into())
    }
}

fn load(common: &Common) -> Result<(ExperimentConfig, PathBuf), Failure> {
    let text = std::fs::read_to_string(&common.config)
        .map_err(|e| Failure::Config(anyhow::anyhow!("cannot read {}: {e}", common.config.display())))?;
    let cfg = ExperimentConfig::from_json(&text, &common.overrides)?;
    let out = common.out.clone().unwrap_or_else(|| PathBuf::from(&cfg.output.directory));
    std::fs::create_dir_all(&out)?;
    Ok((cfg, out))
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(v) = std::env::var("PLAP_THREADS") else { return Ok(()) };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Failure::Config(anyhow::anyhow!("PLAP_THREADS must be a positive integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| Failure::Config(e.into()))
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Solve { common, .. }
            | Command::Sweep { common }
            | Command::Threshold { common }
            | Command::Radial { common, .. }
            | Command::Verify { common, .. }
            | Command::CheckIneq { common, .. } => common,
        }
    }
}

fn run(cli: &Cli, out_dir: &mut Option<PathBuf>) -> Result<(), Failure> {
    configure_threads()?;
    let (cfg, out) = load(cli.command.common())?;
    *out_dir = Some(out.clone());
    match &cli.command {
        Command::Solve { p, .. } => commands::solve(&cfg, &out, *p),
        Command::Sweep { .. } => commands::sweep(&cfg, &out),
        Command::Threshold { .. } => commands::threshold(&cfg, &out),
        Command::Radial { samples, .. } => commands::radial(&cfg, &out, *samples),
        Command::Verify { solution, p, .. } => commands::verify(&cfg, &out, solution, *p),
        Command::CheckIneq { samples, seed, .. } => commands::check_ineq(&cfg, &out, *samples, *seed),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut out_dir = cli.command.common().out.clone();
    match run(&cli, &mut out_dir) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let doc = serde_json::json!({
                "schema_version": plap_core::io::SCHEMA_VERSION,
                "error": { "kind": f.kind(), "message": format!("{:#}", f.error()) },
            });
            let text = plap_core::io::to_json_string(&doc).unwrap_or_default();
            eprint!("{text}");
            if let Some(dir) = out_dir.filter(|d| std::fs::create_dir_all(d).is_ok()) {
                let _ = std::fs::write(dir.join("error.json"), &text);
            }
            ExitCode::from(f.code())
        }
    }
}
