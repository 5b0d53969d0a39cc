//! `hmono` command-line front end.
//!
//! Exit status: 0 when every asserted check passes, 1 on check failures,
//! 2 on input errors.

mod commands;
mod config;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use config::RunConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("input error: {0}")]
    Input(String),
    #[error("check failed: {0}")]
    Check(String),
}

impl From<hmono::Error> for CliError {
    fn from(e: hmono::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

#[derive(Parser, Debug)]
#[command(name = "hmono", version, about = "Monotone maps under homogeneous transport costs")]
struct Cli {
    #[command(flatten)]
    global: GlobalOpts,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct GlobalOpts {
    /// Run configuration (`key = value` lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for the run's random generator.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Check tolerance (defaults depend on the command).
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Gauss-Legendre points per axis.
    #[arg(long = "quad-order", global = true)]
    quad_order: Option<usize>,
    /// Cost degree, overriding `cost.p`.
    #[arg(long, global = true)]
    p: Option<f64>,
    /// Dimension, overriding `cost.dim`.
    #[arg(long, global = true)]
    dim: Option<usize>,
    /// Write the CSV report here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Certify ellipticity constants and homogeneity of the cost.
    ValidateCost {
        /// Sphere samples for non-power costs.
        #[arg(long, default_value_t = 1000)]
        samples: usize,
    },
    /// Averaged Hessian, weight and gaps for a quadruple batch.
    Form { quadruples: PathBuf },
    /// Pairwise, cyclic and inverse monotonicity of a map file.
    Check {
        map: PathBuf,
        /// Also run the cyclic check up to this cycle length.
        #[arg(long = "max-cycle")]
        max_cycle: Option<usize>,
        /// Also check the inverse map.
        #[arg(long)]
        inverse: bool,
    },
    /// Emit an optimal-assignment map (or its contact multimap on a grid).
    Generate {
        #[arg(long, default_value_t = 16)]
        m: usize,
        /// Nodes per axis of a grid on [-1, 1]^n for the contact multimap.
        #[arg(long)]
        grid: Option<usize>,
    },
    /// Distorted-angle estimate for a quadruple batch.
    Angles {
        quadruples: PathBuf,
        /// Axis e (comma separated); defaults to the first coordinate axis.
        #[arg(long, allow_hyphen_values = true)]
        axis: Option<String>,
    },
    /// Lipschitz chart of a c-monotone pair set.
    Rectify {
        pairs: PathBuf,
        #[arg(long = "base-index", default_value_t = 0)]
        base_index: usize,
        #[arg(long, default_value_t = 1.0)]
        radius: f64,
        #[arg(long = "auto-shrink")]
        auto_shrink: bool,
    },
    /// Push-forward report for a map and a density grid.
    Measure {
        map: PathBuf,
        density: PathBuf,
        /// Target cells per axis (defaults to the source resolution).
        #[arg(long = "target-res")]
        target_res: Option<usize>,
    },
}

fn load_config(g: &GlobalOpts) -> Result<RunConfig, CliError> {
    let mut cfg = match &g.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    if let Some(t) = g.tol {
        cfg.tol = Some(t);
    }
    if let Some(q) = g.quad_order {
        cfg.quad.order = q;
    }
    if let Some(p) = g.p {
        cfg.cost.p = p;
    }
    if let Some(d) = g.dim {
        cfg.cost.dim = d;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = load_config(&cli.global)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let out = cli.global.out.as_deref();
    match cli.command {
        Command::ValidateCost { samples } => commands::validate_cost(&cfg, &mut rng, samples, out),
        Command::Form { quadruples } => commands::form(&cfg, &mut rng, &quadruples, out),
        Command::Check {
            map,
            max_cycle,
            inverse,
        } => commands::check(&cfg, &mut rng, &map, max_cycle, inverse, out),
        Command::Generate { m, grid } => commands::generate(&cfg, &mut rng, m, grid, out),
        Command::Angles { quadruples, axis } => commands::angles(&cfg, &mut rng, &quadruples, axis.as_deref(), out),
        Command::Rectify {
            pairs,
            base_index,
            radius,
            auto_shrink,
        } => commands::rectify(&cfg, &pairs, base_index, radius, auto_shrink, out),
        Command::Measure {
            map,
            density,
            target_res,
        } => commands::measure(&cfg, &map, &density, target_res, out),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Check(msg)) => {
            eprintln!("FAIL: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
