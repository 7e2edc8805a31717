//! Command-line front end: covariant-Hamiltonian numerics on the built-in
//! variational examples, with deterministic CSV/JSON/SVG output.
//!
//! Configuration comes from an optional key = value file plus flags (flags
//! win); the seed falls back to the `MULTISYMP_SEED` environment variable.

mod commands;
mod config;
mod fields;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::CliError;
use config::RunConfig;

#[derive(Parser)]
#[command(
    name = "multisymp",
    about = "Legendre correspondence, Hamilton n-curve residuals and pseudofiber geometry for first-order variational problems",
    version
)]
struct Cli {
    /// Flat key = value configuration file; flags override its entries.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Built-in example: trivial | dirichlet | maxwell2d | mechanics | scalar_field.
    #[arg(long, global = true)]
    example: Option<String>,

    /// Dirichlet coupling B.
    #[arg(long = "b", alias = "B", global = true)]
    b: Option<f64>,

    /// Scalar-field base dimension n.
    #[arg(long, global = true)]
    n: Option<usize>,

    /// Deterministic seed (fallback: MULTISYMP_SEED, then 0).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Nodes per grid axis (>= 3).
    #[arg(long, global = true)]
    nodes: Option<usize>,

    /// Momentum submanifold: ddw | full.
    #[arg(long, global = true)]
    choice: Option<String>,

    /// Named test field for lift/residual/deform (e.g. smooth, harmonic_pair, parabola).
    #[arg(long, global = true)]
    field: Option<String>,

    /// Observable name for bracket/regular: x1, x2, y1, x1x2, e, h.
    #[arg(long, global = true)]
    observable: Option<String>,

    /// Sample count for point-sampling commands.
    #[arg(long, global = true)]
    points: Option<usize>,

    /// Constant value of the higher momentum components (full choice).
    #[arg(long, global = true)]
    r: Option<f64>,

    /// Hamiltonian level h.
    #[arg(long, global = true)]
    level: Option<f64>,

    /// Target level h' for level-shift deformations.
    #[arg(long, global = true)]
    hprime: Option<f64>,

    /// Deformation mode: generator | level_shift | corrupt.
    #[arg(long, global = true)]
    pi_mode: Option<String>,

    /// Deformation amplitude.
    #[arg(long, global = true)]
    pi_scale: Option<f64>,

    /// Integrator step.
    #[arg(long, global = true)]
    dt: Option<f64>,

    /// Integration window start.
    #[arg(long, global = true)]
    t0: Option<f64>,

    /// Integration window end.
    #[arg(long, global = true)]
    t1: Option<f64>,

    /// Initial field values, comma separated.
    #[arg(long, global = true)]
    y0: Option<String>,

    /// Initial momenta, comma separated.
    #[arg(long, global = true)]
    p0: Option<String>,

    /// Output path (default: stdout).
    #[arg(long, global = true)]
    out: Option<String>,

    /// Output format: csv | json | svg.
    #[arg(long, global = true)]
    format: Option<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compare the Newton-derived Hamiltonian against the closed form at seeded random points.
    Derive,
    /// Legendre-lift a named field to a discrete curve and emit it.
    Lift,
    /// Hamilton-equation residuals of a lifted field across two grids.
    Residual,
    /// Runge-Kutta integration of the n = 1 Hamilton system.
    Integrate,
    /// Deform a lifted curve along pseudofiber directions and compare residuals.
    Deform,
    /// Pseudofiber deformation, level-shift and pataplectic checks; nonzero exit on failure.
    Invariance,
    /// Generalized brackets {H, f} at sampled points.
    Bracket,
    /// r-regularity verdict for an observable at sampled points.
    Regular,
    /// Pseudofiber dimensions, closed-form generators and the Ω-sampled directions.
    Pseudofiber,
}

fn merge(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut config = RunConfig::from_sources(cli.config.as_deref())?;
    let mut set = |key: &str, value: Option<String>| -> Result<(), CliError> {
        if let Some(v) = value {
            config.set(key, &v)?;
        }
        Ok(())
    };
    set("example", cli.example.clone())?;
    set("b", cli.b.map(|v| v.to_string()))?;
    set("n", cli.n.map(|v| v.to_string()))?;
    set("seed", cli.seed.map(|v| v.to_string()))?;
    set("nodes", cli.nodes.map(|v| v.to_string()))?;
    set("choice", cli.choice.clone())?;
    set("field", cli.field.clone())?;
    set("observable", cli.observable.clone())?;
    set("points", cli.points.map(|v| v.to_string()))?;
    set("r", cli.r.map(|v| v.to_string()))?;
    set("level", cli.level.map(|v| v.to_string()))?;
    set("hprime", cli.hprime.map(|v| v.to_string()))?;
    set("pi_mode", cli.pi_mode.clone())?;
    set("pi_scale", cli.pi_scale.map(|v| v.to_string()))?;
    set("dt", cli.dt.map(|v| v.to_string()))?;
    set("t0", cli.t0.map(|v| v.to_string()))?;
    set("t1", cli.t1.map(|v| v.to_string()))?;
    set("y0", cli.y0.clone())?;
    set("p0", cli.p0.clone())?;
    set("out", cli.out.clone())?;
    set("format", cli.format.clone())?;
    Ok(config)
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let config = merge(cli)?;
    match cli.command {
        Command::Derive => commands::cmd_derive(&config),
        Command::Lift => commands::cmd_lift(&config),
        Command::Residual => commands::cmd_residual(&config),
        Command::Integrate => commands::cmd_integrate(&config),
        Command::Deform => commands::cmd_deform(&config),
        Command::Invariance => commands::cmd_invariance(&config),
        Command::Bracket => commands::cmd_bracket(&config),
        Command::Regular => commands::cmd_regular(&config),
        Command::Pseudofiber => commands::cmd_pseudofiber(&config),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}
