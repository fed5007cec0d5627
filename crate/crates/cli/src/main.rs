//! `dokc`: kernel compression, validation sweeps, scenario solves and
//! convergence studies.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{Overrides, RunConfig};

#[derive(Parser)]
#[command(name = "dokc", version, about = "Distributed-order kernel compression and solvers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compress the kernels of a weight function and cache them.
    Compress(Flags),
    /// Compress over a tolerance list and check the kernel invariants.
    ValidateKernel(Flags),
    /// Solve a scalar scenario and write its trajectory.
    SolveOde(Flags),
    /// Solve a PDE scenario and write field snapshots.
    SolvePde(Flags),
    /// Refinement study over N, schemes and grading exponents.
    Converge(Flags),
}

#[derive(Args, Clone, Debug, Default)]
struct Flags {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Kernel cache directory.
    #[arg(long)]
    cache: Option<PathBuf>,
    /// AAA tolerance (comma-separated for sweeps).
    #[arg(long, value_delimiter = ',')]
    tol: Vec<f64>,
    /// Time-stepping scheme (comma-separated for studies).
    #[arg(long, value_delimiter = ',')]
    scheme: Vec<String>,
    /// Step count (comma-separated for studies).
    #[arg(long, value_delimiter = ',')]
    n: Vec<usize>,
    /// Mesh grading exponent (comma-separated for studies).
    #[arg(long, value_delimiter = ',')]
    gamma: Vec<f64>,
    /// Cells per axis of the PDE grid.
    #[arg(long)]
    grid: Option<usize>,
    /// Seed of the random η field.
    #[arg(long)]
    seed: Option<u64>,
    /// Scenario name.
    #[arg(long)]
    scenario: Option<String>,
    /// Weight function catalogue name.
    #[arg(long)]
    weight: Option<String>,
}

impl Flags {
    fn resolve(&self) -> dokc::Result<RunConfig> {
        let base = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        Ok(base.overlay(&Overrides {
            out: self.out.clone(),
            cache: self.cache.clone(),
            tol: self.tol.clone(),
            scheme: self.scheme.clone(),
            n: self.n.clone(),
            gamma: self.gamma.clone(),
            grid: self.grid,
            seed: self.seed,
            scenario: self.scenario.clone(),
            weight: self.weight.clone(),
        }))
    }
}

fn run(cli: Cli) -> dokc::Result<()> {
    let (flags, f): (&Flags, fn(&RunConfig) -> dokc::Result<()>) = match &cli.command {
        Command::Compress(a) => (a, commands::compress),
        Command::ValidateKernel(a) => (a, commands::validate_kernel),
        Command::SolveOde(a) => (a, commands::solve_ode),
        Command::SolvePde(a) => (a, commands::solve_pde),
        Command::Converge(a) => (a, commands::converge),
    };
    f(&flags.resolve()?)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 3 } else { 2 })
        }
    }
}
