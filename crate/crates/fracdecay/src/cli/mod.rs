//! Batch command-line interface: configuration, orchestration, sweeps and
//! output files.

pub mod commands;
pub mod config;
pub mod output;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::error::Error;
use config::ExperimentConfig;

#[derive(Debug, Parser)]
#[command(name = "fracdecay", version, about = "Fractional Schrödinger decay toolkit")]
pub struct Cli {
    /// TOML experiment configuration; built-in defaults when absent.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (overrides `output.dir`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Tolerance override: solver residual for solve/sweep, quadrature for
    /// amu/fraclap-eval, operator accuracy for selftest.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Worker threads; all cores when absent.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Seed override.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Print the configuration key reference and exit.
    #[arg(long)]
    pub keys: bool,
    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print 2_s^*, q_*, q_omega and the threshold for the configured problem.
    Thresholds,
    /// Run the nonexistence certificate for the configured p.
    Certify,
    /// Evaluate A_mu.
    Amu {
        /// Weight exponents.
        #[arg(long, num_args = 1.., required = true)]
        mu: Vec<f64>,
        /// Dimension (overrides `params.N`).
        #[arg(long = "N")]
        n: Option<u32>,
        /// Fractional order (overrides `params.s`).
        #[arg(long)]
        s: Option<f64>,
    },
    /// Evaluate (-Delta)^s w_mu at the given radii.
    FraclapEval {
        /// Weight exponent.
        #[arg(long)]
        mu: f64,
        /// Radii.
        #[arg(long, num_args = 1.., required = true)]
        r: Vec<f64>,
        /// Dimension (overrides `params.N`).
        #[arg(long = "N")]
        n: Option<u32>,
        /// Fractional order (overrides `params.s`).
        #[arg(long)]
        s: Option<f64>,
    },
    /// Solve the original equation via penalization and eps bisection.
    Solve,
    /// Grid over (p, omega, eps) written as CSV.
    Sweep,
    /// Operator self-test and gradient check.
    Selftest,
}

/// Process exit code for an error: 2 configuration, 3 infeasible or
/// threshold, 4 convergence or accuracy failure.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Io(_) | Error::Inadmissible(_) | Error::Grid(_) | Error::NonFinitePotential(_) => 2,
        Error::BelowThreshold { .. }
        | Error::OpenProblemBoundary { .. }
        | Error::Classification(_)
        | Error::Divergent { .. } => 3,
        Error::Tolerance { .. }
        | Error::SelfTest { .. }
        | Error::Collapsed
        | Error::IterationCap { .. }
        | Error::NoPassingEps { .. }
        | Error::NonPositive => 4,
    }
}

/// Runs the CLI and returns the process exit code.
pub fn main() -> i32 {
    let cli = Cli::parse();
    if cli.keys {
        print!("{}", config::key_reference());
        return 0;
    }
    let Some(command) = &cli.command else {
        eprintln!("no subcommand given; see --help");
        return 2;
    };
    match run(&cli, command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if let Error::NoPassingEps { trace, .. } = &e {
                for (eps, margin) in trace {
                    eprintln!("  eps = {eps:.6e}  margin = {margin:.6e}");
                }
            }
            exit_code(&e)
        }
    }
}

fn run(cli: &Cli, command: &Command) -> crate::Result<()> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(dir) = &cli.out {
        cfg.output.dir = dir.clone();
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(t) = cli.tol {
        if !(t > 0.0) {
            return Err(Error::Config(format!("--tol must be positive, got {t}")));
        }
    }
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(Error::Config("--jobs must be positive".into()));
        }
        // Fails only if the global pool already exists, which is harmless.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global();
    }
    match command {
        Command::Thresholds => commands::thresholds(&cfg),
        Command::Certify => commands::certify(&cfg),
        Command::Amu { mu, n, s } => commands::amu(&cfg, mu, *n, *s, cli.tol),
        Command::FraclapEval { mu, r, n, s } => commands::fraclap_eval(&cfg, *mu, r, *n, *s, cli.tol),
        Command::Solve => commands::solve(&cfg, cli.tol).map(|_| ()),
        Command::Sweep => commands::sweep(&cfg, cli.tol).map(|_| ()),
        Command::Selftest => commands::selftest(&cfg, cli.tol),
    }
}
