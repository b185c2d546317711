//! `multipd`: sampling, simulation and verification runs for multiple
//! Poisson–Dirichlet diffusions.
//!
//! Exit codes: 0 on success, 1 when a verification check has an unexpected
//! outcome or a run fails, 2 on invalid configuration.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use thiserror::Error;

use config::{Defaults, FileConfig, Flags, RunConfig};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] multipd::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_)
            | CliError::Core(multipd::Error::InvalidParameter(_) | multipd::Error::DimensionMismatch { .. }) => 2,
            _ => 1,
        }
    }
}

const CONFIG_HELP: &str = "\
Every flag can also be given in a JSON config file (--config) under the same
name (`k` or `types`, `trunc` or `truncation`, `n_max`); flags override the file,
which overrides built-in defaults. Identical configs give byte-identical output.
CSV outputs written with --out get a `<name>.schema.json` sidecar describing each
column and recording the resolved configuration.";

#[derive(Debug, Parser)]
#[command(name = "multipd", version, about = "Multiple Poisson–Dirichlet diffusions: sampling, simulation, verification", after_help = CONFIG_HELP)]
struct Cli {
    /// Worker threads for replicate parallelism (results do not depend on it).
    #[arg(long, global = true, env = "MULTIPD_THREADS")]
    threads: Option<usize>,
    /// JSON config file; flags take precedence over it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Draw from the stationary laws.
    Sample {
        #[command(subcommand)]
        what: SampleCmd,
    },
    /// Simulate diffusion paths.
    Simulate {
        #[command(subcommand)]
        what: SimulateCmd,
    },
    /// Run verification suites; prints a table, writes JSON lines with --report.
    Verify {
        #[command(subcommand)]
        what: VerifyCmd,
    },
    /// Demonstrations.
    Demo {
        #[command(subcommand)]
        what: DemoCmd,
    },
}

#[derive(Debug, Subcommand)]
enum SampleCmd {
    /// Dir(alpha) with alpha = --theta. CSV: replicate, x1..xd.
    Dirichlet(Flags),
    /// Ranked PD(theta), single theta (default 1). CSV: replicate, a1..a<top>, rest.
    Pd(Flags),
    /// Multiple PD(theta). CSV, one row per draw and mark: replicate, mark, mass, a1..a<top>, rest.
    Mpd(Flags),
    /// Flat Dir_HK grouped into masses and frequencies (K = first --k).
    /// CSV, one row per draw and mark: replicate, mark, mass, xi1..xiK.
    Grouped(Flags),
}

#[derive(Debug, Subcommand)]
enum SimulateCmd {
    /// Wright–Fisher diffusion (--kind mass|symmetric|flat). CSV: replicate, t, x1..xd.
    Wf(Flags),
    /// Skew product W_h X_h(tau_h) with K = first --k types per mark.
    /// CSV: replicate, t, mark, w, tau, x1..xK.
    Skew(Flags),
    /// Ranked finite-type surrogate of the limit process, from a stationary start.
    /// CSV: replicate, t, mark, w, tau, x1..xK (ranked).
    Limit(Flags),
}

#[derive(Debug, Subcommand)]
enum VerifyCmd {
    /// A^K(f o S) = (B^K f) o S on random points, all monomials up to --degree (default 4).
    Intertwine(Flags),
    /// Exact stationarity of B^K under the Dirichlet law, monomials up to --degree (default 3).
    StationaryExact(Flags),
    /// Monte-Carlo stationarity of B under the multiple PD law, with the uncorrected contrast.
    StationaryMc(Flags),
    /// Stationary moments and the mark-mass moment ODE along paths.
    Moments(Flags),
    /// Self-similarity of the Dirichlet law in both directions.
    Selfsim(Flags),
    /// Ranked-Dirichlet sweep towards the Kingman limit, and the 1/K generator bound.
    Sweep(Flags),
    /// All of the above.
    All(Flags),
}

#[derive(Debug, Subcommand)]
enum DemoCmd {
    /// The boundary sequence whose decomposition has two limit points.
    /// CSV, one row per term and mark: n, parity, mark, w, x1..x<depth>, x_tail.
    Boundary(Flags),
}

type Runner = fn(&RunConfig) -> Result<Vec<multipd::verify::TestReport>, CliError>;

fn dispatch(command: &Command) -> (&'static str, &Flags, Defaults, Option<Runner>) {
    let verify_defaults = |degree| Defaults {
        n: Some(100_000),
        degree: Some(degree),
        ..Defaults::default()
    };
    match command {
        Command::Sample { what } => match what {
            SampleCmd::Dirichlet(f) => ("sample dirichlet", f, Defaults::default(), Some(commands::sample_dirichlet)),
            SampleCmd::Pd(f) => (
                "sample pd",
                f,
                Defaults {
                    theta: Some(vec![1.0]),
                    ..Defaults::default()
                },
                Some(commands::sample_pd),
            ),
            SampleCmd::Mpd(f) => ("sample mpd", f, Defaults::default(), Some(commands::sample_mpd)),
            SampleCmd::Grouped(f) => ("sample grouped", f, Defaults::default(), Some(commands::sample_grouped)),
        },
        Command::Simulate { what } => {
            let one = Defaults {
                n: Some(1),
                ..Defaults::default()
            };
            match what {
                SimulateCmd::Wf(f) => ("simulate wf", f, one, Some(commands::simulate_wf_cmd)),
                SimulateCmd::Skew(f) => ("simulate skew", f, one, Some(commands::simulate_skew)),
                SimulateCmd::Limit(f) => ("simulate limit", f, one, Some(commands::simulate_limit)),
            }
        }
        Command::Verify { what } => match what {
            VerifyCmd::Intertwine(f) => ("verify intertwine", f, verify_defaults(4), Some(commands::verify_intertwine)),
            VerifyCmd::StationaryExact(f) => (
                "verify stationary-exact",
                f,
                verify_defaults(3),
                Some(commands::verify_stationary_exact),
            ),
            VerifyCmd::StationaryMc(f) => ("verify stationary-mc", f, verify_defaults(3), Some(commands::verify_stationary_mc)),
            VerifyCmd::Moments(f) => ("verify moments", f, verify_defaults(3), Some(commands::verify_moments)),
            VerifyCmd::Selfsim(f) => ("verify selfsim", f, verify_defaults(3), Some(commands::verify_selfsim)),
            VerifyCmd::Sweep(f) => (
                "verify sweep",
                f,
                Defaults {
                    types: Some(vec![4, 16, 64, 256]),
                    ..verify_defaults(3)
                },
                Some(commands::verify_sweep),
            ),
            // needs to know whether --degree was given; handled in `run`
            VerifyCmd::All(f) => ("verify all", f, verify_defaults(3), None),
        },
        Command::Demo { what } => match what {
            DemoCmd::Boundary(f) => ("demo boundary", f, Defaults::default(), Some(commands::demo_boundary)),
        },
    }
}

fn run(cli: &Cli) -> Result<bool, CliError> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(CliError::Config("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| CliError::Config(format!("cannot start thread pool: {e}")))?;
    }
    let file = match &cli.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let (name, flags, defaults, runner) = dispatch(&cli.command);
    let cfg = RunConfig::resolve(name, flags, &file, defaults)?;
    let reports = match runner {
        Some(run) => run(&cfg)?,
        None => commands::verify_all(&cfg, flags.degree.is_some() || file.degree.is_some())?,
    };
    let unexpected: Vec<_> = reports.iter().filter(|r| !r.as_expected()).collect();
    for r in &unexpected {
        eprintln!("unexpected outcome: {} (statistic {:e}, threshold {:e})", r.name, r.statistic, r.threshold);
    }
    Ok(unexpected.is_empty())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("multipd: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
