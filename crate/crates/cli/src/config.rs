//! Run configuration: command-line flags over a JSON file over built-in defaults.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Flags shared by every subcommand. All are optional so that a config file
/// can fill the gaps; built-in defaults depend on the subcommand.
#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// Mutation parameters theta_1,...,theta_H (Dirichlet alpha for `sample dirichlet`).
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub theta: Option<Vec<f64>>,
    /// Number(s) of types per mark, comma separated.
    #[arg(long = "k", value_delimiter = ',')]
    pub types: Option<Vec<usize>>,
    /// Number of draws, paths or Monte-Carlo replicates.
    #[arg(long)]
    pub n: Option<usize>,
    /// Atoms kept per Poisson–Dirichlet draw.
    #[arg(long = "trunc")]
    pub truncation: Option<usize>,
    /// Master seed; replicate r uses the stream derived from (seed, r).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Euler step.
    #[arg(long)]
    pub step: Option<f64>,
    /// Simulation horizon.
    #[arg(long)]
    pub horizon: Option<f64>,
    /// Initial state (simplex coordinates, comma separated).
    #[arg(long, value_delimiter = ',')]
    pub init: Option<Vec<f64>>,
    /// Observation times for moment checks.
    #[arg(long, value_delimiter = ',')]
    pub times: Option<Vec<f64>>,
    /// Polynomial degree bound for exact checks.
    #[arg(long)]
    pub degree: Option<u32>,
    /// Random points for the intertwining check.
    #[arg(long)]
    pub points: Option<usize>,
    /// Atoms per mark written by `sample pd|mpd`.
    #[arg(long)]
    pub top: Option<usize>,
    /// Paths for the moment-ODE check in `verify moments`.
    #[arg(long)]
    pub paths: Option<usize>,
    /// Integrator for `simulate wf`.
    #[arg(long, value_enum)]
    pub scheme: Option<SchemeArg>,
    /// Diffusion family for `simulate wf`.
    #[arg(long, value_enum)]
    pub kind: Option<KindArg>,
    /// Truncation depth of the boundary sequence.
    #[arg(long)]
    pub depth: Option<usize>,
    /// Last term of the boundary sequence.
    #[arg(long = "n-max")]
    pub n_max: Option<usize>,
    /// Data output (CSV); standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Test-report output (JSON lines).
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeArg {
    Euler,
    BesselSplit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum KindArg {
    /// H mark masses with mutation theta.
    Mass,
    /// One mark, K types, total mutation theta_1.
    Symmetric,
    /// H*K types, theta_h / K per type.
    Flat,
}

/// The same fields as [`Flags`], read from a JSON file. Unknown keys are rejected.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub theta: Option<Vec<f64>>,
    #[serde(alias = "k")]
    pub types: Option<Vec<usize>>,
    pub n: Option<usize>,
    #[serde(alias = "trunc")]
    pub truncation: Option<usize>,
    pub seed: Option<u64>,
    pub step: Option<f64>,
    pub horizon: Option<f64>,
    pub init: Option<Vec<f64>>,
    pub times: Option<Vec<f64>>,
    pub degree: Option<u32>,
    pub points: Option<usize>,
    pub top: Option<usize>,
    pub paths: Option<usize>,
    pub scheme: Option<SchemeArg>,
    pub kind: Option<KindArg>,
    pub depth: Option<usize>,
    pub n_max: Option<usize>,
    pub out: Option<PathBuf>,
    pub report: Option<PathBuf>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("invalid config {}: {e}", path.display())))
    }
}

/// Per-subcommand defaults. Fields left `None` have no default and are
/// optional or required by the command itself.
#[derive(Debug, Clone, Default)]
pub struct Defaults {
    pub theta: Option<Vec<f64>>,
    pub types: Option<Vec<usize>>,
    pub n: Option<usize>,
    pub times: Option<Vec<f64>>,
    pub degree: Option<u32>,
}

/// Fully resolved configuration; serialized next to every output as provenance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: String,
    pub theta: Vec<f64>,
    pub types: Vec<usize>,
    pub n: usize,
    pub truncation: usize,
    pub seed: u64,
    pub step: f64,
    pub horizon: f64,
    pub init: Option<Vec<f64>>,
    pub times: Vec<f64>,
    pub degree: u32,
    pub points: usize,
    pub top: usize,
    pub paths: usize,
    pub scheme: SchemeArg,
    pub kind: KindArg,
    pub depth: usize,
    pub n_max: usize,
    pub out: Option<PathBuf>,
    pub report: Option<PathBuf>,
}

impl RunConfig {
    /// `flags` over `file` over `defaults` over the global defaults, then validated.
    pub fn resolve(command: &str, flags: &Flags, file: &FileConfig, defaults: Defaults) -> Result<Self, CliError> {
        macro_rules! pick {
            ($field:ident) => {
                flags.$field.clone().or_else(|| file.$field.clone())
            };
        }
        let cfg = Self {
            command: command.to_string(),
            theta: pick!(theta).or(defaults.theta).unwrap_or_else(|| vec![2.0, 3.0]),
            types: pick!(types).or(defaults.types).unwrap_or_else(|| vec![2, 4, 8]),
            n: pick!(n).or(defaults.n).unwrap_or(1000),
            truncation: pick!(truncation).unwrap_or(1000),
            seed: pick!(seed).unwrap_or(0),
            step: pick!(step).unwrap_or(1e-3),
            horizon: pick!(horizon).unwrap_or(1.0),
            init: pick!(init),
            times: pick!(times).or(defaults.times).unwrap_or_else(|| vec![0.1, 0.5, 1.0]),
            degree: pick!(degree).or(defaults.degree).unwrap_or(3),
            points: pick!(points).unwrap_or(1000),
            top: pick!(top).unwrap_or(10),
            paths: pick!(paths).unwrap_or(2000),
            scheme: pick!(scheme).unwrap_or(SchemeArg::Euler),
            kind: pick!(kind).unwrap_or(KindArg::Mass),
            depth: pick!(depth).unwrap_or(40),
            n_max: pick!(n_max).unwrap_or(200),
            out: pick!(out),
            report: pick!(report),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Config(msg));
        if self.theta.is_empty() || self.theta.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
            return bad(format!("theta must be a nonempty list of positive numbers, got {:?}", self.theta));
        }
        if self.types.is_empty() || self.types.contains(&0) {
            return bad(format!("k must be a nonempty list of positive integers, got {:?}", self.types));
        }
        if self.n == 0 {
            return bad("n must be positive".into());
        }
        if self.truncation == 0 || self.top == 0 || self.points == 0 || self.paths == 0 {
            return bad("trunc, top, points and paths must be positive".into());
        }
        if !(self.step.is_finite() && self.step > 0.0 && self.horizon.is_finite() && self.horizon >= self.step) {
            return bad(format!("need 0 < step <= horizon, got step {} horizon {}", self.step, self.horizon));
        }
        if self.times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
            return bad("times must be nonnegative".into());
        }
        Ok(())
    }

    /// SDE commands need theta_h >= 1 for the mark masses.
    pub fn require_diffusion_theta(&self) -> Result<(), CliError> {
        if let Some(t) = self.theta.iter().find(|t| **t < 1.0) {
            return Err(CliError::Config(format!(
                "this command simulates the mark-mass diffusion, which needs every theta_h >= 1 (got {t})"
            )));
        }
        Ok(())
    }

    pub fn first_k(&self) -> usize {
        self.types[0]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file_override_defaults() {
        let flags = Flags {
            n: Some(5),
            ..Flags::default()
        };
        let file = FileConfig {
            n: Some(7),
            seed: Some(9),
            ..FileConfig::default()
        };
        let defaults = Defaults {
            n: Some(11),
            degree: Some(4),
            ..Defaults::default()
        };
        let c = RunConfig::resolve("x", &flags, &file, defaults).unwrap();
        assert_eq!((c.n, c.seed, c.degree, c.step), (5, 9, 4, 1e-3));
    }

    #[test]
    fn validation_rejects_bad_values() {
        let flags = Flags {
            theta: Some(vec![1.0, -2.0]),
            ..Flags::default()
        };
        let e = RunConfig::resolve("x", &flags, &FileConfig::default(), Defaults::default());
        assert!(matches!(e, Err(CliError::Config(_))));
    }

    #[test]
    fn unknown_config_keys_are_rejected() {
        let r: Result<FileConfig, _> = serde_json::from_str(r#"{"thetta": [1.0]}"#);
        assert!(r.is_err());
        let r: FileConfig = serde_json::from_str(r#"{"k": [2, 3], "trunc": 50}"#).unwrap();
        assert_eq!(r.types, Some(vec![2, 3]));
        assert_eq!(r.truncation, Some(50));
    }
}
