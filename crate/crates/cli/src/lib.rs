//! Batch front end for `tmb-core`: each subcommand writes CSV/JSON artifacts
//! and a `manifest.json` into the output directory.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tmb_core::params::{from_physical, PhysicalOptions};
use tmb_core::{ErrorClass, ModelParams, PhysicalParams};

mod commands;
pub mod output;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] tmb_core::Error),

    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },

    #[error("{path}: {msg}")]
    Parse { path: String, msg: String },

    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> CliError {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    pub fn csv(path: &Path, e: csv::Error) -> CliError {
        CliError::Parse {
            path: path.display().to_string(),
            msg: e.to_string(),
        }
    }

    /// 2 for invalid parameters or arguments, 3 for numerical failures,
    /// 4 for I/O and malformed input files.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) => match e.class() {
                ErrorClass::Validation => 2,
                ErrorClass::Numerical => 3,
            },
            CliError::Usage(_) => 2,
            CliError::Io { .. } | CliError::Parse { .. } => 4,
        }
    }
}

/// `lo:hi` on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
}

impl FromStr for Range {
    type Err = String;

    fn from_str(s: &str) -> Result<Range, String> {
        let (a, b) = s.split_once(':').ok_or_else(|| format!("expected lo:hi, got {s:?}"))?;
        let lo: f64 = a.trim().parse().map_err(|e| format!("{a:?}: {e}"))?;
        let hi: f64 = b.trim().parse().map_err(|e| format!("{b:?}: {e}"))?;
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(format!("need finite lo <= hi, got {s:?}"));
        }
        Ok(Range { lo, hi })
    }
}

/// `name=lo:hi:n` parameter sweep, `name` one of `v1..v4`, `R`, `P`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Sweep {
    pub param: &'static str,
    #[serde(skip)]
    pub which: usize,
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

pub const PARAM_NAMES: [&str; 6] = ["v1", "v2", "v3", "v4", "R", "P"];

impl FromStr for Sweep {
    type Err = String;

    fn from_str(s: &str) -> Result<Sweep, String> {
        let (name, rest) = s.split_once('=').ok_or_else(|| format!("expected name=lo:hi:n, got {s:?}"))?;
        let which = PARAM_NAMES
            .iter()
            .position(|p| *p == name.trim())
            .ok_or_else(|| format!("unknown parameter {name:?}, expected one of {PARAM_NAMES:?}"))?;
        let parts: Vec<&str> = rest.split(':').collect();
        if parts.len() != 3 {
            return Err(format!("expected lo:hi:n after '=', got {rest:?}"));
        }
        let lo: f64 = parts[0].parse().map_err(|e| format!("{:?}: {e}", parts[0]))?;
        let hi: f64 = parts[1].parse().map_err(|e| format!("{:?}: {e}", parts[1]))?;
        let n: usize = parts[2].parse().map_err(|e| format!("{:?}: {e}", parts[2]))?;
        if n == 0 || !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(format!("need finite lo <= hi and n >= 1, got {s:?}"));
        }
        Ok(Sweep {
            param: PARAM_NAMES[which],
            which,
            lo,
            hi,
            n,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    /// `(c, q) = (1, P)` everywhere.
    Equilibrium,
    Zero,
    /// Dominant eigenfunction scaled to unit mean of `c`.
    Dominant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Dominant eigenvalue, both eigenfunctions and sensitivities.
    Analyze,
    /// Collocation spectrum and real roots of Delta.
    Spectrum,
    /// Time integration with diagnostics and snapshots.
    Simulate,
    /// Adjoint derivatives of the dominant eigenvalue, optionally swept.
    Sensitivity,
    /// Closed-form spectrum for equal velocities.
    Limit,
    /// Steady state under a constant feed.
    Steady,
    /// Delta on a uniform grid of real lambda.
    DeltaScan,
}

#[derive(Debug, Clone, Parser, Serialize)]
#[command(name = "tmb", version, about = "Spectral analysis of the linear four-zone TMB model")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Parameter file: dimensionless `{v, R, P, f0}` or physical data.
    #[arg(long, global = true)]
    pub params: Option<PathBuf>,

    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,

    /// Bisection tolerance for real roots of Delta.
    #[arg(long, global = true, default_value_t = 1e-12)]
    pub tol: f64,

    /// Lambda interval `lo:hi` (delta-scan, spectrum).
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub range: Option<Range>,

    /// Grid size; meaning depends on the subcommand.
    #[arg(long, global = true)]
    pub grid: Option<usize>,

    /// Cells per zone.
    #[arg(long = "Nx", global = true)]
    pub nx: Option<usize>,

    /// Courant parameter `dt / dx`.
    #[arg(long, global = true)]
    pub p: Option<f64>,

    /// Final dimensionless time.
    #[arg(long = "T", global = true)]
    pub t_final: Option<f64>,

    /// Feed override.
    #[arg(long, global = true)]
    pub f0: Option<f64>,

    /// Initial data for simulate.
    #[arg(long, global = true, value_enum, default_value_t = Preset::Equilibrium)]
    pub preset: Preset,

    /// Steps between diagnostics rows.
    #[arg(long, global = true)]
    pub record_every: Option<usize>,

    /// Comma-separated snapshot times for simulate; the final state is always written.
    #[arg(long, global = true, value_delimiter = ',')]
    pub snapshots: Vec<f64>,

    /// Decay-rate fit window `lo:hi` for simulate.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub window: Option<Range>,

    /// Skip the finite-difference cross-check of the sensitivities.
    #[arg(long, global = true)]
    pub no_fd: bool,

    /// Parameter sweep `name=lo:hi:n` for sensitivity.
    #[arg(long, global = true)]
    pub sweep: Option<Sweep>,

    /// Solid velocity (cm/min) for the time constant; taken from physical input if absent.
    #[arg(long, global = true)]
    pub u_s: Option<f64>,

    /// Reference length (cm) for the time constant; defaults to the zone length.
    #[arg(long, global = true)]
    pub l_ref: Option<f64>,

    /// Round the phase ratio to one decimal when converting physical input.
    #[arg(long, global = true)]
    pub rounded_f: bool,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum ParamsFile {
    Model(ModelParams),
    Physical(PhysicalParams),
}

/// Parameters after loading, with whatever dimensional data came along.
#[derive(Debug, Clone, Serialize)]
pub struct Loaded {
    pub params: ModelParams,
    pub physical: Option<PhysicalParams>,
    pub source: String,
}

impl Loaded {
    pub fn u_s(&self, cli: &Cli) -> Option<f64> {
        cli.u_s.or(self.physical.map(|p| p.u_s))
    }

    pub fn l_ref(&self, cli: &Cli) -> Option<f64> {
        cli.l_ref.or(self.physical.map(|p| p.l_zone))
    }
}

/// The case study, or the equal-velocity set `v = 1.275` for `limit`.
pub fn builtin(command: Command) -> (ModelParams, &'static str) {
    match command {
        Command::Limit => (ModelParams::new([1.275; 4], 18.0, 1.03), "builtin:limit-case"),
        _ => (ModelParams::case_study(), "builtin:case-study"),
    }
}

pub fn load_params(cli: &Cli) -> Result<Loaded, CliError> {
    let mut loaded = match &cli.params {
        None => {
            let (params, name) = builtin(cli.command);
            Loaded {
                params,
                physical: None,
                source: name.to_string(),
            }
        }
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            let file: ParamsFile = serde_json::from_str(&text).map_err(|e| CliError::Parse {
                path: path.display().to_string(),
                msg: e.to_string(),
            })?;
            let source = path.display().to_string();
            match file {
                ParamsFile::Model(params) => Loaded {
                    params,
                    physical: None,
                    source,
                },
                ParamsFile::Physical(phys) => {
                    let opts = PhysicalOptions {
                        use_rounded_f: cli.rounded_f,
                    };
                    Loaded {
                        params: from_physical(&phys, opts)?,
                        physical: Some(phys),
                        source,
                    }
                }
            }
        }
    };
    if let Some(f0) = cli.f0 {
        loaded.params.f0 = f0;
    }
    Ok(loaded)
}

/// Worker pool for sweeps, capped by `TMB_THREADS` when set.
pub fn thread_pool() -> Result<rayon::ThreadPool, CliError> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Ok(s) = std::env::var("TMB_THREADS") {
        let n: usize = s
            .trim()
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| CliError::Usage(format!("TMB_THREADS must be a positive integer, got {s:?}")))?;
        b = b.num_threads(n);
    }
    b.build().map_err(|e| CliError::Usage(e.to_string()))
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    if !(cli.tol > 0.0 && cli.tol.is_finite()) {
        return Err(CliError::Usage(format!("--tol must be positive, got {}", cli.tol)));
    }
    let loaded = load_params(cli)?;
    commands::dispatch(cli, &loaded)
}
