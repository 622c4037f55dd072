//! `liegate`: solve transformation parameters, emit maps and propagators, run the verification suite.
//!
//! Exit codes: 0 success, 1 verification failure, 2 configuration error,
//! 3 domain error, 4 requested time at or beyond a caustic.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use config::{PathArg, System};

#[derive(Debug, Parser)]
#[command(name = "liegate", version, about = "Exact evolution data for time-dependent quadratic Hamiltonians")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve the transformation parameters; writes params.csv, maps.csv and summary.json.
    Params(RunArgs),
    /// Build the propagator at t_end; writes kernel.json and, with --apply, psi_out.csv.
    Kernel(KernelArgs),
    /// Run the invariant and oracle suite; writes report.json.
    Verify(VerifyArgs),
    /// Export structure constants as `structure_<ALG>.csv` with columns i,j,k,num,den.
    Structure(StructureArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long, value_enum)]
    pub system: Option<System>,
    #[arg(long, value_enum)]
    pub path: Option<PathArg>,
    /// JSON configuration file; flags take precedence over its keys.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[arg(long, allow_negative_numbers = true)]
    pub t_end: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub tol: Option<f64>,
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct KernelArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Initial state: `gaussian[:sigma=..,x0=..,p0=..,y0=..,py=..]` or a wavefunction CSV/BIN file.
    #[arg(long, value_name = "SPEC")]
    pub apply: Option<String>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[arg(long, hide = true)]
    pub inject_corruption: bool,
}

#[derive(Debug, Args)]
pub struct StructureArgs {
    /// Algebra to export; all three when omitted.
    #[arg(long, value_enum)]
    pub algebra: Option<AlgebraArg>,
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum AlgebraArg {
    Lp,
    Gho,
    Cp,
}

/// A failure with its exit code, reported on stderr as JSON.
#[derive(Debug, Clone, Serialize)]
pub struct CliError {
    #[serde(skip)]
    pub code: u8,
    pub kind: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub field: Option<String>,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub valid_to: Option<f64>,
}

pub const EXIT_VERIFY: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_DOMAIN: u8 = 3;
pub const EXIT_CAUSTIC: u8 = 4;

impl CliError {
    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            code: EXIT_CONFIG,
            kind: "config",
            field: Some(field.into()),
            message: message.into(),
            t: None,
            valid_to: None,
        }
    }

    fn plain(code: u8, kind: &'static str, message: String) -> Self {
        Self { code, kind, field: None, message, t: None, valid_to: None }
    }
}

impl From<liegate_core::Error> for CliError {
    fn from(e: liegate_core::Error) -> Self {
        use liegate_core::Error as E;
        let message = e.to_string();
        match e {
            E::Caustic { t, valid_to } => Self {
                t: Some(t),
                valid_to: output::finite(valid_to),
                ..Self::plain(EXIT_CAUSTIC, "caustic", message)
            },
            E::Domain(_) => Self::plain(EXIT_DOMAIN, "domain", message),
            E::Precondition(_) => Self::plain(EXIT_DOMAIN, "precondition", message),
            E::Integration { .. } => Self::plain(EXIT_DOMAIN, "integration", message),
            E::Internal(_) => Self::plain(EXIT_DOMAIN, "internal", message),
            E::Io(_) => Self::plain(EXIT_CONFIG, "io", message),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::plain(EXIT_CONFIG, "io", e.to_string())
    }
}

fn report(e: &CliError) -> ExitCode {
    #[derive(Serialize)]
    struct Wrapper<'a> {
        error: &'a CliError,
    }
    eprint!("{}", output::to_json(&Wrapper { error: e }));
    ExitCode::from(e.code)
}

fn init_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("LIEGATE_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| CliError::config("LIEGATE_THREADS", format!("expected a positive integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::config("LIEGATE_THREADS", e.to_string()))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            return report(&CliError::config("arguments", e.to_string().trim().to_string()));
        }
    };
    if let Err(e) = init_threads() {
        return report(&e);
    }
    let result = match cli.command {
        Command::Params(a) => commands::params(&a),
        Command::Kernel(a) => commands::kernel(&a),
        Command::Verify(a) => commands::verify(&a),
        Command::Structure(a) => commands::structure(&a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => report(&e),
    }
}
