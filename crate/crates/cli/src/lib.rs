//! Command-line front end: flag parsing, config merging, artifact writing and exit codes.
//!
//! Exit codes: 0 on success, 1 on a computation failure (with an error record
//! on stdout and in `error.json`), 2 on a usage or configuration error.

pub mod commands;
pub mod config;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Serialize;

use commands::{dispatch, RunFlags};
pub use config::ExperimentConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Compute(#[from] hsl_core::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Compute(e) => e.kind(),
            CliError::Io(_) => "io",
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "hsl", version, about = "Prescribed mean curvature laboratory")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// JSON experiment config; unknown keys are rejected.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (default: hsl-out/<command>).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Reduced resolutions.
    #[arg(long, global = true)]
    pub quick: bool,
    /// Seed for randomized sweeps.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Grid resolution: rings and meridians for revolved surfaces, 1/spacing for graphs,
    /// sample count for estrella.
    #[arg(long, global = true)]
    pub resolution: Option<usize>,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    /// Planar curve generating a flat cylinder, with closure diagnostics.
    FlatCurve,
    /// Dirichlet problem for a graph over a planar domain.
    SolveGraph,
    /// Rotational sphere or hemisphere from a zonal field.
    Rotational,
    /// Stability operator, principal eigenvalue and radius checks on a surface.
    StabilityReport,
    /// Estrella constant of a field.
    Estrella,
    /// Maximal heights of graphs over growing disks.
    HeightSweep,
    /// Intrinsic radius against the estrella bound over a family of surfaces.
    RadiusSweep,
    /// Flux integrals over a closed surface.
    Flux,
    /// Runs the acceptance suite.
    Reproduce,
}

impl Command {
    pub fn id(self) -> &'static str {
        match self {
            Command::FlatCurve => "flat-curve",
            Command::SolveGraph => "solve-graph",
            Command::Rotational => "rotational",
            Command::StabilityReport => "stability-report",
            Command::Estrella => "estrella",
            Command::HeightSweep => "height-sweep",
            Command::RadiusSweep => "radius-sweep",
            Command::Flux => "flux",
            Command::Reproduce => "reproduce",
        }
    }
}

#[derive(Serialize)]
struct ErrorRecord<'a> {
    error: ErrorBody<'a>,
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    command: &'a str,
    kind: &'a str,
    message: String,
}

fn error_json(command: &str, e: &CliError) -> String {
    let rec = ErrorRecord { error: ErrorBody { command, kind: e.kind(), message: e.to_string() } };
    hsl_core::export::to_json_string(&rec).unwrap_or_else(|_| "{\"error\":{}}\n".into())
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("HSL_THREADS") else { return Ok(()) };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| CliError::Usage(format!("HSL_THREADS must be a positive integer, got {v:?}")))?;
    // a pool may already exist when run() is called twice in one process
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

fn write_artifacts(dir: &Path, files: &[(String, Vec<u8>)], summary: &str, summary_name: &str) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join(summary_name), summary)?;
    for (name, bytes) in files {
        std::fs::write(dir.join(name), bytes)?;
    }
    Ok(())
}

fn summary_name(command: Command) -> &'static str {
    match command {
        Command::StabilityReport => "report.json",
        Command::Reproduce => "suite.json",
        _ => "summary.json",
    }
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = write!(stderr, "{}", e.render());
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let id = cli.command.id();
    let out_dir = std::cell::RefCell::new(None::<PathBuf>);
    let result = (|| -> Result<commands::Artifacts, CliError> {
        configure_threads()?;
        let cfg = match &cli.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        cfg.validate(id)?;
        let dir = cli.out.clone().or_else(|| cfg.out.clone()).unwrap_or_else(|| Path::new("hsl-out").join(id));
        *out_dir.borrow_mut() = Some(dir);
        let flags = RunFlags {
            quick: cli.quick,
            seed: cli.seed.or(cfg.seed).unwrap_or(7),
            resolution: cli.resolution.or(cfg.resolution),
        };
        if flags.resolution == Some(0) {
            return Err(CliError::Usage("resolution must be positive".into()));
        }
        dispatch(id, &cfg, flags)
    })();
    let dir = out_dir.into_inner();
    let artifacts = result.and_then(|a| {
        let dir = dir.as_ref().expect("set before dispatch");
        write_artifacts(dir, &a.files, &a.summary, summary_name(cli.command))?;
        Ok(a)
    });
    match artifacts {
        Ok(a) => {
            for line in &a.table {
                let _ = writeln!(stdout, "{line}");
            }
            if a.table.is_empty() {
                let _ = write!(stdout, "{}", a.summary);
            }
            if a.success {
                0
            } else {
                let _ = writeln!(stderr, "acceptance failures:");
                for line in &a.failures {
                    let _ = writeln!(stderr, "  {line}");
                }
                1
            }
        }
        Err(e) => {
            let record = error_json(id, &e);
            if e.exit_code() == 2 {
                let _ = write!(stderr, "{record}");
            } else {
                let _ = write!(stdout, "{record}");
                if let Some(d) = &dir {
                    let _ = std::fs::create_dir_all(d).and_then(|_| std::fs::write(d.join("error.json"), &record));
                }
            }
            e.exit_code()
        }
    }
}
