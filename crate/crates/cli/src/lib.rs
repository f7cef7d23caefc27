//! Batch drivers for the water-wave boundary integral solver.

pub mod commands;
pub mod config;
pub mod expr;
pub mod output;

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use config::{has_errors, Problem, RunConfig, Settings};
use output::{Manifest, OutputDir};

#[derive(Debug, Parser)]
#[command(name = "wwbie", version, about = "Finite-depth water waves with complex-scaled boundary integrals")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Wall-driven strip with a known modal solution.
    Wavemaker(RunArgs),
    /// Scattering of the propagating mode by obstacles and topography.
    Scatter(RunArgs),
    /// Complex resonances of the Robin parameter.
    Resonances(RunArgs),
    /// Truncation (`--sweep M`) or mesh (`--sweep h`) convergence tables.
    Convergence(RunArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// JSON settings file (or a previous run manifest); flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Validate and print the resolved settings without running.
    #[arg(long)]
    pub dry_run: bool,
    #[command(flatten)]
    pub settings: Settings,
}

/// Process exit status per failure class.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(i32)]
pub enum Exit {
    Success = 0,
    Usage = 2,
    Numerical = 3,
    Io = 4,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Solver(#[from] wwbie::Error),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    pub fn exit(&self) -> Exit {
        match self {
            CliError::Config(_) => Exit::Usage,
            CliError::Io { .. } => Exit::Io,
            CliError::Solver(wwbie::Error::Config { .. }) => Exit::Usage,
            CliError::Solver(wwbie::Error::Io { .. }) => Exit::Io,
            CliError::Solver(_) => Exit::Numerical,
        }
    }
}

fn problem_of(cmd: &Command) -> (Problem, &RunArgs, &'static str) {
    match cmd {
        Command::Wavemaker(a) => (Problem::Wavemaker, a, "wavemaker"),
        Command::Scatter(a) => (Problem::Scatter, a, "scatter"),
        Command::Resonances(a) => (Problem::Resonances, a, "resonances"),
        Command::Convergence(a) => (Problem::Convergence, a, "convergence"),
    }
}

/// Parses `argv`, runs the job and returns the exit status.
pub fn main_with<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { Exit::Usage as i32 } else { Exit::Success as i32 };
        }
    };
    let args: Vec<String> = argv.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    match run(&cli, &args) {
        Ok(()) => Exit::Success as i32,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit() as i32
        }
    }
}

pub fn run(cli: &Cli, argv: &[String]) -> Result<(), CliError> {
    let start = Instant::now();
    let (problem, args, name) = problem_of(&cli.command);
    let file = args.config.as_deref().map(Settings::load).transpose().map_err(CliError::Config)?;
    let cfg = RunConfig::new(problem, args.settings.clone(), file);
    let diagnostics = cfg.validate();
    for d in &diagnostics {
        eprintln!("{d}");
    }
    if has_errors(&diagnostics) {
        return Err(CliError::Config("configuration rejected".into()));
    }
    let resolved = cfg
        .nus()
        .iter()
        .map(|&nu| cfg.resolve(nu))
        .collect::<Result<Vec<_>, _>>()
        .map_err(CliError::Config)?;
    if args.dry_run {
        let text = serde_json::to_string_pretty(&serde_json::json!({
            "command": name,
            "settings": cfg.settings,
            "resolved": resolved,
        }))
        .expect("settings serialize");
        println!("{text}");
        return Ok(());
    }
    let mut out = OutputDir::create(cfg.output_dir())?;
    let results = match problem {
        Problem::Wavemaker => commands::wavemaker(&cfg, &resolved[0], &mut out)?,
        Problem::Scatter => commands::scatter(&cfg, &resolved[0], &mut out)?,
        Problem::Resonances => commands::resonances(&cfg, &resolved[0], &mut out)?,
        Problem::Convergence => commands::convergence(&cfg, &resolved, &mut out)?,
    };
    let mut outputs = out.written().to_vec();
    outputs.push("manifest.json".into());
    let manifest = Manifest {
        tool: "wwbie",
        version: env!("CARGO_PKG_VERSION"),
        command: name,
        argv,
        settings: &cfg.settings,
        resolved: &resolved,
        diagnostics: &diagnostics,
        results,
        outputs,
        wall_time_s: start.elapsed().as_secs_f64(),
        threads: std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    out.json("manifest.json", &manifest)?;
    eprintln!("wrote {} files to {}", manifest.outputs.len(), out.root().display());
    Ok(())
}
