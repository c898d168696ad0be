//! Batch driver: replay recorded logs, simulate persona groups, and compare
//! the two recommenders side by side.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use groupdine_core::config::{Config, ConfigError};
use groupdine_core::eventlog::{encode_line, parse_log, LogError};
use groupdine_core::registry::{RegistryError, Strategies};
use groupdine_core::report::{CompareReport, Format, ReplayReport};
use groupdine_core::session::Session;
use groupdine_core::simulate::{simulate, PersonaFile, SimulateError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Registry(#[from] RegistryError),
    #[error("{path}: {source}")]
    Log { path: PathBuf, source: LogError },
    #[error("{path}: line {line}: {message}")]
    Replay {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error(transparent)]
    Simulate(#[from] SimulateError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

#[derive(Debug, Parser)]
#[command(name = "groupdine", about = "Replay, simulate and compare group dining sessions")]
pub struct Cli {
    /// TOML config file; defaults apply when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Directory to write outputs into instead of standard output.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// `text` or `machine` (key-sorted JSON).
    #[arg(long, global = true, default_value = "text")]
    pub format: Format,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fold a recorded event log and report the final state.
    Replay { log: PathBuf },
    /// Generate a session from persona definitions and report on it.
    Simulate {
        #[arg(long)]
        personas: PathBuf,
        /// Session length in seconds.
        #[arg(long)]
        duration: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Side-by-side table of both recommenders at every recomputation.
    Compare { log: PathBuf },
}

pub fn load_config(path: Option<&Path>) -> Result<Config, CliError> {
    let config = match path {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    config.validate()?;
    Ok(config)
}

/// Folds log text; errors name the offending line.
pub fn replay_text(text: &str, path: &Path, config: &Config) -> Result<Session, CliError> {
    let events = parse_log(text).map_err(|source| CliError::Log {
        path: path.to_path_buf(),
        source,
    })?;
    let strategies = Strategies::from_config(config)?;
    Session::replay(config.clone(), strategies, events).map_err(|e| CliError::Replay {
        path: path.to_path_buf(),
        line: e.index + 1,
        message: e.error.to_string(),
    })
}

pub fn replay_file(path: &Path, config: &Config) -> Result<Session, CliError> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    replay_text(&text, path, config)
}

/// One file the command produced.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Output {
    pub name: String,
    pub contents: String,
}

fn ext(format: Format) -> &'static str {
    match format {
        Format::Text => "txt",
        Format::Machine => "json",
    }
}

/// Runs a parsed command and returns its outputs; the first is the report.
pub fn execute(cli: &Cli) -> Result<Vec<Output>, CliError> {
    let config = load_config(cli.config.as_deref())?;
    let ext = ext(cli.format);
    Ok(match &cli.command {
        Command::Replay { log } => {
            let s = replay_file(log, &config)?;
            vec![Output {
                name: format!("replay.{ext}"),
                contents: ReplayReport::from_session(&s).render(cli.format),
            }]
        }
        Command::Compare { log } => {
            let s = replay_file(log, &config)?;
            vec![Output {
                name: format!("compare.{ext}"),
                contents: CompareReport::from_trace(s.trace()).render(cli.format),
            }]
        }
        Command::Simulate {
            personas,
            duration,
            seed,
        } => {
            let text = fs::read_to_string(personas).map_err(|source| CliError::Io {
                path: personas.clone(),
                source,
            })?;
            let file = PersonaFile::parse(&text)?;
            let s = simulate(&file, &config, *duration, *seed)?;
            vec![
                Output {
                    name: format!("simulate.{ext}"),
                    contents: ReplayReport::from_session(&s).render(cli.format),
                },
                Output {
                    name: "simulate.log".into(),
                    contents: s.events().iter().map(|e| encode_line(e) + "\n").collect(),
                },
            ]
        }
    })
}

/// Writes every output under `--out`, or prints the report to stdout.
pub fn run(cli: &Cli, stdout: &mut impl std::io::Write) -> Result<(), CliError> {
    let outputs = execute(cli)?;
    match &cli.out {
        Some(dir) => {
            let io = |path: &Path| {
                let path = path.to_path_buf();
                move |source| CliError::Io { path, source }
            };
            fs::create_dir_all(dir).map_err(io(dir))?;
            for o in &outputs {
                let path = dir.join(&o.name);
                fs::write(&path, &o.contents).map_err(io(&path))?;
            }
        }
        None => {
            let report = &outputs[0].contents;
            stdout.write_all(report.as_bytes()).map_err(|source| CliError::Io {
                path: "<stdout>".into(),
                source,
            })?;
        }
    }
    Ok(())
}
