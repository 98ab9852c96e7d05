//! Command line parsing and dispatch.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::commands::{self, Report};
use crate::config::{load_config, RunConfig};
use crate::error::CliError;
use crate::exec::RayonExecutor;
use crate::output;

/// Exit code for a completed run with no violations.
pub const EXIT_OK: i32 = 0;
/// Exit code when a run completed but an invariant or check failed.
pub const EXIT_FAILED: i32 = 1;
/// Exit code for configuration, I/O or trajectory errors.
pub const EXIT_ERROR: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "cavity-cool", version, about = "Cavity cooling of two indistinguishable particles")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the cooling protocol and write time series and distributions.
    Cool {
        #[command(flatten)]
        common: Common,
        /// Also write the raw states of trajectory I to trajectory_I.txt.
        #[arg(long, value_name = "I")]
        dump_trajectory: Option<usize>,
    },
    /// Scan the detuning of one stage around its predicted resonance.
    Scan {
        #[command(flatten)]
        common: Common,
    },
    /// Ground population of the dark state in ring and linear cavities.
    Darkstate {
        #[command(flatten)]
        common: Common,
    },
    /// Compare trajectory averages with the density-matrix solution.
    OracleCheck {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Debug, Args)]
pub struct Common {
    /// Configuration file (TOML).
    #[arg(long, value_name = "PATH")]
    pub config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    /// Override the number of trajectories.
    #[arg(long, value_name = "N")]
    pub trajectories: Option<usize>,
    /// Override the base seed.
    #[arg(long, value_name = "S")]
    pub seed: Option<u64>,
    /// Worker threads; 0 uses all cores. Results do not depend on it.
    #[arg(long, value_name = "T", default_value_t = 0)]
    pub threads: usize,
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Cool { common, .. }
            | Command::Scan { common }
            | Command::Darkstate { common }
            | Command::OracleCheck { common } => common,
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Command::Cool { .. } => "cool",
            Command::Scan { .. } => "scan",
            Command::Darkstate { .. } => "darkstate",
            Command::OracleCheck { .. } => "oracle-check",
        }
    }
}

/// Loads the config and applies command line overrides.
pub fn prepare_config(common: &Common) -> Result<RunConfig, CliError> {
    let mut cfg = load_config(&common.config)?;
    if let Some(n) = common.trajectories {
        cfg.ensemble.trajectories = n;
        if let Some(scan) = &mut cfg.scan {
            scan.trajectories = n;
        }
    }
    if let Some(s) = common.seed {
        cfg.ensemble.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn execute(command: &Command) -> Result<Report, CliError> {
    let common = command.common();
    let cfg = prepare_config(common)?;
    let exec = RayonExecutor::new(common.threads);
    let out = &common.out;
    match command {
        Command::Cool { dump_trajectory, .. } => commands::cool(&cfg, out, &exec, *dump_trajectory),
        Command::Scan { .. } => commands::scan(&cfg, out, &exec),
        Command::Darkstate { .. } => commands::darkstate(&cfg, out, &exec),
        Command::OracleCheck { .. } => commands::oracle_check(&cfg, out, &exec),
    }
}

fn write_report(out: &Path, body: &serde_json::Value) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(body).expect("report serializes");
    text.push('\n');
    output::write_file(&out.join("report.json"), &text)
}

/// Runs the tool and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let out = cli.command.common().out.clone();
    match execute(&cli.command) {
        Ok(report) => {
            if let Err(e) = write_report(&out, &report.body) {
                eprintln!("{e}");
                return EXIT_ERROR;
            }
            if report.passed {
                EXIT_OK
            } else {
                eprintln!("{}", serde_json::to_string(&report.body["violations"]).expect("json"));
                EXIT_FAILED
            }
        }
        Err(e) => {
            let body = json!({
                "command": cli.command.name(),
                "status": "error",
                "kind": e.kind(),
                "message": e.to_string(),
            });
            if std::fs::create_dir_all(&out).is_ok() {
                let _ = write_report(&out, &body);
            }
            eprintln!("{}", serde_json::to_string(&body).expect("json"));
            EXIT_ERROR
        }
    }
}
