//! Command-line front-end: reads a run configuration, drives the solvers and
//! diagnostics, and writes trajectories, reports and a manifest.
//!
//! Exit codes: 0 all checks pass, 1 configuration or input error, 2
//! numerical abort, 3 at least one check failed.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use log::error;
use multicoag_core::io::write_json;

pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;

pub use commands::{LabeledReport, Method, Outcome};
pub use config::{parse_config, RunConfig};
pub use error::CliError;
use manifest::Manifest;

pub const EXIT_CHECK_FAILED: u8 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "multicoag",
    version,
    about = "Multi-component coagulation with source: solvers and diagnostics"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Run configuration (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Output directory; overrides `output` in the config.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Seed; overrides `seed` in the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Worker threads (0 lets the runtime decide).
    #[arg(long, global = true, env = "MULTICOAG_THREADS")]
    pub threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the configured solvers and checks.
    Simulate,
    /// Property suites for the weight constructions and the operator.
    Validate {
        /// Samples per weight suite.
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        /// Samples per operator suite.
        #[arg(long, default_value_t = 1000)]
        operator_samples: usize,
    },
    /// Compare two methods on the same problem.
    Compare {
        /// Two of grid, grid_half, ssa.
        #[arg(long, default_value = "grid,ssa")]
        solvers: String,
    },
    /// Moment bounds and time regularity along the trajectory.
    Moments,
    /// Direction statistics and the localisation trend.
    Localise,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Validate { .. } => "validate",
            Command::Compare { .. } => "compare",
            Command::Moments => "moments",
            Command::Localise => "localise",
        }
    }
}

const DEFAULT_SEED: u64 = 0x5eed;

fn parse_methods(s: &str) -> Result<(Method, Method), CliError> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 2 {
        return Err(CliError::Config(format!(
            "--solvers needs two methods, got '{s}'"
        )));
    }
    Ok((Method::parse(parts[0])?, Method::parse(parts[1])?))
}

fn execute(cli: &Cli) -> Result<Outcome, CliError> {
    let loaded = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
            let cfg = parse_config(&text)?;
            Some((path.clone(), text, cfg))
        }
        None => None,
    };
    let cfg = loaded.as_ref().map(|(_, _, c)| c);
    let seed = cli.seed.or(cfg.map(|c| c.seed)).unwrap_or(DEFAULT_SEED);
    let out_dir: Option<PathBuf> = cli
        .out
        .clone()
        .or_else(|| cfg.and_then(|c| c.output.clone()))
        .or_else(|| cfg.map(|_| PathBuf::from("out")));
    if let Some(dir) = &out_dir {
        std::fs::create_dir_all(dir)?;
    }
    let out = out_dir.as_deref();
    let need =
        || cfg.ok_or_else(|| CliError::Config(format!("{} needs --config", cli.command.name())));
    let mut outcome = match &cli.command {
        Command::Simulate => commands::simulate(need()?, seed, out)?,
        Command::Validate {
            samples,
            operator_samples,
        } => commands::validate(seed, *samples, *operator_samples)?,
        Command::Compare { solvers } => {
            commands::compare(need()?, seed, parse_methods(solvers)?, out)?
        }
        Command::Moments => commands::moments(need()?, seed, out)?,
        Command::Localise => commands::localise(need()?, seed, out)?,
    };
    if let Some(dir) = out {
        write_outputs(
            cli,
            dir,
            seed,
            loaded.as_ref().map(|(p, t, _)| (p.as_path(), t.as_str())),
            &mut outcome,
        )?;
    }
    Ok(outcome)
}

fn write_outputs(
    cli: &Cli,
    dir: &Path,
    seed: u64,
    config: Option<(&Path, &str)>,
    outcome: &mut Outcome,
) -> Result<(), CliError> {
    let report_path = dir.join("report.json");
    write_json(
        &outcome.reports,
        BufWriter::new(File::create(&report_path)?),
    )?;
    outcome.files.push(report_path);
    let mut manifest = Manifest::new(cli.command.name(), seed, cli.threads);
    if let Some((path, text)) = config {
        manifest = manifest.with_config(path, text);
    }
    manifest.arguments = match &cli.command {
        Command::Validate {
            samples,
            operator_samples,
        } => vec![
            format!("--samples {samples}"),
            format!("--operator-samples {operator_samples}"),
        ],
        Command::Compare { solvers } => vec![format!("--solvers {solvers}")],
        _ => Vec::new(),
    };
    manifest.add_files(&outcome.files)?;
    let path = dir.join("manifest.json");
    write_json(&manifest, BufWriter::new(File::create(&path)?))?;
    outcome.files.push(path);
    Ok(())
}

/// Runs the command and returns the process exit code.
pub fn run(cli: &Cli) -> u8 {
    let pool = match cli.threads {
        Some(n) => rayon::ThreadPoolBuilder::new().num_threads(n).build(),
        None => rayon::ThreadPoolBuilder::new().build(),
    };
    let pool = match pool {
        Ok(p) => p,
        Err(e) => {
            error!("cannot start worker pool: {e}");
            return 1;
        }
    };
    match pool.install(|| execute(cli)) {
        Ok(outcome) => {
            for r in &outcome.reports {
                println!("{:<16} {}", r.solver, r.report.summary_line());
            }
            if outcome.all_pass() {
                0
            } else {
                EXIT_CHECK_FAILED
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
