//! Command-line surface of `monge`.

use std::fs;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::{parse_epsilons, ExperimentConfig, MeasureFiles, Overrides, Suite};
use crate::error::{io_err, Error, Result};
use crate::fixtures;
use crate::formats::MeasureFile;
use crate::runner::{self, RunSummary};

#[derive(Debug, Parser)]
#[command(name = "monge", version, about = "Distance-cost transport with second-order selection")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the suites listed in the configuration.
    Run(Common),
    /// Epsilon ladder, two-stage oracle and certificate.
    Select {
        #[command(flatten)]
        common: Common,
        /// Also print each certificate to stdout.
        #[arg(long)]
        oracle: bool,
    },
    /// Entropy readings and convexity checks along interpolations.
    Entropy(Common),
    /// Support diagnostics and Lebesgue-ratio curves.
    Diagnose(Common),
    /// List the built-in instances, or write one as measure files.
    Fixtures(Common),
}

#[derive(Debug, Clone, Default, Args)]
pub struct Common {
    /// JSON configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Single seed replacing the configured list.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub workers: Option<usize>,
    /// `start:end:geometric[:per_decade]` or a comma list.
    #[arg(long)]
    pub epsilons: Option<String>,
    /// Cells per axis for grid measures.
    #[arg(long)]
    pub grid: Option<usize>,
    /// Single dimension replacing the configured list.
    #[arg(long)]
    pub dim: Option<usize>,
    /// Built-in fixture name.
    #[arg(long)]
    pub fixture: Option<String>,
    /// Source measure file; needs `--tgt`.
    #[arg(long, requires = "tgt")]
    pub src: Option<PathBuf>,
    /// Target measure file; needs `--src`.
    #[arg(long, requires = "src")]
    pub tgt: Option<PathBuf>,
}

impl Common {
    pub fn overrides(&self, suites: Option<Vec<Suite>>) -> Result<Overrides> {
        let epsilons = self.epsilons.as_deref().map(parse_epsilons).transpose()?;
        let files = match (&self.src, &self.tgt) {
            (Some(s), Some(t)) => Some(MeasureFiles { source: s.clone(), target: t.clone() }),
            _ => None,
        };
        Ok(Overrides {
            out: self.out.clone(),
            seed: self.seed,
            workers: self.workers,
            epsilons,
            grid: self.grid,
            dim: self.dim,
            fixture: self.fixture.clone(),
            files,
            suites,
        })
    }

    pub fn resolve(&self, suites: Option<Vec<Suite>>) -> Result<ExperimentConfig> {
        ExperimentConfig::resolve(self.config.as_deref(), &self.overrides(suites)?)
    }
}

fn report(summary: &RunSummary) {
    for c in &summary.cells {
        let status = match (&c.error, &c.skipped, c.passed) {
            (Some(_), _, _) => "ERROR",
            (None, Some(_), _) => "SKIP",
            (None, None, true) => "PASS",
            (None, None, false) => "FAIL",
        };
        println!("{status} {} {} d={} seed={}", c.suite.name(), c.fixture, c.dim, c.seed);
        if let Some(e) = &c.error {
            println!("  error: {e}");
        }
        for check in c.checks.iter().filter(|k| !k.passed) {
            println!("  failed {}: {} vs {}", check.name, check.value, check.limit);
        }
    }
    println!("config_hash={} passed={}", summary.config_hash, summary.passed);
}

fn run_suites(common: &Common, suites: Option<Vec<Suite>>) -> Result<RunSummary> {
    let cfg = common.resolve(suites)?;
    let summary = runner::run(&cfg)?;
    report(&summary);
    Ok(summary)
}

fn fixtures_command(common: &Common) -> Result<i32> {
    let Some(name) = &common.fixture else {
        for f in fixtures::catalog() {
            println!("{:<14} {}", f.name, f.description);
        }
        return Ok(0);
    };
    let cfg = common.resolve(None)?;
    let dim = cfg.dims[0];
    let seed = cfg.seeds[0];
    let inst = fixtures::build(&cfg, name, dim, seed)?;
    let dir = cfg.output_dir.as_path();
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let spec = cfg.covariance.build()?;
    for (part, m) in [("source", &inst.source), ("target", &inst.target)] {
        let path = dir.join(format!("{}_d{}_s{seed}_{part}.json", inst.name, inst.dim));
        MeasureFile::from_measure(m, Some(&spec), Some(seed)).write(&path)?;
        println!("{}", path.display());
    }
    Ok(0)
}

fn print_certificates(dir: &std::path::Path, summary: &RunSummary) -> Result<()> {
    for c in &summary.cells {
        for f in c.files.iter().filter(|f| f.ends_with(".json")) {
            let path = dir.join(f);
            let text = fs::read_to_string(&path).map_err(io_err(&path))?;
            let v: serde_json::Value = serde_json::from_str(&text)
                .map_err(|e| Error::Format { path: path.clone(), message: e.to_string() })?;
            println!("{}", v["payload"]["certificate"]);
        }
    }
    Ok(())
}

/// Runs a parsed command; returns the process exit status.
pub fn execute(cli: &Cli) -> Result<i32> {
    let summary = match &cli.command {
        Command::Run(c) => run_suites(c, None)?,
        Command::Select { common, oracle } => {
            let s = run_suites(common, Some(vec![Suite::Selection]))?;
            if *oracle {
                let cfg = common.resolve(Some(vec![Suite::Selection]))?;
                print_certificates(&cfg.output_dir, &s)?;
            }
            s
        }
        Command::Entropy(c) => run_suites(c, Some(vec![Suite::Entropy]))?,
        Command::Diagnose(c) => run_suites(c, Some(vec![Suite::Diagnostics, Suite::Ratio]))?,
        Command::Fixtures(c) => return fixtures_command(c),
    };
    Ok(summary.exit_code())
}

/// Exit status for errors that stop a run before any suite assertion.
pub const EXIT_ERROR: i32 = 2;
