use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use log::{error, info, warn};
use rayon::prelude::*;

use nomadic_core::scenario::{ScenarioError, Scenario};
use nomadic_core::time::SimTime;
use nomadic_core::{emit_metrics, parse_scenario, run_with, validate_scenario, RunOptions};

#[derive(Parser, Debug)]
#[command(name = "nomadic", version, about = "Run nomadic 5G core scenarios")]
struct Cli {
    /// Log filter, e.g. `info` or `nomadic_core=debug`.
    #[arg(long, global = true, default_value = "warn")]
    log_level: String,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one scenario and write its metrics.
    Run {
        scenario: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Metrics output; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Stop after this many simulated seconds.
        #[arg(long, allow_hyphen_values = true)]
        until: Option<f64>,
    },
    /// Parse and lint a scenario without running it.
    Validate { scenario: PathBuf },
    /// Run every `*.json` scenario in a directory.
    Batch {
        dir: PathBuf,
        #[arg(long)]
        jobs: Option<usize>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum Status {
    Ok = 0,
    Invalid = 1,
    Violation = 2,
}

fn load(path: &Path) -> Result<Scenario, Status> {
    parse_scenario(path).map_err(|e| {
        match e {
            ScenarioError::Io { .. } => error!("{e}"),
            _ => error!("{}: {e}", path.display()),
        }
        Status::Invalid
    })
}

fn until_time(secs: f64) -> Result<SimTime> {
    if !secs.is_finite() || secs < 0.0 {
        bail!("--until must be a non-negative number of seconds");
    }
    Ok(SimTime::from_micros((secs * 1e6).round() as u64))
}

fn run_one(path: &Path, opts: &RunOptions, out: Option<&Path>) -> Result<Status> {
    let scenario = match load(path) {
        Ok(s) => s,
        Err(st) => return Ok(st),
    };
    for w in validate_scenario(&scenario) {
        warn!("{}: {}", path.display(), serde_json::to_string(&w).unwrap_or_default());
    }
    let output = match run_with(&scenario, opts) {
        Ok(o) => o,
        Err(e) => {
            error!("{}: {e}", path.display());
            return Ok(Status::Invalid);
        }
    };
    match out {
        Some(p) => emit_metrics(&output.report, p).with_context(|| format!("writing {}", p.display()))?,
        None => {
            let mut stdout = io::stdout().lock();
            match output.report.write_to(&mut stdout).and_then(|_| stdout.flush()) {
                Err(e) if e.kind() == io::ErrorKind::BrokenPipe => {}
                r => r?,
            }
        }
    }
    let c = output.report.counters();
    info!(
        "{}: {} events, {}/{} packets delivered, {} violations",
        scenario.name,
        c.events_processed,
        c.packets_delivered,
        c.packets_sent,
        output.violations.len()
    );
    if output.violations.is_empty() {
        Ok(Status::Ok)
    } else {
        for v in &output.violations {
            error!("{}: {} violated: {}", path.display(), v.check, v.detail);
        }
        Ok(Status::Violation)
    }
}

fn validate(path: &Path) -> Status {
    let scenario = match load(path) {
        Ok(s) => s,
        Err(st) => return st,
    };
    let warnings = validate_scenario(&scenario);
    for w in &warnings {
        println!("{}", serde_json::to_string(w).unwrap_or_default());
    }
    eprintln!("{}: ok, {} warning(s)", path.display(), warnings.len());
    Status::Ok
}

fn batch(dir: &Path, jobs: Option<usize>) -> Result<Status> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    if files.is_empty() {
        warn!("no scenarios in {}", dir.display());
    }
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = jobs {
        pool = pool.num_threads(n.max(1));
    }
    let pool = pool.build()?;
    let results: Vec<(PathBuf, Result<Status>)> = pool.install(|| {
        files
            .par_iter()
            .map(|p| {
                let out = p.with_extension("metrics.ndjson");
                (p.clone(), run_one(p, &RunOptions::default(), Some(&out)))
            })
            .collect()
    });
    let mut worst = Status::Ok;
    for (p, r) in results {
        let st = r.with_context(|| p.display().to_string())?;
        println!("{:<9} {}", format!("{st:?}").to_lowercase(), p.display());
        worst = worst.max(st);
    }
    Ok(worst)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    env_logger::Builder::new().parse_filters(&cli.log_level).format_timestamp(None).init();

    let result = match &cli.command {
        Command::Run { scenario, seed, out, until } => until
            .map(until_time)
            .transpose()
            .and_then(|until| run_one(scenario, &RunOptions { seed: *seed, until }, out.as_deref())),
        Command::Validate { scenario } => Ok(validate(scenario)),
        Command::Batch { dir, jobs } => batch(dir, *jobs),
    };
    match result {
        Ok(st) => ExitCode::from(st as u8),
        Err(e) => {
            error!("{e:#}");
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
