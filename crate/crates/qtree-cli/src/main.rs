//! `qtree` command-line runner.

mod commands;
mod config;
mod selftest;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::{Progress, Report, RunError};
use config::{Command, ConfigError, RunConfig};
use selftest::Fault;

const EXIT_FAILURE: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_BUDGET: u8 = 3;
const EXIT_SELFTEST: u8 = 4;

/// Environment variable holding the default worker count.
const THREADS_ENV: &str = "QTREE_THREADS";

#[derive(Parser)]
#[command(name = "qtree", version, about = "Monitored quantum tree simulator")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// U(1) pool method at finite d: purification and/or sharpening.
    U1Pool(Opts),
    /// Infinite-d sharpening pool and percolation values.
    U1Classical(Opts),
    /// Velocity curves, the SU(2) contour or its scaling constants.
    KppVelocity(Opts),
    /// Analytic critical points of the d = 1 and d = ∞ trees.
    KppCritical(Opts),
    /// Exact SU(2) ensemble: depth series at one point or an angle grid.
    Su2Enum(Opts),
    /// Replica-weighted order parameter r_n and its asymmetry map.
    Su2Replica(Opts),
    /// Pool under forced measurement outcomes.
    Su2Forced(Opts),
    /// Fast invariant checks.
    Selftest(Opts),
}

/// Flags mirror the config-file keys and override them.
#[derive(Args, Default)]
struct Opts {
    /// Plain-text `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Suppress progress lines on stderr.
    #[arg(long)]
    quiet: bool,
    /// Damage the coefficient table (selftest fixture).
    #[arg(long, hide = true)]
    inject_fault: Option<String>,
    #[arg(long)]
    d: Option<String>,
    /// purification, sharpening or both.
    #[arg(long)]
    protocol: Option<String>,
    /// Single measurement probability; overrides the p scan.
    #[arg(long)]
    p: Option<String>,
    #[arg(long)]
    p_min: Option<String>,
    #[arg(long)]
    p_max: Option<String>,
    #[arg(long)]
    p_step: Option<String>,
    #[arg(long)]
    theta1: Option<String>,
    #[arg(long)]
    theta2: Option<String>,
    /// Points per angle axis.
    #[arg(long)]
    grid: Option<String>,
    /// Replica number.
    #[arg(long)]
    n: Option<String>,
    #[arg(long)]
    pool_size: Option<String>,
    #[arg(long)]
    k_max: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// Maximum raw children per SU(2) generation.
    #[arg(long)]
    budget: Option<String>,
    /// u1-d1, u1-dinf or su2.
    #[arg(long)]
    family: Option<String>,
    /// velocity, contour or scaling.
    #[arg(long)]
    curve: Option<String>,
    #[arg(long)]
    lambda_min: Option<String>,
    #[arg(long)]
    lambda_max: Option<String>,
    #[arg(long)]
    lambda_step: Option<String>,
    /// CSV destination; stdout when unset.
    #[arg(long, short)]
    output: Option<String>,
    /// Path for the Δr table of su2-replica.
    #[arg(long)]
    asymmetry_output: Option<String>,
    /// Worker threads; defaults to $QTREE_THREADS, then all cores.
    #[arg(long)]
    threads: Option<String>,
}

impl Opts {
    fn pairs(&self) -> Vec<(String, String)> {
        let fields = [
            ("d", &self.d),
            ("protocol", &self.protocol),
            ("p", &self.p),
            ("p_min", &self.p_min),
            ("p_max", &self.p_max),
            ("p_step", &self.p_step),
            ("theta1", &self.theta1),
            ("theta2", &self.theta2),
            ("grid", &self.grid),
            ("n", &self.n),
            ("pool_size", &self.pool_size),
            ("k_max", &self.k_max),
            ("seed", &self.seed),
            ("budget", &self.budget),
            ("family", &self.family),
            ("curve", &self.curve),
            ("lambda_min", &self.lambda_min),
            ("lambda_max", &self.lambda_max),
            ("lambda_step", &self.lambda_step),
            ("output", &self.output),
            ("asymmetry_output", &self.asymmetry_output),
            ("threads", &self.threads),
        ];
        fields.into_iter().filter_map(|(k, v)| v.as_ref().map(|v| (k.to_string(), v.clone()))).collect()
    }
}

fn split(sub: Sub) -> (Command, Opts) {
    match sub {
        Sub::U1Pool(o) => (Command::U1Pool, o),
        Sub::U1Classical(o) => (Command::U1Classical, o),
        Sub::KppVelocity(o) => (Command::KppVelocity, o),
        Sub::KppCritical(o) => (Command::KppCritical, o),
        Sub::Su2Enum(o) => (Command::Su2Enum, o),
        Sub::Su2Replica(o) => (Command::Su2Replica, o),
        Sub::Su2Forced(o) => (Command::Su2Forced, o),
        Sub::Selftest(o) => (Command::Selftest, o),
    }
}

fn threads(cfg: &RunConfig) -> Result<Option<usize>, ConfigError> {
    if let Some(t) = cfg.opt_usize("threads")? {
        return Ok(Some(t));
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(t) if t > 0 => Ok(Some(t)),
            _ => Err(ConfigError::Invalid { key: THREADS_ENV.into(), msg: format!("'{v}' is not a positive integer") }),
        },
        Err(_) => Ok(None),
    }
}

fn write_table(path: Option<&str>, table: &qtree::output::Table) -> Result<(), String> {
    match path {
        Some(p) => {
            let file = File::create(p).map_err(|e| format!("cannot create {p}: {e}"))?;
            let mut w = BufWriter::new(file);
            table.write_to(&mut w).map_err(|e| e.to_string())?;
            w.flush().map_err(|e| format!("cannot write {p}: {e}"))
        }
        None => table.write_to(std::io::stdout().lock()).map_err(|e| e.to_string()),
    }
}

fn emit(cfg: &RunConfig, report: &Report) -> Result<(), String> {
    let output = cfg.raw("output");
    if let Some(t) = &report.table {
        write_table(output, t)?;
    }
    for (path, t) in &report.extra {
        write_table(Some(path), t)?;
    }
    // Results go to stdout unless stdout already carries the CSV.
    for line in &report.lines {
        if report.table.is_some() && output.is_none() {
            eprintln!("{line}");
        } else {
            println!("{line}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, opts) = split(cli.command);
    let fault = match opts.inject_fault.as_deref() {
        None => Fault::None,
        Some("corrupt-table") => Fault::CorruptTable,
        Some(other) => {
            eprintln!("error: unknown fault '{other}'");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let file = match opts.config.as_deref().map(config::read_config_file).transpose() {
        Ok(f) => f.unwrap_or_default(),
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let cfg = match RunConfig::resolve(command, &file, &opts.pairs()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    match threads(&cfg) {
        Ok(Some(t)) => qtree::par::init_workers(t),
        Ok(None) => {}
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    }
    let progress = Progress::new(opts.quiet);
    let report = match commands::run(&cfg, fault, &progress) {
        Ok(r) => r,
        Err(RunError::Config(e)) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
        Err(RunError::Sim(e @ qtree::Error::BudgetExceeded { .. })) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_BUDGET);
        }
        Err(RunError::Sim(e @ qtree::Error::InvalidArgument(_))) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
        Err(RunError::Sim(e)) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_FAILURE);
        }
    };
    if let Err(e) = emit(&cfg, &report) {
        eprintln!("error: {e}");
        return ExitCode::from(EXIT_FAILURE);
    }
    if report.checks_failed > 0 {
        eprintln!("selftest: {} check(s) failed", report.checks_failed);
        return ExitCode::from(EXIT_SELFTEST);
    }
    match &report.failure {
        Some(e @ qtree::Error::BudgetExceeded { .. }) => {
            eprintln!("error: {e}; partial results written");
            ExitCode::from(EXIT_BUDGET)
        }
        Some(e) => {
            eprintln!("error: {e}; partial results written");
            ExitCode::from(EXIT_FAILURE)
        }
        None => ExitCode::SUCCESS,
    }
}
