//! Command-line runner: binds a JSON config to a verification suite and
//! writes `reports.jsonl`, `summary.csv` and `metadata.json`.
//!
//! Exit codes: 0 all enforced checks pass, 1 a check failed, 2 bad
//! configuration or a computation refused to run.

mod commands;
mod config;
mod output;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::Parser;

use lclt_lab::exact::DEFAULT_BUDGET;
use lclt_lab::verifier::CVariant;

use commands::{Command, RunContext};
use config::{ConfigError, RunConfig};
use output::Metadata;

const THREADS_VAR: &str = "LCLT_LAB_THREADS";
const DEFAULT_OUT: &str = "lclt-out";

#[derive(Debug, Parser)]
#[command(name = "lclt-lab", version, about = "Run the lclt-lab verification suites")]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// JSON run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; overrides `output_dir` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed of every random choice; overrides `seed` in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Grid size of the `t` sweeps.
    #[arg(long)]
    t_points: Option<usize>,
    /// Exponent of the single-spin bound.
    #[arg(long, default_value = "proved", value_parser = parse_variant)]
    c_variant: CVariant,
    /// Enumeration budget in states.
    #[arg(long, default_value_t = DEFAULT_BUDGET)]
    budget: u128,
    /// Expert mode: replace the model's own δ in the characteristic-function checks.
    #[arg(long)]
    expert_delta: Option<f64>,
}

fn parse_variant(s: &str) -> Result<CVariant, String> {
    s.parse().map_err(|e: lclt_lab::Error| e.to_string())
}

fn configure_threads() -> Result<(), ConfigError> {
    let Ok(raw) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let n: usize = raw
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| ConfigError(format!("{THREADS_VAR} must be a positive integer, got `{raw}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| ConfigError(format!("cannot size the thread pool: {e}")))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(message) => {
            eprintln!("lclt-lab: {message}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<u8, String> {
    let started = Instant::now();
    let started_unix_s = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    configure_threads().map_err(|e| e.to_string())?;
    let config = match &cli.config {
        Some(path) => RunConfig::load(path).map_err(|e| e.to_string())?,
        None if cli.command.needs_model() => return Err("this command needs --config".into()),
        None => RunConfig::default(),
    };
    if cli.budget == 0 {
        return Err("--budget must be positive".into());
    }
    if let Some(d) = cli.expert_delta {
        if !(d > 0.0 && d < std::f64::consts::PI) {
            return Err(format!("--expert-delta must lie in (0, π), got {d}"));
        }
    }
    let out_dir = cli
        .out
        .clone()
        .or_else(|| config.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    let seed = cli.seed.or(config.seed).unwrap_or(0);
    let overrides = config.tolerance_overrides.clone();
    let ctx = RunContext {
        config,
        seed,
        t_points: cli.t_points,
        variant: cli.c_variant,
        budget: cli.budget,
        expert_delta: cli.expert_delta,
    };
    let outcome = commands::run(cli.command, &ctx).map_err(|e| e.to_string())?;
    let mut reports = outcome.reports;
    output::apply_overrides(&mut reports, &overrides);
    output::sort_reports(&mut reports);
    let enforced_failures = reports.iter().filter(|r| !r.pass && r.enforced()).count();
    let mut runtime_ms = BTreeMap::new();
    for r in &reports {
        let slot = runtime_ms.entry(r.check_name.clone()).or_insert(0);
        *slot = r.runtime_ms.max(*slot);
    }
    let metadata = Metadata {
        command: clap::ValueEnum::to_possible_value(&cli.command)
            .expect("every command has a name")
            .get_name()
            .to_string(),
        version: env!("CARGO_PKG_VERSION"),
        seed,
        threads: rayon::current_num_threads(),
        started_unix_s,
        elapsed_ms: started.elapsed().as_millis() as u64,
        runtime_ms,
        reports: reports.len(),
        enforced_failures,
    };
    output::write_reports(&out_dir, &reports, &metadata)
        .map_err(|e| format!("cannot write to {}: {e}", out_dir.display()))?;
    print!("{}", outcome.stdout);
    for r in reports.iter().filter(|r| !r.pass && r.enforced()) {
        println!("FAIL {} lhs={:e} rhs={:e}", r.check_name, r.lhs, r.rhs);
    }
    println!("wrote {} reports to {}", reports.len(), out_dir.display());
    Ok(if enforced_failures == 0 { 0 } else { 1 })
}
