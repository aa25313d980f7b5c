use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use wedgelab::harness::{catalog, run, ExperimentConfig};

/// Runs named verification checks on truncated twisted-wedge models.
#[derive(Parser, Debug)]
#[command(name = "wedgelab", version)]
struct Cli {
    /// TOML experiment config.
    #[arg(long, value_name = "PATH", required_unless_present = "list")]
    config: Option<PathBuf>,
    /// Directory for report.json and per-check CSV files.
    #[arg(long, value_name = "DIR", default_value = "wedgelab-out")]
    out: PathBuf,
    /// Overrides the seed from the config (default 0).
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; 0 picks the number of cores.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    /// Restrict the run to these checks (repeatable).
    #[arg(long = "check", value_name = "NAME")]
    checks: Vec<String>,
    /// Print the check catalog and exit.
    #[arg(long)]
    list: bool,
}

fn config_error(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("wedgelab: {msg}");
    ExitCode::from(2)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    if cli.list {
        for line in catalog() {
            println!("{line}");
        }
        return ExitCode::SUCCESS;
    }
    let path = cli.config.expect("clap enforces --config");
    let text = match std::fs::read_to_string(&path) {
        Ok(t) => t,
        Err(e) => return config_error(format!("{}: {e}", path.display())),
    };
    let mut cfg = match ExperimentConfig::from_toml(&text) {
        Ok(c) => c,
        Err(e) => return config_error(e),
    };
    if !cli.checks.is_empty() {
        cfg.checks = cli.checks;
        if let Err(e) = cfg.validate() {
            return config_error(e);
        }
    }
    let seed = cli.seed.or(cfg.seed).unwrap_or(0);
    let report = match run(&cfg, seed, cli.jobs) {
        Ok(r) => r,
        Err(e) => return config_error(e),
    };
    if let Err(e) = report.write(&cli.out) {
        eprintln!("wedgelab: cannot write reports: {e}");
        return ExitCode::from(1);
    }
    for c in &report.checks {
        let status = match (c.ok, c.negative_control) {
            (true, false) => "PASS",
            (true, true) => "PASS (failed as required)",
            (false, false) => "FAIL",
            (false, true) => "FAIL (negative control passed)",
        };
        match &c.error {
            Some(e) => println!("{:<26} {status}  error: {e}", c.check),
            None => println!("{:<26} {status}  max_deviation={:.3e}", c.check, c.max_deviation),
        }
    }
    println!("report: {}", cli.out.join("report.json").display());
    ExitCode::from(report.exit_code() as u8)
}
