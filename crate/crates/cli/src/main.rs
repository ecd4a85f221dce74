use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use snse_cli::{parse_config, run, Command};

/// Controlled stochastic Navier-Stokes experiments on the periodic square.
#[derive(Parser, Debug)]
#[command(name = "snse", version, about)]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// Run configuration (`key = value` lines).
    #[arg(long)]
    config: PathBuf,
    /// Output directory for CSV files.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Overrides `mc.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `mc.paths`.
    #[arg(long)]
    paths: Option<usize>,
    /// Worker threads for path-parallel loops (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let spec = match parse_config(&cli.config).and_then(|s| s.with_overrides(cli.seed, cli.paths)) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {}: {e}", cli.config.display());
            return ExitCode::from(2);
        }
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        pool = pool.num_threads(n);
    }
    let pool = match pool.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(2);
        }
    };
    let outcome = match pool.install(|| run(cli.command, &spec, &cli.out)) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    for line in &outcome.summary {
        println!("{line}");
    }
    for c in &outcome.checks {
        println!("{} {}: {}", if c.passed { "ok  " } else { "FAIL" }, c.name, c.detail);
    }
    for f in &outcome.files {
        println!("wrote {}", f.display());
    }
    if outcome.passed() {
        ExitCode::SUCCESS
    } else {
        eprintln!("error: {} check(s) failed", outcome.checks.iter().filter(|c| !c.passed).count());
        ExitCode::from(1)
    }
}
