use clap::{Parser, Subcommand};
use frv::config::{parse_grid, RunConfig};
use frv::suites::{run, write_outputs};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "frv", version, about = "Functional-relation verifier for twisted XXZ chains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured check suites and write reports to the output directory.
    Run {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Suite to run; may be repeated. Overrides the configured list.
        #[arg(long = "suite")]
        suites: Vec<String>,
        #[arg(long = "L")]
        l: Option<usize>,
        #[arg(long)]
        n_max: Option<usize>,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        /// Real grid of spectral points as a:b:count.
        #[arg(long)]
        grid: Option<String>,
        #[arg(long, default_value = "frv-out")]
        out: PathBuf,
    },
}

fn load(
    config: Option<PathBuf>,
    suites: Vec<String>,
    l: Option<usize>,
    n_max: Option<usize>,
    tol: Option<f64>,
    seed: Option<u64>,
    grid: Option<String>,
) -> frv::Result<RunConfig> {
    let mut cfg = match config {
        Some(path) => RunConfig::from_json(&std::fs::read_to_string(path)?)?,
        None => RunConfig::default(),
    };
    if !suites.is_empty() {
        cfg.suites = suites;
    }
    if let Some(v) = l {
        cfg.l = v;
    }
    if let Some(v) = n_max {
        cfg.n_max = v;
    }
    if let Some(v) = tol {
        cfg.tol = v;
    }
    if let Some(v) = seed {
        cfg.seed = v;
    }
    if let Some(g) = grid {
        cfg.grid = parse_grid(&g)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn main() -> ExitCode {
    let Command::Run { config, suites, l, n_max, tol, seed, grid, out } = Cli::parse().command;
    let cfg = match load(config, suites, l, n_max, tol, seed, grid) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("frv: {e}");
            return ExitCode::from(2);
        }
    };
    let result = run(&cfg).and_then(|o| write_outputs(&o, &out).map(|_| o));
    match result {
        Ok(o) => {
            let failed = o.records.iter().filter(|r| !r.report.passed()).count();
            println!("{} reports, {} failed, written to {}", o.records.len(), failed, out.display());
            if failed == 0 {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("frv: {e}");
            ExitCode::from(2)
        }
    }
}
