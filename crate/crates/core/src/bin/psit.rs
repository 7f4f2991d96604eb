use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use psit_core::config::{load_config, Mode};
use psit_core::scenario::{run_finance, run_simulate};
use psit_core::verify::{run_verify, Faults, VerifyOptions};
use psit_core::Error;

/// Run a scenario: simulate the market, evaluate log-optimal strategies, or
/// execute the verification suite.
#[derive(Parser, Debug)]
#[command(name = "psit", version)]
struct Args {
    /// Scenario configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Override the master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Verify mode: run only checks whose name contains this string.
    #[arg(long)]
    filter: Option<String>,
    /// Override the number of Monte Carlo paths.
    #[arg(long)]
    paths: Option<usize>,
    #[arg(long, hide = true)]
    inject_fault: Option<String>,
}

const EXIT_CHECK_FAILED: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

fn configure_threads() -> Result<(), String> {
    let Ok(v) = std::env::var("PSIT_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| format!("PSIT_THREADS must be a positive integer, got {v:?}"))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())
}

fn run(args: Args) -> Result<u8, (u8, String)> {
    configure_threads().map_err(|e| (EXIT_CONFIG, e))?;
    let mut cfg = load_config(&args.config).map_err(|e| (EXIT_CONFIG, e.to_string()))?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(n) = args.paths {
        if n == 0 {
            return Err((EXIT_CONFIG, "--paths must be at least 1".into()));
        }
        cfg.n_paths = n;
    }
    cfg.market_spec().map_err(|e| (EXIT_CONFIG, format!("market: {e}")))?;
    let faults = match args.inject_fault.as_deref() {
        None => Faults::default(),
        Some("ibp-sign") => Faults { ibp_sign: true },
        Some(other) => return Err((EXIT_CONFIG, format!("unknown fault {other:?}"))),
    };
    let runtime = |e: Error| (EXIT_RUNTIME, e.to_string());
    match cfg.mode {
        Mode::Verify => {
            let report = run_verify(&VerifyOptions { seed: cfg.seed, filter: args.filter, faults });
            print!("{}", report.table());
            std::fs::create_dir_all(&args.out).map_err(|e| runtime(e.into()))?;
            std::fs::write(args.out.join("report.json"), report.to_json()).map_err(|e| runtime(e.into()))?;
            Ok(if report.all_passed() { 0 } else { EXIT_CHECK_FAILED })
        }
        Mode::Finance => {
            let artifacts = run_finance(&cfg).map_err(runtime)?;
            artifacts.write(&args.out).map_err(runtime)?;
            for (name, _) in &artifacts.files {
                println!("wrote {}", args.out.join(name).display());
            }
            Ok(0)
        }
        Mode::Simulate => {
            let artifacts = run_simulate(&cfg).map_err(runtime)?;
            artifacts.write(&args.out).map_err(runtime)?;
            for (name, _) in &artifacts.files {
                println!("wrote {}", args.out.join(name).display());
            }
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(args) {
        Ok(code) => ExitCode::from(code),
        Err((code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}
