//! Scenario execution: the finance and simulate modes and their output files.
//!
//! `utility.csv` has columns `c,expected_log_utility,std_error,n_valid_paths`;
//! `sample_path.csv` has `t,S,w,Z,pi,X` for the first path; `summary.json`
//! carries `schema_version` and the headline numbers. Floats are written with
//! 17 significant digits, so equal runs give equal bytes.

use std::fs;
use std::path::Path;

use serde::Serialize;
use serde_json::value::RawValue;

use crate::config::ScenarioConfig;
use crate::error::Result;
use crate::finance::{evaluate_multipliers, FinanceRun, Market, Regime};
use crate::grid::RngSpec;
use crate::report::{fmt_f64, json_f64, SCHEMA_VERSION};
use crate::stats::{mean_estimate, pairwise_sum};

/// Named output files, in the order they are written.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Artifacts {
    pub files: Vec<(String, String)>,
}

impl Artifacts {
    pub fn get(&self, name: &str) -> Option<&str> {
        self.files.iter().find(|(n, _)| n == name).map(|(_, c)| c.as_str())
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        for (name, content) in &self.files {
            fs::write(dir.join(name), content)?;
        }
        Ok(())
    }
}

#[derive(Serialize)]
struct FinanceSummary {
    schema_version: u32,
    mode: &'static str,
    seed: u64,
    n_paths: usize,
    steps: usize,
    horizon: Box<RawValue>,
    drift: Box<RawValue>,
    sigma: Box<RawValue>,
    x0: Box<RawValue>,
    argmax_c: Box<RawValue>,
    estimate_at_1: Option<Box<RawValue>>,
    std_error_at_1: Option<Box<RawValue>>,
    merton_bonus: Box<RawValue>,
    mean_horizon: Box<RawValue>,
    n_rejected_paths: usize,
    max_merton_gap: Box<RawValue>,
}

/// Utility of each multiplier of the log-optimal strategy, the first path's
/// series, and a summary.
pub fn run_finance(cfg: &ScenarioConfig) -> Result<Artifacts> {
    let spec = cfg.market_spec()?;
    let x0 = cfg.market.x0;
    let run = evaluate_multipliers(&spec, x0, RngSpec::new(cfg.seed), cfg.n_paths, &cfg.multipliers)?;
    let Regime { drift, sigma } = spec.regimes[0];
    Ok(finance_artifacts(cfg, &run, drift, sigma))
}

fn finance_artifacts(cfg: &ScenarioConfig, run: &FinanceRun, drift: f64, sigma: f64) -> Artifacts {
    let mut utility = String::from("c,expected_log_utility,std_error,n_valid_paths\n");
    for r in &run.results {
        utility += &format!(
            "{},{},{},{}\n",
            fmt_f64(r.c),
            fmt_f64(r.utility.estimate),
            fmt_f64(r.utility.std_error),
            r.utility.n_valid
        );
    }
    let b = &run.first_path;
    let mut sample = String::from("t,S,w,Z,pi,X\n");
    for k in 0..b.t.len() {
        let row = [b.t[k], b.s[k], b.w[k], b.z[k], b.pi[k], b.x[k]].map(fmt_f64);
        sample += &row.join(",");
        sample.push('\n');
    }
    let best = run
        .results
        .iter()
        .fold(None::<&crate::finance::MultiplierResult>, |best, r| match best {
            Some(b) if b.utility.estimate >= r.utility.estimate => Some(b),
            _ => Some(r),
        })
        .expect("at least one multiplier");
    let at_1 = run.results.iter().find(|r| r.c == 1.0);
    let summary = FinanceSummary {
        schema_version: SCHEMA_VERSION,
        mode: "finance",
        seed: cfg.seed,
        n_paths: run.n_paths,
        steps: cfg.grid.steps(),
        horizon: json_f64(cfg.grid.horizon()),
        drift: json_f64(drift),
        sigma: json_f64(sigma),
        x0: json_f64(cfg.market.x0),
        argmax_c: json_f64(best.c),
        estimate_at_1: at_1.map(|r| json_f64(r.utility.estimate)),
        std_error_at_1: at_1.map(|r| json_f64(r.utility.std_error)),
        merton_bonus: json_f64(drift * drift / (2.0 * sigma * sigma) * run.mean_horizon),
        mean_horizon: json_f64(run.mean_horizon),
        n_rejected_paths: run.results.iter().map(|r| r.utility.n_rejected).max().unwrap_or(0),
        max_merton_gap: json_f64(run.max_merton_gap),
    };
    let mut json = serde_json::to_string_pretty(&summary).expect("summary serializes");
    json.push('\n');
    let mut files = Vec::new();
    for (key, name, content) in [
        ("utility", "utility.csv", utility),
        ("sample_path", "sample_path.csv", sample),
        ("summary", "summary.json", json),
    ] {
        if cfg.outputs.iter().any(|o| o == key) {
            files.push((name.to_string(), content));
        }
    }
    Artifacts { files }
}

#[derive(Serialize)]
struct SimulateSummary {
    schema_version: u32,
    mode: &'static str,
    seed: u64,
    n_paths: usize,
    steps: usize,
    mean_horizon: Box<RawValue>,
    defaulted_paths: usize,
    mean_terminal_price: Box<RawValue>,
    std_error_terminal_price: Box<RawValue>,
}

const SIMULATE_CHUNK: usize = 512;

/// Simulates the market only: the first path's series (`π` and `X` left
/// empty) and summary statistics of the price at each path's horizon.
pub fn run_simulate(cfg: &ScenarioConfig) -> Result<Artifacts> {
    let spec = cfg.market_spec()?;
    let rng = RngSpec::new(cfg.seed);
    let grid = cfg.grid;
    let t_idx = grid.node_index(spec.terminal).expect("validated terminal");
    let mut horizons = Vec::with_capacity(cfg.n_paths);
    let mut prices = Vec::with_capacity(cfg.n_paths);
    let mut defaulted = 0;
    let mut sample = String::from("t,S,w,Z\n");
    let mut first = 0;
    while first < cfg.n_paths {
        let n = SIMULATE_CHUNK.min(cfg.n_paths - first);
        let m = Market::build_range(&spec, rng, first, n)?;
        for p in 0..n {
            let last = m.psit.last_index(p);
            horizons.push(grid.time(last));
            prices.push(m.price.value(p, last));
            if m.psit.debut_index(p) <= t_idx && !m.psit.closed_at_debut(p) {
                defaulted += 1;
            }
        }
        if first == 0 {
            for k in 0..=m.psit.last_index(0) {
                let row = [grid.time(k), m.price.value(0, k), m.driver.w.value(0, k), m.driver.z.value(0, k)];
                sample += &row.map(fmt_f64).join(",");
                sample.push('\n');
            }
        }
        first += n;
    }
    let price = mean_estimate(&prices);
    let summary = SimulateSummary {
        schema_version: SCHEMA_VERSION,
        mode: "simulate",
        seed: cfg.seed,
        n_paths: cfg.n_paths,
        steps: grid.steps(),
        mean_horizon: json_f64(pairwise_sum(&horizons) / cfg.n_paths as f64),
        defaulted_paths: defaulted,
        mean_terminal_price: json_f64(price.mean),
        std_error_terminal_price: json_f64(price.std_error),
    };
    let mut json = serde_json::to_string_pretty(&summary).expect("summary serializes");
    json.push('\n');
    let mut files = Vec::new();
    if cfg.outputs.iter().any(|o| o == "sample_path") {
        files.push(("sample_path.csv".to_string(), sample));
    }
    if cfg.outputs.iter().any(|o| o == "summary") {
        files.push(("summary.json".to_string(), json));
    }
    Ok(Artifacts { files })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    const CFG: &str = "
[grid]
horizon = 1.0
steps = 50
[rng]
n_paths = 300
[[market.regimes]]
drift = 0.1
sigma = 0.2
";

    #[test]
    fn finance_files_have_headers_and_rows() {
        let cfg = parse_config(CFG).unwrap();
        let a = run_finance(&cfg).unwrap();
        let u = a.get("utility.csv").unwrap();
        assert_eq!(u.lines().count(), 6);
        assert!(u.starts_with("c,expected_log_utility,std_error,n_valid_paths\n"));
        assert_eq!(a.get("sample_path.csv").unwrap().lines().count(), 52);
        let v: serde_json::Value = serde_json::from_str(a.get("summary.json").unwrap()).unwrap();
        assert_eq!(v["schema_version"], 1);
        assert_eq!(v["mean_horizon"].as_f64().unwrap(), 1.0);
        assert_eq!(run_finance(&cfg).unwrap(), a);
    }

    #[test]
    fn zero_drift_ties_at_log_x0() {
        let cfg = parse_config(&CFG.replace("drift = 0.1", "drift = 0.0")).unwrap();
        let a = run_finance(&cfg).unwrap();
        for line in a.get("utility.csv").unwrap().lines().skip(1) {
            let cols: Vec<&str> = line.split(',').collect();
            assert_eq!(cols[1].parse::<f64>().unwrap(), 0.0);
            assert_eq!(cols[2].parse::<f64>().unwrap(), 0.0);
        }
    }

    #[test]
    fn fixed_default_shortens_the_horizon() {
        let text = format!("{CFG}[market.default]\nkind = \"fixed\"\nvalue = 0.5\n");
        let cfg = parse_config(&text).unwrap();
        let a = run_finance(&cfg).unwrap();
        let v: serde_json::Value = serde_json::from_str(a.get("summary.json").unwrap()).unwrap();
        let h = v["mean_horizon"].as_f64().unwrap();
        assert!((h - (0.5 - 0.02)).abs() < 1e-12);
        let bonus = v["merton_bonus"].as_f64().unwrap();
        assert!((bonus - 0.125 * h).abs() < 1e-12);
    }

    #[test]
    fn simulate_and_output_selection() {
        let text = format!("{CFG}[run]\nmode = \"simulate\"\noutputs = [\"summary\"]\n");
        let cfg = parse_config(&text).unwrap();
        let a = run_simulate(&cfg).unwrap();
        assert_eq!(a.files.len(), 1);
        let v: serde_json::Value = serde_json::from_str(a.get("summary.json").unwrap()).unwrap();
        assert_eq!(v["defaulted_paths"], 0);
    }
}
