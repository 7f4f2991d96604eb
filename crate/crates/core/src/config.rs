//! Scenario configuration in TOML.
//!
//! ```toml
//! [grid]
//! horizon = 1.0
//! steps = 1000
//!
//! [rng]            # optional
//! seed = 42
//! n_paths = 1000
//!
//! [market]
//! s0 = 1.0         # optional, default 1
//! x0 = 1.0         # optional, default 1
//! terminal = 1.0   # optional, default horizon
//! utility = "log"  # optional; only "log" is supported
//! rho = [[1.0]]    # optional, default identity
//! [[market.regimes]]
//! drift = 0.1
//! sigma = 0.2
//! [market.default] # optional, default kind = "none"
//! kind = "fixed"   # "none" | "fixed" (value) | "exponential" (rate)
//! value = 0.5
//!
//! [run]            # optional
//! mode = "finance" # "finance" | "simulate" | "verify"
//! multipliers = [0.5, 0.8, 1.0, 1.2, 2.0]
//! outputs = ["utility", "sample_path", "summary"]
//! ```
//!
//! Unknown keys are rejected with the nearest known key as a suggestion.

use std::path::Path;

use toml::{Table, Value};

use crate::error::{Error, Result};
use crate::finance::{DefaultTime, MarketSpec, Regime};
use crate::grid::{cholesky_psd, TimeGrid};

pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_PATHS: usize = 1000;
pub const DEFAULT_MULTIPLIERS: [f64; 5] = [0.5, 0.8, 1.0, 1.2, 2.0];
pub const OUTPUTS: [&str; 3] = ["utility", "sample_path", "summary"];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Finance,
    Simulate,
    Verify,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MarketConfig {
    pub s0: f64,
    pub x0: f64,
    pub terminal: f64,
    pub regimes: Vec<Regime>,
    pub default: DefaultTime,
    pub rho: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioConfig {
    pub grid: TimeGrid,
    pub seed: u64,
    pub n_paths: usize,
    pub market: MarketConfig,
    pub mode: Mode,
    pub multipliers: Vec<f64>,
    pub outputs: Vec<String>,
}

impl ScenarioConfig {
    pub fn market_spec(&self) -> Result<MarketSpec> {
        let m = &self.market;
        MarketSpec::with_rho(self.grid, m.s0, m.terminal, m.regimes.clone(), m.default, m.rho.clone())
    }
}

pub fn load_config(path: &Path) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::config(path.display().to_string(), format!("cannot read config: {e}")))?;
    parse_config(&text)
}

pub fn parse_config(text: &str) -> Result<ScenarioConfig> {
    let root: Table = text
        .parse()
        .map_err(|e: toml::de::Error| Error::config("<document>", e.to_string().trim_end().to_string()))?;
    check_keys(&root, "", &["grid", "rng", "market", "run"])?;

    let grid_t = table(&root, "grid", "")?.ok_or_else(|| missing("grid"))?;
    check_keys(grid_t, "grid", &["horizon", "steps"])?;
    let horizon = float(grid_t, "grid", "horizon")?.ok_or_else(|| missing("grid.horizon"))?;
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(Error::config("grid.horizon", format!("must be positive, got {horizon}")));
    }
    let steps = integer(grid_t, "grid", "steps")?.ok_or_else(|| missing("grid.steps"))?;
    if steps < 1 {
        return Err(Error::config("grid.steps", format!("must be at least 1, got {steps}")));
    }
    let grid = TimeGrid::new(horizon, steps as usize).map_err(|e| Error::config("grid", e.to_string()))?;

    let empty = Table::new();
    let rng_t = table(&root, "rng", "")?.unwrap_or(&empty);
    check_keys(rng_t, "rng", &["seed", "n_paths"])?;
    let seed = match integer(rng_t, "rng", "seed")? {
        Some(s) if s < 0 => return Err(Error::config("rng.seed", format!("must be non-negative, got {s}"))),
        Some(s) => s as u64,
        None => DEFAULT_SEED,
    };
    let n_paths = match integer(rng_t, "rng", "n_paths")? {
        Some(n) if n < 1 => return Err(Error::config("rng.n_paths", format!("must be at least 1, got {n}"))),
        Some(n) => n as usize,
        None => DEFAULT_PATHS,
    };

    let market = parse_market(table(&root, "market", "")?.ok_or_else(|| missing("market"))?, grid)?;

    let run_t = table(&root, "run", "")?.unwrap_or(&empty);
    check_keys(run_t, "run", &["mode", "multipliers", "outputs"])?;
    let mode = match string(run_t, "run", "mode")?.as_deref() {
        None | Some("finance") => Mode::Finance,
        Some("simulate") => Mode::Simulate,
        Some("verify") => Mode::Verify,
        Some(other) => {
            return Err(Error::config(
                "run.mode",
                format!("unknown mode \"{other}\" (expected finance, simulate or verify)"),
            ))
        }
    };
    let multipliers = match array(run_t, "run", "multipliers")? {
        None => DEFAULT_MULTIPLIERS.to_vec(),
        Some(a) => {
            let v = floats(a, "run.multipliers")?;
            if v.is_empty() {
                return Err(Error::config("run.multipliers", "must not be empty"));
            }
            if let Some(i) = v.iter().position(|c| !c.is_finite()) {
                return Err(Error::config(format!("run.multipliers[{i}]"), "must be finite"));
            }
            v
        }
    };
    let outputs = match array(run_t, "run", "outputs")? {
        None => OUTPUTS.iter().map(|s| s.to_string()).collect(),
        Some(a) => a
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let key = format!("run.outputs[{i}]");
                let s = v.as_str().ok_or_else(|| type_error(&key, "a string", v))?;
                if !OUTPUTS.contains(&s) {
                    return Err(unknown(&key, s, &OUTPUTS));
                }
                Ok(s.to_string())
            })
            .collect::<Result<_>>()?,
    };

    Ok(ScenarioConfig { grid, seed, n_paths, market, mode, multipliers, outputs })
}

fn parse_market(t: &Table, grid: TimeGrid) -> Result<MarketConfig> {
    check_keys(t, "market", &["s0", "x0", "terminal", "utility", "rho", "regimes", "default"])?;
    let positive = |key: &str, default: f64| -> Result<f64> {
        let v = float(t, "market", key)?.unwrap_or(default);
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::config(format!("market.{key}"), format!("must be positive, got {v}")));
        }
        Ok(v)
    };
    let s0 = positive("s0", 1.0)?;
    let x0 = positive("x0", 1.0)?;
    let terminal = float(t, "market", "terminal")?.unwrap_or(grid.horizon());
    if !matches!(grid.node_index(terminal), Some(k) if k > 0) {
        return Err(Error::config("market.terminal", format!("{terminal} is not a positive grid node")));
    }
    match string(t, "market", "utility")?.as_deref() {
        None | Some("log") => {}
        Some(other) => {
            return Err(Error::config("market.utility", format!("unsupported utility \"{other}\" (only \"log\")")))
        }
    }

    let regimes_v = array(t, "market", "regimes")?.ok_or_else(|| missing("market.regimes"))?;
    if regimes_v.is_empty() {
        return Err(Error::config("market.regimes", "at least one regime is required"));
    }
    let regimes = regimes_v
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let key = format!("market.regimes[{i}]");
            let r = v.as_table().ok_or_else(|| type_error(&key, "a table", v))?;
            check_keys(r, &key, &["drift", "sigma"])?;
            let drift = float(r, &key, "drift")?.ok_or_else(|| missing(&format!("{key}.drift")))?;
            if !drift.is_finite() {
                return Err(Error::config(format!("{key}.drift"), "must be finite"));
            }
            let sigma = float(r, &key, "sigma")?.ok_or_else(|| missing(&format!("{key}.sigma")))?;
            if !(sigma.is_finite() && sigma > 0.0) {
                return Err(Error::config(format!("{key}.sigma"), format!("must be positive, got {sigma}")));
            }
            Ok(Regime { drift, sigma })
        })
        .collect::<Result<Vec<_>>>()?;

    let n = regimes.len();
    let rho = match array(t, "market", "rho")? {
        None => (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect(),
        Some(rows) => {
            if rows.len() != n {
                return Err(Error::config("market.rho", format!("must be {n}x{n} (one row per regime)")));
            }
            let m = rows
                .iter()
                .enumerate()
                .map(|(i, row)| {
                    let key = format!("market.rho[{i}]");
                    let r = row.as_array().ok_or_else(|| type_error(&key, "an array", row))?;
                    let r = floats(r, &key)?;
                    if r.len() != n {
                        return Err(Error::config(key, format!("must have {n} entries")));
                    }
                    Ok(r)
                })
                .collect::<Result<Vec<_>>>()?;
            for i in 0..n {
                if m[i][i] != 1.0 {
                    return Err(Error::config(format!("market.rho[{i}][{i}]"), "diagonal entries must be 1"));
                }
                for j in 0..i {
                    if m[i][j] != m[j][i] {
                        return Err(Error::config(format!("market.rho[{i}][{j}]"), "matrix must be symmetric"));
                    }
                }
            }
            cholesky_psd(&m).map_err(|e| Error::config("market.rho", e.to_string()))?;
            m
        }
    };

    let default = match table(t, "default", "market")? {
        None => DefaultTime::None,
        Some(d) => {
            let key = "market.default";
            let kind = string(d, key, "kind")?.ok_or_else(|| missing("market.default.kind"))?;
            match kind.as_str() {
                "none" => {
                    check_keys(d, key, &["kind"])?;
                    DefaultTime::None
                }
                "fixed" => {
                    check_keys(d, key, &["kind", "value"])?;
                    let v = float(d, key, "value")?.ok_or_else(|| missing("market.default.value"))?;
                    if !(v.is_finite() && v > 0.0) {
                        return Err(Error::config("market.default.value", format!("must be positive, got {v}")));
                    }
                    DefaultTime::Fixed(v)
                }
                "exponential" => {
                    check_keys(d, key, &["kind", "rate"])?;
                    let r = float(d, key, "rate")?.ok_or_else(|| missing("market.default.rate"))?;
                    if !(r.is_finite() && r > 0.0) {
                        return Err(Error::config("market.default.rate", format!("must be positive, got {r}")));
                    }
                    DefaultTime::Exponential { rate: r }
                }
                other => return Err(unknown("market.default.kind", other, &["none", "fixed", "exponential"])),
            }
        }
    };

    Ok(MarketConfig { s0, x0, terminal, regimes, default, rho })
}

fn join(prefix: &str, key: &str) -> String {
    if prefix.is_empty() {
        key.to_string()
    } else {
        format!("{prefix}.{key}")
    }
}

fn missing(key: &str) -> Error {
    Error::config(key, "missing required key")
}

fn type_error(key: &str, expected: &str, got: &Value) -> Error {
    Error::config(key, format!("expected {expected}, found {}", got.type_str()))
}

fn unknown(key: &str, got: &str, known: &[&str]) -> Error {
    let best = known
        .iter()
        .map(|k| (strsim::jaro_winkler(got, k), *k))
        .max_by(|a, b| a.0.total_cmp(&b.0));
    let hint = match best {
        Some((score, k)) if score >= 0.7 => format!("; did you mean \"{k}\"?"),
        _ => String::new(),
    };
    Error::config(key, format!("unknown value \"{got}\"{hint}"))
}

fn check_keys(t: &Table, prefix: &str, known: &[&str]) -> Result<()> {
    for key in t.keys() {
        if !known.contains(&key.as_str()) {
            let best = known
                .iter()
                .map(|k| (strsim::jaro_winkler(key, k), *k))
                .max_by(|a, b| a.0.total_cmp(&b.0));
            let hint = match best {
                Some((score, k)) if score >= 0.7 => format!("; did you mean \"{}\"?", join(prefix, k)),
                _ => String::new(),
            };
            return Err(Error::config(join(prefix, key), format!("unknown key{hint}")));
        }
    }
    Ok(())
}

fn table<'a>(t: &'a Table, key: &str, prefix: &str) -> Result<Option<&'a Table>> {
    match t.get(key) {
        None => Ok(None),
        Some(Value::Table(inner)) => Ok(Some(inner)),
        Some(v) => Err(type_error(&join(prefix, key), "a table", v)),
    }
}

fn array<'a>(t: &'a Table, prefix: &str, key: &str) -> Result<Option<&'a Vec<Value>>> {
    match t.get(key) {
        None => Ok(None),
        Some(Value::Array(a)) => Ok(Some(a)),
        Some(v) => Err(type_error(&join(prefix, key), "an array", v)),
    }
}

fn float(t: &Table, prefix: &str, key: &str) -> Result<Option<f64>> {
    match t.get(key) {
        None => Ok(None),
        Some(Value::Float(f)) => Ok(Some(*f)),
        Some(Value::Integer(i)) => Ok(Some(*i as f64)),
        Some(v) => Err(type_error(&join(prefix, key), "a number", v)),
    }
}

fn integer(t: &Table, prefix: &str, key: &str) -> Result<Option<i64>> {
    match t.get(key) {
        None => Ok(None),
        Some(Value::Integer(i)) => Ok(Some(*i)),
        Some(v) => Err(type_error(&join(prefix, key), "an integer", v)),
    }
}

fn string(t: &Table, prefix: &str, key: &str) -> Result<Option<String>> {
    match t.get(key) {
        None => Ok(None),
        Some(Value::String(s)) => Ok(Some(s.clone())),
        Some(v) => Err(type_error(&join(prefix, key), "a string", v)),
    }
}

fn floats(a: &[Value], key: &str) -> Result<Vec<f64>> {
    a.iter()
        .enumerate()
        .map(|(i, v)| match v {
            Value::Float(f) => Ok(*f),
            Value::Integer(n) => Ok(*n as f64),
            other => Err(type_error(&format!("{key}[{i}]"), "a number", other)),
        })
        .collect()
}
