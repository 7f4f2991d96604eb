//! Check results, their JSON form and the human-readable table, plus the
//! float formatting shared by every machine-readable output.

use serde::Serialize;
use serde_json::value::RawValue;

pub const SCHEMA_VERSION: u32 = 1;

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// JSON number with 17 significant digits; `null` for non-finite values.
pub fn json_f64(x: f64) -> Box<RawValue> {
    let text = if x.is_finite() { fmt_f64(x) } else { "null".to_string() };
    RawValue::from_string(text).expect("formatted float is valid JSON")
}

#[derive(Clone, Debug, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub criterion: u32,
    pub passed: bool,
    pub measured: f64,
    pub tolerance: f64,
    pub paths: usize,
    pub wall_time_s: f64,
    pub detail: String,
}

/// Wall-clock budget for each acceptance criterion, in seconds.
pub fn time_limit(criterion: u32) -> Option<f64> {
    match criterion {
        1 => Some(5.0),
        2 => Some(2.0),
        3 | 5 => Some(10.0),
        4 => Some(30.0),
        6 => Some(5.0),
        7 | 9 => Some(60.0),
        8 => Some(90.0),
        _ => None,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CriterionSummary {
    pub criterion: u32,
    pub checks: Vec<String>,
    pub passed: bool,
    pub wall_time_s: f64,
    pub time_limit_s: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunReport {
    pub checks: Vec<CheckResult>,
}

#[derive(Serialize)]
struct CheckJson<'a> {
    name: &'a str,
    criterion: u32,
    status: &'static str,
    measured: Box<RawValue>,
    tolerance: Box<RawValue>,
    paths: usize,
    wall_time_s: Box<RawValue>,
    detail: &'a str,
}

#[derive(Serialize)]
struct CriterionJson {
    criterion: u32,
    status: &'static str,
    checks: Vec<String>,
    wall_time_s: Box<RawValue>,
    time_limit_s: Option<Box<RawValue>>,
}

#[derive(Serialize)]
struct ReportJson<'a> {
    schema_version: u32,
    passed: bool,
    checks: Vec<CheckJson<'a>>,
    criteria: Vec<CriterionJson>,
}

fn status(ok: bool) -> &'static str {
    if ok {
        "pass"
    } else {
        "fail"
    }
}

impl RunReport {
    /// Per-criterion verdicts: every check passes and the total time of the
    /// criterion's checks is within its budget.
    pub fn criteria(&self) -> Vec<CriterionSummary> {
        let mut ids: Vec<u32> = self.checks.iter().map(|c| c.criterion).collect();
        ids.sort_unstable();
        ids.dedup();
        ids.into_iter()
            .map(|criterion| {
                let checks: Vec<&CheckResult> = self.checks.iter().filter(|c| c.criterion == criterion).collect();
                let wall: f64 = checks.iter().map(|c| c.wall_time_s).sum();
                let limit = time_limit(criterion);
                CriterionSummary {
                    criterion,
                    checks: checks.iter().map(|c| c.name.clone()).collect(),
                    passed: checks.iter().all(|c| c.passed) && limit.is_none_or(|l| wall <= l),
                    wall_time_s: wall,
                    time_limit_s: limit,
                }
            })
            .collect()
    }

    pub fn all_passed(&self) -> bool {
        self.criteria().iter().all(|c| c.passed)
    }

    pub fn to_json(&self) -> String {
        let doc = ReportJson {
            schema_version: SCHEMA_VERSION,
            passed: self.all_passed(),
            checks: self
                .checks
                .iter()
                .map(|c| CheckJson {
                    name: &c.name,
                    criterion: c.criterion,
                    status: status(c.passed),
                    measured: json_f64(c.measured),
                    tolerance: json_f64(c.tolerance),
                    paths: c.paths,
                    wall_time_s: json_f64(c.wall_time_s),
                    detail: &c.detail,
                })
                .collect(),
            criteria: self
                .criteria()
                .into_iter()
                .map(|c| CriterionJson {
                    criterion: c.criterion,
                    status: status(c.passed),
                    checks: c.checks,
                    wall_time_s: json_f64(c.wall_time_s),
                    time_limit_s: c.time_limit_s.map(json_f64),
                })
                .collect(),
        };
        let mut s = serde_json::to_string_pretty(&doc).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn table(&self) -> String {
        let width = self.checks.iter().map(|c| c.name.len()).max().unwrap_or(5).max(5);
        let mut out = format!(
            "{:<width$}  {:>2}  {:<4}  {:>12}  {:>12}  {:>7}  {:>8}\n",
            "check", "#", "stat", "measured", "tolerance", "paths", "time(s)"
        );
        for c in &self.checks {
            out += &format!(
                "{:<width$}  {:>2}  {:<4}  {:>12.4e}  {:>12.4e}  {:>7}  {:>8.3}\n",
                c.name,
                c.criterion,
                status(c.passed),
                c.measured,
                c.tolerance,
                c.paths,
                c.wall_time_s
            );
            if !c.passed && !c.detail.is_empty() {
                out += &format!("    {}\n", c.detail);
            }
        }
        for c in self.criteria() {
            if let Some(limit) = c.time_limit_s.filter(|&l| c.wall_time_s > l) {
                out += &format!("criterion {} over time budget: {:.3} s > {limit} s\n", c.criterion, c.wall_time_s);
            }
        }
        let failed = self.criteria().iter().filter(|c| !c.passed).count();
        out += &format!("{} checks, {failed} criteria failing\n", self.checks.len());
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check(name: &str, criterion: u32, passed: bool, t: f64) -> CheckResult {
        CheckResult {
            name: name.into(),
            criterion,
            passed,
            measured: 0.5,
            tolerance: 1.0,
            paths: 3,
            wall_time_s: t,
            detail: String::new(),
        }
    }

    #[test]
    fn floats_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 123456789.123] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(json_f64(f64::NAN).get(), "null");
    }

    #[test]
    fn criteria_respect_time_budget() {
        let r = RunReport { checks: vec![check("a", 2, true, 1.5), check("b", 2, true, 1.0)] };
        assert!(!r.all_passed());
        let r = RunReport { checks: vec![check("a", 2, true, 0.5), check("b", 10, true, 100.0)] };
        assert!(r.all_passed());
        let v: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(v["criteria"][0]["status"], "pass");
        assert_eq!(v["checks"][1]["name"], "b");
    }
}
