use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_psit");

const FINANCE: &str = "
[grid]
horizon = 1.0
steps = 100
[rng]
seed = 5
n_paths = 1200
[[market.regimes]]
drift = 0.1
sigma = 0.2
";

fn run(dir: &Path, config: &str, args: &[&str], threads: Option<&str>) -> Output {
    let cfg = dir.join("scenario.toml");
    fs::write(&cfg, config).unwrap();
    let mut cmd = Command::new(BIN);
    cmd.arg("--config").arg(&cfg).arg("--out").arg(dir.join("out")).args(args);
    match threads {
        Some(t) => cmd.env("PSIT_THREADS", t),
        None => cmd.env_remove("PSIT_THREADS"),
    };
    cmd.output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const VERIFY: &str = "[grid]\nhorizon = 1.0\nsteps = 10\n[[market.regimes]]\ndrift = 0.1\nsigma = 0.2\n[run]\nmode = \"verify\"\n";

#[test]
fn bad_values_and_typos_exit_with_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &FINANCE.replace("sigma = 0.2", "sigma = -1.0"), &[], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("market.regimes[0].sigma"), "{}", stderr(&o));

    let o = run(dir.path(), &FINANCE.replace("drift", "drft"), &[], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("did you mean \"market.regimes[0].drift\""), "{}", stderr(&o));

    let o = run(dir.path(), "[grid\nsteps = 3", &[], None);
    assert_eq!(o.status.code(), Some(2));

    let o = run(dir.path(), FINANCE, &[], Some("zero"));
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn finance_writes_the_three_files() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), FINANCE, &[], None);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = dir.path().join("out");
    let utility = fs::read_to_string(out.join("utility.csv")).unwrap();
    assert!(utility.starts_with("c,expected_log_utility,std_error,n_valid_paths\n"));
    assert_eq!(utility.lines().count(), 6);
    let sample = fs::read_to_string(out.join("sample_path.csv")).unwrap();
    assert!(sample.starts_with("t,S,w,Z,pi,X\n"));
    assert_eq!(sample.lines().count(), 102);
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["schema_version"], 1);
    assert_eq!(summary["n_paths"], 1200);
}

#[test]
fn seed_and_paths_flags_override_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), FINANCE, &["--seed", "9", "--paths", "10"], None);
    assert!(o.status.success(), "{}", stderr(&o));
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/summary.json")).unwrap()).unwrap();
    assert_eq!(summary["seed"], 9);
    assert_eq!(summary["n_paths"], 10);
    assert_eq!(run(dir.path(), FINANCE, &["--paths", "0"], None).status.code(), Some(2));
}

#[test]
fn outputs_do_not_depend_on_thread_count() {
    let files = |threads: &str| {
        let dir = tempfile::tempdir().unwrap();
        let o = run(dir.path(), FINANCE, &[], Some(threads));
        assert!(o.status.success(), "{}", stderr(&o));
        ["utility.csv", "sample_path.csv", "summary.json"].map(|f| fs::read(dir.path().join("out").join(f)).unwrap())
    };
    assert_eq!(files("1"), files("8"));
}

#[test]
fn verify_filter_runs_only_matching_checks() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), VERIFY, &["--filter", "identity.ito"], None);
    assert!(o.status.success(), "{}", stdout(&o));
    let text = stdout(&o);
    assert!(text.contains("identity.ito_square") && text.contains("identity.ito_product"));
    assert!(!text.contains("identity.ibp") && !text.contains("qv_brownian"));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/report.json")).unwrap()).unwrap();
    assert_eq!(report["checks"].as_array().unwrap().len(), 2);
}

#[test]
fn injected_fault_is_caught() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = VERIFY;
    let o = run(dir.path(), cfg, &["--filter", "identity", "--inject-fault", "ibp-sign"], None);
    assert_eq!(o.status.code(), Some(1));
    let line = stdout(&o).lines().find(|l| l.starts_with("identity.ibp")).unwrap().to_string();
    assert!(line.contains("fail"), "{line}");
}
