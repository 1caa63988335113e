use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
    dir: Option<PathBuf>,
}

fn mploc(sub: &str, config: &Path, out: &Path, extra: &[&str]) -> Run {
    let o = Command::new(env!("CARGO_BIN_EXE_mploc"))
        .arg(sub)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(extra)
        .output()
        .expect("binary runs");
    let stdout = String::from_utf8_lossy(&o.stdout).into_owned();
    let dir = stdout.lines().find_map(|l| l.strip_prefix("wrote ")).map(PathBuf::from);
    Run { code: o.status.code().unwrap_or(-1), stdout, stderr: String::from_utf8_lossy(&o.stderr).into_owned(), dir }
}

fn schema() -> jsonschema::Validator {
    let text = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("schema/results.v1.json")).unwrap();
    jsonschema::validator_for(&serde_json::from_str(&text).unwrap()).unwrap()
}

const SMOKE: &[(&str, &str)] = &[
    ("params", "params_strict"),
    ("classify", "classify"),
    ("classify", "classify_pi"),
    ("stollmann", "stollmann"),
    ("stollmann", "stollmann_two"),
    ("joint", "joint"),
    ("coupling", "coupling"),
    ("decay", "decay"),
    ("poisson", "poisson"),
];

#[test]
fn smoke_runs_pass_and_match_schema() {
    let tmp = tempfile::tempdir().unwrap();
    let validator = schema();
    for (sub, name) in SMOKE {
        let run = mploc(sub, &configs().join(format!("{name}.toml")), tmp.path(), &[]);
        assert_eq!(run.code, 0, "{sub} {name}: {}{}", run.stdout, run.stderr);
        let dir = run.dir.expect("run directory printed");
        let record: Value = serde_json::from_str(&std::fs::read_to_string(dir.join("results.json")).unwrap()).unwrap();
        let errors: Vec<String> = validator.iter_errors(&record).map(|e| e.to_string()).collect();
        assert!(errors.is_empty(), "{sub} {name}: {errors:?}");
        assert_eq!(record["subcommand"], *sub);
        assert!(dir.file_name().unwrap().to_str().unwrap().ends_with(record["config_hash"].as_str().unwrap()));
        assert!(std::fs::read_dir(&dir).unwrap().any(|e| e.unwrap().path().extension().is_some_and(|x| x == "csv")));
    }
}

#[test]
fn strict_violation_exits_one() {
    let tmp = tempfile::tempdir().unwrap();
    let run = mploc("params", &configs().join("params_toy_in_strict.toml"), tmp.path(), &[]);
    assert_eq!(run.code, 1, "{}", run.stdout);
    assert!(run.stdout.contains("p0 >= 20Nd"));
}

#[test]
fn malformed_config_exits_two_with_line() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("bad.toml");
    std::fs::write(&path, "master_seed = 1\n[model]\nn = 1\nd = one\n").unwrap();
    let run = mploc("params", &path, tmp.path(), &[]);
    assert_eq!(run.code, 2);
    assert!(run.stderr.contains("line 4"), "{}", run.stderr);
}

#[test]
fn missing_experiment_table_exits_two() {
    let tmp = tempfile::tempdir().unwrap();
    let run = mploc("decay", &configs().join("params_strict.toml"), tmp.path(), &[]);
    assert_eq!(run.code, 2);
    assert!(run.stderr.contains("[decay]"));
}

#[test]
fn usage_error_exits_two() {
    let o = Command::new(env!("CARGO_BIN_EXE_mploc")).arg("frobnicate").output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn budget_refusal_is_clean() {
    let tmp = tempfile::tempdir().unwrap();
    let run = mploc("decay", &configs().join("budget_refusal.toml"), tmp.path(), &[]);
    assert_eq!(run.code, 2);
    assert!(run.stderr.contains("budget"), "{}", run.stderr);
    assert!(std::fs::read_dir(tmp.path()).unwrap().next().is_none());
}

#[test]
fn env_budget_cap_applies() {
    let tmp = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_mploc"))
        .args(["decay", "--config"])
        .arg(configs().join("decay.toml"))
        .arg("--out")
        .arg(tmp.path())
        .env("MPLOC_MAX_DIM", "10")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn seed_override_changes_run_and_replays() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = configs().join("stollmann.toml");
    let a = mploc("stollmann", &cfg, &tmp.path().join("a"), &["--seed", "99"]);
    let b = mploc("stollmann", &cfg, &tmp.path().join("b"), &["--seed", "99"]);
    let c = mploc("stollmann", &cfg, &tmp.path().join("c"), &[]);
    let (da, db, dc) = (a.dir.unwrap(), b.dir.unwrap(), c.dir.unwrap());
    assert_eq!(da.file_name(), db.file_name());
    assert_ne!(da.file_name(), dc.file_name());
    let read = |d: &Path| std::fs::read(d.join("ensemble.csv")).unwrap();
    assert_eq!(read(&da), read(&db));
    let rec: Value = serde_json::from_str(&std::fs::read_to_string(da.join("results.json")).unwrap()).unwrap();
    assert_eq!(rec["master_seed"], 99);
    assert_eq!(rec["payload"]["master_seed"], 99);
}
