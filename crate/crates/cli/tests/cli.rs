use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_lclt-lab"));
    cmd.env_remove("LCLT_LAB_THREADS");
    cmd
}

fn repo_file(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

fn run(args: &[&str], out: &Path) -> Output {
    bin().args(args).arg("--out").arg(out).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn report_lines(dir: &Path) -> Vec<Value> {
    fs::read_to_string(dir.join("reports.jsonl"))
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("config.json");
    fs::write(&path, text).unwrap();
    path
}

fn type_matches(v: &Value, ty: &str) -> bool {
    match ty {
        "object" => v.is_object(),
        "string" => v.is_string(),
        "number" => v.is_number(),
        "boolean" => v.is_boolean(),
        other => panic!("schema type {other} not handled"),
    }
}

/// Interprets the keywords the report schema uses.
fn validate(v: &Value, schema: &Value, path: &str) -> Result<(), String> {
    if let Some(ty) = schema["type"].as_str() {
        if !type_matches(v, ty) {
            return Err(format!("{path}: expected {ty}, got {v}"));
        }
    }
    if let Some(min) = schema["minimum"].as_f64() {
        if v.as_f64().unwrap() < min {
            return Err(format!("{path}: {v} below {min}"));
        }
    }
    if let Some(pattern) = schema["pattern"].as_str() {
        assert_eq!(pattern, "^[a-z0-9_]+$");
        let s = v.as_str().unwrap();
        if s.is_empty()
            || !s
                .chars()
                .all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_')
        {
            return Err(format!("{path}: {s} does not match {pattern}"));
        }
    }
    let Some(obj) = v.as_object() else { return Ok(()) };
    for key in schema["required"].as_array().into_iter().flatten() {
        if !obj.contains_key(key.as_str().unwrap()) {
            return Err(format!("{path}: missing {key}"));
        }
    }
    let props = schema["properties"].as_object();
    for (key, value) in obj {
        match props.and_then(|p| p.get(key)) {
            Some(sub) => validate(value, sub, &format!("{path}.{key}"))?,
            None if schema["additionalProperties"] == Value::Bool(false) => {
                return Err(format!("{path}: unexpected key {key}"));
            }
            None => {}
        }
    }
    Ok(())
}

#[test]
fn constants_on_zero_coupling() {
    let tmp = tempfile::tempdir().unwrap();
    let config = repo_file("configs/free_ising.json");
    let o = run(&["constants", "--config", config.to_str().unwrap()], tmp.path());
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let json_end = text.find("\n}\n").unwrap() + 2;
    let k: Value = serde_json::from_str(&text[..json_end]).unwrap();
    assert_eq!(k["kappa"], 0.5);
    assert!((k["delta"].as_f64().unwrap() - 0.0416667).abs() < 1e-7);
    assert_eq!(k["C"], 0.125);
    assert_eq!(k["condifina_ok"], true);
}

#[test]
fn identity_check_default_suite() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(&["identity-check"], tmp.path());
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let lines = report_lines(tmp.path());
    assert_eq!(lines.len(), 200);
    assert!(lines.iter().all(|l| l["pass"] == true));
}

#[test]
fn malformed_config_writes_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), "{\"model\": {");
    let out = tmp.path().join("out");
    let o = run(&["lemma-a", "--config", config.to_str().unwrap()], &out);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());
    let o = run(
        &[
            "lemma-a",
            "--config",
            write_config(tmp.path(), "{\"modle\": {}}").to_str().unwrap(),
        ],
        &out,
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn usage_errors_exit_two() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let config = repo_file("configs/free_ising.json");
    let config = config.to_str().unwrap();
    for args in [
        vec!["frobnicate"],
        vec!["lemma-a"],
        vec!["lemma-a", "--config", config, "--c-variant", "sharp"],
        vec!["lemma-a", "--config", config, "--expert-delta", "4"],
    ] {
        let o = run(&args, &out);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
    }
    assert!(!out.exists());
}

#[test]
fn budget_exceeded_is_a_capacity_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let config = repo_file("configs/free_ising.json");
    let o = run(
        &["lemma-a", "--config", config.to_str().unwrap(), "--budget", "4"],
        &out,
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("capacity"));
    assert!(!out.exists());
}

#[test]
fn failing_check_exits_one() {
    let tmp = tempfile::tempdir().unwrap();
    // J = 0.1 on {−1,0,1} needs r0 = 2
    let config = write_config(
        tmp.path(),
        r#"{"model": {"dimension": 1, "radius": 4, "spin": {"lo": -1, "hi": 1},
            "coupling": {"kind": "nearest_neighbor", "strength": 0.1}, "boundary": {"kind": "zero"}},
            "params": {"r0_max": 1}}"#,
    );
    let out = tmp.path().join("out");
    let o = run(&["min-r0", "--config", config.to_str().unwrap()], &out);
    assert_eq!(o.status.code(), Some(1));
    let lines = report_lines(&out);
    assert_eq!(lines[0]["pass"], false);
    assert_eq!(lines[0]["parameters"]["found"], false);
}

#[test]
fn tolerance_overrides_are_applied_and_validated() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(
        tmp.path(),
        r#"{"model": {"dimension": 1, "radius": 2, "spin": {"lo": -1, "hi": 1, "step": 2},
            "coupling": {"kind": "nearest_neighbor", "strength": 0.0}, "boundary": {"kind": "zero"}},
            "tolerance_overrides": {"lemma_a": 0.25}}"#,
    );
    let out = tmp.path().join("out");
    assert_eq!(
        run(&["lemma-a", "--config", config.to_str().unwrap()], &out)
            .status
            .code(),
        Some(0)
    );
    assert!(report_lines(&out).iter().all(|l| l["parameters"]["tolerance"] == 0.25));
    let bad = write_config(tmp.path(), r#"{"tolerance_overrides": {"lemma_z": 1e-9}}"#);
    let out = tmp.path().join("bad");
    assert_eq!(
        run(&["graph-tables", "--config", bad.to_str().unwrap()], &out)
            .status
            .code(),
        Some(2)
    );
    assert!(!out.exists());
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let config = repo_file("configs/chain_r0_2.json");
    for args in [
        vec!["lemma-b", "--config", config.to_str().unwrap(), "--t-points", "16"],
        vec!["identity-check", "--seed", "5", "--t-points", "4"],
    ] {
        let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
        assert_eq!(run(&args, &a).status.code(), Some(0));
        let mut threaded = bin();
        threaded.env("LCLT_LAB_THREADS", "2").args(&args).arg("--out").arg(&b);
        assert_eq!(threaded.output().unwrap().status.code(), Some(0));
        for file in ["reports.jsonl", "summary.csv"] {
            assert_eq!(
                fs::read(a.join(file)).unwrap(),
                fs::read(b.join(file)).unwrap(),
                "{args:?} {file}"
            );
        }
        let meta: Value = serde_json::from_str(&fs::read_to_string(b.join("metadata.json")).unwrap()).unwrap();
        assert_eq!(meta["threads"], 2);
        fs::remove_dir_all(&a).unwrap();
        fs::remove_dir_all(&b).unwrap();
    }
}

#[test]
fn bad_thread_count_is_a_configuration_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let o = bin()
        .env("LCLT_LAB_THREADS", "zero")
        .args(["graph-tables", "--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn every_report_line_matches_the_schema() {
    let schema: Value =
        serde_json::from_str(&fs::read_to_string(repo_file("crates/cli/schema/report.schema.json")).unwrap()).unwrap();
    let tmp = tempfile::tempdir().unwrap();
    let chain = repo_file("configs/chain_r0_2.json");
    let scan = repo_file("configs/ising_chain_scan.json");
    let runs: Vec<Vec<&str>> = vec![
        vec!["constants", "--config", chain.to_str().unwrap()],
        vec!["min-r0", "--config", chain.to_str().unwrap()],
        vec!["graph-tables"],
        vec!["identity-check", "--t-points", "3"],
        vec!["prop1", "--config", chain.to_str().unwrap()],
        vec!["lemma-a", "--config", chain.to_str().unwrap(), "--t-points", "8"],
        vec!["lemma-b", "--config", chain.to_str().unwrap(), "--t-points", "8"],
        vec!["integrals", "--config", chain.to_str().unwrap(), "--t-points", "8"],
        vec!["g-audit", "--config", chain.to_str().unwrap(), "--t-points", "4"],
        vec!["lclt-scan", "--config", scan.to_str().unwrap()],
        vec!["mc", "--config", scan.to_str().unwrap()],
    ];
    for (i, args) in runs.iter().enumerate() {
        let out = tmp.path().join(i.to_string());
        let o = run(args, &out);
        assert_eq!(o.status.code(), Some(0), "{args:?}: {}", stdout(&o));
        let lines = report_lines(&out);
        assert!(!lines.is_empty(), "{args:?}");
        for line in &lines {
            validate(line, &schema, "$").unwrap_or_else(|e| panic!("{args:?}: {e}"));
        }
        let csv = fs::read_to_string(out.join("summary.csv")).unwrap();
        assert!(csv.starts_with("check,params,lhs,rhs,margin,pass\n"));
        assert_eq!(csv.lines().count(), lines.len() + 1);
    }
}

#[test]
fn schema_rejects_malformed_lines() {
    let schema: Value =
        serde_json::from_str(&fs::read_to_string(repo_file("crates/cli/schema/report.schema.json")).unwrap()).unwrap();
    let good: Value = serde_json::from_str(
        r#"{"check_name":"x","parameters":{"tolerance":0.0},"lhs":1.0,"rhs":2.0,"margin":1.0,"pass":true}"#,
    )
    .unwrap();
    assert!(validate(&good, &schema, "$").is_ok());
    for (key, bad) in [
        ("pass", Value::from("yes")),
        ("check_name", Value::from("Bad Name")),
        ("extra", Value::from(1)),
        ("parameters", serde_json::json!({"tolerance": -1.0})),
    ] {
        let mut v = good.clone();
        v[key] = bad;
        assert!(validate(&v, &schema, "$").is_err(), "{key}");
    }
}

/// Regenerate with
/// `lclt-lab graph-tables --out crates/cli/tests/golden/graph-tables` and
/// `lclt-lab constants --config configs/free_ising.json --out crates/cli/tests/golden/constants`,
/// then delete the metadata files.
#[test]
fn golden_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let free = repo_file("configs/free_ising.json");
    for (name, args) in [
        ("graph-tables", vec!["graph-tables"]),
        ("constants", vec!["constants", "--config", free.to_str().unwrap()]),
    ] {
        let out = tmp.path().join(name);
        assert_eq!(run(&args, &out).status.code(), Some(0));
        let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name);
        for file in ["reports.jsonl", "summary.csv"] {
            let expected = fs::read_to_string(golden.join(file)).unwrap();
            let actual = fs::read_to_string(out.join(file)).unwrap();
            assert_eq!(actual, expected, "{name}/{file}");
        }
    }
}
