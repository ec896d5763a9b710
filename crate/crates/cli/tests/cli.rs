use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn odlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_odlab"))
        .args(args)
        .env_remove("ODLAB_OUTPUT_DIR")
        .output()
        .expect("failed to run odlab")
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout)
        .unwrap_or_else(|e| panic!("stdout is not JSON ({e}): {}", String::from_utf8_lossy(&out.stdout)))
}

fn stderr_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stderr)
        .unwrap_or_else(|e| panic!("stderr is not JSON ({e}): {}", String::from_utf8_lossy(&out.stderr)))
}

#[test]
fn golden_outputs() {
    let dir = Path::new("tests/golden");
    let cases = fs::read_to_string(dir.join("cases.txt")).unwrap();
    let mut seen = 0;
    for line in cases.lines().filter(|l| !l.trim().is_empty() && !l.starts_with('#')) {
        let mut words = line.split_whitespace();
        let name = words.next().unwrap();
        let code: i32 = words.next().unwrap().parse().unwrap();
        let args: Vec<&str> = words.collect();
        let out = odlab(&args);
        let expected = fs::read(dir.join(format!("{name}.out")))
            .unwrap_or_else(|_| panic!("missing golden file for {name}"));
        assert_eq!(
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&expected),
            "stdout mismatch for {name}; stderr: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        assert_eq!(out.status.code(), Some(code), "exit code for {name}");
        seen += 1;
    }
    assert!(seen >= 18);
}

#[test]
fn order_examples() {
    let v = stdout_json(&odlab(&["order", "--config", "configs/d_dx.json"]));
    assert_eq!(v["derivation_order"], 1);
    assert_eq!(v["schema"], "odlab/1");
    let v = stdout_json(&odlab(&["order", "--config", "configs/d2_dx2.json"]));
    assert_eq!(v["derivation_order"], 2);
    let v = stdout_json(&odlab(&["order", "--config", "configs/left_mult_x.json", "--max-order", "3"]));
    assert_eq!(v["derivation_order"], "exceeds 3");
    assert_eq!(v["diffop_order"], 0);
}

#[test]
fn operator_file_replaces_the_config_operator() {
    let dir = tempfile::tempdir().unwrap();
    let op = dir.path().join("op.json");
    fs::write(&op, r#"{"degree": 0, "terms": [{"coefficient": "1", "partials": {"x": 3}}]}"#).unwrap();
    let out = odlab(&["order", "--config", "configs/d_dx.json", "--operator", op.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout_json(&out)["derivation_order"], 3);
}

#[test]
fn tight_examples() {
    let out = odlab(&["tight", "--config", "configs/lie.json"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout_json(&out)["tight"], true);
    let out = odlab(&["tight", "--config", "configs/com.json"]);
    assert_eq!(out.status.code(), Some(0), "a verdict without --check is not a failure");
    assert_eq!(stdout_json(&out)["tight"], false);
}

#[test]
fn superbig_jacobi_example() {
    let out = odlab(&["bracket", "superbig", "--check", "jacobi"]);
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    assert_eq!(v["jacobi_residual"], 0);
    assert_eq!(v["up_to_h"], 3);
}

#[test]
fn failed_checks_exit_with_one() {
    let out = odlab(&["tight", "--config", "configs/com.json", "--check", "tight"]);
    assert_eq!(out.status.code(), Some(1));
    let out = odlab(&["selftest", "--criterion", "2"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout_json(&out)["pass"], true);
    let out = odlab(&["selftest", "--criterion", "1"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("criterion  1 FAIL"));
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(odlab(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(odlab(&["order"]).status.code(), Some(2));
    assert_eq!(odlab(&["bracket", "superbig", "--check", "nonsense"]).status.code(), Some(2));
    assert_eq!(odlab(&["selftest", "--criterion", "11"]).status.code(), Some(2));
    let out = odlab(&["bracket", "terilla", "--check", "jacobi"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["error"]["kind"], "usage");
    assert!(out.stdout.is_empty());
}

#[test]
fn config_errors_are_machine_readable() {
    let out = odlab(&["tight", "--config", "does/not/exist.json"]);
    assert_eq!(out.status.code(), Some(2));
    let v = stderr_json(&out);
    assert_eq!(v["schema"], "odlab/1");
    assert_eq!(v["error"]["kind"], "config");

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{\n  \"schema\": \"odlab/1\",\n  \"operad\": {\"generatorz\": []}\n}\n").unwrap();
    let out = odlab(&["tight", "--config", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let msg = stderr_json(&out)["error"]["message"].as_str().unwrap().to_string();
    assert!(msg.contains("line 3"), "{msg}");

    fs::write(&bad, r#"{"schema": "odlab/2"}"#).unwrap();
    let out = odlab(&["bracket", "big", "--config", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["error"]["kind"], "config");

    let out = odlab(&["order", "--config", "configs/lie.json"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_json(&out)["error"]["message"].as_str().unwrap().contains("algebra"));
}

#[test]
fn output_goes_to_the_requested_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("lie.csv");
    let out = odlab(&[
        "filt",
        "--config",
        "configs/lie.json",
        "--arity",
        "3",
        "--format",
        "csv",
        "--output",
        path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let text = fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("p1,p2,p3,dim\n"));
    assert!(text.contains("2,2,2,2\n"));

    let out = Command::new(env!("CARGO_BIN_EXE_odlab"))
        .args(["tight", "--config", "configs/lie.json", "--output", "verdict.json"])
        .env("ODLAB_OUTPUT_DIR", dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let v: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("verdict.json")).unwrap()).unwrap();
    assert_eq!(v["tight"], true);
}

#[test]
fn thread_count_does_not_change_output() {
    let one = odlab(&["--threads", "1", "bracket", "superbig", "--check", "order"]);
    let four = odlab(&["--threads", "4", "bracket", "superbig", "--check", "order"]);
    assert_eq!(one.status.code(), Some(0));
    assert_eq!(one.stdout, four.stdout);
    assert_eq!(odlab(&["--threads", "0", "selftest"]).status.code(), Some(2));
}

#[test]
fn shipped_configs_parse_and_schema_lists_every_section() {
    let schema: Value = serde_json::from_str(&fs::read_to_string("schema/odlab-1.schema.json").unwrap()).unwrap();
    let props = schema["properties"].as_object().unwrap();
    for key in ["schema", "algebra", "operator", "operad", "bracket", "output"] {
        assert!(props.contains_key(key), "schema misses `{key}`");
    }
    for entry in fs::read_dir("configs").unwrap() {
        let path = entry.unwrap().path();
        odlab_core::config::RunConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    }
}
