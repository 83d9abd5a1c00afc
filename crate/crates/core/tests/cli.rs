mod common;

use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;

fn write_fixture(dir: &Path, stem: &str) -> (PathBuf, PathBuf) {
    let wasm = dir.join(format!("{stem}.wasm"));
    let abi = dir.join(format!("{stem}.abi"));
    std::fs::write(&wasm, common::wasm(stem)).unwrap();
    std::fs::write(&abi, common::abi(stem)).unwrap();
    (wasm, abi)
}

fn chainprobe(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_chainprobe")).args(args).output().unwrap();
    (
        out.status.code().unwrap(),
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
    )
}

fn analyze(stem: &str, extra: &[&str]) -> (i32, Value) {
    let dir = tempfile::tempdir().unwrap();
    let (wasm, abi) = write_fixture(dir.path(), stem);
    let report = dir.path().join("out.json");
    let mut args = vec!["analyze", "--wasm", wasm.to_str().unwrap(), "--abi", abi.to_str().unwrap(), "--report", report.to_str().unwrap()];
    args.extend(extra);
    let (code, _, err) = chainprobe(&args);
    assert!(code != 2, "{err}");
    (code, serde_json::from_str(&std::fs::read_to_string(report).unwrap()).unwrap())
}

#[test]
fn clean_contract_exits_zero() {
    let (code, r) = analyze("rollback_fixed", &[]);
    assert_eq!(code, 0);
    assert_eq!(r["findings"], Value::Array(vec![]));
    assert_eq!(r["tool"]["name"], "chainprobe");
    assert_eq!(r["contract"]["sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn findings_exit_one() {
    let (code, r) = analyze("rollback_vuln", &[]);
    assert_eq!(code, 1);
    assert_eq!(r["findings"][0]["kind"], "Rollback");
    assert_eq!(r["totals"]["findings"], r["findings"].as_array().unwrap().len());
}

#[test]
fn single_round_misses_the_gate() {
    let (code, r) = analyze("gate", &["--max-rounds", "1"]);
    assert_eq!(code, 0);
    assert_eq!(r["termination"], "round-cap");
    let (code, r) = analyze("gate", &[]);
    assert_eq!(code, 1);
    assert_eq!(r["findings"][0]["round"], 2);
}

#[test]
fn detector_selection() {
    let (code, _) = analyze("rollback_vuln", &["--detectors", "overflow,auth"]);
    assert_eq!(code, 0);
    // the ticket store is unguarded, which only counts under --strict-sensitive
    let count = |r: &Value| r["findings"].as_array().unwrap().len();
    let (_, plain) = analyze("ticket", &["--detectors", "auth"]);
    let (_, strict) = analyze("ticket", &["--detectors", "auth", "--strict-sensitive"]);
    assert_eq!(count(&strict), count(&plain) + 1);
}

#[test]
fn usage_and_input_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let (wasm, abi) = write_fixture(dir.path(), "gate");
    let (w, a) = (wasm.to_str().unwrap(), abi.to_str().unwrap());
    assert_eq!(chainprobe(&["analyze", "--wasm", w]).0, 2);
    assert_eq!(chainprobe(&["analyze", "--wasm", w, "--abi", a, "--format", "xml"]).0, 2);
    assert_eq!(chainprobe(&["analyze", "--wasm", w, "--abi", a, "--detectors", "nonsense"]).0, 2);
    assert_eq!(chainprobe(&["analyze", "--wasm", w, "--abi", a, "--budget-secs", "0"]).0, 2);
    assert_eq!(chainprobe(&["analyze", "--wasm", a, "--abi", a]).0, 2);
    let (code, _, err) = chainprobe(&["analyze", "--wasm", w, "--abi", "/nonexistent.abi"]);
    assert_eq!(code, 2);
    assert_eq!(err.lines().count(), 1, "{err}");
    std::fs::write(&abi, "{\"structs\": 3}").unwrap();
    assert_eq!(chainprobe(&["analyze", "--wasm", w, "--abi", a]).0, 2);
    assert_eq!(chainprobe(&["bogus"]).0, 2);
    assert_eq!(chainprobe(&["--version"]).0, 0);
}

#[test]
fn reports_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let (wasm, abi) = write_fixture(dir.path(), "auth_vuln");
    let run = || chainprobe(&["analyze", "--wasm", wasm.to_str().unwrap(), "--abi", abi.to_str().unwrap(), "--seed", "7"]).1;
    let one = run();
    assert_eq!(one, run());
    let text = chainprobe(&["analyze", "--wasm", wasm.to_str().unwrap(), "--abi", abi.to_str().unwrap(), "--format", "text"]).1;
    assert!(text.contains("[MissingPermissionCheck] action erase"), "{text}");
    assert!(text.contains("terminated: coverage-stall"), "{text}");
}

#[test]
fn batch_mode_writes_one_report_per_contract() {
    let dir = tempfile::tempdir().unwrap();
    for stem in ["overflow_vuln", "overflow_fixed"] {
        write_fixture(dir.path(), stem);
    }
    let out = dir.path().join("reports");
    let (code, _, err) = chainprobe(&["analyze", "--dir", dir.path().to_str().unwrap(), "--report", out.to_str().unwrap()]);
    assert_eq!(code, 1, "{err}");
    let vuln: Value = serde_json::from_str(&std::fs::read_to_string(out.join("overflow_vuln.report.json")).unwrap()).unwrap();
    let fixed: Value = serde_json::from_str(&std::fs::read_to_string(out.join("overflow_fixed.report.json")).unwrap()).unwrap();
    assert_eq!(vuln["findings"][0]["kind"], "IntegerOverflow");
    assert_eq!(fixed["findings"], Value::Array(vec![]));
}

/// Structural check of `v` against the subset of JSON Schema used in
/// docs/report-schema.json: objects, arrays, refs, oneOf, const and enum.
fn conforms(schema: &Value, root: &Value, v: &Value, at: &str) -> Result<(), String> {
    if let Some(r) = schema["$ref"].as_str() {
        let name = r.trim_start_matches("#/$defs/");
        return conforms(&root["$defs"][name], root, v, at);
    }
    if let Some(alts) = schema["oneOf"].as_array() {
        let ok = alts.iter().filter(|s| conforms(s, root, v, at).is_ok()).count();
        return if ok == 1 { Ok(()) } else { Err(format!("{at}: {ok} oneOf branches match")) };
    }
    if let Some(c) = schema.get("const") {
        return if c == v { Ok(()) } else { Err(format!("{at}: expected {c}")) };
    }
    if let Some(e) = schema["enum"].as_array() {
        return if e.contains(v) { Ok(()) } else { Err(format!("{at}: {v} not in enum")) };
    }
    let types: Vec<&str> = match &schema["type"] {
        Value::String(t) => vec![t.as_str()],
        Value::Array(ts) => ts.iter().filter_map(Value::as_str).collect(),
        _ => vec![],
    };
    let type_ok = types.is_empty()
        || types.iter().any(|t| match *t {
            "object" => v.is_object(),
            "array" => v.is_array(),
            "string" => v.is_string(),
            "integer" => v.is_u64() || v.is_i64(),
            "boolean" => v.is_boolean(),
            "null" => v.is_null(),
            _ => false,
        });
    if !type_ok {
        return Err(format!("{at}: {v} is not {types:?}"));
    }
    if let Some(obj) = v.as_object() {
        let props = schema["properties"].as_object();
        for req in schema["required"].as_array().into_iter().flatten() {
            if !obj.contains_key(req.as_str().unwrap()) {
                return Err(format!("{at}: missing {req}"));
            }
        }
        for (k, x) in obj {
            match props.and_then(|p| p.get(k)) {
                Some(s) => conforms(s, root, x, &format!("{at}.{k}"))?,
                None if schema["additionalProperties"] == Value::Bool(false) => return Err(format!("{at}: unexpected {k}")),
                None if schema["additionalProperties"].is_object() => conforms(&schema["additionalProperties"], root, x, &format!("{at}.{k}"))?,
                None => {}
            }
        }
    }
    if let (Some(items), Some(arr)) = (schema.get("items"), v.as_array()) {
        for (i, x) in arr.iter().enumerate() {
            conforms(items, root, x, &format!("{at}[{i}]"))?;
        }
    }
    Ok(())
}

#[test]
fn reports_match_published_schema() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs/report-schema.json");
    let schema: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    for stem in common::all_stems() {
        let (_, r) = analyze(stem, &["--timings"]);
        conforms(&schema, &schema, &r, stem).unwrap();
    }
    let (_, r) = analyze("auth_vuln", &[]);
    assert!(!r["findings"][0]["model"].as_object().unwrap().is_empty());
    conforms(&schema, &schema, &r, "auth_vuln").unwrap();
    // the checker does reject drift
    let mut bad = r.clone();
    bad["rounds"][0]["surprise"] = Value::Bool(true);
    assert!(conforms(&schema, &schema, &bad, "bad").is_err());
}
