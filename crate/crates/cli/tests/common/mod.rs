#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

pub fn crate_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

pub fn fixture(name: &str) -> PathBuf {
    crate_dir().join("tests/fixtures").join(name)
}

/// Runs the binary from the crate directory so relative paths are stable.
pub fn protoselect(args: &[&str]) -> Output {
    protoselect_env(args, &[])
}

pub fn protoselect_env(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_protoselect"));
    cmd.current_dir(crate_dir())
        .args(args)
        .env_remove("PROTOSELECT_THREADS");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

pub fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("utf-8 output")
}

pub fn write_csv(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn load_schema(name: &str) -> Value {
    let text = std::fs::read_to_string(crate_dir().join("schema").join(name)).unwrap();
    serde_json::from_str(&text).unwrap()
}

/// Replaces `{"$ref": "<file>"}` nodes with the referenced schema.
fn inline_refs(node: &mut Value) {
    match node {
        Value::Object(map) => {
            if let Some(Value::String(target)) = map.get("$ref") {
                if target.ends_with(".schema.json") {
                    let mut inner = load_schema(target);
                    if let Value::Object(m) = &mut inner {
                        m.remove("$id");
                        m.remove("$schema");
                    }
                    *node = inner;
                    inline_refs(node);
                    return;
                }
            }
            map.values_mut().for_each(inline_refs);
        }
        Value::Array(items) => items.iter_mut().for_each(inline_refs),
        _ => {}
    }
}

pub fn assert_schema(name: &str, instance: &Value) {
    let mut schema = load_schema(name);
    inline_refs(&mut schema);
    let validator = jsonschema::validator_for(&schema).expect("schema compiles");
    let errors: Vec<String> = validator
        .iter_errors(instance)
        .map(|e| format!("{} at {}", e, e.instance_path()))
        .collect();
    assert!(errors.is_empty(), "{name}: {errors:#?}");
}
