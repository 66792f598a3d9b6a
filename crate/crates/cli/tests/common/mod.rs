#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

pub fn lexharm(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_lexharm"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

/// Runs the binary, expecting success, and parses stdout.
pub fn run(args: &[&str]) -> Value {
    let out = lexharm(args);
    assert!(
        out.status.success(),
        "lexharm {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

/// Exit status and the structured error printed on stderr.
pub fn run_err(args: &[&str]) -> (i32, Option<Value>) {
    let out = lexharm(args);
    let err = serde_json::from_slice(&out.stderr).ok();
    (out.status.code().unwrap_or(-1), err)
}

/// Compares against `fixtures/golden/<name>.json`. Set LEXHARM_BLESS=1 to
/// rewrite the file.
pub fn golden(name: &str, actual: &Value) {
    let path = fixture("golden").join(format!("{name}.json"));
    if std::env::var_os("LEXHARM_BLESS").is_some() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, serde_json::to_string_pretty(actual).unwrap() + "\n").unwrap();
        return;
    }
    let text = std::fs::read_to_string(&path)
        .unwrap_or_else(|_| panic!("missing golden file {}", path.display()));
    let expected: Value = serde_json::from_str(&text).unwrap();
    assert_eq!(actual, &expected, "golden mismatch for {name}");
}

pub fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}
