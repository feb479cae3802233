//! Full acceptance suite: runs `selfsim verify-all` twice, prints one
//! PASS/FAIL line per criterion and requires every criterion to pass and
//! the two reports to be byte-identical.

use std::fs;
use std::process::Command;

use serde_json::Value;

const CRITERIA: usize = 13;

fn verify_all(report: &std::path::Path) -> (Option<i32>, Vec<u8>) {
    let out = Command::new(env!("CARGO_BIN_EXE_selfsim"))
        .args(["verify-all", "--report", report.to_str().unwrap()])
        .output()
        .expect("binary runs");
    (out.status.code(), fs::read(report).expect("report written"))
}

fn line(c: &Value) -> String {
    format!(
        "{} [{:>2}] {}: measured {} (threshold {}) {}",
        if c["passed"].as_bool().unwrap() { "PASS" } else { "FAIL" },
        c["id"],
        c["name"].as_str().unwrap(),
        c["measured"],
        c["threshold"].as_str().unwrap(),
        c["detail"].as_str().unwrap(),
    )
}

#[test]
fn acceptance_suite() {
    let dir = tempfile::tempdir().unwrap();
    let (code_a, bytes_a) = verify_all(&dir.path().join("a.json"));
    let (code_b, bytes_b) = verify_all(&dir.path().join("b.json"));

    let report: Value = serde_json::from_slice(&bytes_a).unwrap();
    let criteria = report["criteria"].as_array().unwrap();
    assert_eq!(criteria.len(), CRITERIA);
    for c in criteria {
        println!("{}", line(c));
    }
    let rerun_identical = bytes_a == bytes_b;
    println!(
        "{} [--] repeated verify-all reports byte-identical ({} bytes)",
        if rerun_identical { "PASS" } else { "FAIL" },
        bytes_a.len()
    );

    let failed: Vec<_> = criteria
        .iter()
        .filter(|c| !c["passed"].as_bool().unwrap())
        .map(|c| c["id"].to_string())
        .collect();
    assert!(failed.is_empty(), "failed criteria: {}", failed.join(", "));
    assert!(report["all_passed"].as_bool().unwrap());
    assert_eq!(code_a, Some(0));
    assert_eq!(code_b, Some(0));
    assert!(rerun_identical, "verify-all reports differ between runs");
}
