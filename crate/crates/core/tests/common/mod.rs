//! Fixture loading shared by the integration tests.
#![allow(dead_code)]

use std::path::PathBuf;

use chainprobe::chain::name;

pub const VULNERABLE: [(&str, &str); 4] = [
    ("rollback_vuln", "Rollback"),
    ("blockinfo_vuln", "BlockchainInfoDependency"),
    ("auth_vuln", "MissingPermissionCheck"),
    ("overflow_vuln", "IntegerOverflow"),
];
pub const FIXED: [&str; 4] = ["rollback_fixed", "blockinfo_fixed", "auth_fixed", "overflow_fixed"];

pub fn fixture_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

/// Replaces each `N:<account>` token with the account's i64 encoding.
pub fn expand_names(src: &str) -> String {
    let mut out = String::with_capacity(src.len());
    let mut rest = src;
    while let Some(i) = rest.find("N:") {
        out.push_str(&rest[..i]);
        let tail = &rest[i + 2..];
        let end = tail.find(|c: char| !(c.is_ascii_lowercase() || ('1'..='5').contains(&c) || c == '.')).unwrap_or(tail.len());
        out.push_str(&(name(&tail[..end]) as i64).to_string());
        rest = &tail[end..];
    }
    out.push_str(rest);
    out
}

/// Compiles `<stem>.wat` to a WASM binary.
pub fn wasm(stem: &str) -> Vec<u8> {
    let src = std::fs::read_to_string(fixture_dir().join(format!("{stem}.wat"))).unwrap();
    wat::parse_str(expand_names(&src)).unwrap()
}

pub fn abi(stem: &str) -> String {
    std::fs::read_to_string(fixture_dir().join(format!("{stem}.abi"))).unwrap()
}

pub fn all_stems() -> Vec<&'static str> {
    let mut v: Vec<&str> = VULNERABLE.iter().map(|(s, _)| *s).collect();
    v.extend(FIXED);
    v.extend(["ticket", "gate"]);
    v
}
