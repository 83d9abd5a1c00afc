mod common;

use chainprobe::driver::{analyze, AbiSpec, AnalysisConfig, Termination};
use chainprobe::wasm::parse_module;

fn run(stem: &str) -> chainprobe::driver::Analysis {
    let m = parse_module(&common::wasm(stem)).unwrap();
    let abi = AbiSpec::parse(&common::abi(stem)).unwrap();
    analyze(&m, &abi, &AnalysisConfig::default()).unwrap()
}

#[test]
fn vulnerable_contracts_report_their_class_only() {
    for (stem, kind) in common::VULNERABLE {
        let a = run(stem);
        let kinds: Vec<String> = a.findings.iter().map(|f| f.kind.to_string()).collect();
        assert!(!kinds.is_empty() && kinds.iter().all(|k| k == kind), "{stem}: {kinds:?} {:?}", a.diagnostics);
    }
}

#[test]
fn fixed_contracts_are_clean() {
    for stem in common::FIXED {
        let a = run(stem);
        assert!(a.findings.is_empty(), "{stem}: {:?}", a.findings.iter().map(|f| (f.kind, &f.action, f.pc)).collect::<Vec<_>>());
    }
}

#[test]
fn missing_auth_needs_a_stored_offer() {
    let a = run("auth_vuln");
    assert!(a.rounds[0].findings.is_empty());
    assert_eq!(a.rounds[0].transaction.as_ref().unwrap().action, "create");
    assert!(a.rounds[1].findings.iter().any(|f| f.action == "erase"));
}

#[test]
fn corpus_terminates_before_the_cap() {
    for stem in common::all_stems() {
        let a = run(stem);
        assert!(matches!(a.termination, Termination::CoverageStall | Termination::NoDbChange), "{stem}: {:?}", a.termination);
    }
}
