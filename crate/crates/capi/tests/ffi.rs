use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use chainprobe::chain::name;
use chainprobe_capi::*;

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures")
}

/// Compiles a core fixture, expanding `N:<account>` tokens.
fn fixture(stem: &str) -> (Vec<u8>, CString) {
    let src = std::fs::read_to_string(fixtures().join(format!("{stem}.wat"))).unwrap();
    let mut out = String::new();
    let mut rest = src.as_str();
    while let Some(i) = rest.find("N:") {
        out.push_str(&rest[..i]);
        let tail = &rest[i + 2..];
        let end = tail.find(|c: char| !(c.is_ascii_lowercase() || ('1'..='5').contains(&c) || c == '.')).unwrap_or(tail.len());
        out.push_str(&(name(&tail[..end]) as i64).to_string());
        rest = &tail[end..];
    }
    out.push_str(rest);
    let abi = std::fs::read_to_string(fixtures().join(format!("{stem}.abi"))).unwrap();
    (wat::parse_str(out).unwrap(), CString::new(abi).unwrap())
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(cp_last_error()) }.to_string_lossy().into_owned()
}

fn load(stem: &str) -> *mut CpContract {
    let (wasm, abi) = fixture(stem);
    let mut c = ptr::null_mut();
    assert_eq!(unsafe { cp_contract_load(wasm.as_ptr(), wasm.len(), abi.as_ptr(), &mut c) }, CpStatus::Ok);
    assert!(!c.is_null());
    c
}

#[test]
fn analyze_reports_findings() {
    let c = load("rollback_vuln");
    let mut r = ptr::null_mut();
    unsafe {
        assert_eq!(cp_analyze(c, ptr::null(), &mut r), CpStatus::Ok);
        assert_eq!(cp_report_finding_count(r), 1);
        assert!(cp_report_round_count(r) >= 1);
        let json: serde_json::Value = serde_json::from_str(CStr::from_ptr(cp_report_json(r)).to_str().unwrap()).unwrap();
        assert_eq!(json["findings"][0]["kind"], "Rollback");
        assert!(CStr::from_ptr(cp_report_text(r)).to_str().unwrap().contains("[Rollback]"));
        cp_report_free(r);
        cp_contract_free(c);
    }
}

#[test]
fn config_is_honored() {
    let c = load("gate");
    unsafe {
        let cfg = cp_config_new();
        assert_eq!(cp_config_set_max_rounds(cfg, 1), CpStatus::Ok);
        assert_eq!(cp_config_set_seed(cfg, 7), CpStatus::Ok);
        let mut r = ptr::null_mut();
        assert_eq!(cp_analyze(c, cfg, &mut r), CpStatus::Ok);
        assert_eq!(cp_report_finding_count(r), 0);
        assert_eq!(cp_report_round_count(r), 1);
        cp_report_free(r);

        let d = CString::new("rollback, blockinfo").unwrap();
        assert_eq!(cp_config_set_detectors(cfg, d.as_ptr()), CpStatus::Ok);
        assert_eq!(cp_config_set_max_rounds(cfg, 10), CpStatus::Ok);
        assert_eq!(cp_analyze(c, cfg, &mut r), CpStatus::Ok);
        assert_eq!(cp_report_finding_count(r), 0);
        cp_report_free(r);

        let bad = CString::new("rollback,bogus").unwrap();
        assert_eq!(cp_config_set_detectors(cfg, bad.as_ptr()), CpStatus::InvalidArgument);
        assert!(last_error().contains("bogus"));
        assert_eq!(cp_config_set_budget_secs(cfg, 0), CpStatus::InvalidArgument);
        assert_eq!(cp_config_set_max_states(cfg, 0), CpStatus::InvalidArgument);
        assert_eq!(cp_config_set_loop_bound(cfg, 4), CpStatus::Ok);
        assert_eq!(cp_config_set_strict_sensitive(cfg, true), CpStatus::Ok);
        assert_eq!(last_error(), "");
        cp_config_free(cfg);
        cp_contract_free(c);
    }
}

#[test]
fn errors_are_reported() {
    let (wasm, abi) = fixture("rollback_vuln");
    let mut c = ptr::null_mut();
    unsafe {
        assert_eq!(cp_contract_load(ptr::null(), 0, abi.as_ptr(), &mut c), CpStatus::NullPointer);
        assert!(c.is_null());
        assert_eq!(cp_contract_load(wasm.as_ptr(), wasm.len(), ptr::null(), &mut c), CpStatus::NullPointer);
        assert_eq!(cp_contract_load(wasm.as_ptr(), wasm.len(), abi.as_ptr(), ptr::null_mut()), CpStatus::NullPointer);
        assert_eq!(cp_contract_load(wasm.as_ptr(), 5, abi.as_ptr(), &mut c), CpStatus::InvalidModule);
        assert!(!last_error().is_empty());
        let junk = CString::new("{not json").unwrap();
        assert_eq!(cp_contract_load(wasm.as_ptr(), wasm.len(), junk.as_ptr(), &mut c), CpStatus::InvalidAbi);
        let latin1 = CString::new(vec![0xffu8, 0xfe]).unwrap();
        assert_eq!(cp_contract_load(wasm.as_ptr(), wasm.len(), latin1.as_ptr(), &mut c), CpStatus::InvalidUtf8);

        let mut r = ptr::null_mut();
        assert_eq!(cp_analyze(ptr::null(), ptr::null(), &mut r), CpStatus::NullPointer);
        assert!(r.is_null());
        assert_eq!(cp_config_set_seed(ptr::null_mut(), 1), CpStatus::NullPointer);
        assert!(cp_report_json(ptr::null()).is_null());
        assert_eq!(cp_report_finding_count(ptr::null()), 0);
        cp_report_free(ptr::null_mut());
        cp_contract_free(ptr::null_mut());
        cp_config_free(ptr::null_mut());
    }
    let v = unsafe { CStr::from_ptr(cp_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("include/chainprobe.h")).unwrap();
    let src = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("src/lib.rs")).unwrap();
    let exports: Vec<&str> = src.split("extern \"C\" fn ").skip(1).map(|s| &s[..s.find('(').unwrap()]).collect();
    assert!(exports.len() >= 15);
    for f in exports {
        assert!(header.contains(&format!("{f}(")), "{f} missing from header");
    }
    assert!(header.contains("typedef struct CpContract CpContract;"));
}

/// Builds the C smoke program against the header and static library.
#[test]
fn c_program_links_and_runs() {
    let Ok(cc) = which_cc() else {
        eprintln!("no C compiler found, skipping");
        return;
    };
    let target = std::env::current_exe().unwrap().parent().unwrap().parent().unwrap().to_path_buf();
    let lib = target.join("libchainprobe_capi.a");
    if !lib.exists() {
        eprintln!("{} not built, skipping", lib.display());
        return;
    }
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let exe = dir.join("smoke");
    let manifest = Path::new(env!("CARGO_MANIFEST_DIR"));
    let status = Command::new(&cc)
        .arg("-std=c11")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(manifest.join("tests/c/smoke.c"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success(), "C compile failed");
    let (wasm, abi) = fixture("rollback_vuln");
    std::fs::write(dir.join("c.wasm"), wasm).unwrap();
    std::fs::write(dir.join("c.abi"), abi.as_bytes()).unwrap();
    let out = Command::new(&exe).arg(dir.join("c.wasm")).arg(dir.join("c.abi")).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let line = String::from_utf8(out.stdout).unwrap();
    let mut it = line.split_whitespace().map(|n| n.parse::<usize>().unwrap());
    assert_eq!(it.next(), Some(1));
    assert!(it.next().unwrap() >= 1);
}

fn which_cc() -> Result<String, ()> {
    ["cc", "gcc", "clang"]
        .into_iter()
        .find(|c| Command::new(c).arg("--version").output().is_ok_and(|o| o.status.success()))
        .map(String::from)
        .ok_or(())
}
