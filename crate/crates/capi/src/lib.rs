//! C interface to the chainprobe analyzer.
//!
//! Objects are opaque heap handles created by a `cp_*_new` or `cp_*_load`
//! call and released with the matching `cp_*_free`. Every fallible call
//! returns a [`CpStatus`]; on failure, [`cp_last_error`] describes the
//! problem for the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Duration;

use chainprobe::detect::FindingKind;
use chainprobe::driver::{analyze, render_text, AbiSpec, AnalysisConfig, AnalyzeError, Report};
use chainprobe::wasm::{parse_module, WasmModule};

/// Result of a C API call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CpStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// The WebAssembly binary could not be decoded or failed validation.
    InvalidModule = 3,
    /// The ABI JSON could not be parsed or does not match the contract.
    InvalidAbi = 4,
    /// An argument value is out of range or unknown.
    InvalidArgument = 5,
    /// The analyzer panicked. The handles passed in remain valid.
    Internal = 6,
}

/// A decoded contract together with its ABI.
pub struct CpContract {
    bytes: Vec<u8>,
    module: WasmModule,
    abi: AbiSpec,
}

/// Analysis settings. Starts from the command-line defaults.
pub struct CpConfig {
    inner: AnalysisConfig,
}

/// Outcome of one analysis.
pub struct CpReport {
    json: CString,
    text: CString,
    findings: usize,
    rounds: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn fail(status: CpStatus, msg: impl Into<String>) -> CpStatus {
    set_error(msg);
    status
}

/// Runs `f`, turning a panic into [`CpStatus::Internal`].
fn guard(f: impl FnOnce() -> CpStatus) -> CpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => {
            if s == CpStatus::Ok {
                set_error("");
            }
            s
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "unknown panic".into());
            fail(CpStatus::Internal, format!("internal error: {msg}"))
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, CpStatus> {
    if p.is_null() {
        return Err(fail(CpStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| fail(CpStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

/// Message for the last failed call on this thread, or an empty string.
/// Valid until the next C API call on the same thread.
#[no_mangle]
pub extern "C" fn cp_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn cp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Decodes a contract from `wasm_len` bytes at `wasm` and an ABI JSON
/// string. On success `*out` receives a handle for [`cp_contract_free`].
///
/// # Safety
/// `wasm` must point to `wasm_len` readable bytes, `abi_json` must be a
/// NUL-terminated string and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cp_contract_load(wasm: *const u8, wasm_len: usize, abi_json: *const c_char, out: *mut *mut CpContract) -> CpStatus {
    guard(|| {
        if out.is_null() {
            return fail(CpStatus::NullPointer, "out is null");
        }
        *out = std::ptr::null_mut();
        if wasm.is_null() {
            return fail(CpStatus::NullPointer, "wasm is null");
        }
        let abi_text = match str_arg(abi_json, "abi_json") {
            Ok(s) => s,
            Err(s) => return s,
        };
        let bytes = std::slice::from_raw_parts(wasm, wasm_len).to_vec();
        let module = match parse_module(&bytes) {
            Ok(m) => m,
            Err(e) => return fail(CpStatus::InvalidModule, e.to_string()),
        };
        let abi = match AbiSpec::parse(abi_text) {
            Ok(a) => a,
            Err(e) => return fail(CpStatus::InvalidAbi, e.to_string()),
        };
        *out = Box::into_raw(Box::new(CpContract { bytes, module, abi }));
        CpStatus::Ok
    })
}

/// Releases a contract. Null is ignored.
///
/// # Safety
/// `contract` must come from [`cp_contract_load`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn cp_contract_free(contract: *mut CpContract) {
    if !contract.is_null() {
        drop(Box::from_raw(contract));
    }
}

/// New configuration with default settings. Never null.
#[no_mangle]
pub extern "C" fn cp_config_new() -> *mut CpConfig {
    Box::into_raw(Box::new(CpConfig { inner: AnalysisConfig::default() }))
}

/// Releases a configuration. Null is ignored.
///
/// # Safety
/// `config` must come from [`cp_config_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn cp_config_free(config: *mut CpConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

unsafe fn with_config(config: *mut CpConfig, f: impl FnOnce(&mut AnalysisConfig) -> CpStatus) -> CpStatus {
    guard(|| match config.as_mut() {
        Some(c) => f(&mut c.inner),
        None => fail(CpStatus::NullPointer, "config is null"),
    })
}

/// # Safety
/// `config` must be a live handle from [`cp_config_new`].
#[no_mangle]
pub unsafe extern "C" fn cp_config_set_max_rounds(config: *mut CpConfig, rounds: u32) -> CpStatus {
    with_config(config, |c| {
        c.max_rounds = rounds;
        CpStatus::Ok
    })
}

/// Total wall-clock budget in seconds; must be at least 1.
///
/// # Safety
/// `config` must be a live handle from [`cp_config_new`].
#[no_mangle]
pub unsafe extern "C" fn cp_config_set_budget_secs(config: *mut CpConfig, secs: u64) -> CpStatus {
    with_config(config, |c| {
        if secs == 0 {
            return fail(CpStatus::InvalidArgument, "budget must be at least 1 second");
        }
        c.budget = Duration::from_secs(secs);
        CpStatus::Ok
    })
}

/// # Safety
/// `config` must be a live handle from [`cp_config_new`].
#[no_mangle]
pub unsafe extern "C" fn cp_config_set_seed(config: *mut CpConfig, seed: u64) -> CpStatus {
    with_config(config, |c| {
        c.seed = seed;
        CpStatus::Ok
    })
}

/// # Safety
/// `config` must be a live handle from [`cp_config_new`].
#[no_mangle]
pub unsafe extern "C" fn cp_config_set_loop_bound(config: *mut CpConfig, bound: u32) -> CpStatus {
    with_config(config, |c| {
        c.engine.budget.loop_bound = bound;
        CpStatus::Ok
    })
}

/// # Safety
/// `config` must be a live handle from [`cp_config_new`].
#[no_mangle]
pub unsafe extern "C" fn cp_config_set_max_states(config: *mut CpConfig, states: usize) -> CpStatus {
    with_config(config, |c| {
        if states == 0 {
            return fail(CpStatus::InvalidArgument, "max_states must be positive");
        }
        c.engine.budget.max_states = states;
        CpStatus::Ok
    })
}

/// Restricts the run to a comma-separated detector list such as
/// `"rollback,auth"`.
///
/// # Safety
/// `config` must be a live handle and `list` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn cp_config_set_detectors(config: *mut CpConfig, list: *const c_char) -> CpStatus {
    let list = match str_arg(list, "list") {
        Ok(s) => s,
        Err(s) => return s,
    };
    with_config(config, |c| {
        let mut enabled = std::collections::BTreeSet::new();
        for d in list.split(',').map(str::trim).filter(|d| !d.is_empty()) {
            match FindingKind::parse(d) {
                Some(k) => {
                    enabled.insert(k);
                }
                None => return fail(CpStatus::InvalidArgument, format!("unknown detector `{d}`")),
            }
        }
        c.detectors.enabled = enabled;
        CpStatus::Ok
    })
}

/// # Safety
/// `config` must be a live handle from [`cp_config_new`].
#[no_mangle]
pub unsafe extern "C" fn cp_config_set_strict_sensitive(config: *mut CpConfig, on: bool) -> CpStatus {
    with_config(config, |c| {
        c.detectors.strict_sensitive = on;
        CpStatus::Ok
    })
}

/// Analyzes `contract`. `config` may be null for defaults. On success
/// `*out` receives a report for [`cp_report_free`].
///
/// # Safety
/// `contract` and a non-null `config` must be live handles; `out` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn cp_analyze(contract: *const CpContract, config: *const CpConfig, out: *mut *mut CpReport) -> CpStatus {
    guard(|| {
        if out.is_null() {
            return fail(CpStatus::NullPointer, "out is null");
        }
        *out = std::ptr::null_mut();
        let Some(c) = contract.as_ref() else {
            return fail(CpStatus::NullPointer, "contract is null");
        };
        let default;
        let cfg = match config.as_ref() {
            Some(k) => &k.inner,
            None => {
                default = AnalysisConfig::default();
                &default
            }
        };
        let analysis = match analyze(&c.module, &c.abi, cfg) {
            Ok(a) => a,
            Err(e @ (AnalyzeError::Load(_) | AnalyzeError::Invalid(_))) => return fail(CpStatus::InvalidModule, e.to_string()),
            Err(e) => return fail(CpStatus::InvalidAbi, e.to_string()),
        };
        let report = Report::new(&c.bytes, cfg, &analysis);
        let cstr = |s: String| CString::new(s).unwrap_or_default();
        *out = Box::into_raw(Box::new(CpReport {
            json: cstr(report.to_json()),
            text: cstr(render_text(&report)),
            findings: report.findings.len(),
            rounds: report.rounds.len(),
        }));
        CpStatus::Ok
    })
}

/// The report as JSON. Owned by `report`; null if `report` is null.
///
/// # Safety
/// `report` must be null or a live handle from [`cp_analyze`].
#[no_mangle]
pub unsafe extern "C" fn cp_report_json(report: *const CpReport) -> *const c_char {
    report.as_ref().map_or(std::ptr::null(), |r| r.json.as_ptr())
}

/// The report as plain text. Owned by `report`; null if `report` is null.
///
/// # Safety
/// `report` must be null or a live handle from [`cp_analyze`].
#[no_mangle]
pub unsafe extern "C" fn cp_report_text(report: *const CpReport) -> *const c_char {
    report.as_ref().map_or(std::ptr::null(), |r| r.text.as_ptr())
}

/// Number of findings, 0 for a null report.
///
/// # Safety
/// `report` must be null or a live handle from [`cp_analyze`].
#[no_mangle]
pub unsafe extern "C" fn cp_report_finding_count(report: *const CpReport) -> usize {
    report.as_ref().map_or(0, |r| r.findings)
}

/// Number of analysis rounds run, 0 for a null report.
///
/// # Safety
/// `report` must be null or a live handle from [`cp_analyze`].
#[no_mangle]
pub unsafe extern "C" fn cp_report_round_count(report: *const CpReport) -> usize {
    report.as_ref().map_or(0, |r| r.rounds)
}

/// Releases a report. Null is ignored.
///
/// # Safety
/// `report` must come from [`cp_analyze`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn cp_report_free(report: *mut CpReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}
