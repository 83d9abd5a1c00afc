//! Command-line front end.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use crate::detect::FindingKind;
use crate::driver::{analyze, render_text, AbiSpec, AnalysisConfig, Report};
use crate::wasm::parse_module;

pub const EXIT_CLEAN: i32 = 0;
pub const EXIT_FINDINGS: i32 = 1;
pub const EXIT_ERROR: i32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Text,
}

#[derive(Debug, Parser)]
#[command(name = "chainprobe", version, about = "Concolic vulnerability analyzer for EOSIO WebAssembly contracts")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Analyze one contract, or every `<name>.wasm` + `<name>.abi` pair in a directory.
    Analyze(AnalyzeArgs),
}

#[derive(Debug, clap::Args)]
struct AnalyzeArgs {
    /// Contract binary.
    #[arg(long, required_unless_present = "dir", conflicts_with = "dir")]
    wasm: Option<PathBuf>,
    /// ABI JSON describing the contract's actions.
    #[arg(long, required_unless_present = "dir", conflicts_with = "dir")]
    abi: Option<PathBuf>,
    /// Contract directory; reports go to `<name>.report.<fmt>` next to each contract unless --report names a directory.
    #[arg(long)]
    dir: Option<PathBuf>,
    /// Report destination; stdout when omitted.
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    #[arg(long, default_value_t = 10)]
    max_rounds: u32,
    #[arg(long, default_value_t = 3600, value_parser = clap::value_parser!(u64).range(1..))]
    budget_secs: u64,
    /// Wall-clock limit for exploring a single action.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    action_budget_secs: Option<u64>,
    #[arg(long, default_value_t = 16)]
    loop_bound: u32,
    #[arg(long, default_value_t = 4096, value_parser = clap::value_parser!(u64).range(1..))]
    max_states: u64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Comma-separated detectors: rollback, blockinfo, auth, overflow (default all).
    #[arg(long, value_delimiter = ',')]
    detectors: Vec<String>,
    /// Count table inserts as sensitive for the permission check.
    #[arg(long)]
    strict_sensitive: bool,
    /// Account the contract is deployed to.
    #[arg(long, default_value = "contract")]
    account: String,
    /// Include per-round wall-clock times (makes reports non-reproducible).
    #[arg(long)]
    timings: bool,
}

struct Failure(String);

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure(e.to_string())
    }
}

fn config(a: &AnalyzeArgs) -> Result<AnalysisConfig, Failure> {
    let mut cfg = AnalysisConfig {
        max_rounds: a.max_rounds,
        budget: Duration::from_secs(a.budget_secs),
        seed: a.seed,
        timings: a.timings,
        account: crate::chain::name_from_str(&a.account).ok_or_else(|| Failure(format!("invalid account name `{}`", a.account)))?,
        ..AnalysisConfig::default()
    };
    cfg.engine.budget.loop_bound = a.loop_bound;
    cfg.engine.budget.max_states = a.max_states as usize;
    cfg.engine.budget.action_time = a.action_budget_secs.map(Duration::from_secs);
    cfg.detectors.strict_sensitive = a.strict_sensitive;
    if !a.detectors.is_empty() {
        cfg.detectors.enabled = a
            .detectors
            .iter()
            .map(|d| FindingKind::parse(d).ok_or_else(|| Failure(format!("unknown detector `{d}`"))))
            .collect::<Result<_, _>>()?;
    }
    Ok(cfg)
}

/// Analyzes one contract and returns the rendered report and whether it has findings.
fn analyze_one(wasm: &Path, abi: &Path, cfg: &AnalysisConfig, format: Format) -> Result<(String, bool), Failure> {
    let bytes = std::fs::read(wasm).map_err(|e| Failure(format!("{}: {e}", wasm.display())))?;
    let abi_text = std::fs::read_to_string(abi).map_err(|e| Failure(format!("{}: {e}", abi.display())))?;
    let module = parse_module(&bytes).map_err(|e| Failure(format!("{}: {e}", wasm.display())))?;
    let spec = AbiSpec::parse(&abi_text).map_err(|e| Failure(format!("{}: {e}", abi.display())))?;
    let analysis = analyze(&module, &spec, cfg)?;
    let report = Report::new(&bytes, cfg, &analysis);
    let text = match format {
        Format::Json => report.to_json(),
        Format::Text => render_text(&report),
    };
    Ok((text, !report.findings.is_empty()))
}

fn write_out(path: Option<&Path>, text: &str) -> Result<(), Failure> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| Failure(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run_analyze(a: &AnalyzeArgs) -> Result<i32, Failure> {
    let cfg = config(a)?;
    let ext = match a.format {
        Format::Json => "json",
        Format::Text => "txt",
    };
    let Some(dir) = &a.dir else {
        let (text, found) = analyze_one(a.wasm.as_deref().unwrap(), a.abi.as_deref().unwrap(), &cfg, a.format)?;
        write_out(a.report.as_deref(), &text)?;
        return Ok(if found { EXIT_FINDINGS } else { EXIT_CLEAN });
    };
    let mut pairs = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| Failure(format!("{}: {e}", dir.display())))? {
        let p = entry?.path();
        if p.extension().is_some_and(|e| e == "wasm") {
            let abi = p.with_extension("abi");
            if abi.exists() {
                pairs.push((p, abi));
            } else {
                log::warn!("{}: no matching .abi, skipped", p.display());
            }
        }
    }
    pairs.sort();
    if pairs.is_empty() {
        return Err(Failure(format!("{}: no .wasm/.abi pairs", dir.display())));
    }
    let out_dir = a.report.clone().unwrap_or_else(|| dir.clone());
    std::fs::create_dir_all(&out_dir).map_err(|e| Failure(format!("{}: {e}", out_dir.display())))?;
    let results: Vec<Result<bool, Failure>> = pairs
        .par_iter()
        .map(|(w, abi)| {
            let (text, found) = analyze_one(w, abi, &cfg, a.format)?;
            let stem = w.file_stem().unwrap_or_default().to_string_lossy();
            write_out(Some(&out_dir.join(format!("{stem}.report.{ext}"))), &text)?;
            Ok(found)
        })
        .collect();
    let mut any = false;
    for r in results {
        any |= r?;
    }
    Ok(if any { EXIT_FINDINGS } else { EXIT_CLEAN })
}

/// Parses `argv` (including the program name), runs the command and
/// returns the process exit code.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_CLEAN };
            let _ = e.print();
            return code;
        }
    };
    let result = match &cli.command {
        Command::Analyze(a) => run_analyze(a),
    };
    match result {
        Ok(code) => code,
        Err(Failure(msg)) => {
            eprintln!("chainprobe: {msg}");
            EXIT_ERROR
        }
    }
}
