//! Machine-readable and text summaries of an analysis.

use std::fmt::Write as _;

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::{Analysis, AnalysisConfig, ChangeEntry, Transaction};
use crate::detect::{Finding, FindingKind};

/// Bumped whenever a field changes meaning or disappears.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    CoverageStall,
    NoDbChange,
    RoundCap,
    TimeBudget,
}

impl std::fmt::Display for Termination {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Termination::CoverageStall => "coverage-stall",
            Termination::NoDbChange => "no-db-change",
            Termination::RoundCap => "round-cap",
            Termination::TimeBudget => "time-budget",
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Tool {
    pub name: &'static str,
    pub version: &'static str,
}

#[derive(Debug, Clone, Serialize)]
pub struct Contract {
    pub sha256: String,
    pub size: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConfigEcho {
    pub max_rounds: u32,
    pub budget_secs: u64,
    pub loop_bound: u32,
    pub max_states: usize,
    pub seed: u64,
    pub detectors: Vec<FindingKind>,
    pub strict_sensitive: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Selected {
    pub action: String,
    pub state: u64,
    pub increment: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct RoundSummary {
    pub round: u32,
    pub states: usize,
    pub aborted: usize,
    pub coverage: usize,
    pub coverage_delta: usize,
    pub new_findings: usize,
    pub selected: Option<Selected>,
    pub transaction: Option<Transaction>,
    pub replay_status: Option<String>,
    pub changelog: Vec<ChangeEntry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub duration_ms: Option<u64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReportFinding {
    /// Round in which the finding was first seen.
    pub round: u32,
    #[serde(flatten)]
    pub finding: Finding,
}

#[derive(Debug, Clone, Serialize)]
pub struct Totals {
    pub rounds: usize,
    pub states: usize,
    pub coverage: usize,
    pub findings: usize,
    pub transactions: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub schema_version: u32,
    pub tool: Tool,
    pub contract: Contract,
    pub config: ConfigEcho,
    pub rounds: Vec<RoundSummary>,
    pub findings: Vec<ReportFinding>,
    pub termination: Termination,
    pub totals: Totals,
    pub diagnostics: Vec<String>,
}

impl Report {
    pub fn new(wasm: &[u8], cfg: &AnalysisConfig, a: &Analysis) -> Report {
        let rounds: Vec<RoundSummary> = a
            .rounds
            .iter()
            .map(|r| {
                let all = r.runs.iter().flat_map(|(_, run)| run.terminals.iter());
                let selected = r.selected.as_ref().zip(r.selected_state()).map(|((action, _), s)| Selected {
                    action: action.clone(),
                    state: s.id,
                    increment: r.increment,
                });
                RoundSummary {
                    round: r.round,
                    states: all.clone().count(),
                    aborted: all.filter(|s| s.status.is_aborted()).count(),
                    coverage: r.coverage_after,
                    coverage_delta: r.coverage_delta(),
                    new_findings: r.findings.len(),
                    selected,
                    transaction: r.transaction.clone(),
                    replay_status: r.replay.as_ref().map(|p| format!("{:?}", p.status)),
                    changelog: r.replay.as_ref().map(|p| p.changelog.clone()).unwrap_or_default(),
                    duration_ms: cfg.timings.then_some(r.duration.as_millis() as u64),
                }
            })
            .collect();
        let mut findings: Vec<ReportFinding> = a
            .rounds
            .iter()
            .flat_map(|r| r.findings.iter().map(move |f| ReportFinding { round: r.round, finding: f.clone() }))
            .collect();
        findings.sort_by(|x, y| (x.finding.kind, &x.finding.action, x.finding.pc).cmp(&(y.finding.kind, &y.finding.action, y.finding.pc)));
        let mut diagnostics = a.diagnostics.clone();
        diagnostics.sort();
        diagnostics.dedup();
        Report {
            schema_version: SCHEMA_VERSION,
            tool: Tool { name: env!("CARGO_PKG_NAME"), version: env!("CARGO_PKG_VERSION") },
            contract: Contract { sha256: hex::encode(Sha256::digest(wasm)), size: wasm.len() },
            config: ConfigEcho {
                max_rounds: cfg.max_rounds,
                budget_secs: cfg.budget.as_secs(),
                loop_bound: cfg.engine.budget.loop_bound,
                max_states: cfg.engine.budget.max_states,
                seed: cfg.seed,
                detectors: cfg.detectors.enabled.iter().copied().collect(),
                strict_sensitive: cfg.detectors.strict_sensitive,
            },
            totals: Totals {
                rounds: rounds.len(),
                states: rounds.iter().map(|r| r.states).sum(),
                coverage: a.coverage.len(),
                findings: findings.len(),
                transactions: rounds.iter().filter(|r| r.transaction.is_some()).count(),
            },
            rounds,
            findings,
            termination: a.termination,
            diagnostics,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }
}

/// Human-readable summary.
pub fn render_text(r: &Report) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{} {}  contract sha256 {}", r.tool.name, r.tool.version, r.contract.sha256);
    for s in &r.rounds {
        let _ = write!(out, "round {}: {} states ({} aborted), coverage {} (+{})", s.round, s.states, s.aborted, s.coverage, s.coverage_delta);
        if let Some(t) = &s.transaction {
            let _ = write!(out, ", replayed {} -> {} db changes", t.action, s.changelog.len());
        }
        out.push('\n');
    }
    let _ = writeln!(out, "terminated: {}", r.termination);
    if r.findings.is_empty() {
        out.push_str("no findings\n");
    }
    for f in &r.findings {
        let _ = writeln!(out, "[{}] action {} at {} (round {})", f.finding.kind, f.finding.action, f.finding.pc, f.round);
        let model: Vec<String> = f.finding.model.iter().map(|(k, v)| format!("{k}={v:#x}")).collect();
        if !model.is_empty() {
            let _ = writeln!(out, "    model: {}", model.join(" "));
        }
    }
    out
}
