//! Vulnerability pattern matchers over explored paths.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::chain::MutationOp;
use crate::engine::{Event, ExecState, Pc};
use crate::host::BLOCKCHAIN_INFO;
use crate::sym::expr::BinOp;
use crate::sym::{Expr, Model, SolveResult, Solver, TaintOrigin};
use crate::wasm::IntOp;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FindingKind {
    BlockchainInfoDependency,
    Rollback,
    MissingPermissionCheck,
    IntegerOverflow,
}

impl FindingKind {
    pub const ALL: [FindingKind; 4] = [
        FindingKind::BlockchainInfoDependency,
        FindingKind::Rollback,
        FindingKind::MissingPermissionCheck,
        FindingKind::IntegerOverflow,
    ];

    pub fn parse(s: &str) -> Option<FindingKind> {
        let s = s.to_ascii_lowercase().replace(['-', '_'], "");
        Some(match s.as_str() {
            "blockchaininfodependency" | "blockinfo" | "bid" => FindingKind::BlockchainInfoDependency,
            "rollback" => FindingKind::Rollback,
            "missingpermissioncheck" | "missingauth" | "auth" => FindingKind::MissingPermissionCheck,
            "integeroverflow" | "overflow" => FindingKind::IntegerOverflow,
            _ => return None,
        })
    }
}

impl std::fmt::Display for FindingKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{self:?}")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DetectorConfig {
    pub enabled: BTreeSet<FindingKind>,
    /// Count `db_store_i64` as a sensitive operation for the permission check.
    pub strict_sensitive: bool,
    /// Count `send_deferred` as sensitive for the blockchain-info detector.
    pub deferred_sensitive: bool,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig {
            enabled: FindingKind::ALL.into_iter().collect(),
            strict_sensitive: false,
            deferred_sensitive: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Witness {
    /// Host calls on the path, in order.
    pub host_calls: Vec<String>,
    pub trace_len: usize,
    /// Last instructions leading to the end of the path.
    pub trace_tail: Vec<Pc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Finding {
    pub kind: FindingKind,
    pub action: String,
    pub pc: Pc,
    pub witness: Witness,
    pub model: Model,
}

impl Finding {
    pub fn key(&self) -> (FindingKind, Pc) {
        (self.kind, self.pc)
    }
}

const TAIL: usize = 32;

fn host_name(e: &Event) -> Option<&str> {
    match e {
        Event::Host(r) => Some(r.name.as_str()),
        _ => None,
    }
}

fn is_inline(name: &str) -> bool {
    matches!(name, "send_inline" | "send_context_free_inline")
}

/// Sites of branches on blockchain info that precede a sensitive operation.
pub fn detect_blockchain_info_dep(s: &ExecState, cfg: &DetectorConfig) -> Vec<Pc> {
    if s.status.is_aborted() || !s.events.iter().filter_map(host_name).any(|n| BLOCKCHAIN_INFO.contains(&n)) {
        return vec![];
    }
    let sensitive = |e: &Event| match e {
        Event::Db { .. } => true,
        Event::Host(r) => is_inline(&r.name) || (cfg.deferred_sensitive && r.name == "send_deferred"),
        _ => false,
    };
    let mut out = Vec::new();
    for (i, e) in s.events.iter().enumerate() {
        if let Event::Branch { pc, taints } = e {
            if taints.has_origin(TaintOrigin::BlockchainInfo) && s.events[i + 1..].iter().any(sensitive) && !out.contains(pc) {
                out.push(*pc);
            }
        }
    }
    out
}

/// Remainder sites on blockchain info in paths that send inline actions.
pub fn detect_rollback(s: &ExecState) -> Vec<Pc> {
    if s.status.is_aborted() || !s.events.iter().filter_map(host_name).any(is_inline) {
        return vec![];
    }
    let mut out = Vec::new();
    for e in &s.events {
        if let Event::Rem { pc, taints } = e {
            if taints.has_origin(TaintOrigin::BlockchainInfo) && !out.contains(pc) {
                out.push(*pc);
            }
        }
    }
    out
}

/// Sensitive operations not preceded by `require_auth`/`require_auth2`.
pub fn detect_missing_auth(s: &ExecState, cfg: &DetectorConfig) -> Vec<Pc> {
    if s.status.is_aborted() {
        return vec![];
    }
    let mut out = Vec::new();
    for e in &s.events {
        let site = match e {
            Event::Host(r) if r.name == "require_auth" || r.name == "require_auth2" => return out,
            Event::Host(r) if is_inline(&r.name) => Some(r.pc),
            Event::Db { pc, mutation } => match mutation.op {
                MutationOp::Update | MutationOp::Remove => Some(*pc),
                MutationOp::Store if cfg.strict_sensitive => Some(*pc),
                MutationOp::Store => None,
            },
            _ => None,
        };
        if let Some(pc) = site {
            if !out.contains(&pc) {
                out.push(pc);
            }
        }
    }
    out
}

/// Boolean condition under which `op` on `a`, `b` wraps.
///
/// The default evaluates in double width over zero- and sign-extended
/// operands and tests whether the exact result leaves the representable
/// range in either view. `literal` instead tests whether the wrapped result
/// equals one of the range bounds.
pub fn overflow_condition(op: IntOp, a: &Expr, b: &Expr, literal: bool) -> Expr {
    let w = a.width();
    let bin = match op {
        IntOp::Add => BinOp::Add,
        IntOp::Sub => BinOp::Sub,
        IntOp::Mul => BinOp::Mul,
        _ => panic!("{op:?} has no overflow check"),
    };
    if literal {
        let r = Expr::bin(bin, a.clone(), b.clone());
        let bounds = [crate::sym::expr::mask(w), crate::sym::expr::mask(w - 1), 1u128 << (w - 1)];
        return Expr::any(bounds.map(|k| Expr::eq(r.clone(), Expr::constant(k, w))));
    }
    let wide = |ext: fn(Expr, u32) -> Expr| {
        let r = Expr::bin(bin, ext(a.clone(), 2 * w), ext(b.clone(), 2 * w));
        Expr::ne(ext(Expr::extract(r.clone(), w - 1, 0), 2 * w), r)
    };
    Expr::or(wide(Expr::zext), wide(Expr::sext))
}

/// Solves θ ∧ `extra`, returning a validated model.
fn confirm(s: &ExecState, extra: Option<&Expr>, solver: &dyn Solver, diags: &mut Vec<String>) -> Option<Model> {
    let r = match extra {
        Some(c) => s.constraints.check_with(c, solver),
        None => match s.constraints.witness() {
            Some(w) => SolveResult::Sat(w.clone()),
            None => solver.check(s.constraints.as_slice(), None),
        },
    };
    match r {
        SolveResult::Sat(m) => {
            let ok = m.satisfies_all(s.constraints.iter()) && extra.is_none_or(|c| m.satisfies(c));
            ok.then_some(m)
        }
        SolveResult::Unsat => None,
        SolveResult::Unknown(reason) => {
            diags.push(format!("detector check skipped: solver unknown ({reason})"));
            None
        }
    }
}

/// All findings on one terminal path. Overflow sites already reported are
/// passed in `seen` and skipped.
pub fn detect_all(
    s: &ExecState,
    action: &str,
    cfg: &DetectorConfig,
    solver: &dyn Solver,
    seen: &BTreeSet<(FindingKind, Pc)>,
    diags: &mut Vec<String>,
) -> Vec<Finding> {
    if s.status.is_aborted() {
        return vec![];
    }
    let witness = Witness {
        host_calls: s.host_records().map(|r| r.name.clone()).collect(),
        trace_len: s.trace.len(),
        trace_tail: s.trace[s.trace.len().saturating_sub(TAIL)..].to_vec(),
    };
    let mut raw: Vec<(FindingKind, Pc, Option<Expr>)> = Vec::new();
    let on = |k| cfg.enabled.contains(&k);
    if on(FindingKind::BlockchainInfoDependency) {
        raw.extend(detect_blockchain_info_dep(s, cfg).into_iter().map(|p| (FindingKind::BlockchainInfoDependency, p, None)));
    }
    if on(FindingKind::Rollback) {
        raw.extend(detect_rollback(s).into_iter().map(|p| (FindingKind::Rollback, p, None)));
    }
    if on(FindingKind::MissingPermissionCheck) {
        raw.extend(detect_missing_auth(s, cfg).into_iter().map(|p| (FindingKind::MissingPermissionCheck, p, None)));
    }
    if on(FindingKind::IntegerOverflow) {
        // repeated visits of one site (loops) check the disjunction
        for site in &s.overflow_sites {
            match raw.iter_mut().find(|(k, p, _)| *k == FindingKind::IntegerOverflow && *p == site.pc) {
                Some((_, _, Some(c))) => *c = Expr::or(c.clone(), site.condition.clone()),
                _ => raw.push((FindingKind::IntegerOverflow, site.pc, Some(site.condition.clone()))),
            }
        }
    }
    let mut out = Vec::new();
    for (kind, pc, extra) in raw {
        if seen.contains(&(kind, pc)) || out.iter().any(|f: &Finding| f.key() == (kind, pc)) {
            continue;
        }
        if let Some(model) = confirm(s, extra.as_ref(), solver, diags) {
            out.push(Finding {
                kind,
                action: action.to_string(),
                pc,
                witness: witness.clone(),
                model,
            });
        }
    }
    out
}
