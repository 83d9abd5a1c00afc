//! The multi-round concolic loop: explore every action symbolically, pick
//! the state that adds the most coverage, turn it into a concrete
//! transaction and replay that transaction against the in-process chain.

pub mod abi;
pub mod report;

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::chain::{name_from_str, name_to_string, DbMutation, MutationOp, OnChainDB};
use crate::detect::{detect_all, DetectorConfig, Finding, FindingKind};
use crate::engine::{ActionRun, Engine, EngineConfig, ExecState, Pc, Status};
use crate::host::{arg_var, ActionContext, BlockEnv, BLOCKCHAIN_INFO};
use crate::sym::{Model, SolveResult, Solver};
use crate::wasm::{validate_module, LoadError, WasmModule};

pub use abi::{AbiError, AbiSpec, Slot};
pub use report::{render_text, Report, Termination};

/// Instructions executed on any explored path so far.
pub type CoverageMap = BTreeSet<Pc>;

/// Block time of the first replayed transaction (2018-06-01T00:00:00Z).
pub const EPOCH_US: u64 = 1_527_811_200_000_000;
/// Block time advance between replayed transactions.
pub const BLOCK_INTERVAL_US: u64 = 500_000;

/// Distinct instructions of `s` not yet in `cum`.
pub fn incremental_coverage(s: &ExecState, cum: &CoverageMap) -> usize {
    s.trace.iter().collect::<BTreeSet<_>>().into_iter().filter(|pc| !cum.contains(pc)).count()
}

/// Index of the state to turn into the next transaction, or `None` when no
/// state adds coverage. Aborted states are never chosen. Ties prefer states
/// that modify the database, then the earliest in `states`.
pub fn select_state(states: &[&ExecState], cum: &CoverageMap) -> Option<usize> {
    let mut best: Option<(usize, usize, bool)> = None;
    for (i, s) in states.iter().enumerate() {
        if s.status.is_aborted() {
            continue;
        }
        let inc = incremental_coverage(s, cum);
        if inc == 0 {
            continue;
        }
        let m = s.has_mutation();
        let better = match best {
            None => true,
            Some((_, binc, bm)) => inc > binc || (inc == binc && m && !bm),
        };
        if better {
            best = Some((i, inc, m));
        }
    }
    best.map(|(i, _, _)| i)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Transaction {
    pub action: String,
    #[serde(serialize_with = "ser_hex")]
    pub data: Vec<u8>,
    #[serde(serialize_with = "ser_names")]
    pub auths: BTreeSet<u64>,
}

fn ser_hex<S: serde::Serializer>(v: &[u8], s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&hex::encode(v))
}

fn ser_names<S: serde::Serializer>(v: &BTreeSet<u64>, s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(v.iter().map(|n| name_to_string(*n)))
}

/// Payload bytes for a selected state.
///
/// Fixed template bytes are kept as they are, bytes constrained by the
/// path take their model values and every other byte comes from `rng`.
/// Returns the payload, the model used (empty when the solver gave up) and
/// diagnostics.
pub fn concretize_parameters(s: &ExecState, template: &[Slot], solver: &dyn Solver, rng: &mut ChaCha8Rng) -> (Vec<u8>, Model, Vec<String>) {
    let mut diags = Vec::new();
    let model = match s.constraints.witness() {
        Some(w) if w.satisfies_all(s.constraints.iter()) => w.clone(),
        _ => match solver.check(s.constraints.as_slice(), None) {
            SolveResult::Sat(m) => m,
            SolveResult::Unsat => {
                diags.push("selected state is unsatisfiable; payload is random".into());
                Model::new()
            }
            SolveResult::Unknown(r) => {
                diags.push(format!("solver unknown while concretizing ({r}); payload is random"));
                Model::new()
            }
        },
    };
    let bytes = template
        .iter()
        .enumerate()
        .map(|(i, slot)| match slot {
            Some(b) => *b,
            None => match model.get(&arg_var(i)) {
                Some(v) => v as u8,
                None => rng.random(),
            },
        })
        .collect();
    (bytes, model, diags)
}

/// One mutation as written to the change log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ChangeEntry {
    pub op: MutationOp,
    pub owner: String,
    pub scope: String,
    pub table: String,
    pub key: u64,
}

impl ChangeEntry {
    pub fn from_mutation(m: &DbMutation) -> Self {
        ChangeEntry {
            op: m.op,
            owner: name_to_string(m.table.owner),
            scope: name_to_string(m.table.scope),
            table: name_to_string(m.table.name),
            key: m.key,
        }
    }
}

/// JSON lines, one mutation per line.
pub fn changelog_lines(log: &[ChangeEntry]) -> String {
    log.iter().map(|e| serde_json::to_string(e).expect("plain struct") + "\n").collect()
}

/// Result of replaying one transaction.
#[derive(Debug, Clone)]
pub struct Replay {
    pub db: OnChainDB,
    pub changelog: Vec<ChangeEntry>,
    pub status: Status,
    pub trace: Vec<Pc>,
}

/// Executes `tx` concretely on `db`. A rolled back or truncated run leaves
/// the database unchanged and logs nothing.
pub fn execute_transaction(engine: &Engine, db: &OnChainDB, receiver: u64, tx: &Transaction, env: BlockEnv) -> Replay {
    let action = name_from_str(&tx.action).unwrap_or(0);
    let ctx = ActionContext::concrete(receiver, action, &tx.data, tx.auths.clone(), env);
    let run = engine.run_action(&ctx, db);
    let Some(s) = run.terminals.into_iter().next() else {
        return Replay { db: db.clone(), changelog: vec![], status: Status::Truncated("no terminal state".into()), trace: vec![] };
    };
    if s.status != Status::Terminated {
        return Replay { db: db.clone(), changelog: vec![], status: s.status, trace: s.trace };
    }
    let changelog = s.mutations().map(ChangeEntry::from_mutation).collect();
    Replay { db: s.db, changelog, status: s.status, trace: s.trace }
}

#[derive(Debug, Clone)]
pub struct AnalysisConfig {
    pub max_rounds: u32,
    pub budget: Duration,
    pub engine: EngineConfig,
    pub detectors: DetectorConfig,
    pub seed: u64,
    /// Account the contract is deployed to.
    pub account: u64,
    /// Authorizations attached to every action; defaults to the contract account.
    pub auths: Option<BTreeSet<u64>>,
    /// Record per-round wall-clock time in the report.
    pub timings: bool,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            max_rounds: 10,
            budget: Duration::from_secs(3600),
            engine: EngineConfig::default(),
            detectors: DetectorConfig::default(),
            seed: 42,
            account: crate::chain::name("contract"),
            auths: None,
            timings: false,
        }
    }
}

/// Details of one round, beyond what the report keeps.
#[derive(Debug)]
pub struct RoundResult {
    pub round: u32,
    /// Terminal states per action, in ABI order.
    pub runs: Vec<(String, ActionRun)>,
    /// (action, index into that action's terminals).
    pub selected: Option<(String, usize)>,
    /// Coverage the selected state added over earlier rounds.
    pub increment: usize,
    pub transaction: Option<Transaction>,
    pub replay: Option<Replay>,
    pub coverage_before: usize,
    pub coverage_after: usize,
    pub findings: Vec<Finding>,
    pub duration: Duration,
}

impl RoundResult {
    pub fn coverage_delta(&self) -> usize {
        self.coverage_after - self.coverage_before
    }

    pub fn selected_state(&self) -> Option<&ExecState> {
        let (a, i) = self.selected.as_ref()?;
        self.runs.iter().find(|(n, _)| n == a).map(|(_, r)| &r.terminals[*i])
    }
}

#[derive(Debug)]
pub struct Analysis {
    pub rounds: Vec<RoundResult>,
    pub findings: Vec<Finding>,
    pub termination: Termination,
    pub db: OnChainDB,
    pub coverage: CoverageMap,
    pub diagnostics: Vec<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum AnalyzeError {
    #[error(transparent)]
    Load(#[from] LoadError),
    #[error(transparent)]
    Abi(#[from] AbiError),
    #[error("invalid module: {0}")]
    Invalid(String),
    #[error("action name `{0}` is not a valid account name")]
    BadActionName(String),
}

fn replay_env(seed: u64, tx_index: u64, model: &Model) -> BlockEnv {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7a90_5eed);
    let base: u32 = rng.random_range(1_000_000..2_000_000);
    let mut prefix_rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(tx_index));
    let get = |k: &str| model.get(&format!("env.{k}"));
    let [time, num, prefix] = BLOCKCHAIN_INFO;
    BlockEnv::Concrete {
        time_us: get(time).map_or(EPOCH_US + BLOCK_INTERVAL_US * tx_index, |v| v as u64),
        block_num: get(num).map_or(base.wrapping_add(tx_index as u32), |v| v as u32),
        block_prefix: get(prefix).map_or_else(|| prefix_rng.random(), |v| v as u32),
    }
}

/// Runs the full loop from an empty database.
pub fn analyze(module: &WasmModule, abi: &AbiSpec, cfg: &AnalysisConfig) -> Result<Analysis, AnalyzeError> {
    let report = validate_module(module);
    if let Some(v) = report.violations.first() {
        let at = v.func.map(|f| format!("func {f}: ")).unwrap_or_default();
        return Err(AnalyzeError::Invalid(format!("{at}{} ({} violations)", v.message, report.violations.len())));
    }
    let start = Instant::now();
    let deadline = start + cfg.budget;
    let auths = cfg.auths.clone().unwrap_or_else(|| BTreeSet::from([cfg.account]));
    let mut actions = Vec::new();
    for (a, _) in &abi.actions {
        let n = name_from_str(a).ok_or_else(|| AnalyzeError::BadActionName(a.clone()))?;
        actions.push((a.clone(), n, abi.template(a)?));
    }
    let mut replay_cfg = cfg.engine.clone();
    replay_cfg.coarse_db = None;
    replay_cfg.overflow = crate::engine::OverflowMode::Off;
    let replayer = Engine::new(module, replay_cfg)?;

    let mut db = OnChainDB::new();
    let mut cum = CoverageMap::new();
    let mut rounds = Vec::new();
    let mut findings: Vec<Finding> = Vec::new();
    let mut seen: BTreeSet<(FindingKind, Pc)> = BTreeSet::new();
    let mut diagnostics = Vec::new();
    let mut termination = Termination::RoundCap;
    let mut tx_index = 0u64;

    for round in 1..=cfg.max_rounds {
        let round_start = Instant::now();
        let Some(remaining) = deadline.checked_duration_since(round_start).filter(|d| !d.is_zero()) else {
            termination = Termination::TimeBudget;
            break;
        };
        let mut ecfg = cfg.engine.clone();
        ecfg.budget.action_time = Some(ecfg.budget.action_time.map_or(remaining, |t| t.min(remaining)));
        let engine = Engine::new(module, ecfg)?;
        let runs: Vec<(String, ActionRun)> = actions
            .par_iter()
            .map(|(a, n, t)| {
                let ctx = ActionContext::symbolic(cfg.account, *n, t, auths.clone());
                (a.clone(), engine.run_action(&ctx, &db))
            })
            .collect();

        let mut new_findings = Vec::new();
        for (a, r) in &runs {
            diagnostics.extend(r.diagnostics.iter().map(|d| format!("round {round} {a}: {d}")));
            for s in &r.terminals {
                let mut d = Vec::new();
                for f in detect_all(s, a, &cfg.detectors, &engine.solver, &seen, &mut d) {
                    seen.insert(f.key());
                    new_findings.push(f);
                }
                diagnostics.extend(d.into_iter().map(|x| format!("round {round} {a}: {x}")));
            }
        }

        let flat: Vec<(&str, usize, &ExecState)> =
            runs.iter().flat_map(|(a, r)| r.terminals.iter().enumerate().map(move |(i, s)| (a.as_str(), i, s))).collect();
        let states: Vec<&ExecState> = flat.iter().map(|(_, _, s)| *s).collect();
        let coverage_before = cum.len();
        let pick = select_state(&states, &cum);
        let increment = pick.map_or(0, |k| incremental_coverage(states[k], &cum));
        for s in &states {
            cum.extend(s.trace.iter().copied());
        }

        let mut result = RoundResult {
            round,
            runs: Vec::new(),
            selected: None,
            increment,
            transaction: None,
            replay: None,
            coverage_before,
            coverage_after: cum.len(),
            findings: new_findings.clone(),
            duration: Duration::ZERO,
        };
        findings.extend(new_findings);

        let mut stop = None;
        match pick {
            None => stop = Some(Termination::CoverageStall),
            Some(k) => {
                let (a, i, s) = flat[k];
                let (_, _, template) = actions.iter().find(|(n, _, _)| n == a).expect("action of a run");
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(u64::from(round)));
                let (data, model, d) = concretize_parameters(s, template, &engine.solver, &mut rng);
                diagnostics.extend(d.into_iter().map(|x| format!("round {round} {a}: {x}")));
                if let Err(e) = abi.decode(a, &data) {
                    diagnostics.push(format!("round {round} {a}: generated payload does not decode: {e}"));
                }
                let tx = Transaction { action: a.to_string(), data, auths: auths.clone() };
                let env = replay_env(cfg.seed, tx_index, &model);
                tx_index += 1;
                let replay = execute_transaction(&replayer, &db, cfg.account, &tx, env);
                if replay.changelog.is_empty() {
                    stop = Some(Termination::NoDbChange);
                } else {
                    db = replay.db.clone();
                }
                result.selected = Some((a.to_string(), i));
                result.transaction = Some(tx);
                result.replay = Some(replay);
            }
        }
        drop(flat);
        result.runs = runs;
        result.duration = round_start.elapsed();
        rounds.push(result);
        if let Some(t) = stop {
            termination = t;
            break;
        }
        if Instant::now() >= deadline {
            termination = Termination::TimeBudget;
            break;
        }
    }

    Ok(Analysis { rounds, findings, termination, db, coverage: cum, diagnostics })
}

#[cfg(test)]
mod tests;
