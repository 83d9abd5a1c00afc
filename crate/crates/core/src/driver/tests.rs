use super::*;
use crate::chain::name;
use crate::wasm::parse_module;

const IMPORTS: &str = r#"
    (import "env" "read_action_data" (func $read (param i32 i32) (result i32)))
    (import "env" "eosio_assert" (func $assert (param i32 i32)))
    (import "env" "send_inline" (func $send_inline (param i32 i32)))
    (import "env" "db_store_i64" (func $store (param i64 i64 i64 i64 i32 i32) (result i32)))
    (import "env" "db_find_i64" (func $find (param i64 i64 i64 i64) (result i32)))
"#;

fn me() -> i64 {
    name("contract") as i64
}

/// A module whose `apply` runs `arms[i].1` when the action is `arms[i].0`.
fn module(arms: &[(&str, &str)]) -> WasmModule {
    let mut body = String::new();
    for (a, code) in arms {
        body.push_str(&format!("(if (i64.eq (local.get 2) (i64.const {})) (then {code}))\n", name(a) as i64));
    }
    let wat = format!(r#"(module {IMPORTS} (memory 1) (func (export "apply") (param i64 i64 i64) (local i32 i32) {body}))"#);
    parse_module(&wat::parse_str(wat).unwrap()).unwrap()
}

fn abi(actions: &[(&str, &str)]) -> AbiSpec {
    let structs: Vec<String> = actions
        .iter()
        .map(|(a, fields)| format!(r#"{{"name":"{a}","base":"","fields":[{fields}]}}"#))
        .collect();
    let acts: Vec<String> = actions.iter().map(|(a, _)| format!(r#"{{"name":"{a}","type":"{a}"}}"#)).collect();
    AbiSpec::parse(&format!(r#"{{"structs":[{}],"actions":[{}]}}"#, structs.join(","), acts.join(","))).unwrap()
}

fn terminals(m: &WasmModule, action: &str, n: usize) -> Vec<ExecState> {
    let eng = Engine::new(m, EngineConfig::default()).unwrap();
    let me = name("contract");
    let ctx = ActionContext::symbolic(me, name(action), &vec![None; n], BTreeSet::from([me]));
    eng.run_action(&ctx, &OnChainDB::new()).terminals
}

fn store_body(key: &str) -> String {
    format!(
        "(i32.store (i32.const 64) (i32.const 7)) (drop (call $store (i64.const {me}) (i64.const {t}) (i64.const {me}) {key} (i32.const 64) (i32.const 4)))",
        me = me(),
        t = name("flags") as i64
    )
}

fn pcs(n: u32) -> Vec<Pc> {
    (0..n).map(|i| Pc { func: 100, offset: i }).collect()
}

#[test]
fn incremental_coverage_uses_set_semantics() {
    let m = module(&[("a", "nop")]);
    let mut s = terminals(&m, "a", 0).remove(0);
    let (a, b) = (Pc { func: 1, offset: 0 }, Pc { func: 1, offset: 1 });
    s.trace = vec![a, a, b];
    assert_eq!(incremental_coverage(&s, &CoverageMap::from([b])), 1);
    s.trace = pcs(10);
    assert_eq!(incremental_coverage(&s, &CoverageMap::new()), 10);
    assert_eq!(incremental_coverage(&s, &pcs(10).into_iter().collect()), 0);
}

#[test]
fn select_state_examples() {
    let m = module(&[("a", "nop"), ("s", &store_body("(i64.const 5)"))]);
    let plain = terminals(&m, "a", 0).remove(0);
    let storing = terminals(&m, "s", 0).remove(0);
    assert!(storing.has_mutation());
    let with = |s: &ExecState, t: Vec<Pc>| {
        let mut s = s.clone();
        s.trace = t;
        s
    };
    let cum: CoverageMap = pcs(10).into_iter().collect();
    let (x, y) = (with(&plain, pcs(3)), with(&plain, pcs(5)));
    assert_eq!(select_state(&[&x, &y], &cum), None);
    let shifted = |n: u32| (0..n).map(|i| Pc { func: 200, offset: i }).collect::<Vec<_>>();
    let (x, y) = (with(&plain, shifted(3)), with(&plain, shifted(7)));
    assert_eq!(select_state(&[&x, &y], &cum), Some(1));
    let (x, y) = (with(&plain, shifted(5)), with(&storing, shifted(5)));
    assert_eq!(select_state(&[&x, &y], &cum), Some(1));
    // equal increments and no mutation: earliest wins
    assert_eq!(select_state(&[&x, &x.clone()], &cum), Some(0));
    let mut dead = with(&storing, shifted(9));
    dead.status = Status::Aborted("rollback".into());
    assert_eq!(select_state(&[&dead, &x], &cum), Some(1));
}

#[test]
fn concretize_keeps_model_and_fills_rest() {
    // record {u32 a, u32 b}; the path requires a == 1
    let body = "(drop (call $read (i32.const 0) (i32.const 8))) (call $assert (i32.eq (i32.load (i32.const 0)) (i32.const 1)) (i32.const 0))";
    let m = module(&[("pair", body)]);
    let spec = abi(&[("pair", r#"{"name":"a","type":"uint32"},{"name":"b","type":"uint32"}"#)]);
    let template = spec.template("pair").unwrap();
    let ok: Vec<ExecState> = terminals(&m, "pair", 8).into_iter().filter(|s| s.status == Status::Terminated).collect();
    assert_eq!(ok.len(), 1);
    let solver = crate::sym::BitBlastSolver::default();
    let (bytes, _, diags) = concretize_parameters(&ok[0], &template, &solver, &mut ChaCha8Rng::seed_from_u64(42));
    assert!(diags.is_empty());
    let decoded = spec.decode("pair", &bytes).unwrap();
    assert_eq!(decoded["a"], 1);
    let mut payload = Model::new();
    for (i, b) in bytes.iter().enumerate() {
        payload.set(arg_var(i), u128::from(*b));
    }
    assert!(payload.satisfies_all(ok[0].constraints.iter()));
    // same seed, same payload
    let (again, _, _) = concretize_parameters(&ok[0], &template, &solver, &mut ChaCha8Rng::seed_from_u64(42));
    assert_eq!(bytes, again);
}

#[test]
fn concretize_u64_examples() {
    let body = "(drop (call $read (i32.const 0) (i32.const 8))) (call $assert (i64.eq (i64.load (i32.const 0)) (i64.const 7)) (i32.const 0))";
    let m = module(&[("one", body), ("free", "nop")]);
    let spec = abi(&[("one", r#"{"name":"x","type":"uint64"}"#), ("free", r#"{"name":"x","type":"uint64"}"#)]);
    let solver = crate::sym::BitBlastSolver::default();
    let s = terminals(&m, "one", 8).into_iter().find(|s| s.status == Status::Terminated).unwrap();
    let (bytes, _, _) = concretize_parameters(&s, &spec.template("one").unwrap(), &solver, &mut ChaCha8Rng::seed_from_u64(1));
    assert_eq!(bytes, 7u64.to_le_bytes());
    let s = terminals(&m, "free", 8).remove(0);
    let (bytes, _, _) = concretize_parameters(&s, &spec.template("free").unwrap(), &solver, &mut ChaCha8Rng::seed_from_u64(1));
    assert!(spec.decode("free", &bytes).is_ok());
}

fn replay(m: &WasmModule, action: &str, db: &OnChainDB) -> Replay {
    let eng = Engine::new(m, EngineConfig::default()).unwrap();
    let tx = Transaction { action: action.into(), data: vec![], auths: BTreeSet::from([name("contract")]) };
    let env = BlockEnv::Concrete { time_us: EPOCH_US, block_num: 1, block_prefix: 2 };
    execute_transaction(&eng, db, name("contract"), &tx, env)
}

#[test]
fn execute_transaction_examples() {
    let m = module(&[
        ("put", &store_body("(i64.const 5)")),
        ("fail", &format!("{} (call $assert (i32.const 0) (i32.const 0))", store_body("(i64.const 6)"))),
        ("look", "(drop (call $read (i32.const 0) (i32.const 0)))"),
    ]);
    let db = OnChainDB::new();
    let r = replay(&m, "put", &db);
    assert_eq!(
        r.changelog,
        vec![ChangeEntry { op: MutationOp::Store, owner: "contract".into(), scope: "contract".into(), table: "flags".into(), key: 5 }]
    );
    assert_eq!(r.db.row_count(), 1);
    assert_eq!(changelog_lines(&r.changelog), "{\"op\":\"store\",\"owner\":\"contract\",\"scope\":\"contract\",\"table\":\"flags\",\"key\":5}\n");
    let r2 = replay(&m, "fail", &r.db);
    assert!(r2.changelog.is_empty() && r2.status.is_aborted());
    assert_eq!(r2.db, r.db);
    let r3 = replay(&m, "look", &r.db);
    assert!(r3.changelog.is_empty());
    assert_eq!(r3.status, Status::Terminated);
}

#[test]
fn analyze_without_db_reads_stops_after_one_round() {
    let body = "(drop (call $read (i32.const 0) (i32.const 1))) (if (i32.load8_u (i32.const 0)) (then nop))";
    let m = module(&[("go", body)]);
    let spec = abi(&[("go", r#"{"name":"x","type":"uint8"}"#)]);
    let a = analyze(&m, &spec, &AnalysisConfig::default()).unwrap();
    assert_eq!(a.rounds.len(), 1);
    assert_eq!(a.termination, Termination::NoDbChange);
    assert!(a.rounds[0].coverage_delta() > 0);
}

/// `setflag` stores a row; `act` sends an inline action only when it finds it.
fn gate() -> (WasmModule, AbiSpec) {
    let act = format!(
        "(local.set 3 (call $find (i64.const {me}) (i64.const {me}) (i64.const {t}) (i64.const 1)))
         (if (i32.ge_s (local.get 3) (i32.const 0)) (then (call $send_inline (i32.const 0) (i32.const 8))))",
        me = me(),
        t = name("flags") as i64
    );
    let m = module(&[("setflag", &store_body("(i64.const 1)")), ("act", &act)]);
    (m, abi(&[("setflag", ""), ("act", "")]))
}

#[test]
fn two_round_gate() {
    let (m, spec) = gate();
    let a = analyze(&m, &spec, &AnalysisConfig::default()).unwrap();
    assert!(a.rounds[0].findings.is_empty());
    // no round-1 path of `act` reaches the inline send
    let act_runs = &a.rounds[0].runs.iter().find(|(n, _)| n == "act").unwrap().1;
    assert!(act_runs.terminals.iter().all(|s| !s.host_records().any(|r| r.name == "send_inline")));
    assert_eq!(a.rounds[0].transaction.as_ref().unwrap().action, "setflag");
    assert!(a.rounds.len() >= 2);
    assert!(a.rounds[1].findings.iter().any(|f| f.kind == FindingKind::MissingPermissionCheck && f.action == "act"));
    let capped = analyze(&m, &spec, &AnalysisConfig { max_rounds: 1, ..AnalysisConfig::default() }).unwrap();
    assert!(capped.findings.is_empty());
    assert_eq!(capped.termination, Termination::RoundCap);
}

#[test]
fn coverage_and_findings_are_monotone() {
    let (m, spec) = gate();
    let a = analyze(&m, &spec, &AnalysisConfig::default()).unwrap();
    for w in a.rounds.windows(2) {
        assert!(w[1].coverage_after >= w[0].coverage_after);
        assert_eq!(w[1].coverage_before, w[0].coverage_after);
    }
    assert!(a.rounds.len() < 10);
}

#[test]
fn reports_are_deterministic() {
    let (m, spec) = gate();
    let cfg = AnalysisConfig::default();
    let one = Report::new(b"wasm", &cfg, &analyze(&m, &spec, &cfg).unwrap()).to_json();
    let two = Report::new(b"wasm", &cfg, &analyze(&m, &spec, &cfg).unwrap()).to_json();
    assert_eq!(one, two);
    assert!(!one.contains("duration_ms"));
    let v: serde_json::Value = serde_json::from_str(&one).unwrap();
    assert_eq!(v["schema_version"], report::SCHEMA_VERSION);
    assert_eq!(v["findings"][0]["round"], 2);
}
