//! Non-database EOSIO host functions plus routing of the `db_*_i64` family
//! to the chain-model emulator.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::chain::emulate::{self, Direction, EmuCtx, EmuResult, Lookup};
use crate::chain::name_to_string;
use crate::engine::{Event, ExecState, HostCallRecord, Pc, Run};
use crate::sym::{Expr, SymValue, TaintLabel, TaintOrigin, Taints};
use crate::wasm::ValType;

/// Block information seen by the contract.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockEnv {
    /// Fresh tainted variables, one per info function and path.
    Symbolic,
    Concrete {
        time_us: u64,
        block_num: u32,
        block_prefix: u32,
    },
}

/// Everything fixed for one explored action.
#[derive(Debug, Clone)]
pub struct ActionContext {
    pub receiver: u64,
    pub code: u64,
    pub action: u64,
    /// Serialized action data, one cell per byte.
    pub data: Vec<SymValue>,
    pub auths: BTreeSet<u64>,
    pub env: BlockEnv,
}

impl ActionContext {
    /// Action data whose bytes are fresh variables `arg[i]`, except where
    /// `template` fixes a byte (length prefixes and the like).
    pub fn symbolic(receiver: u64, action: u64, template: &[Option<u8>], auths: BTreeSet<u64>) -> Self {
        let taint = Taints::single(TaintLabel::new(TaintOrigin::ActionData, "read_action_data", 0));
        let data = template
            .iter()
            .enumerate()
            .map(|(i, b)| match b {
                Some(b) => SymValue::byte(*b).with_taints(taint.clone()),
                None => SymValue::var(&arg_var(i), 8).with_taints(taint.clone()),
            })
            .collect();
        ActionContext {
            receiver,
            code: receiver,
            action,
            data,
            auths,
            env: BlockEnv::Symbolic,
        }
    }

    pub fn concrete(receiver: u64, action: u64, data: &[u8], auths: BTreeSet<u64>, env: BlockEnv) -> Self {
        ActionContext {
            receiver,
            code: receiver,
            action,
            data: data.iter().map(|b| SymValue::byte(*b)).collect(),
            auths,
            env,
        }
    }
}

/// Variable name of action-data byte `i`.
pub fn arg_var(i: usize) -> String {
    format!("arg[{i}]")
}

/// Host functions that read block information.
pub const BLOCKCHAIN_INFO: [&str; 3] = ["current_time", "tapos_block_num", "tapos_block_prefix"];

/// Every supported import name; anything else aborts the path.
pub const SUPPORTED: &[&str] = &[
    "require_auth",
    "require_auth2",
    "has_auth",
    "current_time",
    "tapos_block_num",
    "tapos_block_prefix",
    "current_receiver",
    "action_data_size",
    "read_action_data",
    "eosio_assert",
    "eosio_assert_message",
    "eosio_assert_code",
    "send_inline",
    "send_context_free_inline",
    "send_deferred",
    "memcpy",
    "memmove",
    "memset",
    "abort",
    "db_find_i64",
    "db_lowerbound_i64",
    "db_upperbound_i64",
    "db_end_i64",
    "db_get_i64",
    "db_next_i64",
    "db_previous_i64",
    "db_store_i64",
    "db_update_i64",
    "db_remove_i64",
];

pub fn is_supported(name: &str) -> bool {
    SUPPORTED.contains(&name) || name.starts_with("print")
}

/// Executes import `name`; the caller has already advanced the pc.
pub(crate) fn dispatch(run: &mut Run, mut s: ExecState, pc: Pc, name: &str, args: Vec<SymValue>, result: Option<ValType>) -> Vec<ExecState> {
    let ordinal = s.next_ordinal();
    s.events.push(Event::Host(HostCallRecord {
        name: name.to_string(),
        args: args.clone(),
        ordinal,
        pc,
    }));
    if name.starts_with("db_") && name.ends_with("_i64") {
        return db_call(run, s, pc, name, &args, ordinal);
    }
    match name {
        "require_auth" | "require_auth2" => return require_auth(run, s, &args[0]),
        "has_auth" => {
            let v = match args[0].as_u64() {
                Some(a) => SymValue::i32(u32::from(run.ctx.auths.contains(&a))),
                None => {
                    let e = args[0].expr();
                    let any = Expr::any(run.ctx.auths.iter().map(|a| Expr::eq(e.clone(), Expr::constant(u128::from(*a), 64))));
                    SymValue::sym(Expr::zext(any, 32)).with_taints(args[0].taints().clone())
                }
            };
            s.push(v);
        }
        "current_time" | "tapos_block_num" | "tapos_block_prefix" => {
            let v = block_info(run, &mut s, name);
            s.push(v);
        }
        "current_receiver" => s.push(SymValue::i64(run.ctx.receiver)),
        "action_data_size" => s.push(SymValue::i32(run.ctx.data.len() as u32)),
        "read_action_data" => {
            let Some(dst) = run.address(&mut s, &args[0]) else {
                return vec![s];
            };
            let Some(len) = run.pin(&mut s, &args[1], "read_action_data length") else {
                return vec![s];
            };
            let n = (len as usize).min(run.ctx.data.len());
            if let Err(e) = s.mem.write_bytes(dst, &run.ctx.data[..n]) {
                s.abort(e.to_string());
                return vec![s];
            }
            s.push(SymValue::i32(n as u32));
        }
        "eosio_assert" | "eosio_assert_message" | "eosio_assert_code" => {
            let cond = args[0].clone();
            let msg = assert_message(&s, name, &args);
            if let Some(c) = cond.as_con() {
                if c == 0 {
                    s.abort(msg);
                }
                return vec![s];
            }
            let t = Expr::truthy(cond.expr());
            let mut out = Vec::new();
            for (i, mut succ) in run.fork(s, vec![t.clone(), Expr::not(t)]) {
                if i == 1 {
                    succ.abort(msg.clone());
                }
                out.push(succ);
            }
            return out;
        }
        "send_inline" | "send_context_free_inline" | "send_deferred" => {}
        "memcpy" | "memmove" => {
            let Some((dst, src, n)) = mem_args(run, &mut s, &args) else {
                return vec![s];
            };
            match s.mem.read_bytes(src, n).and_then(|cells| s.mem.write_bytes(dst, &cells)) {
                Ok(()) => s.push(args[0].clone()),
                Err(e) => s.abort(e.to_string()),
            }
        }
        "memset" => {
            let Some(dst) = run.address(&mut s, &args[0]) else {
                return vec![s];
            };
            let Some(n) = run.pin(&mut s, &args[2], "memset length") else {
                return vec![s];
            };
            let byte = args[1].map(|e| Expr::extract(e, 7, 0));
            let cells = vec![byte; n as usize];
            match s.mem.write_bytes(dst, &cells) {
                Ok(()) => s.push(args[0].clone()),
                Err(e) => s.abort(e.to_string()),
            }
        }
        "abort" => s.abort("abort called"),
        n if n.starts_with("print") => {
            if let Some(ty) = result {
                s.push(SymValue::con(0, ty.bits()));
            }
        }
        _ => s.abort(format!("UnknownHost: {name}")),
    }
    vec![s]
}

fn assert_message(s: &ExecState, name: &str, args: &[SymValue]) -> String {
    let text = match name {
        "eosio_assert_code" => args[1].as_u64().map(|c| format!("code {c}")),
        _ => args[1].as_u64().map(|addr| {
            let limit = match name {
                "eosio_assert_message" => args[2].as_u64().unwrap_or(0).min(256),
                _ => 256,
            };
            let mut out = Vec::new();
            for i in 0..limit {
                if addr + i >= s.mem.size() {
                    break;
                }
                match s.mem.read_byte(addr + i).as_con() {
                    Some(0) if name == "eosio_assert" => break,
                    Some(b) => out.push(b as u8),
                    None => out.push(b'?'),
                }
            }
            String::from_utf8_lossy(&out).into_owned()
        }),
    };
    format!("eosio_assert: {}", text.unwrap_or_default())
}

fn mem_args(run: &mut Run, s: &mut ExecState, args: &[SymValue]) -> Option<(u64, u64, u64)> {
    let dst = run.address(s, &args[0])?;
    let src = run.address(s, &args[1])?;
    let n = run.pin(s, &args[2], "memcpy length")?;
    Some((dst, src, n as u64))
}

fn block_info(run: &mut Run, s: &mut ExecState, name: &str) -> SymValue {
    let key: &'static str = BLOCKCHAIN_INFO.iter().find(|n| **n == name).copied().unwrap();
    if let Some((_, v)) = s.env_values.iter().find(|(k, _)| *k == key) {
        return v.clone();
    }
    let width = if key == "current_time" { 64 } else { 32 };
    let v = match run.ctx.env {
        BlockEnv::Concrete { time_us, block_num, block_prefix } => match key {
            "current_time" => SymValue::i64(time_us),
            "tapos_block_num" => SymValue::i32(block_num),
            _ => SymValue::i32(block_prefix),
        },
        BlockEnv::Symbolic => {
            let taint = Taints::single(TaintLabel::new(TaintOrigin::BlockchainInfo, key, 0));
            SymValue::var(&format!("env.{key}"), width).with_taints(taint)
        }
    };
    s.env_values.push((key, v.clone()));
    v
}

fn require_auth(run: &mut Run, mut s: ExecState, account: &SymValue) -> Vec<ExecState> {
    let auths: Vec<u64> = run.ctx.auths.iter().copied().collect();
    if let Some(a) = account.as_u64() {
        if !auths.contains(&a) {
            s.abort(format!("missing authority of {}", name_to_string(a)));
        }
        return vec![s];
    }
    let e = account.expr();
    let eqs: Vec<Expr> = auths.iter().map(|a| Expr::eq(e.clone(), Expr::constant(u128::from(*a), 64))).collect();
    let mut conds = eqs.clone();
    conds.push(Expr::not(Expr::any(eqs)));
    let n = conds.len();
    let mut out = Vec::new();
    for (i, mut t) in run.fork(s, conds) {
        if i == n - 1 {
            t.abort("missing authority");
        }
        out.push(t);
    }
    out
}

fn coarse_value(seed: u64, s: &ExecState, ordinal: u32) -> u32 {
    let mix = seed ^ (u64::from(ordinal) << 32) ^ (s.trace.len() as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    ChaCha8Rng::seed_from_u64(mix).random()
}

fn db_call(run: &mut Run, mut s: ExecState, pc: Pc, name: &str, args: &[SymValue], ordinal: u32) -> Vec<ExecState> {
    if let Some(seed) = run.eng.config.coarse_db {
        if !matches!(name, "db_update_i64" | "db_remove_i64") {
            s.push(SymValue::i32(coarse_value(seed, &s, ordinal)));
        }
        return vec![s];
    }
    // pointer arguments are pinned before emulation
    let ptr = |run: &mut Run, s: &mut ExecState, v: &SymValue| run.address(s, v);
    let res: EmuResult = {
        macro_rules! ctx {
            ($s:expr) => {
                EmuCtx {
                    db: &$s.db,
                    mem: &$s.mem,
                    pc: &$s.constraints,
                    solver: run.solver(),
                    receiver: run.ctx.receiver,
                    ordinal,
                }
            };
        }
        match name {
            "db_find_i64" | "db_lowerbound_i64" | "db_upperbound_i64" => {
                let mode = match name {
                    "db_find_i64" => Lookup::Find,
                    "db_lowerbound_i64" => Lookup::Lower,
                    _ => Lookup::Upper,
                };
                emulate::emu_lookup(&ctx!(s), mode, &args[0], &args[1], &args[2], &args[3])
            }
            "db_end_i64" => emulate::emu_end(&ctx!(s), &args[0], &args[1], &args[2]),
            "db_get_i64" => {
                let Some(data) = ptr(run, &mut s, &args[1]) else {
                    return vec![s];
                };
                emulate::emu_get(&ctx!(s), &args[0], data, &args[2])
            }
            "db_next_i64" | "db_previous_i64" => {
                let Some(prim) = ptr(run, &mut s, &args[1]) else {
                    return vec![s];
                };
                let dir = if name == "db_next_i64" { Direction::Next } else { Direction::Previous };
                emulate::emu_step(&ctx!(s), dir, &args[0], prim)
            }
            "db_store_i64" => {
                let Some(data) = ptr(run, &mut s, &args[4]) else {
                    return vec![s];
                };
                emulate::emu_store(&ctx!(s), &args[0], &args[1], &args[3], data, &args[5])
            }
            "db_update_i64" => {
                let Some(data) = ptr(run, &mut s, &args[2]) else {
                    return vec![s];
                };
                emulate::emu_update(&ctx!(s), &args[0], data, &args[3])
            }
            "db_remove_i64" => emulate::emu_remove(&ctx!(s), &args[0]),
            _ => {
                s.abort(format!("UnknownHost: {name}"));
                return vec![s];
            }
        }
    };
    run.diagnostics.extend(res.diagnostics);
    let returns = !matches!(name, "db_update_i64" | "db_remove_i64");
    let n = res.outcomes.len();
    let mut out = Vec::with_capacity(n);
    for o in res.outcomes {
        let mut t = s.clone();
        if n > 1 {
            t.depth += 1;
        }
        if let Some(c) = o.constraint {
            match o.model {
                Some(m) => t.constraints.push_with_model(c, m),
                None => t.constraints.push_unchecked(c),
            }
        }
        if !o.diagnostics.is_empty() {
            t.concretized = true;
            t.diagnostics.extend(o.diagnostics);
        }
        if let Some(a) = o.abort {
            t.abort(format!("{name}: {a}"));
            out.push(t);
            continue;
        }
        let mut failed = None;
        for (addr, cells) in &o.mem_writes {
            if let Err(e) = t.mem.write_bytes(*addr, cells) {
                failed = Some(e.to_string());
                break;
            }
        }
        if let Some(mutation) = o.mutation {
            if let Err(e) = t.db.apply(&mutation) {
                failed = Some(e.to_string());
            }
            t.events.push(Event::Db { pc, mutation });
        }
        if let Some(f) = failed {
            t.abort(f);
        } else if returns {
            t.push(o.ret.unwrap_or(SymValue::i32(0)));
        }
        out.push(t);
    }
    out
}
