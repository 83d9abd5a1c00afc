use std::time::Instant;

use super::state::{Event, ExecState, Frame, Label, LabelKind, OverflowSite, Pc, Status};
use super::{float::eval_float, OverflowMode, Run};
use crate::sym::expr::mask;
use crate::sym::ops::{eval_binop, eval_unop, ArithError};
use crate::sym::{Expr, SymValue};
use crate::wasm::{FuncRef, ImportKind, Instr, IntOp, ValType};

const MAX_CALL_DEPTH: usize = 1024;

/// Successors of one step; the single-successor case avoids allocation.
pub(crate) enum Step {
    One(ExecState),
    Many(Vec<ExecState>),
}

impl From<Vec<ExecState>> for Step {
    fn from(v: Vec<ExecState>) -> Step {
        Step::Many(v)
    }
}

impl Run<'_, '_> {
    /// Runs `s` until it forks or stops.
    pub(crate) fn exec(&mut self, mut s: ExecState) -> Vec<ExecState> {
        let mut n = 0u32;
        loop {
            if s.status.is_terminal() {
                return vec![s];
            }
            n = n.wrapping_add(1);
            if n % 4096 == 0 && self.deadline.is_some_and(|d| Instant::now() >= d) {
                s.truncate("action time budget exhausted");
                return vec![s];
            }
            match self.step(s) {
                Step::One(t) => s = t,
                Step::Many(v) => return v,
            }
        }
    }

    /// Pushes a call frame for a defined function.
    pub(crate) fn enter(&mut self, s: &mut ExecState, func: u32, args: Vec<SymValue>) {
        let m = self.eng.module;
        let Some(FuncRef::Defined(body)) = m.func(func) else {
            s.abort(format!("call to non-defined function {func}"));
            return;
        };
        if s.frames.len() >= MAX_CALL_DEPTH {
            s.abort("call stack exhausted");
            return;
        }
        let ty = &m.types[body.type_index as usize];
        let mut locals = args;
        locals.extend(body.locals.iter().map(|t| SymValue::con(0, t.bits())));
        s.frames.push(Frame {
            func,
            body: (func - m.imported_func_count()) as usize,
            pc: 0,
            locals,
            labels: Vec::new(),
            height: s.stack.len(),
            arity: ty.results.len(),
            loops: Vec::new(),
        });
    }

    fn do_return(&mut self, s: &mut ExecState) {
        let f = s.frames.pop().expect("return without frame");
        let results = s.stack.split_off(s.stack.len() - f.arity);
        s.stack.truncate(f.height);
        s.stack.extend(results);
        if s.frames.is_empty() {
            s.ret = s.stack.last().cloned();
            s.status = Status::Terminated;
        }
    }

    /// Branches to the label `depth` levels out.
    fn branch(&mut self, s: &mut ExecState, depth: u32) {
        let bound = self.eng.config.budget.loop_bound;
        let f = s.frames.last_mut().unwrap();
        if depth as usize >= f.labels.len() {
            self.do_return(s);
            return;
        }
        let idx = f.labels.len() - 1 - depth as usize;
        let label = f.labels[idx].clone();
        let vals = s.stack.split_off(s.stack.len() - label.arity);
        s.stack.truncate(label.height);
        s.stack.extend(vals);
        match label.kind {
            LabelKind::Loop => {
                f.labels.truncate(idx + 1);
                let header = label.target - 1;
                let count = loop_counter(f, header);
                *count += 1;
                if *count > bound {
                    let at = Pc { func: f.func, offset: header };
                    s.truncate(format!("loop bound {bound} reached at {at}"));
                    return;
                }
            }
            LabelKind::Block => f.labels.truncate(idx),
        }
        f.pc = label.target;
    }

    fn frame(s: &mut ExecState) -> &mut Frame {
        s.frames.last_mut().unwrap()
    }

    fn advance(s: &mut ExecState) {
        Self::frame(s).pc += 1;
    }

    /// Forks `s` on a boolean-valued condition; each successor gets `then`
    /// or `other` applied.
    fn fork_on(
        &mut self,
        s: ExecState,
        cond: &SymValue,
        pc: Pc,
        mut then: impl FnMut(&mut Self, &mut ExecState),
        mut other: impl FnMut(&mut Self, &mut ExecState),
    ) -> Step {
        let mut s = s;
        if !cond.taints().is_empty() {
            s.events.push(Event::Branch { pc, taints: cond.taints().clone() });
        }
        if let Some(c) = cond.as_con() {
            if c != 0 {
                then(self, &mut s);
            } else {
                other(self, &mut s);
            }
            return Step::One(s);
        }
        let t = Expr::truthy(cond.expr());
        let mut out = Vec::with_capacity(2);
        for (i, mut succ) in self.fork(s, vec![t.clone(), Expr::not(t)]) {
            if i == 0 {
                then(self, &mut succ);
            } else {
                other(self, &mut succ);
            }
            out.push(succ);
        }
        Step::Many(out)
    }

    fn step(&mut self, mut s: ExecState) -> Step {
        let m = self.eng.module;
        let (func, body, offset) = {
            let f = s.frames.last().unwrap();
            (f.func, f.body, f.pc)
        };
        let pc = Pc { func, offset };
        if s.trace.len() as u64 >= self.eng.config.budget.max_instructions {
            s.truncate("instruction budget exhausted");
            return Step::One(s);
        }
        s.trace.push(pc);
        let code = &m.functions[body].code;
        let Some(ins) = code.get(offset as usize) else {
            // falling off the end behaves like the final `end`
            self.do_return(&mut s);
            return Step::One(s);
        };
        match ins {
            Instr::Unreachable => s.abort("unreachable executed"),
            Instr::Nop => Self::advance(&mut s),
            Instr::Block { ty, end } => {
                let height = s.stack.len();
                let f = Self::frame(&mut s);
                f.labels.push(Label { kind: LabelKind::Block, target: end + 1, arity: ty.arity(), height });
                f.pc += 1;
            }
            Instr::Loop { .. } => {
                let height = s.stack.len();
                let f = Self::frame(&mut s);
                f.labels.push(Label { kind: LabelKind::Loop, target: offset + 1, arity: 0, height });
                *loop_counter(f, offset) = 1;
                f.pc += 1;
            }
            Instr::If { ty, else_at, end } => {
                let cond = s.pop();
                let (arity, else_at, end) = (ty.arity(), *else_at, *end);
                let height = s.stack.len();
                let label = Label { kind: LabelKind::Block, target: end + 1, arity, height };
                let l2 = label.clone();
                return self.fork_on(
                    s,
                    &cond,
                    pc,
                    move |_, t| {
                        let f = Self::frame(t);
                        f.labels.push(label.clone());
                        f.pc = offset + 1;
                    },
                    move |_, t| {
                        let f = Self::frame(t);
                        match else_at {
                            Some(e) => {
                                f.labels.push(l2.clone());
                                f.pc = e + 1;
                            }
                            None => f.pc = end + 1,
                        }
                    },
                );
            }
            Instr::Else { end } => Self::frame(&mut s).pc = *end,
            Instr::End => {
                let f = Self::frame(&mut s);
                if f.labels.pop().is_some() {
                    f.pc += 1;
                } else {
                    self.do_return(&mut s);
                }
            }
            Instr::Br(d) => self.branch(&mut s, *d),
            Instr::BrIf(d) => {
                let cond = s.pop();
                let d = *d;
                return self.fork_on(s, &cond, pc, move |r, t| r.branch(t, d), |_, t| Self::advance(t));
            }
            Instr::BrTable { targets, default } => {
                let idx = s.pop();
                if !idx.taints().is_empty() {
                    s.events.push(Event::Branch { pc, taints: idx.taints().clone() });
                }
                if let Some(i) = idx.as_con() {
                    let d = targets.get(i as usize).copied().unwrap_or(*default);
                    self.branch(&mut s, d);
                    return Step::One(s);
                }
                let e = idx.expr();
                let n = targets.len() as u128;
                let mut conds: Vec<Expr> = (0..n).map(|i| Expr::eq(e.clone(), Expr::constant(i, 32))).collect();
                conds.push(Expr::ule(Expr::constant(n, 32), e));
                let (targets, default) = (targets.clone(), *default);
                let mut out = Vec::new();
                for (i, mut t) in self.fork(s, conds) {
                    self.branch(&mut t, targets.get(i).copied().unwrap_or(default));
                    out.push(t);
                }
                return Step::Many(out);
            }
            Instr::Return => self.do_return(&mut s),
            Instr::Call(callee) => {
                let callee = *callee;
                Self::advance(&mut s);
                return self.call(s, callee, pc);
            }
            Instr::CallIndirect { type_index, .. } => {
                let type_index = *type_index;
                let idx = s.pop();
                Self::advance(&mut s);
                let Some(i) = self.pin(&mut s, &idx, "call_indirect index") else {
                    return Step::One(s);
                };
                let target = self.eng.table.get(i as usize).copied().flatten();
                match target {
                    None => s.abort("undefined table element"),
                    Some(f) if m.func_type(f) != m.types.get(type_index as usize) => s.abort("indirect call type mismatch"),
                    Some(f) => return self.call(s, f, pc),
                }
            }
            Instr::Drop => {
                s.pop();
                Self::advance(&mut s);
            }
            Instr::Select => {
                let c = s.pop();
                let b = s.pop();
                let a = s.pop();
                let v = match c.as_con() {
                    Some(0) => b,
                    Some(_) => a,
                    None => {
                        let taints = a.taints().union(b.taints()).union(c.taints());
                        SymValue::sym(Expr::ite(Expr::truthy(c.expr()), a.expr(), b.expr())).with_taints(taints)
                    }
                };
                s.push(v);
                Self::advance(&mut s);
            }
            Instr::LocalGet(i) => {
                let v = Self::frame(&mut s).locals[*i as usize].clone();
                s.push(v);
                Self::advance(&mut s);
            }
            Instr::LocalSet(i) => {
                let v = s.pop();
                let f = Self::frame(&mut s);
                f.locals[*i as usize] = v;
                f.pc += 1;
            }
            Instr::LocalTee(i) => {
                let v = s.stack.last().unwrap().clone();
                let f = Self::frame(&mut s);
                f.locals[*i as usize] = v;
                f.pc += 1;
            }
            Instr::GlobalGet(i) => {
                let v = s.globals[*i as usize].clone();
                s.push(v);
                Self::advance(&mut s);
            }
            Instr::GlobalSet(i) => {
                let v = s.pop();
                s.globals[*i as usize] = v;
                Self::advance(&mut s);
            }
            Instr::Load { kind, arg } => {
                let addr = s.pop();
                let Some(a) = self.address(&mut s, &addr) else {
                    return Step::One(s);
                };
                match s.mem.read(a + u64::from(arg.offset), u32::from(kind.bytes)) {
                    Ok(v) => {
                        let bits = kind.ty.bits();
                        let v = if v.width() == bits {
                            v
                        } else if kind.signed {
                            v.map(|e| Expr::sext(e, bits))
                        } else {
                            v.map(|e| Expr::zext(e, bits))
                        };
                        s.push(v);
                        Self::advance(&mut s);
                    }
                    Err(e) => s.abort(e.to_string()),
                }
            }
            Instr::Store { kind, arg } => {
                let v = s.pop();
                let addr = s.pop();
                let Some(a) = self.address(&mut s, &addr) else {
                    return Step::One(s);
                };
                let bits = 8 * u32::from(kind.bytes);
                let v = if v.width() == bits { v } else { v.map(|e| Expr::extract(e, bits - 1, 0)) };
                match s.mem.write(a + u64::from(arg.offset), &v) {
                    Ok(()) => Self::advance(&mut s),
                    Err(e) => s.abort(e.to_string()),
                }
            }
            Instr::MemorySize => {
                let p = s.mem.pages();
                s.push(SymValue::i32(p));
                Self::advance(&mut s);
            }
            Instr::MemoryGrow => {
                let d = s.pop();
                let Some(d) = self.pin(&mut s, &d, "memory.grow delta") else {
                    return Step::One(s);
                };
                let r = u32::try_from(d).ok().and_then(|d| s.mem.grow(d)).unwrap_or(u32::MAX);
                s.push(SymValue::i32(r));
                Self::advance(&mut s);
            }
            Instr::I32Const(v) => {
                s.push(SymValue::i32(*v as u32));
                Self::advance(&mut s);
            }
            Instr::I64Const(v) => {
                s.push(SymValue::i64(*v as u64));
                Self::advance(&mut s);
            }
            Instr::F32Const(b) => {
                s.push(SymValue::i32(*b));
                Self::advance(&mut s);
            }
            Instr::F64Const(b) => {
                s.push(SymValue::i64(*b));
                Self::advance(&mut s);
            }
            Instr::Int { op, .. } => return self.int_op(s, *op, pc),
            Instr::Float(opcode) => {
                let opcode = *opcode;
                let (params, result) = crate::wasm::float_signature(opcode).expect("validated float opcode");
                let mut args = vec![0u64; params.len()];
                for i in (0..params.len()).rev() {
                    let v = s.pop();
                    let Some(x) = self.pin(&mut s, &v, "float operand") else {
                        return Step::One(s);
                    };
                    args[i] = x as u64;
                }
                match eval_float(opcode, &args) {
                    Some(r) => {
                        s.push(SymValue::con(u128::from(r), result.bits()));
                        Self::advance(&mut s);
                    }
                    None => s.abort("invalid conversion to integer"),
                }
            }
        }
        Step::One(s)
    }

    fn int_op(&mut self, mut s: ExecState, op: IntOp, pc: Pc) -> Step {
        if op.is_unary() {
            let a = s.pop();
            s.push(eval_unop(op, &a));
            Self::advance(&mut s);
            return Step::One(s);
        }
        let b = s.pop();
        let a = s.pop();
        if matches!(op, IntOp::RemS | IntOp::RemU) {
            let taints = a.taints().union(b.taints());
            if !taints.is_empty() {
                s.events.push(Event::Rem { pc, taints });
            }
        }
        let divides = matches!(op, IntOp::DivS | IntOp::DivU | IntOp::RemS | IntOp::RemU);
        if divides && b.is_sym() {
            let w = b.width();
            let be = b.expr();
            let mut trap = Expr::eq(be.clone(), Expr::constant(0, w));
            if op == IntOp::DivS {
                let min = Expr::eq(a.expr(), Expr::constant(1u128 << (w - 1), w));
                trap = Expr::or(trap, Expr::and(min, Expr::eq(be, Expr::constant(mask(w), w))));
            }
            let mut out = Vec::new();
            for (i, mut t) in self.fork(s, vec![Expr::not(trap.clone()), trap]) {
                if i == 0 {
                    self.finish_binop(&mut t, op, &a, &b, pc);
                } else {
                    t.abort("integer divide by zero or overflow");
                }
                out.push(t);
            }
            return Step::Many(out);
        }
        self.finish_binop(&mut s, op, &a, &b, pc);
        Step::One(s)
    }

    fn finish_binop(&mut self, s: &mut ExecState, op: IntOp, a: &SymValue, b: &SymValue, pc: Pc) {
        match eval_binop(op, a, b) {
            Ok(v) => {
                if v.is_sym() && matches!(op, IntOp::Add | IntOp::Sub | IntOp::Mul) {
                    let mode = self.eng.config.overflow;
                    if mode != OverflowMode::Off {
                        let condition = crate::detect::overflow_condition(op, &a.expr(), &b.expr(), mode == OverflowMode::Literal);
                        s.overflow_sites.push(OverflowSite { pc, condition });
                    }
                }
                s.push(v);
                Self::advance(s);
            }
            Err(ArithError::DivisionByZero) => s.abort("integer divide by zero"),
            Err(ArithError::IntegerOverflow) => s.abort("integer overflow"),
        }
    }

    fn call(&mut self, mut s: ExecState, callee: u32, pc: Pc) -> Step {
        let m = self.eng.module;
        let ty = m.func_type(callee).expect("validated call target").clone();
        let args = s.stack.split_off(s.stack.len() - ty.params.len());
        match m.func(callee) {
            Some(FuncRef::Imported(imp)) => {
                debug_assert!(matches!(imp.kind, ImportKind::Func(_)));
                let result: Option<ValType> = ty.results.first().copied();
                let name = imp.field.clone();
                crate::host::dispatch(self, s, pc, &name, args, result).into()
            }
            _ => {
                self.enter(&mut s, callee, args);
                Step::One(s)
            }
        }
    }
}

fn loop_counter(f: &mut Frame, header: u32) -> &mut u32 {
    let i = match f.loops.iter().position(|(h, _)| *h == header) {
        Some(i) => i,
        None => {
            f.loops.push((header, 0));
            f.loops.len() - 1
        }
    };
    &mut f.loops[i].1
}
