use super::instr::float_signature;
use super::*;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    /// Function index the violation was found in, if any.
    pub func: Option<u32>,
    /// Instruction index within the function body.
    pub offset: Option<u32>,
    pub message: String,
}

/// Result of [`validate_module`]; an empty report means the module is valid.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    fn module(&mut self, message: impl Into<String>) {
        self.violations.push(Violation {
            func: None,
            offset: None,
            message: message.into(),
        });
    }
}

/// Type-checks a parsed module against WASM 1.0 validation rules.
pub fn validate_module(m: &WasmModule) -> ValidationReport {
    let mut report = ValidationReport::default();

    for import in &m.imports {
        if let ImportKind::Func(t) = import.kind {
            if t as usize >= m.types.len() {
                report.module(format!(
                    "import {}.{} references type {t}",
                    import.module, import.field
                ));
            }
        }
    }
    for (i, body) in m.functions.iter().enumerate() {
        if body.type_index as usize >= m.types.len() {
            report.module(format!(
                "function {} references type {}",
                m.imported_func_count() + i as u32,
                body.type_index
            ));
        }
    }
    if m.memory.is_some() && m.memory_limits() != m.memory {
        report.module("module both imports and defines a memory");
    }
    if let Some(l) = m.memory_limits() {
        if l.min > MAX_PAGES || l.max.is_some_and(|max| max > MAX_PAGES || max < l.min) {
            report.module("memory limits out of range");
        }
    }
    if m.table_count() > 1 {
        report.module("more than one table");
    }

    for (name, export) in &m.exports {
        let ok = match export.kind {
            ExportKind::Func => export.index < m.func_count(),
            ExportKind::Table => export.index < m.table_count(),
            ExportKind::Memory => export.index == 0 && m.memory_limits().is_some(),
            ExportKind::Global => export.index < m.global_count(),
        };
        if !ok {
            report.module(format!("export `{name}` references a missing index"));
        }
    }

    if let Some(start) = m.start {
        match m.func_type(start) {
            Some(t) if t.params.is_empty() && t.results.is_empty() => {}
            Some(_) => report.module("start function must have type [] -> []"),
            None => report.module(format!("start function {start} does not exist")),
        }
    }

    for (i, g) in m.globals.iter().enumerate() {
        let ty = const_expr_type(m, &g.init, m.imported_global_count());
        if ty != Some(g.ty.ty) {
            report.module(format!("global {i} initializer has the wrong type"));
        }
    }

    let initial_bytes = m
        .memory_limits()
        .map(|l| u64::from(l.min) * PAGE_SIZE)
        .unwrap_or(0);
    for (i, seg) in m.data.iter().enumerate() {
        if m.memory_limits().is_none() {
            report.module(format!("data segment {i} without a memory"));
            continue;
        }
        match seg.offset {
            ConstExpr::I32(off) => {
                let end = u64::from(off as u32) + seg.bytes.len() as u64;
                if end > initial_bytes {
                    report.module(format!("data segment {i} does not fit in initial memory"));
                }
            }
            ConstExpr::GlobalGet(_) => {}
            _ => report.module(format!("data segment {i} offset must be i32")),
        }
    }
    for (i, seg) in m.elements.iter().enumerate() {
        if m.table_count() == 0 {
            report.module(format!("element segment {i} without a table"));
        }
        if !matches!(seg.offset, ConstExpr::I32(_) | ConstExpr::GlobalGet(_)) {
            report.module(format!("element segment {i} offset must be i32"));
        }
        if seg.functions.iter().any(|&f| f >= m.func_count()) {
            report.module(format!("element segment {i} references a missing function"));
        }
    }

    let imported = m.imported_func_count();
    for (i, body) in m.functions.iter().enumerate() {
        let func = imported + i as u32;
        if let Some(ty) = m.types.get(body.type_index as usize) {
            BodyChecker::new(m, func, ty, body, &mut report).run();
        }
    }
    report
}

fn const_expr_type(m: &WasmModule, e: &ConstExpr, imported_globals: u32) -> Option<ValType> {
    match *e {
        ConstExpr::I32(_) => Some(ValType::I32),
        ConstExpr::I64(_) => Some(ValType::I64),
        ConstExpr::F32(_) => Some(ValType::F32),
        ConstExpr::F64(_) => Some(ValType::F64),
        // only imported globals may be referenced in WASM 1.0
        ConstExpr::GlobalGet(g) if g < imported_globals => m.global_type(g).map(|t| t.ty),
        ConstExpr::GlobalGet(_) => None,
    }
}

struct Ctrl {
    results: Vec<ValType>,
    /// Branch targets of a loop take no values.
    is_loop: bool,
    height: usize,
    unreachable: bool,
}

struct BodyChecker<'a> {
    m: &'a WasmModule,
    func: u32,
    body: &'a FunctionBody,
    locals: Vec<ValType>,
    results: Vec<ValType>,
    stack: Vec<Option<ValType>>,
    ctrls: Vec<Ctrl>,
    report: &'a mut ValidationReport,
    at: u32,
    failed: bool,
}

type Check<T> = std::result::Result<T, String>;

impl<'a> BodyChecker<'a> {
    fn new(
        m: &'a WasmModule,
        func: u32,
        ty: &'a FuncType,
        body: &'a FunctionBody,
        report: &'a mut ValidationReport,
    ) -> Self {
        let mut locals = ty.params.clone();
        locals.extend_from_slice(&body.locals);
        BodyChecker {
            m,
            func,
            body,
            locals,
            results: ty.results.clone(),
            stack: Vec::new(),
            ctrls: Vec::new(),
            report,
            at: 0,
            failed: false,
        }
    }

    fn run(mut self) {
        self.ctrls.push(Ctrl {
            results: self.results.clone(),
            is_loop: false,
            height: 0,
            unreachable: false,
        });
        for (at, instr) in self.body.code.iter().enumerate() {
            self.at = at as u32;
            if let Err(message) = self.check(instr) {
                self.report.violations.push(Violation {
                    func: Some(self.func),
                    offset: Some(self.at),
                    message,
                });
                // one violation per function: later checks would cascade
                self.failed = true;
                break;
            }
        }
        if !self.failed && !self.ctrls.is_empty() {
            self.report.violations.push(Violation {
                func: Some(self.func),
                offset: None,
                message: "function body does not close all blocks".into(),
            });
        }
    }

    fn push(&mut self, t: ValType) {
        self.stack.push(Some(t));
    }

    fn pop(&mut self) -> Check<Option<ValType>> {
        let ctrl = self.ctrls.last().ok_or("instruction after function end")?;
        if self.stack.len() == ctrl.height {
            if ctrl.unreachable {
                return Ok(None);
            }
            return Err("operand stack underflow".into());
        }
        Ok(self.stack.pop().flatten())
    }

    fn pop_expect(&mut self, t: ValType) -> Check<()> {
        match self.pop()? {
            Some(actual) if actual != t => {
                Err(format!("type mismatch: expected {t:?}, found {actual:?}"))
            }
            _ => Ok(()),
        }
    }

    fn pop_all(&mut self, ts: &[ValType]) -> Check<()> {
        for t in ts.iter().rev() {
            self.pop_expect(*t)?;
        }
        Ok(())
    }

    fn label_types(&self, depth: u32) -> Check<Vec<ValType>> {
        let n = self.ctrls.len();
        if depth as usize >= n {
            return Err(format!("branch depth {depth} out of range"));
        }
        let ctrl = &self.ctrls[n - 1 - depth as usize];
        Ok(if ctrl.is_loop {
            Vec::new()
        } else {
            ctrl.results.clone()
        })
    }

    fn set_unreachable(&mut self) {
        if let Some(ctrl) = self.ctrls.last_mut() {
            self.stack.truncate(ctrl.height);
            ctrl.unreachable = true;
        }
    }

    fn push_ctrl(&mut self, ty: BlockType, is_loop: bool) {
        let results = match ty {
            BlockType::Empty => Vec::new(),
            BlockType::Value(t) => vec![t],
        };
        self.ctrls.push(Ctrl {
            results,
            is_loop,
            height: self.stack.len(),
            unreachable: false,
        });
    }

    fn pop_ctrl(&mut self) -> Check<Ctrl> {
        let results = self.ctrls.last().ok_or("unbalanced `end`")?.results.clone();
        self.pop_all(&results)?;
        let ctrl = self.ctrls.pop().expect("checked above");
        if self.stack.len() != ctrl.height {
            return Err("values remaining on the stack at end of block".into());
        }
        Ok(ctrl)
    }

    fn local(&self, i: u32) -> Check<ValType> {
        self.locals
            .get(i as usize)
            .copied()
            .ok_or_else(|| format!("local index {i} out of range"))
    }

    fn need_memory(&self) -> Check<()> {
        if self.m.memory_limits().is_none() {
            return Err("memory instruction without a memory".into());
        }
        Ok(())
    }

    fn check(&mut self, instr: &Instr) -> Check<()> {
        use ValType::*;
        match instr {
            Instr::Unreachable => self.set_unreachable(),
            Instr::Nop => {}
            Instr::Block { ty, .. } => self.push_ctrl(*ty, false),
            Instr::Loop { ty, .. } => self.push_ctrl(*ty, true),
            Instr::If { ty, .. } => {
                self.pop_expect(I32)?;
                self.push_ctrl(*ty, false);
            }
            Instr::Else { .. } => {
                let ctrl = self.pop_ctrl()?;
                self.ctrls.push(Ctrl {
                    results: ctrl.results,
                    is_loop: false,
                    height: self.stack.len(),
                    unreachable: false,
                });
            }
            Instr::End => {
                let ctrl = self.pop_ctrl()?;
                // an `if` without `else` must not produce a value
                if let Some(Instr::If { else_at: None, .. }) = self.opener() {
                    if !ctrl.results.is_empty() {
                        return Err("`if` without `else` must have an empty type".into());
                    }
                }
                for t in ctrl.results {
                    self.push(t);
                }
            }
            Instr::Br(d) => {
                let ts = self.label_types(*d)?;
                self.pop_all(&ts)?;
                self.set_unreachable();
            }
            Instr::BrIf(d) => {
                self.pop_expect(I32)?;
                let ts = self.label_types(*d)?;
                self.pop_all(&ts)?;
                for t in ts {
                    self.push(t);
                }
            }
            Instr::BrTable { targets, default } => {
                self.pop_expect(I32)?;
                let ts = self.label_types(*default)?;
                for d in targets.iter() {
                    if self.label_types(*d)?.len() != ts.len() {
                        return Err("br_table targets have inconsistent arity".into());
                    }
                }
                self.pop_all(&ts)?;
                self.set_unreachable();
            }
            Instr::Return => {
                let ts = self.results.clone();
                self.pop_all(&ts)?;
                self.set_unreachable();
            }
            Instr::Call(f) => {
                let ty = self
                    .m
                    .func_type(*f)
                    .ok_or_else(|| format!("call to missing function {f}"))?
                    .clone();
                self.pop_all(&ty.params)?;
                for t in ty.results {
                    self.push(t);
                }
            }
            Instr::CallIndirect { type_index, .. } => {
                if self.m.table_count() == 0 {
                    return Err("call_indirect without a table".into());
                }
                let ty = self
                    .m
                    .types
                    .get(*type_index as usize)
                    .ok_or_else(|| format!("call_indirect with missing type {type_index}"))?
                    .clone();
                self.pop_expect(I32)?;
                self.pop_all(&ty.params)?;
                for t in ty.results {
                    self.push(t);
                }
            }
            Instr::Drop => {
                self.pop()?;
            }
            Instr::Select => {
                self.pop_expect(I32)?;
                let a = self.pop()?;
                let b = self.pop()?;
                match (a, b) {
                    (Some(a), Some(b)) if a != b => {
                        return Err("select operands have different types".into())
                    }
                    (Some(t), _) | (_, Some(t)) => self.push(t),
                    (None, None) => self.stack.push(None),
                }
            }
            Instr::LocalGet(i) => {
                let t = self.local(*i)?;
                self.push(t);
            }
            Instr::LocalSet(i) => {
                let t = self.local(*i)?;
                self.pop_expect(t)?;
            }
            Instr::LocalTee(i) => {
                let t = self.local(*i)?;
                self.pop_expect(t)?;
                self.push(t);
            }
            Instr::GlobalGet(g) => {
                let gt = self
                    .m
                    .global_type(*g)
                    .ok_or_else(|| format!("global index {g} out of range"))?;
                self.push(gt.ty);
            }
            Instr::GlobalSet(g) => {
                let gt = self
                    .m
                    .global_type(*g)
                    .ok_or_else(|| format!("global index {g} out of range"))?;
                if !gt.mutable {
                    return Err(format!("global {g} is immutable"));
                }
                self.pop_expect(gt.ty)?;
            }
            Instr::Load { kind, arg } => {
                self.need_memory()?;
                if 1u64 << arg.align.min(63) > u64::from(kind.bytes) {
                    return Err("alignment exceeds natural alignment".into());
                }
                self.pop_expect(I32)?;
                self.push(kind.ty);
            }
            Instr::Store { kind, arg } => {
                self.need_memory()?;
                if 1u64 << arg.align.min(63) > u64::from(kind.bytes) {
                    return Err("alignment exceeds natural alignment".into());
                }
                self.pop_expect(kind.ty)?;
                self.pop_expect(I32)?;
            }
            Instr::MemorySize => {
                self.need_memory()?;
                self.push(I32);
            }
            Instr::MemoryGrow => {
                self.need_memory()?;
                self.pop_expect(I32)?;
                self.push(I32);
            }
            Instr::I32Const(_) => self.push(I32),
            Instr::I64Const(_) => self.push(I64),
            Instr::F32Const(_) => self.push(F32),
            Instr::F64Const(_) => self.push(F64),
            Instr::Int { op, wide } => {
                let operand = match op {
                    IntOp::Wrap => I64,
                    IntOp::ExtendS | IntOp::ExtendU => I32,
                    _ if *wide => I64,
                    _ => I32,
                };
                let arity = if op.is_unary() { 1 } else { 2 };
                for _ in 0..arity {
                    self.pop_expect(operand)?;
                }
                let result = if op.is_compare() {
                    I32
                } else if *wide {
                    I64
                } else {
                    I32
                };
                self.push(result);
            }
            Instr::Float(opcode) => {
                let (params, result) =
                    float_signature(*opcode).ok_or("unknown float opcode")?;
                self.pop_all(params)?;
                self.push(result);
            }
        }
        Ok(())
    }

    /// The instruction that opened the innermost still-open block, looked up
    /// after its frame was popped (used for the `if` without `else` rule).
    fn opener(&self) -> Option<&Instr> {
        let at = self.at as usize;
        self.body.code[..at].iter().enumerate().rev().find_map(|(i, instr)| match instr {
            Instr::If { end, .. } | Instr::Block { end, .. } | Instr::Loop { end, .. }
                if *end as usize == at =>
            {
                Some(&self.body.code[i])
            }
            _ => None,
        })
    }
}
