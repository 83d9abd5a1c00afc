use super::instr::{int_opcode, load_kind, store_kind, float_signature};
use super::reader::{Reader, Result};
use super::*;

const MAGIC: &[u8; 4] = b"\0asm";
const VERSION: u32 = 1;

/// Decodes a WASM 1.0 binary. Custom sections are skipped; post-1.0
/// constructs are rejected with [`LoadError::UnsupportedFeature`].
pub fn parse_module(bytes: &[u8]) -> std::result::Result<WasmModule, LoadError> {
    let mut r = Reader::new(bytes, 0);
    let magic = r.bytes(4)?;
    if magic != MAGIC {
        return r.malformed("bad magic number");
    }
    if r.fixed_u32()? != VERSION {
        return r.malformed("unsupported binary version");
    }

    let mut m = WasmModule::default();
    let mut func_types: Vec<u32> = Vec::new();
    let mut saw_code = false;
    let mut last_id = 0u8;
    while !r.is_empty() {
        let id = r.u8()?;
        let size = r.var_u32()? as usize;
        let mut s = r.sub(size)?;
        if id == 0 {
            // custom section: name then opaque payload
            s.name()?;
            continue;
        }
        if id > 11 {
            if id == 12 {
                return s.unsupported("data count section (bulk memory)");
            }
            return s.malformed(format!("unknown section id {id}"));
        }
        if id <= last_id {
            return s.malformed(format!("section {id} out of order"));
        }
        last_id = id;
        match id {
            1 => {
                for _ in 0..s.count()? {
                    m.types.push(read_func_type(&mut s)?);
                }
            }
            2 => {
                for _ in 0..s.count()? {
                    m.imports.push(read_import(&mut s)?);
                }
            }
            3 => {
                for _ in 0..s.count()? {
                    func_types.push(s.var_u32()?);
                }
            }
            4 => {
                for _ in 0..s.count()? {
                    let elem = s.u8()?;
                    if elem != 0x70 {
                        return s.malformed("table element type must be funcref");
                    }
                    m.tables.push(read_limits(&mut s)?);
                }
            }
            5 => {
                let n = s.count()?;
                if n > 1 {
                    return s.unsupported("multiple memories");
                }
                if n == 1 {
                    m.memory = Some(read_limits(&mut s)?);
                }
            }
            6 => {
                for _ in 0..s.count()? {
                    let ty = read_global_type(&mut s)?;
                    let init = read_const_expr(&mut s)?;
                    m.globals.push(Global { ty, init });
                }
            }
            7 => {
                for _ in 0..s.count()? {
                    let name = s.name()?;
                    let kind = match s.u8()? {
                        0 => ExportKind::Func,
                        1 => ExportKind::Table,
                        2 => ExportKind::Memory,
                        3 => ExportKind::Global,
                        k => return s.malformed(format!("bad export kind {k}")),
                    };
                    let index = s.var_u32()?;
                    if m.exports.insert(name.clone(), Export { kind, index }).is_some() {
                        return s.malformed(format!("duplicate export `{name}`"));
                    }
                }
            }
            8 => m.start = Some(s.var_u32()?),
            9 => {
                for _ in 0..s.count()? {
                    let table = s.var_u32()?;
                    if table != 0 {
                        return s.unsupported("element segment flags (reference types)");
                    }
                    let offset = read_const_expr(&mut s)?;
                    let mut functions = Vec::new();
                    for _ in 0..s.count()? {
                        functions.push(s.var_u32()?);
                    }
                    m.elements.push(ElementSegment {
                        table,
                        offset,
                        functions,
                    });
                }
            }
            10 => {
                saw_code = true;
                let n = s.count()?;
                if n as usize != func_types.len() {
                    return s.malformed("function and code section counts differ");
                }
                for type_index in func_types.iter().copied() {
                    let size = s.var_u32()? as usize;
                    let mut body = s.sub(size)?;
                    m.functions.push(read_body(&mut body, type_index)?);
                }
            }
            11 => {
                for _ in 0..s.count()? {
                    let memory = s.var_u32()?;
                    if memory != 0 {
                        return s.unsupported("data segment flags (bulk memory)");
                    }
                    let offset = read_const_expr(&mut s)?;
                    let len = s.var_u32()? as usize;
                    let bytes = s.bytes(len)?.to_vec();
                    m.data.push(DataSegment {
                        memory,
                        offset,
                        bytes,
                    });
                }
            }
            _ => unreachable!(),
        }
        if !s.is_empty() {
            return s.malformed(format!("section {id} has trailing bytes"));
        }
    }
    if !saw_code && !func_types.is_empty() {
        return r.malformed("function section without code section");
    }
    Ok(m)
}

fn read_val_type(r: &mut Reader) -> Result<ValType> {
    match r.u8()? {
        0x7F => Ok(ValType::I32),
        0x7E => Ok(ValType::I64),
        0x7D => Ok(ValType::F32),
        0x7C => Ok(ValType::F64),
        0x7B => r.unsupported("v128 value type (SIMD)"),
        0x70 | 0x6F => r.unsupported("reference value type"),
        b => r.malformed(format!("bad value type {b:#x}")),
    }
}

fn read_func_type(r: &mut Reader) -> Result<FuncType> {
    if r.u8()? != 0x60 {
        return r.malformed("expected function type");
    }
    let mut params = Vec::new();
    for _ in 0..r.count()? {
        params.push(read_val_type(r)?);
    }
    let mut results = Vec::new();
    for _ in 0..r.count()? {
        results.push(read_val_type(r)?);
    }
    if results.len() > 1 {
        return r.unsupported("multi-value results");
    }
    Ok(FuncType { params, results })
}

fn read_limits(r: &mut Reader) -> Result<Limits> {
    match r.u8()? {
        0 => Ok(Limits {
            min: r.var_u32()?,
            max: None,
        }),
        1 => Ok(Limits {
            min: r.var_u32()?,
            max: Some(r.var_u32()?),
        }),
        2 | 3 => r.unsupported("shared memory (threads)"),
        b => r.malformed(format!("bad limits flag {b:#x}")),
    }
}

fn read_global_type(r: &mut Reader) -> Result<GlobalType> {
    let ty = read_val_type(r)?;
    let mutable = match r.u8()? {
        0 => false,
        1 => true,
        b => return r.malformed(format!("bad mutability {b:#x}")),
    };
    Ok(GlobalType { ty, mutable })
}

fn read_import(r: &mut Reader) -> Result<Import> {
    let module = r.name()?;
    let field = r.name()?;
    let kind = match r.u8()? {
        0 => ImportKind::Func(r.var_u32()?),
        1 => {
            if r.u8()? != 0x70 {
                return r.malformed("table element type must be funcref");
            }
            ImportKind::Table(read_limits(r)?)
        }
        2 => ImportKind::Memory(read_limits(r)?),
        3 => ImportKind::Global(read_global_type(r)?),
        k => return r.malformed(format!("bad import kind {k}")),
    };
    Ok(Import {
        module,
        field,
        kind,
    })
}

fn read_const_expr(r: &mut Reader) -> Result<ConstExpr> {
    let expr = match r.u8()? {
        0x41 => ConstExpr::I32(r.var_i32()?),
        0x42 => ConstExpr::I64(r.var_i64()?),
        0x43 => ConstExpr::F32(r.fixed_u32()?),
        0x44 => ConstExpr::F64(r.fixed_u64()?),
        0x23 => ConstExpr::GlobalGet(r.var_u32()?),
        b => return r.unsupported(format!("constant expression opcode {b:#x}")),
    };
    if r.u8()? != 0x0B {
        return r.unsupported("extended constant expressions");
    }
    Ok(expr)
}

fn read_block_type(r: &mut Reader) -> Result<BlockType> {
    match r.peek() {
        Some(0x40) => {
            r.u8()?;
            Ok(BlockType::Empty)
        }
        Some(0x7F | 0x7E | 0x7D | 0x7C | 0x7B | 0x70 | 0x6F) => {
            Ok(BlockType::Value(read_val_type(r)?))
        }
        Some(_) => {
            r.var_s33()?;
            r.unsupported("type-indexed block types (multi-value)")
        }
        None => r.malformed("unexpected end of input"),
    }
}

fn memarg(r: &mut Reader) -> Result<MemArg> {
    Ok(MemArg {
        align: r.var_u32()?,
        offset: r.var_u32()?,
    })
}

fn read_body(r: &mut Reader, type_index: u32) -> Result<FunctionBody> {
    let mut locals = Vec::new();
    let mut total: u64 = 0;
    for _ in 0..r.count()? {
        let n = r.var_u32()?;
        total += u64::from(n);
        if total > 50_000 {
            return r.malformed("too many locals");
        }
        let ty = read_val_type(r)?;
        locals.extend(std::iter::repeat_n(ty, n as usize));
    }

    let mut code: Vec<Instr> = Vec::new();
    // indices of open block/loop/if instructions
    let mut open: Vec<usize> = Vec::new();
    loop {
        if r.is_empty() {
            return r.malformed("function body missing `end`");
        }
        let at = code.len();
        let opcode = r.u8()?;
        let instr = match opcode {
            0x00 => Instr::Unreachable,
            0x01 => Instr::Nop,
            0x02..=0x04 => {
                let ty = read_block_type(r)?;
                open.push(at);
                match opcode {
                    0x02 => Instr::Block { ty, end: 0 },
                    0x03 => Instr::Loop { ty, end: 0 },
                    _ => Instr::If {
                        ty,
                        else_at: None,
                        end: 0,
                    },
                }
            }
            0x05 => {
                let Some(&start) = open.last() else {
                    return r.malformed("`else` outside of `if`");
                };
                match &mut code[start] {
                    Instr::If { else_at, .. } if else_at.is_none() => *else_at = Some(at as u32),
                    _ => return r.malformed("`else` without matching `if`"),
                }
                Instr::Else { end: 0 }
            }
            0x0B => {
                if let Some(start) = open.pop() {
                    let end = at as u32;
                    match &mut code[start] {
                        Instr::Block { end: e, .. } | Instr::Loop { end: e, .. } => *e = end,
                        Instr::If { else_at, end: e, .. } => {
                            *e = end;
                            if let Some(else_at) = *else_at {
                                code[else_at as usize] = Instr::Else { end };
                            }
                        }
                        _ => unreachable!(),
                    }
                    Instr::End
                } else {
                    code.push(Instr::End);
                    break;
                }
            }
            0x0C => Instr::Br(r.var_u32()?),
            0x0D => Instr::BrIf(r.var_u32()?),
            0x0E => {
                let n = r.count()?;
                let mut targets = Vec::with_capacity(n as usize);
                for _ in 0..n {
                    targets.push(r.var_u32()?);
                }
                Instr::BrTable {
                    targets: targets.into_boxed_slice(),
                    default: r.var_u32()?,
                }
            }
            0x0F => Instr::Return,
            0x10 => Instr::Call(r.var_u32()?),
            0x11 => {
                let type_index = r.var_u32()?;
                let table = r.u8()?;
                if table != 0 {
                    return r.unsupported("call_indirect on a non-zero table");
                }
                Instr::CallIndirect {
                    type_index,
                    table: 0,
                }
            }
            0x12 | 0x13 => return r.unsupported("tail calls"),
            0x1A => Instr::Drop,
            0x1B => Instr::Select,
            0x1C => return r.unsupported("typed select (reference types)"),
            0x20 => Instr::LocalGet(r.var_u32()?),
            0x21 => Instr::LocalSet(r.var_u32()?),
            0x22 => Instr::LocalTee(r.var_u32()?),
            0x23 => Instr::GlobalGet(r.var_u32()?),
            0x24 => Instr::GlobalSet(r.var_u32()?),
            0x25 | 0x26 => return r.unsupported("table.get/table.set (reference types)"),
            0x28..=0x35 => Instr::Load {
                kind: load_kind(opcode).expect("load opcode range"),
                arg: memarg(r)?,
            },
            0x36..=0x3E => Instr::Store {
                kind: store_kind(opcode).expect("store opcode range"),
                arg: memarg(r)?,
            },
            0x3F | 0x40 => {
                if r.u8()? != 0 {
                    return r.unsupported("multi-memory");
                }
                if opcode == 0x3F {
                    Instr::MemorySize
                } else {
                    Instr::MemoryGrow
                }
            }
            0x41 => Instr::I32Const(r.var_i32()?),
            0x42 => Instr::I64Const(r.var_i64()?),
            0x43 => Instr::F32Const(r.fixed_u32()?),
            0x44 => Instr::F64Const(r.fixed_u64()?),
            0xC0..=0xC4 => return r.unsupported("sign-extension operators"),
            0xD0..=0xD2 => return r.unsupported("reference types"),
            0xFC => return r.unsupported("0xFC prefix (saturating truncation / bulk memory)"),
            0xFD => return r.unsupported("SIMD"),
            0xFE => return r.unsupported("threads"),
            _ => {
                if let Some((op, wide)) = int_opcode(opcode) {
                    Instr::Int { op, wide }
                } else if float_signature(opcode).is_some() {
                    Instr::Float(opcode)
                } else {
                    return r.malformed(format!("illegal opcode {opcode:#x}"));
                }
            }
        };
        code.push(instr);
    }
    if !r.is_empty() {
        return r.malformed("trailing bytes after function body");
    }
    Ok(FunctionBody {
        type_index,
        locals,
        code,
    })
}
