use super::ValType;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockType {
    Empty,
    Value(ValType),
}

impl BlockType {
    pub fn arity(self) -> usize {
        match self {
            BlockType::Empty => 0,
            BlockType::Value(_) => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MemArg {
    pub align: u32,
    pub offset: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LoadKind {
    pub ty: ValType,
    /// Bytes read from memory.
    pub bytes: u8,
    /// Sign-extend narrow loads.
    pub signed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StoreKind {
    pub ty: ValType,
    pub bytes: u8,
}

/// Integer operations. The operand width is carried by [`Instr::Int`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum IntOp {
    Eqz,
    Eq,
    Ne,
    LtS,
    LtU,
    GtS,
    GtU,
    LeS,
    LeU,
    GeS,
    GeU,
    Clz,
    Ctz,
    Popcnt,
    Add,
    Sub,
    Mul,
    DivS,
    DivU,
    RemS,
    RemU,
    And,
    Or,
    Xor,
    Shl,
    ShrS,
    ShrU,
    Rotl,
    Rotr,
    /// `i32.wrap_i64` (operand is 64-bit, result 32-bit).
    Wrap,
    /// `i64.extend_i32_s`.
    ExtendS,
    /// `i64.extend_i32_u`.
    ExtendU,
}

impl IntOp {
    pub fn is_compare(self) -> bool {
        use IntOp::*;
        matches!(self, Eqz | Eq | Ne | LtS | LtU | GtS | GtU | LeS | LeU | GeS | GeU)
    }

    pub fn is_unary(self) -> bool {
        use IntOp::*;
        matches!(self, Eqz | Clz | Ctz | Popcnt | Wrap | ExtendS | ExtendU)
    }

    pub fn is_conversion(self) -> bool {
        matches!(self, IntOp::Wrap | IntOp::ExtendS | IntOp::ExtendU)
    }
}

/// One decoded instruction. Structured-control instructions carry the
/// instruction indices of their matching `else`/`end`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Instr {
    Unreachable,
    Nop,
    Block { ty: BlockType, end: u32 },
    Loop { ty: BlockType, end: u32 },
    If { ty: BlockType, else_at: Option<u32>, end: u32 },
    Else { end: u32 },
    End,
    Br(u32),
    BrIf(u32),
    BrTable { targets: Box<[u32]>, default: u32 },
    Return,
    Call(u32),
    CallIndirect { type_index: u32, table: u32 },
    Drop,
    Select,
    LocalGet(u32),
    LocalSet(u32),
    LocalTee(u32),
    GlobalGet(u32),
    GlobalSet(u32),
    Load { kind: LoadKind, arg: MemArg },
    Store { kind: StoreKind, arg: MemArg },
    MemorySize,
    MemoryGrow,
    I32Const(i32),
    I64Const(i64),
    F32Const(u32),
    F64Const(u64),
    /// Integer op; `wide` selects i64 (for conversions: the result type).
    Int { op: IntOp, wide: bool },
    /// Any floating-point or float/int conversion opcode, executed concretely.
    Float(u8),
}

/// Operand/result types of a [`Instr::Float`] opcode, or `None` if the byte
/// is not a WASM 1.0 float opcode.
pub fn float_signature(opcode: u8) -> Option<(&'static [ValType], ValType)> {
    use ValType::*;
    let sig: (&'static [ValType], ValType) = match opcode {
        0x5B..=0x60 => (&[F32, F32], I32),
        0x61..=0x66 => (&[F64, F64], I32),
        0x8B..=0x91 => (&[F32], F32),
        0x92..=0x98 => (&[F32, F32], F32),
        0x99..=0x9F => (&[F64], F64),
        0xA0..=0xA6 => (&[F64, F64], F64),
        0xA8 | 0xA9 => (&[F32], I32),
        0xAA | 0xAB => (&[F64], I32),
        0xAE | 0xAF => (&[F32], I64),
        0xB0 | 0xB1 => (&[F64], I64),
        0xB2 | 0xB3 => (&[I32], F32),
        0xB4 | 0xB5 => (&[I64], F32),
        0xB6 => (&[F64], F32),
        0xB7 | 0xB8 => (&[I32], F64),
        0xB9 | 0xBA => (&[I64], F64),
        0xBB => (&[F32], F64),
        0xBC => (&[F32], I32),
        0xBD => (&[F64], I64),
        0xBE => (&[I32], F32),
        0xBF => (&[I64], F64),
        _ => return None,
    };
    Some(sig)
}

/// Maps an integer opcode byte to its operation and width.
pub(crate) fn int_opcode(opcode: u8) -> Option<(IntOp, bool)> {
    use IntOp::*;
    const CMP: [IntOp; 11] = [Eqz, Eq, Ne, LtS, LtU, GtS, GtU, LeS, LeU, GeS, GeU];
    const ARITH: [IntOp; 18] = [
        Clz, Ctz, Popcnt, Add, Sub, Mul, DivS, DivU, RemS, RemU, And, Or, Xor, Shl, ShrS, ShrU,
        Rotl, Rotr,
    ];
    Some(match opcode {
        0x45..=0x4F => (CMP[(opcode - 0x45) as usize], false),
        0x50..=0x5A => (CMP[(opcode - 0x50) as usize], true),
        0x67..=0x78 => (ARITH[(opcode - 0x67) as usize], false),
        0x79..=0x8A => (ARITH[(opcode - 0x79) as usize], true),
        0xA7 => (Wrap, false),
        0xAC => (ExtendS, true),
        0xAD => (ExtendU, true),
        _ => return None,
    })
}

pub(crate) fn load_kind(opcode: u8) -> Option<LoadKind> {
    use ValType::*;
    let (ty, bytes, signed) = match opcode {
        0x28 => (I32, 4, false),
        0x29 => (I64, 8, false),
        0x2A => (F32, 4, false),
        0x2B => (F64, 8, false),
        0x2C => (I32, 1, true),
        0x2D => (I32, 1, false),
        0x2E => (I32, 2, true),
        0x2F => (I32, 2, false),
        0x30 => (I64, 1, true),
        0x31 => (I64, 1, false),
        0x32 => (I64, 2, true),
        0x33 => (I64, 2, false),
        0x34 => (I64, 4, true),
        0x35 => (I64, 4, false),
        _ => return None,
    };
    Some(LoadKind { ty, bytes, signed })
}

pub(crate) fn store_kind(opcode: u8) -> Option<StoreKind> {
    use ValType::*;
    let (ty, bytes) = match opcode {
        0x36 => (I32, 4),
        0x37 => (I64, 8),
        0x38 => (F32, 4),
        0x39 => (F64, 8),
        0x3A => (I32, 1),
        0x3B => (I32, 2),
        0x3C => (I64, 1),
        0x3D => (I64, 2),
        0x3E => (I64, 4),
        _ => return None,
    };
    Some(StoreKind { ty, bytes })
}
