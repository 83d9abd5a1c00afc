//! WASM integer instruction semantics over [`SymValue`]s.

use thiserror::Error;

use super::expr::{mask, BinOp, CmpOp, Expr, UnOp};
use super::value::SymValue;
use crate::wasm::IntOp;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum ArithError {
    #[error("integer division by zero")]
    DivisionByZero,
    #[error("integer overflow in signed division")]
    IntegerOverflow,
}

fn bool_to_i32(cond: Expr) -> Expr {
    Expr::zext(cond, 32)
}

/// Applies a binary integer op. Comparisons yield an i32 0/1.
///
/// Concrete zero divisors and `MIN / -1` are reported as errors; symbolic
/// divisors are left to the caller, which forks on them beforehand.
pub fn eval_binop(op: IntOp, a: &SymValue, b: &SymValue) -> Result<SymValue, ArithError> {
    assert_eq!(a.width(), b.width(), "{op:?} operand widths differ");
    let w = a.width();
    if matches!(op, IntOp::DivS | IntOp::DivU | IntOp::RemS | IntOp::RemU) {
        if b.as_con() == Some(0) {
            return Err(ArithError::DivisionByZero);
        }
        if op == IntOp::DivS && b.as_con() == Some(mask(w)) && a.as_con() == Some(1u128 << (w - 1)) {
            return Err(ArithError::IntegerOverflow);
        }
    }
    let (x, y) = (a.expr(), b.expr());
    // shift and rotate amounts are taken modulo the width
    let amount = |y: Expr| Expr::bin(BinOp::And, y, Expr::constant(u128::from(w - 1), w));
    let e = match op {
        IntOp::Add => Expr::bin(BinOp::Add, x, y),
        IntOp::Sub => Expr::bin(BinOp::Sub, x, y),
        IntOp::Mul => Expr::bin(BinOp::Mul, x, y),
        IntOp::DivU => Expr::bin(BinOp::UDiv, x, y),
        IntOp::DivS => Expr::bin(BinOp::SDiv, x, y),
        IntOp::RemU => Expr::bin(BinOp::URem, x, y),
        IntOp::RemS => Expr::bin(BinOp::SRem, x, y),
        IntOp::And => Expr::bin(BinOp::And, x, y),
        IntOp::Or => Expr::bin(BinOp::Or, x, y),
        IntOp::Xor => Expr::bin(BinOp::Xor, x, y),
        IntOp::Shl => Expr::bin(BinOp::Shl, x, amount(y)),
        IntOp::ShrU => Expr::bin(BinOp::LShr, x, amount(y)),
        IntOp::ShrS => Expr::bin(BinOp::AShr, x, amount(y)),
        IntOp::Rotl => Expr::bin(BinOp::Rotl, x, y),
        IntOp::Rotr => Expr::bin(BinOp::Rotr, x, y),
        IntOp::Eq => bool_to_i32(Expr::eq(x, y)),
        IntOp::Ne => bool_to_i32(Expr::ne(x, y)),
        IntOp::LtU => bool_to_i32(Expr::cmp(CmpOp::Ult, x, y)),
        IntOp::LtS => bool_to_i32(Expr::cmp(CmpOp::Slt, x, y)),
        IntOp::GtU => bool_to_i32(Expr::cmp(CmpOp::Ult, y, x)),
        IntOp::GtS => bool_to_i32(Expr::cmp(CmpOp::Slt, y, x)),
        IntOp::LeU => bool_to_i32(Expr::cmp(CmpOp::Ule, x, y)),
        IntOp::LeS => bool_to_i32(Expr::cmp(CmpOp::Sle, x, y)),
        IntOp::GeU => bool_to_i32(Expr::cmp(CmpOp::Ule, y, x)),
        IntOp::GeS => bool_to_i32(Expr::cmp(CmpOp::Sle, y, x)),
        _ => panic!("{op:?} is not a binary operator"),
    };
    Ok(SymValue::sym(e).with_taints(a.taints().union(b.taints())))
}

/// Applies a unary integer op or conversion.
pub fn eval_unop(op: IntOp, a: &SymValue) -> SymValue {
    let x = a.expr();
    let w = a.width();
    let e = match op {
        IntOp::Eqz => bool_to_i32(Expr::eq(x, Expr::constant(0, w))),
        IntOp::Clz => Expr::un(UnOp::Clz, x),
        IntOp::Ctz => Expr::un(UnOp::Ctz, x),
        IntOp::Popcnt => Expr::un(UnOp::Popcnt, x),
        IntOp::Wrap => Expr::extract(x, 31, 0),
        IntOp::ExtendS => Expr::sext(x, 64),
        IntOp::ExtendU => Expr::zext(x, 64),
        _ => panic!("{op:?} is not a unary operator"),
    };
    SymValue::sym(e).with_taints(a.taints().clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sym::value::{TaintLabel, TaintOrigin, Taints, ValueKind};

    const BIN_OPS: [IntOp; 25] = [
        IntOp::Add,
        IntOp::Sub,
        IntOp::Mul,
        IntOp::DivS,
        IntOp::DivU,
        IntOp::RemS,
        IntOp::RemU,
        IntOp::And,
        IntOp::Or,
        IntOp::Xor,
        IntOp::Shl,
        IntOp::ShrS,
        IntOp::ShrU,
        IntOp::Rotl,
        IntOp::Rotr,
        IntOp::Eq,
        IntOp::Ne,
        IntOp::LtS,
        IntOp::LtU,
        IntOp::GtS,
        IntOp::GtU,
        IntOp::LeS,
        IntOp::LeU,
        IntOp::GeS,
        IntOp::GeU,
    ];

    /// Reference semantics over i64/u64 arithmetic, narrowed to `w` bits.
    fn reference(op: IntOp, a: u64, b: u64, w: u32) -> Option<u64> {
        let m = if w == 64 { u64::MAX } else { (1u64 << w) - 1 };
        let sa = ((a << (64 - w)) as i64) >> (64 - w);
        let sb = ((b << (64 - w)) as i64) >> (64 - w);
        let k = (b % u64::from(w)) as u32;
        let min = if w == 64 { i64::MIN } else { -(1i64 << (w - 1)) };
        let r = match op {
            IntOp::Add => a.wrapping_add(b),
            IntOp::Sub => a.wrapping_sub(b),
            IntOp::Mul => a.wrapping_mul(b),
            IntOp::DivU => a.checked_div(b)?,
            IntOp::RemU => a.checked_rem(b)?,
            IntOp::DivS => {
                if sb == 0 || (sa == min && sb == -1) {
                    return None;
                }
                (sa / sb) as u64
            }
            IntOp::RemS => {
                if sb == 0 {
                    return None;
                }
                if sb == -1 {
                    0
                } else {
                    (sa % sb) as u64
                }
            }
            IntOp::And => a & b,
            IntOp::Or => a | b,
            IntOp::Xor => a ^ b,
            IntOp::Shl => a << k,
            IntOp::ShrU => a >> k,
            IntOp::ShrS => (sa >> k) as u64,
            IntOp::Rotl => {
                if k == 0 {
                    a
                } else {
                    (a << k) | (a >> (w - k))
                }
            }
            IntOp::Rotr => {
                if k == 0 {
                    a
                } else {
                    (a >> k) | (a << (w - k))
                }
            }
            IntOp::Eq => u64::from(a == b),
            IntOp::Ne => u64::from(a != b),
            IntOp::LtS => u64::from(sa < sb),
            IntOp::LtU => u64::from(a < b),
            IntOp::GtS => u64::from(sa > sb),
            IntOp::GtU => u64::from(a > b),
            IntOp::LeS => u64::from(sa <= sb),
            IntOp::LeU => u64::from(a <= b),
            IntOp::GeS => u64::from(sa >= sb),
            IntOp::GeU => u64::from(a >= b),
            _ => unreachable!(),
        };
        Some(if op.is_compare() { r } else { r & m })
    }

    fn check(op: IntOp, a: u64, b: u64, w: u32) {
        let got = eval_binop(op, &SymValue::con(a.into(), w), &SymValue::con(b.into(), w));
        match reference(op, a, b, w) {
            None => assert!(got.is_err(), "{op:?} {a} {b} w{w}"),
            Some(r) => {
                let v = got.unwrap();
                assert_eq!(v.as_con(), Some(u128::from(r)), "{op:?} {a:#x} {b:#x} w{w}");
                assert_eq!(v.width(), if op.is_compare() { 32 } else { w });
            }
        }
    }

    #[test]
    fn exhaustive_8bit_agreement() {
        for op in BIN_OPS {
            for a in 0..=255u64 {
                for b in 0..=255u64 {
                    check(op, a, b, 8);
                }
            }
        }
    }

    #[test]
    fn randomized_32_and_64bit_agreement() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let specials = [0u64, 1, u64::MAX, 1 << 31, (1 << 31) - 1, 1 << 63, (1 << 32) - 1];
        for i in 0..10_000 {
            let w = if i % 2 == 0 { 32 } else { 64 };
            let m = if w == 64 { u64::MAX } else { (1u64 << w) - 1 };
            let pick = |rng: &mut rand_chacha::ChaCha8Rng| {
                if rng.random_ratio(1, 4) {
                    specials[rng.random_range(0..specials.len())] & m
                } else {
                    rng.random::<u64>() & m
                }
            };
            let (a, b) = (pick(&mut rng), pick(&mut rng));
            for op in BIN_OPS {
                check(op, a, b, w);
            }
        }
    }

    #[test]
    fn wraparound_and_symbolic_propagation() {
        let r = eval_binop(IntOp::Add, &SymValue::i32(0xFFFF_FFFF), &SymValue::i32(1)).unwrap();
        assert_eq!(r.as_con(), Some(0));

        let t = Taints::single(TaintLabel::new(TaintOrigin::BlockchainInfo, "tapos_block_num", 0));
        let var = SymValue::var("t", 64).with_taints(t.clone());
        let r = eval_binop(IntOp::RemU, &var, &SymValue::i64(100)).unwrap();
        assert_eq!(r.kind(), ValueKind::Sym);
        assert!(r.taints().is_superset(&t));
    }

    #[test]
    fn concrete_traps() {
        let z = SymValue::i32(0);
        assert_eq!(eval_binop(IntOp::DivU, &SymValue::i32(1), &z), Err(ArithError::DivisionByZero));
        assert_eq!(
            eval_binop(IntOp::DivS, &SymValue::i32(0x8000_0000), &SymValue::i32(u32::MAX)),
            Err(ArithError::IntegerOverflow)
        );
        // rem_s(MIN, -1) is defined as 0
        let r = eval_binop(IntOp::RemS, &SymValue::i32(0x8000_0000), &SymValue::i32(u32::MAX));
        assert_eq!(r.unwrap().as_con(), Some(0));
    }

    #[test]
    fn conversions() {
        assert_eq!(eval_unop(IntOp::Wrap, &SymValue::i64(0x1_0000_0005)).as_con(), Some(5));
        assert_eq!(
            eval_unop(IntOp::ExtendS, &SymValue::i32(0xFFFF_FFFE)).as_con(),
            Some(u128::from(u64::MAX - 1))
        );
        assert_eq!(eval_unop(IntOp::ExtendU, &SymValue::i32(0xFFFF_FFFE)).as_con(), Some(0xFFFF_FFFE));
        assert_eq!(eval_unop(IntOp::Eqz, &SymValue::i64(0)).as_con(), Some(1));
        assert_eq!(eval_unop(IntOp::Clz, &SymValue::i64(1)).as_con(), Some(63));
    }
}
