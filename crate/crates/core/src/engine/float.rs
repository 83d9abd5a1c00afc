//! Concrete semantics of WASM 1.0 floating-point opcodes over raw bit
//! patterns. Symbolic operands are pinned by the caller before evaluation.

/// Result bits, or `None` on a trapping conversion.
pub fn eval_float(opcode: u8, args: &[u64]) -> Option<u64> {
    let f32a = |i: usize| f32::from_bits(args[i] as u32);
    let f64a = |i: usize| f64::from_bits(args[i]);
    let b = |v: bool| u64::from(v);
    let r32 = |v: f32| u64::from(v.to_bits());
    let r64 = |v: f64| v.to_bits();
    Some(match opcode {
        0x5B => b(f32a(0) == f32a(1)),
        0x5C => b(f32a(0) != f32a(1)),
        0x5D => b(f32a(0) < f32a(1)),
        0x5E => b(f32a(0) > f32a(1)),
        0x5F => b(f32a(0) <= f32a(1)),
        0x60 => b(f32a(0) >= f32a(1)),
        0x61 => b(f64a(0) == f64a(1)),
        0x62 => b(f64a(0) != f64a(1)),
        0x63 => b(f64a(0) < f64a(1)),
        0x64 => b(f64a(0) > f64a(1)),
        0x65 => b(f64a(0) <= f64a(1)),
        0x66 => b(f64a(0) >= f64a(1)),
        0x8B => r32(f32a(0).abs()),
        0x8C => r32(-f32a(0)),
        0x8D => r32(f32a(0).ceil()),
        0x8E => r32(f32a(0).floor()),
        0x8F => r32(f32a(0).trunc()),
        0x90 => r32(f32a(0).round_ties_even()),
        0x91 => r32(f32a(0).sqrt()),
        0x92 => r32(f32a(0) + f32a(1)),
        0x93 => r32(f32a(0) - f32a(1)),
        0x94 => r32(f32a(0) * f32a(1)),
        0x95 => r32(f32a(0) / f32a(1)),
        0x96 => r32(min32(f32a(0), f32a(1))),
        0x97 => r32(max32(f32a(0), f32a(1))),
        0x98 => r32(f32a(0).copysign(f32a(1))),
        0x99 => r64(f64a(0).abs()),
        0x9A => r64(-f64a(0)),
        0x9B => r64(f64a(0).ceil()),
        0x9C => r64(f64a(0).floor()),
        0x9D => r64(f64a(0).trunc()),
        0x9E => r64(f64a(0).round_ties_even()),
        0x9F => r64(f64a(0).sqrt()),
        0xA0 => r64(f64a(0) + f64a(1)),
        0xA1 => r64(f64a(0) - f64a(1)),
        0xA2 => r64(f64a(0) * f64a(1)),
        0xA3 => r64(f64a(0) / f64a(1)),
        0xA4 => r64(min64(f64a(0), f64a(1))),
        0xA5 => r64(max64(f64a(0), f64a(1))),
        0xA6 => r64(f64a(0).copysign(f64a(1))),
        0xA8 => trunc(f64::from(f32a(0)), -2f64.powi(31), 2f64.powi(31))? as i32 as u32 as u64,
        0xA9 => trunc(f64::from(f32a(0)), 0.0, 2f64.powi(32))? as u32 as u64,
        0xAA => trunc(f64a(0), -2f64.powi(31), 2f64.powi(31))? as i32 as u32 as u64,
        0xAB => trunc(f64a(0), 0.0, 2f64.powi(32))? as u32 as u64,
        0xAE => trunc(f64::from(f32a(0)), -2f64.powi(63), 2f64.powi(63))? as i64 as u64,
        0xAF => trunc(f64::from(f32a(0)), 0.0, 2f64.powi(64))? as u64,
        0xB0 => trunc(f64a(0), -2f64.powi(63), 2f64.powi(63))? as i64 as u64,
        0xB1 => trunc(f64a(0), 0.0, 2f64.powi(64))? as u64,
        0xB2 => r32(args[0] as u32 as i32 as f32),
        0xB3 => r32(args[0] as u32 as f32),
        0xB4 => r32(args[0] as i64 as f32),
        0xB5 => r32(args[0] as f32),
        0xB6 => r32(f64a(0) as f32),
        0xB7 => r64(f64::from(args[0] as u32 as i32)),
        0xB8 => r64(f64::from(args[0] as u32)),
        0xB9 => r64(args[0] as i64 as f64),
        0xBA => r64(args[0] as f64),
        0xBB => r64(f64::from(f32a(0))),
        0xBC..=0xBF => args[0],
        _ => return None,
    })
}

/// Truncation toward zero; traps (`None`) on NaN or when the truncated value
/// falls outside `[lo, hi)`.
fn trunc(x: f64, lo: f64, hi: f64) -> Option<f64> {
    let t = x.trunc();
    if x.is_nan() || t < lo || t >= hi {
        return None;
    }
    Some(t)
}

fn min32(a: f32, b: f32) -> f32 {
    if a.is_nan() || b.is_nan() {
        f32::NAN
    } else if a == b {
        if a.is_sign_negative() { a } else { b }
    } else {
        a.min(b)
    }
}

fn max32(a: f32, b: f32) -> f32 {
    if a.is_nan() || b.is_nan() {
        f32::NAN
    } else if a == b {
        if a.is_sign_positive() { a } else { b }
    } else {
        a.max(b)
    }
}

fn min64(a: f64, b: f64) -> f64 {
    if a.is_nan() || b.is_nan() {
        f64::NAN
    } else if a == b {
        if a.is_sign_negative() { a } else { b }
    } else {
        a.min(b)
    }
}

fn max64(a: f64, b: f64) -> f64 {
    if a.is_nan() || b.is_nan() {
        f64::NAN
    } else if a == b {
        if a.is_sign_positive() { a } else { b }
    } else {
        a.max(b)
    }
}
