//! Hash-consed-free, reference-counted bitvector expression DAG.
//!
//! Widths range over `1..=128`; booleans are width-1 vectors. All smart
//! constructors fold constants and apply a small set of algebraic rewrites,
//! so a fully concrete expression is always a single `Const` node.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

pub const MAX_WIDTH: u32 = 128;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    UDiv,
    SDiv,
    URem,
    SRem,
    And,
    Or,
    Xor,
    Shl,
    LShr,
    AShr,
    /// Rotations take the amount modulo the width.
    Rotl,
    Rotr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CmpOp {
    Eq,
    Ult,
    Ule,
    Slt,
    Sle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum UnOp {
    Not,
    Neg,
    Clz,
    Ctz,
    Popcnt,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Kind {
    Const(u128),
    Var(Arc<str>),
    Bin(BinOp, Expr, Expr),
    Cmp(CmpOp, Expr, Expr),
    Un(UnOp, Expr),
    Extract { hi: u32, lo: u32, arg: Expr },
    ZExt(Expr),
    SExt(Expr),
    /// `Concat(hi, lo)`: `hi` occupies the most significant bits.
    Concat(Expr, Expr),
    Ite(Expr, Expr, Expr),
}

#[derive(Debug)]
pub struct Node {
    kind: Kind,
    width: u32,
    hash: u64,
}

/// A shared, immutable expression node.
#[derive(Clone)]
pub struct Expr(Arc<Node>);

impl PartialEq for Expr {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
            || (self.0.hash == other.0.hash
                && self.0.width == other.0.width
                && self.0.kind == other.0.kind)
    }
}

impl Eq for Expr {}

impl Hash for Expr {
    fn hash<H: Hasher>(&self, state: &mut H) {
        state.write_u64(self.0.hash);
    }
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

#[inline]
pub fn mask(width: u32) -> u128 {
    if width >= 128 {
        u128::MAX
    } else {
        (1u128 << width) - 1
    }
}

#[inline]
pub fn to_signed(v: u128, width: u32) -> i128 {
    if width >= 128 {
        v as i128
    } else {
        let shift = 128 - width;
        ((v << shift) as i128) >> shift
    }
}

#[inline]
fn sign_bit(v: u128, width: u32) -> bool {
    (v >> (width - 1)) & 1 == 1
}

/// Concrete semantics of binary operators over `width`-bit values.
/// Division by zero follows SMT-LIB: `udiv x 0 = ~0`, `urem x 0 = x`.
pub fn eval_bin(op: BinOp, a: u128, b: u128, width: u32) -> u128 {
    let m = mask(width);
    let neg = |x: u128| x.wrapping_neg() & m;
    let r = match op {
        BinOp::Add => a.wrapping_add(b),
        BinOp::Sub => a.wrapping_sub(b),
        BinOp::Mul => a.wrapping_mul(b),
        BinOp::UDiv => a.checked_div(b).unwrap_or(m),
        BinOp::URem => a.checked_rem(b).unwrap_or(a),
        BinOp::SDiv => {
            let (na, nb) = (sign_bit(a, width), sign_bit(b, width));
            let ua = if na { neg(a) } else { a };
            let ub = if nb { neg(b) } else { b };
            let q = ua.checked_div(ub).unwrap_or(m);
            if na != nb {
                neg(q)
            } else {
                q
            }
        }
        BinOp::SRem => {
            let (na, nb) = (sign_bit(a, width), sign_bit(b, width));
            let ua = if na { neg(a) } else { a };
            let ub = if nb { neg(b) } else { b };
            let r = ua.checked_rem(ub).unwrap_or(ua);
            if na {
                neg(r)
            } else {
                r
            }
        }
        BinOp::And => a & b,
        BinOp::Or => a | b,
        BinOp::Xor => a ^ b,
        BinOp::Shl => {
            if b >= u128::from(width) {
                0
            } else {
                a << b
            }
        }
        BinOp::LShr => {
            if b >= u128::from(width) {
                0
            } else {
                a >> b
            }
        }
        BinOp::AShr => {
            let s = to_signed(a, width);
            let amt = b.min(u128::from(width) - 1) as u32;
            (s >> amt) as u128
        }
        BinOp::Rotl | BinOp::Rotr => {
            let k = (b % u128::from(width)) as u32;
            let k = if op == BinOp::Rotr { (width - k) % width } else { k };
            if k == 0 {
                a
            } else {
                (a << k) | (a >> (width - k))
            }
        }
    };
    r & m
}

pub fn eval_cmp(op: CmpOp, a: u128, b: u128, width: u32) -> bool {
    match op {
        CmpOp::Eq => a == b,
        CmpOp::Ult => a < b,
        CmpOp::Ule => a <= b,
        CmpOp::Slt => to_signed(a, width) < to_signed(b, width),
        CmpOp::Sle => to_signed(a, width) <= to_signed(b, width),
    }
}

pub fn eval_un(op: UnOp, a: u128, width: u32) -> u128 {
    let m = mask(width);
    match op {
        UnOp::Not => !a & m,
        UnOp::Neg => a.wrapping_neg() & m,
        UnOp::Clz => {
            if a == 0 {
                u128::from(width)
            } else {
                u128::from(width - 1 - (127 - a.leading_zeros()))
            }
        }
        UnOp::Ctz => {
            if a == 0 {
                u128::from(width)
            } else {
                u128::from(a.trailing_zeros())
            }
        }
        UnOp::Popcnt => u128::from(a.count_ones()),
    }
}

impl Expr {
    fn make(kind: Kind, width: u32) -> Expr {
        debug_assert!((1..=MAX_WIDTH).contains(&width), "width {width}");
        let mut h = std::collections::hash_map::DefaultHasher::new();
        width.hash(&mut h);
        match &kind {
            Kind::Const(v) => (0u8, v).hash(&mut h),
            Kind::Var(n) => (1u8, n).hash(&mut h),
            Kind::Bin(op, a, b) => (2u8, op, a.0.hash, b.0.hash).hash(&mut h),
            Kind::Cmp(op, a, b) => (3u8, op, a.0.hash, b.0.hash).hash(&mut h),
            Kind::Un(op, a) => (4u8, op, a.0.hash).hash(&mut h),
            Kind::Extract { hi, lo, arg } => (5u8, hi, lo, arg.0.hash).hash(&mut h),
            Kind::ZExt(a) => (6u8, a.0.hash).hash(&mut h),
            Kind::SExt(a) => (7u8, a.0.hash).hash(&mut h),
            Kind::Concat(a, b) => (8u8, a.0.hash, b.0.hash).hash(&mut h),
            Kind::Ite(c, t, e) => (9u8, c.0.hash, t.0.hash, e.0.hash).hash(&mut h),
        }
        Expr(Arc::new(Node {
            kind,
            width,
            hash: h.finish(),
        }))
    }

    pub fn constant(value: u128, width: u32) -> Expr {
        Expr::make(Kind::Const(value & mask(width)), width)
    }

    pub fn var(name: impl Into<Arc<str>>, width: u32) -> Expr {
        Expr::make(Kind::Var(name.into()), width)
    }

    pub fn bool(b: bool) -> Expr {
        Expr::constant(u128::from(b), 1)
    }

    pub fn width(&self) -> u32 {
        self.0.width
    }

    pub fn kind(&self) -> &Kind {
        &self.0.kind
    }

    pub fn as_const(&self) -> Option<u128> {
        match self.0.kind {
            Kind::Const(v) => Some(v),
            _ => None,
        }
    }

    pub fn is_const(&self) -> bool {
        self.as_const().is_some()
    }

    pub fn is_bool(&self) -> bool {
        self.width() == 1
    }

    pub fn ptr_id(&self) -> usize {
        Arc::as_ptr(&self.0) as usize
    }

    pub fn structural_hash(&self) -> u64 {
        self.0.hash
    }

    fn is_zero(&self) -> bool {
        self.as_const() == Some(0)
    }

    fn is_ones(&self) -> bool {
        self.as_const() == Some(mask(self.width()))
    }

    fn is_one(&self) -> bool {
        self.as_const() == Some(1)
    }

    pub fn bin(op: BinOp, a: Expr, b: Expr) -> Expr {
        assert_eq!(a.width(), b.width(), "{op:?} operands differ in width");
        let w = a.width();
        if let (Some(x), Some(y)) = (a.as_const(), b.as_const()) {
            return Expr::constant(eval_bin(op, x, y, w), w);
        }
        let zero = || Expr::constant(0, w);
        match op {
            BinOp::Add => {
                if a.is_zero() {
                    return b;
                }
                if b.is_zero() {
                    return a;
                }
            }
            BinOp::Sub => {
                if b.is_zero() {
                    return a;
                }
                if a == b {
                    return zero();
                }
            }
            BinOp::Mul => {
                if a.is_zero() || b.is_zero() {
                    return zero();
                }
                if a.is_one() {
                    return b;
                }
                if b.is_one() {
                    return a;
                }
            }
            BinOp::UDiv | BinOp::SDiv => {
                if b.is_one() {
                    return a;
                }
            }
            BinOp::URem | BinOp::SRem => {
                if b.is_one() {
                    return zero();
                }
            }
            BinOp::And => {
                if a.is_zero() || b.is_zero() {
                    return zero();
                }
                if a.is_ones() {
                    return b;
                }
                if b.is_ones() || a == b {
                    return a;
                }
            }
            BinOp::Or => {
                if a.is_zero() {
                    return b;
                }
                if b.is_zero() || a == b {
                    return a;
                }
                if a.is_ones() {
                    return a;
                }
                if b.is_ones() {
                    return b;
                }
            }
            BinOp::Xor => {
                if a == b {
                    return zero();
                }
                if a.is_zero() {
                    return b;
                }
                if b.is_zero() {
                    return a;
                }
                if a.is_ones() {
                    return Expr::un(UnOp::Not, b);
                }
                if b.is_ones() {
                    return Expr::un(UnOp::Not, a);
                }
            }
            BinOp::Shl | BinOp::LShr | BinOp::AShr | BinOp::Rotl | BinOp::Rotr => {
                if b.is_zero() {
                    return a;
                }
                if a.is_zero() {
                    return a;
                }
            }
        }
        Expr::make(Kind::Bin(op, a, b), w)
    }

    pub fn un(op: UnOp, a: Expr) -> Expr {
        let w = a.width();
        if let Some(x) = a.as_const() {
            return Expr::constant(eval_un(op, x, w), w);
        }
        match (op, a.kind()) {
            (UnOp::Not, Kind::Un(UnOp::Not, inner)) | (UnOp::Neg, Kind::Un(UnOp::Neg, inner)) => {
                return inner.clone()
            }
            _ => {}
        }
        Expr::make(Kind::Un(op, a), w)
    }

    pub fn cmp(op: CmpOp, a: Expr, b: Expr) -> Expr {
        assert_eq!(a.width(), b.width(), "{op:?} operands differ in width");
        let w = a.width();
        if let (Some(x), Some(y)) = (a.as_const(), b.as_const()) {
            return Expr::bool(eval_cmp(op, x, y, w));
        }
        if a == b {
            return Expr::bool(matches!(op, CmpOp::Eq | CmpOp::Ule | CmpOp::Sle));
        }
        match op {
            CmpOp::Eq if w == 1 => {
                // boolean equality against a literal
                if b.is_one() {
                    return a;
                }
                if a.is_one() {
                    return b;
                }
                if b.is_zero() {
                    return Expr::un(UnOp::Not, a);
                }
                if a.is_zero() {
                    return Expr::un(UnOp::Not, b);
                }
            }
            CmpOp::Eq => {
                // zext(x) == c  ->  x == c, or false if c does not fit
                if let (Kind::ZExt(x), Some(c)) = (a.kind(), b.as_const()) {
                    if c > mask(x.width()) {
                        return Expr::bool(false);
                    }
                    return Expr::cmp(CmpOp::Eq, x.clone(), Expr::constant(c, x.width()));
                }
                // ite(c, k1, k2) == k  with distinct constants selects a branch
                if let (Kind::Ite(c, t, e), Some(k)) = (a.kind(), b.as_const()) {
                    if let (Some(tk), Some(ek)) = (t.as_const(), e.as_const()) {
                        return match (tk == k, ek == k) {
                            (true, true) => Expr::bool(true),
                            (true, false) => c.clone(),
                            (false, true) => Expr::un(UnOp::Not, c.clone()),
                            (false, false) => Expr::bool(false),
                        };
                    }
                }
                if b.is_const() && !a.is_const() {
                    // keep constants on the right
                } else if a.is_const() {
                    return Expr::cmp(CmpOp::Eq, b, a);
                }
            }
            CmpOp::Ult => {
                if b.is_zero() {
                    return Expr::bool(false);
                }
                if a.is_ones() {
                    return Expr::bool(false);
                }
            }
            CmpOp::Ule
                if (a.is_zero() || b.is_ones()) => {
                    return Expr::bool(true);
                }
            _ => {}
        }
        Expr::make(Kind::Cmp(op, a, b), 1)
    }

    pub fn extract(arg: Expr, hi: u32, lo: u32) -> Expr {
        assert!(hi >= lo && hi < arg.width(), "extract [{hi}:{lo}] of width {}", arg.width());
        let w = hi - lo + 1;
        if w == arg.width() {
            return arg;
        }
        if let Some(v) = arg.as_const() {
            return Expr::constant(v >> lo, w);
        }
        match arg.kind() {
            Kind::Extract { lo: inner_lo, arg: inner, .. } => {
                return Expr::extract(inner.clone(), hi + inner_lo, lo + inner_lo);
            }
            Kind::Concat(h, l) => {
                let lw = l.width();
                if hi < lw {
                    return Expr::extract(l.clone(), hi, lo);
                }
                if lo >= lw {
                    return Expr::extract(h.clone(), hi - lw, lo - lw);
                }
            }
            Kind::ZExt(x) | Kind::SExt(x) => {
                let xw = x.width();
                if hi < xw {
                    return Expr::extract(x.clone(), hi, lo);
                }
                if lo >= xw {
                    if let Kind::ZExt(_) = arg.kind() {
                        return Expr::constant(0, w);
                    }
                }
            }
            _ => {}
        }
        Expr::make(Kind::Extract { hi, lo, arg }, w)
    }

    pub fn concat(hi: Expr, lo: Expr) -> Expr {
        let w = hi.width() + lo.width();
        assert!(w <= MAX_WIDTH, "concat width {w}");
        if let (Some(h), Some(l)) = (hi.as_const(), lo.as_const()) {
            return Expr::constant((h << lo.width()) | l, w);
        }
        if hi.is_zero() {
            return Expr::zext(lo, w);
        }
        // adjacent slices of the same value fuse back together
        if let (
            Kind::Extract { hi: h1, lo: l1, arg: a1 },
            Kind::Extract { hi: h2, lo: l2, arg: a2 },
        ) = (hi.kind(), lo.kind())
        {
            if a1 == a2 && *l1 == h2 + 1 {
                return Expr::extract(a1.clone(), *h1, *l2);
            }
        }
        // hi ++ (mid ++ rest): try fusing hi with mid first
        if let Kind::Concat(mid, rest) = lo.kind() {
            if let (
                Kind::Extract { hi: h1, lo: l1, arg: a1 },
                Kind::Extract { hi: h2, lo: l2, arg: a2 },
            ) = (hi.kind(), mid.kind())
            {
                if a1 == a2 && *l1 == h2 + 1 {
                    let fused = Expr::extract(a1.clone(), *h1, *l2);
                    return Expr::concat(fused, rest.clone());
                }
            }
        }
        Expr::make(Kind::Concat(hi, lo), w)
    }

    pub fn zext(a: Expr, width: u32) -> Expr {
        assert!(width >= a.width());
        if width == a.width() {
            return a;
        }
        if let Some(v) = a.as_const() {
            return Expr::constant(v, width);
        }
        if let Kind::ZExt(inner) = a.kind() {
            return Expr::zext(inner.clone(), width);
        }
        Expr::make(Kind::ZExt(a), width)
    }

    pub fn sext(a: Expr, width: u32) -> Expr {
        assert!(width >= a.width());
        if width == a.width() {
            return a;
        }
        if let Some(v) = a.as_const() {
            return Expr::constant(to_signed(v, a.width()) as u128, width);
        }
        if let Kind::SExt(inner) = a.kind() {
            return Expr::sext(inner.clone(), width);
        }
        Expr::make(Kind::SExt(a), width)
    }

    pub fn ite(c: Expr, t: Expr, e: Expr) -> Expr {
        assert!(c.is_bool(), "ite condition must be boolean");
        assert_eq!(t.width(), e.width());
        if let Some(v) = c.as_const() {
            return if v == 1 { t } else { e };
        }
        if t == e {
            return t;
        }
        if t.is_bool() && t.is_one() && e.is_zero() {
            return c;
        }
        if t.is_bool() && t.is_zero() && e.is_one() {
            return Expr::un(UnOp::Not, c);
        }
        let w = t.width();
        Expr::make(Kind::Ite(c, t, e), w)
    }

    // -- convenience -------------------------------------------------------

    pub fn eq(a: Expr, b: Expr) -> Expr {
        Expr::cmp(CmpOp::Eq, a, b)
    }

    pub fn ne(a: Expr, b: Expr) -> Expr {
        Expr::not(Expr::eq(a, b))
    }

    pub fn ult(a: Expr, b: Expr) -> Expr {
        Expr::cmp(CmpOp::Ult, a, b)
    }

    pub fn ule(a: Expr, b: Expr) -> Expr {
        Expr::cmp(CmpOp::Ule, a, b)
    }

    pub fn slt(a: Expr, b: Expr) -> Expr {
        Expr::cmp(CmpOp::Slt, a, b)
    }

    pub fn sle(a: Expr, b: Expr) -> Expr {
        Expr::cmp(CmpOp::Sle, a, b)
    }

    pub fn not(a: Expr) -> Expr {
        Expr::un(UnOp::Not, a)
    }

    pub fn and(a: Expr, b: Expr) -> Expr {
        Expr::bin(BinOp::And, a, b)
    }

    pub fn or(a: Expr, b: Expr) -> Expr {
        Expr::bin(BinOp::Or, a, b)
    }

    /// Conjunction of boolean expressions; `true` when empty.
    pub fn all(items: impl IntoIterator<Item = Expr>) -> Expr {
        items.into_iter().fold(Expr::bool(true), Expr::and)
    }

    /// Disjunction of boolean expressions; `false` when empty.
    pub fn any(items: impl IntoIterator<Item = Expr>) -> Expr {
        items.into_iter().fold(Expr::bool(false), Expr::or)
    }

    /// Non-zero test producing a boolean.
    pub fn truthy(a: Expr) -> Expr {
        if a.is_bool() {
            return a;
        }
        if let Kind::ZExt(inner) = a.kind() {
            if inner.is_bool() {
                return inner.clone();
            }
        }
        let w = a.width();
        Expr::ne(a, Expr::constant(0, w))
    }

    // -- traversal ---------------------------------------------------------

    pub fn children(&self) -> Vec<&Expr> {
        match self.kind() {
            Kind::Const(_) | Kind::Var(_) => vec![],
            Kind::Bin(_, a, b) | Kind::Cmp(_, a, b) | Kind::Concat(a, b) => vec![a, b],
            Kind::Un(_, a) | Kind::ZExt(a) | Kind::SExt(a) | Kind::Extract { arg: a, .. } => {
                vec![a]
            }
            Kind::Ite(c, t, e) => vec![c, t, e],
        }
    }

    /// Free variables with their widths.
    pub fn vars(&self) -> BTreeSet<(Arc<str>, u32)> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out, &mut BTreeSet::new());
        out
    }

    pub(crate) fn collect_vars(
        &self,
        out: &mut BTreeSet<(Arc<str>, u32)>,
        seen: &mut BTreeSet<usize>,
    ) {
        let mut stack = vec![self];
        while let Some(e) = stack.pop() {
            if !seen.insert(e.ptr_id()) {
                continue;
            }
            if let Kind::Var(n) = e.kind() {
                out.insert((n.clone(), e.width()));
            }
            stack.extend(e.children());
        }
    }

    /// Number of distinct nodes in the DAG.
    pub fn size(&self) -> usize {
        let mut seen = BTreeSet::new();
        let mut stack = vec![self];
        while let Some(e) = stack.pop() {
            if seen.insert(e.ptr_id()) {
                stack.extend(e.children());
            }
        }
        seen.len()
    }

    /// Evaluates under an assignment; `lookup` supplies variable values.
    pub fn eval_with(&self, lookup: &mut dyn FnMut(&str, u32) -> u128) -> u128 {
        let mut memo: HashMap<usize, u128> = HashMap::new();
        self.eval_memo(lookup, &mut memo)
    }

    fn eval_memo(
        &self,
        lookup: &mut dyn FnMut(&str, u32) -> u128,
        memo: &mut HashMap<usize, u128>,
    ) -> u128 {
        if let Some(v) = self.as_const() {
            return v;
        }
        if let Some(&v) = memo.get(&self.ptr_id()) {
            return v;
        }
        let w = self.width();
        let v = match self.kind() {
            Kind::Const(v) => *v,
            Kind::Var(n) => lookup(n, w) & mask(w),
            Kind::Bin(op, a, b) => {
                let x = a.eval_memo(lookup, memo);
                let y = b.eval_memo(lookup, memo);
                eval_bin(*op, x, y, w)
            }
            Kind::Cmp(op, a, b) => {
                let x = a.eval_memo(lookup, memo);
                let y = b.eval_memo(lookup, memo);
                u128::from(eval_cmp(*op, x, y, a.width()))
            }
            Kind::Un(op, a) => eval_un(*op, a.eval_memo(lookup, memo), w),
            Kind::Extract { lo, arg, .. } => (arg.eval_memo(lookup, memo) >> lo) & mask(w),
            Kind::ZExt(a) => a.eval_memo(lookup, memo),
            Kind::SExt(a) => to_signed(a.eval_memo(lookup, memo), a.width()) as u128 & mask(w),
            Kind::Concat(h, l) => {
                (h.eval_memo(lookup, memo) << l.width()) | l.eval_memo(lookup, memo)
            }
            Kind::Ite(c, t, e) => {
                if c.eval_memo(lookup, memo) == 1 {
                    t.eval_memo(lookup, memo)
                } else {
                    e.eval_memo(lookup, memo)
                }
            }
        };
        memo.insert(self.ptr_id(), v);
        v
    }

    /// Rebuilds the expression with some variables replaced by constants,
    /// re-running the simplifier on the way up.
    pub fn substitute(&self, lookup: &dyn Fn(&str) -> Option<u128>) -> Expr {
        let mut memo: HashMap<usize, Expr> = HashMap::new();
        self.subst_memo(lookup, &mut memo)
    }

    fn subst_memo(&self, lookup: &dyn Fn(&str) -> Option<u128>, memo: &mut HashMap<usize, Expr>) -> Expr {
        if self.is_const() {
            return self.clone();
        }
        if let Some(e) = memo.get(&self.ptr_id()) {
            return e.clone();
        }
        let mut go = |e: &Expr| e.subst_memo(lookup, memo);
        let out = match self.kind() {
            Kind::Const(_) => self.clone(),
            Kind::Var(n) => match lookup(n) {
                Some(v) => Expr::constant(v, self.width()),
                None => self.clone(),
            },
            Kind::Bin(op, a, b) => {
                let (a, b) = (go(a), go(b));
                Expr::bin(*op, a, b)
            }
            Kind::Cmp(op, a, b) => {
                let (a, b) = (go(a), go(b));
                Expr::cmp(*op, a, b)
            }
            Kind::Un(op, a) => Expr::un(*op, go(a)),
            Kind::Extract { hi, lo, arg } => Expr::extract(go(arg), *hi, *lo),
            Kind::ZExt(a) => Expr::zext(go(a), self.width()),
            Kind::SExt(a) => Expr::sext(go(a), self.width()),
            Kind::Concat(h, l) => {
                let (h, l) = (go(h), go(l));
                Expr::concat(h, l)
            }
            Kind::Ite(c, t, e) => {
                let (c, t, e) = (go(c), go(t), go(e));
                Expr::ite(c, t, e)
            }
        };
        memo.insert(self.ptr_id(), out.clone());
        out
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind() {
            Kind::Const(v) => write!(f, "#x{v:x}:{}", self.width()),
            Kind::Var(n) => write!(f, "{n}"),
            Kind::Bin(op, a, b) => write!(f, "({op:?} {a} {b})"),
            Kind::Cmp(op, a, b) => write!(f, "({op:?} {a} {b})"),
            Kind::Un(op, a) => write!(f, "({op:?} {a})"),
            Kind::Extract { hi, lo, arg } => write!(f, "(extract[{hi}:{lo}] {arg})"),
            Kind::ZExt(a) => write!(f, "(zext{} {a})", self.width()),
            Kind::SExt(a) => write!(f, "(sext{} {a})", self.width()),
            Kind::Concat(h, l) => write!(f, "(concat {h} {l})"),
            Kind::Ite(c, t, e) => write!(f, "(ite {c} {t} {e})"),
        }
    }
}
