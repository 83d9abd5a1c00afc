//! Tseitin bit-blasting of bitvector expressions into CNF.

use std::collections::HashMap;
use std::sync::Arc;

use super::sat::{Lit, SatSolver};
use crate::sym::expr::{BinOp, CmpOp, Expr, Kind, UnOp};

type Bits = Vec<Lit>;

pub struct Blaster {
    pub sat: SatSolver,
    tru: Lit,
    memo: HashMap<usize, Bits>,
    pub vars: Vec<(Arc<str>, Bits)>,
    var_index: HashMap<Arc<str>, usize>,
    gates: HashMap<(u8, Lit, Lit), Lit>,
}

impl Default for Blaster {
    fn default() -> Self {
        Self::new()
    }
}

impl Blaster {
    pub fn new() -> Self {
        let mut sat = SatSolver::new();
        let t = Lit::new(sat.new_var(), false);
        sat.add_clause(&[t]);
        Blaster {
            sat,
            tru: t,
            memo: HashMap::new(),
            vars: Vec::new(),
            var_index: HashMap::new(),
            gates: HashMap::new(),
        }
    }

    fn fal(&self) -> Lit {
        !self.tru
    }

    fn constant(&self, b: bool) -> Lit {
        if b {
            self.tru
        } else {
            self.fal()
        }
    }

    fn as_const(&self, l: Lit) -> Option<bool> {
        if l == self.tru {
            Some(true)
        } else if l == !self.tru {
            Some(false)
        } else {
            None
        }
    }

    fn fresh(&mut self) -> Lit {
        Lit::new(self.sat.new_var(), false)
    }

    /// Asserts a boolean expression.
    pub fn assert_true(&mut self, e: &Expr) {
        let b = self.blast(e);
        self.sat.add_clause(&[b[0]]);
    }

    // -- gates -------------------------------------------------------------

    fn and2(&mut self, a: Lit, b: Lit) -> Lit {
        match (self.as_const(a), self.as_const(b)) {
            (Some(false), _) | (_, Some(false)) => return self.fal(),
            (Some(true), _) => return b,
            (_, Some(true)) => return a,
            _ => {}
        }
        if a == b {
            return a;
        }
        if a == !b {
            return self.fal();
        }
        let key = (0, a.min(b), a.max(b));
        if let Some(&g) = self.gates.get(&key) {
            return g;
        }
        let g = self.fresh();
        self.sat.add_clause(&[!g, a]);
        self.sat.add_clause(&[!g, b]);
        self.sat.add_clause(&[g, !a, !b]);
        self.gates.insert(key, g);
        g
    }

    fn or2(&mut self, a: Lit, b: Lit) -> Lit {
        !self.and2(!a, !b)
    }

    fn xor2(&mut self, a: Lit, b: Lit) -> Lit {
        match (self.as_const(a), self.as_const(b)) {
            (Some(x), _) => return if x { !b } else { b },
            (_, Some(y)) => return if y { !a } else { a },
            _ => {}
        }
        if a == b {
            return self.fal();
        }
        if a == !b {
            return self.tru;
        }
        let key = (1, a.min(b), a.max(b));
        if let Some(&g) = self.gates.get(&key) {
            return g;
        }
        let g = self.fresh();
        self.sat.add_clause(&[!g, a, b]);
        self.sat.add_clause(&[!g, !a, !b]);
        self.sat.add_clause(&[g, !a, b]);
        self.sat.add_clause(&[g, a, !b]);
        self.gates.insert(key, g);
        g
    }

    fn mux(&mut self, s: Lit, t: Lit, e: Lit) -> Lit {
        match self.as_const(s) {
            Some(true) => return t,
            Some(false) => return e,
            None => {}
        }
        if t == e {
            return t;
        }
        if let (Some(tv), Some(ev)) = (self.as_const(t), self.as_const(e)) {
            return if tv && !ev { s } else { !s };
        }
        let g = self.fresh();
        self.sat.add_clause(&[!s, !t, g]);
        self.sat.add_clause(&[!s, t, !g]);
        self.sat.add_clause(&[s, !e, g]);
        self.sat.add_clause(&[s, e, !g]);
        // redundant but helps propagation
        self.sat.add_clause(&[!t, !e, g]);
        self.sat.add_clause(&[t, e, !g]);
        g
    }

    fn maj(&mut self, a: Lit, b: Lit, c: Lit) -> Lit {
        let ab = self.and2(a, b);
        let axb = self.xor2(a, b);
        let t = self.and2(axb, c);
        self.or2(ab, t)
    }

    fn or_many(&mut self, ls: &[Lit]) -> Lit {
        ls.iter().fold(self.fal(), |acc, &l| self.or2(acc, l))
    }

    fn and_many(&mut self, ls: &[Lit]) -> Lit {
        ls.iter().fold(self.tru, |acc, &l| self.and2(acc, l))
    }

    // -- word-level circuits -------------------------------------------------

    fn const_bits(&self, v: u128, w: u32) -> Bits {
        (0..w).map(|i| self.constant((v >> i) & 1 == 1)).collect()
    }

    fn add(&mut self, a: &[Lit], b: &[Lit], mut carry: Lit) -> (Bits, Lit) {
        let mut out = Vec::with_capacity(a.len());
        for i in 0..a.len() {
            let t = self.xor2(a[i], b[i]);
            out.push(self.xor2(t, carry));
            carry = self.maj(a[i], b[i], carry);
        }
        (out, carry)
    }

    fn neg(&mut self, a: &[Lit]) -> Bits {
        let inv: Bits = a.iter().map(|&l| !l).collect();
        let zero = self.const_bits(0, a.len() as u32);
        self.add(&inv, &zero, self.tru).0
    }

    fn sub(&mut self, a: &[Lit], b: &[Lit]) -> Bits {
        let inv: Bits = b.iter().map(|&l| !l).collect();
        self.add(a, &inv, self.tru).0
    }

    fn mul(&mut self, a: &[Lit], b: &[Lit]) -> Bits {
        let w = a.len();
        let mut acc = self.const_bits(0, w as u32);
        for i in 0..w {
            if self.as_const(b[i]) == Some(false) {
                continue;
            }
            let mut pp = vec![self.fal(); w];
            for j in 0..w - i {
                pp[i + j] = self.and2(a[j], b[i]);
            }
            acc = self.add(&acc, &pp, self.fal()).0;
        }
        acc
    }

    /// a <u b
    fn ult(&mut self, a: &[Lit], b: &[Lit]) -> Lit {
        let mut lt = self.fal();
        for i in 0..a.len() {
            let here = self.and2(!a[i], b[i]);
            let same = !self.xor2(a[i], b[i]);
            let keep = self.and2(same, lt);
            lt = self.or2(here, keep);
        }
        lt
    }

    fn slt(&mut self, a: &[Lit], b: &[Lit]) -> Lit {
        let n = a.len();
        let mut a2 = a.to_vec();
        let mut b2 = b.to_vec();
        a2[n - 1] = !a2[n - 1];
        b2[n - 1] = !b2[n - 1];
        self.ult(&a2, &b2)
    }

    fn eq(&mut self, a: &[Lit], b: &[Lit]) -> Lit {
        let diffs: Bits = a.iter().zip(b).map(|(&x, &y)| !self.xor2(x, y)).collect();
        self.and_many(&diffs)
    }

    fn mux_bits(&mut self, s: Lit, t: &[Lit], e: &[Lit]) -> Bits {
        t.iter().zip(e).map(|(&x, &y)| self.mux(s, x, y)).collect()
    }

    /// Restoring division; yields (quotient, remainder) with the SMT-LIB
    /// convention for a zero divisor.
    fn udivrem(&mut self, a: &[Lit], b: &[Lit]) -> (Bits, Bits) {
        let w = a.len();
        let mut rem = self.const_bits(0, w as u32);
        let mut quo = vec![self.fal(); w];
        for i in (0..w).rev() {
            // rem = rem << 1 | a[i], tracked with one extra bit
            let top = rem[w - 1];
            let mut shifted = Vec::with_capacity(w);
            shifted.push(a[i]);
            shifted.extend_from_slice(&rem[..w - 1]);
            // ge = top || shifted >= b
            let lt = self.ult(&shifted, b);
            let ge = self.or2(top, !lt);
            let diff = self.sub(&shifted, b);
            rem = self.mux_bits(ge, &diff, &shifted);
            quo[i] = ge;
        }
        (quo, rem)
    }

    fn abs_and_sign(&mut self, a: &[Lit]) -> (Bits, Lit) {
        let s = a[a.len() - 1];
        let n = self.neg(a);
        (self.mux_bits(s, &n, a), s)
    }

    fn shift(&mut self, op: BinOp, a: &[Lit], amt: &[Lit]) -> Bits {
        let w = a.len();
        let fill = if op == BinOp::AShr { a[w - 1] } else { self.fal() };
        let stages = 32 - (w as u32 - 1).leading_zeros(); // ceil(log2 w)
        let mut cur = a.to_vec();
        for k in 0..stages.min(amt.len() as u32) {
            let by = 1usize << k;
            let shifted: Bits = (0..w)
                .map(|i| match op {
                    BinOp::Shl => {
                        if i >= by {
                            cur[i - by]
                        } else {
                            self.fal()
                        }
                    }
                    _ => {
                        if i + by < w {
                            cur[i + by]
                        } else {
                            fill
                        }
                    }
                })
                .collect();
            cur = self.mux_bits(amt[k as usize], &shifted, &cur);
        }
        let high: Bits = amt[(stages as usize).min(amt.len())..].to_vec();
        let over = self.or_many(&high);
        let filled = vec![fill; w];
        self.mux_bits(over, &filled, &cur)
    }

    fn rotate(&mut self, op: BinOp, a: &[Lit], amt: &[Lit]) -> Bits {
        let w = a.len();
        let amt: Bits = if w.is_power_of_two() {
            amt.to_vec()
        } else {
            let wb = self.const_bits(w as u128, w as u32);
            self.udivrem(amt, &wb).1
        };
        let stages = 32 - (w as u32 - 1).leading_zeros();
        let mut cur = a.to_vec();
        for k in 0..stages {
            let by = (1usize << k) % w;
            let rotated: Bits = (0..w)
                .map(|i| match op {
                    BinOp::Rotl => cur[(i + w - by) % w],
                    _ => cur[(i + by) % w],
                })
                .collect();
            cur = self.mux_bits(amt[k as usize], &rotated, &cur);
        }
        cur
    }

    fn count(&mut self, op: UnOp, a: &[Lit]) -> Bits {
        let w = a.len() as u32;
        match op {
            UnOp::Clz => {
                let mut res = self.const_bits(u128::from(w), w);
                for i in 0..w {
                    let c = self.const_bits(u128::from(w - 1 - i), w);
                    res = self.mux_bits(a[i as usize], &c, &res);
                }
                res
            }
            UnOp::Ctz => {
                let mut res = self.const_bits(u128::from(w), w);
                for i in (0..w).rev() {
                    let c = self.const_bits(u128::from(i), w);
                    res = self.mux_bits(a[i as usize], &c, &res);
                }
                res
            }
            UnOp::Popcnt => {
                let mut acc = self.const_bits(0, w);
                for &bit in a {
                    let mut one = self.const_bits(0, w);
                    one[0] = bit;
                    acc = self.add(&acc, &one, self.fal()).0;
                }
                acc
            }
            _ => unreachable!(),
        }
    }

    pub fn blast(&mut self, e: &Expr) -> Bits {
        if let Some(b) = self.memo.get(&e.ptr_id()) {
            return b.clone();
        }
        // iterative post-order keeps deep DAGs off the call stack
        let mut stack: Vec<(Expr, bool)> = vec![(e.clone(), false)];
        while let Some((node, expanded)) = stack.pop() {
            if self.memo.contains_key(&node.ptr_id()) {
                continue;
            }
            if !expanded {
                stack.push((node.clone(), true));
                for c in node.children() {
                    if !self.memo.contains_key(&c.ptr_id()) {
                        stack.push((c.clone(), false));
                    }
                }
                continue;
            }
            let bits = self.blast_node(&node);
            debug_assert_eq!(bits.len(), node.width() as usize);
            self.memo.insert(node.ptr_id(), bits);
        }
        self.memo[&e.ptr_id()].clone()
    }

    fn get(&self, e: &Expr) -> Bits {
        self.memo[&e.ptr_id()].clone()
    }

    fn blast_node(&mut self, e: &Expr) -> Bits {
        let w = e.width();
        match e.kind() {
            Kind::Const(v) => self.const_bits(*v, w),
            Kind::Var(name) => {
                if let Some(&i) = self.var_index.get(name) {
                    return self.vars[i].1.clone();
                }
                let bits: Bits = (0..w).map(|_| self.fresh()).collect();
                self.var_index.insert(name.clone(), self.vars.len());
                self.vars.push((name.clone(), bits.clone()));
                bits
            }
            Kind::Bin(op, a, b) => {
                let (x, y) = (self.get(a), self.get(b));
                match op {
                    BinOp::Add => self.add(&x, &y, self.fal()).0,
                    BinOp::Sub => self.sub(&x, &y),
                    BinOp::Mul => self.mul(&x, &y),
                    BinOp::UDiv => self.udivrem(&x, &y).0,
                    BinOp::URem => self.udivrem(&x, &y).1,
                    BinOp::SDiv => {
                        let (ax, sx) = self.abs_and_sign(&x);
                        let (ay, sy) = self.abs_and_sign(&y);
                        let q = self.udivrem(&ax, &ay).0;
                        let nq = self.neg(&q);
                        let flip = self.xor2(sx, sy);
                        self.mux_bits(flip, &nq, &q)
                    }
                    BinOp::SRem => {
                        let (ax, sx) = self.abs_and_sign(&x);
                        let (ay, _) = self.abs_and_sign(&y);
                        let r = self.udivrem(&ax, &ay).1;
                        let nr = self.neg(&r);
                        self.mux_bits(sx, &nr, &r)
                    }
                    BinOp::And => x.iter().zip(&y).map(|(&p, &q)| self.and2(p, q)).collect(),
                    BinOp::Or => x.iter().zip(&y).map(|(&p, &q)| self.or2(p, q)).collect(),
                    BinOp::Xor => x.iter().zip(&y).map(|(&p, &q)| self.xor2(p, q)).collect(),
                    BinOp::Shl | BinOp::LShr | BinOp::AShr => self.shift(*op, &x, &y),
                    BinOp::Rotl | BinOp::Rotr => self.rotate(*op, &x, &y),
                }
            }
            Kind::Cmp(op, a, b) => {
                let (x, y) = (self.get(a), self.get(b));
                let l = match op {
                    CmpOp::Eq => self.eq(&x, &y),
                    CmpOp::Ult => self.ult(&x, &y),
                    CmpOp::Ule => !self.ult(&y, &x),
                    CmpOp::Slt => self.slt(&x, &y),
                    CmpOp::Sle => !self.slt(&y, &x),
                };
                vec![l]
            }
            Kind::Un(op, a) => {
                let x = self.get(a);
                match op {
                    UnOp::Not => x.iter().map(|&l| !l).collect(),
                    UnOp::Neg => self.neg(&x),
                    _ => self.count(*op, &x),
                }
            }
            Kind::Extract { hi, lo, arg } => self.get(arg)[*lo as usize..=*hi as usize].to_vec(),
            Kind::ZExt(a) => {
                let mut x = self.get(a);
                x.resize(w as usize, self.fal());
                x
            }
            Kind::SExt(a) => {
                let mut x = self.get(a);
                let s = *x.last().unwrap();
                x.resize(w as usize, s);
                x
            }
            Kind::Concat(h, l) => {
                let mut x = self.get(l);
                x.extend(self.get(h));
                x
            }
            Kind::Ite(c, t, f) => {
                let s = self.get(c)[0];
                let (x, y) = (self.get(t), self.get(f));
                self.mux_bits(s, &x, &y)
            }
        }
    }

    /// Reads a variable's value from the solver's satisfying assignment.
    pub fn read_var(&self, bits: &[Lit]) -> u128 {
        bits.iter()
            .enumerate()
            .fold(0u128, |acc, (i, &l)| acc | (u128::from(self.sat.model_value(l)) << i))
    }
}
