use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::sym::expr::{BinOp, CmpOp, UnOp};

fn a32() -> Expr {
    Expr::var("a", 32)
}

#[test]
fn empty_constraints_are_sat() {
    assert_eq!(BitBlastSolver::default().check(&[], None), SolveResult::Sat(Model::new()));
}

#[test]
fn equality_yields_the_value() {
    let c = Expr::eq(a32(), Expr::constant(7, 32));
    let r = BitBlastSolver::default().check(&[c], None);
    assert_eq!(r.model().unwrap().get("a"), Some(7));
}

#[test]
fn contradictory_bounds_are_unsat() {
    let cs = [
        Expr::cmp(CmpOp::Ult, Expr::constant(5, 32), a32()),
        Expr::cmp(CmpOp::Ult, a32(), Expr::constant(3, 32)),
    ];
    assert!(BitBlastSolver::default().check(&cs, None).is_unsat());
    assert!(EnumSolver { max_bits: 32 }.check(&cs[..1], None).is_sat());
}

#[test]
fn hint_is_reused_when_it_fits() {
    let c = Expr::cmp(CmpOp::Ult, a32(), Expr::constant(100, 32));
    let mut hint = Model::new();
    hint.set("a", 42);
    let r = BitBlastSolver::default().check(&[c], Some(&hint));
    assert_eq!(r.model().unwrap().get("a"), Some(42));
}

#[test]
fn independent_slices_are_combined() {
    let b = Expr::var("b", 16);
    let cs = [
        Expr::eq(Expr::bin(BinOp::Mul, a32(), Expr::constant(3, 32)), Expr::constant(21, 32)),
        Expr::eq(Expr::bin(BinOp::Add, b.clone(), Expr::constant(1, 16)), Expr::constant(0, 16)),
    ];
    let r = BitBlastSolver::default().check(&cs, None);
    let m = r.model().unwrap();
    assert_eq!(m.eval(&cs[0]), 1);
    assert_eq!(m.get("b"), Some(0xFFFF));
}

#[test]
fn tiny_timeout_reports_unknown_on_hard_query() {
    // factoring a 64-bit semiprime-like product is not solvable in a millisecond
    let x = Expr::var("x", 64);
    let y = Expr::var("y", 64);
    let cs = [
        Expr::eq(
            Expr::bin(BinOp::Mul, x.clone(), y.clone()),
            Expr::constant(0xC6A5_F2D1_6D8D_1A8F, 64),
        ),
        Expr::cmp(CmpOp::Ult, Expr::constant(1, 64), x.clone()),
        Expr::cmp(CmpOp::Ult, Expr::constant(1, 64), y.clone()),
        Expr::cmp(CmpOp::Ult, x, Expr::constant(1 << 32, 64)),
        Expr::cmp(CmpOp::Ult, y, Expr::constant(1 << 32, 64)),
    ];
    let r = BitBlastSolver::with_timeout(Duration::from_millis(1)).check(&cs, None);
    assert!(matches!(r, SolveResult::Unknown(_)), "{r:?}");
}

fn random_expr(rng: &mut ChaCha8Rng, w: u32, depth: u32, vars: &[&str]) -> Expr {
    if depth == 0 || rng.random_ratio(1, 4) {
        return if rng.random_bool(0.6) {
            Expr::var(vars[rng.random_range(0..vars.len())], w)
        } else {
            Expr::constant(rng.random::<u128>(), w)
        };
    }
    let ops = [
        BinOp::Add,
        BinOp::Sub,
        BinOp::Mul,
        BinOp::UDiv,
        BinOp::SDiv,
        BinOp::URem,
        BinOp::SRem,
        BinOp::And,
        BinOp::Or,
        BinOp::Xor,
        BinOp::Shl,
        BinOp::LShr,
        BinOp::AShr,
        BinOp::Rotl,
        BinOp::Rotr,
    ];
    match rng.random_range(0..8) {
        0..=3 => {
            let op = ops[rng.random_range(0..ops.len())];
            let a = random_expr(rng, w, depth - 1, vars);
            let b = random_expr(rng, w, depth - 1, vars);
            Expr::bin(op, a, b)
        }
        4 => {
            let op = [UnOp::Not, UnOp::Neg, UnOp::Clz, UnOp::Ctz, UnOp::Popcnt][rng.random_range(0..5)];
            Expr::un(op, random_expr(rng, w, depth - 1, vars))
        }
        5 => {
            let cmp = [CmpOp::Eq, CmpOp::Ult, CmpOp::Ule, CmpOp::Slt, CmpOp::Sle][rng.random_range(0..5)];
            let c = Expr::cmp(cmp, random_expr(rng, w, depth - 1, vars), random_expr(rng, w, depth - 1, vars));
            let t = random_expr(rng, w, depth - 1, vars);
            let e = random_expr(rng, w, depth - 1, vars);
            Expr::ite(c, t, e)
        }
        6 => {
            // round trip through a narrower slice and an extension
            let inner = random_expr(rng, w, depth - 1, vars);
            let lo = rng.random_range(0..w);
            let hi = rng.random_range(lo..w);
            let slice = Expr::extract(inner, hi, lo);
            if rng.random_bool(0.5) {
                Expr::zext(slice, w)
            } else {
                Expr::sext(slice, w)
            }
        }
        _ => {
            let inner = random_expr(rng, w, depth - 1, vars);
            if w > 1 {
                let k = rng.random_range(1..w);
                let hi = Expr::extract(inner.clone(), w - 1, k);
                let lo = Expr::extract(random_expr(rng, w, depth - 1, vars), k - 1, 0);
                Expr::concat(hi, lo)
            } else {
                inner
            }
        }
    }
}

/// Both backends agree on satisfiability, and every model checks out.
#[test]
fn bitblast_agrees_with_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let blast = BitBlastSolver::default();
    let brute = EnumSolver { max_bits: 16 };
    for _ in 0..400 {
        let w = [3u32, 4, 5, 8][rng.random_range(0..4)];
        let vars: &[&str] = if w == 8 { &["x", "y"] } else { &["x", "y", "z"] };
        let lhs = random_expr(&mut rng, w, 3, vars);
        let rhs = random_expr(&mut rng, w, 2, vars);
        let cmp = [CmpOp::Eq, CmpOp::Ult, CmpOp::Slt][rng.random_range(0..3)];
        let c = Expr::cmp(cmp, lhs, rhs);
        let r1 = blast.check(std::slice::from_ref(&c), None);
        let r2 = brute.check(std::slice::from_ref(&c), None);
        assert_eq!(r1.is_sat(), r2.is_sat(), "{c}");
        if let SolveResult::Sat(m) = r1 {
            assert!(m.satisfies(&c));
        }
    }
}

/// At full widths: pick a random assignment, evaluate, then ask the solver
/// to reproduce the value. It must answer SAT with a consistent model.
#[test]
fn bitblast_reaches_evaluated_values_at_64_bits() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let solver = BitBlastSolver::default();
    for _ in 0..60 {
        let w = [32u32, 64][rng.random_range(0..2)];
        let e = random_expr(&mut rng, w, 2, &["p", "q"]);
        let (p, q) = (rng.random::<u128>() & mask(w), rng.random::<u128>() & mask(w));
        let v = e.eval_with(&mut |n, _| if n == "p" { p } else { q });
        let c = Expr::eq(e, Expr::constant(v, w));
        let r = solver.check(std::slice::from_ref(&c), None);
        assert!(r.is_sat(), "{c}");
    }
}
