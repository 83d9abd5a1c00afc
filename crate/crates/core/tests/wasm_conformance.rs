//! Loader cross-checks against wasmparser and robustness under mutation.

mod common;

use chainprobe::wasm::{parse_module, validate_module, ConstExpr, ExportKind, ImportKind, Instr, WasmModule};
use proptest::prelude::*;
use wasmparser::{DataKind, ElementItems, ElementKind, ExternalKind, Operator, Parser, Payload, TypeRef};

fn stems() -> Vec<&'static str> {
    let mut v = common::all_stems();
    v.push("features");
    v
}

/// Loose structural agreement of one operator with our decoded instruction.
fn same_op(op: &Operator, i: &Instr) -> bool {
    match (op, i) {
        (Operator::Call { function_index }, Instr::Call(f)) => function_index == f,
        (Operator::LocalGet { local_index }, Instr::LocalGet(l))
        | (Operator::LocalSet { local_index }, Instr::LocalSet(l))
        | (Operator::LocalTee { local_index }, Instr::LocalTee(l)) => local_index == l,
        (Operator::GlobalGet { global_index }, Instr::GlobalGet(g)) | (Operator::GlobalSet { global_index }, Instr::GlobalSet(g)) => {
            global_index == g
        }
        (Operator::I32Const { value }, Instr::I32Const(v)) => value == v,
        (Operator::I64Const { value }, Instr::I64Const(v)) => value == v,
        (Operator::F32Const { value }, Instr::F32Const(v)) => value.bits() == *v,
        (Operator::F64Const { value }, Instr::F64Const(v)) => value.bits() == *v,
        (Operator::Br { relative_depth }, Instr::Br(d)) | (Operator::BrIf { relative_depth }, Instr::BrIf(d)) => relative_depth == d,
        (Operator::BrTable { targets }, Instr::BrTable { targets: t, default }) => {
            targets.default() == *default && targets.targets().collect::<Result<Vec<_>, _>>().unwrap() == t.to_vec()
        }
        (Operator::CallIndirect { type_index, table_index }, Instr::CallIndirect { type_index: t, table }) => {
            type_index == t && table_index == table
        }
        (Operator::Block { .. }, Instr::Block { .. })
        | (Operator::Loop { .. }, Instr::Loop { .. })
        | (Operator::If { .. }, Instr::If { .. })
        | (Operator::Else, Instr::Else { .. })
        | (Operator::End, Instr::End)
        | (Operator::Unreachable, Instr::Unreachable)
        | (Operator::Nop, Instr::Nop)
        | (Operator::Return, Instr::Return)
        | (Operator::Drop, Instr::Drop)
        | (Operator::Select, Instr::Select)
        | (Operator::MemorySize { .. }, Instr::MemorySize)
        | (Operator::MemoryGrow { .. }, Instr::MemoryGrow) => true,
        (op, Instr::Load { arg, .. }) | (op, Instr::Store { arg, .. }) => {
            let name = format!("{op:?}");
            (name.contains("Load") || name.contains("Store")) && name.contains(&format!("offset: {}", arg.offset))
        }
        (_, Instr::Int { .. }) | (_, Instr::Float(_)) => !matches!(
            op,
            Operator::Call { .. } | Operator::LocalGet { .. } | Operator::I32Const { .. } | Operator::End | Operator::Block { .. }
        ),
        _ => false,
    }
}

fn offset_value(e: &wasmparser::ConstExpr) -> i32 {
    match e.get_operators_reader().read().unwrap() {
        Operator::I32Const { value } => value,
        other => panic!("unexpected offset {other:?}"),
    }
}

fn cross_check(stem: &str, bytes: &[u8], ours: &WasmModule) {
    let mut types = 0;
    let mut imports = Vec::new();
    let mut func_types = Vec::new();
    let mut bodies = 0usize;
    let mut exports = 0;
    let mut data = 0usize;
    let mut elems = 0usize;
    for payload in Parser::new(0).parse_all(bytes) {
        match payload.unwrap() {
            Payload::TypeSection(r) => {
                for (i, ft) in r.into_iter_err_on_gc_types().enumerate() {
                    let ft = ft.unwrap();
                    assert_eq!(ft.params().len(), ours.types[i].params.len(), "{stem}: type {i}");
                    assert_eq!(ft.results().len(), ours.types[i].results.len(), "{stem}: type {i}");
                    types += 1;
                }
            }
            Payload::ImportSection(r) => {
                for imp in r.into_imports() {
                    let imp = imp.unwrap();
                    imports.push((imp.module.to_string(), imp.name.to_string(), imp.ty));
                }
            }
            Payload::FunctionSection(r) => func_types.extend(r.into_iter().map(|t| t.unwrap())),
            Payload::MemorySection(r) => {
                for m in r {
                    let m = m.unwrap();
                    let ours = ours.memory.unwrap();
                    assert_eq!(u64::from(ours.min), m.initial, "{stem}: memory min");
                    assert_eq!(ours.max.map(u64::from), m.maximum, "{stem}: memory max");
                }
            }
            Payload::TableSection(r) => {
                for (i, t) in r.into_iter().enumerate() {
                    assert_eq!(u64::from(ours.tables[i].min), t.unwrap().ty.initial, "{stem}: table");
                }
            }
            Payload::GlobalSection(r) => {
                for (i, g) in r.into_iter().enumerate() {
                    let g = g.unwrap();
                    assert_eq!(ours.globals[i].ty.mutable, g.ty.mutable, "{stem}: global {i}");
                    if let Operator::I64Const { value } = g.init_expr.get_operators_reader().read().unwrap() {
                        assert_eq!(ours.globals[i].init, ConstExpr::I64(value));
                    }
                }
            }
            Payload::ExportSection(r) => {
                for e in r {
                    let e = e.unwrap();
                    let o = &ours.exports[e.name];
                    assert_eq!(o.index, e.index, "{stem}: export {}", e.name);
                    assert_eq!(matches!(o.kind, ExportKind::Func), e.kind == ExternalKind::Func);
                    exports += 1;
                }
            }
            Payload::ElementSection(r) => {
                for e in r {
                    let e = e.unwrap();
                    let ElementKind::Active { offset_expr, .. } = e.kind else { panic!("passive element") };
                    assert_eq!(ours.elements[elems].offset, ConstExpr::I32(offset_value(&offset_expr)));
                    let ElementItems::Functions(fs) = e.items else { panic!("expression elements") };
                    let fs: Vec<u32> = fs.into_iter().map(|f| f.unwrap()).collect();
                    assert_eq!(ours.elements[elems].functions, fs, "{stem}: element {elems}");
                    elems += 1;
                }
            }
            Payload::DataSection(r) => {
                for d in r {
                    let d = d.unwrap();
                    let DataKind::Active { offset_expr, .. } = d.kind else { panic!("passive data") };
                    assert_eq!(ours.data[data].offset, ConstExpr::I32(offset_value(&offset_expr)));
                    assert_eq!(ours.data[data].bytes, d.data, "{stem}: data {data}");
                    data += 1;
                }
            }
            Payload::CodeSectionEntry(body) => {
                let f = &ours.functions[bodies];
                let locals: u32 = body.get_locals_reader().unwrap().into_iter().map(|l| l.unwrap().0).sum();
                assert_eq!(f.locals.len() as u32, locals, "{stem}: locals of body {bodies}");
                let ops: Vec<Operator> = body.get_operators_reader().unwrap().into_iter().map(|o| o.unwrap()).collect();
                assert_eq!(ops.len(), f.code.len(), "{stem}: instruction count of body {bodies}");
                for (k, (op, i)) in ops.iter().zip(&f.code).enumerate() {
                    assert!(same_op(op, i), "{stem}: body {bodies} instr {k}: {op:?} vs {i:?}");
                }
                bodies += 1;
            }
            _ => {}
        }
    }
    assert_eq!(types, ours.types.len(), "{stem}");
    assert_eq!(imports.len(), ours.imports.len(), "{stem}");
    for ((m, n, ty), ours) in imports.iter().zip(&ours.imports) {
        assert_eq!((m.as_str(), n.as_str()), (ours.module.as_str(), ours.field.as_str()));
        if let (TypeRef::Func(t), ImportKind::Func(o)) = (ty, &ours.kind) {
            assert_eq!(t, o, "{stem}: import {n}");
        }
    }
    assert_eq!(func_types, ours.functions.iter().map(|f| f.type_index).collect::<Vec<_>>(), "{stem}");
    assert_eq!(bodies, ours.functions.len(), "{stem}");
    assert_eq!(exports, ours.exports.len(), "{stem}");
    assert_eq!(data, ours.data.len(), "{stem}");
    assert_eq!(elems, ours.elements.len(), "{stem}");
}

#[test]
fn agrees_with_wasmparser_on_fixtures() {
    let stems = stems();
    assert!(stems.len() >= 5);
    for stem in stems {
        let bytes = common::wasm(stem);
        wasmparser::Validator::new().validate_all(&bytes).unwrap();
        let ours = parse_module(&bytes).unwrap_or_else(|e| panic!("{stem}: {e}"));
        assert!(validate_module(&ours).is_valid(), "{stem}");
        cross_check(stem, &bytes, &ours);
    }
}

#[derive(Debug, Clone)]
enum Mutation {
    Flip(usize, u8),
    Insert(usize, u8),
    Delete(usize),
    Truncate(usize),
}

fn mutation() -> impl Strategy<Value = Mutation> {
    prop_oneof![
        (any::<usize>(), 1..=255u8).prop_map(|(i, b)| Mutation::Flip(i, b)),
        (any::<usize>(), any::<u8>()).prop_map(|(i, b)| Mutation::Insert(i, b)),
        any::<usize>().prop_map(Mutation::Delete),
        any::<usize>().prop_map(Mutation::Truncate),
    ]
}

fn apply(bytes: &mut Vec<u8>, m: &Mutation) {
    let n = bytes.len();
    match *m {
        Mutation::Flip(i, b) => bytes[i % n] ^= b,
        Mutation::Insert(i, b) => bytes.insert(i % (n + 1), b),
        Mutation::Delete(i) => {
            bytes.remove(i % n);
        }
        Mutation::Truncate(i) => bytes.truncate(i % n),
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 512, ..ProptestConfig::default() })]

    /// Corrupted binaries are rejected or accepted, never a panic; anything
    /// that decodes and validates is also valid to wasmparser.
    #[test]
    fn mutated_binaries_never_panic(which in 0usize..11, muts in prop::collection::vec(mutation(), 1..4)) {
        let stems = stems();
        let mut bytes = common::wasm(stems[which % stems.len()]);
        for m in &muts {
            if bytes.is_empty() {
                break;
            }
            apply(&mut bytes, m);
        }
        if parse_module(&bytes).is_ok_and(|m| validate_module(&m).is_valid()) {
            prop_assert!(wasmparser::Validator::new().validate_all(&bytes).is_ok());
        }
    }
}
