use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::expr::{mask, Expr};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TaintOrigin {
    BlockchainInfo,
    ActionData,
    ChainData,
}

/// Where a value came from: the kind of source plus the host function and
/// its call ordinal on the path.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TaintLabel {
    pub origin: TaintOrigin,
    pub site: Arc<str>,
    pub ordinal: u32,
}

impl TaintLabel {
    pub fn new(origin: TaintOrigin, site: &str, ordinal: u32) -> Self {
        TaintLabel {
            origin,
            site: site.into(),
            ordinal,
        }
    }
}

/// An immutable, cheaply clonable set of taint labels.
#[derive(Clone, Default, PartialEq, Eq, Hash)]
pub struct Taints(Option<Arc<BTreeSet<TaintLabel>>>);

impl Taints {
    pub fn none() -> Self {
        Taints(None)
    }

    pub fn single(label: TaintLabel) -> Self {
        Taints(Some(Arc::new(BTreeSet::from([label]))))
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_none()
    }

    pub fn iter(&self) -> impl Iterator<Item = &TaintLabel> {
        self.0.iter().flat_map(|s| s.iter())
    }

    pub fn has_origin(&self, origin: TaintOrigin) -> bool {
        self.iter().any(|l| l.origin == origin)
    }

    pub fn contains(&self, label: &TaintLabel) -> bool {
        self.0.as_ref().is_some_and(|s| s.contains(label))
    }

    pub fn is_superset(&self, other: &Taints) -> bool {
        other.iter().all(|l| self.contains(l))
    }

    pub fn union(&self, other: &Taints) -> Taints {
        match (&self.0, &other.0) {
            (None, _) => other.clone(),
            (_, None) => self.clone(),
            (Some(a), Some(b)) => {
                if Arc::ptr_eq(a, b) || b.is_subset(a) {
                    self.clone()
                } else if a.is_subset(b) {
                    other.clone()
                } else {
                    Taints(Some(Arc::new(a.union(b).cloned().collect())))
                }
            }
        }
    }

    pub fn len(&self) -> usize {
        self.0.as_ref().map_or(0, |s| s.len())
    }
}

impl fmt::Debug for Taints {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ValueKind {
    #[serde(rename = "CON")]
    Con,
    #[serde(rename = "SYM")]
    Sym,
}

#[derive(Clone, PartialEq, Eq)]
pub enum Payload {
    Con(u128),
    Sym(Expr),
}

/// A fixed-width bitvector value, concrete or symbolic, with taints.
#[derive(Clone, PartialEq, Eq)]
pub struct SymValue {
    width: u32,
    payload: Payload,
    taints: Taints,
}

impl SymValue {
    pub fn con(value: u128, width: u32) -> Self {
        SymValue {
            width,
            payload: Payload::Con(value & mask(width)),
            taints: Taints::none(),
        }
    }

    pub fn i32(v: u32) -> Self {
        SymValue::con(u128::from(v), 32)
    }

    pub fn i64(v: u64) -> Self {
        SymValue::con(u128::from(v), 64)
    }

    pub fn byte(v: u8) -> Self {
        SymValue::con(u128::from(v), 8)
    }

    /// Wraps an expression; constant expressions become concrete payloads.
    pub fn sym(expr: Expr) -> Self {
        let width = expr.width();
        let payload = match expr.as_const() {
            Some(v) => Payload::Con(v),
            None => Payload::Sym(expr),
        };
        SymValue {
            width,
            payload,
            taints: Taints::none(),
        }
    }

    pub fn var(name: &str, width: u32) -> Self {
        SymValue::sym(Expr::var(name, width))
    }

    pub fn with_taints(mut self, taints: Taints) -> Self {
        self.taints = taints;
        self
    }

    pub fn add_taints(mut self, taints: &Taints) -> Self {
        self.taints = self.taints.union(taints);
        self
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn payload(&self) -> &Payload {
        &self.payload
    }

    pub fn taints(&self) -> &Taints {
        &self.taints
    }

    pub fn kind(&self) -> ValueKind {
        match self.payload {
            Payload::Con(_) => ValueKind::Con,
            Payload::Sym(_) => ValueKind::Sym,
        }
    }

    pub fn is_con(&self) -> bool {
        matches!(self.payload, Payload::Con(_))
    }

    pub fn is_sym(&self) -> bool {
        !self.is_con()
    }

    pub fn as_con(&self) -> Option<u128> {
        match self.payload {
            Payload::Con(v) => Some(v),
            Payload::Sym(_) => None,
        }
    }

    pub fn as_u64(&self) -> Option<u64> {
        self.as_con().map(|v| v as u64)
    }

    pub fn as_u32(&self) -> Option<u32> {
        self.as_con().map(|v| v as u32)
    }

    pub fn expr(&self) -> Expr {
        match &self.payload {
            Payload::Con(v) => Expr::constant(*v, self.width),
            Payload::Sym(e) => e.clone(),
        }
    }

    /// Maps the underlying expression, keeping taints.
    pub fn map(&self, f: impl FnOnce(Expr) -> Expr) -> SymValue {
        SymValue::sym(f(self.expr())).with_taints(self.taints.clone())
    }
}

/// `value_kind`: CON iff the payload folded to concrete bits.
pub fn value_kind(v: &SymValue) -> ValueKind {
    v.kind()
}

impl fmt::Debug for SymValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.payload {
            Payload::Con(v) => write!(f, "Con({v:#x}:{})", self.width)?,
            Payload::Sym(e) => write!(f, "Sym({e})")?,
        }
        if !self.taints.is_empty() {
            write!(f, " {:?}", self.taints)?;
        }
        Ok(())
    }
}
