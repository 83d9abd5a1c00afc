//! The subset of the EOSIO ABI needed to build and decode action payloads.

use std::collections::BTreeMap;

use serde::Deserialize;
use serde_json::{json, Value};
use thiserror::Error;

use crate::chain::name_to_string;

/// Bytes given to variable-length strings in symbolic payloads.
pub const STRING_LEN: u8 = 8;
/// Elements given to arrays in symbolic payloads.
pub const ARRAY_LEN: u8 = 1;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AbiError {
    #[error("malformed ABI JSON: {0}")]
    Json(String),
    #[error("unknown type `{0}`")]
    UnknownType(String),
    #[error("unknown action `{0}`")]
    UnknownAction(String),
    #[error("type `{0}` is recursive")]
    Recursive(String),
    #[error("payload does not decode: {0}")]
    Decode(String),
}

#[derive(Debug, Clone, Deserialize)]
struct RawField {
    name: String,
    #[serde(rename = "type")]
    ty: String,
}

#[derive(Debug, Clone, Deserialize)]
struct RawStruct {
    name: String,
    #[serde(default)]
    base: String,
    #[serde(default)]
    fields: Vec<RawField>,
}

#[derive(Debug, Clone, Deserialize)]
struct RawAction {
    name: String,
    #[serde(rename = "type")]
    ty: String,
}

#[derive(Debug, Clone, Deserialize)]
struct RawAlias {
    new_type_name: String,
    #[serde(rename = "type")]
    ty: String,
}

#[derive(Debug, Clone, Deserialize)]
struct RawAbi {
    #[serde(default)]
    types: Vec<RawAlias>,
    #[serde(default)]
    structs: Vec<RawStruct>,
    #[serde(default)]
    actions: Vec<RawAction>,
}

/// Record definitions and the record type of each action.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AbiSpec {
    /// Record name → ordered (field name, type name), base fields first.
    pub structs: BTreeMap<String, Vec<(String, String)>>,
    /// Actions in declaration order: (action name, record name).
    pub actions: Vec<(String, String)>,
    pub aliases: BTreeMap<String, String>,
}

fn fixed_size(ty: &str) -> Option<usize> {
    Some(match ty {
        "bool" | "int8" | "uint8" => 1,
        "int16" | "uint16" => 2,
        "int32" | "uint32" | "float32" | "time_point_sec" | "block_timestamp_type" => 4,
        "int64" | "uint64" | "float64" | "name" | "symbol" | "symbol_code" | "time_point" => 8,
        "int128" | "uint128" | "float128" | "asset" => 16,
        "checksum160" => 20,
        "extended_asset" => 24,
        "checksum256" => 32,
        "checksum512" => 64,
        _ => return None,
    })
}

/// One byte of a payload template.
pub type Slot = Option<u8>;

impl AbiSpec {
    pub fn parse(text: &str) -> Result<AbiSpec, AbiError> {
        let raw: RawAbi = serde_json::from_str(text).map_err(|e| AbiError::Json(e.to_string()))?;
        let aliases: BTreeMap<String, String> = raw.types.into_iter().map(|a| (a.new_type_name, a.ty)).collect();
        let by_name: BTreeMap<&str, &RawStruct> = raw.structs.iter().map(|s| (s.name.as_str(), s)).collect();
        let mut structs = BTreeMap::new();
        for s in &raw.structs {
            let mut fields = Vec::new();
            let mut chain = vec![s];
            let mut base = s.base.as_str();
            while !base.is_empty() {
                let b = by_name.get(base).ok_or_else(|| AbiError::UnknownType(base.to_string()))?;
                if chain.len() > by_name.len() {
                    return Err(AbiError::Recursive(s.name.clone()));
                }
                chain.push(b);
                base = b.base.as_str();
            }
            for c in chain.iter().rev() {
                fields.extend(c.fields.iter().map(|f| (f.name.clone(), f.ty.clone())));
            }
            structs.insert(s.name.clone(), fields);
        }
        let spec = AbiSpec {
            structs,
            actions: raw.actions.into_iter().map(|a| (a.name, a.ty)).collect(),
            aliases,
        };
        for (_, ty) in &spec.actions {
            spec.template_of(ty, 0)?;
        }
        Ok(spec)
    }

    pub fn record_of(&self, action: &str) -> Result<&str, AbiError> {
        self.actions
            .iter()
            .find(|(a, _)| a == action)
            .map(|(_, t)| t.as_str())
            .ok_or_else(|| AbiError::UnknownAction(action.to_string()))
    }

    fn resolve<'a>(&'a self, ty: &'a str) -> &'a str {
        let mut t = ty;
        for _ in 0..32 {
            match self.aliases.get(t) {
                Some(n) => t = n,
                None => break,
            }
        }
        t
    }

    /// Payload layout for `action`: fixed bytes for length prefixes, `None`
    /// for bytes that become symbolic.
    pub fn template(&self, action: &str) -> Result<Vec<Slot>, AbiError> {
        self.template_of(self.record_of(action)?, 0)
    }

    fn template_of(&self, ty: &str, depth: usize) -> Result<Vec<Slot>, AbiError> {
        if depth > 32 {
            return Err(AbiError::Recursive(ty.to_string()));
        }
        let ty = self.resolve(ty);
        if let Some(elem) = ty.strip_suffix("[]") {
            let mut out = vec![Some(ARRAY_LEN)];
            for _ in 0..ARRAY_LEN {
                out.extend(self.template_of(elem, depth + 1)?);
            }
            return Ok(out);
        }
        if let Some(inner) = ty.strip_suffix('?') {
            let mut out = vec![Some(1)];
            out.extend(self.template_of(inner, depth + 1)?);
            return Ok(out);
        }
        if ty == "string" || ty == "bytes" {
            let mut out = vec![Some(STRING_LEN)];
            out.extend(std::iter::repeat_n(None, STRING_LEN as usize));
            return Ok(out);
        }
        if let Some(n) = fixed_size(ty) {
            return Ok(vec![None; n]);
        }
        let fields = self.structs.get(ty).ok_or_else(|| AbiError::UnknownType(ty.to_string()))?;
        let mut out = Vec::new();
        for (_, t) in fields {
            out.extend(self.template_of(t, depth + 1)?);
        }
        Ok(out)
    }

    /// Decodes a payload into JSON; trailing bytes are an error.
    pub fn decode(&self, action: &str, bytes: &[u8]) -> Result<Value, AbiError> {
        let mut r = Reader { bytes, pos: 0 };
        let v = self.decode_type(self.record_of(action)?, &mut r, 0)?;
        if r.pos != bytes.len() {
            return Err(AbiError::Decode(format!("{} trailing bytes", bytes.len() - r.pos)));
        }
        Ok(v)
    }

    fn decode_type(&self, ty: &str, r: &mut Reader, depth: usize) -> Result<Value, AbiError> {
        if depth > 32 {
            return Err(AbiError::Recursive(ty.to_string()));
        }
        let ty = self.resolve(ty);
        if let Some(elem) = ty.strip_suffix("[]") {
            let n = r.varuint()?;
            let items = (0..n).map(|_| self.decode_type(elem, r, depth + 1)).collect::<Result<Vec<_>, _>>()?;
            return Ok(Value::Array(items));
        }
        if let Some(inner) = ty.strip_suffix('?') {
            return match r.take(1)?[0] {
                0 => Ok(Value::Null),
                _ => self.decode_type(inner, r, depth + 1),
            };
        }
        let le = |b: &[u8]| b.iter().rev().fold(0u128, |acc, x| (acc << 8) | u128::from(*x));
        Ok(match ty {
            "string" => {
                let n = r.varuint()? as usize;
                Value::String(String::from_utf8_lossy(r.take(n)?).into_owned())
            }
            "bytes" => {
                let n = r.varuint()? as usize;
                Value::String(hex::encode(r.take(n)?))
            }
            "bool" => Value::Bool(r.take(1)?[0] != 0),
            "uint8" | "uint16" | "uint32" | "uint64" | "time_point" | "time_point_sec" | "block_timestamp_type" => {
                let v = le(r.take(fixed_size(ty).unwrap())?);
                json!(v as u64)
            }
            "int8" | "int16" | "int32" | "int64" => {
                let n = fixed_size(ty).unwrap();
                let v = le(r.take(n)?);
                let shift = 128 - 8 * n as u32;
                json!(((v << shift) as i128 >> shift) as i64)
            }
            "name" => Value::String(name_to_string(le(r.take(8)?) as u64)),
            "asset" => {
                let amount = le(r.take(8)?) as u64 as i64;
                let symbol = le(r.take(8)?) as u64;
                json!({"amount": amount, "symbol": symbol})
            }
            _ if fixed_size(ty).is_some() => Value::String(hex::encode(r.take(fixed_size(ty).unwrap())?)),
            _ => {
                let fields = self.structs.get(ty).ok_or_else(|| AbiError::UnknownType(ty.to_string()))?;
                let mut obj = serde_json::Map::new();
                for (n, t) in fields {
                    obj.insert(n.clone(), self.decode_type(t, r, depth + 1)?);
                }
                Value::Object(obj)
            }
        })
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], AbiError> {
        let end = self.pos.checked_add(n).filter(|e| *e <= self.bytes.len());
        let end = end.ok_or_else(|| AbiError::Decode(format!("need {n} bytes at offset {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn varuint(&mut self) -> Result<u32, AbiError> {
        let mut v = 0u32;
        for shift in (0..35).step_by(7) {
            let b = self.take(1)?[0];
            v |= u32::from(b & 0x7F) << shift;
            if b & 0x80 == 0 {
                return Ok(v);
            }
        }
        Err(AbiError::Decode("varuint32 too long".into()))
    }
}
