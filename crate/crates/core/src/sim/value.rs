//! Records, messages and the fixed partitioning hash.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::model::AttrSet;

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Int(i64),
    Str(String),
}

impl Value {
    pub fn as_int(&self) -> Option<i64> {
        match self {
            Value::Int(i) => Some(*i),
            Value::Str(_) => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Value::Str(s) => Some(s),
            Value::Int(_) => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(i) => write!(f, "{i}"),
            Value::Str(s) => f.write_str(s),
        }
    }
}

impl From<i64> for Value {
    fn from(v: i64) -> Self {
        Value::Int(v)
    }
}

impl From<&str> for Value {
    fn from(v: &str) -> Self {
        Value::Str(v.to_string())
    }
}

pub type Record = BTreeMap<String, Value>;

/// Build a record from `(attribute, value)` pairs.
pub fn record<V: Into<Value>, const N: usize>(pairs: [(&str, V); N]) -> Record {
    pairs.into_iter().map(|(k, v)| (k.to_string(), v.into())).collect()
}

pub fn fmt_record(r: &Record) -> String {
    let parts: Vec<String> = r.iter().map(|(k, v)| format!("{k}={v}")).collect();
    format!("{{{}}}", parts.join(","))
}

/// Restriction of `r` to `key`, or `None` if some key attribute is missing.
pub fn project(r: &Record, key: &AttrSet) -> Option<Record> {
    key.iter().map(|k| r.get(k).map(|v| (k.clone(), v.clone()))).collect()
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Body {
    Record(Arc<Record>),
    /// No further records of the partition described by the key values.
    Punctuation(Arc<Record>),
}

impl Body {
    pub fn record(&self) -> Option<&Record> {
        match self {
            Body::Record(r) => Some(r),
            Body::Punctuation(_) => None,
        }
    }
}

impl fmt::Display for Body {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Body::Record(r) => f.write_str(&fmt_record(r)),
            Body::Punctuation(k) => write!(f, "seal{}", fmt_record(k)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Message {
    pub stream: Arc<str>,
    /// Source producer name or component instance that emitted the message.
    pub producer: Arc<str>,
    pub body: Body,
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// 64-bit FNV-1a.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET, |h, b| (h ^ u64::from(*b)).wrapping_mul(FNV_PRIME))
}

/// Platform-independent hash of the record's values on `attrs` (all
/// attributes when `None`). Each attribute contributes its name, a type tag
/// and its value as little-endian bytes or UTF-8.
pub fn partition_hash(r: &Record, attrs: Option<&AttrSet>) -> u64 {
    let mut bytes = Vec::new();
    for (k, v) in r {
        if attrs.is_some_and(|a| !a.contains(k)) {
            continue;
        }
        bytes.extend_from_slice(k.as_bytes());
        bytes.push(0);
        match v {
            Value::Int(i) => {
                bytes.push(b'i');
                bytes.extend_from_slice(&i.to_le_bytes());
            }
            Value::Str(s) => {
                bytes.push(b's');
                bytes.extend_from_slice(s.as_bytes());
            }
        }
        bytes.push(0xff);
    }
    fnv1a(&bytes)
}
