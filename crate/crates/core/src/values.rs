//! Self-describing values, schema-on-read coercion and order-insensitive
//! result digests.
//!
//! Every [`Value`] carries its physical type. Tables declare a
//! [`LogicalType`] per column and readers convert with [`coerce`], which
//! never fails: a value that cannot be converted becomes `NULL`.
//!
//! Result sets are compared through a [`ResultDigest`]: the XOR of a
//! per-row FNV-1a 64 hash over the [canonical encoding](canonical_encode)
//! of each cell, plus row and column counts. XOR makes the digest
//! independent of row order; it also means two identical rows cancel out,
//! which is why the row count travels alongside the hash.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

const TAG_NULL: u8 = 0x00;
const TAG_BOOL: u8 = 0x01;
const TAG_INT: u8 = 0x02;
const TAG_FLOAT: u8 = 0x03;
const TAG_STRING: u8 = 0x04;
const TAG_ARRAY: u8 = 0x05;
const TAG_MAP: u8 = 0x06;

const CANONICAL_NAN: u64 = 0x7FF8_0000_0000_0000;

pub const FNV_OFFSET_BASIS: u64 = 0xcbf2_9ce4_8422_2325;
pub const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ValueError {
    #[error("row {row} has {found} columns, expected {expected}")]
    ArityMismatch {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("malformed result digest {0:?}")]
    InvalidDigest(String),
}

/// A physical value as stored in a data file or produced by an engine.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum Value {
    #[default]
    Null,
    Bool(bool),
    Int(i64),
    Float(f64),
    Str(String),
    Array(Vec<Value>),
    Map(BTreeMap<String, Value>),
}

/// Column types a table schema can declare.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum LogicalType {
    Boolean,
    Bigint,
    Double,
    Varchar,
    Array,
    Map,
}

impl LogicalType {
    pub const ALL: [LogicalType; 6] = [
        LogicalType::Boolean,
        LogicalType::Bigint,
        LogicalType::Double,
        LogicalType::Varchar,
        LogicalType::Array,
        LogicalType::Map,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LogicalType::Boolean => "BOOLEAN",
            LogicalType::Bigint => "BIGINT",
            LogicalType::Double => "DOUBLE",
            LogicalType::Varchar => "VARCHAR",
            LogicalType::Array => "ARRAY",
            LogicalType::Map => "MAP",
        }
    }

    /// Whether `v` already has the physical shape of this type.
    pub fn matches(self, v: &Value) -> bool {
        matches!(
            (self, v),
            (LogicalType::Boolean, Value::Bool(_))
                | (LogicalType::Bigint, Value::Int(_))
                | (LogicalType::Double, Value::Float(_))
                | (LogicalType::Varchar, Value::Str(_))
                | (LogicalType::Array, Value::Array(_))
                | (LogicalType::Map, Value::Map(_))
        )
    }
}

impl fmt::Display for LogicalType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("unknown logical type '{0}'")]
pub struct UnknownType(pub String);

impl FromStr for LogicalType {
    type Err = UnknownType;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let upper = s.trim().to_ascii_uppercase();
        // VARCHAR(255) and friends
        let base = upper.split('(').next().unwrap_or("").trim();
        match base {
            "BOOLEAN" | "BOOL" => Ok(LogicalType::Boolean),
            "BIGINT" | "INT" | "INTEGER" | "SMALLINT" | "TINYINT" | "LONG" => {
                Ok(LogicalType::Bigint)
            }
            "DOUBLE" | "REAL" | "FLOAT" => Ok(LogicalType::Double),
            "VARCHAR" | "STRING" | "CHAR" | "TEXT" => Ok(LogicalType::Varchar),
            "ARRAY" => Ok(LogicalType::Array),
            "MAP" => Ok(LogicalType::Map),
            _ => Err(UnknownType(s.to_string())),
        }
    }
}

impl Value {
    pub fn is_null(&self) -> bool {
        matches!(self, Value::Null)
    }

    pub fn type_name(&self) -> &'static str {
        match self {
            Value::Null => "NULL",
            Value::Bool(_) => "BOOL",
            Value::Int(_) => "INT64",
            Value::Float(_) => "FLOAT64",
            Value::Str(_) => "STRING",
            Value::Array(_) => "ARRAY",
            Value::Map(_) => "MAP",
        }
    }

    pub fn as_i64(&self) -> Option<i64> {
        match self {
            Value::Int(i) => Some(*i),
            _ => None,
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Int(i) => Some(*i as f64),
            Value::Float(f) => Some(*f),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Value::Str(s) => Some(s),
            _ => None,
        }
    }

    pub fn from_json(json: &serde_json::Value) -> Value {
        match json {
            serde_json::Value::Null => Value::Null,
            serde_json::Value::Bool(b) => Value::Bool(*b),
            serde_json::Value::Number(n) => {
                if let Some(i) = n.as_i64() {
                    Value::Int(i)
                } else {
                    // u64 above i64::MAX and fractional numbers
                    Value::Float(n.as_f64().unwrap_or(f64::NAN))
                }
            }
            serde_json::Value::String(s) => Value::Str(s.clone()),
            serde_json::Value::Array(items) => {
                Value::Array(items.iter().map(Value::from_json).collect())
            }
            serde_json::Value::Object(map) => Value::Map(
                map.iter()
                    .map(|(k, v)| (k.clone(), Value::from_json(v)))
                    .collect(),
            ),
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        match self {
            Value::Null => serde_json::Value::Null,
            Value::Bool(b) => serde_json::Value::Bool(*b),
            Value::Int(i) => serde_json::Value::from(*i),
            Value::Float(f) => serde_json::Number::from_f64(*f)
                .map(serde_json::Value::Number)
                .unwrap_or(serde_json::Value::Null),
            Value::Str(s) => serde_json::Value::String(s.clone()),
            Value::Array(items) => serde_json::Value::Array(items.iter().map(Value::to_json).collect()),
            Value::Map(map) => serde_json::Value::Object(
                map.iter().map(|(k, v)| (k.clone(), v.to_json())).collect(),
            ),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Null => f.write_str("NULL"),
            Value::Bool(b) => write!(f, "{b}"),
            Value::Int(i) => write!(f, "{i}"),
            Value::Float(x) => f.write_str(&render_float(*x)),
            Value::Str(s) => f.write_str(s),
            Value::Array(_) | Value::Map(_) => write!(f, "{}", self.to_json()),
        }
    }
}

impl Serialize for Value {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.to_json().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Value {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let json = serde_json::Value::deserialize(deserializer)?;
        Ok(Value::from_json(&json))
    }
}

impl From<i64> for Value {
    fn from(v: i64) -> Self {
        Value::Int(v)
    }
}

impl From<f64> for Value {
    fn from(v: f64) -> Self {
        Value::Float(v)
    }
}

impl From<bool> for Value {
    fn from(v: bool) -> Self {
        Value::Bool(v)
    }
}

impl From<&str> for Value {
    fn from(v: &str) -> Self {
        Value::Str(v.to_string())
    }
}

impl From<String> for Value {
    fn from(v: String) -> Self {
        Value::Str(v)
    }
}

/// Canonical decimal rendering of a double: shortest round-trip digits,
/// always with a fractional part or exponent so it never reads as an integer.
pub fn render_float(x: f64) -> String {
    if x.is_nan() {
        "NaN".to_string()
    } else if x.is_infinite() {
        if x > 0.0 { "Infinity" } else { "-Infinity" }.to_string()
    } else if x == 0.0 {
        "0.0".to_string()
    } else {
        format!("{x:?}")
    }
}

fn parse_decimal_int(s: &str) -> Option<i64> {
    let t = s.trim();
    let digits = t.strip_prefix(['+', '-']).unwrap_or(t);
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    t.parse::<i64>().ok()
}

fn parse_decimal_float(s: &str) -> Option<f64> {
    let t = s.trim();
    if t.is_empty() {
        return None;
    }
    // Rust also accepts "inf"/"NaN"; only plain decimal notation is data here.
    let ok = t
        .bytes()
        .all(|b| b.is_ascii_digit() || matches!(b, b'+' | b'-' | b'.' | b'e' | b'E'));
    if !ok || !t.bytes().any(|b| b.is_ascii_digit()) {
        return None;
    }
    t.parse::<f64>().ok().filter(|f| f.is_finite())
}

/// Largest magnitude at which every i64 still converts to f64 exactly.
const EXACT_F64_INT: i64 = 1 << 53;

fn float_to_int(f: f64) -> Option<i64> {
    if !f.is_finite() {
        return None;
    }
    let t = f.trunc();
    // i64::MAX is not representable; 2^63 is the first out-of-range value.
    if (-9_223_372_036_854_775_808.0..9_223_372_036_854_775_808.0).contains(&t) {
        Some(t as i64)
    } else {
        None
    }
}

/// Converts `v` to the physical shape of `target`, or `NULL` when that is
/// impossible. Never fails.
///
/// Floats with a fractional part truncate toward zero when read as BIGINT.
pub fn coerce(v: &Value, target: LogicalType) -> Value {
    if target.matches(v) {
        return v.clone();
    }
    match (v, target) {
        (Value::Null, _) => Value::Null,

        (Value::Str(s), LogicalType::Bigint) => parse_decimal_int(s).map_or(Value::Null, Value::Int),
        (Value::Float(f), LogicalType::Bigint) => float_to_int(*f).map_or(Value::Null, Value::Int),

        (Value::Str(s), LogicalType::Double) => {
            parse_decimal_float(s).map_or(Value::Null, Value::Float)
        }
        (Value::Int(i), LogicalType::Double) => {
            if (-EXACT_F64_INT..=EXACT_F64_INT).contains(i) || (*i as f64) as i128 == *i as i128 {
                Value::Float(*i as f64)
            } else {
                Value::Null
            }
        }

        (Value::Int(i), LogicalType::Varchar) => Value::Str(i.to_string()),
        (Value::Float(f), LogicalType::Varchar) => Value::Str(render_float(*f)),
        (Value::Bool(b), LogicalType::Varchar) => {
            Value::Str(if *b { "true" } else { "false" }.to_string())
        }
        (Value::Array(_) | Value::Map(_), LogicalType::Varchar) => Value::Str(v.to_json().to_string()),

        (Value::Str(s), LogicalType::Boolean) => match s.trim().to_ascii_lowercase().as_str() {
            "true" => Value::Bool(true),
            "false" => Value::Bool(false),
            _ => Value::Null,
        },
        (Value::Int(0), LogicalType::Boolean) => Value::Bool(false),
        (Value::Int(1), LogicalType::Boolean) => Value::Bool(true),

        _ => Value::Null,
    }
}

fn canonical_float_bits(f: f64) -> u64 {
    if f.is_nan() {
        CANONICAL_NAN
    } else if f == 0.0 {
        0
    } else {
        f.to_bits()
    }
}

/// Deterministic, type-tagged byte encoding of a value.
///
/// | variant | bytes |
/// |---|---|
/// | NULL | `00` |
/// | BOOL | `01` + `00`/`01` |
/// | INT64 | `02` + 8 bytes big-endian two's complement |
/// | FLOAT64 | `03` + 8 bytes big-endian IEEE-754 (−0.0 → +0.0, NaN → `7FF8000000000000`) |
/// | STRING | `04` + u32 BE byte length + UTF-8 |
/// | ARRAY | `05` + u32 BE count + elements |
/// | MAP | `06` + u32 BE count + (key as STRING, value) pairs sorted by key bytes |
pub fn canonical_encode(v: &Value) -> Vec<u8> {
    let mut out = Vec::with_capacity(16);
    encode_into(v, &mut out);
    out
}

pub fn encode_into(v: &Value, out: &mut Vec<u8>) {
    match v {
        Value::Null => out.push(TAG_NULL),
        Value::Bool(b) => {
            out.push(TAG_BOOL);
            out.push(u8::from(*b));
        }
        Value::Int(i) => {
            out.push(TAG_INT);
            out.extend_from_slice(&i.to_be_bytes());
        }
        Value::Float(f) => {
            out.push(TAG_FLOAT);
            out.extend_from_slice(&canonical_float_bits(*f).to_be_bytes());
        }
        Value::Str(s) => encode_str(s, out),
        Value::Array(items) => {
            out.push(TAG_ARRAY);
            out.extend_from_slice(&(items.len() as u32).to_be_bytes());
            for item in items {
                encode_into(item, out);
            }
        }
        Value::Map(map) => {
            out.push(TAG_MAP);
            out.extend_from_slice(&(map.len() as u32).to_be_bytes());
            // BTreeMap<String, _> iterates in byte order of the keys.
            for (k, item) in map {
                encode_str(k, out);
                encode_into(item, out);
            }
        }
    }
}

fn encode_str(s: &str, out: &mut Vec<u8>) {
    out.push(TAG_STRING);
    out.extend_from_slice(&(s.len() as u32).to_be_bytes());
    out.extend_from_slice(s.as_bytes());
}

/// Streaming FNV-1a 64.
#[derive(Debug, Clone, Copy)]
pub struct Fnv1a64(u64);

impl Default for Fnv1a64 {
    fn default() -> Self {
        Fnv1a64(FNV_OFFSET_BASIS)
    }
}

impl Fnv1a64 {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn update(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.0 ^= u64::from(b);
            self.0 = self.0.wrapping_mul(FNV_PRIME);
        }
    }

    pub fn finish(self) -> u64 {
        self.0
    }
}

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h = Fnv1a64::new();
    h.update(bytes);
    h.finish()
}

/// Digest settings. The default hashes values exactly.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DigestOptions {
    /// Round every FLOAT64 to this many significant decimal digits before
    /// hashing. `None` hashes floats bit-exactly (after ±0/NaN folding).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub float_significant_digits: Option<u32>,
}

impl DigestOptions {
    pub const DEFAULT_ROUNDING_DIGITS: u32 = 9;

    pub fn rounded() -> Self {
        Self {
            float_significant_digits: Some(Self::DEFAULT_ROUNDING_DIGITS),
        }
    }
}

fn round_significant(x: f64, digits: u32) -> f64 {
    if !x.is_finite() || x == 0.0 || digits == 0 {
        return x;
    }
    let s = format!("{:.*e}", (digits - 1) as usize, x);
    s.parse().unwrap_or(x)
}

fn round_floats(v: &Value, digits: u32) -> Value {
    match v {
        Value::Float(f) => Value::Float(round_significant(*f, digits)),
        Value::Array(items) => Value::Array(items.iter().map(|i| round_floats(i, digits)).collect()),
        Value::Map(map) => Value::Map(
            map.iter()
                .map(|(k, i)| (k.clone(), round_floats(i, digits)))
                .collect(),
        ),
        other => other.clone(),
    }
}

/// FNV-1a 64 over the concatenated canonical encodings of the cells.
pub fn row_hash(row: &[Value]) -> u64 {
    row_hash_with(row, DigestOptions::default())
}

pub fn row_hash_with(row: &[Value], opts: DigestOptions) -> u64 {
    let mut h = Fnv1a64::new();
    let mut buf = Vec::with_capacity(32);
    for cell in row {
        buf.clear();
        match opts.float_significant_digits {
            Some(d) => encode_into(&round_floats(cell, d), &mut buf),
            None => encode_into(cell, &mut buf),
        }
        h.update(&buf);
    }
    h.finish()
}

/// Order-insensitive summary of a result set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct ResultDigest {
    pub xor_hash: u64,
    pub row_count: u64,
    pub column_count: u64,
}

impl ResultDigest {
    pub const EMPTY: ResultDigest = ResultDigest {
        xor_hash: 0,
        row_count: 0,
        column_count: 0,
    };

    pub fn empty_with_columns(column_count: usize) -> Self {
        ResultDigest {
            column_count: column_count as u64,
            ..Self::EMPTY
        }
    }
}

impl fmt::Display for ResultDigest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:016x}/{}r/{}c",
            self.xor_hash, self.row_count, self.column_count
        )
    }
}

impl FromStr for ResultDigest {
    type Err = ValueError;

    /// Parses the `Display` form `<16 hex>/<rows>r/<cols>c`.
    fn from_str(s: &str) -> Result<Self, ValueError> {
        let bad = || ValueError::InvalidDigest(s.to_string());
        let mut it = s.split('/');
        let (h, r, c) = match (it.next(), it.next(), it.next(), it.next()) {
            (Some(h), Some(r), Some(c), None) => (h, r, c),
            _ => return Err(bad()),
        };
        if h.len() != 16 {
            return Err(bad());
        }
        Ok(ResultDigest {
            xor_hash: u64::from_str_radix(h, 16).map_err(|_| bad())?,
            row_count: r.strip_suffix('r').and_then(|x| x.parse().ok()).ok_or_else(bad)?,
            column_count: c.strip_suffix('c').and_then(|x| x.parse().ok()).ok_or_else(bad)?,
        })
    }
}

/// Incremental digest builder; rows may arrive in any order.
#[derive(Debug, Clone, Default)]
pub struct DigestBuilder {
    opts: DigestOptions,
    digest: ResultDigest,
    arity: Option<usize>,
}

impl DigestBuilder {
    pub fn new(opts: DigestOptions) -> Self {
        Self {
            opts,
            ..Default::default()
        }
    }

    /// Fixes the column count up front, so an empty result still reports it.
    pub fn with_arity(opts: DigestOptions, arity: usize) -> Self {
        Self {
            opts,
            digest: ResultDigest::empty_with_columns(arity),
            arity: Some(arity),
        }
    }

    pub fn push(&mut self, row: &[Value]) -> Result<(), ValueError> {
        match self.arity {
            Some(a) if a != row.len() => {
                return Err(ValueError::ArityMismatch {
                    row: self.digest.row_count as usize,
                    expected: a,
                    found: row.len(),
                })
            }
            Some(_) => {}
            None => {
                self.arity = Some(row.len());
                self.digest.column_count = row.len() as u64;
            }
        }
        self.digest.xor_hash ^= row_hash_with(row, self.opts);
        self.digest.row_count += 1;
        Ok(())
    }

    pub fn finish(self) -> ResultDigest {
        self.digest
    }
}

pub fn digest<I, R>(rows: I) -> Result<ResultDigest, ValueError>
where
    I: IntoIterator<Item = R>,
    R: AsRef<[Value]>,
{
    digest_with(rows, DigestOptions::default())
}

pub fn digest_with<I, R>(rows: I, opts: DigestOptions) -> Result<ResultDigest, ValueError>
where
    I: IntoIterator<Item = R>,
    R: AsRef<[Value]>,
{
    let mut b = DigestBuilder::new(opts);
    for row in rows {
        b.push(row.as_ref())?;
    }
    Ok(b.finish())
}
