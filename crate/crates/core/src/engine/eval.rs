//! Scalar semantics: three-valued logic, comparisons, arithmetic and
//! built-in functions.

use std::cmp::Ordering;

use chrono::{DateTime, Utc};

use super::EngineError;
use crate::sql::ast::BinaryOp;
use crate::values::{canonical_encode, coerce, LogicalType, Value};

fn type_error(msg: String) -> EngineError {
    EngineError::TypeError(msg)
}

/// NULL is unknown; anything but a boolean is a type error.
pub(crate) fn truth(v: &Value) -> Result<Option<bool>, EngineError> {
    match v {
        Value::Null => Ok(None),
        Value::Bool(b) => Ok(Some(*b)),
        other => Err(type_error(format!("expected BOOLEAN, found {}", other.type_name()))),
    }
}

pub(crate) fn tri(v: Option<bool>) -> Value {
    v.map_or(Value::Null, Value::Bool)
}

/// Comparison classes; values of different classes never compare.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub(crate) enum Class {
    Bool,
    Number,
    Str,
    Array,
    Map,
}

pub(crate) fn class(v: &Value) -> Option<Class> {
    match v {
        Value::Null => None,
        Value::Bool(_) => Some(Class::Bool),
        Value::Int(_) | Value::Float(_) => Some(Class::Number),
        Value::Str(_) => Some(Class::Str),
        Value::Array(_) => Some(Class::Array),
        Value::Map(_) => Some(Class::Map),
    }
}

/// 2^63, the smallest float above every i64.
const TWO_POW_63: f64 = 9_223_372_036_854_775_808.0;

/// Exact comparison of an integer with a float; None for NaN.
pub(crate) fn cmp_int_float(a: i64, b: f64) -> Option<Ordering> {
    if b.is_nan() {
        return None;
    }
    if b >= TWO_POW_63 {
        return Some(Ordering::Less);
    }
    if b < -TWO_POW_63 {
        return Some(Ordering::Greater);
    }
    let t = b.trunc();
    match a.cmp(&(t as i64)) {
        Ordering::Equal => 0.0f64.partial_cmp(&(b - t)),
        o => Some(o),
    }
}

fn cmp_numbers(a: &Value, b: &Value) -> Option<Ordering> {
    match (a, b) {
        (Value::Int(x), Value::Int(y)) => Some(x.cmp(y)),
        (Value::Int(x), Value::Float(y)) => cmp_int_float(*x, *y),
        (Value::Float(x), Value::Int(y)) => cmp_int_float(*y, *x).map(Ordering::reverse),
        (Value::Float(x), Value::Float(y)) => x.partial_cmp(y),
        _ => unreachable!("numbers only"),
    }
}

/// `a op b` for a comparison operator. NaN compares unequal to everything.
pub(crate) fn compare(op: BinaryOp, a: &Value, b: &Value) -> Result<Value, EngineError> {
    if a.is_null() || b.is_null() {
        return Ok(Value::Null);
    }
    let (ca, cb) = (class(a), class(b));
    if ca != cb {
        return Err(type_error(format!(
            "cannot compare {} with {}",
            a.type_name(),
            b.type_name()
        )));
    }
    let ord = match (a, b) {
        (Value::Bool(x), Value::Bool(y)) => Some(x.cmp(y)),
        (Value::Str(x), Value::Str(y)) => Some(x.as_bytes().cmp(y.as_bytes())),
        (Value::Array(_), _) | (Value::Map(_), _) => {
            let eq = canonical_encode(a) == canonical_encode(b);
            return match op {
                BinaryOp::Eq => Ok(Value::Bool(eq)),
                BinaryOp::NotEq => Ok(Value::Bool(!eq)),
                _ => Err(type_error(format!("{} values are not ordered", a.type_name()))),
            };
        }
        _ => cmp_numbers(a, b),
    };
    let r = match ord {
        None => op == BinaryOp::NotEq,
        Some(o) => match op {
            BinaryOp::Eq => o == Ordering::Equal,
            BinaryOp::NotEq => o != Ordering::Equal,
            BinaryOp::Lt => o == Ordering::Less,
            BinaryOp::LtEq => o != Ordering::Greater,
            BinaryOp::Gt => o == Ordering::Greater,
            BinaryOp::GtEq => o != Ordering::Less,
            _ => unreachable!("comparison operators only"),
        },
    };
    Ok(Value::Bool(r))
}

/// Total order used by ORDER BY, windows, min and max. NULLs are placed by
/// the caller. Classes order Bool < Number < Str < Array < Map; NaN sorts
/// above every other number.
pub(crate) fn sort_cmp(a: &Value, b: &Value) -> Ordering {
    match (class(a), class(b)) {
        (Some(x), Some(y)) if x != y => return x.cmp(&y),
        (None, None) => return Ordering::Equal,
        (None, _) => return Ordering::Greater,
        (_, None) => return Ordering::Less,
        _ => {}
    }
    match (a, b) {
        (Value::Bool(x), Value::Bool(y)) => x.cmp(y),
        (Value::Str(x), Value::Str(y)) => x.as_bytes().cmp(y.as_bytes()),
        (Value::Array(x), Value::Array(y)) => {
            for (p, q) in x.iter().zip(y) {
                let o = sort_cmp(p, q);
                if o != Ordering::Equal {
                    return o;
                }
            }
            x.len().cmp(&y.len())
        }
        (Value::Map(_), Value::Map(_)) => canonical_encode(a).cmp(&canonical_encode(b)),
        _ => {
            let a_nan = matches!(a, Value::Float(f) if f.is_nan());
            let b_nan = matches!(b, Value::Float(f) if f.is_nan());
            match (a_nan, b_nan) {
                (true, true) => Ordering::Equal,
                (true, false) => Ordering::Greater,
                (false, true) => Ordering::Less,
                _ => cmp_numbers(a, b).expect("non-NaN numbers compare"),
            }
        }
    }
}

/// Key under which `=` treats values as equal: integral floats fold onto
/// the integer encoding so that `1 = 1.0` hashes alike.
pub(crate) fn equality_key(v: &Value) -> Vec<u8> {
    match v {
        Value::Float(f) if f.fract() == 0.0 && (-TWO_POW_63..TWO_POW_63).contains(f) => {
            canonical_encode(&Value::Int(*f as i64))
        }
        other => canonical_encode(other),
    }
}

pub(crate) fn arith(op: BinaryOp, a: &Value, b: &Value) -> Result<Value, EngineError> {
    if a.is_null() || b.is_null() {
        return Ok(Value::Null);
    }
    let overflow = || EngineError::NumericOverflow(format!("{a} {} {b}", op.symbol()));
    match (a, b) {
        (Value::Int(x), Value::Int(y)) => {
            let r = match op {
                BinaryOp::Plus => x.checked_add(*y),
                BinaryOp::Minus => x.checked_sub(*y),
                BinaryOp::Multiply => x.checked_mul(*y),
                BinaryOp::Divide | BinaryOp::Modulo if *y == 0 => return Err(EngineError::DivisionByZero),
                BinaryOp::Divide => x.checked_div(*y),
                BinaryOp::Modulo => x.checked_rem(*y),
                _ => unreachable!("arithmetic operators only"),
            };
            r.map(Value::Int).ok_or_else(overflow)
        }
        (Value::Int(_) | Value::Float(_), Value::Int(_) | Value::Float(_)) => {
            let (x, y) = (a.as_f64().expect("number"), b.as_f64().expect("number"));
            Ok(Value::Float(match op {
                BinaryOp::Plus => x + y,
                BinaryOp::Minus => x - y,
                BinaryOp::Multiply => x * y,
                BinaryOp::Divide => x / y,
                BinaryOp::Modulo => x % y,
                _ => unreachable!("arithmetic operators only"),
            }))
        }
        _ => Err(type_error(format!(
            "operator {} undefined for {} and {}",
            op.symbol(),
            a.type_name(),
            b.type_name()
        ))),
    }
}

pub(crate) fn negate(v: &Value) -> Result<Value, EngineError> {
    match v {
        Value::Null => Ok(Value::Null),
        Value::Int(i) => i
            .checked_neg()
            .map(Value::Int)
            .ok_or_else(|| EngineError::NumericOverflow(format!("-({i})"))),
        Value::Float(f) => Ok(Value::Float(-f)),
        other => Err(type_error(format!("cannot negate {}", other.type_name()))),
    }
}

fn to_text(v: &Value) -> Result<Option<String>, EngineError> {
    match v {
        Value::Null => Ok(None),
        Value::Str(s) => Ok(Some(s.clone())),
        other => match coerce(other, LogicalType::Varchar) {
            Value::Str(s) => Ok(Some(s)),
            _ => Err(type_error(format!("cannot convert {} to VARCHAR", other.type_name()))),
        },
    }
}

pub(crate) fn concat(a: &Value, b: &Value) -> Result<Value, EngineError> {
    match (to_text(a)?, to_text(b)?) {
        (Some(x), Some(y)) => Ok(Value::Str(x + &y)),
        _ => Ok(Value::Null),
    }
}

/// SQL LIKE with `%` and `_`; no escape character.
pub(crate) fn like(s: &str, pattern: &str) -> bool {
    let s: Vec<char> = s.chars().collect();
    let p: Vec<char> = pattern.chars().collect();
    let (mut si, mut pi) = (0, 0);
    let mut back: Option<(usize, usize)> = None;
    while si < s.len() {
        if pi < p.len() && (p[pi] == '_' || (p[pi] != '%' && p[pi] == s[si])) {
            si += 1;
            pi += 1;
        } else if pi < p.len() && p[pi] == '%' {
            back = Some((pi, si));
            pi += 1;
        } else if let Some((bp, bs)) = back {
            pi = bp + 1;
            si = bs + 1;
            back = Some((bp, bs + 1));
        } else {
            return false;
        }
    }
    p[pi..].iter().all(|&c| c == '%')
}

fn str_arg<'v>(name: &str, v: &'v Value) -> Result<Option<&'v str>, EngineError> {
    match v {
        Value::Null => Ok(None),
        Value::Str(s) => Ok(Some(s)),
        other => Err(type_error(format!("{name} expects VARCHAR, found {}", other.type_name()))),
    }
}

fn int_arg(name: &str, v: &Value) -> Result<Option<i64>, EngineError> {
    match v {
        Value::Null => Ok(None),
        Value::Int(i) => Ok(Some(*i)),
        other => Err(type_error(format!("{name} expects BIGINT, found {}", other.type_name()))),
    }
}

fn num_arg(name: &str, v: &Value) -> Result<Option<f64>, EngineError> {
    match v {
        Value::Null => Ok(None),
        Value::Int(_) | Value::Float(_) => Ok(v.as_f64()),
        other => Err(type_error(format!("{name} expects a number, found {}", other.type_name()))),
    }
}

fn arity(name: &str, args: &[Value], lo: usize, hi: usize) -> Result<(), EngineError> {
    if args.len() < lo || args.len() > hi {
        return Err(EngineError::Semantic(format!(
            "{name} takes {} arguments, got {}",
            if lo == hi { lo.to_string() } else { format!("{lo} to {hi}") },
            args.len()
        )));
    }
    Ok(())
}

/// Deterministic sources for time and randomness functions.
pub(crate) trait ScalarEnv {
    fn clock_ms(&self) -> i64;
    fn next_random(&self) -> u64;
}

fn round_half_away(x: f64, digits: i64) -> f64 {
    if !x.is_finite() {
        return x;
    }
    let d = digits.clamp(-300, 300) as i32;
    let scale = 10f64.powi(d);
    let r = (x * scale).round() / scale;
    if r.is_finite() {
        r
    } else {
        x
    }
}

pub(crate) fn call_scalar(name: &str, args: &[Value], env: &dyn ScalarEnv) -> Result<Value, EngineError> {
    let clock = || {
        DateTime::<Utc>::from_timestamp_millis(env.clock_ms()).expect("clock within chrono range")
    };
    let num1 = |f: fn(f64) -> f64| -> Result<Value, EngineError> {
        arity(name, args, 1, 1)?;
        Ok(num_arg(name, &args[0])?.map_or(Value::Null, |x| Value::Float(f(x))))
    };
    match name {
        "now" | "current_timestamp" | "localtimestamp" => {
            arity(name, args, 0, 0)?;
            Ok(Value::Str(clock().format("%Y-%m-%d %H:%M:%S%.3f").to_string()))
        }
        "current_date" => {
            arity(name, args, 0, 0)?;
            Ok(Value::Str(clock().format("%Y-%m-%d").to_string()))
        }
        "current_time" | "localtime" => {
            arity(name, args, 0, 0)?;
            Ok(Value::Str(clock().format("%H:%M:%S%.3f").to_string()))
        }
        "random" | "rand" => {
            arity(name, args, 0, 0)?;
            Ok(Value::Float((env.next_random() >> 11) as f64 / (1u64 << 53) as f64))
        }
        "uuid" => {
            arity(name, args, 0, 0)?;
            let (a, b) = (env.next_random(), env.next_random());
            let h = format!("{a:016x}{b:016x}");
            Ok(Value::Str(format!(
                "{}-{}-4{}-a{}-{}",
                &h[0..8],
                &h[8..12],
                &h[13..16],
                &h[17..20],
                &h[20..32]
            )))
        }
        "abs" => {
            arity(name, args, 1, 1)?;
            match &args[0] {
                Value::Int(i) => i
                    .checked_abs()
                    .map(Value::Int)
                    .ok_or_else(|| EngineError::NumericOverflow(format!("abs({i})"))),
                other => Ok(num_arg(name, other)?.map_or(Value::Null, |x| Value::Float(x.abs()))),
            }
        }
        "sign" => {
            arity(name, args, 1, 1)?;
            match &args[0] {
                Value::Int(i) => Ok(Value::Int(i.signum())),
                other => Ok(num_arg(name, other)?.map_or(Value::Null, |x| {
                    Value::Float(if x == 0.0 || x.is_nan() { x } else { x.signum() })
                })),
            }
        }
        "round" => {
            arity(name, args, 1, 2)?;
            let digits = match args.get(1) {
                None => 0,
                Some(d) => match int_arg(name, d)? {
                    None => return Ok(Value::Null),
                    Some(d) => d,
                },
            };
            match &args[0] {
                Value::Int(i) if digits >= 0 => Ok(Value::Int(*i)),
                Value::Int(i) => {
                    let r = round_half_away(*i as f64, digits);
                    Ok(Value::Int(r as i64))
                }
                other => Ok(num_arg(name, other)?.map_or(Value::Null, |x| Value::Float(round_half_away(x, digits)))),
            }
        }
        "floor" | "ceil" | "ceiling" => {
            arity(name, args, 1, 1)?;
            match &args[0] {
                Value::Int(i) => Ok(Value::Int(*i)),
                other => Ok(num_arg(name, other)?.map_or(Value::Null, |x| {
                    Value::Float(if name == "floor" { x.floor() } else { x.ceil() })
                })),
            }
        }
        "sqrt" => num1(f64::sqrt),
        "ln" => num1(f64::ln),
        "exp" => num1(f64::exp),
        "power" | "pow" => {
            arity(name, args, 2, 2)?;
            match (num_arg(name, &args[0])?, num_arg(name, &args[1])?) {
                (Some(x), Some(y)) => Ok(Value::Float(x.powf(y))),
                _ => Ok(Value::Null),
            }
        }
        "mod" => {
            arity(name, args, 2, 2)?;
            arith(BinaryOp::Modulo, &args[0], &args[1])
        }
        "lower" | "upper" | "trim" | "ltrim" | "rtrim" | "reverse" => {
            arity(name, args, 1, 1)?;
            Ok(str_arg(name, &args[0])?.map_or(Value::Null, |s| {
                Value::Str(match name {
                    "lower" => s.to_lowercase(),
                    "upper" => s.to_uppercase(),
                    "trim" => s.trim().to_string(),
                    "ltrim" => s.trim_start().to_string(),
                    "rtrim" => s.trim_end().to_string(),
                    _ => s.chars().rev().collect(),
                })
            }))
        }
        "length" => {
            arity(name, args, 1, 1)?;
            Ok(str_arg(name, &args[0])?.map_or(Value::Null, |s| Value::Int(s.chars().count() as i64)))
        }
        "substr" | "substring" => {
            arity(name, args, 2, 3)?;
            let Some(s) = str_arg(name, &args[0])? else { return Ok(Value::Null) };
            let Some(start) = int_arg(name, &args[1])? else { return Ok(Value::Null) };
            let len = match args.get(2) {
                None => None,
                Some(v) => match int_arg(name, v)? {
                    None => return Ok(Value::Null),
                    Some(l) if l < 0 => {
                        return Err(EngineError::Semantic(format!("{name}: negative length {l}")))
                    }
                    Some(l) => Some(l as usize),
                },
            };
            let chars: Vec<char> = s.chars().collect();
            let n = chars.len() as i64;
            // 1-based; negative positions count from the end; 0 yields ''.
            let from = match start {
                0 => return Ok(Value::Str(String::new())),
                s if s > 0 => s - 1,
                s => n + s,
            };
            if from < 0 || from >= n {
                return Ok(Value::Str(String::new()));
            }
            let from = from as usize;
            let to = len.map_or(chars.len(), |l| (from + l).min(chars.len()));
            Ok(Value::Str(chars[from..to].iter().collect()))
        }
        "replace" => {
            arity(name, args, 2, 3)?;
            let Some(s) = str_arg(name, &args[0])? else { return Ok(Value::Null) };
            let Some(from) = str_arg(name, &args[1])? else { return Ok(Value::Null) };
            let to = match args.get(2) {
                None => "",
                Some(v) => match str_arg(name, v)? {
                    None => return Ok(Value::Null),
                    Some(t) => t,
                },
            };
            if from.is_empty() {
                return Ok(Value::Str(s.to_string()));
            }
            Ok(Value::Str(s.replace(from, to)))
        }
        "strpos" => {
            arity(name, args, 2, 2)?;
            match (str_arg(name, &args[0])?, str_arg(name, &args[1])?) {
                (Some(s), Some(sub)) => Ok(Value::Int(
                    s.find(sub).map_or(0, |b| s[..b].chars().count() as i64 + 1),
                )),
                _ => Ok(Value::Null),
            }
        }
        "concat" => {
            let mut out = String::new();
            for a in args {
                match to_text(a)? {
                    None => return Ok(Value::Null),
                    Some(s) => out.push_str(&s),
                }
            }
            Ok(Value::Str(out))
        }
        "coalesce" => {
            if args.is_empty() {
                return Err(EngineError::Semantic("coalesce needs at least one argument".into()));
            }
            Ok(args.iter().find(|v| !v.is_null()).cloned().unwrap_or(Value::Null))
        }
        "nullif" => {
            arity(name, args, 2, 2)?;
            match compare(BinaryOp::Eq, &args[0], &args[1])? {
                Value::Bool(true) => Ok(Value::Null),
                _ => Ok(args[0].clone()),
            }
        }
        "greatest" | "least" => {
            if args.is_empty() {
                return Err(EngineError::Semantic(format!("{name} needs at least one argument")));
            }
            if args.iter().any(Value::is_null) {
                return Ok(Value::Null);
            }
            let mut best = &args[0];
            for a in &args[1..] {
                let op = if name == "greatest" { BinaryOp::Gt } else { BinaryOp::Lt };
                if compare(op, a, best)? == Value::Bool(true) {
                    best = a;
                }
            }
            Ok(best.clone())
        }
        "cardinality" => {
            arity(name, args, 1, 1)?;
            match &args[0] {
                Value::Null => Ok(Value::Null),
                Value::Array(a) => Ok(Value::Int(a.len() as i64)),
                Value::Map(m) => Ok(Value::Int(m.len() as i64)),
                other => Err(type_error(format!("cardinality of {}", other.type_name()))),
            }
        }
        "element_at" => {
            arity(name, args, 2, 2)?;
            match (&args[0], &args[1]) {
                (Value::Null, _) | (_, Value::Null) => Ok(Value::Null),
                (Value::Array(a), Value::Int(i)) => {
                    let idx = if *i > 0 { *i - 1 } else { a.len() as i64 + *i };
                    Ok(usize::try_from(idx).ok().and_then(|j| a.get(j)).cloned().unwrap_or(Value::Null))
                }
                (Value::Map(m), Value::Str(k)) => Ok(m.get(k).cloned().unwrap_or(Value::Null)),
                (c, k) => Err(type_error(format!("element_at({}, {})", c.type_name(), k.type_name()))),
            }
        }
        _ => Err(EngineError::Unsupported(format!("function {name}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Fixed;
    impl ScalarEnv for Fixed {
        fn clock_ms(&self) -> i64 {
            super::super::DEFAULT_CLOCK_MS
        }
        fn next_random(&self) -> u64 {
            u64::MAX
        }
    }

    fn call(name: &str, args: &[Value]) -> Value {
        call_scalar(name, args, &Fixed).unwrap()
    }

    #[test]
    fn three_valued_comparisons() {
        assert_eq!(compare(BinaryOp::Eq, &Value::Null, &Value::Int(1)).unwrap(), Value::Null);
        assert_eq!(compare(BinaryOp::Eq, &Value::Int(1), &Value::Float(1.0)).unwrap(), Value::Bool(true));
        assert_eq!(compare(BinaryOp::Lt, &Value::Int(1), &Value::Float(1.5)).unwrap(), Value::Bool(true));
        assert_eq!(
            compare(BinaryOp::Gt, &Value::Int(i64::MAX), &Value::Float(TWO_POW_63)).unwrap(),
            Value::Bool(false)
        );
        let nan = Value::Float(f64::NAN);
        assert_eq!(compare(BinaryOp::Eq, &nan, &nan).unwrap(), Value::Bool(false));
        assert_eq!(compare(BinaryOp::NotEq, &nan, &nan).unwrap(), Value::Bool(true));
        assert!(matches!(
            compare(BinaryOp::Eq, &Value::from("1"), &Value::Int(1)),
            Err(EngineError::TypeError(_))
        ));
    }

    #[test]
    fn arithmetic_errors() {
        assert_eq!(arith(BinaryOp::Divide, &Value::Int(7), &Value::Int(2)).unwrap(), Value::Int(3));
        assert_eq!(arith(BinaryOp::Divide, &Value::Int(-7), &Value::Int(2)).unwrap(), Value::Int(-3));
        assert_eq!(arith(BinaryOp::Divide, &Value::Int(1), &Value::Int(0)), Err(EngineError::DivisionByZero));
        assert!(matches!(
            arith(BinaryOp::Plus, &Value::Int(i64::MAX), &Value::Int(1)),
            Err(EngineError::NumericOverflow(_))
        ));
        assert_eq!(arith(BinaryOp::Plus, &Value::Int(1), &Value::Float(0.5)).unwrap(), Value::Float(1.5));
        assert_eq!(arith(BinaryOp::Plus, &Value::Null, &Value::Int(1)).unwrap(), Value::Null);
        assert!(arith(BinaryOp::Plus, &Value::from("a"), &Value::Int(1)).is_err());
    }

    #[test]
    fn like_patterns() {
        assert!(like("abc", "a%"));
        assert!(like("abc", "_b_"));
        assert!(like("abc", "%"));
        assert!(!like("abc", "a_"));
        assert!(like("", "%%"));
        assert!(like("a%c", "a%c"));
        assert!(!like("abcd", "%c"));
    }

    #[test]
    fn sort_order_is_total() {
        let mut v = [
            Value::from("b"),
            Value::Float(f64::NAN),
            Value::Int(2),
            Value::Bool(true),
            Value::Float(1.5),
            Value::from("a"),
        ];
        v.sort_by(sort_cmp);
        assert_eq!(v[0], Value::Bool(true));
        assert_eq!(v[1], Value::Float(1.5));
        assert_eq!(v[2], Value::Int(2));
        assert!(matches!(v[3], Value::Float(f) if f.is_nan()));
        assert_eq!(v[4], Value::from("a"));
    }

    #[test]
    fn equality_keys_fold_integral_floats() {
        assert_eq!(equality_key(&Value::Float(3.0)), equality_key(&Value::Int(3)));
        assert_eq!(equality_key(&Value::Float(-0.0)), equality_key(&Value::Int(0)));
        assert_ne!(equality_key(&Value::Float(3.5)), equality_key(&Value::Int(3)));
    }

    #[test]
    fn scalar_functions() {
        assert_eq!(call("now", &[]), Value::from("2024-01-01 00:00:00.000"));
        assert_eq!(call("current_date", &[]), Value::from("2024-01-01"));
        assert_eq!(call("substr", &["hello".into(), 2i64.into(), 3i64.into()]), Value::from("ell"));
        assert_eq!(call("substr", &["hello".into(), (-3i64).into()]), Value::from("llo"));
        assert_eq!(call("round", &[2.5f64.into()]), Value::Float(3.0));
        assert_eq!(call("round", &[(-2.5f64).into()]), Value::Float(-3.0));
        assert_eq!(call("round", &[1.2345f64.into(), 2i64.into()]), Value::Float(1.23));
        assert_eq!(call("coalesce", &[Value::Null, 3i64.into()]), Value::Int(3));
        assert_eq!(call("nullif", &[3i64.into(), 3i64.into()]), Value::Null);
        assert_eq!(call("concat", &["a".into(), 1i64.into()]), Value::from("a1"));
        assert_eq!(call("strpos", &["héllo".into(), "l".into()]), Value::Int(3));
        assert_eq!(call("greatest", &[1i64.into(), 3i64.into(), 2i64.into()]), Value::Int(3));
        let r = call("random", &[]);
        assert!(matches!(r, Value::Float(f) if (0.0..1.0).contains(&f)));
        assert!(matches!(call_scalar("nope", &[], &Fixed), Err(EngineError::Unsupported(_))));
    }
}
