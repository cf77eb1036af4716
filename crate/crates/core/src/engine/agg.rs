//! Aggregate accumulators. Each accepts rows one at a time and can report
//! its current value at any point, which window frames rely on.

use std::cmp::Ordering;
use std::collections::HashSet;

use super::eval::{class, sort_cmp};
use super::EngineError;
use crate::perfstats::QuantileSketch;
use crate::values::{canonical_encode, DigestBuilder, DigestOptions, Value};

pub(crate) const APPROX_PERCENTILE_EPSILON: f64 = 0.01;

#[derive(Debug, Clone, Copy)]
pub(crate) struct AccFlags {
    pub tie_break_flip: bool,
    pub float_reverse_sum: bool,
    pub digest: DigestOptions,
}

/// Rejects unknown aggregates and wrong argument shapes.
pub(crate) fn check_arity(name: &str, star: bool, n: usize) -> Result<(), EngineError> {
    let ok = match name {
        "count" => star || n == 1,
        "result_digest" => star || n >= 1,
        "sum" | "avg" | "min" | "max" | "array_agg" | "approx_distinct" | "arbitrary" | "any_value" => !star && n == 1,
        "max_by" | "min_by" | "approx_percentile" => !star && n == 2,
        _ => return Err(EngineError::Unsupported(format!("aggregate {name}"))),
    };
    if ok {
        Ok(())
    } else {
        Err(EngineError::Semantic(format!(
            "wrong arguments for {name}({})",
            if star { "*".to_string() } else { n.to_string() }
        )))
    }
}

#[derive(Debug, Clone)]
enum Kind {
    CountStar(u64),
    Count(u64),
    Sum(NumSum),
    Avg(NumSum, u64),
    Min(Option<Value>),
    Max(Option<Value>),
    MaxBy(Option<(Value, Value)>),
    MinBy(Option<(Value, Value)>),
    ArrayAgg(Vec<(Value, Vec<Value>)>),
    Distinct(HashSet<Vec<u8>>),
    Percentile {
        sketch: QuantileSketch,
        q: Option<f64>,
        all_int: bool,
    },
    Arbitrary(Option<Value>),
    Digest(DigestBuilder),
}

/// Running sum that switches to floating point once a float appears.
#[derive(Debug, Clone, Default)]
struct NumSum {
    int: i128,
    float: f64,
    is_float: bool,
    any: bool,
    /// Kept only when floats are summed in reverse.
    log: Option<Vec<Value>>,
}

impl NumSum {
    fn new(reverse: bool) -> Self {
        NumSum {
            log: reverse.then(Vec::new),
            ..Default::default()
        }
    }

    fn add(&mut self, v: &Value) -> Result<(), EngineError> {
        match v {
            Value::Int(i) => {
                if self.is_float {
                    self.float += *i as f64;
                } else {
                    self.int += i128::from(*i);
                }
            }
            Value::Float(f) => {
                if !self.is_float {
                    self.is_float = true;
                    self.float = self.int as f64;
                }
                self.float += f;
            }
            other => return Err(EngineError::TypeError(format!("cannot sum {}", other.type_name()))),
        }
        self.any = true;
        if let Some(log) = &mut self.log {
            log.push(v.clone());
        }
        Ok(())
    }

    fn total(&self) -> NumSum {
        match &self.log {
            Some(log) if self.is_float => {
                let mut s = NumSum::new(false);
                for v in log.iter().rev() {
                    s.add(v).expect("logged values are numbers");
                }
                s
            }
            _ => NumSum { log: None, ..*self },
        }
    }

    fn value(&self) -> Result<Value, EngineError> {
        if !self.any {
            return Ok(Value::Null);
        }
        let t = self.total();
        if t.is_float {
            Ok(Value::Float(t.float))
        } else {
            i64::try_from(t.int)
                .map(Value::Int)
                .map_err(|_| EngineError::NumericOverflow(format!("sum {} exceeds BIGINT", t.int)))
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Accumulator {
    name: String,
    kind: Kind,
    /// Canonical encodings already seen, for `DISTINCT` arguments.
    seen: Option<HashSet<Vec<u8>>>,
    /// Per-key direction and NULL placement for `array_agg(... ORDER BY ...)`.
    order: Vec<(bool, Option<bool>)>,
    flip: bool,
}

fn ensure_same_class(a: &Value, b: &Value, what: &str) -> Result<(), EngineError> {
    if class(a) != class(b) {
        return Err(EngineError::TypeError(format!(
            "{what} over mixed {} and {}",
            a.type_name(),
            b.type_name()
        )));
    }
    Ok(())
}

impl Accumulator {
    pub fn new(
        name: &str,
        star: bool,
        distinct: bool,
        order: Vec<(bool, Option<bool>)>,
        arity: usize,
        flags: AccFlags,
    ) -> Accumulator {
        let kind = match name {
            "count" if star => Kind::CountStar(0),
            "count" if distinct => Kind::Distinct(HashSet::new()),
            "count" => Kind::Count(0),
            "sum" => Kind::Sum(NumSum::new(flags.float_reverse_sum)),
            "avg" => Kind::Avg(NumSum::new(flags.float_reverse_sum), 0),
            "min" => Kind::Min(None),
            "max" => Kind::Max(None),
            "max_by" => Kind::MaxBy(None),
            "min_by" => Kind::MinBy(None),
            "array_agg" => Kind::ArrayAgg(Vec::new()),
            "approx_distinct" => Kind::Distinct(HashSet::new()),
            "approx_percentile" => Kind::Percentile {
                sketch: QuantileSketch::new(APPROX_PERCENTILE_EPSILON),
                q: None,
                all_int: true,
            },
            "arbitrary" | "any_value" => Kind::Arbitrary(None),
            "result_digest" => Kind::Digest(DigestBuilder::with_arity(flags.digest, arity)),
            other => unreachable!("arity check rejects {other}"),
        };
        let dedupe = distinct && !matches!(kind, Kind::Distinct(_) | Kind::Min(_) | Kind::Max(_));
        Accumulator {
            name: name.to_string(),
            kind,
            seen: dedupe.then(HashSet::new),
            order,
            flip: flags.tie_break_flip,
        }
    }

    pub fn push(&mut self, args: &[Value], order_keys: Vec<Value>) -> Result<(), EngineError> {
        if let Some(seen) = &mut self.seen {
            let mut key = Vec::new();
            for a in args {
                key.extend(canonical_encode(a));
            }
            if !seen.insert(key) {
                return Ok(());
            }
        }
        let flip = self.flip;
        match &mut self.kind {
            Kind::CountStar(n) => *n += 1,
            Kind::Count(n) => {
                if !args[0].is_null() {
                    *n += 1;
                }
            }
            Kind::Sum(s) => {
                if !args[0].is_null() {
                    s.add(&args[0])?;
                }
            }
            Kind::Avg(s, n) => {
                if !args[0].is_null() {
                    s.add(&args[0])?;
                    *n += 1;
                }
            }
            Kind::Min(best) | Kind::Max(best) => {
                let v = &args[0];
                if v.is_null() {
                    return Ok(());
                }
                let want = if self.name == "min" { Ordering::Less } else { Ordering::Greater };
                match best {
                    None => *best = Some(v.clone()),
                    Some(b) => {
                        ensure_same_class(v, b, &self.name)?;
                        if sort_cmp(v, b) == want {
                            *best = Some(v.clone());
                        }
                    }
                }
            }
            Kind::MaxBy(best) | Kind::MinBy(best) => {
                let (x, y) = (&args[0], &args[1]);
                if y.is_null() {
                    return Ok(());
                }
                let want = if self.name == "max_by" { Ordering::Greater } else { Ordering::Less };
                match best {
                    None => *best = Some((x.clone(), y.clone())),
                    Some((_, by)) => {
                        ensure_same_class(y, by, &self.name)?;
                        let o = sort_cmp(y, by);
                        if o == want || (flip && o == Ordering::Equal) {
                            *best = Some((x.clone(), y.clone()));
                        }
                    }
                }
            }
            Kind::ArrayAgg(items) => items.push((args[0].clone(), order_keys)),
            Kind::Distinct(set) => {
                if !args[0].is_null() {
                    set.insert(canonical_encode(&args[0]));
                }
            }
            Kind::Percentile { sketch, q, all_int } => {
                let x = &args[0];
                let qv = match &args[1] {
                    Value::Int(i) => *i as f64,
                    Value::Float(f) => *f,
                    other => {
                        return Err(EngineError::TypeError(format!(
                            "approx_percentile fraction must be a number, found {}",
                            other.type_name()
                        )))
                    }
                };
                if !(0.0..=1.0).contains(&qv) {
                    return Err(EngineError::Semantic(format!("percentile {qv} outside [0, 1]")));
                }
                if q.is_none() {
                    *q = Some(qv);
                }
                match x {
                    Value::Null => {}
                    Value::Int(i) => sketch.insert(*i as f64),
                    Value::Float(f) => {
                        *all_int = false;
                        sketch.insert(*f);
                    }
                    other => {
                        return Err(EngineError::TypeError(format!(
                            "approx_percentile over {}",
                            other.type_name()
                        )))
                    }
                }
            }
            Kind::Arbitrary(v) => {
                if !args[0].is_null() && (v.is_none() || flip) {
                    *v = Some(args[0].clone());
                }
            }
            Kind::Digest(b) => b
                .push(args)
                .map_err(|e| EngineError::Semantic(e.to_string()))?,
        }
        Ok(())
    }

    pub fn value(&self) -> Result<Value, EngineError> {
        Ok(match &self.kind {
            Kind::CountStar(n) | Kind::Count(n) => Value::Int(*n as i64),
            Kind::Sum(s) => s.value()?,
            Kind::Avg(s, n) => {
                if *n == 0 {
                    Value::Null
                } else {
                    let t = s.total();
                    let total = if t.is_float { t.float } else { t.int as f64 };
                    Value::Float(total / *n as f64)
                }
            }
            Kind::Min(v) | Kind::Arbitrary(v) | Kind::Max(v) => v.clone().unwrap_or(Value::Null),
            Kind::MaxBy(b) | Kind::MinBy(b) => b.as_ref().map_or(Value::Null, |(x, _)| x.clone()),
            Kind::ArrayAgg(items) => {
                if items.is_empty() {
                    Value::Null
                } else {
                    let mut sorted: Vec<&(Value, Vec<Value>)> = items.iter().collect();
                    if !self.order.is_empty() {
                        sorted.sort_by(|a, b| compare_keys(&a.1, &b.1, &self.order));
                    }
                    Value::Array(sorted.into_iter().map(|(v, _)| v.clone()).collect())
                }
            }
            Kind::Distinct(set) => Value::Int(set.len() as i64),
            Kind::Percentile { sketch, q, all_int } => {
                if sketch.is_empty() {
                    Value::Null
                } else {
                    let x = sketch
                        .quantile(q.unwrap_or(0.5))
                        .map_err(|e| EngineError::Semantic(e.to_string()))?;
                    if *all_int {
                        Value::Int(x as i64)
                    } else {
                        Value::Float(x)
                    }
                }
            }
            Kind::Digest(b) => Value::Str(b.clone().finish().to_string()),
        })
    }
}

/// ORDER BY comparison; NULLs go last unless `nulls_first` says otherwise.
pub(crate) fn compare_keys(a: &[Value], b: &[Value], spec: &[(bool, Option<bool>)]) -> Ordering {
    for ((x, y), (desc, nulls_first)) in a.iter().zip(b).zip(spec) {
        let first = nulls_first.unwrap_or(false);
        let o = match (x.is_null(), y.is_null()) {
            (true, true) => Ordering::Equal,
            (true, false) => {
                if first {
                    Ordering::Less
                } else {
                    Ordering::Greater
                }
            }
            (false, true) => {
                if first {
                    Ordering::Greater
                } else {
                    Ordering::Less
                }
            }
            _ => {
                let o = sort_cmp(x, y);
                if *desc {
                    o.reverse()
                } else {
                    o
                }
            }
        };
        if o != Ordering::Equal {
            return o;
        }
    }
    Ordering::Equal
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flags() -> AccFlags {
        AccFlags {
            tie_break_flip: false,
            float_reverse_sum: false,
            digest: DigestOptions::default(),
        }
    }

    fn run(name: &str, distinct: bool, rows: &[Vec<Value>], f: AccFlags) -> Value {
        let mut a = Accumulator::new(name, false, distinct, vec![], rows.first().map_or(1, Vec::len), f);
        for r in rows {
            a.push(r, vec![]).unwrap();
        }
        a.value().unwrap()
    }

    fn col(vals: &[Value]) -> Vec<Vec<Value>> {
        vals.iter().map(|v| vec![v.clone()]).collect()
    }

    #[test]
    fn basic_aggregates() {
        let xs = col(&[Value::Int(3), Value::Null, Value::Int(1), Value::Int(3)]);
        assert_eq!(run("count", false, &xs, flags()), Value::Int(3));
        assert_eq!(run("count", true, &xs, flags()), Value::Int(2));
        assert_eq!(run("sum", false, &xs, flags()), Value::Int(7));
        assert_eq!(run("sum", true, &xs, flags()), Value::Int(4));
        assert_eq!(run("min", false, &xs, flags()), Value::Int(1));
        assert_eq!(run("max", false, &xs, flags()), Value::Int(3));
        assert_eq!(run("avg", false, &xs, flags()), Value::Float(7.0 / 3.0));
        assert_eq!(run("sum", false, &col(&[Value::Null]), flags()), Value::Null);
        assert_eq!(run("approx_distinct", false, &xs, flags()), Value::Int(2));
    }

    #[test]
    fn sum_overflow_is_an_error() {
        let mut a = Accumulator::new("sum", false, false, vec![], 1, flags());
        a.push(&[Value::Int(i64::MAX)], vec![]).unwrap();
        a.push(&[Value::Int(1)], vec![]).unwrap();
        assert!(matches!(a.value(), Err(EngineError::NumericOverflow(_))));
        a.push(&[Value::Int(-1)], vec![]).unwrap();
        assert_eq!(a.value().unwrap(), Value::Int(i64::MAX));
    }

    #[test]
    fn max_by_ties_and_flip() {
        let rows = vec![
            vec![Value::from("a"), Value::Int(5)],
            vec![Value::from("b"), Value::Int(5)],
            vec![Value::from("c"), Value::Int(1)],
        ];
        assert_eq!(run("max_by", false, &rows, flags()), Value::from("a"));
        let flipped = AccFlags {
            tie_break_flip: true,
            ..flags()
        };
        assert_eq!(run("max_by", false, &rows, flipped), Value::from("b"));
        assert_eq!(run("min_by", false, &rows, flags()), Value::from("c"));
    }

    #[test]
    fn reverse_float_sum_changes_rounding() {
        let xs = col(&[Value::Float(1e16), Value::Float(1.0), Value::Float(-1e16), Value::Float(1.0)]);
        let fwd = run("sum", false, &xs, flags());
        let rev = run(
            "sum",
            false,
            &xs,
            AccFlags {
                float_reverse_sum: true,
                ..flags()
            },
        );
        assert_ne!(fwd, rev);
    }

    #[test]
    fn array_agg_order_and_percentile() {
        let mut a = Accumulator::new("array_agg", false, false, vec![(true, None)], 1, flags());
        for (v, k) in [(1, 2), (2, 9), (3, 5)] {
            a.push(&[Value::Int(v)], vec![Value::Int(k)]).unwrap();
        }
        assert_eq!(
            a.value().unwrap(),
            Value::Array(vec![Value::Int(2), Value::Int(3), Value::Int(1)])
        );
        let rows: Vec<Vec<Value>> = (1..=100).map(|i| vec![Value::Int(i), Value::Float(0.5)]).collect();
        assert_eq!(run("approx_percentile", false, &rows, flags()), Value::Int(50));
    }

    #[test]
    fn null_ordering_defaults_last() {
        let spec = [(false, None)];
        assert_eq!(compare_keys(&[Value::Null], &[Value::Int(1)], &spec), Ordering::Greater);
        let desc = [(true, None)];
        assert_eq!(compare_keys(&[Value::Null], &[Value::Int(1)], &desc), Ordering::Greater);
        assert_eq!(compare_keys(&[Value::Int(2)], &[Value::Int(1)], &desc), Ordering::Less);
        let first = [(false, Some(true))];
        assert_eq!(compare_keys(&[Value::Null], &[Value::Int(1)], &first), Ordering::Less);
    }
}
