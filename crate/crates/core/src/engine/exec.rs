//! Plan execution over fully materialized relations.
//!
//! Expressions are bound to column positions once per operator. Names that
//! do not resolve locally are looked up in the stack of outer rows, which
//! is how correlated subqueries see their enclosing query. A subquery that
//! never reads its own outer row is evaluated once and cached.

use std::cell::{Cell, OnceCell, RefCell};
use std::collections::{BTreeMap, HashMap, HashSet};
use std::rc::Rc;
use std::sync::Arc;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::agg::{check_arity, compare_keys, AccFlags, Accumulator};
use super::eval::{self, class, equality_key, tri, truth, ScalarEnv};
use super::{cost, partitions_for, Engine, EngineError, ExecutionResult, Metrics, Table, WriteEffect};
use crate::sql::ast::*;
use crate::sql::plan::lower_query;
use crate::sql::LogicalPlan;
use crate::values::{canonical_encode, coerce, LogicalType, Value};

type Result<T> = std::result::Result<T, EngineError>;

#[derive(Debug, Clone)]
struct ColMeta {
    qualifier: Option<String>,
    /// Normalized name; empty for internal columns that names cannot reach.
    name: String,
    display: String,
    ty: Option<LogicalType>,
}

impl ColMeta {
    fn internal(ty: Option<LogicalType>) -> ColMeta {
        ColMeta {
            qualifier: None,
            name: String::new(),
            display: String::new(),
            ty,
        }
    }

    fn is_internal(&self) -> bool {
        self.name.is_empty()
    }
}

type Cols = Rc<Vec<ColMeta>>;

/// Per build-row join key (None when a key is NULL) and the key index.
type HashedSide = (Vec<Option<Vec<u8>>>, HashMap<Vec<u8>, Vec<usize>>);

#[derive(Debug, Clone)]
struct Relation {
    cols: Cols,
    rows: Vec<Vec<Value>>,
}

struct Frame {
    cols: Cols,
    row: Vec<Value>,
}

struct CteSlot {
    name: String,
    plan: LogicalPlan,
    cache: RefCell<Option<Rc<Relation>>>,
}

struct CteScope {
    slots: Vec<CteSlot>,
    /// Outer rows visible where the WITH list was written.
    frame_depth: usize,
}

struct Sub {
    plan: LogicalPlan,
    cache: OnceCell<Rc<Relation>>,
    in_set: OnceCell<InSet>,
}

impl Sub {
    fn new(q: &Query) -> Result<Box<Sub>> {
        Ok(Box::new(Sub {
            plan: lower_query(q)?,
            cache: OnceCell::new(),
            in_set: OnceCell::new(),
        }))
    }
}

/// Hashed view of a one-column subquery result for IN probes.
struct InSet {
    keys: HashSet<Vec<u8>>,
    has_null: bool,
    classes: Vec<eval::Class>,
    empty: bool,
}

enum BExpr {
    Col(usize),
    Outer { frame: usize, col: usize },
    Lit(Value),
    Neg(Box<BExpr>),
    Not(Box<BExpr>),
    Binary(BinaryOp, Box<BExpr>, Box<BExpr>),
    IsNull(Box<BExpr>, bool),
    InList(Box<BExpr>, Vec<BExpr>, bool),
    InSub(Box<BExpr>, Box<Sub>, bool),
    Between(Box<BExpr>, Box<BExpr>, Box<BExpr>, bool),
    Like(Box<BExpr>, Box<BExpr>, bool),
    Case(Option<Box<BExpr>>, Vec<(BExpr, BExpr)>, Option<Box<BExpr>>),
    Cast(Box<BExpr>, LogicalType),
    Call(String, Vec<BExpr>),
    Scalar(Box<Sub>),
}

impl BExpr {
    fn visit_cols(&self, f: &mut impl FnMut(usize)) {
        match self {
            BExpr::Col(i) => f(*i),
            BExpr::Outer { .. } | BExpr::Lit(_) | BExpr::Scalar(_) => {}
            BExpr::Neg(x) | BExpr::Not(x) | BExpr::IsNull(x, _) | BExpr::Cast(x, _) | BExpr::InSub(x, _, _) => {
                x.visit_cols(f)
            }
            BExpr::Binary(_, a, b) | BExpr::Like(a, b, _) => {
                a.visit_cols(f);
                b.visit_cols(f);
            }
            BExpr::Between(a, b, c, _) => {
                a.visit_cols(f);
                b.visit_cols(f);
                c.visit_cols(f);
            }
            BExpr::InList(x, list, _) => {
                x.visit_cols(f);
                list.iter().for_each(|e| e.visit_cols(f));
            }
            BExpr::Case(op, whens, els) => {
                if let Some(o) = op {
                    o.visit_cols(f);
                }
                for (c, r) in whens {
                    c.visit_cols(f);
                    r.visit_cols(f);
                }
                if let Some(e) = els {
                    e.visit_cols(f);
                }
            }
            BExpr::Call(_, args) => args.iter().for_each(|e| e.visit_cols(f)),
        }
    }

    /// Rebases column positions; only used on subquery-free expressions.
    fn shift_cols(&mut self, by: usize) {
        match self {
            BExpr::Col(i) => *i -= by,
            BExpr::Outer { .. } | BExpr::Lit(_) | BExpr::Scalar(_) => {}
            BExpr::Neg(x) | BExpr::Not(x) | BExpr::IsNull(x, _) | BExpr::Cast(x, _) | BExpr::InSub(x, _, _) => {
                x.shift_cols(by)
            }
            BExpr::Binary(_, a, b) | BExpr::Like(a, b, _) => {
                a.shift_cols(by);
                b.shift_cols(by);
            }
            BExpr::Between(a, b, c, _) => {
                a.shift_cols(by);
                b.shift_cols(by);
                c.shift_cols(by);
            }
            BExpr::InList(x, list, _) => {
                x.shift_cols(by);
                list.iter_mut().for_each(|e| e.shift_cols(by));
            }
            BExpr::Case(op, whens, els) => {
                if let Some(o) = op {
                    o.shift_cols(by);
                }
                for (c, r) in whens {
                    c.shift_cols(by);
                    r.shift_cols(by);
                }
                if let Some(e) = els {
                    e.shift_cols(by);
                }
            }
            BExpr::Call(_, args) => args.iter_mut().for_each(|e| e.shift_cols(by)),
        }
    }

    fn static_type(&self, cols: &[ColMeta]) -> Option<LogicalType> {
        match self {
            BExpr::Col(i) => cols[*i].ty,
            BExpr::Lit(v) => value_type(v),
            BExpr::Cast(_, t) => Some(*t),
            BExpr::Not(_)
            | BExpr::IsNull(..)
            | BExpr::InList(..)
            | BExpr::InSub(..)
            | BExpr::Between(..)
            | BExpr::Like(..) => Some(LogicalType::Boolean),
            BExpr::Binary(BinaryOp::Concat, _, _) => Some(LogicalType::Varchar),
            BExpr::Binary(op, _, _) if op.is_comparison() || matches!(op, BinaryOp::And | BinaryOp::Or) => {
                Some(LogicalType::Boolean)
            }
            _ => None,
        }
    }
}

pub(crate) fn value_type(v: &Value) -> Option<LogicalType> {
    match v {
        Value::Null => None,
        Value::Bool(_) => Some(LogicalType::Boolean),
        Value::Int(_) => Some(LogicalType::Bigint),
        Value::Float(_) => Some(LogicalType::Double),
        Value::Str(_) => Some(LogicalType::Varchar),
        Value::Array(_) => Some(LogicalType::Array),
        Value::Map(_) => Some(LogicalType::Map),
    }
}

pub(crate) fn catalog_key(name: &ObjectName) -> String {
    name.0.iter().map(|i| i.value.to_lowercase()).collect::<Vec<_>>().join(".")
}

fn row_key(row: &[Value]) -> Vec<u8> {
    let mut k = Vec::new();
    for v in row {
        k.extend(canonical_encode(v));
    }
    k
}

struct AggLayout {
    keys: Vec<Expr>,
    /// Virtual-row position of each key that is a plain input column.
    key_cols: Vec<Option<usize>>,
    aggs: Vec<FunctionCall>,
}

#[derive(Clone, Copy)]
struct Mode<'a> {
    agg: Option<&'a AggLayout>,
    /// Collected window calls and the column where their results start.
    windows: Option<(&'a [FunctionCall], usize)>,
}

const INPUT: Mode<'static> = Mode {
    agg: None,
    windows: None,
};

enum Resolved {
    Local(usize),
    Outer(usize, usize),
}

fn find_column(parts: &[Ident], cols: &[ColMeta]) -> Result<Option<usize>> {
    let name = parts.last().expect("column has a name").normalized();
    let qual = (parts.len() >= 2).then(|| parts[parts.len() - 2].normalized());
    let mut hit = None;
    for (i, c) in cols.iter().enumerate() {
        if c.name == name && qual.as_ref().is_none_or(|q| c.qualifier.as_ref() == Some(q)) {
            if hit.is_some() {
                return Err(EngineError::AmbiguousColumn(display_parts(parts)));
            }
            hit = Some(i);
        }
    }
    Ok(hit)
}

fn display_parts(parts: &[Ident]) -> String {
    parts.iter().map(|p| p.value.as_str()).collect::<Vec<_>>().join(".")
}

fn push_unique(list: &mut Vec<FunctionCall>, f: &FunctionCall) {
    if !list.contains(f) {
        list.push(f.clone());
    }
}

/// Aggregate and window calls outside subqueries, in first-seen order.
fn collect_calls(e: &Expr, aggs: &mut Vec<FunctionCall>, wins: &mut Vec<FunctionCall>) -> Result<()> {
    match e {
        Expr::Subquery(_) => Ok(()),
        Expr::InSubquery { expr, .. } => collect_calls(expr, aggs, wins),
        Expr::Function(f) if f.over.is_some() => {
            push_unique(wins, f);
            for c in e.children() {
                collect_calls(c, aggs, wins)?;
            }
            Ok(())
        }
        Expr::Function(f) if is_aggregate_name(&f.name) => {
            if e.children().iter().any(|c| c.contains_aggregate() || c.contains_window()) {
                return Err(EngineError::Semantic(format!("nested aggregate or window inside {}", f.name)));
            }
            push_unique(aggs, f);
            Ok(())
        }
        _ => {
            for c in e.children() {
                collect_calls(c, aggs, wins)?;
            }
            Ok(())
        }
    }
}

fn conjuncts(e: &Expr) -> Vec<&Expr> {
    match e {
        Expr::Binary {
            op: BinaryOp::And,
            left,
            right,
        } => {
            let mut v = conjuncts(left);
            v.extend(conjuncts(right));
            v
        }
        other => vec![other],
    }
}

enum KeyRef {
    Output(usize),
    Expr(BExpr),
}

enum Side {
    Neither,
    Left,
    Right,
    Mixed,
}

fn side(b: &BExpr, nl: usize) -> Side {
    let (mut l, mut r) = (false, false);
    b.visit_cols(&mut |i| {
        if i < nl {
            l = true
        } else {
            r = true
        }
    });
    match (l, r) {
        (false, false) => Side::Neither,
        (true, false) => Side::Left,
        (false, true) => Side::Right,
        _ => Side::Mixed,
    }
}

enum Stage {
    Filter(BExpr, Cols),
    Project(Vec<BExpr>, Cols),
}

struct Ctx<'e> {
    engine: &'e Engine,
    tables: &'e BTreeMap<String, Arc<Table>>,
    frames: RefCell<Vec<Frame>>,
    /// Bit `f` is set once outer frame `f` has been read.
    accessed: Cell<u64>,
    scopes: RefCell<Vec<Rc<CteScope>>>,
    scanned: RefCell<BTreeMap<String, (u64, usize)>>,
    rows_scanned: Cell<u64>,
    work: Cell<u64>,
    peak: Cell<u64>,
    rng: RefCell<ChaCha8Rng>,
}

impl ScalarEnv for Ctx<'_> {
    fn clock_ms(&self) -> i64 {
        self.engine.config().clock_ms
    }

    fn next_random(&self) -> u64 {
        self.rng.borrow_mut().next_u64()
    }
}

pub(crate) fn execute(
    engine: &Engine,
    tables: &BTreeMap<String, Arc<Table>>,
    plan: &LogicalPlan,
    seed: u64,
) -> Result<(ExecutionResult, WriteEffect)> {
    let ctx = Ctx {
        engine,
        tables,
        frames: RefCell::new(Vec::new()),
        accessed: Cell::new(0),
        scopes: RefCell::new(Vec::new()),
        scanned: RefCell::new(BTreeMap::new()),
        rows_scanned: Cell::new(0),
        work: Cell::new(0),
        peak: Cell::new(0),
        rng: RefCell::new(ChaCha8Rng::seed_from_u64(seed)),
    };
    let (columns, rows, effect) = match plan {
        LogicalPlan::InsertInto { target, columns, input } => ctx.insert(target, columns, input)?,
        LogicalPlan::CreateTableAs {
            target,
            if_not_exists,
            input,
        } => ctx.create_table_as(target, *if_not_exists, input)?,
        LogicalPlan::Delete { target, predicate, .. } => ctx.delete(target, predicate.as_ref())?,
        _ => {
            let r = ctx.exec(plan)?;
            let names = r.cols.iter().map(|c| c.display.clone()).collect();
            (names, r.rows, WriteEffect::Nothing)
        }
    };
    let metrics = ctx.metrics(rows.len());
    Ok((ExecutionResult { columns, rows, metrics }, effect))
}

impl Ctx<'_> {
    fn metrics(&self, rows_output: usize) -> Metrics {
        let partitions: u64 = self
            .scanned
            .borrow()
            .values()
            .map(|(rows, ps)| partitions_for(*rows, *ps))
            .sum();
        let rows_scanned = self.rows_scanned.get();
        let work = self.work.get();
        Metrics {
            wall_ms: cost::STATEMENT_MS
                + cost::PARTITION_MS * partitions as f64
                + cost::SCAN_ROW_MS * rows_scanned as f64
                + cost::WORK_ROW_MS * work as f64,
            rows_scanned,
            partitions_scanned: partitions,
            rows_output: rows_output as u64,
            peak_rows_in_memory: self.peak.get(),
        }
    }

    fn note(&self, rows: usize) {
        self.work.set(self.work.get() + rows as u64);
        self.peak.set(self.peak.get().max(rows as u64));
    }

    fn acc_flags(&self) -> AccFlags {
        AccFlags {
            tie_break_flip: self.engine.faults().tie_break_flip,
            float_reverse_sum: self.engine.faults().float_reverse_sum,
            digest: self.engine.config().digest,
        }
    }

    // ---- tables ----

    fn table(&self, name: &ObjectName) -> Result<Arc<Table>> {
        self.tables
            .get(&catalog_key(name))
            .cloned()
            .ok_or_else(|| EngineError::UnknownTable(name.display_name()))
    }

    fn table_cols(t: &Table, qualifier: &str) -> Cols {
        Rc::new(
            t.columns
                .iter()
                .map(|(n, ty)| ColMeta {
                    qualifier: Some(qualifier.to_string()),
                    name: n.to_lowercase(),
                    display: n.clone(),
                    ty: Some(*ty),
                })
                .collect(),
        )
    }

    fn read_row(&self, t: &Table, i: usize) -> Vec<Value> {
        let bug = self.engine.faults().coercion_bug;
        t.rows[i]
            .iter()
            .zip(&t.columns)
            .map(|(v, (_, ty))| {
                if bug && *ty == LogicalType::Bigint && matches!(v, Value::Str(_)) {
                    Value::Null
                } else {
                    coerce(v, *ty)
                }
            })
            .collect()
    }

    fn scan_order(&self, n: usize) -> Box<dyn Iterator<Item = usize>> {
        if self.engine.faults().reverse_scan_order {
            Box::new((0..n).rev())
        } else {
            Box::new(0..n)
        }
    }

    fn record_scan(&self, t: &Table, rows: u64) {
        self.rows_scanned.set(self.rows_scanned.get() + rows);
        let mut s = self.scanned.borrow_mut();
        let e = s.entry(t.name.to_lowercase()).or_insert((0, t.partition_size));
        e.0 += rows;
    }

    fn cte_lookup(&self, name: &str) -> Result<Option<Rc<Relation>>> {
        let scopes = self.scopes.borrow().clone();
        for (d, scope) in scopes.iter().enumerate().rev() {
            let Some(slot) = scope.slots.iter().find(|s| s.name == name) else {
                continue;
            };
            if let Some(r) = slot.cache.borrow().as_ref() {
                return Ok(Some(r.clone()));
            }
            // Evaluate in the environment where the WITH list was written.
            let saved_scopes = self.scopes.replace(scopes[..=d].to_vec());
            let saved_frames = self.frames.borrow_mut().split_off(scope.frame_depth);
            let res = self.exec(&slot.plan);
            self.frames.borrow_mut().extend(saved_frames);
            *self.scopes.borrow_mut() = saved_scopes;
            let rel = Rc::new(res?);
            *slot.cache.borrow_mut() = Some(rel.clone());
            return Ok(Some(rel));
        }
        Ok(None)
    }

    fn is_cte(&self, name: &ObjectName) -> bool {
        name.0.len() == 1 && {
            let n = name.last().normalized();
            self.scopes.borrow().iter().any(|s| s.slots.iter().any(|c| c.name == n))
        }
    }

    fn scan(&self, name: &ObjectName, alias: Option<&Ident>) -> Result<Relation> {
        let qualifier = alias.map_or_else(|| name.last().normalized(), Ident::normalized);
        if name.0.len() == 1 {
            if let Some(rel) = self.cte_lookup(&name.last().normalized())? {
                return Ok(Relation {
                    cols: requalify(&rel.cols, &qualifier),
                    rows: rel.rows.clone(),
                });
            }
        }
        let t = self.table(name)?;
        let rows: Vec<Vec<Value>> = self.scan_order(t.rows.len()).map(|i| self.read_row(&t, i)).collect();
        self.record_scan(&t, rows.len() as u64);
        Ok(Relation {
            cols: Self::table_cols(&t, &qualifier),
            rows,
        })
    }

    // ---- binding ----

    fn resolve(&self, parts: &[Ident], cols: &[ColMeta]) -> Result<Resolved> {
        if let Some(i) = find_column(parts, cols)? {
            return Ok(Resolved::Local(i));
        }
        let frames = self.frames.borrow();
        for (f, fr) in frames.iter().enumerate().rev() {
            if let Some(i) = find_column(parts, &fr.cols)? {
                return Ok(Resolved::Outer(f, i));
            }
        }
        Err(EngineError::UnknownColumn(display_parts(parts)))
    }

    fn bind(&self, e: &Expr, cols: &[ColMeta], mode: Mode) -> Result<BExpr> {
        if let Some(layout) = mode.agg {
            if let Some(i) = layout.keys.iter().position(|k| k == e) {
                return Ok(BExpr::Col(i));
            }
        }
        let b = |x: &Expr| -> Result<Box<BExpr>> { Ok(Box::new(self.bind(x, cols, mode)?)) };
        Ok(match e {
            Expr::Column(parts) => match self.resolve(parts, cols)? {
                Resolved::Local(i) => match mode.agg {
                    Some(layout) => match layout.key_cols.iter().position(|k| *k == Some(i)) {
                        Some(k) => BExpr::Col(k),
                        None => {
                            return Err(EngineError::Semantic(format!(
                                "column {} must appear in GROUP BY or inside an aggregate",
                                display_parts(parts)
                            )))
                        }
                    },
                    None => BExpr::Col(i),
                },
                Resolved::Outer(frame, col) => BExpr::Outer { frame, col },
            },
            Expr::Literal(v) => BExpr::Lit(v.clone()),
            Expr::Unary { op: UnaryOp::Neg, expr } => BExpr::Neg(b(expr)?),
            Expr::Unary { op: UnaryOp::Not, expr } => BExpr::Not(b(expr)?),
            Expr::Binary { op, left, right } => BExpr::Binary(*op, b(left)?, b(right)?),
            Expr::IsNull { expr, negated } => BExpr::IsNull(b(expr)?, *negated),
            Expr::InList { expr, list, negated } => BExpr::InList(
                b(expr)?,
                list.iter().map(|x| self.bind(x, cols, mode)).collect::<Result<_>>()?,
                *negated,
            ),
            Expr::InSubquery { expr, query, negated } => BExpr::InSub(b(expr)?, Sub::new(query)?, *negated),
            Expr::Between {
                expr,
                low,
                high,
                negated,
            } => BExpr::Between(b(expr)?, b(low)?, b(high)?, *negated),
            Expr::Like { expr, pattern, negated } => BExpr::Like(b(expr)?, b(pattern)?, *negated),
            Expr::Case {
                operand,
                whens,
                else_result,
            } => BExpr::Case(
                operand.as_deref().map(b).transpose()?,
                whens
                    .iter()
                    .map(|w| Ok((self.bind(&w.condition, cols, mode)?, self.bind(&w.result, cols, mode)?)))
                    .collect::<Result<_>>()?,
                else_result.as_deref().map(b).transpose()?,
            ),
            Expr::Cast { expr, ty } => BExpr::Cast(b(expr)?, *ty),
            Expr::Subquery(q) => BExpr::Scalar(Sub::new(q)?),
            Expr::Function(f) if f.over.is_some() => match mode.windows {
                Some((wins, base)) => match wins.iter().position(|w| w == f) {
                    Some(i) => BExpr::Col(base + i),
                    None => return Err(EngineError::Semantic(format!("window {} not allowed here", f.name))),
                },
                None => {
                    return Err(EngineError::Semantic(format!(
                        "window function {} not allowed here",
                        f.name
                    )))
                }
            },
            Expr::Function(f) if is_aggregate_name(&f.name) => match mode.agg {
                Some(layout) => match layout.aggs.iter().position(|a| a == f) {
                    Some(i) => BExpr::Col(layout.keys.len() + i),
                    None => return Err(EngineError::Semantic(format!("aggregate {} not allowed here", f.name))),
                },
                None => {
                    return Err(EngineError::Semantic(format!(
                        "aggregate function {} not allowed here",
                        f.name
                    )))
                }
            },
            Expr::Function(f) => {
                if f.args == FunctionArgs::Star || f.distinct || !f.order_by.is_empty() {
                    return Err(EngineError::Semantic(format!(
                        "{} is not an aggregate function",
                        f.name
                    )));
                }
                BExpr::Call(
                    f.name.clone(),
                    f.arg_list().iter().map(|x| self.bind(x, cols, mode)).collect::<Result<_>>()?,
                )
            }
        })
    }

    /// Projection list; wildcards expand to the named columns of `cols`.
    fn bind_items(&self, items: &[SelectItem], cols: &[ColMeta], mode: Mode) -> Result<(Vec<BExpr>, Vec<ColMeta>)> {
        let mut exprs = Vec::new();
        let mut metas = Vec::new();
        for (n, item) in items.iter().enumerate() {
            match item {
                SelectItem::Wildcard => {
                    for (i, c) in cols.iter().enumerate().filter(|(_, c)| !c.is_internal()) {
                        exprs.push(BExpr::Col(i));
                        metas.push(ColMeta {
                            qualifier: None,
                            ..c.clone()
                        });
                    }
                }
                SelectItem::QualifiedWildcard(q) => {
                    let qual = q.last().normalized();
                    let before = exprs.len();
                    for (i, c) in cols.iter().enumerate() {
                        if c.qualifier.as_deref() == Some(qual.as_str()) && !c.is_internal() {
                            exprs.push(BExpr::Col(i));
                            metas.push(ColMeta {
                                qualifier: None,
                                ..c.clone()
                            });
                        }
                    }
                    if exprs.len() == before {
                        return Err(EngineError::UnknownTable(q.display_name()));
                    }
                }
                SelectItem::Expr { expr, alias } => {
                    let b = self.bind(expr, cols, mode)?;
                    let (name, display) = match (alias, expr) {
                        (Some(a), _) => (a.normalized(), a.value.clone()),
                        (None, Expr::Column(parts)) => {
                            let last = parts.last().expect("column has a name");
                            (last.normalized(), last.value.clone())
                        }
                        (None, Expr::Function(f)) => (f.name.clone(), f.name.clone()),
                        _ => (format!("_col{n}"), format!("_col{n}")),
                    };
                    metas.push(ColMeta {
                        qualifier: None,
                        name,
                        display,
                        ty: b.static_type(cols),
                    });
                    exprs.push(b);
                }
            }
        }
        Ok((exprs, metas))
    }

    // ---- evaluation ----

    fn eval(&self, e: &BExpr, row: &[Value], cols: &Cols) -> Result<Value> {
        Ok(match e {
            BExpr::Col(i) => row[*i].clone(),
            BExpr::Outer { frame, col } => {
                if *frame < 64 {
                    self.accessed.set(self.accessed.get() | (1u64 << frame));
                }
                self.frames.borrow()[*frame].row[*col].clone()
            }
            BExpr::Lit(v) => v.clone(),
            BExpr::Neg(x) => eval::negate(&self.eval(x, row, cols)?)?,
            BExpr::Not(x) => tri(truth(&self.eval(x, row, cols)?)?.map(|b| !b)),
            BExpr::Binary(BinaryOp::And, l, r) => {
                let lv = truth(&self.eval(l, row, cols)?)?;
                if lv == Some(false) {
                    return Ok(Value::Bool(false));
                }
                match (lv, truth(&self.eval(r, row, cols)?)?) {
                    (_, Some(false)) => Value::Bool(false),
                    (Some(true), Some(true)) => Value::Bool(true),
                    _ => Value::Null,
                }
            }
            BExpr::Binary(BinaryOp::Or, l, r) => {
                let lv = truth(&self.eval(l, row, cols)?)?;
                if lv == Some(true) {
                    return Ok(Value::Bool(true));
                }
                match (lv, truth(&self.eval(r, row, cols)?)?) {
                    (_, Some(true)) => Value::Bool(true),
                    (Some(false), Some(false)) => Value::Bool(false),
                    _ => Value::Null,
                }
            }
            BExpr::Binary(op, l, r) => {
                let (a, b) = (self.eval(l, row, cols)?, self.eval(r, row, cols)?);
                match op {
                    BinaryOp::Concat => eval::concat(&a, &b)?,
                    op if op.is_comparison() => eval::compare(*op, &a, &b)?,
                    op => eval::arith(*op, &a, &b)?,
                }
            }
            BExpr::IsNull(x, negated) => Value::Bool(self.eval(x, row, cols)?.is_null() != *negated),
            BExpr::InList(x, list, negated) => {
                let v = self.eval(x, row, cols)?;
                let mut found = Some(false);
                for item in list {
                    let c = eval::compare(BinaryOp::Eq, &v, &self.eval(item, row, cols)?)?;
                    match c {
                        Value::Bool(true) => found = Some(true),
                        Value::Null if found == Some(false) => found = None,
                        _ => {}
                    }
                }
                tri(found.map(|b| b != *negated))
            }
            BExpr::InSub(x, sub, negated) => {
                let v = self.eval(x, row, cols)?;
                let rel = self.subquery(sub, row, cols)?;
                if rel.cols.len() != 1 {
                    return Err(EngineError::Semantic("IN subquery must return one column".into()));
                }
                let set = sub.in_set.get_or_init(|| build_in_set(&rel));
                tri(probe_in_set(set, &v)?.map(|b| b != *negated))
            }
            BExpr::Between(x, lo, hi, negated) => {
                let v = self.eval(x, row, cols)?;
                let ge = truth(&eval::compare(BinaryOp::GtEq, &v, &self.eval(lo, row, cols)?)?)?;
                let le = truth(&eval::compare(BinaryOp::LtEq, &v, &self.eval(hi, row, cols)?)?)?;
                let both = match (ge, le) {
                    (Some(false), _) | (_, Some(false)) => Some(false),
                    (Some(true), Some(true)) => Some(true),
                    _ => None,
                };
                tri(both.map(|b| b != *negated))
            }
            BExpr::Like(x, p, negated) => match (self.eval(x, row, cols)?, self.eval(p, row, cols)?) {
                (Value::Null, _) | (_, Value::Null) => Value::Null,
                (Value::Str(s), Value::Str(pat)) => Value::Bool(eval::like(&s, &pat) != *negated),
                (a, b) => {
                    return Err(EngineError::TypeError(format!(
                        "LIKE needs VARCHAR operands, found {} and {}",
                        a.type_name(),
                        b.type_name()
                    )))
                }
            },
            BExpr::Case(operand, whens, els) => {
                let op = operand.as_ref().map(|o| self.eval(o, row, cols)).transpose()?;
                for (cond, res) in whens {
                    let c = self.eval(cond, row, cols)?;
                    let hit = match &op {
                        Some(v) => eval::compare(BinaryOp::Eq, v, &c)? == Value::Bool(true),
                        None => truth(&c)? == Some(true),
                    };
                    if hit {
                        return self.eval(res, row, cols);
                    }
                }
                match els {
                    Some(e) => self.eval(e, row, cols)?,
                    None => Value::Null,
                }
            }
            BExpr::Cast(x, ty) => coerce(&self.eval(x, row, cols)?, *ty),
            BExpr::Call(name, args) => {
                let vals = args.iter().map(|a| self.eval(a, row, cols)).collect::<Result<Vec<_>>>()?;
                eval::call_scalar(name, &vals, self)?
            }
            BExpr::Scalar(sub) => {
                let rel = self.subquery(sub, row, cols)?;
                if rel.cols.len() != 1 {
                    return Err(EngineError::Semantic("scalar subquery must return one column".into()));
                }
                match rel.rows.len() {
                    0 => Value::Null,
                    1 => rel.rows[0][0].clone(),
                    n => {
                        return Err(EngineError::Cardinality(format!(
                            "scalar subquery returned {n} rows"
                        )))
                    }
                }
            }
        })
    }

    fn subquery(&self, sub: &Sub, row: &[Value], cols: &Cols) -> Result<Rc<Relation>> {
        if let Some(r) = sub.cache.get() {
            return Ok(r.clone());
        }
        let f = self.frames.borrow().len();
        self.frames.borrow_mut().push(Frame {
            cols: cols.clone(),
            row: row.to_vec(),
        });
        let saved = self.accessed.replace(0);
        let res = self.exec(&sub.plan);
        let mine = self.accessed.get();
        self.accessed.set(saved | mine);
        self.frames.borrow_mut().pop();
        let rel = Rc::new(res?);
        if f < 64 && mine & (1u64 << f) == 0 {
            let _ = sub.cache.set(rel.clone());
        }
        Ok(rel)
    }

    // ---- operators ----

    fn exec(&self, plan: &LogicalPlan) -> Result<Relation> {
        let rel = match plan {
            LogicalPlan::TableScan { name, alias } => self.scan(name, alias.as_ref())?,
            LogicalPlan::Values => Relation {
                cols: Rc::new(Vec::new()),
                rows: vec![Vec::new()],
            },
            LogicalPlan::Alias { alias, input } => {
                let r = self.exec(input)?;
                Relation {
                    cols: requalify(&r.cols, &alias.normalized()),
                    rows: r.rows,
                }
            }
            LogicalPlan::Project { .. } | LogicalPlan::Aggregate { .. } => {
                let (cols, rows) = self.exec_select(plan, &[])?;
                Relation { cols, rows }
            }
            LogicalPlan::Passthrough { input } => self.exec(input)?,
            LogicalPlan::Filter { predicate, input } => {
                let r = self.exec(input)?;
                let p = self.bind(predicate, &r.cols, INPUT)?;
                let mut rows = Vec::new();
                for row in r.rows {
                    if truth(&self.eval(&p, &row, &r.cols)?)? == Some(true) {
                        rows.push(row);
                    }
                }
                Relation { cols: r.cols, rows }
            }
            LogicalPlan::Join {
                kind,
                condition,
                left,
                right,
            } => self.exec_join(*kind, condition.as_ref(), left, right)?,
            LogicalPlan::Sort { keys, input } => self.exec_sort(keys, input)?,
            LogicalPlan::Limit { n, input } => match self.try_stream(*n, input)? {
                Some(r) => r,
                None => {
                    let mut r = self.exec(input)?;
                    r.rows.truncate(usize::try_from(*n).unwrap_or(usize::MAX));
                    r
                }
            },
            LogicalPlan::Distinct { input } => {
                let mut r = self.exec(input)?;
                let mut seen = HashSet::new();
                r.rows.retain(|row| seen.insert(row_key(row)));
                r
            }
            LogicalPlan::UnionAll { inputs } => {
                let mut out: Option<Relation> = None;
                for p in inputs {
                    let r = self.exec(p)?;
                    match &mut out {
                        None => {
                            out = Some(Relation {
                                cols: requalify_none(&r.cols),
                                rows: r.rows,
                            })
                        }
                        Some(acc) => {
                            if acc.cols.len() != r.cols.len() {
                                return Err(EngineError::Semantic(format!(
                                    "UNION ALL operands have {} and {} columns",
                                    acc.cols.len(),
                                    r.cols.len()
                                )));
                            }
                            acc.rows.extend(r.rows);
                        }
                    }
                }
                out.ok_or_else(|| EngineError::Semantic("empty UNION ALL".into()))?
            }
            LogicalPlan::WithBinding { bindings, body } => {
                let scope = Rc::new(CteScope {
                    slots: bindings
                        .iter()
                        .map(|(a, p)| CteSlot {
                            name: a.normalized(),
                            plan: p.clone(),
                            cache: RefCell::new(None),
                        })
                        .collect(),
                    frame_depth: self.frames.borrow().len(),
                });
                self.scopes.borrow_mut().push(scope);
                let r = self.exec(body);
                self.scopes.borrow_mut().pop();
                r?
            }
            LogicalPlan::InsertInto { .. } | LogicalPlan::CreateTableAs { .. } | LogicalPlan::Delete { .. } => {
                return Err(EngineError::Unsupported("write statement inside a query".into()))
            }
        };
        self.note(rel.rows.len());
        Ok(rel)
    }

    /// Project or Aggregate; returns output columns and rows with the
    /// values of `sort_keys` appended.
    fn exec_select(&self, node: &LogicalPlan, sort_keys: &[OrderByItem]) -> Result<(Cols, Vec<Vec<Value>>)> {
        match node {
            LogicalPlan::Project { items, input, .. } => {
                let input = self.exec(input)?;
                let (mut aggs, mut wins) = (Vec::new(), Vec::new());
                for e in item_exprs(items).chain(sort_keys.iter().map(|k| &k.expr)) {
                    collect_calls(e, &mut aggs, &mut wins)?;
                }
                if let Some(a) = aggs.first() {
                    return Err(EngineError::Semantic(format!(
                        "aggregate {} in ORDER BY of a query without aggregation",
                        a.name
                    )));
                }
                self.finish_select(input.cols, input.rows, None, &wins, items, sort_keys)
            }
            LogicalPlan::Aggregate {
                group_by,
                items,
                having,
                input,
            } => {
                let input = match input.as_ref() {
                    LogicalPlan::Passthrough { input } => self.exec(input)?,
                    other => self.exec(other)?,
                };
                self.exec_aggregate(input, group_by, items, having.as_ref(), sort_keys)
            }
            _ => unreachable!("select-like nodes only"),
        }
    }

    fn exec_aggregate(
        &self,
        input: Relation,
        group_by: &[Expr],
        items: &[SelectItem],
        having: Option<&Expr>,
        sort_keys: &[OrderByItem],
    ) -> Result<(Cols, Vec<Vec<Value>>)> {
        let keys = group_by
            .iter()
            .map(|g| self.bind(g, &input.cols, INPUT))
            .collect::<Result<Vec<_>>>()?;
        let (mut aggs, mut wins) = (Vec::new(), Vec::new());
        for e in item_exprs(items)
            .chain(having)
            .chain(sort_keys.iter().map(|k| &k.expr))
        {
            collect_calls(e, &mut aggs, &mut wins)?;
        }
        struct Spec {
            name: String,
            star: bool,
            distinct: bool,
            args: Vec<BExpr>,
            order: Vec<BExpr>,
            dirs: Vec<(bool, Option<bool>)>,
        }
        let width = input.cols.len();
        let mut specs = Vec::with_capacity(aggs.len());
        for f in &aggs {
            let star = f.args == FunctionArgs::Star;
            check_arity(&f.name, star, f.arg_list().len())?;
            let args = if star && f.name == "result_digest" {
                (0..width).map(BExpr::Col).collect()
            } else {
                f.arg_list()
                    .iter()
                    .map(|a| self.bind(a, &input.cols, INPUT))
                    .collect::<Result<_>>()?
            };
            specs.push(Spec {
                name: f.name.clone(),
                star,
                distinct: f.distinct,
                args,
                order: f
                    .order_by
                    .iter()
                    .map(|o| self.bind(&o.expr, &input.cols, INPUT))
                    .collect::<Result<_>>()?,
                dirs: f.order_by.iter().map(|o| (o.desc, o.nulls_first)).collect(),
            });
        }
        let flags = self.acc_flags();
        let new_accs = || -> Vec<Accumulator> {
            specs
                .iter()
                .map(|s| Accumulator::new(&s.name, s.star, s.distinct, s.dirs.clone(), s.args.len(), flags))
                .collect()
        };
        let mut index: HashMap<Vec<u8>, usize> = HashMap::new();
        let mut groups: Vec<(Vec<Value>, Vec<Value>, Vec<Accumulator>)> = Vec::new();
        for row in &input.rows {
            let kv = keys
                .iter()
                .map(|k| self.eval(k, row, &input.cols))
                .collect::<Result<Vec<_>>>()?;
            let g = *index.entry(row_key(&kv)).or_insert_with(|| {
                groups.push((kv, row.clone(), new_accs()));
                groups.len() - 1
            });
            for (acc, s) in groups[g].2.iter_mut().zip(&specs) {
                let args = s
                    .args
                    .iter()
                    .map(|a| self.eval(a, row, &input.cols))
                    .collect::<Result<Vec<_>>>()?;
                let order = s
                    .order
                    .iter()
                    .map(|a| self.eval(a, row, &input.cols))
                    .collect::<Result<Vec<_>>>()?;
                acc.push(&args, order)?;
            }
        }
        if group_by.is_empty() && groups.is_empty() {
            groups.push((Vec::new(), vec![Value::Null; width], new_accs()));
        }
        self.note(groups.len());

        // Virtual row: group keys, aggregate values, then a representative input row.
        let mut vcols: Vec<ColMeta> = keys.iter().map(|k| ColMeta::internal(k.static_type(&input.cols))).collect();
        vcols.extend(aggs.iter().map(|f| {
            ColMeta::internal(match f.name.as_str() {
                "count" | "approx_distinct" => Some(LogicalType::Bigint),
                "result_digest" => Some(LogicalType::Varchar),
                "array_agg" => Some(LogicalType::Array),
                _ => None,
            })
        }));
        let rep_offset = vcols.len();
        vcols.extend(input.cols.iter().cloned());
        let vcols: Cols = Rc::new(vcols);
        let layout = AggLayout {
            keys: group_by.to_vec(),
            key_cols: keys
                .iter()
                .map(|k| match k {
                    BExpr::Col(i) => Some(rep_offset + i),
                    _ => None,
                })
                .collect(),
            aggs,
        };
        let mut vrows = Vec::with_capacity(groups.len());
        for (kv, rep, accs) in groups {
            let mut r = kv;
            for a in &accs {
                r.push(a.value()?);
            }
            r.extend(rep);
            vrows.push(r);
        }
        if let Some(h) = having {
            let mode = Mode {
                agg: Some(&layout),
                windows: None,
            };
            let p = self.bind(h, &vcols, mode)?;
            let mut kept = Vec::new();
            for r in vrows {
                if truth(&self.eval(&p, &r, &vcols)?)? == Some(true) {
                    kept.push(r);
                }
            }
            vrows = kept;
        }
        self.finish_select(vcols, vrows, Some(&layout), &wins, items, sort_keys)
    }

    /// Computes window columns, then the select list and sort keys.
    fn finish_select(
        &self,
        base_cols: Cols,
        base_rows: Vec<Vec<Value>>,
        layout: Option<&AggLayout>,
        wins: &[FunctionCall],
        items: &[SelectItem],
        sort_keys: &[OrderByItem],
    ) -> Result<(Cols, Vec<Vec<Value>>)> {
        let base_width = base_cols.len();
        let pre = Mode {
            agg: layout,
            windows: None,
        };
        let win_values = self.compute_windows(wins, &base_rows, &base_cols, pre)?;
        let (cols, rows) = if wins.is_empty() {
            (base_cols, base_rows)
        } else {
            let mut c = (*base_cols).clone();
            c.extend(wins.iter().map(|_| ColMeta::internal(None)));
            let rows = base_rows
                .into_iter()
                .enumerate()
                .map(|(i, mut r)| {
                    r.extend(win_values.iter().map(|w| w[i].clone()));
                    r
                })
                .collect();
            (Rc::new(c), rows)
        };
        let post = Mode {
            agg: layout,
            windows: Some((wins, base_width)),
        };
        let (exprs, metas) = self.bind_items(items, &cols, post)?;
        let keys = sort_keys
            .iter()
            .map(|k| self.bind_sort_key(&k.expr, &metas, &cols, post))
            .collect::<Result<Vec<_>>>()?;
        let mut out = Vec::with_capacity(rows.len());
        for row in &rows {
            let mut o = exprs
                .iter()
                .map(|e| self.eval(e, row, &cols))
                .collect::<Result<Vec<_>>>()?;
            for k in &keys {
                let v = match k {
                    KeyRef::Output(i) => o[*i].clone(),
                    KeyRef::Expr(e) => self.eval(e, row, &cols)?,
                };
                o.push(v);
            }
            out.push(o);
        }
        Ok((Rc::new(metas), out))
    }

    fn bind_sort_key(&self, e: &Expr, outputs: &[ColMeta], cols: &[ColMeta], mode: Mode) -> Result<KeyRef> {
        if let Expr::Literal(Value::Int(n)) = e {
            return ordinal(*n, outputs.len()).map(KeyRef::Output);
        }
        if let Expr::Column(parts) = e {
            if parts.len() == 1 {
                let name = parts[0].normalized();
                if let Some(i) = outputs.iter().position(|m| m.name == name) {
                    return Ok(KeyRef::Output(i));
                }
            }
        }
        Ok(KeyRef::Expr(self.bind(e, cols, mode)?))
    }

    fn compute_windows(
        &self,
        wins: &[FunctionCall],
        rows: &[Vec<Value>],
        cols: &Cols,
        mode: Mode,
    ) -> Result<Vec<Vec<Value>>> {
        let mut out = Vec::with_capacity(wins.len());
        for f in wins {
            let spec = f.over.as_ref().expect("window call");
            let star = f.args == FunctionArgs::Star;
            let ranking = matches!(f.name.as_str(), "row_number" | "rank" | "dense_rank");
            if ranking {
                if star || !f.arg_list().is_empty() {
                    return Err(EngineError::Semantic(format!("{} takes no arguments", f.name)));
                }
            } else {
                check_arity(&f.name, star, f.arg_list().len())?;
            }
            let parts = spec
                .partition_by
                .iter()
                .map(|e| self.bind(e, cols, mode))
                .collect::<Result<Vec<_>>>()?;
            let order = spec
                .order_by
                .iter()
                .map(|o| self.bind(&o.expr, cols, mode))
                .collect::<Result<Vec<_>>>()?;
            let dirs: Vec<(bool, Option<bool>)> = spec.order_by.iter().map(|o| (o.desc, o.nulls_first)).collect();
            let args = f
                .arg_list()
                .iter()
                .map(|e| self.bind(e, cols, mode))
                .collect::<Result<Vec<_>>>()?;
            let agg_order = f
                .order_by
                .iter()
                .map(|o| self.bind(&o.expr, cols, mode))
                .collect::<Result<Vec<_>>>()?;
            let agg_dirs: Vec<(bool, Option<bool>)> = f.order_by.iter().map(|o| (o.desc, o.nulls_first)).collect();

            let mut index: HashMap<Vec<u8>, usize> = HashMap::new();
            let mut partitions: Vec<Vec<usize>> = Vec::new();
            let mut okeys = Vec::with_capacity(rows.len());
            for (i, row) in rows.iter().enumerate() {
                let pk = parts
                    .iter()
                    .map(|p| self.eval(p, row, cols))
                    .collect::<Result<Vec<_>>>()?;
                let p = *index.entry(row_key(&pk)).or_insert_with(|| {
                    partitions.push(Vec::new());
                    partitions.len() - 1
                });
                partitions[p].push(i);
                okeys.push(order.iter().map(|o| self.eval(o, row, cols)).collect::<Result<Vec<_>>>()?);
            }
            let mut col = vec![Value::Null; rows.len()];
            for mut idx in partitions {
                idx.sort_by(|a, b| compare_keys(&okeys[*a], &okeys[*b], &dirs));
                let peer = |a: usize, b: usize| compare_keys(&okeys[a], &okeys[b], &dirs).is_eq();
                match f.name.as_str() {
                    "row_number" => {
                        for (k, &i) in idx.iter().enumerate() {
                            col[i] = Value::Int(k as i64 + 1);
                        }
                    }
                    "rank" | "dense_rank" => {
                        let (mut rank, mut dense) = (0i64, 0i64);
                        for (k, &i) in idx.iter().enumerate() {
                            if k == 0 || !peer(idx[k - 1], i) {
                                rank = k as i64 + 1;
                                dense += 1;
                            }
                            col[i] = Value::Int(if f.name == "rank" { rank } else { dense });
                        }
                    }
                    _ => {
                        let mut acc = Accumulator::new(
                            &f.name,
                            star,
                            f.distinct,
                            agg_dirs.clone(),
                            args.len(),
                            self.acc_flags(),
                        );
                        let mut start = 0;
                        while start < idx.len() {
                            // Without ORDER BY the frame is the whole partition;
                            // with it, all rows up to the current peer group.
                            let mut end = start + 1;
                            while end < idx.len() && (order.is_empty() || peer(idx[start], idx[end])) {
                                end += 1;
                            }
                            for &i in &idx[start..end] {
                                let a = args
                                    .iter()
                                    .map(|e| self.eval(e, &rows[i], cols))
                                    .collect::<Result<Vec<_>>>()?;
                                let ok = agg_order
                                    .iter()
                                    .map(|e| self.eval(e, &rows[i], cols))
                                    .collect::<Result<Vec<_>>>()?;
                                acc.push(&a, ok)?;
                            }
                            let v = acc.value()?;
                            for &i in &idx[start..end] {
                                col[i] = v.clone();
                            }
                            start = end;
                        }
                    }
                }
            }
            self.note(rows.len());
            out.push(col);
        }
        Ok(out)
    }

    fn exec_sort(&self, keys: &[OrderByItem], input: &LogicalPlan) -> Result<Relation> {
        let dirs: Vec<(bool, Option<bool>)> = keys.iter().map(|k| (k.desc, k.nulls_first)).collect();
        let (cols, mut rows) = match input {
            LogicalPlan::Project { .. } | LogicalPlan::Aggregate { .. } => self.exec_select(input, keys)?,
            _ => {
                let r = self.exec(input)?;
                let bound = keys
                    .iter()
                    .map(|k| match &k.expr {
                        Expr::Literal(Value::Int(n)) => ordinal(*n, r.cols.len()).map(BExpr::Col),
                        e => self.bind(e, &r.cols, INPUT),
                    })
                    .collect::<Result<Vec<_>>>()?;
                let mut rows = Vec::with_capacity(r.rows.len());
                for mut row in r.rows {
                    let kv = bound
                        .iter()
                        .map(|b| self.eval(b, &row, &r.cols))
                        .collect::<Result<Vec<_>>>()?;
                    row.extend(kv);
                    rows.push(row);
                }
                (r.cols, rows)
            }
        };
        let w = cols.len();
        rows.sort_by(|a, b| compare_keys(&a[w..], &b[w..], &dirs));
        for r in &mut rows {
            r.truncate(w);
        }
        Ok(Relation { cols, rows })
    }

    /// LIMIT over Filter/Project/Alias chains on a base table stops reading
    /// once enough rows are produced.
    fn try_stream(&self, n: u64, input: &LogicalPlan) -> Result<Option<Relation>> {
        let mut chain = Vec::new();
        let mut p = input;
        let (name, alias) = loop {
            match p {
                LogicalPlan::Filter { input, .. } | LogicalPlan::Alias { input, .. } => {
                    chain.push(p);
                    p = input;
                }
                LogicalPlan::Project { items, input, .. }
                    if !item_exprs(items).any(|e| e.contains_window() || e.contains_aggregate()) =>
                {
                    chain.push(p);
                    p = input;
                }
                LogicalPlan::TableScan { name, alias } => break (name, alias),
                _ => return Ok(None),
            }
        };
        if self.is_cte(name) {
            return Ok(None);
        }
        let t = self.table(name)?;
        let qualifier = alias.as_ref().map_or_else(|| name.last().normalized(), Ident::normalized);
        let mut cols = Self::table_cols(&t, &qualifier);
        let scan_cols = cols.clone();
        let mut stages = Vec::new();
        for node in chain.iter().rev() {
            match node {
                LogicalPlan::Filter { predicate, .. } => {
                    stages.push(Stage::Filter(self.bind(predicate, &cols, INPUT)?, cols.clone()));
                }
                LogicalPlan::Project { items, .. } => {
                    let (exprs, metas) = self.bind_items(items, &cols, INPUT)?;
                    stages.push(Stage::Project(exprs, cols.clone()));
                    cols = Rc::new(metas);
                }
                LogicalPlan::Alias { alias, .. } => cols = requalify(&cols, &alias.normalized()),
                _ => unreachable!("chain holds filters, projections and aliases"),
            }
        }
        let _ = scan_cols;
        let mut out = Vec::new();
        let mut read = 0u64;
        if n > 0 {
            'rows: for i in self.scan_order(t.rows.len()) {
                read += 1;
                let mut row = self.read_row(&t, i);
                for s in &stages {
                    match s {
                        Stage::Filter(p, c) => {
                            if truth(&self.eval(p, &row, c)?)? != Some(true) {
                                continue 'rows;
                            }
                        }
                        Stage::Project(exprs, c) => {
                            row = exprs.iter().map(|e| self.eval(e, &row, c)).collect::<Result<_>>()?;
                        }
                    }
                }
                out.push(row);
                if out.len() as u64 >= n {
                    break;
                }
            }
        }
        self.record_scan(&t, read);
        self.note(read as usize);
        Ok(Some(Relation { cols, rows: out }))
    }

    fn exec_join(
        &self,
        kind: JoinKind,
        condition: Option<&Expr>,
        left: &LogicalPlan,
        right: &LogicalPlan,
    ) -> Result<Relation> {
        let l = self.exec(left)?;
        let r = self.exec(right)?;
        let (nl, nr) = (l.cols.len(), r.cols.len());
        let cols: Cols = Rc::new(l.cols.iter().chain(r.cols.iter()).cloned().collect());

        let mut equi: Vec<(BExpr, BExpr)> = Vec::new();
        let mut residual: Vec<BExpr> = Vec::new();
        if let Some(c) = condition {
            for conj in conjuncts(c) {
                if let Expr::Binary {
                    op: BinaryOp::Eq,
                    left: a,
                    right: b,
                } = conj
                {
                    if a.subqueries().is_empty() && b.subqueries().is_empty() {
                        let ba = self.bind(a, &cols, INPUT)?;
                        let bb = self.bind(b, &cols, INPUT)?;
                        match (side(&ba, nl), side(&bb, nl)) {
                            (Side::Left, Side::Right) => {
                                let mut bb = bb;
                                bb.shift_cols(nl);
                                equi.push((ba, bb));
                                continue;
                            }
                            (Side::Right, Side::Left) => {
                                let mut ba = ba;
                                ba.shift_cols(nl);
                                equi.push((bb, ba));
                                continue;
                            }
                            _ => {}
                        }
                    }
                }
                residual.push(self.bind(conj, &cols, INPUT)?);
            }
        }

        // Hash join when every key pair is class-compatible; otherwise the
        // nested loop evaluates the condition and reports type errors.
        let mut hashed: Option<HashedSide> = None;
        if !equi.is_empty() {
            let key_of = |e: &[&BExpr], row: &[Value], c: &Cols, classes: &mut Vec<HashSet<eval::Class>>| -> Result<Option<Vec<u8>>> {
                let mut k = Vec::new();
                let mut usable = true;
                for (p, x) in e.iter().enumerate() {
                    let v = self.eval(x, row, c)?;
                    if let Some(cl) = class(&v) {
                        classes[p].insert(cl);
                    }
                    if v.is_null() || matches!(v, Value::Float(f) if f.is_nan()) {
                        usable = false;
                    }
                    k.extend(equality_key(&v));
                }
                Ok(usable.then_some(k))
            };
            let le: Vec<&BExpr> = equi.iter().map(|(a, _)| a).collect();
            let re: Vec<&BExpr> = equi.iter().map(|(_, b)| b).collect();
            let mut classes = vec![HashSet::new(); equi.len()];
            let lkeys = l
                .rows
                .iter()
                .map(|row| key_of(&le, row, &l.cols, &mut classes))
                .collect::<Result<Vec<_>>>()?;
            let mut rclasses = vec![HashSet::new(); equi.len()];
            let mut table: HashMap<Vec<u8>, Vec<usize>> = HashMap::new();
            for (i, row) in r.rows.iter().enumerate() {
                if let Some(k) = key_of(&re, row, &r.cols, &mut rclasses)? {
                    table.entry(k).or_default().push(i);
                }
            }
            let compatible = classes
                .iter()
                .zip(&rclasses)
                .all(|(a, b)| a.union(b).count() <= 1);
            if compatible {
                hashed = Some((lkeys, table));
                self.note(r.rows.len());
            }
        }
        let full = match (&hashed, condition) {
            (None, Some(c)) => Some(self.bind(c, &cols, INPUT)?),
            _ => None,
        };

        let all: Vec<usize> = (0..r.rows.len()).collect();
        let mut out = Vec::new();
        let mut right_matched = vec![false; r.rows.len()];
        let mut pairs = 0u64;
        for (li, lrow) in l.rows.iter().enumerate() {
            let candidates: &[usize] = match &hashed {
                Some((lkeys, table)) => lkeys[li]
                    .as_ref()
                    .and_then(|k| table.get(k))
                    .map_or(&[], Vec::as_slice),
                None => &all,
            };
            let mut matched = false;
            for &ri in candidates {
                pairs += 1;
                let mut row = lrow.clone();
                row.extend(r.rows[ri].iter().cloned());
                let ok = if hashed.is_some() {
                    let mut ok = true;
                    for p in &residual {
                        if truth(&self.eval(p, &row, &cols)?)? != Some(true) {
                            ok = false;
                            break;
                        }
                    }
                    ok
                } else {
                    match &full {
                        Some(c) => truth(&self.eval(c, &row, &cols)?)? == Some(true),
                        None => true,
                    }
                };
                if ok {
                    matched = true;
                    right_matched[ri] = true;
                    out.push(row);
                }
            }
            if !matched && matches!(kind, JoinKind::Left | JoinKind::Full) {
                let mut row = lrow.clone();
                row.extend(std::iter::repeat_n(Value::Null, nr));
                out.push(row);
            }
        }
        if matches!(kind, JoinKind::Right | JoinKind::Full) {
            for (ri, m) in right_matched.iter().enumerate() {
                if !m {
                    let mut row = vec![Value::Null; nl];
                    row.extend(r.rows[ri].iter().cloned());
                    out.push(row);
                }
            }
        }
        self.note(pairs as usize);
        Ok(Relation { cols, rows: out })
    }

    // ---- writes ----

    fn insert(
        &self,
        target: &ObjectName,
        columns: &[Ident],
        input: &LogicalPlan,
    ) -> Result<(Vec<String>, Vec<Vec<Value>>, WriteEffect)> {
        let table = self.table(target)?;
        let positions: Vec<usize> = if columns.is_empty() {
            (0..table.columns.len()).collect()
        } else {
            let mut seen = HashSet::new();
            columns
                .iter()
                .map(|c| {
                    let n = c.value.to_lowercase();
                    if !seen.insert(n.clone()) {
                        return Err(EngineError::Semantic(format!("column {} listed twice", c.value)));
                    }
                    table
                        .columns
                        .iter()
                        .position(|(name, _)| name.to_lowercase() == n)
                        .ok_or_else(|| EngineError::UnknownColumn(format!("{}.{}", table.name, c.value)))
                })
                .collect::<Result<_>>()?
        };
        let rel = self.exec(input)?;
        if rel.cols.len() != positions.len() {
            return Err(EngineError::Semantic(format!(
                "INSERT into {} supplies {} columns, expected {}",
                table.name,
                rel.cols.len(),
                positions.len()
            )));
        }
        let mut new = (*table).clone();
        let n = rel.rows.len();
        for row in rel.rows {
            let mut r = vec![Value::Null; table.columns.len()];
            for (p, v) in positions.iter().zip(row) {
                r[*p] = v;
            }
            new.rows.push(r);
        }
        Ok((vec!["rows".into()], vec![vec![Value::Int(n as i64)]], WriteEffect::Replace(new)))
    }

    fn create_table_as(
        &self,
        target: &ObjectName,
        if_not_exists: bool,
        input: &LogicalPlan,
    ) -> Result<(Vec<String>, Vec<Vec<Value>>, WriteEffect)> {
        if self.tables.contains_key(&catalog_key(target)) {
            if if_not_exists {
                return Ok((vec!["rows".into()], vec![vec![Value::Int(0)]], WriteEffect::Nothing));
            }
            return Err(EngineError::TableExists(target.display_name()));
        }
        let rel = self.exec(input)?;
        let mut seen = HashSet::new();
        let mut columns = Vec::with_capacity(rel.cols.len());
        for (i, c) in rel.cols.iter().enumerate() {
            let name = if c.display.is_empty() {
                format!("_col{i}")
            } else {
                c.display.clone()
            };
            if !seen.insert(name.to_lowercase()) {
                return Err(EngineError::Semantic(format!("duplicate column {name} in CREATE TABLE AS")));
            }
            let ty = c
                .ty
                .or_else(|| rel.rows.iter().find_map(|r| value_type(&r[i])))
                .unwrap_or(LogicalType::Varchar);
            columns.push((name, ty));
        }
        let n = rel.rows.len();
        let table = Table::new(target.display_name(), columns, rel.rows)
            .with_partition_size(self.engine.config().partition_size);
        Ok((vec!["rows".into()], vec![vec![Value::Int(n as i64)]], WriteEffect::Replace(table)))
    }

    fn delete(
        &self,
        target: &ObjectName,
        predicate: Option<&Expr>,
    ) -> Result<(Vec<String>, Vec<Vec<Value>>, WriteEffect)> {
        let table = self.table(target)?;
        let cols = Self::table_cols(&table, &target.last().normalized());
        let pred = predicate.map(|p| self.bind(p, &cols, INPUT)).transpose()?;
        self.record_scan(&table, table.rows.len() as u64);
        self.note(table.rows.len());
        let mut kept = Vec::with_capacity(table.rows.len());
        let mut deleted = 0i64;
        for i in 0..table.rows.len() {
            let hit = match &pred {
                None => true,
                Some(p) => truth(&self.eval(p, &self.read_row(&table, i), &cols)?)? == Some(true),
            };
            if hit {
                deleted += 1;
            } else {
                kept.push(table.rows[i].clone());
            }
        }
        let mut new = (*table).clone();
        new.rows = kept;
        Ok((vec!["rows".into()], vec![vec![Value::Int(deleted)]], WriteEffect::Replace(new)))
    }
}

fn item_exprs(items: &[SelectItem]) -> impl Iterator<Item = &Expr> {
    items.iter().filter_map(|i| match i {
        SelectItem::Expr { expr, .. } => Some(expr),
        _ => None,
    })
}

fn ordinal(n: i64, width: usize) -> Result<usize> {
    usize::try_from(n)
        .ok()
        .filter(|&i| i >= 1 && i <= width)
        .map(|i| i - 1)
        .ok_or_else(|| EngineError::Semantic(format!("ORDER BY position {n} is out of range")))
}

fn requalify(cols: &[ColMeta], qualifier: &str) -> Cols {
    Rc::new(
        cols.iter()
            .map(|c| ColMeta {
                qualifier: Some(qualifier.to_string()),
                ..c.clone()
            })
            .collect(),
    )
}

fn requalify_none(cols: &[ColMeta]) -> Cols {
    Rc::new(
        cols.iter()
            .map(|c| ColMeta {
                qualifier: None,
                ..c.clone()
            })
            .collect(),
    )
}

fn build_in_set(rel: &Relation) -> InSet {
    let mut keys = HashSet::new();
    let mut has_null = false;
    let mut classes = Vec::new();
    for r in &rel.rows {
        let v = &r[0];
        match class(v) {
            None => has_null = true,
            Some(c) => {
                if !classes.contains(&c) {
                    classes.push(c);
                }
                if !matches!(v, Value::Float(f) if f.is_nan()) {
                    keys.insert(equality_key(v));
                }
            }
        }
    }
    InSet {
        keys,
        has_null,
        classes,
        empty: rel.rows.is_empty(),
    }
}

fn probe_in_set(set: &InSet, v: &Value) -> Result<Option<bool>> {
    if set.empty {
        return Ok(Some(false));
    }
    let Some(c) = class(v) else { return Ok(None) };
    if let Some(other) = set.classes.iter().find(|x| **x != c) {
        return Err(EngineError::TypeError(format!(
            "IN compares {} with {other:?} values",
            v.type_name()
        )));
    }
    if !matches!(v, Value::Float(f) if f.is_nan()) && set.keys.contains(&equality_key(v)) {
        return Ok(Some(true));
    }
    Ok(if set.has_null { None } else { Some(false) })
}
