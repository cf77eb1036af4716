//! Privacy-preserving statement rewrites for simulation runs.
//!
//! Reads become `SELECT result_digest(*) FROM (<original>) AS sim_checksum`,
//! so only a digest leaves the engine. Writes are redirected into
//! `sim_tmp_<session>_<target>` tables. Non-deterministic constructs are
//! labelled so that digest mismatches on them can be demoted.

use serde::{Deserialize, Serialize};

use crate::sql::ast::*;
use crate::values::{LogicalType, Value};

pub const TEMP_PREFIX: &str = "sim_tmp_";
pub const CHECKSUM_ALIAS: &str = "sim_checksum";
pub const DIGEST_FUNCTION: &str = "result_digest";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RewriteError {
    #[error("NOT_A_READ: checksum wrapping needs a SELECT query")]
    NotARead,
    #[error("NOT_A_WRITE: write redirection needs INSERT, CREATE TABLE AS or DELETE")]
    NotAWrite,
    #[error("ALREADY_REWRITTEN: {0}")]
    AlreadyRewritten(String),
    #[error("INVALID_SESSION: {0}")]
    InvalidSession(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RewriteKind {
    ReadChecksum,
    WriteRedirected,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RewriteOutcome {
    pub rewritten: Statement,
    /// Statements to run before `rewritten`, in order.
    pub prelude: Vec<Statement>,
    pub kind: RewriteKind,
    pub temp_objects: Vec<String>,
    pub labels: Vec<NondetLabel>,
}

impl RewriteOutcome {
    /// Every statement to execute, prelude first.
    pub fn statements(&self) -> Vec<&Statement> {
        self.prelude.iter().chain(std::iter::once(&self.rewritten)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum NondetCategory {
    Time,
    Random,
    OrderDependent,
    Approximate,
    FloatSensitive,
}

impl NondetCategory {
    pub fn name(self) -> &'static str {
        match self {
            NondetCategory::Time => "TIME",
            NondetCategory::Random => "RANDOM",
            NondetCategory::OrderDependent => "ORDER_DEPENDENT",
            NondetCategory::Approximate => "APPROXIMATE",
            NondetCategory::FloatSensitive => "FLOAT_SENSITIVE",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NondetLabel {
    pub category: NondetCategory,
    pub construct: String,
    /// Path to the construct, e.g. `body/items[1]`.
    pub location: String,
    /// Set when the label rests on an unknown type (no schema available).
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub speculative: bool,
}

/// Column types of base tables, used to find floating-point aggregates.
pub trait SchemaProvider {
    fn table_schema(&self, table: &str) -> Option<Vec<(String, LogicalType)>>;
}

impl<F> SchemaProvider for F
where
    F: Fn(&str) -> Option<Vec<(String, LogicalType)>>,
{
    fn table_schema(&self, table: &str) -> Option<Vec<(String, LogicalType)>> {
        self(table)
    }
}

/// True for statements produced by [`wrap_checksum`].
pub fn is_checksum_wrapper(stmt: &Statement) -> bool {
    unwrap_checksum(stmt).is_some()
}

/// The original query inside a checksum wrapper.
pub fn unwrap_checksum(stmt: &Statement) -> Option<&Query> {
    let Statement::Query(q) = stmt else { return None };
    if !q.with.is_empty() || !q.order_by.is_empty() || q.limit.is_some() {
        return None;
    }
    let SetExpr::Select(sel) = &q.body else { return None };
    let [SelectItem::Expr { expr: Expr::Function(f), alias: None }] = sel.items.as_slice() else {
        return None;
    };
    if f.name != DIGEST_FUNCTION || f.args != FunctionArgs::Star || sel.selection.is_some() || !sel.group_by.is_empty()
    {
        return None;
    }
    match &sel.from {
        Some(TableRef::Derived { query, alias }) if alias.normalized() == CHECKSUM_ALIAS => Some(query),
        _ => None,
    }
}

pub fn checksum_query(inner: Query) -> Query {
    Query::simple(Select {
        items: vec![SelectItem::Expr {
            expr: Expr::Function(FunctionCall {
                name: DIGEST_FUNCTION.to_string(),
                args: FunctionArgs::Star,
                distinct: false,
                order_by: vec![],
                over: None,
            }),
            alias: None,
        }],
        from: Some(TableRef::Derived {
            query: Box::new(inner),
            alias: Ident::new(CHECKSUM_ALIAS),
        }),
        ..Select::default()
    })
}

pub fn wrap_checksum(stmt: &Statement) -> Result<RewriteOutcome, RewriteError> {
    let Statement::Query(q) = stmt else {
        return Err(RewriteError::NotARead);
    };
    if is_checksum_wrapper(stmt) {
        return Err(RewriteError::AlreadyRewritten("query is already checksum-wrapped".into()));
    }
    Ok(RewriteOutcome {
        rewritten: Statement::Query(Box::new(checksum_query((**q).clone()))),
        prelude: vec![],
        kind: RewriteKind::ReadChecksum,
        temp_objects: vec![],
        labels: label_nondeterminism(stmt, None),
    })
}

pub fn temp_prefix(session: &str) -> String {
    format!("{TEMP_PREFIX}{session}_")
}

fn validate_session(session: &str) -> Result<(), RewriteError> {
    if session.is_empty() || !session.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
        return Err(RewriteError::InvalidSession(format!(
            "session '{session}' must be non-empty ASCII letters, digits or '_'"
        )));
    }
    Ok(())
}

/// `sim_tmp_<session>_<target>`, with dots in qualified names replaced by `_`.
pub fn temp_name(session: &str, target: &ObjectName) -> ObjectName {
    let flat = target.0.iter().map(|i| i.value.as_str()).collect::<Vec<_>>().join("_");
    let quoted = target.0.iter().any(|i| i.quoted);
    ObjectName(vec![Ident {
        value: format!("{}{flat}", temp_prefix(session)),
        quoted,
    }])
}

fn is_temp(name: &ObjectName) -> bool {
    name.last().value.to_ascii_lowercase().starts_with(TEMP_PREFIX)
}

pub fn redirect_writes(stmt: &Statement, session: &str) -> Result<RewriteOutcome, RewriteError> {
    validate_session(session)?;
    let target = stmt.write_target().ok_or(RewriteError::NotAWrite)?;
    if is_temp(target) {
        return Err(RewriteError::AlreadyRewritten(format!(
            "target {} is already a temporary table",
            target.display_name()
        )));
    }
    let temp = temp_name(session, target);
    let copy_of_target = |with_rows: bool| {
        let select = Select {
            items: vec![SelectItem::Wildcard],
            from: Some(TableRef::Table {
                name: target.clone(),
                alias: None,
            }),
            selection: (!with_rows).then(|| Expr::binary(BinaryOp::Eq, Expr::lit(1i64), Expr::lit(0i64))),
            ..Select::default()
        };
        Statement::CreateTableAs {
            table: temp.clone(),
            if_not_exists: false,
            source: Box::new(Query::simple(select)),
        }
    };
    let (prelude, rewritten) = match stmt {
        Statement::Insert { columns, source, .. } => (
            vec![copy_of_target(false)],
            Statement::Insert {
                table: temp.clone(),
                columns: columns.clone(),
                source: source.clone(),
            },
        ),
        Statement::CreateTableAs {
            if_not_exists, source, ..
        } => (
            vec![],
            Statement::CreateTableAs {
                table: temp.clone(),
                if_not_exists: *if_not_exists,
                source: source.clone(),
            },
        ),
        Statement::Delete { table, selection } => (
            vec![copy_of_target(true)],
            Statement::Delete {
                table: temp.clone(),
                selection: selection.as_ref().map(|e| requalify(e, table, &temp)),
            },
        ),
        Statement::Query(_) => unreachable!("reads have no write target"),
    };
    Ok(RewriteOutcome {
        rewritten,
        prelude,
        kind: RewriteKind::WriteRedirected,
        temp_objects: vec![temp.display_name()],
        labels: label_nondeterminism(stmt, None),
    })
}

/// Rewrites `from.col` references to `to.col`, outside subqueries.
fn requalify(e: &Expr, from: &ObjectName, to: &ObjectName) -> Expr {
    let mut e = e.clone();
    fn walk(e: &mut Expr, from: &ObjectName, to: &ObjectName) {
        if let Expr::Column(parts) = e {
            if parts.len() >= 2 {
                let qual = ObjectName(parts[..parts.len() - 1].to_vec());
                if qual.normalized() == from.normalized() || qual.normalized() == from.last().normalized() {
                    let col = parts.last().cloned().expect("non-empty");
                    *parts = vec![to.last().clone(), col];
                }
            }
            return;
        }
        for c in children_mut(e) {
            walk(c, from, to);
        }
    }
    walk(&mut e, from, to);
    e
}

fn children_mut(e: &mut Expr) -> Vec<&mut Expr> {
    match e {
        Expr::Column(_) | Expr::Literal(_) | Expr::Subquery(_) => vec![],
        Expr::Unary { expr, .. } | Expr::IsNull { expr, .. } | Expr::Cast { expr, .. } => vec![expr],
        Expr::InSubquery { expr, .. } => vec![expr],
        Expr::Binary { left, right, .. } => vec![left, right],
        Expr::InList { expr, list, .. } => {
            let mut v: Vec<&mut Expr> = vec![expr];
            v.extend(list.iter_mut());
            v
        }
        Expr::Between { expr, low, high, .. } => vec![expr, low, high],
        Expr::Like { expr, pattern, .. } => vec![expr, pattern],
        Expr::Case {
            operand,
            whens,
            else_result,
        } => {
            let mut v: Vec<&mut Expr> = Vec::new();
            if let Some(o) = operand {
                v.push(o);
            }
            for w in whens {
                v.push(&mut w.condition);
                v.push(&mut w.result);
            }
            if let Some(x) = else_result {
                v.push(x);
            }
            v
        }
        Expr::Function(f) => {
            let mut v: Vec<&mut Expr> = Vec::new();
            if let FunctionArgs::List(a) = &mut f.args {
                v.extend(a.iter_mut());
            }
            v.extend(f.order_by.iter_mut().map(|o| &mut o.expr));
            if let Some(w) = &mut f.over {
                v.extend(w.partition_by.iter_mut());
                v.extend(w.order_by.iter_mut().map(|o| &mut o.expr));
            }
            v
        }
    }
}

/// Display names of every table a statement writes.
pub fn write_targets(stmts: &[&Statement]) -> Vec<String> {
    stmts.iter().filter_map(|s| s.write_target()).map(ObjectName::display_name).collect()
}

pub const TIME_FUNCTIONS: &[&str] = &[
    "now",
    "current_timestamp",
    "current_date",
    "current_time",
    "localtime",
    "localtimestamp",
];
pub const RANDOM_FUNCTIONS: &[&str] = &["random", "rand", "uuid"];
pub const ORDER_DEPENDENT_FUNCTIONS: &[&str] = &["max_by", "min_by", "arbitrary", "any_value"];
pub const APPROXIMATE_FUNCTIONS: &[&str] = &["approx_distinct", "approx_percentile"];

pub fn label_nondeterminism(stmt: &Statement, schema: Option<&dyn SchemaProvider>) -> Vec<NondetLabel> {
    let mut l = Labeler { schema, out: vec![] };
    match stmt {
        Statement::Query(q) => l.query(q, "body", &[]),
        Statement::Insert { source, .. } | Statement::CreateTableAs { source, .. } => l.query(source, "source", &[]),
        Statement::Delete { table, selection } => {
            if let Some(e) = selection {
                let scope = vec![l.scope_entry(table, None, &[])];
                l.expr(e, "where", &scope, &[]);
            }
        }
    }
    l.out
}

struct ScopeEntry {
    qualifier: String,
    columns: Option<Vec<(String, LogicalType)>>,
}

struct Labeler<'a> {
    schema: Option<&'a dyn SchemaProvider>,
    out: Vec<NondetLabel>,
}

impl Labeler<'_> {
    fn push(&mut self, category: NondetCategory, construct: &str, location: &str, speculative: bool) {
        self.out.push(NondetLabel {
            category,
            construct: construct.to_string(),
            location: location.to_string(),
            speculative,
        });
    }

    fn scope_entry(&self, name: &ObjectName, alias: Option<&Ident>, ctes: &[String]) -> ScopeEntry {
        let normalized = name.normalized();
        let columns = if ctes.contains(&normalized) {
            None
        } else {
            self.schema.and_then(|s| s.table_schema(&normalized)).map(|cols| {
                cols.into_iter().map(|(c, t)| (c.to_lowercase(), t)).collect()
            })
        };
        ScopeEntry {
            qualifier: alias.map_or_else(|| name.last().normalized(), Ident::normalized),
            columns,
        }
    }

    fn query(&mut self, q: &Query, path: &str, outer_ctes: &[String]) {
        let mut ctes = outer_ctes.to_vec();
        for cte in &q.with {
            self.query(&cte.query, &format!("{path}/with[{}]", cte.alias.value), &ctes);
            ctes.push(cte.alias.normalized());
        }
        if q.limit.is_some() && q.order_by.is_empty() {
            self.push(NondetCategory::OrderDependent, "LIMIT", &format!("{path}/limit"), false);
        }
        self.set_expr(&q.body, path, &ctes);
        for (i, o) in q.order_by.iter().enumerate() {
            self.expr(&o.expr, &format!("{path}/order_by[{i}]"), &[], &ctes);
        }
    }

    fn set_expr(&mut self, s: &SetExpr, path: &str, ctes: &[String]) {
        match s {
            SetExpr::Select(sel) => self.select(sel, path, ctes),
            SetExpr::Query(q) => self.query(q, path, ctes),
            SetExpr::UnionAll(m) => {
                for (i, x) in m.iter().enumerate() {
                    self.set_expr(x, &format!("{path}/union[{i}]"), ctes);
                }
            }
        }
    }

    fn select(&mut self, sel: &Select, path: &str, ctes: &[String]) {
        let mut scope = Vec::new();
        if let Some(t) = &sel.from {
            self.table_ref(t, &format!("{path}/from"), ctes, &mut scope);
        }
        if let Some(w) = &sel.selection {
            self.expr(w, &format!("{path}/where"), &scope, ctes);
        }
        for (i, item) in sel.items.iter().enumerate() {
            if let SelectItem::Expr { expr, .. } = item {
                self.expr(expr, &format!("{path}/items[{i}]"), &scope, ctes);
            }
        }
        for (i, g) in sel.group_by.iter().enumerate() {
            self.expr(g, &format!("{path}/group_by[{i}]"), &scope, ctes);
        }
        if let Some(h) = &sel.having {
            self.expr(h, &format!("{path}/having"), &scope, ctes);
        }
    }

    fn table_ref(&mut self, t: &TableRef, path: &str, ctes: &[String], scope: &mut Vec<ScopeEntry>) {
        match t {
            TableRef::Table { name, alias } => scope.push(self.scope_entry(name, alias.as_ref(), ctes)),
            TableRef::Derived { query, alias } => {
                self.query(query, &format!("{path}/{}", alias.value), ctes);
                scope.push(ScopeEntry {
                    qualifier: alias.normalized(),
                    columns: None,
                });
            }
            TableRef::Join { left, right, on, .. } => {
                self.table_ref(left, path, ctes, scope);
                self.table_ref(right, path, ctes, scope);
                if let Some(c) = on {
                    self.expr(c, &format!("{path}/on"), scope, ctes);
                }
            }
        }
    }

    fn expr(&mut self, e: &Expr, path: &str, scope: &[ScopeEntry], ctes: &[String]) {
        match e {
            Expr::Subquery(q) => {
                self.query(q, &format!("{path}/subquery"), ctes);
                return;
            }
            Expr::InSubquery { expr, query, .. } => {
                self.expr(expr, path, scope, ctes);
                self.query(query, &format!("{path}/subquery"), ctes);
                return;
            }
            Expr::Function(f) => self.function(f, path, scope),
            _ => {}
        }
        for c in e.children() {
            self.expr(c, path, scope, ctes);
        }
    }

    fn function(&mut self, f: &FunctionCall, path: &str, scope: &[ScopeEntry]) {
        let name = f.name.as_str();
        if TIME_FUNCTIONS.contains(&name) {
            self.push(NondetCategory::Time, name, path, false);
        } else if RANDOM_FUNCTIONS.contains(&name) {
            self.push(NondetCategory::Random, name, path, false);
        } else if ORDER_DEPENDENT_FUNCTIONS.contains(&name) || (name == "array_agg" && f.order_by.is_empty()) {
            self.push(NondetCategory::OrderDependent, name, path, false);
        } else if APPROXIMATE_FUNCTIONS.contains(&name) {
            self.push(NondetCategory::Approximate, name, path, false);
        } else if matches!(name, "sum" | "avg") {
            if let [arg] = f.arg_list() {
                match static_type(arg, scope) {
                    Some(LogicalType::Double) => self.push(NondetCategory::FloatSensitive, name, path, false),
                    Some(_) => {}
                    None => self.push(NondetCategory::FloatSensitive, name, path, true),
                }
            }
        }
        if let Some(w) = &f.over {
            if w.order_by.is_empty() {
                self.push(NondetCategory::OrderDependent, &format!("{name} OVER"), path, false);
            }
        }
    }
}

/// Best-effort static type of an expression; None when unknown.
fn static_type(e: &Expr, scope: &[ScopeEntry]) -> Option<LogicalType> {
    match e {
        Expr::Literal(Value::Int(_)) => Some(LogicalType::Bigint),
        Expr::Literal(Value::Float(_)) => Some(LogicalType::Double),
        Expr::Literal(Value::Bool(_)) => Some(LogicalType::Boolean),
        Expr::Literal(Value::Str(_)) => Some(LogicalType::Varchar),
        Expr::Literal(_) => None,
        Expr::Cast { ty, .. } => Some(*ty),
        Expr::Column(parts) => {
            let col = parts.last()?.normalized();
            let candidates: Vec<&ScopeEntry> = if parts.len() >= 2 {
                let q = parts[parts.len() - 2].normalized();
                scope.iter().filter(|s| s.qualifier == q).collect()
            } else {
                scope.iter().collect()
            };
            let mut found = None;
            for s in candidates {
                let cols = s.columns.as_ref()?;
                if let Some((_, t)) = cols.iter().find(|(c, _)| *c == col) {
                    if found.is_some() {
                        return None;
                    }
                    found = Some(*t);
                }
            }
            found
        }
        Expr::Unary { op: UnaryOp::Neg, expr } => static_type(expr, scope),
        Expr::Binary { op, left, right } => match op {
            BinaryOp::Plus | BinaryOp::Minus | BinaryOp::Multiply | BinaryOp::Divide | BinaryOp::Modulo => {
                match (static_type(left, scope)?, static_type(right, scope)?) {
                    (LogicalType::Bigint, LogicalType::Bigint) => Some(LogicalType::Bigint),
                    (LogicalType::Double, LogicalType::Bigint | LogicalType::Double)
                    | (LogicalType::Bigint, LogicalType::Double) => Some(LogicalType::Double),
                    _ => None,
                }
            }
            BinaryOp::Concat => Some(LogicalType::Varchar),
            _ => Some(LogicalType::Boolean),
        },
        Expr::Case { whens, else_result, .. } => {
            let mut t = None;
            for r in whens.iter().map(|w| &w.result).chain(else_result.iter().map(|b| b.as_ref())) {
                if matches!(r, Expr::Literal(Value::Null)) {
                    continue;
                }
                let rt = static_type(r, scope)?;
                t = match t {
                    None => Some(rt),
                    Some(LogicalType::Double) if rt == LogicalType::Bigint => Some(LogicalType::Double),
                    Some(LogicalType::Bigint) if rt == LogicalType::Double => Some(LogicalType::Double),
                    Some(x) if x == rt => Some(x),
                    Some(_) => return None,
                };
            }
            t
        }
        _ => None,
    }
}
