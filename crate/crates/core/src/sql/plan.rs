//! Logical plans lowered from parsed statements.
//!
//! Expressions stay in AST form. Subqueries inside expressions are lowered
//! on demand by their consumer via [`lower_query`].

use std::collections::BTreeSet;
use std::fmt::Write;

use super::ast::*;
use super::render::render_expr;
use super::SqlError;
use crate::values::Value;

#[derive(Debug, Clone, PartialEq)]
pub enum LogicalPlan {
    TableScan {
        name: ObjectName,
        alias: Option<Ident>,
    },
    /// One row with no columns; the input of a SELECT without FROM.
    Values,
    /// Renames the output of a derived table. Transparent to signatures.
    Alias {
        alias: Ident,
        input: Box<LogicalPlan>,
    },
    Project {
        items: Vec<SelectItem>,
        star: bool,
        input: Box<LogicalPlan>,
    },
    /// Identity projection feeding an Aggregate.
    Passthrough {
        input: Box<LogicalPlan>,
    },
    Filter {
        predicate: Expr,
        input: Box<LogicalPlan>,
    },
    Aggregate {
        group_by: Vec<Expr>,
        items: Vec<SelectItem>,
        having: Option<Expr>,
        input: Box<LogicalPlan>,
    },
    Join {
        kind: JoinKind,
        condition: Option<Expr>,
        left: Box<LogicalPlan>,
        right: Box<LogicalPlan>,
    },
    Sort {
        keys: Vec<OrderByItem>,
        input: Box<LogicalPlan>,
    },
    Limit {
        n: u64,
        input: Box<LogicalPlan>,
    },
    Distinct {
        input: Box<LogicalPlan>,
    },
    UnionAll {
        inputs: Vec<LogicalPlan>,
    },
    WithBinding {
        bindings: Vec<(Ident, LogicalPlan)>,
        body: Box<LogicalPlan>,
    },
    InsertInto {
        target: ObjectName,
        columns: Vec<Ident>,
        input: Box<LogicalPlan>,
    },
    CreateTableAs {
        target: ObjectName,
        if_not_exists: bool,
        input: Box<LogicalPlan>,
    },
    /// `input` is always a scan of `target`.
    Delete {
        target: ObjectName,
        predicate: Option<Expr>,
        input: Box<LogicalPlan>,
    },
}

impl LogicalPlan {
    pub fn children(&self) -> Vec<&LogicalPlan> {
        match self {
            LogicalPlan::TableScan { .. } | LogicalPlan::Values => vec![],
            LogicalPlan::Alias { input, .. }
            | LogicalPlan::Project { input, .. }
            | LogicalPlan::Passthrough { input }
            | LogicalPlan::Filter { input, .. }
            | LogicalPlan::Aggregate { input, .. }
            | LogicalPlan::Sort { input, .. }
            | LogicalPlan::Limit { input, .. }
            | LogicalPlan::Distinct { input }
            | LogicalPlan::InsertInto { input, .. }
            | LogicalPlan::CreateTableAs { input, .. }
            | LogicalPlan::Delete { input, .. } => vec![input],
            LogicalPlan::Join { left, right, .. } => vec![left, right],
            LogicalPlan::UnionAll { inputs } => inputs.iter().collect(),
            LogicalPlan::WithBinding { bindings, body } => {
                let mut v: Vec<&LogicalPlan> = bindings.iter().map(|(_, p)| p).collect();
                v.push(body);
                v
            }
        }
    }

    /// Expressions held directly by this node (not by its children).
    pub fn expressions(&self) -> Vec<&Expr> {
        let mut out = Vec::new();
        match self {
            LogicalPlan::Project { items, .. } => push_items(&mut out, items),
            LogicalPlan::Filter { predicate, .. } => out.push(predicate),
            LogicalPlan::Aggregate {
                group_by,
                items,
                having,
                ..
            } => {
                out.extend(group_by.iter());
                push_items(&mut out, items);
                out.extend(having.iter());
            }
            LogicalPlan::Join { condition, .. } => out.extend(condition.iter()),
            LogicalPlan::Sort { keys, .. } => out.extend(keys.iter().map(|k| &k.expr)),
            LogicalPlan::Delete { predicate, .. } => out.extend(predicate.iter()),
            _ => {}
        }
        out
    }

    pub fn is_write(&self) -> bool {
        matches!(
            self,
            LogicalPlan::InsertInto { .. } | LogicalPlan::CreateTableAs { .. } | LogicalPlan::Delete { .. }
        )
    }

    /// Indented one-node-per-line rendering used by tests and the CLI.
    pub fn pretty(&self) -> String {
        let mut out = String::new();
        self.pretty_into(&mut out, 0);
        out
    }

    fn pretty_into(&self, out: &mut String, depth: usize) {
        let pad = "  ".repeat(depth);
        let line = match self {
            LogicalPlan::TableScan { name, alias } => match alias {
                Some(a) => format!("TableScan {} AS {}", name.display_name(), a.value),
                None => format!("TableScan {}", name.display_name()),
            },
            LogicalPlan::Values => "Values".to_string(),
            LogicalPlan::Alias { alias, .. } => format!("Alias {}", alias.value),
            LogicalPlan::Project { items, star, .. } => {
                format!("Project{} [{}]", if *star { "*" } else { "" }, items_text(items))
            }
            LogicalPlan::Passthrough { .. } => "Project (passthrough)".to_string(),
            LogicalPlan::Filter { predicate, .. } => format!("Filter {}", render_expr(predicate)),
            LogicalPlan::Aggregate {
                group_by,
                items,
                having,
                ..
            } => {
                let mut s = format!(
                    "Aggregate keys=[{}] [{}]",
                    group_by.iter().map(render_expr).collect::<Vec<_>>().join(", "),
                    items_text(items)
                );
                if let Some(h) = having {
                    let _ = write!(s, " having={}", render_expr(h));
                }
                s
            }
            LogicalPlan::Join { kind, condition, .. } => match condition {
                Some(c) => format!("Join {kind:?} ON {}", render_expr(c)),
                None => format!("Join {kind:?}"),
            },
            LogicalPlan::Sort { keys, .. } => format!(
                "Sort [{}]",
                keys.iter()
                    .map(|k| format!("{}{}", render_expr(&k.expr), if k.desc { " DESC" } else { "" }))
                    .collect::<Vec<_>>()
                    .join(", ")
            ),
            LogicalPlan::Limit { n, .. } => format!("Limit {n}"),
            LogicalPlan::Distinct { .. } => "Distinct".to_string(),
            LogicalPlan::UnionAll { .. } => "UnionAll".to_string(),
            LogicalPlan::WithBinding { bindings, .. } => format!(
                "WithBinding [{}]",
                bindings.iter().map(|(a, _)| a.value.as_str()).collect::<Vec<_>>().join(", ")
            ),
            LogicalPlan::InsertInto { target, .. } => format!("InsertInto {}", target.display_name()),
            LogicalPlan::CreateTableAs { target, .. } => format!("CreateTableAs {}", target.display_name()),
            LogicalPlan::Delete { target, predicate, .. } => match predicate {
                Some(p) => format!("Delete {} WHERE {}", target.display_name(), render_expr(p)),
                None => format!("Delete {}", target.display_name()),
            },
        };
        out.push_str(&pad);
        out.push_str(&line);
        out.push('\n');
        for c in self.children() {
            c.pretty_into(out, depth + 1);
        }
    }
}

fn push_items<'a>(out: &mut Vec<&'a Expr>, items: &'a [SelectItem]) {
    for i in items {
        if let SelectItem::Expr { expr, .. } = i {
            out.push(expr);
        }
    }
}

fn items_text(items: &[SelectItem]) -> String {
    items
        .iter()
        .map(|i| match i {
            SelectItem::Wildcard => "*".to_string(),
            SelectItem::QualifiedWildcard(n) => format!("{}.*", n.display_name()),
            SelectItem::Expr { expr, alias } => match alias {
                Some(a) => format!("{} AS {}", render_expr(expr), a.value),
                None => render_expr(expr),
            },
        })
        .collect::<Vec<_>>()
        .join(", ")
}

pub fn lower(stmt: &Statement) -> Result<LogicalPlan, SqlError> {
    match stmt {
        Statement::Query(q) => lower_query(q),
        Statement::Insert {
            table,
            columns,
            source,
        } => Ok(LogicalPlan::InsertInto {
            target: table.clone(),
            columns: columns.clone(),
            input: Box::new(lower_query(source)?),
        }),
        Statement::CreateTableAs {
            table,
            if_not_exists,
            source,
        } => Ok(LogicalPlan::CreateTableAs {
            target: table.clone(),
            if_not_exists: *if_not_exists,
            input: Box::new(lower_query(source)?),
        }),
        Statement::Delete { table, selection } => {
            if let Some(p) = selection {
                check_expr(p)?;
            }
            Ok(LogicalPlan::Delete {
                target: table.clone(),
                predicate: selection.clone(),
                input: Box::new(LogicalPlan::TableScan {
                    name: table.clone(),
                    alias: None,
                }),
            })
        }
    }
}

pub fn lower_query(q: &Query) -> Result<LogicalPlan, SqlError> {
    check_with(q, &BTreeSet::new())?;
    lower_query_inner(q)
}

fn lower_query_inner(q: &Query) -> Result<LogicalPlan, SqlError> {
    let mut plan = lower_set_expr(&q.body)?;
    for o in &q.order_by {
        check_expr(&o.expr)?;
    }
    if !q.order_by.is_empty() {
        plan = LogicalPlan::Sort {
            keys: q.order_by.clone(),
            input: Box::new(plan),
        };
    }
    if let Some(n) = q.limit {
        plan = LogicalPlan::Limit {
            n,
            input: Box::new(plan),
        };
    }
    if !q.with.is_empty() {
        let mut bindings = Vec::with_capacity(q.with.len());
        for cte in &q.with {
            bindings.push((cte.alias.clone(), lower_query_inner(&cte.query)?));
        }
        plan = LogicalPlan::WithBinding {
            bindings,
            body: Box::new(plan),
        };
    }
    Ok(plan)
}

fn lower_set_expr(s: &SetExpr) -> Result<LogicalPlan, SqlError> {
    match s {
        SetExpr::Select(sel) => lower_select(sel),
        SetExpr::Query(q) => lower_query_inner(q),
        SetExpr::UnionAll(members) => Ok(LogicalPlan::UnionAll {
            inputs: members.iter().map(lower_set_expr).collect::<Result<_, _>>()?,
        }),
    }
}

fn lower_select(s: &Select) -> Result<LogicalPlan, SqlError> {
    let mut plan = match &s.from {
        None => LogicalPlan::Values,
        Some(t) => lower_table_ref(t)?,
    };
    if let Some(w) = &s.selection {
        check_expr(w)?;
        if w.contains_aggregate() {
            return Err(SqlError::Semantic("aggregate function in WHERE".into()));
        }
        if w.contains_window() {
            return Err(SqlError::Semantic("window function in WHERE".into()));
        }
        plan = LogicalPlan::Filter {
            predicate: w.clone(),
            input: Box::new(plan),
        };
    }
    for item in &s.items {
        if let SelectItem::Expr { expr, .. } = item {
            check_expr(expr)?;
        }
    }
    let aggregating = !s.group_by.is_empty()
        || s.having.is_some()
        || s.items.iter().any(|i| matches!(i, SelectItem::Expr { expr, .. } if expr.contains_aggregate()));
    plan = if aggregating {
        if s.has_star() {
            return Err(SqlError::Semantic("'*' in the select list of an aggregate query".into()));
        }
        let mut group_by = Vec::with_capacity(s.group_by.len());
        for g in &s.group_by {
            check_expr(g)?;
            group_by.push(resolve_ordinal(g, &s.items)?);
        }
        if group_by.iter().any(|g| g.contains_aggregate() || g.contains_window()) {
            return Err(SqlError::Semantic("aggregate or window function in GROUP BY".into()));
        }
        if let Some(h) = &s.having {
            check_expr(h)?;
        }
        LogicalPlan::Aggregate {
            group_by,
            items: s.items.clone(),
            having: s.having.clone(),
            input: Box::new(LogicalPlan::Passthrough { input: Box::new(plan) }),
        }
    } else {
        LogicalPlan::Project {
            items: s.items.clone(),
            star: s.has_star(),
            input: Box::new(plan),
        }
    };
    if s.distinct {
        plan = LogicalPlan::Distinct { input: Box::new(plan) };
    }
    Ok(plan)
}

fn resolve_ordinal(g: &Expr, items: &[SelectItem]) -> Result<Expr, SqlError> {
    let Expr::Literal(Value::Int(n)) = g else {
        return Ok(g.clone());
    };
    let idx = usize::try_from(*n).ok().filter(|&i| i >= 1 && i <= items.len());
    match idx.map(|i| &items[i - 1]) {
        Some(SelectItem::Expr { expr, .. }) => Ok(expr.clone()),
        Some(_) => Err(SqlError::Semantic(format!("GROUP BY {n} refers to a wildcard"))),
        None => Err(SqlError::Semantic(format!("GROUP BY position {n} is out of range"))),
    }
}

fn lower_table_ref(t: &TableRef) -> Result<LogicalPlan, SqlError> {
    match t {
        TableRef::Table { name, alias } => Ok(LogicalPlan::TableScan {
            name: name.clone(),
            alias: alias.clone(),
        }),
        TableRef::Derived { query, alias } => Ok(LogicalPlan::Alias {
            alias: alias.clone(),
            input: Box::new(lower_query_inner(query)?),
        }),
        TableRef::Join {
            left,
            right,
            kind,
            on,
        } => {
            if let Some(c) = on {
                check_expr(c)?;
                if c.contains_aggregate() {
                    return Err(SqlError::Semantic("aggregate function in join condition".into()));
                }
            }
            Ok(LogicalPlan::Join {
                kind: *kind,
                condition: on.clone(),
                left: Box::new(lower_table_ref(left)?),
                right: Box::new(lower_table_ref(right)?),
            })
        }
    }
}

/// Validates the subqueries embedded in an expression so that errors
/// surface at lowering time, not midway through execution.
fn check_expr(e: &Expr) -> Result<(), SqlError> {
    for q in e.subqueries() {
        lower_query_inner(q)?;
    }
    if let Expr::Function(f) = e {
        if f.over.is_some() && !is_window_capable(&f.name) {
            return Err(SqlError::Semantic(format!("{} cannot be used as a window function", f.name)));
        }
    }
    for c in e.children() {
        check_expr(c)?;
    }
    Ok(())
}

pub const WINDOW_ONLY_FUNCTIONS: &[&str] = &["row_number", "rank", "dense_rank"];

fn is_window_capable(name: &str) -> bool {
    WINDOW_ONLY_FUNCTIONS.contains(&name) || is_aggregate_name(name)
}

/// WITH aliases must be unique within one WITH list, and a CTE may only
/// reference aliases defined before it. `visible` holds aliases bound by
/// enclosing queries.
fn check_with(q: &Query, visible: &BTreeSet<String>) -> Result<(), SqlError> {
    let mut seen = BTreeSet::new();
    let later: Vec<String> = q.with.iter().map(|c| c.alias.normalized()).collect();
    for (i, cte) in q.with.iter().enumerate() {
        let alias = cte.alias.normalized();
        if !seen.insert(alias.clone()) {
            return Err(SqlError::Semantic(format!("duplicate WITH alias '{}'", cte.alias.value)));
        }
        let mut inner_visible = visible.clone();
        inner_visible.extend(later[..i].iter().cloned());
        for name in referenced_tables(&cte.query) {
            if later[i..].contains(&name) && !inner_visible.contains(&name) {
                return Err(SqlError::Semantic(format!(
                    "WITH alias '{name}' is referenced before it is defined"
                )));
            }
        }
        check_with(&cte.query, &inner_visible)?;
    }
    let mut body_visible = visible.clone();
    body_visible.extend(later);
    check_nested(&q.body, &body_visible)
}

fn check_nested(s: &SetExpr, visible: &BTreeSet<String>) -> Result<(), SqlError> {
    let mut queries = Vec::new();
    collect_set_queries(s, &mut queries);
    for q in queries {
        check_with(q, visible)?;
    }
    Ok(())
}

fn collect_set_queries<'a>(s: &'a SetExpr, out: &mut Vec<&'a Query>) {
    match s {
        SetExpr::Select(sel) => collect_select_queries(sel, out),
        SetExpr::Query(q) => out.push(q),
        SetExpr::UnionAll(m) => m.iter().for_each(|x| collect_set_queries(x, out)),
    }
}

fn collect_select_queries<'a>(sel: &'a Select, out: &mut Vec<&'a Query>) {
    fn from<'a>(t: &'a TableRef, out: &mut Vec<&'a Query>) {
        match t {
            TableRef::Table { .. } => {}
            TableRef::Derived { query, .. } => out.push(query),
            TableRef::Join { left, right, on, .. } => {
                from(left, out);
                from(right, out);
                if let Some(c) = on {
                    out.extend(c.subqueries());
                }
            }
        }
    }
    if let Some(t) = &sel.from {
        from(t, out);
    }
    for item in &sel.items {
        if let SelectItem::Expr { expr, .. } = item {
            out.extend(expr.subqueries());
        }
    }
    for e in sel.selection.iter().chain(sel.group_by.iter()).chain(sel.having.iter()) {
        out.extend(e.subqueries());
    }
}

/// Normalized names of all tables referenced by `q`, excluding names bound
/// by WITH lists inside `q` itself.
fn referenced_tables(q: &Query) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    tables_in_query(q, &BTreeSet::new(), &mut out);
    out
}

fn tables_in_query(q: &Query, bound: &BTreeSet<String>, out: &mut BTreeSet<String>) {
    let mut bound = bound.clone();
    for cte in &q.with {
        tables_in_query(&cte.query, &bound, out);
        bound.insert(cte.alias.normalized());
    }
    let mut nested = Vec::new();
    collect_set_tables(&q.body, &bound, out, &mut nested);
    for o in &q.order_by {
        nested.extend(o.expr.subqueries());
    }
    for n in nested {
        tables_in_query(n, &bound, out);
    }
}

fn collect_set_tables<'a>(
    s: &'a SetExpr,
    bound: &BTreeSet<String>,
    out: &mut BTreeSet<String>,
    nested: &mut Vec<&'a Query>,
) {
    match s {
        SetExpr::Select(sel) => {
            fn from(t: &TableRef, bound: &BTreeSet<String>, out: &mut BTreeSet<String>) {
                if let TableRef::Table { name, .. } = t {
                    let n = name.normalized();
                    if !bound.contains(&n) {
                        out.insert(n);
                    }
                } else if let TableRef::Join { left, right, .. } = t {
                    from(left, bound, out);
                    from(right, bound, out);
                }
            }
            if let Some(t) = &sel.from {
                from(t, bound, out);
            }
            collect_select_queries(sel, nested);
        }
        SetExpr::Query(q) => nested.push(q),
        SetExpr::UnionAll(m) => m.iter().for_each(|x| collect_set_tables(x, bound, out, nested)),
    }
}
