//! Single-line SQL renderer. Output reparses to a structurally identical AST.

use std::fmt::Write;

use super::ast::*;
use super::parser::{is_reserved, NILADIC_FUNCTIONS};
use crate::values::{render_float, Value};

pub fn render(stmt: &Statement) -> String {
    let mut out = String::new();
    match stmt {
        Statement::Query(q) => query(&mut out, q),
        Statement::Insert {
            table,
            columns,
            source,
        } => {
            out.push_str("INSERT INTO ");
            object_name(&mut out, table);
            if !columns.is_empty() {
                out.push_str(" (");
                for (i, c) in columns.iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    ident(&mut out, c);
                }
                out.push(')');
            }
            out.push(' ');
            query(&mut out, source);
        }
        Statement::CreateTableAs {
            table,
            if_not_exists,
            source,
        } => {
            out.push_str("CREATE TABLE ");
            if *if_not_exists {
                out.push_str("IF NOT EXISTS ");
            }
            object_name(&mut out, table);
            out.push_str(" AS ");
            query(&mut out, source);
        }
        Statement::Delete { table, selection } => {
            out.push_str("DELETE FROM ");
            object_name(&mut out, table);
            if let Some(e) = selection {
                out.push_str(" WHERE ");
                expr(&mut out, e);
            }
        }
    }
    out
}

pub fn render_query(q: &Query) -> String {
    let mut out = String::new();
    query(&mut out, q);
    out
}

pub fn render_expr(e: &Expr) -> String {
    let mut out = String::new();
    expr(&mut out, e);
    out
}

fn query(out: &mut String, q: &Query) {
    if !q.with.is_empty() {
        out.push_str("WITH ");
        for (i, cte) in q.with.iter().enumerate() {
            if i > 0 {
                out.push_str(", ");
            }
            ident(out, &cte.alias);
            out.push_str(" AS (");
            query(out, &cte.query);
            out.push(')');
        }
        out.push(' ');
    }
    set_expr(out, &q.body);
    if !q.order_by.is_empty() {
        out.push_str(" ORDER BY ");
        order_list(out, &q.order_by);
    }
    if let Some(n) = q.limit {
        let _ = write!(out, " LIMIT {n}");
    }
}

fn set_expr(out: &mut String, s: &SetExpr) {
    match s {
        SetExpr::Select(sel) => select(out, sel),
        SetExpr::Query(q) => {
            out.push('(');
            query(out, q);
            out.push(')');
        }
        SetExpr::UnionAll(members) => {
            for (i, m) in members.iter().enumerate() {
                if i > 0 {
                    out.push_str(" UNION ALL ");
                }
                // Nested unions must stay grouped to reparse identically.
                if matches!(m, SetExpr::UnionAll(_)) {
                    out.push('(');
                    set_expr(out, m);
                    out.push(')');
                } else {
                    set_expr(out, m);
                }
            }
        }
    }
}

fn select(out: &mut String, s: &Select) {
    out.push_str("SELECT ");
    if s.distinct {
        out.push_str("DISTINCT ");
    }
    for (i, item) in s.items.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        match item {
            SelectItem::Wildcard => out.push('*'),
            SelectItem::QualifiedWildcard(n) => {
                object_name(out, n);
                out.push_str(".*");
            }
            SelectItem::Expr { expr: e, alias } => {
                expr(out, e);
                if let Some(a) = alias {
                    out.push_str(" AS ");
                    ident(out, a);
                }
            }
        }
    }
    if let Some(from) = &s.from {
        out.push_str(" FROM ");
        table_ref(out, from);
    }
    if let Some(w) = &s.selection {
        out.push_str(" WHERE ");
        expr(out, w);
    }
    if !s.group_by.is_empty() {
        out.push_str(" GROUP BY ");
        expr_list(out, &s.group_by);
    }
    if let Some(h) = &s.having {
        out.push_str(" HAVING ");
        expr(out, h);
    }
}

fn table_ref(out: &mut String, t: &TableRef) {
    match t {
        TableRef::Table { name, alias } => {
            object_name(out, name);
            if let Some(a) = alias {
                out.push_str(" AS ");
                ident(out, a);
            }
        }
        TableRef::Derived { query: q, alias } => {
            out.push('(');
            query(out, q);
            out.push_str(") AS ");
            ident(out, alias);
        }
        TableRef::Join {
            left,
            right,
            kind,
            on,
        } => {
            table_ref(out, left);
            out.push_str(match kind {
                JoinKind::Inner => " JOIN ",
                JoinKind::Left => " LEFT JOIN ",
                JoinKind::Right => " RIGHT JOIN ",
                JoinKind::Full => " FULL JOIN ",
                JoinKind::Cross => " CROSS JOIN ",
            });
            table_ref(out, right);
            if let Some(c) = on {
                out.push_str(" ON ");
                expr(out, c);
            }
        }
    }
}

fn order_list(out: &mut String, items: &[OrderByItem]) {
    for (i, o) in items.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        expr(out, &o.expr);
        if o.desc {
            out.push_str(" DESC");
        }
        match o.nulls_first {
            Some(true) => out.push_str(" NULLS FIRST"),
            Some(false) => out.push_str(" NULLS LAST"),
            None => {}
        }
    }
}

fn expr_list(out: &mut String, list: &[Expr]) {
    for (i, e) in list.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        expr(out, e);
    }
}

fn is_atom(e: &Expr) -> bool {
    match e {
        Expr::Literal(Value::Int(i)) => *i >= 0,
        Expr::Literal(Value::Float(f)) => f.is_sign_positive() && f.is_finite(),
        Expr::Column(_)
        | Expr::Literal(_)
        | Expr::Function(_)
        | Expr::Subquery(_)
        | Expr::Cast { .. }
        | Expr::Case { .. } => true,
        _ => false,
    }
}

/// Renders `e`, wrapped in parentheses unless it is an atom.
fn operand(out: &mut String, e: &Expr) {
    if is_atom(e) {
        expr(out, e);
    } else {
        out.push('(');
        expr(out, e);
        out.push(')');
    }
}

fn expr(out: &mut String, e: &Expr) {
    match e {
        Expr::Column(parts) => {
            for (i, p) in parts.iter().enumerate() {
                if i > 0 {
                    out.push('.');
                }
                ident(out, p);
            }
        }
        Expr::Literal(v) => literal(out, v),
        Expr::Unary { op, expr: inner } => {
            out.push_str(match op {
                UnaryOp::Neg => "-",
                UnaryOp::Not => "NOT ",
            });
            operand(out, inner);
        }
        Expr::Binary { op, left, right } => {
            operand(out, left);
            out.push(' ');
            out.push_str(op.symbol());
            out.push(' ');
            operand(out, right);
        }
        Expr::IsNull {
            expr: inner,
            negated,
        } => {
            operand(out, inner);
            out.push_str(if *negated { " IS NOT NULL" } else { " IS NULL" });
        }
        Expr::InList {
            expr: inner,
            list,
            negated,
        } => {
            operand(out, inner);
            out.push_str(if *negated { " NOT IN (" } else { " IN (" });
            expr_list(out, list);
            out.push(')');
        }
        Expr::InSubquery {
            expr: inner,
            query: q,
            negated,
        } => {
            operand(out, inner);
            out.push_str(if *negated { " NOT IN (" } else { " IN (" });
            query(out, q);
            out.push(')');
        }
        Expr::Between {
            expr: inner,
            low,
            high,
            negated,
        } => {
            operand(out, inner);
            out.push_str(if *negated { " NOT BETWEEN " } else { " BETWEEN " });
            operand(out, low);
            out.push_str(" AND ");
            operand(out, high);
        }
        Expr::Like {
            expr: inner,
            pattern,
            negated,
        } => {
            operand(out, inner);
            out.push_str(if *negated { " NOT LIKE " } else { " LIKE " });
            operand(out, pattern);
        }
        Expr::Case {
            operand: op,
            whens,
            else_result,
        } => {
            out.push_str("CASE");
            if let Some(o) = op {
                out.push(' ');
                expr(out, o);
            }
            for w in whens {
                out.push_str(" WHEN ");
                expr(out, &w.condition);
                out.push_str(" THEN ");
                expr(out, &w.result);
            }
            if let Some(e) = else_result {
                out.push_str(" ELSE ");
                expr(out, e);
            }
            out.push_str(" END");
        }
        Expr::Cast { expr: inner, ty } => {
            out.push_str("CAST(");
            expr(out, inner);
            let _ = write!(out, " AS {})", ty.name());
        }
        Expr::Function(f) => function(out, f),
        Expr::Subquery(q) => {
            out.push('(');
            query(out, q);
            out.push(')');
        }
    }
}

fn function(out: &mut String, f: &FunctionCall) {
    let niladic = NILADIC_FUNCTIONS.contains(&f.name.as_str());
    if niladic && f.arg_list().is_empty() && f.over.is_none() {
        out.push_str(&f.name);
        return;
    }
    if is_reserved(&f.name) || !is_plain_word(&f.name) {
        quoted(out, &f.name);
    } else {
        out.push_str(&f.name);
    }
    out.push('(');
    match &f.args {
        FunctionArgs::Star => out.push('*'),
        FunctionArgs::List(args) => {
            if f.distinct {
                out.push_str("DISTINCT ");
            }
            expr_list(out, args);
        }
    }
    if !f.order_by.is_empty() {
        out.push_str(" ORDER BY ");
        order_list(out, &f.order_by);
    }
    out.push(')');
    if let Some(w) = &f.over {
        out.push_str(" OVER (");
        let mut sep = "";
        if !w.partition_by.is_empty() {
            out.push_str("PARTITION BY ");
            expr_list(out, &w.partition_by);
            sep = " ";
        }
        if !w.order_by.is_empty() {
            out.push_str(sep);
            out.push_str("ORDER BY ");
            order_list(out, &w.order_by);
        }
        out.push(')');
    }
}

fn literal(out: &mut String, v: &Value) {
    match v {
        Value::Null => out.push_str("NULL"),
        Value::Bool(true) => out.push_str("TRUE"),
        Value::Bool(false) => out.push_str("FALSE"),
        Value::Int(i) => {
            let _ = write!(out, "{i}");
        }
        Value::Float(f) if f.is_finite() => out.push_str(&render_float(*f)),
        Value::Float(f) => {
            let _ = write!(out, "CAST('{}' AS DOUBLE)", render_float(*f));
        }
        Value::Str(s) => string_literal(out, s),
        Value::Array(_) | Value::Map(_) => {
            // Composite literals have no SQL syntax here; they travel as JSON text.
            string_literal(out, &v.to_json().to_string());
        }
    }
}

fn string_literal(out: &mut String, s: &str) {
    out.push('\'');
    out.push_str(&s.replace('\'', "''"));
    out.push('\'');
}

fn object_name(out: &mut String, n: &ObjectName) {
    for (i, p) in n.0.iter().enumerate() {
        if i > 0 {
            out.push('.');
        }
        ident(out, p);
    }
}

fn ident(out: &mut String, i: &Ident) {
    if i.quoted || is_reserved(&i.value) || !is_plain_word(&i.value) {
        quoted(out, &i.value);
    } else {
        out.push_str(&i.value);
    }
}

fn quoted(out: &mut String, s: &str) {
    out.push('"');
    out.push_str(&s.replace('"', "\"\""));
    out.push('"');
}

fn is_plain_word(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_alphabetic() || c == '_')
        && chars.all(|c| c.is_alphanumeric() || c == '_' || c == '$')
}
