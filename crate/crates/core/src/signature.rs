//! Query signatures: plan trees rendered over a small operator alphabet.
//!
//! Letters: T scan, S / S[*] select, G aggregate, E distinct, O order,
//! J LJ RJ FJ CJ joins, U union all, I insert, CT create-as, D delete,
//! WS[A(alias,sig),..](body) with-bindings. Filters fold into their S and
//! limits are dropped. Subqueries inside expressions become extra children
//! of the enclosing S (or G for aggregate queries).

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::sql::{self, ast::*, LogicalPlan, SqlError};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignatureOptions {
    pub include_tables: bool,
    pub mask_dates: bool,
    pub date_placeholder: String,
}

impl Default for SignatureOptions {
    fn default() -> Self {
        SignatureOptions {
            include_tables: false,
            mask_dates: false,
            date_placeholder: "X".to_string(),
        }
    }
}

impl SignatureOptions {
    pub fn with_tables(mut self, on: bool) -> Self {
        self.include_tables = on;
        self
    }

    pub fn with_mask_dates(mut self, on: bool) -> Self {
        self.mask_dates = on;
        self
    }

    fn mask(&self, name: &str) -> String {
        if self.mask_dates {
            mask_identifier(name, &self.date_placeholder)
        } else {
            name.to_string()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct QuerySignature {
    pub body: String,
    /// Sorted, de-duplicated, masked source tables. Empty unless tables were requested.
    pub sources: Vec<String>,
    pub destination: Option<String>,
}

impl QuerySignature {
    /// `body`, or `body SRC1,SRC2->DST` when a table suffix is present.
    pub fn render(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for QuerySignature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.body)?;
        if self.sources.is_empty() && self.destination.is_none() {
            return Ok(());
        }
        write!(f, " {}", self.sources.join(","))?;
        if let Some(d) = &self.destination {
            write!(f, "->{d}")?;
        }
        Ok(())
    }
}

pub fn signature_of(plan: &LogicalPlan, opts: &SignatureOptions) -> QuerySignature {
    let body = body_of(plan, opts);
    let (sources, destination) = if opts.include_tables {
        let (s, d) = tables_of(plan);
        let mut s: Vec<String> = s.iter().map(|n| opts.mask(n)).collect();
        s.sort();
        s.dedup();
        (s, d.map(|d| opts.mask(&d)))
    } else {
        (Vec::new(), None)
    };
    QuerySignature {
        body,
        sources,
        destination,
    }
}

/// Parse, lower and sign in one step.
pub fn signature_of_sql(sql: &str, opts: &SignatureOptions) -> Result<QuerySignature, SqlError> {
    Ok(signature_of(&sql::plan_sql(sql)?, opts))
}

fn body_of(plan: &LogicalPlan, opts: &SignatureOptions) -> String {
    let mut out = String::new();
    render(plan, opts, &mut out);
    out
}

fn render(plan: &LogicalPlan, opts: &SignatureOptions, out: &mut String) {
    match plan {
        LogicalPlan::TableScan { .. } => out.push('T'),
        LogicalPlan::Values => {}
        LogicalPlan::Alias { input, .. } | LogicalPlan::Limit { input, .. } => render(input, opts, out),
        LogicalPlan::Filter { input, .. } => render(input, opts, out),
        LogicalPlan::Project { star, input, .. } => {
            out.push_str(if *star { "S[*](" } else { "S(" });
            render(input, opts, out);
            let mut extras = from_subqueries(input);
            extras.extend(plan.expressions().into_iter().flat_map(Expr::subqueries));
            render_extras(&extras, opts, out);
            out.push(')');
        }
        LogicalPlan::Passthrough { input } => {
            out.push_str("S(");
            render(input, opts, out);
            render_extras(&from_subqueries(input), opts, out);
            out.push(')');
        }
        LogicalPlan::Aggregate { input, .. } => {
            out.push_str("G(");
            render(input, opts, out);
            let extras: Vec<&Query> = plan.expressions().into_iter().flat_map(Expr::subqueries).collect();
            render_extras(&extras, opts, out);
            out.push(')');
        }
        LogicalPlan::Join {
            kind, left, right, ..
        } => {
            out.push_str(match kind {
                JoinKind::Inner => "J(",
                JoinKind::Left => "LJ(",
                JoinKind::Right => "RJ(",
                JoinKind::Full => "FJ(",
                JoinKind::Cross => "CJ(",
            });
            render(left, opts, out);
            out.push(',');
            render(right, opts, out);
            out.push(')');
        }
        LogicalPlan::Sort { input, .. } => wrap("O", plan, input, opts, out),
        LogicalPlan::Distinct { input } => wrap("E", plan, input, opts, out),
        LogicalPlan::UnionAll { inputs } => {
            out.push_str("U(");
            for (i, p) in inputs.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                render(p, opts, out);
            }
            out.push(')');
        }
        LogicalPlan::WithBinding { bindings, body } => {
            out.push_str("WS[");
            for (i, (alias, p)) in bindings.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str("A(");
                out.push_str(&opts.mask(&alias.value));
                out.push(',');
                render(p, opts, out);
                out.push(')');
            }
            out.push(']');
            if !is_identity_over_binding(body, bindings) {
                out.push('(');
                render(body, opts, out);
                out.push(')');
            }
        }
        LogicalPlan::InsertInto { input, .. } => wrap("I", plan, input, opts, out),
        LogicalPlan::CreateTableAs { input, .. } => wrap("CT", plan, input, opts, out),
        LogicalPlan::Delete { input, .. } => wrap("D", plan, input, opts, out),
    }
}

fn wrap(letter: &str, node: &LogicalPlan, input: &LogicalPlan, opts: &SignatureOptions, out: &mut String) {
    out.push_str(letter);
    out.push('(');
    render(input, opts, out);
    let extras: Vec<&Query> = node.expressions().into_iter().flat_map(Expr::subqueries).collect();
    render_extras(&extras, opts, out);
    out.push(')');
}

fn render_extras(queries: &[&Query], opts: &SignatureOptions, out: &mut String) {
    for q in queries {
        out.push(',');
        // Embedded subqueries were validated when the outer plan was lowered.
        if let Ok(p) = sql::plan::lower_query(q) {
            render(&p, opts, out);
        }
    }
}

/// Subqueries in WHERE and join conditions below a select, stopping at
/// derived-table boundaries.
fn from_subqueries(plan: &LogicalPlan) -> Vec<&Query> {
    let mut out = Vec::new();
    fn walk<'a>(p: &'a LogicalPlan, out: &mut Vec<&'a Query>) {
        match p {
            LogicalPlan::Filter { input, .. } => {
                walk(input, out);
                out.extend(p.expressions().into_iter().flat_map(Expr::subqueries));
            }
            LogicalPlan::Join { left, right, .. } => {
                walk(left, out);
                walk(right, out);
                out.extend(p.expressions().into_iter().flat_map(Expr::subqueries));
            }
            _ => {}
        }
    }
    walk(plan, &mut out);
    out
}

/// A body that is just `SELECT * FROM <binding>` adds nothing and is omitted.
fn is_identity_over_binding(body: &LogicalPlan, bindings: &[(Ident, LogicalPlan)]) -> bool {
    let LogicalPlan::Project { items, input, .. } = body else {
        return false;
    };
    if items.as_slice() != [SelectItem::Wildcard] {
        return false;
    }
    match input.as_ref() {
        LogicalPlan::TableScan { name, .. } if name.0.len() == 1 => {
            let n = name.normalized();
            bindings.iter().any(|(a, _)| a.normalized() == n)
        }
        _ => false,
    }
}

/// Base tables read and the table written. Sources exclude WITH aliases in
/// scope and are sorted; names keep their written spelling.
pub fn tables_of(plan: &LogicalPlan) -> (Vec<String>, Option<String>) {
    let mut sources = BTreeSet::new();
    let destination = match plan {
        LogicalPlan::InsertInto { target, .. }
        | LogicalPlan::CreateTableAs { target, .. }
        | LogicalPlan::Delete { target, .. } => Some(target.display_name()),
        _ => None,
    };
    collect_tables(plan, &BTreeSet::new(), &mut sources);
    (sources.into_iter().collect(), destination)
}

fn collect_tables(plan: &LogicalPlan, scope: &BTreeSet<String>, out: &mut BTreeSet<String>) {
    for e in plan.expressions() {
        for q in e.subqueries() {
            if let Ok(p) = sql::plan::lower_query(q) {
                collect_tables(&p, scope, out);
            }
        }
    }
    match plan {
        LogicalPlan::TableScan { name, .. } => {
            if !scope.contains(&name.normalized()) {
                out.insert(name.display_name());
            }
        }
        // The scan under a delete is its write target.
        LogicalPlan::Delete { .. } => {}
        LogicalPlan::WithBinding { bindings, body } => {
            let mut inner = scope.clone();
            for (alias, p) in bindings {
                collect_tables(p, &inner, out);
                inner.insert(alias.normalized());
            }
            collect_tables(body, &inner, out);
        }
        _ => {
            for c in plan.children() {
                collect_tables(c, scope, out);
            }
        }
    }
}

#[derive(Clone, Copy)]
enum Shape {
    /// YYYY<sep>MM<sep>DD
    DateSep(u8),
    /// YYYY-MM
    MonthSep,
    /// A maximal digit run of this length; 8 = YYYYMMDD, 6 = YYYYMM, 10/13 = epoch.
    Run(usize),
}

const SHAPES: &[Shape] = &[
    Shape::Run(13),
    Shape::DateSep(b'-'),
    Shape::DateSep(b'_'),
    Shape::Run(10),
    Shape::Run(8),
    Shape::MonthSep,
    Shape::Run(6),
];

fn digits(b: &[u8], at: usize, n: usize) -> Option<u32> {
    let s = b.get(at..at + n)?;
    if !s.iter().all(u8::is_ascii_digit) {
        return None;
    }
    Some(s.iter().fold(0, |acc, d| acc * 10 + u32::from(d - b'0')))
}

fn year_ok(y: u32) -> bool {
    (1970..=2099).contains(&y)
}

fn month_ok(m: u32) -> bool {
    (1..=12).contains(&m)
}

fn day_ok(d: u32) -> bool {
    (1..=31).contains(&d)
}

/// Length of the token matching `shape` at `at`, which starts a digit run.
fn match_shape(b: &[u8], at: usize, shape: Shape) -> Option<usize> {
    let len = match shape {
        Shape::Run(n) => {
            let run = b[at..].iter().take_while(|c| c.is_ascii_digit()).count();
            if run != n {
                return None;
            }
            match n {
                8 if !(year_ok(digits(b, at, 4)?) && month_ok(digits(b, at + 4, 2)?) && day_ok(digits(b, at + 6, 2)?)) => return None,
                6 if !(year_ok(digits(b, at, 4)?) && month_ok(digits(b, at + 4, 2)?)) => return None,
                _ => {}
            }
            n
        }
        Shape::DateSep(sep) => {
            let ok = year_ok(digits(b, at, 4)?)
                && b.get(at + 4) == Some(&sep)
                && month_ok(digits(b, at + 5, 2)?)
                && b.get(at + 7) == Some(&sep)
                && day_ok(digits(b, at + 8, 2)?);
            if !ok {
                return None;
            }
            10
        }
        Shape::MonthSep => {
            let ok = year_ok(digits(b, at, 4)?) && b.get(at + 4) == Some(&b'-') && month_ok(digits(b, at + 5, 2)?);
            if !ok {
                return None;
            }
            7
        }
    };
    if b.get(at + len).is_some_and(u8::is_ascii_digit) {
        return None;
    }
    Some(len)
}

/// Replaces every maximal date-like token in `name` with `placeholder`.
/// Idempotent for placeholders without ASCII digits.
pub fn mask_identifier(name: &str, placeholder: &str) -> String {
    let b = name.as_bytes();
    let mut out = String::with_capacity(name.len());
    let mut copied = 0;
    let mut i = 0;
    while i < b.len() {
        let starts_run = b[i].is_ascii_digit() && (i == 0 || !b[i - 1].is_ascii_digit());
        if starts_run {
            if let Some(len) = SHAPES.iter().find_map(|&s| match_shape(b, i, s)) {
                out.push_str(&name[copied..i]);
                out.push_str(placeholder);
                i += len;
                copied = i;
                continue;
            }
        }
        i += 1;
    }
    out.push_str(&name[copied..]);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sig(sql: &str) -> String {
        signature_of_sql(sql, &SignatureOptions::default()).unwrap().render()
    }

    fn sig_t(sql: &str) -> String {
        signature_of_sql(sql, &SignatureOptions::default().with_tables(true))
            .unwrap()
            .render()
    }

    #[test]
    fn basic_letters() {
        assert_eq!(sig("SELECT c FROM A"), "S(T)");
        assert_eq!(sig("SELECT c FROM A WHERE c > 1 LIMIT 10"), "S(T)");
        assert_eq!(sig("SELECT 1"), "S()");
        assert_eq!(sig("SELECT * FROM a RIGHT JOIN b ON a.x = b.x FULL JOIN c ON c.y = a.y"), "S[*](FJ(RJ(T,T),T))");
        assert_eq!(sig("SELECT * FROM a, b"), "S[*](CJ(T,T))");
        assert_eq!(sig("DELETE FROM t WHERE a = 1"), "D(T)");
    }

    #[test]
    fn subqueries_become_extra_children() {
        assert_eq!(sig("SELECT a FROM t WHERE a IN (SELECT b FROM u)"), "S(T,S(T))");
        assert_eq!(
            sig("SELECT a, (SELECT max(b) FROM u) FROM t JOIN v ON t.k = (SELECT 1)"),
            "S(J(T,T),S(),G(S(T)))"
        );
        assert_eq!(sig("SELECT a, count(*) FROM t GROUP BY a HAVING count(*) > (SELECT 1)"), "G(S(T),S())");
        assert_eq!(sig("SELECT * FROM (SELECT a FROM t WHERE a IN (SELECT 1)) x"), "S[*](S(T,S()))");
    }

    #[test]
    fn with_rendering() {
        assert_eq!(sig("WITH a AS (SELECT x FROM t) SELECT * FROM a"), "WS[A(a,S(T))]");
        assert_eq!(
            sig("WITH a AS (SELECT x FROM t) SELECT x, count(*) FROM a GROUP BY x"),
            "WS[A(a,S(T))](G(S(T)))"
        );
        let opts = SignatureOptions::default().with_mask_dates(true);
        assert_eq!(
            signature_of_sql("WITH d20220101 AS (SELECT 1) SELECT * FROM d20220101", &opts)
                .unwrap()
                .body,
            "WS[A(dX,S())]"
        );
    }

    #[test]
    fn table_suffixes() {
        assert_eq!(sig_t("INSERT INTO A SELECT * FROM B"), "I(S[*](T)) B->A");
        assert_eq!(sig_t("SELECT 1"), "S()");
        assert_eq!(sig_t("CREATE TABLE x AS SELECT 1"), "CT(S()) ->x");
        assert_eq!(sig_t("SELECT * FROM b JOIN a ON a.x = b.x JOIN b c ON c.y = a.y"), "S[*](J(J(T,T),T)) a,b");
        assert_eq!(sig_t("DELETE FROM t WHERE a IN (SELECT a FROM u)"), "D(T,S(T)) u->t");
        let plan = sql::plan_sql("WITH a AS (SELECT * FROM t) SELECT * FROM a JOIN u ON a.k = u.k").unwrap();
        assert_eq!(tables_of(&plan), (vec!["t".to_string(), "u".to_string()], None));
    }

    #[test]
    fn masking_examples() {
        assert_eq!(mask_identifier("table-2022-02-01", "X"), "table-X");
        assert_eq!(mask_identifier("events_20220201_v2", "X"), "events_X_v2");
        assert_eq!(mask_identifier("users3", "X"), "users3");
        assert_eq!(mask_identifier("logs_2022_02_01", "X"), "logs_X");
        assert_eq!(mask_identifier("m202213", "X"), "m202213");
        assert_eq!(mask_identifier("a2021-03_b202104_c1650000000_d1650000000123", "?"), "a?_b?_c?_d?");
        assert_eq!(mask_identifier("x1969-01-01", "X"), "x1969-01-01");
        assert_eq!(mask_identifier("2022-02-01-2022-03-01", "X"), "X-X");
        assert_eq!(mask_identifier("n123456789012", "X"), "n123456789012");
    }
}
