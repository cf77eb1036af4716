//! Syntax tree for the supported SQL subset.

use crate::values::{LogicalType, Value};

/// An identifier as written. Unquoted identifiers compare case-insensitively
/// (see [`Ident::normalized`]); quoted ones are exact.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Ident {
    pub value: String,
    pub quoted: bool,
}

impl Ident {
    pub fn new(value: impl Into<String>) -> Self {
        Ident {
            value: value.into(),
            quoted: false,
        }
    }

    pub fn quoted(value: impl Into<String>) -> Self {
        Ident {
            value: value.into(),
            quoted: true,
        }
    }

    /// Name used for resolution: unquoted identifiers fold to lower case.
    pub fn normalized(&self) -> String {
        if self.quoted {
            self.value.clone()
        } else {
            self.value.to_lowercase()
        }
    }
}

/// A possibly qualified object name such as `db.events`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ObjectName(pub Vec<Ident>);

impl ObjectName {
    pub fn simple(name: impl Into<String>) -> Self {
        ObjectName(vec![Ident::new(name)])
    }

    /// Dotted name as written (case preserved).
    pub fn display_name(&self) -> String {
        self.0
            .iter()
            .map(|i| i.value.as_str())
            .collect::<Vec<_>>()
            .join(".")
    }

    /// Dotted name for catalog lookup.
    pub fn normalized(&self) -> String {
        self.0
            .iter()
            .map(Ident::normalized)
            .collect::<Vec<_>>()
            .join(".")
    }

    pub fn last(&self) -> &Ident {
        self.0.last().expect("object name is never empty")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Statement {
    Query(Box<Query>),
    Insert {
        table: ObjectName,
        columns: Vec<Ident>,
        source: Box<Query>,
    },
    CreateTableAs {
        table: ObjectName,
        if_not_exists: bool,
        source: Box<Query>,
    },
    Delete {
        table: ObjectName,
        selection: Option<Expr>,
    },
}

impl Statement {
    pub fn is_read(&self) -> bool {
        matches!(self, Statement::Query(_))
    }

    /// Table written by this statement, if any.
    pub fn write_target(&self) -> Option<&ObjectName> {
        match self {
            Statement::Query(_) => None,
            Statement::Insert { table, .. }
            | Statement::CreateTableAs { table, .. }
            | Statement::Delete { table, .. } => Some(table),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Query {
    pub with: Vec<Cte>,
    pub body: SetExpr,
    pub order_by: Vec<OrderByItem>,
    pub limit: Option<u64>,
}

impl Query {
    pub fn simple(select: Select) -> Self {
        Query {
            with: vec![],
            body: SetExpr::Select(Box::new(select)),
            order_by: vec![],
            limit: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cte {
    pub alias: Ident,
    pub query: Query,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SetExpr {
    Select(Box<Select>),
    /// Parenthesized query used as a set operand.
    Query(Box<Query>),
    /// Two or more operands combined with UNION ALL.
    UnionAll(Vec<SetExpr>),
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Select {
    pub distinct: bool,
    pub items: Vec<SelectItem>,
    pub from: Option<TableRef>,
    pub selection: Option<Expr>,
    pub group_by: Vec<Expr>,
    pub having: Option<Expr>,
}

impl Select {
    pub fn has_star(&self) -> bool {
        self.items
            .iter()
            .any(|i| matches!(i, SelectItem::Wildcard | SelectItem::QualifiedWildcard(_)))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SelectItem {
    Wildcard,
    QualifiedWildcard(ObjectName),
    Expr { expr: Expr, alias: Option<Ident> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum JoinKind {
    Inner,
    Left,
    Right,
    Full,
    Cross,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TableRef {
    Table {
        name: ObjectName,
        alias: Option<Ident>,
    },
    Derived {
        query: Box<Query>,
        alias: Ident,
    },
    Join {
        left: Box<TableRef>,
        right: Box<TableRef>,
        kind: JoinKind,
        on: Option<Expr>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrderByItem {
    pub expr: Expr,
    pub desc: bool,
    pub nulls_first: Option<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnaryOp {
    Neg,
    Not,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinaryOp {
    Plus,
    Minus,
    Multiply,
    Divide,
    Modulo,
    Concat,
    Eq,
    NotEq,
    Lt,
    LtEq,
    Gt,
    GtEq,
    And,
    Or,
}

impl BinaryOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinaryOp::Plus => "+",
            BinaryOp::Minus => "-",
            BinaryOp::Multiply => "*",
            BinaryOp::Divide => "/",
            BinaryOp::Modulo => "%",
            BinaryOp::Concat => "||",
            BinaryOp::Eq => "=",
            BinaryOp::NotEq => "<>",
            BinaryOp::Lt => "<",
            BinaryOp::LtEq => "<=",
            BinaryOp::Gt => ">",
            BinaryOp::GtEq => ">=",
            BinaryOp::And => "AND",
            BinaryOp::Or => "OR",
        }
    }

    pub fn is_comparison(self) -> bool {
        matches!(
            self,
            BinaryOp::Eq
                | BinaryOp::NotEq
                | BinaryOp::Lt
                | BinaryOp::LtEq
                | BinaryOp::Gt
                | BinaryOp::GtEq
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FunctionArgs {
    /// `count(*)`
    Star,
    List(Vec<Expr>),
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct WindowSpec {
    pub partition_by: Vec<Expr>,
    pub order_by: Vec<OrderByItem>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FunctionCall {
    /// Lower-cased function name.
    pub name: String,
    pub args: FunctionArgs,
    pub distinct: bool,
    /// Ordering inside an aggregate call, e.g. `array_agg(x ORDER BY y)`.
    pub order_by: Vec<OrderByItem>,
    pub over: Option<WindowSpec>,
}

impl FunctionCall {
    pub fn new(name: &str, args: Vec<Expr>) -> Self {
        FunctionCall {
            name: name.to_ascii_lowercase(),
            args: FunctionArgs::List(args),
            distinct: false,
            order_by: vec![],
            over: None,
        }
    }

    pub fn arity(&self) -> usize {
        match &self.args {
            FunctionArgs::Star => 1,
            FunctionArgs::List(a) => a.len(),
        }
    }

    pub fn arg_list(&self) -> &[Expr] {
        match &self.args {
            FunctionArgs::Star => &[],
            FunctionArgs::List(a) => a,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WhenClause {
    pub condition: Expr,
    pub result: Expr,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Column(Vec<Ident>),
    Literal(Value),
    Unary {
        op: UnaryOp,
        expr: Box<Expr>,
    },
    Binary {
        op: BinaryOp,
        left: Box<Expr>,
        right: Box<Expr>,
    },
    IsNull {
        expr: Box<Expr>,
        negated: bool,
    },
    InList {
        expr: Box<Expr>,
        list: Vec<Expr>,
        negated: bool,
    },
    InSubquery {
        expr: Box<Expr>,
        query: Box<Query>,
        negated: bool,
    },
    Between {
        expr: Box<Expr>,
        low: Box<Expr>,
        high: Box<Expr>,
        negated: bool,
    },
    Like {
        expr: Box<Expr>,
        pattern: Box<Expr>,
        negated: bool,
    },
    Case {
        operand: Option<Box<Expr>>,
        whens: Vec<WhenClause>,
        else_result: Option<Box<Expr>>,
    },
    Cast {
        expr: Box<Expr>,
        ty: LogicalType,
    },
    Function(FunctionCall),
    Subquery(Box<Query>),
}

impl Expr {
    pub fn col(name: &str) -> Expr {
        Expr::Column(vec![Ident::new(name)])
    }

    pub fn lit(v: impl Into<Value>) -> Expr {
        Expr::Literal(v.into())
    }

    pub fn binary(op: BinaryOp, left: Expr, right: Expr) -> Expr {
        Expr::Binary {
            op,
            left: Box::new(left),
            right: Box::new(right),
        }
    }

    /// Direct sub-expressions, not descending into subqueries.
    pub fn children(&self) -> Vec<&Expr> {
        let mut out = Vec::new();
        match self {
            Expr::Column(_) | Expr::Literal(_) | Expr::Subquery(_) => {}
            Expr::Unary { expr, .. } | Expr::IsNull { expr, .. } | Expr::Cast { expr, .. } => {
                out.push(expr.as_ref())
            }
            Expr::InSubquery { expr, .. } => out.push(expr.as_ref()),
            Expr::Binary { left, right, .. } => {
                out.push(left.as_ref());
                out.push(right.as_ref());
            }
            Expr::InList { expr, list, .. } => {
                out.push(expr.as_ref());
                out.extend(list.iter());
            }
            Expr::Between {
                expr, low, high, ..
            } => {
                out.push(expr.as_ref());
                out.push(low.as_ref());
                out.push(high.as_ref());
            }
            Expr::Like { expr, pattern, .. } => {
                out.push(expr.as_ref());
                out.push(pattern.as_ref());
            }
            Expr::Case {
                operand,
                whens,
                else_result,
            } => {
                if let Some(o) = operand {
                    out.push(o.as_ref());
                }
                for w in whens {
                    out.push(&w.condition);
                    out.push(&w.result);
                }
                if let Some(e) = else_result {
                    out.push(e.as_ref());
                }
            }
            Expr::Function(f) => {
                out.extend(f.arg_list().iter());
                out.extend(f.order_by.iter().map(|o| &o.expr));
                if let Some(w) = &f.over {
                    out.extend(w.partition_by.iter());
                    out.extend(w.order_by.iter().map(|o| &o.expr));
                }
            }
        }
        out
    }

    /// Subqueries directly embedded in this expression tree (not nested
    /// inside other subqueries), in left-to-right order.
    pub fn subqueries(&self) -> Vec<&Query> {
        let mut out = Vec::new();
        self.collect_subqueries(&mut out);
        out
    }

    fn collect_subqueries<'a>(&'a self, out: &mut Vec<&'a Query>) {
        match self {
            Expr::Subquery(q) => out.push(q),
            Expr::InSubquery { expr, query, .. } => {
                expr.collect_subqueries(out);
                out.push(query);
            }
            _ => {
                for c in self.children() {
                    c.collect_subqueries(out);
                }
            }
        }
    }
}

/// Aggregate function names understood by the engine and planner.
pub const AGGREGATE_FUNCTIONS: &[&str] = &[
    "count",
    "sum",
    "avg",
    "min",
    "max",
    "max_by",
    "min_by",
    "array_agg",
    "approx_distinct",
    "approx_percentile",
    "arbitrary",
    "any_value",
    "result_digest",
];

pub fn is_aggregate_name(name: &str) -> bool {
    AGGREGATE_FUNCTIONS.contains(&name)
}

impl Expr {
    /// True when the expression contains an aggregate call outside any
    /// window clause or subquery.
    pub fn contains_aggregate(&self) -> bool {
        match self {
            Expr::Function(f) if f.over.is_none() && is_aggregate_name(&f.name) => true,
            Expr::Function(f) if f.over.is_some() => {
                // Window arguments may themselves aggregate (over grouped rows).
                f.arg_list().iter().any(Expr::contains_aggregate)
                    || f
                        .over
                        .as_ref()
                        .map(|w| {
                            w.partition_by.iter().any(Expr::contains_aggregate)
                                || w.order_by.iter().any(|o| o.expr.contains_aggregate())
                        })
                        .unwrap_or(false)
            }
            _ => self.children().into_iter().any(Expr::contains_aggregate),
        }
    }

    pub fn contains_window(&self) -> bool {
        match self {
            Expr::Function(f) if f.over.is_some() => true,
            _ => self.children().into_iter().any(Expr::contains_window),
        }
    }
}
