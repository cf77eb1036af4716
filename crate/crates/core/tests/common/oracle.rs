//! Brute-force evaluator for a small query family, independent of the engine.
//!
//! Queries are generated as a test-side AST, rendered to SQL for the engine
//! and evaluated here with nested loops. Only integers and strings appear so
//! results compare exactly.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use querysim_core::values::{LogicalType, Value};
use rand::seq::SliceRandom;
use rand::Rng;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum V {
    I(i64),
    S(String),
}

pub type Cell = Option<V>;
pub type Row = Vec<Cell>;

pub struct Tables {
    pub t1: Vec<Row>,
    pub t2: Vec<Row>,
}

pub const T1_COLS: [(&str, LogicalType); 3] = [
    ("a", LogicalType::Bigint),
    ("b", LogicalType::Bigint),
    ("c", LogicalType::Varchar),
];
pub const T2_COLS: [(&str, LogicalType); 2] = [("a", LogicalType::Bigint), ("d", LogicalType::Bigint)];

const STRINGS: [&str; 5] = ["a", "ab", "bc", "ca", "b_c"];

fn maybe<R: Rng>(rng: &mut R, gen: impl FnOnce(&mut R) -> V) -> Cell {
    let v = gen(rng);
    (!rng.gen_bool(0.1)).then_some(v)
}

pub fn gen_tables<R: Rng>(rng: &mut R) -> Tables {
    let n1 = rng.gen_range(0..=100);
    let n2 = rng.gen_range(0..=100);
    let t1 = (0..n1)
        .map(|_| {
            vec![
                maybe(rng, |r| V::I(r.gen_range(-5..=5))),
                maybe(rng, |r| V::I(r.gen_range(-20..=20))),
                maybe(rng, |r| V::S(STRINGS[r.gen_range(0..STRINGS.len())].into())),
            ]
        })
        .collect();
    let t2 = (0..n2)
        .map(|_| vec![maybe(rng, |r| V::I(r.gen_range(-5..=5))), maybe(rng, |r| V::I(r.gen_range(0..=9)))])
        .collect();
    Tables { t1, t2 }
}

pub fn to_values(rows: &[Row]) -> Vec<Vec<Value>> {
    rows.iter()
        .map(|r| {
            r.iter()
                .map(|c| match c {
                    None => Value::Null,
                    Some(V::I(i)) => Value::Int(*i),
                    Some(V::S(s)) => Value::Str(s.clone()),
                })
                .collect()
        })
        .collect()
}

pub fn from_values(rows: &[Vec<Value>]) -> Option<Vec<Row>> {
    rows.iter()
        .map(|r| {
            r.iter()
                .map(|v| match v {
                    Value::Null => Some(None),
                    Value::Int(i) => Some(Some(V::I(*i))),
                    Value::Str(s) => Some(Some(V::S(s.clone()))),
                    _ => None,
                })
                .collect()
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Source {
    T1,
    T2,
    Inner,
    Left,
}

impl Source {
    /// (qualified name, is_int) per column of the source row.
    fn cols(self) -> Vec<(&'static str, bool)> {
        let t1 = [("x.a", true), ("x.b", true), ("x.c", false)];
        let t2 = [("y.a", true), ("y.d", true)];
        match self {
            Source::T1 => t1.to_vec(),
            Source::T2 => t2.to_vec(),
            Source::Inner | Source::Left => t1.iter().chain(t2.iter()).copied().collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cmp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl Cmp {
    fn sql(self) -> &'static str {
        match self {
            Cmp::Eq => "=",
            Cmp::Ne => "<>",
            Cmp::Lt => "<",
            Cmp::Le => "<=",
            Cmp::Gt => ">",
            Cmp::Ge => ">=",
        }
    }

    fn holds(self, o: Ordering) -> bool {
        match self {
            Cmp::Eq => o == Ordering::Equal,
            Cmp::Ne => o != Ordering::Equal,
            Cmp::Lt => o == Ordering::Less,
            Cmp::Le => o != Ordering::Greater,
            Cmp::Gt => o == Ordering::Greater,
            Cmp::Ge => o != Ordering::Less,
        }
    }
}

#[derive(Debug, Clone)]
pub enum IExpr {
    Col(usize),
    Lit(i64),
    Add(Box<IExpr>, Box<IExpr>),
    Sub(Box<IExpr>, Box<IExpr>),
    Mul(Box<IExpr>, Box<IExpr>),
    /// Divisor is a non-zero literal.
    Div(Box<IExpr>, i64),
    Neg(Box<IExpr>),
    Coalesce(usize, i64),
    Case(Box<Pred>, Box<IExpr>, Box<IExpr>),
}

#[derive(Debug, Clone)]
pub enum SExpr {
    Col(usize),
    Concat(usize, &'static str),
}

#[derive(Debug, Clone)]
pub enum Pred {
    Cmp(Cmp, IExpr, IExpr),
    StrEq(usize, &'static str),
    IsNull(usize, bool),
    InList(usize, Vec<i64>, bool),
    Between(IExpr, i64, i64),
    Like(usize, &'static str),
    And(Box<Pred>, Box<Pred>),
    Or(Box<Pred>, Box<Pred>),
    Not(Box<Pred>),
}

#[derive(Debug, Clone)]
pub enum Item {
    Int(IExpr),
    Str(SExpr),
}

#[derive(Debug, Clone)]
pub enum Agg {
    CountStar,
    Count(usize),
    Sum(usize),
    Min(usize),
    Max(usize),
}

#[derive(Debug, Clone)]
pub enum Shape {
    Project { items: Vec<Item>, distinct: bool },
    Group { key: usize, aggs: Vec<Agg>, having: Option<i64> },
}

#[derive(Debug, Clone)]
pub struct Select {
    pub source: Source,
    pub filter: Option<Pred>,
    pub shape: Shape,
}

#[derive(Debug, Clone)]
pub enum Query {
    Select { select: Select, order_limit: Option<u64> },
    Union(Select, Select),
}

// ---- generation ----

struct Gen<'a, R: Rng> {
    rng: &'a mut R,
    cols: Vec<(&'static str, bool)>,
}

impl<R: Rng> Gen<'_, R> {
    fn int_col(&mut self) -> usize {
        let ints: Vec<usize> = (0..self.cols.len()).filter(|&i| self.cols[i].1).collect();
        *ints.choose(self.rng).expect("every source has an int column")
    }

    fn str_col(&mut self) -> Option<usize> {
        (0..self.cols.len()).find(|&i| !self.cols[i].1)
    }

    fn iexpr(&mut self, depth: u32) -> IExpr {
        let leaf = depth == 0 || self.rng.gen_bool(0.4);
        if leaf {
            return if self.rng.gen_bool(0.8) {
                IExpr::Col(self.int_col())
            } else {
                IExpr::Lit(self.rng.gen_range(-3..=3))
            };
        }
        match self.rng.gen_range(0..7) {
            0 => IExpr::Add(Box::new(self.iexpr(depth - 1)), Box::new(self.iexpr(depth - 1))),
            1 => IExpr::Sub(Box::new(self.iexpr(depth - 1)), Box::new(self.iexpr(depth - 1))),
            2 => IExpr::Mul(Box::new(self.iexpr(depth - 1)), Box::new(self.iexpr(depth - 1))),
            3 => {
                let d = *[-3i64, -2, 1, 2, 3].choose(self.rng).unwrap();
                IExpr::Div(Box::new(self.iexpr(depth - 1)), d)
            }
            4 => IExpr::Neg(Box::new(self.iexpr(depth - 1))),
            5 => IExpr::Coalesce(self.int_col(), self.rng.gen_range(-3..=3)),
            _ => IExpr::Case(
                Box::new(self.pred(depth - 1)),
                Box::new(self.iexpr(depth - 1)),
                Box::new(self.iexpr(depth - 1)),
            ),
        }
    }

    fn pred(&mut self, depth: u32) -> Pred {
        let leaf = depth == 0 || self.rng.gen_bool(0.5);
        if leaf {
            let s = self.str_col();
            return match self.rng.gen_range(0..6) {
                0 => Pred::IsNull(self.int_col(), self.rng.gen_bool(0.5)),
                1 => {
                    let n = self.rng.gen_range(1..4);
                    let list = (0..n).map(|_| self.rng.gen_range(-5..=5)).collect();
                    Pred::InList(self.int_col(), list, self.rng.gen_bool(0.3))
                }
                2 => {
                    let lo = self.rng.gen_range(-6..=3);
                    Pred::Between(self.iexpr(1), lo, lo + self.rng.gen_range(0..6))
                }
                3 if s.is_some() => {
                    let p = *["a%", "%b", "_c%", "%", "b_c", "%c"].choose(self.rng).unwrap();
                    Pred::Like(s.unwrap(), p)
                }
                4 if s.is_some() => Pred::StrEq(s.unwrap(), STRINGS[self.rng.gen_range(0..STRINGS.len())]),
                _ => {
                    let op = *[Cmp::Eq, Cmp::Ne, Cmp::Lt, Cmp::Le, Cmp::Gt, Cmp::Ge].choose(self.rng).unwrap();
                    Pred::Cmp(op, self.iexpr(1), self.iexpr(1))
                }
            };
        }
        match self.rng.gen_range(0..3) {
            0 => Pred::And(Box::new(self.pred(depth - 1)), Box::new(self.pred(depth - 1))),
            1 => Pred::Or(Box::new(self.pred(depth - 1)), Box::new(self.pred(depth - 1))),
            _ => Pred::Not(Box::new(self.pred(depth - 1))),
        }
    }

    fn item(&mut self) -> Item {
        match self.str_col() {
            Some(s) if self.rng.gen_bool(0.25) => {
                if self.rng.gen_bool(0.5) {
                    Item::Str(SExpr::Col(s))
                } else {
                    Item::Str(SExpr::Concat(s, "z"))
                }
            }
            _ => Item::Int(self.iexpr(2)),
        }
    }

    fn agg(&mut self) -> Agg {
        match self.rng.gen_range(0..5) {
            0 => Agg::CountStar,
            1 => Agg::Count(self.rng.gen_range(0..self.cols.len())),
            2 => Agg::Sum(self.int_col()),
            3 => Agg::Min(self.rng.gen_range(0..self.cols.len())),
            _ => Agg::Max(self.rng.gen_range(0..self.cols.len())),
        }
    }
}

fn gen_select<R: Rng>(rng: &mut R, int_only_single: bool) -> Select {
    let source = *[Source::T1, Source::T2, Source::Inner, Source::Left].choose(rng).unwrap();
    let mut g = Gen {
        cols: source.cols(),
        rng,
    };
    let filter = g.rng.gen_bool(0.7).then(|| g.pred(2));
    let shape = if int_only_single {
        Shape::Project {
            items: vec![Item::Int(g.iexpr(2))],
            distinct: g.rng.gen_bool(0.2),
        }
    } else if g.rng.gen_bool(0.35) {
        let key = g.rng.gen_range(0..g.cols.len());
        let n = g.rng.gen_range(1..=3);
        Shape::Group {
            key,
            aggs: (0..n).map(|_| g.agg()).collect(),
            having: g.rng.gen_bool(0.3).then(|| g.rng.gen_range(0..4)),
        }
    } else {
        let n = g.rng.gen_range(1..=3);
        Shape::Project {
            items: (0..n).map(|_| g.item()).collect(),
            distinct: g.rng.gen_bool(0.2),
        }
    };
    Select { source, filter, shape }
}

pub fn gen_query<R: Rng>(rng: &mut R) -> Query {
    if rng.gen_bool(0.15) {
        Query::Union(gen_select(rng, true), gen_select(rng, true))
    } else {
        let select = gen_select(rng, false);
        let order_limit = rng.gen_bool(0.2).then(|| rng.gen_range(0..10));
        Query::Select { select, order_limit }
    }
}

// ---- rendering ----

fn r_iexpr(e: &IExpr, cols: &[(&str, bool)]) -> String {
    match e {
        IExpr::Col(i) => cols[*i].0.to_string(),
        IExpr::Lit(v) if *v < 0 => format!("({v})"),
        IExpr::Lit(v) => v.to_string(),
        IExpr::Add(a, b) => format!("({} + {})", r_iexpr(a, cols), r_iexpr(b, cols)),
        IExpr::Sub(a, b) => format!("({} - {})", r_iexpr(a, cols), r_iexpr(b, cols)),
        IExpr::Mul(a, b) => format!("({} * {})", r_iexpr(a, cols), r_iexpr(b, cols)),
        IExpr::Div(a, d) => format!("({} / ({d}))", r_iexpr(a, cols)),
        IExpr::Neg(a) => format!("(-{})", r_iexpr(a, cols)),
        IExpr::Coalesce(c, v) => format!("coalesce({}, {v})", cols[*c].0),
        IExpr::Case(p, a, b) => format!(
            "CASE WHEN {} THEN {} ELSE {} END",
            r_pred(p, cols),
            r_iexpr(a, cols),
            r_iexpr(b, cols)
        ),
    }
}

fn r_pred(p: &Pred, cols: &[(&str, bool)]) -> String {
    match p {
        Pred::Cmp(op, a, b) => format!("({} {} {})", r_iexpr(a, cols), op.sql(), r_iexpr(b, cols)),
        Pred::StrEq(c, s) => format!("({} = '{s}')", cols[*c].0),
        Pred::IsNull(c, neg) => format!("({} IS {}NULL)", cols[*c].0, if *neg { "NOT " } else { "" }),
        Pred::InList(c, l, neg) => format!(
            "({} {}IN ({}))",
            cols[*c].0,
            if *neg { "NOT " } else { "" },
            l.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(", ")
        ),
        Pred::Between(e, lo, hi) => format!("({} BETWEEN {lo} AND {hi})", r_iexpr(e, cols)),
        Pred::Like(c, pat) => format!("({} LIKE '{pat}')", cols[*c].0),
        Pred::And(a, b) => format!("({} AND {})", r_pred(a, cols), r_pred(b, cols)),
        Pred::Or(a, b) => format!("({} OR {})", r_pred(a, cols), r_pred(b, cols)),
        Pred::Not(a) => format!("(NOT {})", r_pred(a, cols)),
    }
}

fn r_select(s: &Select) -> String {
    let cols = s.source.cols();
    let from = match s.source {
        Source::T1 => "t1 AS x".to_string(),
        Source::T2 => "t2 AS y".to_string(),
        Source::Inner => "t1 AS x JOIN t2 AS y ON x.a = y.a".to_string(),
        Source::Left => "t1 AS x LEFT JOIN t2 AS y ON x.a = y.a".to_string(),
    };
    let filter = s
        .filter
        .as_ref()
        .map(|p| format!(" WHERE {}", r_pred(p, &cols)))
        .unwrap_or_default();
    match &s.shape {
        Shape::Project { items, distinct } => {
            let list: Vec<String> = items
                .iter()
                .enumerate()
                .map(|(i, it)| {
                    let e = match it {
                        Item::Int(e) => r_iexpr(e, &cols),
                        Item::Str(SExpr::Col(c)) => cols[*c].0.to_string(),
                        Item::Str(SExpr::Concat(c, z)) => format!("{} || '{z}'", cols[*c].0),
                    };
                    format!("{e} AS o{i}")
                })
                .collect();
            format!(
                "SELECT {}{} FROM {from}{filter}",
                if *distinct { "DISTINCT " } else { "" },
                list.join(", ")
            )
        }
        Shape::Group { key, aggs, having } => {
            let mut list = vec![format!("{} AS k", cols[*key].0)];
            for (i, a) in aggs.iter().enumerate() {
                let e = match a {
                    Agg::CountStar => "count(*)".to_string(),
                    Agg::Count(c) => format!("count({})", cols[*c].0),
                    Agg::Sum(c) => format!("sum({})", cols[*c].0),
                    Agg::Min(c) => format!("min({})", cols[*c].0),
                    Agg::Max(c) => format!("max({})", cols[*c].0),
                };
                list.push(format!("{e} AS g{i}"));
            }
            let having = having.map(|h| format!(" HAVING count(*) > {h}")).unwrap_or_default();
            format!(
                "SELECT {} FROM {from}{filter} GROUP BY {}{having}",
                list.join(", "),
                cols[*key].0
            )
        }
    }
}

fn arity(s: &Select) -> usize {
    match &s.shape {
        Shape::Project { items, .. } => items.len(),
        Shape::Group { aggs, .. } => aggs.len() + 1,
    }
}

pub fn render(q: &Query) -> String {
    match q {
        Query::Select { select, order_limit } => {
            let base = r_select(select);
            match order_limit {
                None => base,
                Some(n) => {
                    let keys: Vec<String> = (1..=arity(select)).map(|i| i.to_string()).collect();
                    format!("{base} ORDER BY {} LIMIT {n}", keys.join(", "))
                }
            }
        }
        Query::Union(a, b) => format!("{} UNION ALL {}", r_select(a), r_select(b)),
    }
}

// ---- evaluation ----

fn int(c: &Cell) -> Option<i64> {
    match c {
        Some(V::I(i)) => Some(*i),
        _ => None,
    }
}

fn e_iexpr(e: &IExpr, row: &Row) -> Option<i64> {
    match e {
        IExpr::Col(i) => int(&row[*i]),
        IExpr::Lit(v) => Some(*v),
        IExpr::Add(a, b) => Some(e_iexpr(a, row)? + e_iexpr(b, row)?),
        IExpr::Sub(a, b) => Some(e_iexpr(a, row)? - e_iexpr(b, row)?),
        IExpr::Mul(a, b) => Some(e_iexpr(a, row)? * e_iexpr(b, row)?),
        IExpr::Div(a, d) => Some(e_iexpr(a, row)? / d),
        IExpr::Neg(a) => Some(-e_iexpr(a, row)?),
        IExpr::Coalesce(c, v) => Some(int(&row[*c]).unwrap_or(*v)),
        IExpr::Case(p, a, b) => {
            if e_pred(p, row) == Some(true) {
                e_iexpr(a, row)
            } else {
                e_iexpr(b, row)
            }
        }
    }
}

fn like(s: &[u8], p: &[u8]) -> bool {
    match p.first() {
        None => s.is_empty(),
        Some(b'%') => (0..=s.len()).any(|i| like(&s[i..], &p[1..])),
        Some(b'_') => !s.is_empty() && like(&s[1..], &p[1..]),
        Some(c) => !s.is_empty() && s[0] == *c && like(&s[1..], &p[1..]),
    }
}

fn e_pred(p: &Pred, row: &Row) -> Option<bool> {
    match p {
        Pred::Cmp(op, a, b) => Some(op.holds(e_iexpr(a, row)?.cmp(&e_iexpr(b, row)?))),
        Pred::StrEq(c, s) => match &row[*c] {
            Some(V::S(v)) => Some(v == s),
            _ => None,
        },
        Pred::IsNull(c, neg) => Some(row[*c].is_none() != *neg),
        Pred::InList(c, l, neg) => {
            let v = int(&row[*c])?;
            Some(l.contains(&v) != *neg)
        }
        Pred::Between(e, lo, hi) => {
            let v = e_iexpr(e, row)?;
            Some(v >= *lo && v <= *hi)
        }
        Pred::Like(c, pat) => match &row[*c] {
            Some(V::S(v)) => Some(like(v.as_bytes(), pat.as_bytes())),
            _ => None,
        },
        Pred::And(a, b) => match (e_pred(a, row), e_pred(b, row)) {
            (Some(false), _) | (_, Some(false)) => Some(false),
            (Some(true), Some(true)) => Some(true),
            _ => None,
        },
        Pred::Or(a, b) => match (e_pred(a, row), e_pred(b, row)) {
            (Some(true), _) | (_, Some(true)) => Some(true),
            (Some(false), Some(false)) => Some(false),
            _ => None,
        },
        Pred::Not(a) => e_pred(a, row).map(|b| !b),
    }
}

fn source_rows(s: Source, t: &Tables) -> Vec<Row> {
    let joined = |left: bool| {
        let mut out = Vec::new();
        for l in &t.t1 {
            let mut hit = false;
            for r in &t.t2 {
                if l[0].is_some() && l[0] == r[0] {
                    hit = true;
                    out.push(l.iter().chain(r.iter()).cloned().collect());
                }
            }
            if left && !hit {
                let mut row = l.clone();
                row.extend([None, None]);
                out.push(row);
            }
        }
        out
    };
    match s {
        Source::T1 => t.t1.clone(),
        Source::T2 => t.t2.clone(),
        Source::Inner => joined(false),
        Source::Left => joined(true),
    }
}

/// NULLS LAST ascending order, as the engine sorts.
fn cmp_cell(a: &Cell, b: &Cell) -> Ordering {
    match (a, b) {
        (None, None) => Ordering::Equal,
        (None, _) => Ordering::Greater,
        (_, None) => Ordering::Less,
        (Some(x), Some(y)) => x.cmp(y),
    }
}

fn e_select(s: &Select, t: &Tables) -> Vec<Row> {
    let rows: Vec<Row> = source_rows(s.source, t)
        .into_iter()
        .filter(|r| s.filter.as_ref().is_none_or(|p| e_pred(p, r) == Some(true)))
        .collect();
    match &s.shape {
        Shape::Project { items, distinct } => {
            let mut out: Vec<Row> = rows
                .iter()
                .map(|r| {
                    items
                        .iter()
                        .map(|it| match it {
                            Item::Int(e) => e_iexpr(e, r).map(V::I),
                            Item::Str(SExpr::Col(c)) => r[*c].clone(),
                            Item::Str(SExpr::Concat(c, z)) => match &r[*c] {
                                Some(V::S(v)) => Some(V::S(format!("{v}{z}"))),
                                _ => None,
                            },
                        })
                        .collect()
                })
                .collect();
            if *distinct {
                out.sort();
                out.dedup();
            }
            out
        }
        Shape::Group { key, aggs, having } => {
            let mut groups: BTreeMap<Cell, Vec<Row>> = BTreeMap::new();
            for r in rows {
                groups.entry(r[*key].clone()).or_default().push(r);
            }
            let mut out = Vec::new();
            for (k, members) in groups {
                if having.is_some_and(|h| members.len() as i64 <= h) {
                    continue;
                }
                let mut row = vec![k];
                for a in aggs {
                    let vals = |c: usize| members.iter().filter_map(move |m| m[c].clone());
                    row.push(match a {
                        Agg::CountStar => Some(V::I(members.len() as i64)),
                        Agg::Count(c) => Some(V::I(vals(*c).count() as i64)),
                        Agg::Sum(c) => {
                            let xs: Vec<i64> = vals(*c).filter_map(|v| int(&Some(v))).collect();
                            (!xs.is_empty()).then(|| V::I(xs.iter().sum()))
                        }
                        Agg::Min(c) => vals(*c).min(),
                        Agg::Max(c) => vals(*c).max(),
                    });
                }
                out.push(row);
            }
            out
        }
    }
}

/// Expected result rows, sorted so multisets compare with `==`.
pub fn evaluate(q: &Query, t: &Tables) -> Vec<Row> {
    let mut rows = match q {
        Query::Select { select, order_limit } => {
            let mut rows = e_select(select, t);
            if let Some(n) = order_limit {
                rows.sort_by(|a, b| {
                    a.iter()
                        .zip(b)
                        .map(|(x, y)| cmp_cell(x, y))
                        .find(|o| o.is_ne())
                        .unwrap_or(Ordering::Equal)
                });
                rows.truncate(*n as usize);
            }
            rows
        }
        Query::Union(a, b) => {
            let mut rows = e_select(a, t);
            rows.extend(e_select(b, t));
            rows
        }
    };
    rows.sort();
    rows
}
