//! Recursive-descent parser for the supported subset. See `docs/grammar.md`.

use super::ast::*;
use super::lexer::{tokenize, Token, TokenKind};
use super::SqlError;
use crate::values::{LogicalType, Value};

/// Words that can never be used as an implicit alias.
const RESERVED: &[&str] = &[
    "all", "and", "as", "between", "by", "case", "cast", "create", "cross", "delete", "distinct",
    "else", "end", "except", "exists", "false", "fetch", "from", "full", "group", "having", "in",
    "inner", "insert", "intersect", "into", "is", "join", "lateral", "left", "like", "limit",
    "natural", "not", "null", "offset", "on", "or", "order", "outer", "over", "right", "select",
    "table", "then", "true", "union", "using", "values", "when", "where", "window", "with",
];

/// Statement verbs that exist in SQL but are outside the supported subset.
const UNSUPPORTED_VERBS: &[&str] = &[
    "update", "merge", "drop", "alter", "explain", "show", "describe", "grant", "revoke", "set",
    "use", "call", "truncate", "values", "prepare", "execute", "analyze", "commit", "rollback",
    "start", "begin",
];

/// Keyword-style functions that take no parentheses.
pub(crate) const NILADIC_FUNCTIONS: &[&str] = &[
    "current_timestamp",
    "current_date",
    "current_time",
    "localtime",
    "localtimestamp",
];

pub fn parse(sql: &str) -> Result<Statement, SqlError> {
    let tokens = tokenize(sql)?;
    let mut p = Parser { tokens, pos: 0 };
    let stmt = p.statement()?;
    p.eat(&TokenKind::Semicolon);
    let t = p.peek().clone();
    if t.kind != TokenKind::Eof {
        if p.prev_was_semicolon() {
            return Err(SqlError::unsupported("multiple statements", t.line, t.column));
        }
        return Err(p.expected("end of statement"));
    }
    Ok(stmt)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos.min(self.tokens.len() - 1)]
    }

    fn peek_at(&self, n: usize) -> &Token {
        &self.tokens[(self.pos + n).min(self.tokens.len() - 1)]
    }

    fn prev_was_semicolon(&self) -> bool {
        self.pos > 0 && self.tokens[self.pos - 1].kind == TokenKind::Semicolon
    }

    fn next(&mut self) -> Token {
        let t = self.peek().clone();
        if t.kind != TokenKind::Eof {
            self.pos += 1;
        }
        t
    }

    fn eat(&mut self, kind: &TokenKind) -> bool {
        if &self.peek().kind == kind {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, kind: TokenKind) -> Result<Token, SqlError> {
        if self.peek().kind == kind {
            Ok(self.next())
        } else {
            Err(self.expected(&kind.describe()))
        }
    }

    fn expected(&self, what: &str) -> SqlError {
        let t = self.peek();
        SqlError::syntax(
            t.line,
            t.column,
            format!("expected {what}, found {}", t.kind.describe()),
            Some(what.to_string()),
        )
    }

    fn unsupported_here(&self, feature: &str) -> SqlError {
        let t = self.peek();
        SqlError::unsupported(feature, t.line, t.column)
    }

    fn is_kw(&self, kw: &str) -> bool {
        is_word(&self.peek().kind, kw)
    }

    fn is_kw_at(&self, n: usize, kw: &str) -> bool {
        is_word(&self.peek_at(n).kind, kw)
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if self.is_kw(kw) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_kw(&mut self, kw: &str) -> Result<(), SqlError> {
        if self.eat_kw(kw) {
            Ok(())
        } else {
            Err(self.expected(&kw.to_ascii_uppercase()))
        }
    }

    fn statement(&mut self) -> Result<Statement, SqlError> {
        let t = self.peek().clone();
        match &t.kind {
            TokenKind::Word(w) => {
                let w = w.to_ascii_lowercase();
                match w.as_str() {
                    "select" | "with" => Ok(Statement::Query(Box::new(self.query()?))),
                    "insert" => self.insert(),
                    "create" => self.create(),
                    "delete" => self.delete(),
                    v if UNSUPPORTED_VERBS.contains(&v) => {
                        Err(SqlError::unsupported(&format!("{} statement", v.to_ascii_uppercase()), t.line, t.column))
                    }
                    _ => Err(self.expected("SELECT, WITH, INSERT, CREATE or DELETE")),
                }
            }
            TokenKind::LParen => Ok(Statement::Query(Box::new(self.query()?))),
            _ => Err(self.expected("SELECT, WITH, INSERT, CREATE or DELETE")),
        }
    }

    fn insert(&mut self) -> Result<Statement, SqlError> {
        self.expect_kw("insert")?;
        if self.is_kw("overwrite") {
            return Err(self.unsupported_here("INSERT OVERWRITE"));
        }
        self.expect_kw("into")?;
        let table = self.object_name()?;
        let mut columns = Vec::new();
        if self.peek().kind == TokenKind::LParen && !self.starts_query_at(1) {
            self.next();
            loop {
                columns.push(self.ident()?);
                if !self.eat(&TokenKind::Comma) {
                    break;
                }
            }
            self.expect(TokenKind::RParen)?;
        }
        if self.is_kw("values") {
            return Err(self.unsupported_here("INSERT ... VALUES"));
        }
        let source = self.query()?;
        Ok(Statement::Insert {
            table,
            columns,
            source: Box::new(source),
        })
    }

    fn create(&mut self) -> Result<Statement, SqlError> {
        self.expect_kw("create")?;
        if !self.is_kw("table") {
            let what = match &self.peek().kind {
                TokenKind::Word(w) => format!("CREATE {}", w.to_ascii_uppercase()),
                _ => "CREATE".to_string(),
            };
            return Err(self.unsupported_here(&what));
        }
        self.next();
        let if_not_exists = if self.is_kw("if") {
            self.next();
            self.expect_kw("not")?;
            self.expect_kw("exists")?;
            true
        } else {
            false
        };
        let table = self.object_name()?;
        if self.peek().kind == TokenKind::LParen || self.is_kw("with") {
            return Err(self.unsupported_here("CREATE TABLE with column definitions"));
        }
        if !self.is_kw("as") {
            return Err(self.expected("AS"));
        }
        self.next();
        let source = self.query()?;
        Ok(Statement::CreateTableAs {
            table,
            if_not_exists,
            source: Box::new(source),
        })
    }

    fn delete(&mut self) -> Result<Statement, SqlError> {
        self.expect_kw("delete")?;
        self.expect_kw("from")?;
        let table = self.object_name()?;
        let selection = if self.eat_kw("where") {
            Some(self.expr()?)
        } else {
            None
        };
        Ok(Statement::Delete { table, selection })
    }

    fn starts_query_at(&self, n: usize) -> bool {
        self.is_kw_at(n, "select") || self.is_kw_at(n, "with")
            || (self.peek_at(n).kind == TokenKind::LParen && self.starts_query_at(n + 1))
    }

    fn query(&mut self) -> Result<Query, SqlError> {
        let mut with = Vec::new();
        if self.eat_kw("with") {
            if self.is_kw("recursive") {
                return Err(self.unsupported_here("WITH RECURSIVE"));
            }
            loop {
                let alias = self.ident()?;
                if self.peek().kind == TokenKind::LParen {
                    return Err(self.unsupported_here("WITH column list"));
                }
                self.expect_kw("as")?;
                self.expect(TokenKind::LParen)?;
                let query = self.query()?;
                self.expect(TokenKind::RParen)?;
                with.push(Cte { alias, query });
                if !self.eat(&TokenKind::Comma) {
                    break;
                }
            }
        }
        let body = self.set_expr()?;
        let mut order_by = Vec::new();
        if self.is_kw("order") {
            self.next();
            self.expect_kw("by")?;
            order_by = self.order_list()?;
        }
        let mut limit = None;
        if self.eat_kw("limit") {
            let t = self.next();
            match t.kind {
                TokenKind::Int(n) if n >= 0 => limit = Some(n as u64),
                TokenKind::Word(w) if w.eq_ignore_ascii_case("all") => {}
                _ => {
                    self.pos -= 1;
                    return Err(self.expected("non-negative integer after LIMIT"));
                }
            }
        }
        if self.is_kw("offset") {
            return Err(self.unsupported_here("OFFSET"));
        }
        if self.is_kw("fetch") {
            return Err(self.unsupported_here("FETCH"));
        }
        Ok(Query {
            with,
            body,
            order_by,
            limit,
        })
    }

    fn set_expr(&mut self) -> Result<SetExpr, SqlError> {
        let first = self.set_term()?;
        let mut members = vec![first];
        loop {
            if self.is_kw("union") {
                self.next();
                if !self.eat_kw("all") {
                    return Err(self.unsupported_here("UNION without ALL"));
                }
                members.push(self.set_term()?);
            } else if self.is_kw("intersect") || self.is_kw("except") {
                let what = if self.is_kw("intersect") { "INTERSECT" } else { "EXCEPT" };
                return Err(self.unsupported_here(what));
            } else {
                break;
            }
        }
        if members.len() == 1 {
            Ok(members.pop().unwrap())
        } else {
            Ok(SetExpr::UnionAll(members))
        }
    }

    fn set_term(&mut self) -> Result<SetExpr, SqlError> {
        if self.peek().kind == TokenKind::LParen {
            self.next();
            let q = self.query()?;
            self.expect(TokenKind::RParen)?;
            return Ok(SetExpr::Query(Box::new(q)));
        }
        if self.is_kw("values") {
            return Err(self.unsupported_here("VALUES"));
        }
        Ok(SetExpr::Select(Box::new(self.select()?)))
    }

    fn select(&mut self) -> Result<Select, SqlError> {
        self.expect_kw("select")?;
        let distinct = if self.eat_kw("distinct") {
            true
        } else {
            self.eat_kw("all");
            false
        };
        let mut items = Vec::new();
        loop {
            items.push(self.select_item()?);
            if !self.eat(&TokenKind::Comma) {
                break;
            }
        }
        let from = if self.eat_kw("from") {
            Some(self.table_refs()?)
        } else {
            None
        };
        let selection = if self.eat_kw("where") {
            Some(self.expr()?)
        } else {
            None
        };
        let mut group_by = Vec::new();
        if self.is_kw("group") {
            self.next();
            self.expect_kw("by")?;
            for kw in ["rollup", "cube", "grouping"] {
                if self.is_kw(kw) {
                    return Err(self.unsupported_here(&kw.to_ascii_uppercase()));
                }
            }
            loop {
                group_by.push(self.expr()?);
                if !self.eat(&TokenKind::Comma) {
                    break;
                }
            }
        }
        let having = if self.eat_kw("having") {
            Some(self.expr()?)
        } else {
            None
        };
        if self.is_kw("window") {
            return Err(self.unsupported_here("WINDOW clause"));
        }
        Ok(Select {
            distinct,
            items,
            from,
            selection,
            group_by,
            having,
        })
    }

    fn select_item(&mut self) -> Result<SelectItem, SqlError> {
        if self.eat(&TokenKind::Star) {
            return Ok(SelectItem::Wildcard);
        }
        // t.* / db.t.*
        let mut n = 0;
        while matches!(self.peek_at(n).kind, TokenKind::Word(_) | TokenKind::QuotedIdent(_))
            && self.peek_at(n + 1).kind == TokenKind::Dot
        {
            n += 2;
        }
        if n > 0 && self.peek_at(n).kind == TokenKind::Star {
            let mut parts = Vec::new();
            for _ in 0..n / 2 {
                parts.push(self.ident()?);
                self.expect(TokenKind::Dot)?;
            }
            self.expect(TokenKind::Star)?;
            let name = ObjectName(parts);
            return Ok(SelectItem::QualifiedWildcard(name));
        }
        let expr = self.expr()?;
        let alias = self.opt_alias()?;
        Ok(SelectItem::Expr { expr, alias })
    }

    fn opt_alias(&mut self) -> Result<Option<Ident>, SqlError> {
        if self.eat_kw("as") {
            return Ok(Some(self.ident()?));
        }
        match &self.peek().kind {
            TokenKind::Word(w) if !is_reserved(w) => Ok(Some(self.ident()?)),
            TokenKind::QuotedIdent(_) => Ok(Some(self.ident()?)),
            _ => Ok(None),
        }
    }

    fn table_refs(&mut self) -> Result<TableRef, SqlError> {
        let mut left = self.table_factor()?;
        loop {
            if self.eat(&TokenKind::Comma) {
                let right = self.table_factor()?;
                left = TableRef::Join {
                    left: Box::new(left),
                    right: Box::new(right),
                    kind: JoinKind::Cross,
                    on: None,
                };
                continue;
            }
            if self.is_kw("natural") {
                return Err(self.unsupported_here("NATURAL JOIN"));
            }
            let kind = if self.eat_kw("join") {
                JoinKind::Inner
            } else if self.is_kw("inner") {
                self.next();
                self.expect_kw("join")?;
                JoinKind::Inner
            } else if self.is_kw("cross") {
                self.next();
                self.expect_kw("join")?;
                JoinKind::Cross
            } else if self.is_kw("left") || self.is_kw("right") || self.is_kw("full") {
                let k = match &self.next().kind {
                    TokenKind::Word(w) if w.eq_ignore_ascii_case("left") => JoinKind::Left,
                    TokenKind::Word(w) if w.eq_ignore_ascii_case("right") => JoinKind::Right,
                    _ => JoinKind::Full,
                };
                self.eat_kw("outer");
                self.expect_kw("join")?;
                k
            } else {
                break;
            };
            if self.is_kw("lateral") {
                return Err(self.unsupported_here("LATERAL join"));
            }
            let right = self.table_factor()?;
            let on = if kind == JoinKind::Cross {
                None
            } else if self.is_kw("using") {
                return Err(self.unsupported_here("JOIN ... USING"));
            } else {
                self.expect_kw("on")?;
                Some(self.expr()?)
            };
            left = TableRef::Join {
                left: Box::new(left),
                right: Box::new(right),
                kind,
                on,
            };
        }
        Ok(left)
    }

    fn table_factor(&mut self) -> Result<TableRef, SqlError> {
        if self.is_kw("lateral") {
            return Err(self.unsupported_here("LATERAL"));
        }
        if self.is_kw("unnest") && self.peek_at(1).kind == TokenKind::LParen {
            return Err(self.unsupported_here("UNNEST"));
        }
        if self.peek().kind == TokenKind::LParen {
            if !self.starts_query_at(1) {
                return Err(self.unsupported_here("parenthesized join"));
            }
            self.next();
            let query = self.query()?;
            self.expect(TokenKind::RParen)?;
            let alias = match self.opt_alias()? {
                Some(a) => a,
                None => return Err(self.expected("alias for subquery in FROM")),
            };
            if self.peek().kind == TokenKind::LParen {
                return Err(self.unsupported_here("column alias list"));
            }
            return Ok(TableRef::Derived {
                query: Box::new(query),
                alias,
            });
        }
        let name = self.object_name()?;
        if self.is_kw("tablesample") {
            return Err(self.unsupported_here("TABLESAMPLE"));
        }
        let alias = self.opt_alias()?;
        if alias.is_some() && self.peek().kind == TokenKind::LParen {
            return Err(self.unsupported_here("column alias list"));
        }
        Ok(TableRef::Table { name, alias })
    }

    fn ident(&mut self) -> Result<Ident, SqlError> {
        match self.peek().kind.clone() {
            TokenKind::Word(w) if !is_reserved(&w) => {
                self.next();
                Ok(Ident::new(w))
            }
            TokenKind::QuotedIdent(w) => {
                self.next();
                Ok(Ident::quoted(w))
            }
            _ => Err(self.expected("identifier")),
        }
    }

    fn object_name(&mut self) -> Result<ObjectName, SqlError> {
        let mut parts = vec![self.ident()?];
        while self.peek().kind == TokenKind::Dot {
            self.next();
            parts.push(self.ident()?);
        }
        Ok(ObjectName(parts))
    }

    fn order_list(&mut self) -> Result<Vec<OrderByItem>, SqlError> {
        let mut items = Vec::new();
        loop {
            let expr = self.expr()?;
            let desc = if self.eat_kw("desc") {
                true
            } else {
                self.eat_kw("asc");
                false
            };
            let nulls_first = if self.eat_kw("nulls") {
                if self.eat_kw("first") {
                    Some(true)
                } else if self.eat_kw("last") {
                    Some(false)
                } else {
                    return Err(self.expected("FIRST or LAST"));
                }
            } else {
                None
            };
            items.push(OrderByItem {
                expr,
                desc,
                nulls_first,
            });
            if !self.eat(&TokenKind::Comma) {
                break;
            }
        }
        Ok(items)
    }

    // expression precedence, loosest first:
    // OR < AND < NOT < comparison/IS/IN/BETWEEN/LIKE < || < + - < * / % < unary
    pub(crate) fn expr(&mut self) -> Result<Expr, SqlError> {
        self.or_expr()
    }

    fn or_expr(&mut self) -> Result<Expr, SqlError> {
        let mut left = self.and_expr()?;
        while self.eat_kw("or") {
            let right = self.and_expr()?;
            left = Expr::binary(BinaryOp::Or, left, right);
        }
        Ok(left)
    }

    fn and_expr(&mut self) -> Result<Expr, SqlError> {
        let mut left = self.not_expr()?;
        while self.eat_kw("and") {
            let right = self.not_expr()?;
            left = Expr::binary(BinaryOp::And, left, right);
        }
        Ok(left)
    }

    fn not_expr(&mut self) -> Result<Expr, SqlError> {
        if self.is_kw("not") && !self.is_kw_at(1, "exists") {
            self.next();
            let inner = self.not_expr()?;
            return Ok(Expr::Unary {
                op: UnaryOp::Not,
                expr: Box::new(inner),
            });
        }
        self.comparison()
    }

    fn comparison(&mut self) -> Result<Expr, SqlError> {
        let mut left = self.concat_expr()?;
        loop {
            let op = match self.peek().kind {
                TokenKind::Eq => Some(BinaryOp::Eq),
                TokenKind::NotEq => Some(BinaryOp::NotEq),
                TokenKind::Lt => Some(BinaryOp::Lt),
                TokenKind::LtEq => Some(BinaryOp::LtEq),
                TokenKind::Gt => Some(BinaryOp::Gt),
                TokenKind::GtEq => Some(BinaryOp::GtEq),
                _ => None,
            };
            if let Some(op) = op {
                self.next();
                if self.is_kw("any") || self.is_kw("all") || self.is_kw("some") {
                    return Err(self.unsupported_here("quantified comparison"));
                }
                let right = self.concat_expr()?;
                left = Expr::binary(op, left, right);
                continue;
            }
            if self.is_kw("is") {
                self.next();
                let negated = self.eat_kw("not");
                if self.is_kw("distinct") {
                    return Err(self.unsupported_here("IS DISTINCT FROM"));
                }
                self.expect_kw("null")?;
                left = Expr::IsNull {
                    expr: Box::new(left),
                    negated,
                };
                continue;
            }
            let negated = self.is_kw("not")
                && (self.is_kw_at(1, "in") || self.is_kw_at(1, "between") || self.is_kw_at(1, "like"));
            if negated {
                self.next();
            }
            if self.eat_kw("in") {
                self.expect(TokenKind::LParen)?;
                if self.starts_query_at(0) {
                    let q = self.query()?;
                    self.expect(TokenKind::RParen)?;
                    left = Expr::InSubquery {
                        expr: Box::new(left),
                        query: Box::new(q),
                        negated,
                    };
                } else {
                    let mut list = Vec::new();
                    loop {
                        list.push(self.expr()?);
                        if !self.eat(&TokenKind::Comma) {
                            break;
                        }
                    }
                    self.expect(TokenKind::RParen)?;
                    left = Expr::InList {
                        expr: Box::new(left),
                        list,
                        negated,
                    };
                }
                continue;
            }
            if self.eat_kw("between") {
                let low = self.concat_expr()?;
                self.expect_kw("and")?;
                let high = self.concat_expr()?;
                left = Expr::Between {
                    expr: Box::new(left),
                    low: Box::new(low),
                    high: Box::new(high),
                    negated,
                };
                continue;
            }
            if self.eat_kw("like") {
                let pattern = self.concat_expr()?;
                if self.is_kw("escape") {
                    return Err(self.unsupported_here("LIKE ... ESCAPE"));
                }
                left = Expr::Like {
                    expr: Box::new(left),
                    pattern: Box::new(pattern),
                    negated,
                };
                continue;
            }
            break;
        }
        Ok(left)
    }

    fn concat_expr(&mut self) -> Result<Expr, SqlError> {
        let mut left = self.additive()?;
        while self.eat(&TokenKind::Concat) {
            let right = self.additive()?;
            left = Expr::binary(BinaryOp::Concat, left, right);
        }
        Ok(left)
    }

    fn additive(&mut self) -> Result<Expr, SqlError> {
        let mut left = self.multiplicative()?;
        loop {
            let op = match self.peek().kind {
                TokenKind::Plus => BinaryOp::Plus,
                TokenKind::Minus => BinaryOp::Minus,
                _ => break,
            };
            self.next();
            let right = self.multiplicative()?;
            left = Expr::binary(op, left, right);
        }
        Ok(left)
    }

    fn multiplicative(&mut self) -> Result<Expr, SqlError> {
        let mut left = self.unary()?;
        loop {
            let op = match self.peek().kind {
                TokenKind::Star => BinaryOp::Multiply,
                TokenKind::Slash => BinaryOp::Divide,
                TokenKind::Percent => BinaryOp::Modulo,
                _ => break,
            };
            self.next();
            let right = self.unary()?;
            left = Expr::binary(op, left, right);
        }
        Ok(left)
    }

    fn unary(&mut self) -> Result<Expr, SqlError> {
        if self.eat(&TokenKind::Minus) {
            let inner = self.unary()?;
            return Ok(Expr::Unary {
                op: UnaryOp::Neg,
                expr: Box::new(inner),
            });
        }
        if self.eat(&TokenKind::Plus) {
            return self.unary();
        }
        let e = self.primary()?;
        if self.peek().kind == TokenKind::LBracket {
            return Err(self.unsupported_here("subscript operator"));
        }
        Ok(e)
    }

    fn primary(&mut self) -> Result<Expr, SqlError> {
        let t = self.peek().clone();
        match t.kind {
            TokenKind::Int(i) => {
                self.next();
                Ok(Expr::Literal(Value::Int(i)))
            }
            TokenKind::Float(f) => {
                self.next();
                Ok(Expr::Literal(Value::Float(f)))
            }
            TokenKind::Str(s) => {
                self.next();
                Ok(Expr::Literal(Value::Str(s)))
            }
            TokenKind::LParen => {
                self.next();
                if self.starts_query_at(0) {
                    let q = self.query()?;
                    self.expect(TokenKind::RParen)?;
                    return Ok(Expr::Subquery(Box::new(q)));
                }
                let e = self.expr()?;
                if self.peek().kind == TokenKind::Comma {
                    return Err(self.unsupported_here("row constructor"));
                }
                self.expect(TokenKind::RParen)?;
                Ok(e)
            }
            TokenKind::QuotedIdent(_) => self.column_or_function(),
            TokenKind::Word(ref w) => {
                let lw = w.to_ascii_lowercase();
                match lw.as_str() {
                    "null" => {
                        self.next();
                        Ok(Expr::Literal(Value::Null))
                    }
                    "true" => {
                        self.next();
                        Ok(Expr::Literal(Value::Bool(true)))
                    }
                    "false" => {
                        self.next();
                        Ok(Expr::Literal(Value::Bool(false)))
                    }
                    "cast" | "try_cast" => self.cast(),
                    "case" => self.case(),
                    "exists" => Err(self.unsupported_here("EXISTS")),
                    "not" => Err(self.unsupported_here("NOT EXISTS")),
                    "interval" | "date" | "timestamp" | "time"
                        if matches!(self.peek_at(1).kind, TokenKind::Str(_)) =>
                    {
                        Err(self.unsupported_here("typed literal"))
                    }
                    "array" if self.peek_at(1).kind == TokenKind::LBracket => {
                        Err(self.unsupported_here("array constructor"))
                    }
                    n if NILADIC_FUNCTIONS.contains(&n) => {
                        self.next();
                        if self.peek().kind == TokenKind::LParen && self.peek_at(1).kind == TokenKind::RParen {
                            self.next();
                            self.next();
                        }
                        Ok(Expr::Function(FunctionCall::new(n, vec![])))
                    }
                    _ if is_reserved(&lw) => Err(self.expected("expression")),
                    _ => self.column_or_function(),
                }
            }
            _ => Err(self.expected("expression")),
        }
    }

    fn cast(&mut self) -> Result<Expr, SqlError> {
        self.next();
        self.expect(TokenKind::LParen)?;
        let expr = self.expr()?;
        self.expect_kw("as")?;
        let t = self.peek().clone();
        let name = match &t.kind {
            TokenKind::Word(w) => w.clone(),
            _ => return Err(self.expected("type name")),
        };
        self.next();
        let mut full = name.clone();
        // VARCHAR(10), DECIMAL(10,2)
        if self.peek().kind == TokenKind::LParen {
            full.push('(');
            self.next();
            while !matches!(self.peek().kind, TokenKind::RParen | TokenKind::Eof) {
                self.next();
            }
            self.expect(TokenKind::RParen)?;
            full.push(')');
        }
        let ty: LogicalType = full
            .parse()
            .map_err(|_| SqlError::unsupported(&format!("type {}", name.to_ascii_uppercase()), t.line, t.column))?;
        self.expect(TokenKind::RParen)?;
        Ok(Expr::Cast {
            expr: Box::new(expr),
            ty,
        })
    }

    fn case(&mut self) -> Result<Expr, SqlError> {
        self.next();
        let operand = if self.is_kw("when") {
            None
        } else {
            Some(Box::new(self.expr()?))
        };
        let mut whens = Vec::new();
        while self.eat_kw("when") {
            let condition = self.expr()?;
            self.expect_kw("then")?;
            let result = self.expr()?;
            whens.push(WhenClause { condition, result });
        }
        if whens.is_empty() {
            return Err(self.expected("WHEN"));
        }
        let else_result = if self.eat_kw("else") {
            Some(Box::new(self.expr()?))
        } else {
            None
        };
        self.expect_kw("end")?;
        Ok(Expr::Case {
            operand,
            whens,
            else_result,
        })
    }

    fn column_or_function(&mut self) -> Result<Expr, SqlError> {
        let first = self.ident()?;
        if self.peek().kind == TokenKind::LParen {
            return self.function_call(first);
        }
        let mut parts = vec![first];
        while self.peek().kind == TokenKind::Dot {
            self.next();
            parts.push(self.ident()?);
        }
        if self.peek().kind == TokenKind::LParen {
            return Err(self.unsupported_here("qualified function name"));
        }
        Ok(Expr::Column(parts))
    }

    fn function_call(&mut self, name: Ident) -> Result<Expr, SqlError> {
        self.expect(TokenKind::LParen)?;
        let name = name.value.to_ascii_lowercase();
        let mut distinct = false;
        let args = if self.eat(&TokenKind::Star) {
            FunctionArgs::Star
        } else if self.peek().kind == TokenKind::RParen {
            FunctionArgs::List(vec![])
        } else {
            distinct = self.eat_kw("distinct");
            let mut args = Vec::new();
            loop {
                args.push(self.expr()?);
                if !self.eat(&TokenKind::Comma) {
                    break;
                }
            }
            FunctionArgs::List(args)
        };
        let mut order_by = Vec::new();
        if self.is_kw("order") {
            self.next();
            self.expect_kw("by")?;
            order_by = self.order_list()?;
        }
        self.expect(TokenKind::RParen)?;
        if self.is_kw("filter") {
            return Err(self.unsupported_here("aggregate FILTER clause"));
        }
        if self.is_kw("ignore") || self.is_kw("respect") {
            return Err(self.unsupported_here("null treatment clause"));
        }
        let over = if self.eat_kw("over") {
            Some(self.window_spec()?)
        } else {
            None
        };
        Ok(Expr::Function(FunctionCall {
            name,
            args,
            distinct,
            order_by,
            over,
        }))
    }

    fn window_spec(&mut self) -> Result<WindowSpec, SqlError> {
        if !matches!(self.peek().kind, TokenKind::LParen) {
            return Err(self.unsupported_here("named window reference"));
        }
        self.next();
        let mut spec = WindowSpec::default();
        if self.is_kw("partition") {
            self.next();
            self.expect_kw("by")?;
            loop {
                spec.partition_by.push(self.expr()?);
                if !self.eat(&TokenKind::Comma) {
                    break;
                }
            }
        }
        if self.is_kw("order") {
            self.next();
            self.expect_kw("by")?;
            spec.order_by = self.order_list()?;
        }
        if self.is_kw("rows") || self.is_kw("range") || self.is_kw("groups") {
            return Err(self.unsupported_here("window frame clause"));
        }
        self.expect(TokenKind::RParen)?;
        Ok(spec)
    }
}

fn is_word(kind: &TokenKind, kw: &str) -> bool {
    matches!(kind, TokenKind::Word(w) if w.eq_ignore_ascii_case(kw))
}

pub(crate) fn is_reserved(word: &str) -> bool {
    let lw = word.to_ascii_lowercase();
    RESERVED.contains(&lw.as_str())
}
