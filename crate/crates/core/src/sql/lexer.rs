use super::SqlError;

#[derive(Debug, Clone, PartialEq)]
pub enum TokenKind {
    /// Unquoted words keep their original spelling; keywords are matched
    /// case-insensitively by the parser.
    Word(String),
    QuotedIdent(String),
    Int(i64),
    Float(f64),
    Str(String),
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Dot,
    Semicolon,
    Star,
    Plus,
    Minus,
    Slash,
    Percent,
    Concat,
    Eq,
    NotEq,
    Lt,
    LtEq,
    Gt,
    GtEq,
    Eof,
}

impl TokenKind {
    pub fn describe(&self) -> String {
        match self {
            TokenKind::Word(w) => format!("'{w}'"),
            TokenKind::QuotedIdent(w) => format!("\"{w}\""),
            TokenKind::Int(i) => i.to_string(),
            TokenKind::Float(f) => f.to_string(),
            TokenKind::Str(s) => format!("string '{s}'"),
            TokenKind::Eof => "end of input".to_string(),
            other => format!("'{}'", other.symbol()),
        }
    }

    fn symbol(&self) -> &'static str {
        match self {
            TokenKind::LParen => "(",
            TokenKind::RParen => ")",
            TokenKind::LBracket => "[",
            TokenKind::RBracket => "]",
            TokenKind::Comma => ",",
            TokenKind::Dot => ".",
            TokenKind::Semicolon => ";",
            TokenKind::Star => "*",
            TokenKind::Plus => "+",
            TokenKind::Minus => "-",
            TokenKind::Slash => "/",
            TokenKind::Percent => "%",
            TokenKind::Concat => "||",
            TokenKind::Eq => "=",
            TokenKind::NotEq => "<>",
            TokenKind::Lt => "<",
            TokenKind::LtEq => "<=",
            TokenKind::Gt => ">",
            TokenKind::GtEq => ">=",
            _ => "?",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub kind: TokenKind,
    pub line: usize,
    pub column: usize,
}

struct Cursor<'a> {
    chars: std::iter::Peekable<std::str::CharIndices<'a>>,
    src: &'a str,
    line: usize,
    column: usize,
}

impl<'a> Cursor<'a> {
    fn peek(&mut self) -> Option<char> {
        self.chars.peek().map(|&(_, c)| c)
    }

    fn peek2(&self) -> Option<char> {
        let mut it = self.chars.clone();
        it.next();
        it.next().map(|(_, c)| c)
    }

    fn pos(&mut self) -> usize {
        self.chars.peek().map(|&(i, _)| i).unwrap_or(self.src.len())
    }

    fn bump(&mut self) -> Option<char> {
        let (_, c) = self.chars.next()?;
        if c == '\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        Some(c)
    }
}

pub fn tokenize(src: &str) -> Result<Vec<Token>, SqlError> {
    let mut cur = Cursor {
        chars: src.char_indices().peekable(),
        src,
        line: 1,
        column: 1,
    };
    let mut out = Vec::new();
    loop {
        // whitespace and comments
        loop {
            match cur.peek() {
                Some(c) if c.is_whitespace() => {
                    cur.bump();
                }
                Some('-') if cur.peek2() == Some('-') => {
                    while let Some(c) = cur.peek() {
                        if c == '\n' {
                            break;
                        }
                        cur.bump();
                    }
                }
                Some('/') if cur.peek2() == Some('*') => {
                    let (line, column) = (cur.line, cur.column);
                    cur.bump();
                    cur.bump();
                    let mut closed = false;
                    while let Some(c) = cur.bump() {
                        if c == '*' && cur.peek() == Some('/') {
                            cur.bump();
                            closed = true;
                            break;
                        }
                    }
                    if !closed {
                        return Err(SqlError::syntax(line, column, "unterminated block comment", None));
                    }
                }
                _ => break,
            }
        }
        let (line, column) = (cur.line, cur.column);
        let Some(c) = cur.peek() else {
            out.push(Token {
                kind: TokenKind::Eof,
                line,
                column,
            });
            return Ok(out);
        };
        let kind = match c {
            c if c.is_alphabetic() || c == '_' => {
                let start = cur.pos();
                while matches!(cur.peek(), Some(c) if c.is_alphanumeric() || c == '_' || c == '$') {
                    cur.bump();
                }
                TokenKind::Word(src[start..cur.pos()].to_string())
            }
            c if c.is_ascii_digit() || (c == '.' && matches!(cur.peek2(), Some(d) if d.is_ascii_digit())) => {
                lex_number(&mut cur, line, column)?
            }
            '\'' => {
                cur.bump();
                let mut s = String::new();
                loop {
                    match cur.bump() {
                        Some('\'') if cur.peek() == Some('\'') => {
                            cur.bump();
                            s.push('\'');
                        }
                        Some('\'') => break,
                        Some(c) => s.push(c),
                        None => {
                            return Err(SqlError::syntax(line, column, "unterminated string literal", None))
                        }
                    }
                }
                TokenKind::Str(s)
            }
            '"' | '`' => {
                let quote = c;
                cur.bump();
                let mut s = String::new();
                loop {
                    match cur.bump() {
                        Some(q) if q == quote && cur.peek() == Some(quote) => {
                            cur.bump();
                            s.push(quote);
                        }
                        Some(q) if q == quote => break,
                        Some(c) => s.push(c),
                        None => {
                            return Err(SqlError::syntax(line, column, "unterminated quoted identifier", None))
                        }
                    }
                }
                if s.is_empty() {
                    return Err(SqlError::syntax(line, column, "empty quoted identifier", None));
                }
                TokenKind::QuotedIdent(s)
            }
            _ => {
                cur.bump();
                match c {
                    '(' => TokenKind::LParen,
                    ')' => TokenKind::RParen,
                    '[' => TokenKind::LBracket,
                    ']' => TokenKind::RBracket,
                    ',' => TokenKind::Comma,
                    '.' => TokenKind::Dot,
                    ';' => TokenKind::Semicolon,
                    '*' => TokenKind::Star,
                    '+' => TokenKind::Plus,
                    '-' => TokenKind::Minus,
                    '/' => TokenKind::Slash,
                    '%' => TokenKind::Percent,
                    '=' => TokenKind::Eq,
                    '|' if cur.peek() == Some('|') => {
                        cur.bump();
                        TokenKind::Concat
                    }
                    '!' if cur.peek() == Some('=') => {
                        cur.bump();
                        TokenKind::NotEq
                    }
                    '<' => match cur.peek() {
                        Some('=') => {
                            cur.bump();
                            TokenKind::LtEq
                        }
                        Some('>') => {
                            cur.bump();
                            TokenKind::NotEq
                        }
                        _ => TokenKind::Lt,
                    },
                    '>' => {
                        if cur.peek() == Some('=') {
                            cur.bump();
                            TokenKind::GtEq
                        } else {
                            TokenKind::Gt
                        }
                    }
                    other => {
                        return Err(SqlError::syntax(
                            line,
                            column,
                            format!("unexpected character '{other}'"),
                            None,
                        ))
                    }
                }
            }
        };
        out.push(Token { kind, line, column });
    }
}

fn lex_number(cur: &mut Cursor<'_>, line: usize, column: usize) -> Result<TokenKind, SqlError> {
    let start = cur.pos();
    let mut is_float = false;
    while matches!(cur.peek(), Some(c) if c.is_ascii_digit()) {
        cur.bump();
    }
    if cur.peek() == Some('.') {
        is_float = true;
        cur.bump();
        while matches!(cur.peek(), Some(c) if c.is_ascii_digit()) {
            cur.bump();
        }
    }
    if matches!(cur.peek(), Some('e' | 'E')) {
        let next = cur.peek2();
        let sign_then_digit = matches!(next, Some('+' | '-')) && {
            let mut it = cur.chars.clone();
            it.next();
            it.next();
            matches!(it.next(), Some((_, d)) if d.is_ascii_digit())
        };
        if matches!(next, Some(d) if d.is_ascii_digit()) || sign_then_digit {
            is_float = true;
            cur.bump();
            if matches!(cur.peek(), Some('+' | '-')) {
                cur.bump();
            }
            while matches!(cur.peek(), Some(c) if c.is_ascii_digit()) {
                cur.bump();
            }
        }
    }
    let text = &cur.src[start..cur.pos()];
    if matches!(cur.peek(), Some(c) if c.is_alphabetic() || c == '_') {
        return Err(SqlError::syntax(
            line,
            column,
            format!("malformed number '{text}{}'", cur.peek().unwrap_or(' ')),
            None,
        ));
    }
    if !is_float {
        if let Ok(i) = text.parse::<i64>() {
            return Ok(TokenKind::Int(i));
        }
    }
    text.parse::<f64>()
        .map(TokenKind::Float)
        .map_err(|_| SqlError::syntax(line, column, format!("malformed number '{text}'"), None))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(src: &str) -> Vec<TokenKind> {
        tokenize(src).unwrap().into_iter().map(|t| t.kind).collect()
    }

    #[test]
    fn lexes_operators_and_literals() {
        assert_eq!(
            kinds("a<>b != 1.5e3 'it''s' \"Mixed\" || -- c\n.5"),
            vec![
                TokenKind::Word("a".into()),
                TokenKind::NotEq,
                TokenKind::Word("b".into()),
                TokenKind::NotEq,
                TokenKind::Float(1500.0),
                TokenKind::Str("it's".into()),
                TokenKind::QuotedIdent("Mixed".into()),
                TokenKind::Concat,
                TokenKind::Float(0.5),
                TokenKind::Eof,
            ]
        );
    }

    #[test]
    fn tracks_positions() {
        let toks = tokenize("SELECT\n  x /* c */ FROM t").unwrap();
        assert_eq!((toks[1].line, toks[1].column), (2, 3));
        assert_eq!((toks[2].line, toks[2].column), (2, 13));
    }

    #[test]
    fn rejects_unterminated() {
        assert!(tokenize("'abc").is_err());
        assert!(tokenize("/* x").is_err());
        assert!(tokenize("12abc").is_err());
    }

    #[test]
    fn big_integers_become_floats() {
        assert_eq!(kinds("99999999999999999999")[0], TokenKind::Float(1e20));
    }
}
