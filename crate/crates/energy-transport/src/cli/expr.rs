//! Minimal arithmetic expressions over `x` for closed-form initial
//! conditions.
//!
//! Grammar: `+ - * / ^` with the usual precedence (`^` right-associative,
//! binding tighter than unary minus), functions `exp`, `sin`, `cos`, `abs`,
//! numeric literals, parentheses, and the variable `x`. A top-level input is
//! a `;`-separated list of pieces, each optionally guarded by an interval:
//!
//! ```text
//! [0, 0.5]: exp(-48*x^2); (0.5, 1]: exp(-48*(x-1)^2)
//! ```
//!
//! Bracket shape picks closed (`[`, `]`) or open (`(`, `)`) interval ends; a
//! piece without an interval matches everywhere. The first matching piece
//! wins.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("unexpected character '{0}' at byte {1}")]
    UnexpectedChar(char, usize),
    #[error("malformed number at byte {0}")]
    BadNumber(usize),
    #[error("unknown function '{0}'")]
    UnknownFunction(String),
    #[error("unexpected end of expression")]
    UnexpectedEnd,
    #[error("expected {expected}, found {found}")]
    Expected {
        expected: &'static str,
        found: String,
    },
    #[error("trailing input starting at token {0}")]
    TrailingInput(String),
    #[error("empty expression")]
    Empty,
    #[error("no piece covers x = {0}")]
    NoPieceMatches(f64),
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Colon,
    Semi,
}

fn token_name(t: &Token) -> String {
    match t {
        Token::Num(v) => format!("number {v}"),
        Token::Ident(s) => format!("identifier '{s}'"),
        Token::Plus => "'+'".into(),
        Token::Minus => "'-'".into(),
        Token::Star => "'*'".into(),
        Token::Slash => "'/'".into(),
        Token::Caret => "'^'".into(),
        Token::LParen => "'('".into(),
        Token::RParen => "')'".into(),
        Token::LBracket => "'['".into(),
        Token::RBracket => "']'".into(),
        Token::Comma => "','".into(),
        Token::Colon => "':'".into(),
        Token::Semi => "';'".into(),
    }
}

fn lex(src: &str) -> Result<Vec<Token>, ExprError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        match c {
            ' ' | '\t' | '\n' | '\r' => i += 1,
            '+' => {
                out.push(Token::Plus);
                i += 1;
            }
            '-' => {
                out.push(Token::Minus);
                i += 1;
            }
            '*' => {
                out.push(Token::Star);
                i += 1;
            }
            '/' => {
                out.push(Token::Slash);
                i += 1;
            }
            '^' => {
                out.push(Token::Caret);
                i += 1;
            }
            '(' => {
                out.push(Token::LParen);
                i += 1;
            }
            ')' => {
                out.push(Token::RParen);
                i += 1;
            }
            '[' => {
                out.push(Token::LBracket);
                i += 1;
            }
            ']' => {
                out.push(Token::RBracket);
                i += 1;
            }
            ',' => {
                out.push(Token::Comma);
                i += 1;
            }
            ':' => {
                out.push(Token::Colon);
                i += 1;
            }
            ';' => {
                out.push(Token::Semi);
                i += 1;
            }
            '0'..='9' | '.' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                    i += 1;
                }
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    i += 1;
                    if i < bytes.len() && (bytes[i] == b'+' || bytes[i] == b'-') {
                        i += 1;
                    }
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
                let text = &src[start..i];
                let value: f64 = text.parse().map_err(|_| ExprError::BadNumber(start))?;
                out.push(Token::Num(value));
            }
            'a'..='z' | 'A'..='Z' | '_' => {
                let start = i;
                while i < bytes.len()
                    && ((bytes[i] as char).is_ascii_alphanumeric() || bytes[i] == b'_')
                {
                    i += 1;
                }
                out.push(Token::Ident(src[start..i].to_string()));
            }
            other => return Err(ExprError::UnexpectedChar(other, i)),
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
enum Expr {
    Num(f64),
    Var,
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Exp(Box<Expr>),
    Sin(Box<Expr>),
    Cos(Box<Expr>),
    Abs(Box<Expr>),
}

impl Expr {
    fn eval(&self, x: f64) -> f64 {
        match self {
            Expr::Num(v) => *v,
            Expr::Var => x,
            Expr::Neg(e) => -e.eval(x),
            Expr::Add(a, b) => a.eval(x) + b.eval(x),
            Expr::Sub(a, b) => a.eval(x) - b.eval(x),
            Expr::Mul(a, b) => a.eval(x) * b.eval(x),
            Expr::Div(a, b) => a.eval(x) / b.eval(x),
            Expr::Pow(a, b) => a.eval(x).powf(b.eval(x)),
            Expr::Exp(e) => e.eval(x).exp(),
            Expr::Sin(e) => e.eval(x).sin(),
            Expr::Cos(e) => e.eval(x).cos(),
            Expr::Abs(e) => e.eval(x).abs(),
        }
    }
}

/// Interval guard with per-end openness.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Interval {
    lo: f64,
    hi: f64,
    lo_closed: bool,
    hi_closed: bool,
}

impl Interval {
    fn contains(&self, x: f64) -> bool {
        let above = if self.lo_closed {
            x >= self.lo
        } else {
            x > self.lo
        };
        let below = if self.hi_closed {
            x <= self.hi
        } else {
            x < self.hi
        };
        above && below
    }
}

/// A parsed piecewise expression of one variable.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseExpr {
    pieces: Vec<(Option<Interval>, Expr)>,
}

impl PiecewiseExpr {
    /// Evaluate at `x`; errors when no piece matches.
    pub fn eval(&self, x: f64) -> Result<f64, ExprError> {
        for (guard, expr) in &self.pieces {
            let matches = guard.is_none_or(|iv| iv.contains(x));
            if matches {
                return Ok(expr.eval(x));
            }
        }
        Err(ExprError::NoPieceMatches(x))
    }
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Result<Token, ExprError> {
        let t = self
            .tokens
            .get(self.pos)
            .cloned()
            .ok_or(ExprError::UnexpectedEnd)?;
        self.pos += 1;
        Ok(t)
    }

    fn expect(&mut self, want: &Token, name: &'static str) -> Result<(), ExprError> {
        let t = self.next()?;
        if &t != want {
            return Err(ExprError::Expected {
                expected: name,
                found: token_name(&t),
            });
        }
        Ok(())
    }

    fn number(&mut self) -> Result<f64, ExprError> {
        // signed numeric literal for interval bounds
        match self.next()? {
            Token::Num(v) => Ok(v),
            Token::Minus => match self.next()? {
                Token::Num(v) => Ok(-v),
                t => Err(ExprError::Expected {
                    expected: "number",
                    found: token_name(&t),
                }),
            },
            t => Err(ExprError::Expected {
                expected: "number",
                found: token_name(&t),
            }),
        }
    }

    fn expr(&mut self) -> Result<Expr, ExprError> {
        let mut acc = self.term()?;
        loop {
            match self.peek() {
                Some(Token::Plus) => {
                    self.pos += 1;
                    acc = Expr::Add(Box::new(acc), Box::new(self.term()?));
                }
                Some(Token::Minus) => {
                    self.pos += 1;
                    acc = Expr::Sub(Box::new(acc), Box::new(self.term()?));
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ExprError> {
        let mut acc = self.unary()?;
        loop {
            match self.peek() {
                Some(Token::Star) => {
                    self.pos += 1;
                    acc = Expr::Mul(Box::new(acc), Box::new(self.unary()?));
                }
                Some(Token::Slash) => {
                    self.pos += 1;
                    acc = Expr::Div(Box::new(acc), Box::new(self.unary()?));
                }
                _ => return Ok(acc),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, ExprError> {
        if matches!(self.peek(), Some(Token::Minus)) {
            self.pos += 1;
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ExprError> {
        let base = self.primary()?;
        if matches!(self.peek(), Some(Token::Caret)) {
            self.pos += 1;
            // right-associative; exponent may itself carry a unary minus
            let exponent = self.unary()?;
            return Ok(Expr::Pow(Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr, ExprError> {
        match self.next()? {
            Token::Num(v) => Ok(Expr::Num(v)),
            Token::Ident(name) => {
                if name == "x" {
                    return Ok(Expr::Var);
                }
                self.expect(&Token::LParen, "'(' after function name")?;
                let arg = Box::new(self.expr()?);
                self.expect(&Token::RParen, "')'")?;
                match name.as_str() {
                    "exp" => Ok(Expr::Exp(arg)),
                    "sin" => Ok(Expr::Sin(arg)),
                    "cos" => Ok(Expr::Cos(arg)),
                    "abs" => Ok(Expr::Abs(arg)),
                    _ => Err(ExprError::UnknownFunction(name)),
                }
            }
            Token::LParen => {
                let inner = self.expr()?;
                self.expect(&Token::RParen, "')'")?;
                Ok(inner)
            }
            t => Err(ExprError::Expected {
                expected: "number, 'x', function, or '('",
                found: token_name(&t),
            }),
        }
    }

    fn interval(&mut self) -> Result<Interval, ExprError> {
        let lo_closed = match self.next()? {
            Token::LBracket => true,
            Token::LParen => false,
            t => {
                return Err(ExprError::Expected {
                    expected: "'[' or '('",
                    found: token_name(&t),
                })
            }
        };
        let lo = self.number()?;
        self.expect(&Token::Comma, "','")?;
        let hi = self.number()?;
        let hi_closed = match self.next()? {
            Token::RBracket => true,
            Token::RParen => false,
            t => {
                return Err(ExprError::Expected {
                    expected: "']' or ')'",
                    found: token_name(&t),
                })
            }
        };
        Ok(Interval {
            lo,
            hi,
            lo_closed,
            hi_closed,
        })
    }

    fn piece(&mut self) -> Result<(Option<Interval>, Expr), ExprError> {
        // an interval guard starts with '[' or '(' and is followed by ':';
        // disambiguate from a parenthesized expression by trial parse
        let mark = self.pos;
        if matches!(self.peek(), Some(Token::LBracket | Token::LParen)) {
            if let Ok(iv) = self.interval() {
                if matches!(self.peek(), Some(Token::Colon)) {
                    self.pos += 1;
                    return Ok((Some(iv), self.expr()?));
                }
            }
            self.pos = mark;
        }
        Ok((None, self.expr()?))
    }
}

/// Parse a piecewise expression.
pub fn parse(src: &str) -> Result<PiecewiseExpr, ExprError> {
    let tokens = lex(src)?;
    if tokens.is_empty() {
        return Err(ExprError::Empty);
    }
    let mut parser = Parser { tokens, pos: 0 };
    let mut pieces = vec![parser.piece()?];
    while matches!(parser.peek(), Some(Token::Semi)) {
        parser.pos += 1;
        pieces.push(parser.piece()?);
    }
    if let Some(t) = parser.peek() {
        return Err(ExprError::TrailingInput(token_name(t)));
    }
    Ok(PiecewiseExpr { pieces })
}
