//! Recursive-descent parser for map definitions.
//!
//! ```text
//! program  = "map" "(" ident { "," ident } ")" [ "on" clause { "," clause } ]
//!            "->" "(" expr { "," expr } ")" ;
//! clause   = ( ident | "all" ) "in" "(" bound "," bound ")" ;
//! bound    = [ "+" | "-" ] ( number | "inf" ) ;
//! expr     = term { ( "+" | "-" ) term } ;
//! term     = unary { ( "*" | "/" ) unary } ;
//! unary    = "-" unary | power ;
//! power    = primary [ "^" [ "-" ] integer ] ;
//! primary  = number | "pi" | ident | func "(" expr ")" | "(" expr ")" ;
//! func     = "sin" | "cos" | "exp" | "log" | "sqrt" ;
//! ```
//!
//! `#` starts a comment that runs to the end of the line.

use std::fmt;

use crate::error::{Error, Result};

use super::domain::{BoxDomain, Interval};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
}

impl Func {
    fn from_name(s: &str) -> Option<Func> {
        Some(match s {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
        }
    }
}

/// Parsed expression tree. Variables are referenced by position.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(usize),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, i32),
    Call(Func, Box<Expr>),
}

/// Parsed map definition before compilation.
#[derive(Debug, Clone, PartialEq)]
pub struct MapAst {
    pub vars: Vec<String>,
    pub domain: BoxDomain,
    pub outputs: Vec<Expr>,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Num(f64),
    LParen,
    RParen,
    Comma,
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    Arrow,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Num(n) => write!(f, "number {n}"),
            Tok::LParen => f.write_str("`(`"),
            Tok::RParen => f.write_str("`)`"),
            Tok::Comma => f.write_str("`,`"),
            Tok::Plus => f.write_str("`+`"),
            Tok::Minus => f.write_str("`-`"),
            Tok::Star => f.write_str("`*`"),
            Tok::Slash => f.write_str("`/`"),
            Tok::Caret => f.write_str("`^`"),
            Tok::Arrow => f.write_str("`->`"),
            Tok::Eof => f.write_str("end of input"),
        }
    }
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    column: usize,
    // raw text for numbers, used to reject non-integer exponents
    text: String,
}

fn lex(src: &str) -> Result<Vec<Spanned>> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    while i < chars.len() {
        let c = chars[i];
        let (start_line, start_col) = (line, col);
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '#' {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let single = match c {
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            ',' => Some(Tok::Comma),
            '+' => Some(Tok::Plus),
            '*' => Some(Tok::Star),
            '/' => Some(Tok::Slash),
            '^' => Some(Tok::Caret),
            _ => None,
        };
        if let Some(tok) = single {
            out.push(Spanned {
                tok,
                line,
                column: col,
                text: c.to_string(),
            });
            i += 1;
            col += 1;
            continue;
        }
        if c == '-' {
            if chars.get(i + 1) == Some(&'>') {
                out.push(Spanned {
                    tok: Tok::Arrow,
                    line,
                    column: col,
                    text: "->".into(),
                });
                i += 2;
                col += 2;
            } else {
                out.push(Spanned {
                    tok: Tok::Minus,
                    line,
                    column: col,
                    text: "-".into(),
                });
                i += 1;
                col += 1;
            }
            continue;
        }
        if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    while j < chars.len() && chars[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                }
            }
            let text: String = chars[start..i].iter().collect();
            let value: f64 = text.parse().map_err(|_| Error::Syntax {
                line: start_line,
                column: start_col,
                message: format!("malformed number `{text}`"),
            })?;
            col += i - start;
            out.push(Spanned {
                tok: Tok::Num(value),
                line: start_line,
                column: start_col,
                text,
            });
            continue;
        }
        if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            let text: String = chars[start..i].iter().collect();
            col += i - start;
            out.push(Spanned {
                tok: Tok::Ident(text.clone()),
                line: start_line,
                column: start_col,
                text,
            });
            continue;
        }
        return Err(Error::Syntax {
            line,
            column: col,
            message: format!("unexpected character `{c}`"),
        });
    }
    out.push(Spanned {
        tok: Tok::Eof,
        line,
        column: col,
        text: String::new(),
    });
    Ok(out)
}

const RESERVED: &[&str] = &[
    "map", "on", "in", "all", "inf", "pi", "sin", "cos", "exp", "log", "sqrt",
];

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
    vars: Vec<String>,
}

impl Parser {
    fn peek(&self) -> &Spanned {
        &self.toks[self.pos]
    }

    fn next(&mut self) -> Spanned {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error_at(&self, t: &Spanned, message: impl Into<String>) -> Error {
        Error::Syntax {
            line: t.line,
            column: t.column,
            message: message.into(),
        }
    }

    fn expect(&mut self, want: Tok, context: &str) -> Result<Spanned> {
        let t = self.next();
        if t.tok == want {
            Ok(t)
        } else {
            Err(self.error_at(&t, format!("expected {want} {context}, found {}", t.tok)))
        }
    }

    fn keyword(&mut self, kw: &str) -> Result<()> {
        let t = self.next();
        match &t.tok {
            Tok::Ident(s) if s == kw => Ok(()),
            other => Err(self.error_at(&t, format!("expected `{kw}`, found {other}"))),
        }
    }

    fn at_keyword(&self, kw: &str) -> bool {
        matches!(&self.peek().tok, Tok::Ident(s) if s == kw)
    }

    fn program(&mut self) -> Result<MapAst> {
        self.keyword("map")?;
        let open = self.expect(Tok::LParen, "to open the variable list")?;
        loop {
            let t = self.next();
            match &t.tok {
                Tok::Ident(name) => {
                    if RESERVED.contains(&name.as_str()) {
                        return Err(self.error_at(&t, format!("`{name}` is reserved")));
                    }
                    if self.vars.contains(name) {
                        return Err(self.error_at(&t, format!("duplicate variable `{name}`")));
                    }
                    self.vars.push(name.clone());
                }
                other => {
                    return Err(self.error_at(&t, format!("expected variable name, found {other}")))
                }
            }
            let t = self.next();
            match &t.tok {
                Tok::Comma => continue,
                Tok::RParen => break,
                other => {
                    return Err(self.error_at(
                        &open,
                        format!("unclosed `(` in variable list, found {other}"),
                    ))
                }
            }
        }
        let mut domain = BoxDomain::whole(self.vars.len());
        if self.at_keyword("on") {
            self.next();
            loop {
                self.clause(&mut domain)?;
                if self.peek().tok == Tok::Comma {
                    self.next();
                } else {
                    break;
                }
            }
        }
        self.expect(Tok::Arrow, "before the output list")?;
        let open = self.expect(Tok::LParen, "to open the output list")?;
        let mut outputs = Vec::new();
        loop {
            if self.peek().tok == Tok::Eof {
                return Err(self.error_at(&open, "unclosed `(` in output list"));
            }
            outputs.push(self.expr()?);
            let t = self.next();
            match &t.tok {
                Tok::Comma => continue,
                Tok::RParen => break,
                Tok::Eof => return Err(self.error_at(&open, "unclosed `(` in output list")),
                other => {
                    return Err(self.error_at(&t, format!("expected `,` or `)`, found {other}")))
                }
            }
        }
        let t = self.next();
        if t.tok != Tok::Eof {
            return Err(self.error_at(&t, format!("unexpected {} after map definition", t.tok)));
        }
        Ok(MapAst {
            vars: self.vars.clone(),
            domain,
            outputs,
        })
    }

    fn clause(&mut self, domain: &mut BoxDomain) -> Result<()> {
        let t = self.next();
        let target = match &t.tok {
            Tok::Ident(s) if s == "all" => None,
            Tok::Ident(s) => match self.vars.iter().position(|v| v == s) {
                Some(i) => Some(i),
                None => {
                    return Err(Error::UnknownIdentifier {
                        name: s.clone(),
                        line: t.line,
                        column: t.column,
                    })
                }
            },
            other => return Err(self.error_at(&t, format!("expected variable, found {other}"))),
        };
        self.keyword("in")?;
        let open = self.expect(Tok::LParen, "to open the interval")?;
        let lo = self.bound()?;
        self.expect(Tok::Comma, "between interval bounds")?;
        let hi = self.bound()?;
        self.expect(Tok::RParen, "to close the interval")?;
        let interval = Interval::open(lo, hi).map_err(|m| self.error_at(&open, m))?;
        match target {
            None => domain.intervals_mut().iter_mut().for_each(|iv| *iv = interval),
            Some(i) => domain.intervals_mut()[i] = interval,
        }
        Ok(())
    }

    fn bound(&mut self) -> Result<f64> {
        let mut sign = 1.0;
        match self.peek().tok {
            Tok::Minus => {
                self.next();
                sign = -1.0;
            }
            Tok::Plus => {
                self.next();
            }
            _ => {}
        }
        let t = self.next();
        match &t.tok {
            Tok::Num(v) => Ok(sign * v),
            Tok::Ident(s) if s == "inf" => Ok(sign * f64::INFINITY),
            other => Err(self.error_at(&t, format!("expected a bound, found {other}"))),
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            match self.peek().tok {
                Tok::Plus => {
                    self.next();
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Tok::Minus => {
                    self.next();
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek().tok {
                Tok::Star => {
                    self.next();
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
                }
                Tok::Slash => {
                    self.next();
                    lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.peek().tok == Tok::Minus {
            self.next();
            let inner = self.unary()?;
            // negative literals fold so printed programs re-parse identically
            return Ok(match inner {
                Expr::Num(v) => Expr::Num(-v),
                other => Expr::Neg(Box::new(other)),
            });
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.primary()?;
        if self.peek().tok != Tok::Caret {
            return Ok(base);
        }
        self.next();
        let mut sign = 1i64;
        if self.peek().tok == Tok::Minus {
            self.next();
            sign = -1;
        }
        let t = self.next();
        match &t.tok {
            Tok::Num(_) if t.text.chars().all(|c| c.is_ascii_digit()) => {
                let n: i64 = t
                    .text
                    .parse()
                    .map_err(|_| self.error_at(&t, "exponent out of range"))?;
                let n = i32::try_from(sign * n).map_err(|_| self.error_at(&t, "exponent out of range"))?;
                Ok(Expr::Pow(Box::new(base), n))
            }
            Tok::Num(_) => Err(self.error_at(&t, "exponents must be integers")),
            other => Err(self.error_at(&t, format!("expected integer exponent, found {other}"))),
        }
    }

    fn primary(&mut self) -> Result<Expr> {
        let t = self.next();
        match &t.tok {
            Tok::Num(v) => Ok(Expr::Num(*v)),
            Tok::LParen => {
                let e = self.expr()?;
                let close = self.next();
                match &close.tok {
                    Tok::RParen => Ok(e),
                    Tok::Eof => Err(self.error_at(&t, "unclosed `(`")),
                    other => Err(self.error_at(&close, format!("expected `)`, found {other}"))),
                }
            }
            Tok::Ident(name) => {
                if name == "pi" {
                    return Ok(Expr::Num(std::f64::consts::PI));
                }
                if let Some(f) = Func::from_name(name) {
                    let open = self.expect(Tok::LParen, &format!("after `{name}`"))?;
                    let arg = self.expr()?;
                    let close = self.next();
                    return match &close.tok {
                        Tok::RParen => Ok(Expr::Call(f, Box::new(arg))),
                        Tok::Eof => Err(self.error_at(&open, "unclosed `(`")),
                        other => {
                            Err(self.error_at(&close, format!("expected `)`, found {other}")))
                        }
                    };
                }
                match self.vars.iter().position(|v| v == name) {
                    Some(i) => Ok(Expr::Var(i)),
                    None => Err(Error::UnknownIdentifier {
                        name: name.clone(),
                        line: t.line,
                        column: t.column,
                    }),
                }
            }
            other => Err(self.error_at(&t, format!("expected an expression, found {other}"))),
        }
    }
}

/// Parses map source text into an expression tree.
pub fn parse_ast(src: &str) -> Result<MapAst> {
    let toks = lex(src)?;
    let mut p = Parser {
        toks,
        pos: 0,
        vars: Vec::new(),
    };
    p.program()
}

pub(crate) struct ExprDisplay<'a> {
    pub expr: &'a Expr,
    pub vars: &'a [String],
}

impl<'a> fmt::Display for ExprDisplay<'a> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sub = |e: &'a Expr| ExprDisplay {
            expr: e,
            vars: self.vars,
        };
        match self.expr {
            Expr::Num(v) => write_number(f, *v),
            Expr::Var(i) => f.write_str(&self.vars[*i]),
            Expr::Neg(a) => write!(f, "(-{})", sub(a)),
            Expr::Add(a, b) => write!(f, "({} + {})", sub(a), sub(b)),
            Expr::Sub(a, b) => write!(f, "({} - {})", sub(a), sub(b)),
            Expr::Mul(a, b) => write!(f, "({} * {})", sub(a), sub(b)),
            Expr::Div(a, b) => write!(f, "({} / {})", sub(a), sub(b)),
            Expr::Pow(a, n) => write!(f, "({})^{}", sub(a), n),
            Expr::Call(func, a) => write!(f, "{}({})", func.name(), sub(a)),
        }
    }
}

pub(crate) fn write_number(f: &mut fmt::Formatter<'_>, v: f64) -> fmt::Result {
    if v.is_infinite() {
        return f.write_str(if v > 0.0 { "inf" } else { "-inf" });
    }
    if v < 0.0 || (v == 0.0 && v.is_sign_negative()) {
        write!(f, "(-{:?})", -v)
    } else {
        write!(f, "{v:?}")
    }
}
