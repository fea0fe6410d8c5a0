//! Infix expressions over `x1..x4`.
//!
//! Grammar (whitespace-insensitive):
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := primary ('^' '-'? NUMBER)*
//! primary := NUMBER | 'pi' | VAR | FUNC '(' expr (',' expr)* ')' | '(' expr ')'
//! VAR     := 'x1' | 'x2' | 'x3' | 'x4'
//! FUNC    := sin | cos | tan | log | exp | sqrt | abs | norm2
//! ```
//!
//! `norm2(a, b, ...)` is the Euclidean norm of its arguments. Unary minus
//! binds looser than `^`, so `-x1^2` is `-(x1^2)`.

use std::fmt;

use crate::autodiff::{ExprGraph, Var};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Log,
    Exp,
    Sqrt,
    Abs,
    Norm2,
}

impl Func {
    fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tan" => Func::Tan,
            "log" => Func::Log,
            "exp" => Func::Exp,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            "norm2" => Func::Norm2,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Log => "log",
            Func::Exp => "exp",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
            Func::Norm2 => "norm2",
        }
    }

    fn unary(self, v: f64) -> f64 {
        match self {
            Func::Sin => v.sin(),
            Func::Cos => v.cos(),
            Func::Tan => v.tan(),
            Func::Log => v.ln(),
            Func::Exp => v.exp(),
            Func::Sqrt => v.sqrt(),
            Func::Abs => v.abs(),
            Func::Norm2 => v.abs(),
        }
    }
}

/// Parsed expression tree.
#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Num(f64),
    Pi,
    /// Zero-based coordinate index (`x1` is 0).
    Var(usize),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, f64),
    Call(Func, Vec<Expr>),
}

/// Syntax error sub-kinds.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SyntaxKind {
    Unexpected,
    UnknownIdentifier,
    Arity,
}

impl Expr {
    pub fn parse(text: &str) -> Result<Expr> {
        let tokens = tokenize(text)?;
        let mut p = Parser {
            tokens,
            pos: 0,
            end: text.len(),
        };
        let e = p.expr()?;
        match p.peek() {
            None => Ok(e),
            Some(t) => Err(syntax(t.offset, SyntaxKind::Unexpected, format!(
                "unexpected {}, expected an operator or end of input",
                t.kind.describe()
            ))),
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Expr::Num(v) => *v,
            Expr::Pi => std::f64::consts::PI,
            Expr::Var(i) => x[*i],
            Expr::Neg(a) => -a.eval(x),
            Expr::Bin(op, a, b) => {
                let (a, b) = (a.eval(x), b.eval(x));
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => a / b,
                }
            }
            Expr::Pow(a, c) => a.eval(x).powf(*c),
            Expr::Call(Func::Norm2, args) => args.iter().map(|a| a.eval(x).powi(2)).sum::<f64>().sqrt(),
            Expr::Call(f, args) => f.unary(args[0].eval(x)),
        }
    }

    /// Highest variable index used, if any.
    pub fn max_var(&self) -> Option<usize> {
        match self {
            Expr::Num(_) | Expr::Pi => None,
            Expr::Var(i) => Some(*i),
            Expr::Neg(a) | Expr::Pow(a, _) => a.max_var(),
            Expr::Bin(_, a, b) => a.max_var().max(b.max_var()),
            Expr::Call(_, args) => args.iter().filter_map(Expr::max_var).max(),
        }
    }

    /// Errors if the expression refers to a coordinate beyond `dim`.
    pub fn bind(&self, dim: usize) -> Result<()> {
        match self.max_var() {
            Some(i) if i >= dim => Err(Error::config(format!(
                "expression uses x{} but the domain has dimension {dim}",
                i + 1
            ))),
            _ => Ok(()),
        }
    }

    /// Records the expression on a graph.
    pub fn to_graph(&self, g: &mut ExprGraph, x: &[Var]) -> Var {
        match self {
            Expr::Num(v) => g.constant(*v),
            Expr::Pi => g.constant(std::f64::consts::PI),
            Expr::Var(i) => x[*i],
            Expr::Neg(a) => {
                let a = a.to_graph(g, x);
                g.neg(a)
            }
            Expr::Bin(op, a, b) => {
                let a = a.to_graph(g, x);
                let b = b.to_graph(g, x);
                match op {
                    BinOp::Add => g.add(a, b),
                    BinOp::Sub => g.sub(a, b),
                    BinOp::Mul => g.mul(a, b),
                    BinOp::Div => g.div(a, b),
                }
            }
            Expr::Pow(a, c) => {
                let a = a.to_graph(g, x);
                g.powc(a, *c)
            }
            Expr::Call(Func::Norm2, args) => {
                let squares: Vec<Var> = args
                    .iter()
                    .map(|a| {
                        let v = a.to_graph(g, x);
                        g.square(v)
                    })
                    .collect();
                let s = g.sum(&squares);
                g.sqrt(s)
            }
            Expr::Call(f, args) => {
                let a = args[0].to_graph(g, x);
                match f {
                    Func::Sin => g.sin(a),
                    Func::Cos => g.cos(a),
                    Func::Tan => {
                        let s = g.sin(a);
                        let c = g.cos(a);
                        g.div(s, c)
                    }
                    Func::Log => g.log(a),
                    Func::Exp => g.exp(a),
                    Func::Sqrt => g.sqrt(a),
                    Func::Abs => g.abs(a),
                    Func::Norm2 => unreachable!(),
                }
            }
        }
    }
}

/// Fully parenthesized, re-parseable rendering.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) if *v < 0.0 => write!(f, "(-{})", -v),
            Expr::Num(v) => write!(f, "{v}"),
            Expr::Pi => write!(f, "pi"),
            Expr::Var(i) => write!(f, "x{}", i + 1),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Bin(op, a, b) => {
                let sym = match op {
                    BinOp::Add => '+',
                    BinOp::Sub => '-',
                    BinOp::Mul => '*',
                    BinOp::Div => '/',
                };
                write!(f, "({a} {sym} {b})")
            }
            Expr::Pow(a, c) if *c < 0.0 => write!(f, "({a}^-{})", -c),
            Expr::Pow(a, c) => write!(f, "({a}^{c})"),
            Expr::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{a}")?;
                }
                write!(f, ")")
            }
        }
    }
}

impl std::str::FromStr for Expr {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Expr::parse(s)
    }
}

fn syntax(offset: usize, kind: SyntaxKind, message: String) -> Error {
    Error::Syntax {
        offset,
        kind,
        message,
    }
}

#[derive(Clone, Debug, PartialEq)]
enum TokenKind {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Comma,
}

impl TokenKind {
    fn describe(&self) -> String {
        match self {
            TokenKind::Num(v) => format!("number {v}"),
            TokenKind::Ident(s) => format!("identifier `{s}`"),
            TokenKind::Plus => "`+`".into(),
            TokenKind::Minus => "`-`".into(),
            TokenKind::Star => "`*`".into(),
            TokenKind::Slash => "`/`".into(),
            TokenKind::Caret => "`^`".into(),
            TokenKind::LParen => "`(`".into(),
            TokenKind::RParen => "`)`".into(),
            TokenKind::Comma => "`,`".into(),
        }
    }
}

#[derive(Clone, Debug)]
struct Token {
    kind: TokenKind,
    offset: usize,
}

fn tokenize(text: &str) -> Result<Vec<Token>> {
    let bytes = text.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        let kind = match c {
            b' ' | b'\t' | b'\n' | b'\r' => {
                i += 1;
                continue;
            }
            b'+' => TokenKind::Plus,
            b'-' => TokenKind::Minus,
            b'*' => TokenKind::Star,
            b'/' => TokenKind::Slash,
            b'^' => TokenKind::Caret,
            b'(' => TokenKind::LParen,
            b')' => TokenKind::RParen,
            b',' => TokenKind::Comma,
            b'0'..=b'9' | b'.' => {
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                    i += 1;
                }
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        while j < bytes.len() && bytes[j].is_ascii_digit() {
                            j += 1;
                        }
                        i = j;
                    }
                }
                let literal = &text[start..i];
                let v: f64 = literal.parse().map_err(|_| {
                    syntax(start, SyntaxKind::Unexpected, format!("malformed number `{literal}`"))
                })?;
                tokens.push(Token {
                    kind: TokenKind::Num(v),
                    offset: start,
                });
                continue;
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                tokens.push(Token {
                    kind: TokenKind::Ident(text[start..i].to_string()),
                    offset: start,
                });
                continue;
            }
            _ => {
                let ch = text[start..].chars().next().unwrap_or('?');
                return Err(syntax(start, SyntaxKind::Unexpected, format!("unexpected character `{ch}`")));
            }
        };
        tokens.push(Token { kind, offset: start });
        i += 1;
    }
    Ok(tokens)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn offset(&self) -> usize {
        self.peek().map_or(self.end, |t| t.offset)
    }

    fn eat(&mut self, kind: &TokenKind) -> bool {
        if self.peek().is_some_and(|t| &t.kind == kind) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, kind: TokenKind, hint: &str) -> Result<()> {
        if self.eat(&kind) {
            Ok(())
        } else {
            Err(self.unexpected(hint))
        }
    }

    fn unexpected(&self, expected: &str) -> Error {
        let found = self
            .peek()
            .map_or_else(|| "end of input".to_string(), |t| t.kind.describe());
        syntax(self.offset(), SyntaxKind::Unexpected, format!("expected {expected}, found {found}"))
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            let op = if self.eat(&TokenKind::Plus) {
                BinOp::Add
            } else if self.eat(&TokenKind::Minus) {
                BinOp::Sub
            } else {
                return Ok(lhs);
            };
            let rhs = self.term()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            let op = if self.eat(&TokenKind::Star) {
                BinOp::Mul
            } else if self.eat(&TokenKind::Slash) {
                BinOp::Div
            } else {
                return Ok(lhs);
            };
            let rhs = self.unary()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.eat(&TokenKind::Minus) {
            let inner = self.unary()?;
            return Ok(Expr::Neg(Box::new(inner)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let mut base = self.primary()?;
        while self.eat(&TokenKind::Caret) {
            let negative = self.eat(&TokenKind::Minus);
            match self.peek().map(|t| t.kind.clone()) {
                Some(TokenKind::Num(v)) => {
                    self.pos += 1;
                    base = Expr::Pow(Box::new(base), if negative { -v } else { v });
                }
                _ => return Err(self.unexpected("a numeric exponent")),
            }
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr> {
        let Some(tok) = self.peek().cloned() else {
            return Err(self.unexpected("an expression"));
        };
        match tok.kind {
            TokenKind::Num(v) => {
                self.pos += 1;
                Ok(Expr::Num(v))
            }
            TokenKind::LParen => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(TokenKind::RParen, "`)`")?;
                Ok(e)
            }
            TokenKind::Ident(name) => {
                self.pos += 1;
                if name == "pi" {
                    return Ok(Expr::Pi);
                }
                if let Some(idx) = variable_index(&name) {
                    return Ok(Expr::Var(idx));
                }
                let Some(func) = Func::from_name(&name) else {
                    return Err(syntax(
                        tok.offset,
                        SyntaxKind::UnknownIdentifier,
                        format!("unknown identifier `{name}`"),
                    ));
                };
                self.expect(TokenKind::LParen, &format!("`(` after `{name}`"))?;
                let mut args = vec![self.expr()?];
                while self.eat(&TokenKind::Comma) {
                    args.push(self.expr()?);
                }
                self.expect(TokenKind::RParen, "`,` or `)`")?;
                if func != Func::Norm2 && args.len() != 1 {
                    return Err(syntax(
                        tok.offset,
                        SyntaxKind::Arity,
                        format!("`{name}` takes 1 argument, got {}", args.len()),
                    ));
                }
                Ok(Expr::Call(func, args))
            }
            _ => Err(self.unexpected("an expression")),
        }
    }
}

fn variable_index(name: &str) -> Option<usize> {
    match name {
        "x1" => Some(0),
        "x2" => Some(1),
        "x3" => Some(2),
        "x4" => Some(3),
        _ => None,
    }
}
