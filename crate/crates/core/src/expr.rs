//! Arithmetic expressions over spatial coordinates.
//!
//! Load and boundary-data fields are written in configuration files as plain
//! arithmetic strings such as `"300 + 100*x"` or `"-5*nx"`. An expression is
//! parsed once into a small tree and then evaluated at every quadrature point.
//!
//! Recognised variables are the coordinates `x`, `y`, `z` and the components
//! `nx`, `ny`, `nz` of the outward unit normal (zero away from the boundary).
//! The constants `pi` and `e` are predefined. Functions: `sin`, `cos`, `tan`,
//! `exp`, `ln`/`log`, `sqrt`, `abs`, `tanh`, `atan`, `atan2`, `min`, `max`,
//! `pow`. Exponentiation is `^` and is right associative.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
enum Var {
    X,
    Y,
    Z,
    Nx,
    Ny,
    Nz,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Func1 {
    Sin,
    Cos,
    Tan,
    Exp,
    Ln,
    Sqrt,
    Abs,
    Tanh,
    Atan,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Func2 {
    Atan2,
    Min,
    Max,
    Pow,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Num(f64),
    Var(Var),
    Neg(Box<Node>),
    Bin(BinOp, Box<Node>, Box<Node>),
    Call1(Func1, Box<Node>),
    Call2(Func2, Box<Node>, Box<Node>),
}

impl Node {
    fn eval(&self, x: &[f64; 3], n: &[f64; 3]) -> f64 {
        match self {
            Node::Num(v) => *v,
            Node::Var(v) => match v {
                Var::X => x[0],
                Var::Y => x[1],
                Var::Z => x[2],
                Var::Nx => n[0],
                Var::Ny => n[1],
                Var::Nz => n[2],
            },
            Node::Neg(a) => -a.eval(x, n),
            Node::Bin(op, a, b) => {
                let (a, b) = (a.eval(x, n), b.eval(x, n));
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => a / b,
                    BinOp::Pow => a.powf(b),
                }
            }
            Node::Call1(f, a) => {
                let a = a.eval(x, n);
                match f {
                    Func1::Sin => a.sin(),
                    Func1::Cos => a.cos(),
                    Func1::Tan => a.tan(),
                    Func1::Exp => a.exp(),
                    Func1::Ln => a.ln(),
                    Func1::Sqrt => a.sqrt(),
                    Func1::Abs => a.abs(),
                    Func1::Tanh => a.tanh(),
                    Func1::Atan => a.atan(),
                }
            }
            Node::Call2(f, a, b) => {
                let (a, b) = (a.eval(x, n), b.eval(x, n));
                match f {
                    Func2::Atan2 => a.atan2(b),
                    Func2::Min => a.min(b),
                    Func2::Max => a.max(b),
                    Func2::Pow => a.powf(b),
                }
            }
        }
    }

    fn is_constant(&self) -> bool {
        match self {
            Node::Num(_) => true,
            Node::Var(_) => false,
            Node::Neg(a) | Node::Call1(_, a) => a.is_constant(),
            Node::Bin(_, a, b) | Node::Call2(_, a, b) => a.is_constant() && b.is_constant(),
        }
    }
}

/// A parsed scalar expression.
#[derive(Clone, PartialEq)]
pub struct Expr {
    source: String,
    root: Node,
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expr({:?})", self.source)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}

impl std::str::FromStr for Expr {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Expr::parse(s)
    }
}

impl Expr {
    pub fn parse(source: &str) -> Result<Self> {
        let tokens = tokenize(source)?;
        let mut parser = Parser { tokens, pos: 0 };
        let root = parser.expr()?;
        if let Some(tok) = parser.peek() {
            return Err(Error::Expression {
                column: tok.column,
                message: format!("unexpected trailing {}", tok.kind),
            });
        }
        Ok(Expr {
            source: source.to_string(),
            root,
        })
    }

    /// Evaluates at point `x` with outward normal `normal` (use zeros inside
    /// the domain).
    pub fn eval(&self, x: &[f64; 3], normal: &[f64; 3]) -> f64 {
        self.root.eval(x, normal)
    }

    pub fn eval_at(&self, x: &[f64; 3]) -> f64 {
        self.root.eval(x, &[0.0; 3])
    }

    /// True when the expression references no variables.
    pub fn is_constant(&self) -> bool {
        self.root.is_constant()
    }

    pub fn source(&self) -> &str {
        &self.source
    }
}

#[derive(Debug, Clone, PartialEq)]
enum TokKind {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    Comma,
}

impl fmt::Display for TokKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TokKind::Num(v) => write!(f, "number {v}"),
            TokKind::Ident(s) => write!(f, "identifier `{s}`"),
            TokKind::Op(c) => write!(f, "operator `{c}`"),
            TokKind::LParen => f.write_str("`(`"),
            TokKind::RParen => f.write_str("`)`"),
            TokKind::Comma => f.write_str("`,`"),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    kind: TokKind,
    column: usize,
}

fn tokenize(src: &str) -> Result<Vec<Token>> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let column = i + 1;
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            // exponent part, e.g. 1.5e-3
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
            let value = text.parse::<f64>().map_err(|_| Error::Expression {
                column,
                message: format!("malformed number `{text}`"),
            })?;
            out.push(Token {
                kind: TokKind::Num(value),
                column,
            });
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Token {
                kind: TokKind::Ident(chars[start..i].iter().collect()),
                column,
            });
        } else {
            let kind = match c {
                '+' | '-' | '*' | '/' | '^' => TokKind::Op(c),
                '(' => TokKind::LParen,
                ')' => TokKind::RParen,
                ',' => TokKind::Comma,
                _ => {
                    return Err(Error::Expression {
                        column,
                        message: format!("unexpected character `{c}`"),
                    })
                }
            };
            out.push(Token { kind, column });
            i += 1;
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn end_column(&self) -> usize {
        self.tokens.last().map(|t| t.column + 1).unwrap_or(1)
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn eat_op(&mut self, ops: &[char]) -> Option<char> {
        match self.peek() {
            Some(Token {
                kind: TokKind::Op(c),
                ..
            }) if ops.contains(c) => {
                let c = *c;
                self.pos += 1;
                Some(c)
            }
            _ => None,
        }
    }

    fn expect(&mut self, want: TokKind) -> Result<()> {
        match self.next() {
            Some(t) if t.kind == want => Ok(()),
            Some(t) => Err(Error::Expression {
                column: t.column,
                message: format!("expected {want}, found {}", t.kind),
            }),
            None => Err(Error::Expression {
                column: self.end_column(),
                message: format!("expected {want}, found end of input"),
            }),
        }
    }

    fn expr(&mut self) -> Result<Node> {
        let mut lhs = self.term()?;
        while let Some(op) = self.eat_op(&['+', '-']) {
            let rhs = self.term()?;
            let op = if op == '+' { BinOp::Add } else { BinOp::Sub };
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.unary()?;
        while let Some(op) = self.eat_op(&['*', '/']) {
            let rhs = self.unary()?;
            let op = if op == '*' { BinOp::Mul } else { BinOp::Div };
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Node> {
        match self.eat_op(&['+', '-']) {
            Some('-') => Ok(Node::Neg(Box::new(self.unary()?))),
            Some(_) => self.unary(),
            None => self.power(),
        }
    }

    // `-x^2` parses as `-(x^2)`; `2^-1` is allowed.
    fn power(&mut self) -> Result<Node> {
        let base = self.atom()?;
        if self.eat_op(&['^']).is_some() {
            let exponent = self.unary()?;
            return Ok(Node::Bin(BinOp::Pow, Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node> {
        let tok = self.next().ok_or_else(|| Error::Expression {
            column: self.end_column(),
            message: "unexpected end of input".into(),
        })?;
        match tok.kind {
            TokKind::Num(v) => Ok(Node::Num(v)),
            TokKind::LParen => {
                let inner = self.expr()?;
                self.expect(TokKind::RParen)?;
                Ok(inner)
            }
            TokKind::Ident(name) => {
                let is_call = matches!(
                    self.peek(),
                    Some(Token {
                        kind: TokKind::LParen,
                        ..
                    })
                );
                if is_call {
                    self.pos += 1;
                    self.call(&name, tok.column)
                } else {
                    ident(&name).ok_or(Error::Expression {
                        column: tok.column,
                        message: format!("unknown variable `{name}`"),
                    })
                }
            }
            other => Err(Error::Expression {
                column: tok.column,
                message: format!("unexpected {other}"),
            }),
        }
    }

    fn call(&mut self, name: &str, column: usize) -> Result<Node> {
        let mut args = vec![self.expr()?];
        while matches!(
            self.peek(),
            Some(Token {
                kind: TokKind::Comma,
                ..
            })
        ) {
            self.pos += 1;
            args.push(self.expr()?);
        }
        self.expect(TokKind::RParen)?;
        let arity_err = |n: usize| Error::Expression {
            column,
            message: format!("function `{name}` takes {n} argument(s), got {}", args.len()),
        };
        let f1 = match name {
            "sin" => Some(Func1::Sin),
            "cos" => Some(Func1::Cos),
            "tan" => Some(Func1::Tan),
            "exp" => Some(Func1::Exp),
            "ln" | "log" => Some(Func1::Ln),
            "sqrt" => Some(Func1::Sqrt),
            "abs" => Some(Func1::Abs),
            "tanh" => Some(Func1::Tanh),
            "atan" => Some(Func1::Atan),
            _ => None,
        };
        if let Some(f) = f1 {
            if args.len() != 1 {
                return Err(arity_err(1));
            }
            return Ok(Node::Call1(f, Box::new(args.pop().unwrap())));
        }
        let f2 = match name {
            "atan2" => Some(Func2::Atan2),
            "min" => Some(Func2::Min),
            "max" => Some(Func2::Max),
            "pow" => Some(Func2::Pow),
            _ => None,
        };
        match f2 {
            Some(f) => {
                if args.len() != 2 {
                    return Err(arity_err(2));
                }
                let b = args.pop().unwrap();
                let a = args.pop().unwrap();
                Ok(Node::Call2(f, Box::new(a), Box::new(b)))
            }
            None => Err(Error::Expression {
                column,
                message: format!("unknown function `{name}`"),
            }),
        }
    }
}

fn ident(name: &str) -> Option<Node> {
    Some(match name {
        "x" => Node::Var(Var::X),
        "y" => Node::Var(Var::Y),
        "z" => Node::Var(Var::Z),
        "nx" => Node::Var(Var::Nx),
        "ny" => Node::Var(Var::Ny),
        "nz" => Node::Var(Var::Nz),
        "pi" => Node::Num(std::f64::consts::PI),
        "e" => Node::Num(std::f64::consts::E),
        _ => return None,
    })
}

type ScalarClosure = dyn Fn(&[f64; 3], &[f64; 3]) -> f64 + Send + Sync;
type VectorClosure = dyn Fn(&[f64; 3], &[f64; 3]) -> [f64; 3] + Send + Sync;

/// A scalar function of position and outward normal.
///
/// Built either from a parsed [`Expr`] or from a Rust closure (used by
/// manufactured-solution tests).
#[derive(Clone)]
pub struct ScalarSource(Arc<ScalarClosure>);

impl ScalarSource {
    pub fn new(f: impl Fn(&[f64; 3], &[f64; 3]) -> f64 + Send + Sync + 'static) -> Self {
        ScalarSource(Arc::new(f))
    }

    pub fn constant(c: f64) -> Self {
        Self::new(move |_, _| c)
    }

    pub fn from_expr(e: Expr) -> Self {
        Self::new(move |x, n| e.eval(x, n))
    }

    pub fn parse(src: &str) -> Result<Self> {
        Ok(Self::from_expr(Expr::parse(src)?))
    }

    #[inline]
    pub fn eval(&self, x: &[f64; 3], normal: &[f64; 3]) -> f64 {
        (self.0)(x, normal)
    }
}

impl fmt::Debug for ScalarSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("ScalarSource(..)")
    }
}

/// A vector-valued function of position and outward normal.
#[derive(Clone)]
pub struct VectorSource(Arc<VectorClosure>);

impl VectorSource {
    pub fn new(f: impl Fn(&[f64; 3], &[f64; 3]) -> [f64; 3] + Send + Sync + 'static) -> Self {
        VectorSource(Arc::new(f))
    }

    pub fn zero() -> Self {
        Self::new(|_, _| [0.0; 3])
    }

    /// One expression per component; missing trailing components are zero.
    pub fn from_exprs(exprs: Vec<Expr>) -> Result<Self> {
        if exprs.is_empty() || exprs.len() > 3 {
            return Err(crate::error::validation(format!(
                "vector field needs 1 to 3 components, got {}",
                exprs.len()
            )));
        }
        Ok(Self::new(move |x, n| {
            let mut out = [0.0; 3];
            for (o, e) in out.iter_mut().zip(&exprs) {
                *o = e.eval(x, n);
            }
            out
        }))
    }

    pub fn parse<S: AsRef<str>>(components: &[S]) -> Result<Self> {
        let exprs = components
            .iter()
            .map(|s| Expr::parse(s.as_ref()))
            .collect::<Result<Vec<_>>>()?;
        Self::from_exprs(exprs)
    }

    #[inline]
    pub fn eval(&self, x: &[f64; 3], normal: &[f64; 3]) -> [f64; 3] {
        (self.0)(x, normal)
    }
}

impl fmt::Debug for VectorSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("VectorSource(..)")
    }
}
