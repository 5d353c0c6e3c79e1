//! Scalar dynamics expressions.
//!
//! Grammar (whitespace ignored):
//!
//! ```text
//! expr     := term (('+' | '-') term)*
//! term     := factor (('*' | '/') factor)*
//! factor   := unary ('^' exponent)?
//! exponent := ('+' | '-')? INTEGER ('^' exponent)?
//! unary    := ('-' | '+') unary | primary
//! primary  := NUMBER | 'pi' | 't' | VAR | FUNC '(' expr ')' | '(' expr ')'
//! VAR      := 'x' m        (own state, 1 <= m <= M)
//!           | 'x0' m       (leader state)
//! FUNC     := sin | cos | tan | tanh | exp | abs | sqrt
//! ```
//!
//! Unary minus binds tighter than `^`, so `-x1^2` is `(-x1)^2`. Exponents are
//! integer literals and chain to the right (`x^2^3` is `x^8`).

use std::fmt;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParseError {
    #[error("syntax error at column {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("unknown variable '{name}' at column {pos} (order is {order})")]
    UnknownVariable { name: String, pos: usize, order: usize },
    #[error("unknown function '{name}' at column {pos}")]
    UnknownFunction { name: String, pos: usize },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("{func} of {arg} is outside its domain")]
    Domain { func: &'static str, arg: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Tanh,
    Exp,
    Abs,
    Sqrt,
}

impl Func {
    fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tan" => Func::Tan,
            "tanh" => Func::Tanh,
            "exp" => Func::Exp,
            "abs" => Func::Abs,
            "sqrt" => Func::Sqrt,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Tanh => "tanh",
            Func::Exp => "exp",
            Func::Abs => "abs",
            Func::Sqrt => "sqrt",
        }
    }

    fn apply(self, v: f64) -> Result<f64, EvalError> {
        Ok(match self {
            Func::Sin => v.sin(),
            Func::Cos => v.cos(),
            Func::Tan => v.tan(),
            Func::Tanh => v.tanh(),
            Func::Exp => v.exp(),
            Func::Abs => v.abs(),
            Func::Sqrt => {
                if v < 0.0 {
                    return Err(EvalError::Domain { func: "sqrt", arg: v });
                }
                v.sqrt()
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinOp {
    fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
        }
    }
}

/// Expression tree. Literals produced by the parser are never negative.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Pi,
    Time,
    /// Own state `x_m`, 0-based.
    State(usize),
    /// Leader state `x0_m`, 0-based.
    Leader(usize),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, i32),
    Call(Func, Box<Expr>),
}

/// Values the expression may read.
#[derive(Debug, Clone, Copy)]
pub struct EvalContext<'a> {
    pub own: &'a [f64],
    pub leader: &'a [f64],
    pub t: f64,
}

impl Expr {
    pub fn eval(&self, ctx: &EvalContext<'_>) -> Result<f64, EvalError> {
        Ok(match self {
            Expr::Num(v) => *v,
            Expr::Pi => std::f64::consts::PI,
            Expr::Time => ctx.t,
            Expr::State(m) => ctx.own[*m],
            Expr::Leader(m) => ctx.leader[*m],
            Expr::Neg(e) => -e.eval(ctx)?,
            Expr::Bin(op, a, b) => {
                let (a, b) = (a.eval(ctx)?, b.eval(ctx)?);
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => {
                        if b == 0.0 {
                            return Err(EvalError::DivisionByZero);
                        }
                        a / b
                    }
                }
            }
            Expr::Pow(base, n) => {
                let b = base.eval(ctx)?;
                if b == 0.0 && *n < 0 {
                    return Err(EvalError::DivisionByZero);
                }
                b.powi(*n)
            }
            Expr::Call(f, arg) => f.apply(arg.eval(ctx)?)?,
        })
    }

    fn max_index(&self) -> (usize, usize) {
        match self {
            Expr::State(m) => (m + 1, 0),
            Expr::Leader(m) => (0, m + 1),
            Expr::Neg(e) | Expr::Pow(e, _) | Expr::Call(_, e) => e.max_index(),
            Expr::Bin(_, a, b) => {
                let (a, b) = (a.max_index(), b.max_index());
                (a.0.max(b.0), a.1.max(b.1))
            }
            Expr::Num(_) | Expr::Pi | Expr::Time => (0, 0),
        }
    }
}

/// Fully parenthesized rendering that parses back to the same tree.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => write!(f, "{v:?}"),
            Expr::Pi => f.write_str("pi"),
            Expr::Time => f.write_str("t"),
            Expr::State(m) => write!(f, "x{}", m + 1),
            Expr::Leader(m) => write!(f, "x0{}", m + 1),
            Expr::Neg(e) => write!(f, "-({e})"),
            Expr::Bin(op, a, b) => write!(f, "({a} {} {b})", op.symbol()),
            Expr::Pow(e, n) => write!(f, "(({e})^{n})"),
            Expr::Call(func, e) => write!(f, "{}({e})", func.name()),
        }
    }
}

/// A parsed expression together with its source text.
#[derive(Debug, Clone, PartialEq)]
pub struct DynamicsExpr {
    source: String,
    order: usize,
    ast: Expr,
}

impl DynamicsExpr {
    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn ast(&self) -> &Expr {
        &self.ast
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Evaluates with `own` as the agent's state and `leader` as the leader's.
    pub fn eval(&self, own: &[f64], leader: &[f64], t: f64) -> Result<f64, EvalError> {
        self.ast.eval(&EvalContext { own, leader, t })
    }

    /// Whether the expression reads any leader variable `x0m`.
    pub fn reads_leader(&self) -> bool {
        self.ast.max_index().1 > 0
    }
}

impl fmt::Display for DynamicsExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.ast.fmt(f)
    }
}

pub fn parse_dynamics(source: &str, order: usize) -> Result<DynamicsExpr, ParseError> {
    let tokens = lex(source)?;
    let mut p = Parser { tokens, at: 0, order };
    let ast = p.expr()?;
    if let Some(tok) = p.peek() {
        return Err(ParseError::Syntax {
            pos: tok.pos,
            msg: format!("unexpected {}", tok.kind),
        });
    }
    Ok(DynamicsExpr {
        source: source.to_string(),
        order,
        ast,
    })
}

#[derive(Debug, Clone, PartialEq)]
enum TokKind {
    Num(f64),
    Int(i64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
}

impl fmt::Display for TokKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TokKind::Num(v) => write!(f, "number {v}"),
            TokKind::Int(v) => write!(f, "number {v}"),
            TokKind::Ident(s) => write!(f, "'{s}'"),
            TokKind::Op(c) => write!(f, "'{c}'"),
            TokKind::LParen => f.write_str("'('"),
            TokKind::RParen => f.write_str("')'"),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    kind: TokKind,
    /// 1-based column.
    pos: usize,
}

fn lex(src: &str) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let pos = i + 1;
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(char::is_ascii_digit)) {
            let start = i;
            let mut integral = true;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            if i < chars.len() && chars[i] == '.' {
                integral = false;
                i += 1;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    integral = false;
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text: String = chars[start..i].iter().collect();
            let bad = || ParseError::Syntax {
                pos,
                msg: format!("malformed number '{text}'"),
            };
            let kind = match (integral, text.parse::<i64>()) {
                (true, Ok(v)) => TokKind::Int(v),
                _ => {
                    let v: f64 = text.parse().map_err(|_| bad())?;
                    if !v.is_finite() {
                        return Err(bad());
                    }
                    TokKind::Num(v)
                }
            };
            out.push(Token { kind, pos });
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Token {
                kind: TokKind::Ident(chars[start..i].iter().collect()),
                pos,
            });
        } else {
            let kind = match c {
                '+' | '-' | '*' | '/' | '^' => TokKind::Op(c),
                '(' => TokKind::LParen,
                ')' => TokKind::RParen,
                _ => {
                    return Err(ParseError::Syntax {
                        pos,
                        msg: format!("unexpected character '{c}'"),
                    })
                }
            };
            out.push(Token { kind, pos });
            i += 1;
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    at: usize,
    order: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.at)
    }

    fn end_pos(&self) -> usize {
        self.tokens.last().map_or(1, |t| t.pos + 1)
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.at).cloned();
        self.at += 1;
        t
    }

    fn eat_op(&mut self, ops: &[char]) -> Option<char> {
        match self.peek() {
            Some(Token { kind: TokKind::Op(c), .. }) if ops.contains(c) => {
                let c = *c;
                self.at += 1;
                Some(c)
            }
            _ => None,
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        while let Some(op) = self.eat_op(&['+', '-']) {
            let rhs = self.term()?;
            let op = if op == '+' { BinOp::Add } else { BinOp::Sub };
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.factor()?;
        while let Some(op) = self.eat_op(&['*', '/']) {
            let rhs = self.factor()?;
            let op = if op == '*' { BinOp::Mul } else { BinOp::Div };
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn factor(&mut self) -> Result<Expr, ParseError> {
        let base = self.unary()?;
        if self.eat_op(&['^']).is_some() {
            let n = self.exponent()?;
            return Ok(Expr::Pow(Box::new(base), n));
        }
        Ok(base)
    }

    fn exponent(&mut self) -> Result<i32, ParseError> {
        let sign = match self.eat_op(&['+', '-']) {
            Some('-') => -1,
            _ => 1,
        };
        let tok = self.next();
        let (value, pos) = match tok {
            Some(Token { kind: TokKind::Int(v), pos }) => (v, pos),
            Some(t) => {
                return Err(ParseError::Syntax {
                    pos: t.pos,
                    msg: format!("exponent must be an integer literal, found {}", t.kind),
                })
            }
            None => {
                return Err(ParseError::Syntax {
                    pos: self.end_pos(),
                    msg: "missing exponent".into(),
                })
            }
        };
        let mut n = sign * value;
        if self.eat_op(&['^']).is_some() {
            let inner = self.exponent()?;
            n = integer_power(n, inner).ok_or_else(|| ParseError::Syntax {
                pos,
                msg: "exponent chain does not reduce to a representable integer".into(),
            })?;
        }
        i32::try_from(n).map_err(|_| ParseError::Syntax {
            pos,
            msg: format!("exponent {n} out of range"),
        })
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        match self.eat_op(&['-', '+']) {
            Some('-') => Ok(Expr::Neg(Box::new(self.unary()?))),
            Some(_) => self.unary(),
            None => self.primary(),
        }
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let Some(tok) = self.next() else {
            return Err(ParseError::Syntax {
                pos: self.end_pos(),
                msg: "unexpected end of expression".into(),
            });
        };
        match tok.kind {
            TokKind::Num(v) => Ok(Expr::Num(v)),
            TokKind::Int(v) => Ok(Expr::Num(v as f64)),
            TokKind::LParen => {
                let e = self.expr()?;
                self.expect_rparen()?;
                Ok(e)
            }
            TokKind::Ident(name) => {
                if matches!(self.peek(), Some(Token { kind: TokKind::LParen, .. })) {
                    let func = Func::from_name(&name).ok_or_else(|| ParseError::UnknownFunction {
                        name: name.clone(),
                        pos: tok.pos,
                    })?;
                    self.at += 1;
                    let arg = self.expr()?;
                    self.expect_rparen()?;
                    return Ok(Expr::Call(func, Box::new(arg)));
                }
                self.variable(&name, tok.pos)
            }
            other => Err(ParseError::Syntax {
                pos: tok.pos,
                msg: format!("unexpected {other}"),
            }),
        }
    }

    fn variable(&self, name: &str, pos: usize) -> Result<Expr, ParseError> {
        match name {
            "t" => return Ok(Expr::Time),
            "pi" => return Ok(Expr::Pi),
            _ => {}
        }
        if Func::from_name(name).is_some() {
            return Err(ParseError::Syntax {
                pos,
                msg: format!("function '{name}' needs an argument in parentheses"),
            });
        }
        let unknown = || ParseError::UnknownVariable {
            name: name.to_string(),
            pos,
            order: self.order,
        };
        let digits = name.strip_prefix('x').ok_or_else(unknown)?;
        if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
            return Err(unknown());
        }
        let (leader, idx) = match digits.strip_prefix('0') {
            Some(rest) => (true, rest),
            None => (false, digits),
        };
        let m: usize = idx.parse().map_err(|_| unknown())?;
        if m == 0 || m > self.order {
            return Err(unknown());
        }
        Ok(if leader { Expr::Leader(m - 1) } else { Expr::State(m - 1) })
    }

    fn expect_rparen(&mut self) -> Result<(), ParseError> {
        match self.next() {
            Some(Token { kind: TokKind::RParen, .. }) => Ok(()),
            Some(t) => Err(ParseError::Syntax {
                pos: t.pos,
                msg: format!("expected ')', found {}", t.kind),
            }),
            None => Err(ParseError::Syntax {
                pos: self.end_pos(),
                msg: "expected ')'".into(),
            }),
        }
    }
}

fn integer_power(base: i64, exp: i32) -> Option<i64> {
    if exp < 0 {
        // Only ±1 have integer reciprocals.
        return match base {
            1 => Some(1),
            -1 => Some(if exp % 2 == 0 { 1 } else { -1 }),
            _ => None,
        };
    }
    base.checked_pow(exp as u32)
}
