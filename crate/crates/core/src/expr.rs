//! Scalar formulas in `(t, q, p)` with forward-mode derivatives.
//!
//! Expressions are parsed once into an immutable tree and evaluated either
//! on plain `f64` or on dual numbers carrying one tangent direction. The
//! function whitelist is smooth-only: `sin`, `cos`, `exp`, `tanh`, `sqrt`.
//! Powers take either a constant integer exponent or a positive base.

use std::fmt;

use serde::{Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExprError {
    #[error("syntax error at byte {offset}: expected {expected}")]
    Syntax { offset: usize, expected: String },
    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { name: String, offset: usize },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("non-finite value produced by `{0}`")]
    NonFinite(String),
}

pub type Result<T> = std::result::Result<T, ExprError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Var {
    T,
    Q,
    P,
}

impl Var {
    pub fn name(self) -> &'static str {
        match self {
            Var::T => "t",
            Var::Q => "q",
            Var::P => "p",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Tanh,
    Sqrt,
}

impl Func {
    pub const ALL: [Func; 5] = [Func::Sin, Func::Cos, Func::Exp, Func::Tanh, Func::Sqrt];

    fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "tanh" => Func::Tanh,
            "sqrt" => Func::Sqrt,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Tanh => "tanh",
            Func::Sqrt => "sqrt",
        }
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

/// Exponent of a power node. Integer exponents are applied with `powi`
/// on any base; everything else needs a strictly positive base.
#[derive(Debug, Clone, PartialEq)]
pub enum Exponent {
    Int(i32),
    General(Box<Node>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Const(f64),
    Var(Var),
    Neg(Box<Node>),
    Call(Func, Box<Node>),
    Binary(BinOp, Box<Node>, Box<Node>),
    Pow(Box<Node>, Exponent),
}

impl Node {
    fn visit_vars(&self, out: &mut Vec<Var>) {
        match self {
            Node::Const(_) => {}
            Node::Var(v) => {
                if !out.contains(v) {
                    out.push(*v)
                }
            }
            Node::Neg(a) | Node::Call(_, a) => a.visit_vars(out),
            Node::Binary(_, a, b) => {
                a.visit_vars(out);
                b.visit_vars(out);
            }
            Node::Pow(a, e) => {
                a.visit_vars(out);
                if let Exponent::General(b) = e {
                    b.visit_vars(out);
                }
            }
        }
    }

    fn substitute(&self, var: Var, with: &Node) -> Node {
        match self {
            Node::Const(c) => Node::Const(*c),
            Node::Var(v) if *v == var => with.clone(),
            Node::Var(v) => Node::Var(*v),
            Node::Neg(a) => Node::Neg(Box::new(a.substitute(var, with))),
            Node::Call(f, a) => Node::Call(*f, Box::new(a.substitute(var, with))),
            Node::Binary(op, a, b) => Node::Binary(
                *op,
                Box::new(a.substitute(var, with)),
                Box::new(b.substitute(var, with)),
            ),
            Node::Pow(a, e) => Node::Pow(
                Box::new(a.substitute(var, with)),
                match e {
                    Exponent::Int(n) => Exponent::Int(*n),
                    Exponent::General(b) => Exponent::General(Box::new(b.substitute(var, with))),
                },
            ),
        }
    }
}

/// A parsed formula. Cheap to clone, immutable, `Send + Sync`.
#[derive(Debug, Clone)]
pub struct Expression {
    root: Node,
    source: String,
}

impl PartialEq for Expression {
    fn eq(&self, other: &Self) -> bool {
        self.root == other.root
    }
}

impl Serialize for Expression {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.source)
    }
}

impl Expression {
    pub fn parse(source: &str) -> Result<Expression> {
        let tokens = tokenize(source)?;
        let mut parser = Parser { tokens, pos: 0 };
        let root = parser.expr()?;
        let tok = parser.peek();
        if tok.kind != Tok::End {
            return Err(ExprError::Syntax {
                offset: tok.offset,
                expected: "operator or end of input".into(),
            });
        }
        Ok(Expression {
            root,
            source: source.to_string(),
        })
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    /// Variables referenced anywhere in the tree, in first-seen order.
    pub fn variables(&self) -> Vec<Var> {
        let mut out = Vec::new();
        self.root.visit_vars(&mut out);
        out
    }

    pub fn depends_on(&self, v: Var) -> bool {
        self.variables().contains(&v)
    }

    /// `-self`, used by the concave-to-convex reduction.
    pub fn negated(&self) -> Expression {
        let root = Node::Neg(Box::new(self.root.clone()));
        Expression {
            source: format!("-({})", self.source),
            root,
        }
    }

    /// Replaces `p` by `-p`.
    pub fn with_p_reflected(&self) -> Expression {
        let root = self
            .root
            .substitute(Var::P, &Node::Neg(Box::new(Node::Var(Var::P))));
        let source = root_to_string(&root);
        Expression { root, source }
    }

    pub fn eval(&self, t: f64, q: f64, p: f64) -> Result<f64> {
        let env = [t, q, p];
        let v = eval_node::<f64>(&self.root, &env)?;
        Ok(v)
    }

    /// Value and exact derivative with respect to `wrt`.
    pub fn eval_d(&self, t: f64, q: f64, p: f64, wrt: Var) -> Result<(f64, f64)> {
        let mut env = [Dual::cst(t), Dual::cst(q), Dual::cst(p)];
        env[wrt as usize].d = 1.0;
        let r = eval_node::<Dual>(&self.root, &env)?;
        Ok((r.v, r.d))
    }

    /// Value together with the `q` and `p` partials in one pass.
    pub fn eval_grad_qp(&self, t: f64, q: f64, p: f64) -> Result<(f64, f64, f64)> {
        let env = [
            Dual2::cst(t),
            Dual2 {
                v: q,
                d: [1.0, 0.0],
            },
            Dual2 {
                v: p,
                d: [0.0, 1.0],
            },
        ];
        let r = eval_node::<Dual2>(&self.root, &env)?;
        Ok((r.v, r.d[0], r.d[1]))
    }

    /// Canonical fully-parenthesised rendering; re-parses to the same tree.
    pub fn canonical(&self) -> String {
        root_to_string(&self.root)
    }
}

impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.canonical())
    }
}

impl std::str::FromStr for Expression {
    type Err = ExprError;
    fn from_str(s: &str) -> Result<Self> {
        Expression::parse(s)
    }
}

// ---------------------------------------------------------------------------
// printing

fn root_to_string(n: &Node) -> String {
    let mut s = String::new();
    write_node(n, &mut s);
    s
}

fn write_const(c: f64, out: &mut String) {
    // Debug formatting is the shortest round-trip representation.
    out.push_str(&format!("{c:?}"));
}

fn write_node(n: &Node, out: &mut String) {
    match n {
        Node::Const(c) => write_const(*c, out),
        Node::Var(v) => out.push_str(v.name()),
        Node::Neg(a) => {
            out.push_str("(-");
            write_node(a, out);
            out.push(')');
        }
        Node::Call(f, a) => {
            out.push_str(f.name());
            out.push('(');
            write_node(a, out);
            out.push(')');
        }
        Node::Binary(op, a, b) => {
            out.push('(');
            write_node(a, out);
            out.push(' ');
            out.push(op.symbol());
            out.push(' ');
            write_node(b, out);
            out.push(')');
        }
        Node::Pow(a, e) => {
            out.push('(');
            write_node(a, out);
            out.push_str(" ^ ");
            match e {
                Exponent::Int(k) => out.push_str(&k.to_string()),
                Exponent::General(b) => write_node(b, out),
            }
            out.push(')');
        }
    }
}

// ---------------------------------------------------------------------------
// tokens

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    End,
}

#[derive(Debug, Clone)]
struct Token {
    kind: Tok,
    offset: usize,
}

fn tokenize(src: &str) -> Result<Vec<Token>> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let kind = match c {
            b'+' => Tok::Plus,
            b'-' => Tok::Minus,
            b'*' => Tok::Star,
            b'/' => Tok::Slash,
            b'^' => Tok::Caret,
            b'(' => Tok::LParen,
            b')' => Tok::RParen,
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
                let text = &src[start..i];
                let v: f64 = text.parse().map_err(|_| ExprError::Syntax {
                    offset: start,
                    expected: "a number".into(),
                })?;
                out.push(Token {
                    kind: Tok::Num(v),
                    offset: start,
                });
                continue;
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push(Token {
                    kind: Tok::Ident(src[start..i].to_string()),
                    offset: start,
                });
                continue;
            }
            _ => {
                return Err(ExprError::Syntax {
                    offset: start,
                    expected: "a number, name, operator or parenthesis".into(),
                })
            }
        };
        out.push(Token {
            kind,
            offset: start,
        });
        i += 1;
    }
    out.push(Token {
        kind: Tok::End,
        offset: src.len(),
    });
    Ok(out)
}

// ---------------------------------------------------------------------------
// recursive descent: expr > term > unary > power > atom

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if t.kind != Tok::End {
            self.pos += 1;
        }
        t
    }

    fn expr(&mut self) -> Result<Node> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek().kind {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Node::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek().kind {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = Node::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Node> {
        match self.peek().kind {
            Tok::Minus => {
                self.bump();
                Ok(Node::Neg(Box::new(self.unary()?)))
            }
            Tok::Plus => {
                self.bump();
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Node> {
        let base = self.atom()?;
        if self.peek().kind != Tok::Caret {
            return Ok(base);
        }
        self.bump();
        // right-associative: the exponent is itself a (signed) power
        let exp = self.unary()?;
        Ok(Node::Pow(Box::new(base), classify_exponent(exp)))
    }

    fn atom(&mut self) -> Result<Node> {
        let tok = self.bump();
        match tok.kind {
            Tok::Num(v) => Ok(Node::Const(v)),
            Tok::LParen => {
                let inner = self.expr()?;
                self.expect_rparen()?;
                Ok(inner)
            }
            Tok::Ident(name) => match name.as_str() {
                "t" => Ok(Node::Var(Var::T)),
                "q" => Ok(Node::Var(Var::Q)),
                "p" => Ok(Node::Var(Var::P)),
                "pi" => Ok(Node::Const(std::f64::consts::PI)),
                _ => {
                    let Some(func) = Func::from_name(&name) else {
                        return Err(ExprError::UnknownIdentifier {
                            name,
                            offset: tok.offset,
                        });
                    };
                    let open = self.bump();
                    if open.kind != Tok::LParen {
                        return Err(ExprError::Syntax {
                            offset: open.offset,
                            expected: format!("`(` after `{}`", func.name()),
                        });
                    }
                    let arg = self.expr()?;
                    self.expect_rparen()?;
                    Ok(Node::Call(func, Box::new(arg)))
                }
            },
            _ => Err(ExprError::Syntax {
                offset: tok.offset,
                expected: "a number, variable, function call or `(`".into(),
            }),
        }
    }

    fn expect_rparen(&mut self) -> Result<()> {
        let tok = self.bump();
        if tok.kind != Tok::RParen {
            return Err(ExprError::Syntax {
                offset: tok.offset,
                expected: "`)`".into(),
            });
        }
        Ok(())
    }
}

fn classify_exponent(e: Node) -> Exponent {
    let literal = match &e {
        Node::Const(c) => Some(*c),
        Node::Neg(inner) => match inner.as_ref() {
            Node::Const(c) => Some(-*c),
            _ => None,
        },
        _ => None,
    };
    match literal {
        Some(c) if c.fract() == 0.0 && c.abs() <= i32::MAX as f64 => Exponent::Int(c as i32),
        _ => Exponent::General(Box::new(e)),
    }
}

// ---------------------------------------------------------------------------
// evaluation

trait Scalar: Copy {
    fn cst(c: f64) -> Self;
    fn value(&self) -> f64;
    fn is_finite(&self) -> bool;
    fn add(self, o: Self) -> Self;
    fn sub(self, o: Self) -> Self;
    fn mul(self, o: Self) -> Self;
    /// `o` is known to be nonzero.
    fn div(self, o: Self) -> Self;
    fn neg(self) -> Self;
    /// Applies `f` given its value and first derivative at `self.value()`.
    fn chain(self, fv: f64, dfv: f64) -> Self;
}

impl Scalar for f64 {
    fn cst(c: f64) -> Self {
        c
    }
    fn value(&self) -> f64 {
        *self
    }
    fn is_finite(&self) -> bool {
        f64::is_finite(*self)
    }
    fn add(self, o: Self) -> Self {
        self + o
    }
    fn sub(self, o: Self) -> Self {
        self - o
    }
    fn mul(self, o: Self) -> Self {
        self * o
    }
    fn div(self, o: Self) -> Self {
        self / o
    }
    fn neg(self) -> Self {
        -self
    }
    fn chain(self, fv: f64, _dfv: f64) -> Self {
        fv
    }
}

/// First-order dual number `v + d·ε`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dual {
    pub v: f64,
    pub d: f64,
}

impl Scalar for Dual {
    fn cst(c: f64) -> Self {
        Dual { v: c, d: 0.0 }
    }
    fn value(&self) -> f64 {
        self.v
    }
    fn is_finite(&self) -> bool {
        self.v.is_finite() && self.d.is_finite()
    }
    fn add(self, o: Self) -> Self {
        Dual {
            v: self.v + o.v,
            d: self.d + o.d,
        }
    }
    fn sub(self, o: Self) -> Self {
        Dual {
            v: self.v - o.v,
            d: self.d - o.d,
        }
    }
    fn mul(self, o: Self) -> Self {
        Dual {
            v: self.v * o.v,
            d: self.d * o.v + self.v * o.d,
        }
    }
    fn div(self, o: Self) -> Self {
        Dual {
            v: self.v / o.v,
            d: (self.d * o.v - self.v * o.d) / (o.v * o.v),
        }
    }
    fn neg(self) -> Self {
        Dual {
            v: -self.v,
            d: -self.d,
        }
    }
    fn chain(self, fv: f64, dfv: f64) -> Self {
        Dual {
            v: fv,
            d: dfv * self.d,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Dual2 {
    v: f64,
    d: [f64; 2],
}

impl Scalar for Dual2 {
    fn cst(c: f64) -> Self {
        Dual2 { v: c, d: [0.0; 2] }
    }
    fn value(&self) -> f64 {
        self.v
    }
    fn is_finite(&self) -> bool {
        self.v.is_finite() && self.d.iter().all(|x| x.is_finite())
    }
    fn add(self, o: Self) -> Self {
        Dual2 {
            v: self.v + o.v,
            d: [self.d[0] + o.d[0], self.d[1] + o.d[1]],
        }
    }
    fn sub(self, o: Self) -> Self {
        Dual2 {
            v: self.v - o.v,
            d: [self.d[0] - o.d[0], self.d[1] - o.d[1]],
        }
    }
    fn mul(self, o: Self) -> Self {
        Dual2 {
            v: self.v * o.v,
            d: [
                self.d[0] * o.v + self.v * o.d[0],
                self.d[1] * o.v + self.v * o.d[1],
            ],
        }
    }
    fn div(self, o: Self) -> Self {
        let w = o.v * o.v;
        Dual2 {
            v: self.v / o.v,
            d: [
                (self.d[0] * o.v - self.v * o.d[0]) / w,
                (self.d[1] * o.v - self.v * o.d[1]) / w,
            ],
        }
    }
    fn neg(self) -> Self {
        Dual2 {
            v: -self.v,
            d: [-self.d[0], -self.d[1]],
        }
    }
    fn chain(self, fv: f64, dfv: f64) -> Self {
        Dual2 {
            v: fv,
            d: [dfv * self.d[0], dfv * self.d[1]],
        }
    }
}

fn checked<S: Scalar>(x: S, what: &str) -> Result<S> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(ExprError::NonFinite(what.to_string()))
    }
}

fn eval_node<S: Scalar>(n: &Node, env: &[S; 3]) -> Result<S> {
    match n {
        Node::Const(c) => Ok(S::cst(*c)),
        Node::Var(v) => Ok(env[*v as usize]),
        Node::Neg(a) => Ok(eval_node(a, env)?.neg()),
        Node::Binary(op, a, b) => {
            let x = eval_node(a, env)?;
            let y = eval_node(b, env)?;
            let r = match op {
                BinOp::Add => x.add(y),
                BinOp::Sub => x.sub(y),
                BinOp::Mul => x.mul(y),
                BinOp::Div => {
                    if y.value() == 0.0 {
                        return Err(ExprError::Domain("division by zero".into()));
                    }
                    x.div(y)
                }
            };
            checked(r, op_name(*op))
        }
        Node::Call(f, a) => {
            let x = eval_node(a, env)?;
            let xv = x.value();
            let r = match f {
                Func::Sin => x.chain(xv.sin(), xv.cos()),
                Func::Cos => x.chain(xv.cos(), -xv.sin()),
                Func::Exp => {
                    let e = xv.exp();
                    x.chain(e, e)
                }
                Func::Tanh => {
                    let th = xv.tanh();
                    x.chain(th, 1.0 - th * th)
                }
                Func::Sqrt => {
                    if xv < 0.0 {
                        return Err(ExprError::Domain(format!("sqrt of negative value {xv}")));
                    }
                    let s = xv.sqrt();
                    x.chain(s, 0.5 / s)
                }
            };
            checked(r, f.name())
        }
        Node::Pow(a, e) => {
            let x = eval_node(a, env)?;
            let xv = x.value();
            let r = match e {
                Exponent::Int(k) => {
                    if *k < 0 && xv == 0.0 {
                        return Err(ExprError::Domain("zero raised to a negative power".into()));
                    }
                    let k = *k;
                    let dv = if k == 0 {
                        0.0
                    } else {
                        k as f64 * xv.powi(k - 1)
                    };
                    x.chain(xv.powi(k), dv)
                }
                Exponent::General(b) => {
                    if xv <= 0.0 {
                        return Err(ExprError::Domain(format!(
                            "non-integer power needs a positive base, got {xv}"
                        )));
                    }
                    let y = eval_node(b, env)?;
                    // x^y = exp(y ln x)
                    let ln = x.chain(xv.ln(), 1.0 / xv);
                    let arg = y.mul(ln);
                    let ev = xv.powf(y.value());
                    arg.chain(ev, ev)
                }
            };
            checked(r, "^")
        }
    }
}

fn op_name(op: BinOp) -> &'static str {
    match op {
        BinOp::Add => "+",
        BinOp::Sub => "-",
        BinOp::Mul => "*",
        BinOp::Div => "/",
    }
}
