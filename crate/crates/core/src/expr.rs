//! Small arithmetic expression language for data functions of `(x1, x2)`.
//!
//! Grammar: numbers, `x1`, `x2`, `pi`, the binary operators `+ - * / ^`
//! (`^` binds tightest and is right associative), unary `-`, parentheses and
//! the functions `sin cos exp abs`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{FbpError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Func {
    Sin,
    Cos,
    Exp,
    Abs,
    // Only produced by differentiation.
    Sign,
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Num(f64),
    Var(usize),
    Neg(Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    Pow(Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
    Ln(Box<Node>),
}

impl Node {
    fn eval(&self, x: [f64; 2]) -> f64 {
        match self {
            Node::Num(c) => *c,
            Node::Var(i) => x[*i],
            Node::Neg(a) => -a.eval(x),
            Node::Add(a, b) => a.eval(x) + b.eval(x),
            Node::Sub(a, b) => a.eval(x) - b.eval(x),
            Node::Mul(a, b) => a.eval(x) * b.eval(x),
            Node::Div(a, b) => a.eval(x) / b.eval(x),
            Node::Pow(a, b) => a.eval(x).powf(b.eval(x)),
            Node::Ln(a) => a.eval(x).ln(),
            Node::Call(f, a) => {
                let v = a.eval(x);
                match f {
                    Func::Sin => v.sin(),
                    Func::Cos => v.cos(),
                    Func::Exp => v.exp(),
                    Func::Abs => v.abs(),
                    Func::Sign => {
                        if v > 0.0 {
                            1.0
                        } else if v < 0.0 {
                            -1.0
                        } else {
                            0.0
                        }
                    }
                }
            }
        }
    }

    fn is_const(&self) -> bool {
        match self {
            Node::Num(_) => true,
            Node::Var(_) => false,
            Node::Neg(a) | Node::Call(_, a) | Node::Ln(a) => a.is_const(),
            Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) | Node::Pow(a, b) => {
                a.is_const() && b.is_const()
            }
        }
    }

    fn num(&self) -> Option<f64> {
        match self {
            Node::Num(c) => Some(*c),
            _ => None,
        }
    }

    fn deriv(&self, var: usize) -> Node {
        use Node::*;
        match self {
            Num(_) => Num(0.0),
            Var(i) => Num(if *i == var { 1.0 } else { 0.0 }),
            Neg(a) => neg(a.deriv(var)),
            Add(a, b) => add(a.deriv(var), b.deriv(var)),
            Sub(a, b) => sub(a.deriv(var), b.deriv(var)),
            Mul(a, b) => add(mul(a.deriv(var), (**b).clone()), mul((**a).clone(), b.deriv(var))),
            Div(a, b) => div(
                sub(mul(a.deriv(var), (**b).clone()), mul((**a).clone(), b.deriv(var))),
                mul((**b).clone(), (**b).clone()),
            ),
            Pow(a, b) => {
                if b.is_const() {
                    // c a^(c-1) a'
                    let c = (**b).clone();
                    mul(
                        mul(c.clone(), pow((**a).clone(), sub(c, Num(1.0)))),
                        a.deriv(var),
                    )
                } else {
                    // a^b (b' ln a + b a' / a)
                    mul(
                        self.clone(),
                        add(
                            mul(b.deriv(var), Ln(a.clone())),
                            div(mul((**b).clone(), a.deriv(var)), (**a).clone()),
                        ),
                    )
                }
            }
            Ln(a) => div(a.deriv(var), (**a).clone()),
            Call(f, a) => {
                let inner = (**a).clone();
                let outer = match f {
                    Func::Sin => Call(Func::Cos, Box::new(inner)),
                    Func::Cos => neg(Call(Func::Sin, Box::new(inner))),
                    Func::Exp => self.clone(),
                    Func::Abs => Call(Func::Sign, Box::new(inner)),
                    Func::Sign => Num(0.0),
                };
                mul(outer, a.deriv(var))
            }
        }
    }
}

fn neg(a: Node) -> Node {
    match a.num() {
        Some(c) => Node::Num(-c),
        None => Node::Neg(Box::new(a)),
    }
}

fn add(a: Node, b: Node) -> Node {
    match (a.num(), b.num()) {
        (Some(x), Some(y)) => Node::Num(x + y),
        (Some(0.0), _) => b,
        (_, Some(0.0)) => a,
        _ => Node::Add(Box::new(a), Box::new(b)),
    }
}

fn sub(a: Node, b: Node) -> Node {
    match (a.num(), b.num()) {
        (Some(x), Some(y)) => Node::Num(x - y),
        (Some(0.0), _) => neg(b),
        (_, Some(0.0)) => a,
        _ => Node::Sub(Box::new(a), Box::new(b)),
    }
}

fn mul(a: Node, b: Node) -> Node {
    match (a.num(), b.num()) {
        (Some(x), Some(y)) => Node::Num(x * y),
        (Some(0.0), _) | (_, Some(0.0)) => Node::Num(0.0),
        (Some(1.0), _) => b,
        (_, Some(1.0)) => a,
        _ => Node::Mul(Box::new(a), Box::new(b)),
    }
}

fn div(a: Node, b: Node) -> Node {
    match (a.num(), b.num()) {
        (Some(0.0), _) => Node::Num(0.0),
        (_, Some(1.0)) => a,
        _ => Node::Div(Box::new(a), Box::new(b)),
    }
}

fn pow(a: Node, b: Node) -> Node {
    match b.num() {
        Some(1.0) => a,
        Some(0.0) => Node::Num(1.0),
        _ => Node::Pow(Box::new(a), Box::new(b)),
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
}

fn lex(src: &str) -> Result<Vec<(usize, Tok)>> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    i = j;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text = &src[start..i];
            let v = text
                .parse::<f64>()
                .map_err(|_| FbpError::Expression(format!("bad number '{text}' at column {}", start + 1)))?;
            out.push((start, Tok::Num(v)));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((start, Tok::Ident(src[start..i].to_string())));
        } else if "+-*/^()".contains(c) {
            out.push((i, Tok::Op(c)));
            i += 1;
        } else {
            return Err(FbpError::Expression(format!(
                "unexpected character '{c}' at column {}",
                i + 1
            )));
        }
    }
    Ok(out)
}

struct Parser<'a> {
    toks: &'a [(usize, Tok)],
    pos: usize,
    len: usize,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.1)
    }

    fn column(&self) -> usize {
        self.toks.get(self.pos).map(|t| t.0 + 1).unwrap_or(self.len + 1)
    }

    fn eat(&mut self, op: char) -> bool {
        if self.peek() == Some(&Tok::Op(op)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, op: char) -> Result<()> {
        if self.eat(op) {
            Ok(())
        } else {
            Err(FbpError::Expression(format!("expected '{op}' at column {}", self.column())))
        }
    }

    fn expr(&mut self) -> Result<Node> {
        let mut lhs = self.term()?;
        loop {
            if self.eat('+') {
                lhs = Node::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat('-') {
                lhs = Node::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat('*') {
                lhs = Node::Mul(Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat('/') {
                lhs = Node::Div(Box::new(lhs), Box::new(self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Node> {
        if self.eat('-') {
            return Ok(Node::Neg(Box::new(self.unary()?)));
        }
        if self.eat('+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node> {
        let base = self.atom()?;
        if self.eat('^') {
            let exp = self.unary()?;
            return Ok(Node::Pow(Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node> {
        let col = self.column();
        match self.toks.get(self.pos).map(|t| t.1.clone()) {
            Some(Tok::Num(v)) => {
                self.pos += 1;
                Ok(Node::Num(v))
            }
            Some(Tok::Op('(')) => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Some(Tok::Ident(name)) => {
                self.pos += 1;
                let func = match name.as_str() {
                    "x1" => return Ok(Node::Var(0)),
                    "x2" => return Ok(Node::Var(1)),
                    "pi" => return Ok(Node::Num(std::f64::consts::PI)),
                    "sin" => Func::Sin,
                    "cos" => Func::Cos,
                    "exp" => Func::Exp,
                    "abs" => Func::Abs,
                    _ => {
                        return Err(FbpError::Expression(format!(
                            "unknown identifier '{name}' at column {col}"
                        )))
                    }
                };
                self.expect('(')?;
                let arg = self.expr()?;
                self.expect(')')?;
                Ok(Node::Call(func, Box::new(arg)))
            }
            Some(Tok::Op(c)) => Err(FbpError::Expression(format!("unexpected '{c}' at column {col}"))),
            None => Err(FbpError::Expression(format!("unexpected end of input at column {col}"))),
        }
    }
}

/// A parsed expression with its first and second `x2` derivatives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Expression {
    source: String,
    node: Node,
    d1: Node,
    d2: Node,
    d11: Node,
}

impl Expression {
    pub fn parse(src: &str) -> Result<Self> {
        let toks = lex(src)?;
        let mut p = Parser {
            toks: &toks,
            pos: 0,
            len: src.len(),
        };
        let node = p.expr()?;
        if p.pos != toks.len() {
            return Err(FbpError::Expression(format!(
                "unexpected trailing input at column {}",
                p.column()
            )));
        }
        let d1 = node.deriv(0);
        let d2 = node.deriv(1);
        let d22 = d2.deriv(1);
        Ok(Self {
            source: src.to_string(),
            node,
            d1,
            d2,
            d11: d22,
        })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn eval(&self, x1: f64, x2: f64) -> f64 {
        self.node.eval([x1, x2])
    }

    pub fn d_x1(&self, x1: f64, x2: f64) -> f64 {
        self.d1.eval([x1, x2])
    }

    pub fn d_x2(&self, x1: f64, x2: f64) -> f64 {
        self.d2.eval([x1, x2])
    }

    pub fn d_x2x2(&self, x1: f64, x2: f64) -> f64 {
        self.d11.eval([x1, x2])
    }

    /// True when the expression does not mention `x2`.
    pub fn independent_of_x2(&self) -> bool {
        self.d2.num() == Some(0.0)
    }

    pub fn is_constant(&self) -> bool {
        self.node.is_const()
    }
}

impl FromStr for Expression {
    type Err = FbpError;
    fn from_str(s: &str) -> Result<Self> {
        Self::parse(s)
    }
}

impl TryFrom<String> for Expression {
    type Error = FbpError;
    fn try_from(s: String) -> Result<Self> {
        Self::parse(&s)
    }
}

impl From<Expression> for String {
    fn from(e: Expression) -> String {
        e.source
    }
}

impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}
