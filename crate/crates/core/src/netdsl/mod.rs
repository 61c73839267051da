//! A small line-oriented netlist language for cavity networks.
//!
//! ```text
//! # one memory module, write/read routing
//! param g = 1
//! cavity p couplings [g/2, g/2]
//! cavity c couplings [g/2, g/2]
//! connect p.out1 -> c.in2
//! connect c.out2 -> p.in2
//! connect p.out2 -> c.in1
//! input p.in1
//! output c.out1
//! ```
//!
//! Couplings are mirror decay rates. Ports are numbered from 1 and named
//! `inJ` / `outJ`; every port of a cavity has both an input and an output.

use std::fmt;

mod compile;
mod lexer;
mod parser;

pub use compile::{compile, MAX_COMPONENTS, MAX_PORTS};
pub use parser::{parse, MAX_DEPTH};

/// A position in the source, 1-based.
///
/// Spans always compare equal, so descriptions compare by content.
#[derive(Debug, Clone, Copy, Default, Eq)]
pub struct Span {
    pub line: usize,
    pub col: usize,
}

impl PartialEq for Span {
    fn eq(&self, _: &Self) -> bool {
        true
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

impl Diagnostic {
    pub fn new(span: Span, message: impl Into<String>) -> Self {
        Diagnostic { line: span.line, col: span.col, message: message.into() }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.line, self.col, self.message)
    }
}

impl std::error::Error for Diagnostic {}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinOp {
    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
        }
    }

    fn precedence(self) -> u8 {
        match self {
            BinOp::Add | BinOp::Sub => 1,
            BinOp::Mul | BinOp::Div => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Param(String, Span),
    Neg(Box<Expr>),
    Sqrt(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
}

impl Expr {
    fn precedence(&self) -> u8 {
        match self {
            Expr::Binary(op, ..) => op.precedence(),
            Expr::Neg(_) => 3,
            Expr::Num(x) if *x < 0.0 => 3,
            _ => 4,
        }
    }

    /// Evaluate with `lookup` resolving parameter names.
    pub fn eval(&self, lookup: &impl Fn(&str) -> Option<f64>) -> Option<f64> {
        Some(match self {
            Expr::Num(x) => *x,
            Expr::Param(name, _) => lookup(name)?,
            Expr::Neg(e) => -e.eval(lookup)?,
            Expr::Sqrt(e) => e.eval(lookup)?.sqrt(),
            Expr::Binary(op, l, r) => {
                let (a, b) = (l.eval(lookup)?, r.eval(lookup)?);
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => a / b,
                }
            }
        })
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(x) if *x < 0.0 => write!(f, "-{}", -x),
            Expr::Num(x) => write!(f, "{x}"),
            Expr::Param(name, _) => f.write_str(name),
            Expr::Neg(e) if e.precedence() < 3 => write!(f, "-({e})"),
            Expr::Neg(e) => write!(f, "-{e}"),
            Expr::Sqrt(e) => write!(f, "sqrt({e})"),
            Expr::Binary(op, l, r) => {
                let p = op.precedence();
                if l.precedence() < p {
                    write!(f, "({l})")?;
                } else {
                    write!(f, "{l}")?;
                }
                write!(f, " {} ", op.symbol())?;
                if r.precedence() <= p {
                    write!(f, "({r})")
                } else {
                    write!(f, "{r}")
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    In,
    Out,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PortRef {
    pub component: String,
    pub direction: Direction,
    /// 1-based.
    pub index: usize,
    pub span: Span,
}

impl fmt::Display for PortRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let dir = match self.direction {
            Direction::In => "in",
            Direction::Out => "out",
        };
        write!(f, "{}.{dir}{}", self.component, self.index)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ComponentKind {
    Cavity,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub value: Expr,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Component {
    pub name: String,
    pub kind: ComponentKind,
    /// One decay rate per port.
    pub couplings: Vec<Expr>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Connection {
    pub from: PortRef,
    pub to: PortRef,
    pub span: Span,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct NetworkDesc {
    pub params: Vec<Param>,
    pub components: Vec<Component>,
    pub connections: Vec<Connection>,
    /// External inputs in declaration order.
    pub inputs: Vec<PortRef>,
    /// External outputs in declaration order.
    pub outputs: Vec<PortRef>,
}

impl NetworkDesc {
    pub fn component(&self, name: &str) -> Option<(usize, &Component)> {
        self.components.iter().enumerate().find(|(_, c)| c.name == name)
    }
}

/// Canonical source text; parses back to an equal description.
impl fmt::Display for NetworkDesc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in &self.params {
            writeln!(f, "param {} = {}", p.name, p.value)?;
        }
        for c in &self.components {
            let couplings: Vec<String> = c.couplings.iter().map(|e| e.to_string()).collect();
            writeln!(f, "cavity {} couplings [{}]", c.name, couplings.join(", "))?;
        }
        for c in &self.connections {
            writeln!(f, "connect {} -> {}", c.from, c.to)?;
        }
        for p in &self.inputs {
            writeln!(f, "input {p}")?;
        }
        for p in &self.outputs {
            writeln!(f, "output {p}")?;
        }
        Ok(())
    }
}
