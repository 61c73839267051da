use std::collections::HashMap;

use super::lexer::{lex, Line, Tok};
use super::{
    BinOp, Component, ComponentKind, Connection, Diagnostic, Direction, Expr, NetworkDesc, Param,
    PortRef, Span,
};
use super::compile::{MAX_COMPONENTS, MAX_PORTS};

/// Deepest expression nesting accepted.
pub const MAX_DEPTH: usize = 64;

const KEYWORDS: &[&str] = &["param", "cavity", "couplings", "connect", "input", "output", "sqrt"];

type PResult<T> = Result<T, Diagnostic>;

pub fn parse(source: &str) -> Result<NetworkDesc, Diagnostic> {
    let mut state = State::default();
    for line in lex(source)? {
        let mut cur = Cursor { line: &line, pos: 0 };
        state.statement(&mut cur)?;
        if let Some((tok, span)) = cur.peek() {
            return Err(Diagnostic::new(span, format!("unexpected {} after statement", tok.describe())));
        }
    }
    Ok(state.desc)
}

struct Cursor<'a> {
    line: &'a Line,
    pos: usize,
}

impl Cursor<'_> {
    fn peek(&self) -> Option<(&Tok, Span)> {
        self.line.tokens.get(self.pos).map(|(t, s)| (t, *s))
    }

    fn here(&self) -> Span {
        self.peek().map_or(self.line.end, |(_, s)| s)
    }

    fn next(&mut self) -> Option<(Tok, Span)> {
        let t = self.line.tokens.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn eat(&mut self, want: &Tok) -> bool {
        if self.peek().is_some_and(|(t, _)| t == want) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, want: &Tok) -> PResult<Span> {
        match self.next() {
            Some((t, s)) if &t == want => Ok(s),
            Some((t, s)) => {
                Err(Diagnostic::new(s, format!("expected {}, found {}", want.describe(), t.describe())))
            }
            None => Err(Diagnostic::new(self.line.end, format!("expected {} at end of line", want.describe()))),
        }
    }

    fn ident(&mut self, what: &str) -> PResult<(String, Span)> {
        match self.next() {
            Some((Tok::Ident(name), s)) => Ok((name, s)),
            Some((t, s)) => Err(Diagnostic::new(s, format!("expected {what}, found {}", t.describe()))),
            None => Err(Diagnostic::new(self.line.end, format!("expected {what} at end of line"))),
        }
    }
}

#[derive(Default)]
struct State {
    desc: NetworkDesc,
    params: HashMap<String, Span>,
    total_ports: usize,
    /// Where each (component, direction, index) port was last wired.
    used: HashMap<(String, bool, usize), (Span, &'static str)>,
}

impl State {
    fn statement(&mut self, cur: &mut Cursor) -> PResult<()> {
        let (kw, span) = cur.ident("a statement keyword")?;
        match kw.as_str() {
            "param" => self.param(cur, span),
            "cavity" => self.cavity(cur, span),
            "connect" => self.connect(cur, span),
            "input" => self.external(cur, Direction::In),
            "output" => self.external(cur, Direction::Out),
            other => Err(Diagnostic::new(span, format!("unknown statement '{other}'"))),
        }
    }

    fn fresh_name(&self, cur: &mut Cursor, what: &str) -> PResult<(String, Span)> {
        let (name, span) = cur.ident(what)?;
        if KEYWORDS.contains(&name.as_str()) {
            return Err(Diagnostic::new(span, format!("'{name}' is a reserved word")));
        }
        Ok((name, span))
    }

    fn param(&mut self, cur: &mut Cursor, span: Span) -> PResult<()> {
        let (name, name_span) = self.fresh_name(cur, "a parameter name")?;
        if let Some(prev) = self.params.get(&name) {
            return Err(Diagnostic::new(
                name_span,
                format!("parameter '{name}' already defined on line {}", prev.line),
            ));
        }
        cur.expect(&Tok::Eq)?;
        let value = self.expr(cur, 0)?;
        self.params.insert(name.clone(), name_span);
        self.desc.params.push(Param { name, value, span });
        Ok(())
    }

    fn cavity(&mut self, cur: &mut Cursor, span: Span) -> PResult<()> {
        let (name, name_span) = self.fresh_name(cur, "a component name")?;
        if let Some((_, prev)) = self.desc.component(&name) {
            return Err(Diagnostic::new(
                name_span,
                format!("component '{name}' already declared on line {}", prev.span.line),
            ));
        }
        if self.desc.components.len() >= MAX_COMPONENTS {
            return Err(Diagnostic::new(span, format!("more than {MAX_COMPONENTS} components")));
        }
        let (kw, kw_span) = cur.ident("'couplings'")?;
        if kw != "couplings" {
            return Err(Diagnostic::new(kw_span, format!("expected 'couplings', found '{kw}'")));
        }
        cur.expect(&Tok::LBracket)?;
        let mut couplings = vec![self.expr(cur, 0)?];
        while cur.eat(&Tok::Comma) {
            couplings.push(self.expr(cur, 0)?);
        }
        cur.expect(&Tok::RBracket)?;
        self.total_ports += couplings.len();
        if self.total_ports > MAX_PORTS {
            return Err(Diagnostic::new(span, format!("more than {MAX_PORTS} ports in total")));
        }
        self.desc.components.push(Component { name, kind: ComponentKind::Cavity, couplings, span });
        Ok(())
    }

    fn port(&mut self, cur: &mut Cursor) -> PResult<PortRef> {
        let (component, span) = cur.ident("a component name")?;
        let n_ports = match self.desc.component(&component) {
            Some((_, c)) => c.couplings.len(),
            None => return Err(Diagnostic::new(span, format!("unknown identifier '{component}'"))),
        };
        cur.expect(&Tok::Dot)?;
        let (name, port_span) = cur.ident("a port name")?;
        let (direction, digits) = if let Some(d) = name.strip_prefix("out") {
            (Direction::Out, d)
        } else if let Some(d) = name.strip_prefix("in") {
            (Direction::In, d)
        } else {
            return Err(Diagnostic::new(port_span, format!("'{name}' is not a port name (expected inJ or outJ)")));
        };
        if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
            return Err(Diagnostic::new(port_span, format!("'{name}' is not a port name (expected inJ or outJ)")));
        }
        let index = digits.parse::<usize>().unwrap_or(usize::MAX);
        if index == 0 || index > n_ports {
            return Err(Diagnostic::new(
                port_span,
                format!("arity mismatch: '{component}' has {n_ports} ports, no port {digits}"),
            ));
        }
        Ok(PortRef { component, direction, index, span })
    }

    fn claim(&mut self, port: &PortRef, role: &'static str) -> PResult<()> {
        let key = (port.component.clone(), port.direction == Direction::In, port.index);
        if let Some((prev, prev_role)) = self.used.get(&key) {
            return Err(Diagnostic::new(
                port.span,
                format!("duplicate connection: {port} already used as {prev_role} on line {}", prev.line),
            ));
        }
        self.used.insert(key, (port.span, role));
        Ok(())
    }

    fn connect(&mut self, cur: &mut Cursor, span: Span) -> PResult<()> {
        let from = self.port(cur)?;
        if from.direction != Direction::Out {
            return Err(Diagnostic::new(from.span, "source is not an output port"));
        }
        cur.expect(&Tok::Arrow)?;
        let to = self.port(cur)?;
        if to.direction != Direction::In {
            return Err(Diagnostic::new(to.span, "target is not an input port"));
        }
        self.claim(&from, "a connection source")?;
        self.claim(&to, "a connection target")?;
        self.desc.connections.push(Connection { from, to, span });
        Ok(())
    }

    fn external(&mut self, cur: &mut Cursor, direction: Direction) -> PResult<()> {
        let port = self.port(cur)?;
        if port.direction != direction {
            let msg = match direction {
                Direction::In => "external input must name an input port",
                Direction::Out => "external output must name an output port",
            };
            return Err(Diagnostic::new(port.span, msg));
        }
        match direction {
            Direction::In => {
                self.claim(&port, "an external input")?;
                self.desc.inputs.push(port);
            }
            Direction::Out => {
                self.claim(&port, "an external output")?;
                self.desc.outputs.push(port);
            }
        }
        Ok(())
    }

    fn expr(&self, cur: &mut Cursor, depth: usize) -> PResult<Expr> {
        if depth > MAX_DEPTH {
            return Err(Diagnostic::new(cur.here(), "expression nested too deeply"));
        }
        let mut lhs = self.term(cur, depth)?;
        loop {
            let op = match cur.peek() {
                Some((Tok::Plus, _)) => BinOp::Add,
                Some((Tok::Minus, _)) => BinOp::Sub,
                _ => return Ok(lhs),
            };
            cur.next();
            let rhs = self.term(cur, depth)?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&self, cur: &mut Cursor, depth: usize) -> PResult<Expr> {
        let mut lhs = self.unary(cur, depth)?;
        loop {
            let op = match cur.peek() {
                Some((Tok::Star, _)) => BinOp::Mul,
                Some((Tok::Slash, _)) => BinOp::Div,
                _ => return Ok(lhs),
            };
            cur.next();
            let rhs = self.unary(cur, depth)?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&self, cur: &mut Cursor, depth: usize) -> PResult<Expr> {
        if depth > MAX_DEPTH {
            return Err(Diagnostic::new(cur.here(), "expression nested too deeply"));
        }
        if cur.eat(&Tok::Minus) {
            return Ok(Expr::Neg(Box::new(self.unary(cur, depth + 1)?)));
        }
        self.primary(cur, depth)
    }

    fn primary(&self, cur: &mut Cursor, depth: usize) -> PResult<Expr> {
        let end = cur.line.end;
        match cur.next() {
            Some((Tok::Num(x), _)) => Ok(Expr::Num(x)),
            Some((Tok::LParen, _)) => {
                let e = self.expr(cur, depth + 1)?;
                cur.expect(&Tok::RParen)?;
                Ok(e)
            }
            Some((Tok::Ident(name), span)) if name == "sqrt" => {
                cur.expect(&Tok::LParen)?;
                let mut args = vec![self.expr(cur, depth + 1)?];
                while cur.eat(&Tok::Comma) {
                    args.push(self.expr(cur, depth + 1)?);
                }
                cur.expect(&Tok::RParen)?;
                if args.len() != 1 {
                    return Err(Diagnostic::new(
                        span,
                        format!("arity mismatch: sqrt takes 1 argument, got {}", args.len()),
                    ));
                }
                Ok(Expr::Sqrt(Box::new(args.pop().unwrap())))
            }
            Some((Tok::Ident(name), span)) => {
                if self.params.contains_key(&name) {
                    Ok(Expr::Param(name, span))
                } else {
                    Err(Diagnostic::new(span, format!("unknown identifier '{name}'")))
                }
            }
            Some((t, span)) => Err(Diagnostic::new(span, format!("expected an expression, found {}", t.describe()))),
            None => Err(Diagnostic::new(end, "expected an expression at end of line")),
        }
    }
}
