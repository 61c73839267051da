use super::{Diagnostic, Span};

#[derive(Debug, Clone, PartialEq)]
pub(super) enum Tok {
    Ident(String),
    Num(f64),
    Eq,
    Comma,
    LBracket,
    RBracket,
    LParen,
    RParen,
    Dot,
    Arrow,
    Plus,
    Minus,
    Star,
    Slash,
}

impl Tok {
    pub(super) fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("'{s}'"),
            Tok::Num(x) => format!("number {x}"),
            Tok::Eq => "'='".into(),
            Tok::Comma => "','".into(),
            Tok::LBracket => "'['".into(),
            Tok::RBracket => "']'".into(),
            Tok::LParen => "'('".into(),
            Tok::RParen => "')'".into(),
            Tok::Dot => "'.'".into(),
            Tok::Arrow => "'->'".into(),
            Tok::Plus => "'+'".into(),
            Tok::Minus => "'-'".into(),
            Tok::Star => "'*'".into(),
            Tok::Slash => "'/'".into(),
        }
    }
}

/// Tokens of one source line, with the span just past its last character.
#[derive(Debug)]
pub(super) struct Line {
    pub tokens: Vec<(Tok, Span)>,
    pub end: Span,
}

pub(super) fn lex(source: &str) -> Result<Vec<Line>, Diagnostic> {
    let mut lines = Vec::new();
    for (i, text) in source.lines().enumerate() {
        let line = i + 1;
        let text = text.split('#').next().unwrap_or("");
        let chars: Vec<char> = text.chars().collect();
        let mut tokens = Vec::new();
        let mut k = 0;
        while k < chars.len() {
            let c = chars[k];
            let span = Span { line, col: k + 1 };
            if c.is_whitespace() {
                k += 1;
                continue;
            }
            if c.is_ascii_alphabetic() || c == '_' {
                let start = k;
                while k < chars.len() && (chars[k].is_ascii_alphanumeric() || chars[k] == '_') {
                    k += 1;
                }
                tokens.push((Tok::Ident(chars[start..k].iter().collect()), span));
                continue;
            }
            if c.is_ascii_digit() {
                let start = k;
                while k < chars.len() && chars[k].is_ascii_digit() {
                    k += 1;
                }
                if k < chars.len() && chars[k] == '.' {
                    k += 1;
                    while k < chars.len() && chars[k].is_ascii_digit() {
                        k += 1;
                    }
                }
                if k < chars.len() && (chars[k] == 'e' || chars[k] == 'E') {
                    let mut j = k + 1;
                    if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                        j += 1;
                    }
                    if j < chars.len() && chars[j].is_ascii_digit() {
                        while j < chars.len() && chars[j].is_ascii_digit() {
                            j += 1;
                        }
                        k = j;
                    }
                }
                let text: String = chars[start..k].iter().collect();
                let value: f64 = text
                    .parse()
                    .map_err(|_| Diagnostic::new(span, format!("malformed number '{text}'")))?;
                if !value.is_finite() {
                    return Err(Diagnostic::new(span, format!("number '{text}' is out of range")));
                }
                tokens.push((Tok::Num(value), span));
                continue;
            }
            let tok = match c {
                '=' => Tok::Eq,
                ',' => Tok::Comma,
                '[' => Tok::LBracket,
                ']' => Tok::RBracket,
                '(' => Tok::LParen,
                ')' => Tok::RParen,
                '.' => Tok::Dot,
                '+' => Tok::Plus,
                '*' => Tok::Star,
                '/' => Tok::Slash,
                '-' if chars.get(k + 1) == Some(&'>') => {
                    k += 1;
                    Tok::Arrow
                }
                '-' => Tok::Minus,
                other => {
                    return Err(Diagnostic::new(span, format!("unexpected character '{other}'")))
                }
            };
            k += 1;
            tokens.push((tok, span));
        }
        if !tokens.is_empty() {
            lines.push(Line { tokens, end: Span { line, col: chars.len() + 1 } });
        }
    }
    Ok(lines)
}
