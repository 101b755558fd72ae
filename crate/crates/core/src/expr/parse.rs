//! Recursive-descent parser for single-variable scientific expressions.
//!
//! Grammar (whitespace is insignificant):
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := ('-' | '+') unary | power
//! power   := primary ('^' unary)?          exponent must be constant
//! primary := number | 'pi' | VAR | FUNC '(' expr ')' | '(' expr ')'
//! FUNC    := sin | cos | tan | exp | log | ln | sqrt
//! ```
//!
//! A minus sign directly in front of a numeric literal is folded into a
//! negative constant.

use thiserror::Error;

use super::ast::{BinaryOp, Expr, ExprKind, Span, UnaryOp};
use super::eval::eval_value;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseErrorKind {
    #[error("empty expression")]
    Empty,
    #[error("unexpected character '{0}'")]
    UnexpectedChar(char),
    #[error("unexpected {found}, expected {expected}")]
    UnexpectedToken { found: String, expected: &'static str },
    #[error("unexpected end of input, expected {expected}")]
    UnexpectedEnd { expected: &'static str },
    #[error("unknown identifier '{0}'")]
    UnknownIdentifier(String),
    #[error("invalid number literal '{0}'")]
    InvalidNumber(String),
    #[error("exponent must be a constant expression")]
    VariableExponent,
    #[error("exponent does not evaluate to a finite number")]
    InvalidExponent,
}

/// Parse failure with the byte offset where it was detected.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("{kind} at offset {offset}")]
pub struct ParseError {
    pub kind: ParseErrorKind,
    pub offset: usize,
}

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
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Num(x) => format!("number {x}"),
            Tok::Ident(s) => format!("identifier '{s}'"),
            Tok::Plus => "'+'".into(),
            Tok::Minus => "'-'".into(),
            Tok::Star => "'*'".into(),
            Tok::Slash => "'/'".into(),
            Tok::Caret => "'^'".into(),
            Tok::LParen => "'('".into(),
            Tok::RParen => "')'".into(),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    span: Span,
}

fn lex(text: &str) -> Result<Vec<Token>, ParseError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let single = match c {
            b'+' => Some(Tok::Plus),
            b'-' => Some(Tok::Minus),
            b'*' => Some(Tok::Star),
            b'/' => Some(Tok::Slash),
            b'^' => Some(Tok::Caret),
            b'(' => Some(Tok::LParen),
            b')' => Some(Tok::RParen),
            _ => None,
        };
        if let Some(tok) = single {
            i += 1;
            out.push(Token { tok, span: Span::new(start, i) });
            continue;
        }
        if c.is_ascii_digit() || c == b'.' {
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
            let lit = &text[start..i];
            let value: f64 = lit.parse().map_err(|_| ParseError {
                kind: ParseErrorKind::InvalidNumber(lit.to_string()),
                offset: start,
            })?;
            out.push(Token { tok: Tok::Num(value), span: Span::new(start, i) });
            continue;
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push(Token {
                tok: Tok::Ident(text[start..i].to_string()),
                span: Span::new(start, i),
            });
            continue;
        }
        let ch = text[start..].chars().next().unwrap_or('?');
        return Err(ParseError { kind: ParseErrorKind::UnexpectedChar(ch), offset: start });
    }
    Ok(out)
}

struct Parser<'a> {
    tokens: Vec<Token>,
    pos: usize,
    end: usize,
    var: &'a str,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos).map(|t| &t.tok)
    }

    fn peek_at(&self, k: usize) -> Option<&Tok> {
        self.tokens.get(self.pos + k).map(|t| &t.tok)
    }

    fn offset(&self) -> usize {
        self.tokens.get(self.pos).map_or(self.end, |t| t.span.start)
    }

    fn bump(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn unexpected(&self, expected: &'static str) -> ParseError {
        match self.tokens.get(self.pos) {
            Some(t) => ParseError {
                kind: ParseErrorKind::UnexpectedToken { found: t.tok.describe(), expected },
                offset: t.span.start,
            },
            None => ParseError { kind: ParseErrorKind::UnexpectedEnd { expected }, offset: self.end },
        }
    }

    fn expect(&mut self, tok: Tok, expected: &'static str) -> Result<Span, ParseError> {
        if self.peek() == Some(&tok) {
            Ok(self.bump().map(|t| t.span).unwrap_or_default())
        } else {
            Err(self.unexpected(expected))
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Some(Tok::Plus) => BinaryOp::Add,
                Some(Tok::Minus) => BinaryOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term()?;
            let span = Span::new(lhs.span.start, rhs.span.end);
            lhs = Expr::new(ExprKind::Binary(op, Box::new(lhs), Box::new(rhs)), span);
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Some(Tok::Star) => BinaryOp::Mul,
                Some(Tok::Slash) => BinaryOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary()?;
            let span = Span::new(lhs.span.start, rhs.span.end);
            lhs = Expr::new(ExprKind::Binary(op, Box::new(lhs), Box::new(rhs)), span);
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        match self.peek() {
            Some(Tok::Minus) => {
                let start = self.offset();
                self.bump();
                // "-3" is a literal, but "-3^2" is -(3^2).
                if let (Some(Tok::Num(x)), next) = (self.peek().cloned(), self.peek_at(1)) {
                    if next != Some(&Tok::Caret) {
                        let tok = self.bump().expect("peeked");
                        return Ok(Expr::new(ExprKind::Const(-x), Span::new(start, tok.span.end)));
                    }
                }
                let arg = self.unary()?;
                let span = Span::new(start, arg.span.end);
                Ok(Expr::new(ExprKind::Unary(UnaryOp::Neg, Box::new(arg)), span))
            }
            Some(Tok::Plus) => {
                self.bump();
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.primary()?;
        if self.peek() != Some(&Tok::Caret) {
            return Ok(base);
        }
        self.bump();
        let exp_offset = self.offset();
        let exponent = self.unary()?;
        if exponent.contains_var() {
            return Err(ParseError { kind: ParseErrorKind::VariableExponent, offset: exp_offset });
        }
        let value = eval_value(&exponent, 0.0)
            .ok()
            .filter(|v| v.is_finite())
            .ok_or(ParseError { kind: ParseErrorKind::InvalidExponent, offset: exp_offset })?;
        let span = Span::new(base.span.start, exponent.span.end);
        Ok(Expr::new(ExprKind::Pow(Box::new(base), value), span))
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let Some(token) = self.tokens.get(self.pos).cloned() else {
            return Err(self.unexpected("an operand"));
        };
        match token.tok {
            Tok::Num(x) => {
                self.bump();
                Ok(Expr::new(ExprKind::Const(x), token.span))
            }
            Tok::LParen => {
                self.bump();
                let mut inner = self.expr()?;
                let close = self.expect(Tok::RParen, "')'")?;
                inner.span = Span::new(token.span.start, close.end);
                Ok(inner)
            }
            Tok::Ident(ref name) => {
                self.bump();
                if name == self.var {
                    return Ok(Expr::new(ExprKind::Var, token.span));
                }
                if name == "pi" {
                    return Ok(Expr::new(ExprKind::Const(std::f64::consts::PI), token.span));
                }
                let Some(op) = UnaryOp::from_function_name(name) else {
                    return Err(ParseError {
                        kind: ParseErrorKind::UnknownIdentifier(name.clone()),
                        offset: token.span.start,
                    });
                };
                self.expect(Tok::LParen, "'(' after function name")?;
                let arg = self.expr()?;
                let close = self.expect(Tok::RParen, "')'")?;
                Ok(Expr::new(
                    ExprKind::Unary(op, Box::new(arg)),
                    Span::new(token.span.start, close.end),
                ))
            }
            _ => Err(self.unexpected("an operand")),
        }
    }
}

/// Parses `text` with `t` as the parameter name.
pub fn parse_expression(text: &str) -> Result<Expr, ParseError> {
    parse_expression_in(text, "t")
}

/// Parses `text`, treating the identifier `var` as the curve parameter.
pub fn parse_expression_in(text: &str, var: &str) -> Result<Expr, ParseError> {
    if text.trim().is_empty() {
        return Err(ParseError { kind: ParseErrorKind::Empty, offset: 0 });
    }
    let tokens = lex(text)?;
    let mut parser = Parser { tokens, pos: 0, end: text.len(), var };
    let expr = parser.expr()?;
    if parser.pos < parser.tokens.len() {
        return Err(parser.unexpected("operator or end of input"));
    }
    Ok(expr)
}
