//! Recursive-descent parser for the expression grammar.
//!
//! Precedence `^` > unary `-` > `*` `/` > `+` `-`; binary `+ - * /` are
//! left-associative, `^` is right-associative; whitespace is insignificant.

use std::f64::consts::{E, PI};

use super::{
    add, cos, cosh, div, exp, log, mul, neg, pow, sin, sinh, sqrt, sub, tan, ParseError,
    ScalarExpr, VarSet,
};

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
    Eof,
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer {
            src: src.as_bytes(),
            pos: 0,
        }
    }

    fn tokens(mut self) -> Result<Vec<(Tok, usize)>, ParseError> {
        let mut out = Vec::new();
        loop {
            while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
                self.pos += 1;
            }
            let start = self.pos;
            if self.pos >= self.src.len() {
                out.push((Tok::Eof, start));
                return Ok(out);
            }
            let c = self.src[self.pos];
            let tok = match c {
                b'+' => {
                    self.pos += 1;
                    Tok::Plus
                }
                b'-' => {
                    self.pos += 1;
                    Tok::Minus
                }
                b'*' => {
                    self.pos += 1;
                    Tok::Star
                }
                b'/' => {
                    self.pos += 1;
                    Tok::Slash
                }
                b'^' => {
                    self.pos += 1;
                    Tok::Caret
                }
                b'(' => {
                    self.pos += 1;
                    Tok::LParen
                }
                b')' => {
                    self.pos += 1;
                    Tok::RParen
                }
                b'0'..=b'9' | b'.' => self.lex_number(start)?,
                c if c.is_ascii_alphabetic() || c == b'_' => {
                    while self.pos < self.src.len()
                        && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
                    {
                        self.pos += 1;
                    }
                    let name = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
                    Tok::Ident(name.to_string())
                }
                other => {
                    return Err(ParseError::Syntax {
                        offset: start,
                        message: format!("unexpected character `{}`", other as char),
                    })
                }
            };
            out.push((tok, start));
        }
    }

    fn lex_number(&mut self, start: usize) -> Result<Tok, ParseError> {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if self.pos < self.src.len() && self.src[self.pos] == b'.' {
            self.pos += 1;
            while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
        }
        if self.pos < self.src.len() && (self.src[self.pos] == b'e' || self.src[self.pos] == b'E') {
            let mark = self.pos;
            self.pos += 1;
            if self.pos < self.src.len() && (self.src[self.pos] == b'+' || self.src[self.pos] == b'-')
            {
                self.pos += 1;
            }
            if self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                    self.pos += 1;
                }
            } else {
                // `2e` starts an identifier-looking tail; the exponent marker
                // was not part of the number
                self.pos = mark;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        let value: f64 = text.parse().map_err(|_| ParseError::Syntax {
            offset: start,
            message: format!("invalid numeric literal `{text}`"),
        })?;
        if !value.is_finite() {
            return Err(ParseError::Syntax {
                offset: start,
                message: format!("numeric literal `{text}` overflows f64"),
            });
        }
        Ok(Tok::Num(value))
    }
}

struct Parser<'v> {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    vars: &'v VarSet,
}

/// Parse `source` over the declared variables. Identifier resolution order:
/// function names, the constants `pi` and `e`, then declared variables.
pub fn parse_expr(source: &str, vars: &VarSet) -> Result<ScalarExpr, ParseError> {
    let toks = Lexer::new(source).tokens()?;
    let mut p = Parser { toks, pos: 0, vars };
    let expr = p.expr()?;
    match p.peek() {
        (Tok::Eof, _) => Ok(expr),
        (tok, offset) => Err(ParseError::Syntax {
            offset,
            message: format!("unexpected trailing input `{tok:?}`"),
        }),
    }
}

impl<'v> Parser<'v> {
    fn peek(&self) -> (Tok, usize) {
        self.toks[self.pos].clone()
    }

    fn bump(&mut self) -> (Tok, usize) {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn expect_rparen(&mut self) -> Result<(), ParseError> {
        match self.bump() {
            (Tok::RParen, _) => Ok(()),
            (_, offset) => Err(ParseError::Syntax {
                offset,
                message: "expected `)`".to_string(),
            }),
        }
    }

    fn expr(&mut self) -> Result<ScalarExpr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            match self.peek().0 {
                Tok::Plus => {
                    self.bump();
                    lhs = add(lhs, self.term()?);
                }
                Tok::Minus => {
                    self.bump();
                    lhs = sub(lhs, self.term()?);
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<ScalarExpr, ParseError> {
        let mut lhs = self.factor()?;
        loop {
            match self.peek().0 {
                Tok::Star => {
                    self.bump();
                    lhs = mul(lhs, self.factor()?);
                }
                Tok::Slash => {
                    self.bump();
                    lhs = div(lhs, self.factor()?);
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn factor(&mut self) -> Result<ScalarExpr, ParseError> {
        if let (Tok::Minus, _) = self.peek() {
            self.bump();
            return Ok(neg(self.factor()?));
        }
        self.power()
    }

    fn power(&mut self) -> Result<ScalarExpr, ParseError> {
        let base = self.atom()?;
        if let (Tok::Caret, _) = self.peek() {
            self.bump();
            // right-associative; exponent may carry its own unary minus
            let exponent = self.factor()?;
            return Ok(pow(base, exponent));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<ScalarExpr, ParseError> {
        match self.bump() {
            (Tok::Num(v), _) => Ok(ScalarExpr::Num(v)),
            (Tok::LParen, _) => {
                let inner = self.expr()?;
                self.expect_rparen()?;
                Ok(inner)
            }
            (Tok::Ident(name), offset) => self.ident(name, offset),
            (Tok::Eof, offset) => Err(ParseError::Syntax {
                offset,
                message: "unexpected end of input".to_string(),
            }),
            (tok, offset) => Err(ParseError::Syntax {
                offset,
                message: format!("unexpected token `{tok:?}`"),
            }),
        }
    }

    fn ident(&mut self, name: String, offset: usize) -> Result<ScalarExpr, ParseError> {
        let func: Option<fn(ScalarExpr) -> ScalarExpr> = match name.as_str() {
            "sin" => Some(sin),
            "cos" => Some(cos),
            "tan" => Some(tan),
            "exp" => Some(exp),
            "log" => Some(log),
            "sqrt" => Some(sqrt),
            "sinh" => Some(sinh),
            "cosh" => Some(cosh),
            _ => None,
        };
        if let Some(f) = func {
            match self.bump() {
                (Tok::LParen, _) => {}
                (_, off) => {
                    return Err(ParseError::Syntax {
                        offset: off,
                        message: format!("expected `(` after function `{name}`"),
                    })
                }
            }
            let arg = self.expr()?;
            self.expect_rparen()?;
            return Ok(f(arg));
        }
        match name.as_str() {
            "pi" => return Ok(ScalarExpr::Num(PI)),
            "e" => return Ok(ScalarExpr::Num(E)),
            _ => {}
        }
        match self.vars.index_of(&name) {
            Some(index) => Ok(ScalarExpr::var(index, &name)),
            None => Err(ParseError::UnknownIdentifier { name, offset }),
        }
    }
}

