//! Text grammar for polynomial Hamiltonians.
//!
//! ```text
//! expr   := [sign] term (sign term)*
//! term   := factor (['*'] factor)*
//! factor := atom ['^' integer]
//! atom   := number ['i'] | 'i' | 'a' | 'adag' | 'b' | 'bdag' | '(' expr ')'
//! number := digits ['.' digits] [('e'|'E') [sign] digits] ['/' digits]
//! ```
//!
//! Whitespace between tokens is ignored. Errors carry the byte offset of the
//! offending input.

use num_traits::Zero;
use thiserror::Error;

use super::expr::{LadderOp, OperatorExpr, Word};
use super::rational::{parse_decimal, ComplexRational, Rational};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("parse error at byte {offset}: {message}")]
pub struct ParseError {
    pub offset: usize,
    pub message: String,
}

pub fn parse_hamiltonian(text: &str) -> Result<OperatorExpr, ParseError> {
    let mut p = Parser { src: text, pos: 0 };
    let e = p.expr()?;
    p.skip_ws();
    if p.pos < text.len() {
        return Err(p.error(format!("unexpected '{}'", p.peek_char().unwrap_or(' '))));
    }
    Ok(e)
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn error(&self, message: impl Into<String>) -> ParseError {
        ParseError { offset: self.pos, message: message.into() }
    }

    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn peek_char(&self) -> Option<char> {
        self.rest().chars().next()
    }

    fn skip_ws(&mut self) {
        while let Some(c) = self.peek_char() {
            if c.is_whitespace() {
                self.pos += c.len_utf8();
            } else {
                break;
            }
        }
    }

    fn eat(&mut self, c: char) -> bool {
        self.skip_ws();
        if self.peek_char() == Some(c) {
            self.pos += c.len_utf8();
            true
        } else {
            false
        }
    }

    fn sign(&mut self) -> Option<bool> {
        if self.eat('+') {
            Some(false)
        } else if self.eat('-') {
            Some(true)
        } else {
            None
        }
    }

    fn expr(&mut self) -> Result<OperatorExpr, ParseError> {
        self.skip_ws();
        let negate_first = self.sign().unwrap_or(false);
        let mut acc = self.signed_term(negate_first)?;
        while let Some(neg) = self.sign() {
            acc = acc.add(&self.signed_term(neg)?);
        }
        Ok(acc)
    }

    fn signed_term(&mut self, negate: bool) -> Result<OperatorExpr, ParseError> {
        let t = self.term()?;
        Ok(if negate { OperatorExpr::term(ComplexRational::from_int(-1), Word::identity()).product(&t) } else { t })
    }

    fn starts_factor(&mut self) -> bool {
        self.skip_ws();
        matches!(self.peek_char(), Some(c) if c.is_ascii_digit() || c == '.' || c == '(' || c == 'a' || c == 'b' || c == 'i')
    }

    fn term(&mut self) -> Result<OperatorExpr, ParseError> {
        let mut acc = self.factor()?;
        loop {
            if self.eat('*') || self.starts_factor() {
                acc = acc.product(&self.factor()?);
            } else {
                return Ok(acc);
            }
        }
    }

    fn factor(&mut self) -> Result<OperatorExpr, ParseError> {
        let base = self.atom()?;
        if self.eat('^') {
            self.skip_ws();
            let start = self.pos;
            let digits: String = self.rest().chars().take_while(|c| c.is_ascii_digit()).collect();
            if digits.is_empty() {
                return Err(self.error("expected integer exponent after '^'"));
            }
            self.pos += digits.len();
            let n: usize = digits
                .parse()
                .map_err(|_| ParseError { offset: start, message: "exponent too large".into() })?;
            if n > 16 {
                return Err(ParseError { offset: start, message: format!("exponent {n} exceeds 16") });
            }
            let mut out = OperatorExpr::term(ComplexRational::one(), Word::identity());
            for _ in 0..n {
                out = out.product(&base);
            }
            Ok(out)
        } else {
            Ok(base)
        }
    }

    fn atom(&mut self) -> Result<OperatorExpr, ParseError> {
        self.skip_ws();
        let rest = self.rest();
        let Some(c) = self.peek_char() else {
            return Err(self.error("unexpected end of input"));
        };
        if c == '(' {
            self.pos += 1;
            let inner = self.expr()?;
            if !self.eat(')') {
                return Err(self.error("expected ')'"));
            }
            return Ok(inner);
        }
        if c.is_ascii_digit() || c == '.' {
            let value = self.number()?;
            let coeff = if self.rest().starts_with('i') && !self.rest()[1..].starts_with(char::is_alphanumeric) {
                self.pos += 1;
                ComplexRational::imag(value)
            } else {
                ComplexRational::real(value)
            };
            return Ok(OperatorExpr::term(coeff, Word::identity()));
        }
        let ident: String = rest.chars().take_while(|c| c.is_ascii_alphanumeric() || *c == '_').collect();
        let op = match ident.as_str() {
            "i" => return self.consume(ident.len(), OperatorExpr::term(ComplexRational::i(), Word::identity())),
            "a" => LadderOp::annihilate(0),
            "adag" => LadderOp::create(0),
            "b" => LadderOp::annihilate(1),
            "bdag" => LadderOp::create(1),
            "" => return Err(self.error(format!("unexpected '{c}'"))),
            other => return Err(self.error(format!("unknown symbol '{other}' (expected a, adag, b, bdag or i)"))),
        };
        self.consume(ident.len(), OperatorExpr::term(ComplexRational::one(), Word(vec![op])))
    }

    fn consume(&mut self, n: usize, e: OperatorExpr) -> Result<OperatorExpr, ParseError> {
        self.pos += n;
        Ok(e)
    }

    fn number(&mut self) -> Result<Rational, ParseError> {
        let start = self.pos;
        let bytes = self.src.as_bytes();
        let mut end = self.pos;
        while end < bytes.len() && (bytes[end].is_ascii_digit() || bytes[end] == b'.') {
            end += 1;
        }
        if end < bytes.len() && (bytes[end] == b'e' || bytes[end] == b'E') {
            let mut k = end + 1;
            if k < bytes.len() && (bytes[k] == b'+' || bytes[k] == b'-') {
                k += 1;
            }
            if k < bytes.len() && bytes[k].is_ascii_digit() {
                while k < bytes.len() && bytes[k].is_ascii_digit() {
                    k += 1;
                }
                end = k;
            }
        }
        let literal = &self.src[start..end];
        let value = parse_decimal(literal.trim_start_matches('+'))
            .ok_or_else(|| ParseError { offset: start, message: format!("malformed number '{literal}'") })?;
        self.pos = end;
        if self.rest().starts_with('/') {
            self.pos += 1;
            let dstart = self.pos;
            let digits: String = self.rest().chars().take_while(|c| c.is_ascii_digit()).collect();
            if digits.is_empty() {
                return Err(self.error("expected denominator after '/'"));
            }
            self.pos += digits.len();
            let d = parse_decimal(&digits).expect("digits parse");
            if d.is_zero() {
                return Err(ParseError { offset: dstart, message: "zero denominator".into() });
            }
            return Ok(value / d);
        }
        Ok(value)
    }
}
