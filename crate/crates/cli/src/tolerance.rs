//! Univariate polynomial expressions in `p`, e.g. `(1-p)^2` or `1 - (2p - 3/2 p^2)`.

use ptcws_core::poly::Poly;
use ptcws_core::{parse_rational, Q};

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("tolerance expression, column {col}: {msg}")]
pub struct ExprError {
    pub col: usize,
    pub msg: String,
}

struct P<'a> {
    s: &'a [u8],
    i: usize,
}

impl P<'_> {
    fn skip(&mut self) {
        while self.i < self.s.len() && self.s[self.i].is_ascii_whitespace() {
            self.i += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip();
        self.s.get(self.i).copied()
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, ExprError> {
        Err(ExprError { col: self.i + 1, msg: msg.into() })
    }

    fn expr(&mut self) -> Result<Poly, ExprError> {
        let mut acc = self.term()?;
        while let Some(c @ (b'+' | b'-')) = self.peek() {
            self.i += 1;
            let t = self.term()?;
            acc = if c == b'+' { &acc + &t } else { &acc - &t };
        }
        Ok(acc)
    }

    fn term(&mut self) -> Result<Poly, ExprError> {
        let mut acc = self.signed()?;
        loop {
            match self.peek() {
                Some(b'*') => {
                    self.i += 1;
                    acc = &acc * &self.signed()?;
                }
                Some(b'/') => {
                    self.i += 1;
                    let d = self.signed()?;
                    match d.coeffs() {
                        [c] => acc = acc.scale(&(Q::from_integer(1.into()) / c)),
                        [] => return self.err("division by zero"),
                        _ => return self.err("division by a non-constant polynomial"),
                    }
                }
                Some(b'p' | b'(') | Some(b'0'..=b'9' | b'.') => acc = &acc * &self.power()?,
                _ => return Ok(acc),
            }
        }
    }

    fn signed(&mut self) -> Result<Poly, ExprError> {
        if self.peek() == Some(b'-') {
            self.i += 1;
            return Ok(-&self.signed()?);
        }
        self.power()
    }

    fn power(&mut self) -> Result<Poly, ExprError> {
        let base = self.atom()?;
        if self.peek() == Some(b'^') {
            self.i += 1;
            self.skip();
            let start = self.i;
            while self.i < self.s.len() && self.s[self.i].is_ascii_digit() {
                self.i += 1;
            }
            let k: u32 = match std::str::from_utf8(&self.s[start..self.i]).ok().and_then(|t| t.parse().ok()) {
                Some(k) if k <= 64 => k,
                _ => return self.err("expected a small exponent"),
            };
            return Ok(base.pow(k));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Poly, ExprError> {
        match self.peek() {
            Some(b'(') => {
                self.i += 1;
                let e = self.expr()?;
                if self.peek() != Some(b')') {
                    return self.err("expected ')'");
                }
                self.i += 1;
                Ok(e)
            }
            Some(b'p') => {
                self.i += 1;
                Ok(Poly::p())
            }
            Some(b'0'..=b'9' | b'.') => {
                let start = self.i;
                while self.i < self.s.len() && (self.s[self.i].is_ascii_digit() || self.s[self.i] == b'.') {
                    self.i += 1;
                }
                let t = std::str::from_utf8(&self.s[start..self.i]).expect("ascii");
                match parse_rational(t) {
                    Some(q) => Ok(Poly::constant(q)),
                    None => self.err(format!("bad number {t}")),
                }
            }
            Some(c) => self.err(format!("unexpected {:?}", c as char)),
            None => self.err("unexpected end"),
        }
    }
}

/// Parses a polynomial in `p` with exact rational coefficients.
pub fn parse_poly(text: &str) -> Result<Poly, ExprError> {
    let mut p = P { s: text.as_bytes(), i: 0 };
    let e = p.expr()?;
    if p.peek().is_some() {
        return p.err("trailing input");
    }
    Ok(e)
}
