//! Text grammar:
//!
//! ```text
//! poly     := sign? term (('+' | '-') term)*
//! term     := coeff? ('*'? var)*
//! var      := 'x' index ('^' exponent)?
//! ```
//!
//! Whitespace is allowed between tokens. The variable count is one more than
//! the largest index mentioned (at least 1).

use super::Polynomial;
use crate::error::{Error, Result};

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

type Term = (Vec<(usize, u32)>, f64);

impl<'a> Parser<'a> {
    fn err<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(Error::Parse { position: self.pos, message: message.into() })
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn digits(&mut self) -> usize {
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        self.pos - start
    }

    fn coeff(&mut self) -> Result<f64> {
        let start = self.pos;
        let int_digits = self.digits();
        let mut frac_digits = 0;
        if self.src.get(self.pos) == Some(&b'.') {
            self.pos += 1;
            frac_digits = self.digits();
        }
        if int_digits + frac_digits == 0 {
            self.pos = start;
            return self.err("expected a number");
        }
        if matches!(self.src.get(self.pos), Some(b'e' | b'E')) {
            let mark = self.pos;
            self.pos += 1;
            if matches!(self.src.get(self.pos), Some(b'+' | b'-')) {
                self.pos += 1;
            }
            if self.digits() == 0 {
                self.pos = mark;
                return self.err("malformed exponent in number");
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii");
        text.parse::<f64>().or_else(|_| {
            self.pos = start;
            self.err(format!("invalid number '{text}'"))
        })
    }

    fn var(&mut self) -> Result<(usize, u32)> {
        // caller has seen 'x'
        self.pos += 1;
        let start = self.pos;
        if self.digits() == 0 {
            return self.err("expected variable index after 'x'");
        }
        let index: usize = std::str::from_utf8(&self.src[start..self.pos])
            .unwrap()
            .parse()
            .or_else(|_| self.err("variable index out of range"))?;
        let mut exponent = 1u32;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            match self.peek() {
                Some(b'-') => return self.err("negative exponent"),
                Some(c) if c.is_ascii_digit() => {}
                _ => return self.err("expected exponent after '^'"),
            }
            let start = self.pos;
            self.digits();
            if matches!(self.src.get(self.pos), Some(b'.' | b'e' | b'E')) {
                return self.err("fractional exponent");
            }
            exponent = std::str::from_utf8(&self.src[start..self.pos])
                .unwrap()
                .parse()
                .or_else(|_| self.err("exponent out of range"))?;
        }
        Ok((index, exponent))
    }

    fn term(&mut self) -> Result<Term> {
        let mut coeff = 1.0;
        let mut vars = Vec::new();
        let mut seen_any = false;
        if let Some(c) = self.peek() {
            if c.is_ascii_digit() || c == b'.' {
                coeff = self.coeff()?;
                seen_any = true;
            }
        }
        loop {
            match self.peek() {
                Some(b'*') => {
                    if !seen_any {
                        return self.err("unexpected '*'");
                    }
                    self.pos += 1;
                    if self.peek() != Some(b'x') {
                        return self.err("expected a variable after '*'");
                    }
                }
                Some(b'x') => {
                    vars.push(self.var()?);
                    seen_any = true;
                }
                _ => break,
            }
        }
        if !seen_any {
            return self.err("expected a term");
        }
        Ok((vars, coeff))
    }

    fn poly(&mut self) -> Result<Vec<Term>> {
        if self.peek().is_none() {
            return self.err("empty input");
        }
        let mut terms = Vec::new();
        let mut sign = 1.0;
        if let Some(c @ (b'+' | b'-')) = self.peek() {
            sign = if c == b'-' { -1.0 } else { 1.0 };
            self.pos += 1;
        }
        loop {
            let (vars, c) = self.term()?;
            terms.push((vars, sign * c));
            match self.peek() {
                None => break,
                Some(b'+') => sign = 1.0,
                Some(b'-') => sign = -1.0,
                Some(c) => return self.err(format!("unexpected character '{}'", c as char)),
            }
            self.pos += 1;
        }
        Ok(terms)
    }
}

/// Parses the text grammar; the variable count is inferred from the largest
/// index used.
pub fn parse_polynomial(text: &str) -> Result<Polynomial> {
    parse_with_nvars(text, None)
}

/// Parses with an explicit variable count, which must cover every index.
pub fn parse_with_nvars(text: &str, nvars: Option<usize>) -> Result<Polynomial> {
    let mut parser = Parser { src: text.as_bytes(), pos: 0 };
    let terms = parser.poly()?;
    let max_index = terms.iter().flat_map(|(v, _)| v.iter().map(|&(i, _)| i)).max();
    let needed = max_index.map_or(1, |i| i + 1);
    let n = match nvars {
        Some(n) if n < needed => {
            return Err(Error::InvalidPolynomial(format!(
                "variable x{} used but only {n} variables declared",
                needed - 1
            )))
        }
        Some(n) => n,
        None => needed,
    };
    let rows = terms.into_iter().map(|(vars, c)| {
        let mut exp = vec![0u32; n];
        for (i, e) in vars {
            exp[i] += e;
        }
        (exp, c)
    });
    Polynomial::new(n, rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn example_polynomials() {
        let p = parse_polynomial("x0^4 + x0^3 - x0 + 1").unwrap();
        assert_eq!(p.nvars(), 1);
        assert_eq!(p.num_terms(), 4);
        let mut pairs: Vec<(u32, f64)> = (0..4).map(|j| (p.exponent(j)[0], p.coeff(j))).collect();
        pairs.sort_by_key(|p| std::cmp::Reverse(p.0));
        assert_eq!(pairs, vec![(4, 1.0), (3, 1.0), (1, -1.0), (0, 1.0)]);

        let p = parse_polynomial("2*x0 - 2*x0 + 1").unwrap();
        assert_eq!(p.num_terms(), 1);
        assert_eq!(p.constant(), 1.0);

        let p = parse_polynomial("3.932*x1^8 - 1.204*x0*x1*x2^3").unwrap();
        assert_eq!(p.nvars(), 3);
        assert_eq!(p.num_terms(), 2);
        let j = p.exponents().iter().position(|e| e == &[0, 8, 0]).unwrap();
        let k = p.exponents().iter().position(|e| e == &[1, 1, 3]).unwrap();
        assert_eq!(p.coeff(j), 3.932);
        assert_eq!(p.coeff(k), -1.204);
    }

    #[test]
    fn flexible_spacing_and_forms() {
        let a = parse_polynomial("-x0 + 2x1^2 +.5 x0 x1").unwrap();
        let b = parse_polynomial("0.5*x0*x1 + 2*x1^2 - 1*x0").unwrap();
        assert_eq!(a, b);
        let c = parse_polynomial("x0*x0^2 + 1e-1").unwrap();
        assert_eq!(c, parse_polynomial("x0^3 + 0.1").unwrap());
    }

    #[test]
    fn errors_carry_positions() {
        match parse_polynomial("") {
            Err(Error::Parse { message, .. }) => assert!(message.contains("empty")),
            other => panic!("{other:?}"),
        }
        match parse_polynomial("x0^-2") {
            Err(Error::Parse { position, message }) => {
                assert_eq!(position, 3);
                assert!(message.contains("negative"));
            }
            other => panic!("{other:?}"),
        }
        match parse_polynomial("x0^1.5") {
            Err(Error::Parse { message, .. }) => assert!(message.contains("fractional")),
            other => panic!("{other:?}"),
        }
        match parse_polynomial("x0 + + x1") {
            Err(Error::Parse { position, .. }) => assert_eq!(position, 5),
            other => panic!("{other:?}"),
        }
        assert!(parse_polynomial("x0 $ 1").is_err());
        assert!(parse_polynomial("y0").is_err());
        assert!(parse_polynomial("3*").is_err());
    }

    #[test]
    fn explicit_variable_count() {
        let p = parse_with_nvars("x0 + 1", Some(3)).unwrap();
        assert_eq!(p.nvars(), 3);
        assert!(parse_with_nvars("x4", Some(2)).is_err());
    }
}
