//! Sparse polynomials stored as a support matrix plus a coefficient vector.
//!
//! A polynomial in `n` variables with `t` terms is the pair `(A, b)`, where
//! column `j` of `A` is the exponent vector of term `j` and `b_j` its
//! coefficient. Terms are kept in graded lexicographic order with like
//! terms merged, so two equal polynomials have identical representations.

mod parse;

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use parse::{parse_polynomial, parse_with_nvars};

/// Merged coefficients below this magnitude are dropped.
pub const COEFF_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    nvars: usize,
    exponents: Vec<Vec<u32>>,
    coeffs: Vec<f64>,
}

/// Split of the support into monomial squares and everything else.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SupportClassification {
    pub mosq: Vec<usize>,
    pub nosq: Vec<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
struct PolynomialJson {
    n: usize,
    #[serde(rename = "A")]
    a: Vec<Vec<u32>>,
    b: Vec<f64>,
}

/// Graded lexicographic comparison of exponent vectors.
pub fn grlex(a: &[u32], b: &[u32]) -> Ordering {
    let da: u64 = a.iter().map(|&e| e as u64).sum();
    let db: u64 = b.iter().map(|&e| e as u64).sum();
    da.cmp(&db).then_with(|| a.cmp(b))
}

pub fn is_even(exponent: &[u32]) -> bool {
    exponent.iter().all(|e| e % 2 == 0)
}

fn monomial(exponent: &[u32], x: &[f64]) -> f64 {
    exponent
        .iter()
        .zip(x)
        .filter(|(&e, _)| e != 0)
        .map(|(&e, &xi)| xi.powi(e as i32))
        .product()
}

impl Polynomial {
    /// Builds the canonical polynomial from arbitrary terms: like terms are
    /// summed and near-zero sums dropped. An empty result is the zero
    /// polynomial, stored as a single constant term with coefficient 0.
    pub fn new<I>(nvars: usize, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Vec<u32>, f64)>,
    {
        if nvars == 0 {
            return Err(Error::InvalidPolynomial("need at least one variable".into()));
        }
        let mut raw: Vec<(Vec<u32>, f64)> = Vec::new();
        for (exp, c) in terms {
            if exp.len() != nvars {
                return Err(Error::DimensionMismatch { expected: nvars, found: exp.len() });
            }
            if !c.is_finite() {
                return Err(Error::InvalidPolynomial(format!("non-finite coefficient {c}")));
            }
            raw.push((exp, c));
        }
        raw.sort_by(|a, b| grlex(&a.0, &b.0));
        let mut exponents: Vec<Vec<u32>> = Vec::with_capacity(raw.len());
        let mut coeffs: Vec<f64> = Vec::with_capacity(raw.len());
        for (exp, c) in raw {
            match exponents.last() {
                Some(last) if *last == exp => *coeffs.last_mut().unwrap() += c,
                _ => {
                    exponents.push(exp);
                    coeffs.push(c);
                }
            }
        }
        let (exponents, coeffs): (Vec<_>, Vec<_>) = exponents
            .into_iter()
            .zip(coeffs)
            .filter(|(_, c)| c.abs() >= COEFF_EPS)
            .unzip();
        if exponents.is_empty() {
            return Ok(Self { nvars, exponents: vec![vec![0; nvars]], coeffs: vec![0.0] });
        }
        Ok(Self { nvars, exponents, coeffs })
    }

    /// Rebuilds a polynomial on the same support with new coefficients.
    /// Zero coefficients are kept, so indices stay aligned with `self`.
    pub(crate) fn with_coeffs(&self, coeffs: Vec<f64>) -> Self {
        debug_assert_eq!(coeffs.len(), self.coeffs.len());
        Self { nvars: self.nvars, exponents: self.exponents.clone(), coeffs }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn num_terms(&self) -> usize {
        self.coeffs.len()
    }

    pub fn exponents(&self) -> &[Vec<u32>] {
        &self.exponents
    }

    pub fn exponent(&self, j: usize) -> &[u32] {
        &self.exponents[j]
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeff(&self, j: usize) -> f64 {
        self.coeffs[j]
    }

    pub fn degree(&self) -> u32 {
        self.exponents.iter().map(|e| e.iter().sum::<u32>()).max().unwrap_or(0)
    }

    pub fn origin_index(&self) -> Option<usize> {
        // grlex puts the origin first whenever it is present
        self.exponents.first().filter(|e| e.iter().all(|&x| x == 0)).map(|_| 0)
    }

    /// The constant coefficient, zero if the origin is not in the support.
    pub fn constant(&self) -> f64 {
        self.origin_index().map_or(0.0, |j| self.coeffs[j])
    }

    /// Returns a copy whose support contains the origin, inserting a
    /// synthetic constant with coefficient 0 if needed. The origin is always
    /// index 0 of the result.
    pub fn with_origin(&self) -> Self {
        if self.origin_index().is_some() {
            return self.clone();
        }
        let mut exponents = Vec::with_capacity(self.exponents.len() + 1);
        exponents.push(vec![0; self.nvars]);
        exponents.extend(self.exponents.iter().cloned());
        let mut coeffs = Vec::with_capacity(self.coeffs.len() + 1);
        coeffs.push(0.0);
        coeffs.extend_from_slice(&self.coeffs);
        Self { nvars: self.nvars, exponents, coeffs }
    }

    pub fn is_monomial_square(&self, j: usize) -> bool {
        self.coeffs[j] > 0.0 && is_even(&self.exponents[j])
    }

    pub fn classify_support(&self) -> SupportClassification {
        let (mosq, nosq) = (0..self.num_terms()).partition(|&j| self.is_monomial_square(j));
        SupportClassification { mosq, nosq }
    }

    /// Every term that is not a monomial square gets coefficient `-|b_j|`.
    pub fn relax(&self) -> Self {
        let coeffs = (0..self.num_terms())
            .map(|j| {
                let c = self.coeffs[j];
                if self.is_monomial_square(j) || c == 0.0 {
                    c
                } else {
                    -c.abs()
                }
            })
            .collect();
        self.with_coeffs(coeffs)
    }

    pub fn scale(&self, s: f64) -> Self {
        self.with_coeffs(self.coeffs.iter().map(|c| c * s).collect())
    }

    /// `p(s_1 x_1, ..., s_n x_n)` for a vector of multipliers in {-1, 0, +1};
    /// zero entries leave the variable unchanged.
    pub fn substitute_signs(&self, signs: &[i8]) -> Self {
        assert_eq!(signs.len(), self.nvars);
        let coeffs = self
            .exponents
            .iter()
            .zip(&self.coeffs)
            .map(|(exp, &c)| {
                let flips = exp
                    .iter()
                    .zip(signs)
                    .filter(|(&e, &s)| s < 0 && e % 2 == 1)
                    .count();
                if flips % 2 == 1 {
                    -c
                } else {
                    c
                }
            })
            .collect();
        self.with_coeffs(coeffs)
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.nvars {
            return Err(Error::DimensionMismatch { expected: self.nvars, found: x.len() });
        }
        Ok(())
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        Ok(self.eval(x))
    }

    /// Unchecked evaluation for hot loops; panics in debug builds on a
    /// dimension mismatch.
    pub(crate) fn eval(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.nvars);
        self.exponents.iter().zip(&self.coeffs).map(|(e, c)| c * monomial(e, x)).sum()
    }

    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        Ok(self.grad(x))
    }

    pub(crate) fn grad(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.nvars];
        for (exp, &c) in self.exponents.iter().zip(&self.coeffs) {
            for (i, gi) in g.iter_mut().enumerate() {
                let e = exp[i];
                if e == 0 {
                    continue;
                }
                let mut term = c * e as f64 * x[i].powi(e as i32 - 1);
                for (k, (&ek, &xk)) in exp.iter().zip(x).enumerate() {
                    if k != i && ek != 0 {
                        term *= xk.powi(ek as i32);
                    }
                }
                *gi += term;
            }
        }
        g
    }

    pub fn to_json(&self) -> String {
        let repr = PolynomialJson { n: self.nvars, a: self.exponents.clone(), b: self.coeffs.clone() };
        serde_json::to_string(&repr).expect("polynomial serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let repr: PolynomialJson = serde_json::from_str(text)?;
        if repr.a.len() != repr.b.len() {
            return Err(Error::InvalidPolynomial(format!(
                "{} exponent rows but {} coefficients",
                repr.a.len(),
                repr.b.len()
            )));
        }
        Self::new(repr.n, repr.a.into_iter().zip(repr.b))
    }

    /// Accepts either the JSON form or the text grammar.
    pub fn from_text_or_json(text: &str) -> Result<Self> {
        if text.trim_start().starts_with('{') {
            Self::from_json(text)
        } else {
            parse_polynomial(text)
        }
    }
}

impl FromStr for Polynomial {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_polynomial(s)
    }
}

impl fmt::Display for Polynomial {
    /// Highest-degree term first, e.g. `x0^4 + x0^3 - x0 + 1`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, j) in (0..self.num_terms()).rev().enumerate() {
            let c = self.coeffs[j];
            let exp = &self.exponents[j];
            let mag = c.abs();
            match (k, c.is_sign_negative() && c != 0.0) {
                (0, true) => write!(f, "-")?,
                (0, false) => {}
                (_, true) => write!(f, " - ")?,
                (_, false) => write!(f, " + ")?,
            }
            let constant = exp.iter().all(|&e| e == 0);
            let mut first = true;
            if constant || mag != 1.0 {
                write!(f, "{mag}")?;
                first = false;
            }
            for (i, &e) in exp.iter().enumerate() {
                if e == 0 {
                    continue;
                }
                if !first {
                    write!(f, "*")?;
                }
                first = false;
                write!(f, "x{i}")?;
                if e > 1 {
                    write!(f, "^{e}")?;
                }
            }
        }
        Ok(())
    }
}
