//! Sign cones, their positive-orthant relaxations, and minimal orthants.

use std::fmt;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::bounds::{sage_bound_positive, sonc_bound_positive, BoundOptions, BoundResult};
use crate::error::{Error, Result};
use crate::poly::Polynomial;
use crate::solver::SolverStatus;

/// Orthant enumeration is exponential; larger inputs are rejected.
pub const MAX_ORTHANT_VARS: usize = 15;

/// An element of `{-1, 0, +1}^n`; zero entries leave the variable's sign open.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SignVector(Vec<i8>);

impl SignVector {
    pub fn new(entries: Vec<i8>) -> Result<Self> {
        if let Some(&e) = entries.iter().find(|e| !(-1..=1).contains(*e)) {
            return Err(Error::Domain(format!("sign entries must be -1, 0 or 1, got {e}")));
        }
        Ok(Self(entries))
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0; n])
    }

    /// Orthant bits with 0 meaning `+` and 1 meaning `-`.
    pub fn from_bits(bits: &[u8]) -> Self {
        Self(bits.iter().map(|&b| if b == 0 { 1 } else { -1 }).collect())
    }

    pub fn entries(&self) -> &[i8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Number of fixed signs.
    pub fn depth(&self) -> usize {
        self.0.iter().filter(|&&s| s != 0).count()
    }

    pub fn is_full(&self) -> bool {
        self.0.iter().all(|&s| s != 0)
    }

    pub fn with(&self, i: usize, sign: i8) -> Self {
        let mut e = self.0.clone();
        e[i] = sign;
        Self(e)
    }

    /// Whether `x` lies in the closed cone.
    pub fn contains(&self, x: &[f64]) -> bool {
        self.0.iter().zip(x).all(|(&s, &v)| match s {
            1 => v >= 0.0,
            -1 => v <= 0.0,
            _ => true,
        })
    }
}

impl fmt::Display for SignVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<&str> = self.0.iter().map(|&s| match s {
            1 => "+",
            -1 => "-",
            _ => "0",
        }).collect();
        write!(f, "({})", parts.join(","))
    }
}

impl Serialize for SignVector {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

/// Effective signs of the terms on one orthant.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EffectiveSigns {
    /// Bits over the non-square terms (1 = effectively negative); this is
    /// the vector compared by the partial order.
    pub v: Vec<u8>,
    /// Bits over all terms.
    pub full: Vec<u8>,
    /// Orthant bits, 0 for `+` and 1 for `-`.
    pub orthant: Vec<u8>,
}

impl EffectiveSigns {
    pub fn sign_vector(&self) -> SignVector {
        SignVector::from_bits(&self.orthant)
    }
}

fn check_len(p: &Polynomial, s: &SignVector) {
    assert_eq!(s.len(), p.nvars(), "sign vector length must match the variable count");
}

/// Terms that are nonnegative on the whole cone: `sgn(b_j) Π s_i^(A_ij mod 2) = 1`
/// with `0^0 = 1`.
pub fn positive_points(p: &Polynomial, s: &SignVector) -> Vec<usize> {
    check_len(p, s);
    (0..p.num_terms()).filter(|&j| is_positive_point(p, s, j)).collect()
}

pub fn negative_points(p: &Polynomial, s: &SignVector) -> Vec<usize> {
    check_len(p, s);
    (0..p.num_terms()).filter(|&j| !is_positive_point(p, s, j)).collect()
}

fn is_positive_point(p: &Polynomial, s: &SignVector, j: usize) -> bool {
    let mut sign: i8 = if p.coeff(j) > 0.0 { 1 } else { -1 };
    for (&e, &si) in p.exponent(j).iter().zip(s.entries()) {
        if e % 2 == 1 {
            sign *= si;
        }
    }
    sign == 1
}

/// Maps the cone onto the positive orthant (`x_i -> s_i x_i`) and relaxes:
/// positive points get `|b_j|`, negative points `-|b_j|`.
pub fn relax_signed(p: &Polynomial, s: &SignVector) -> Polynomial {
    check_len(p, s);
    let coeffs = (0..p.num_terms())
        .map(|j| {
            let c = p.coeff(j).abs();
            if is_positive_point(p, s, j) {
                c
            } else {
                -c
            }
        })
        .collect();
    p.with_coeffs(coeffs)
}

/// Effective signs on the orthant given by `bits` (0 = `+`, 1 = `-`).
pub fn effective_signs(p: &Polynomial, bits: &[u8]) -> EffectiveSigns {
    let nosq = p.classify_support().nosq;
    let full: Vec<u8> = (0..p.num_terms())
        .map(|j| {
            let odd: u32 = p.exponent(j).iter().zip(bits).map(|(&e, &b)| e * b as u32).sum();
            ((odd + (p.coeff(j) < 0.0) as u32) % 2) as u8
        })
        .collect();
    EffectiveSigns { v: nosq.iter().map(|&j| full[j]).collect(), full, orthant: bits.to_vec() }
}

/// The orthants whose effective coefficient vectors are minimal, i.e. whose
/// sets of effectively negative terms are maximal under inclusion. Every
/// other orthant's relaxation dominates one of these pointwise. Orthants are
/// visited in binary counting order with `x0` as the leading bit; among
/// equal vectors the first one is kept.
pub fn minimal_orthants(p: &Polynomial) -> Result<Vec<EffectiveSigns>> {
    let n = p.nvars();
    if n > MAX_ORTHANT_VARS {
        return Err(Error::TooManyVariables(n));
    }
    let mut list: Vec<EffectiveSigns> = Vec::new();
    'orthants: for code in 0u32..(1 << n) {
        let bits: Vec<u8> = (0..n).map(|i| ((code >> (n - 1 - i)) & 1) as u8).collect();
        let e = effective_signs(p, &bits);
        for kept in &list {
            if dominated(&e.v, &kept.v) {
                continue 'orthants;
            }
        }
        list.retain(|kept| !dominated(&kept.v, &e.v));
        list.push(e);
    }
    Ok(list)
}

/// `a <= b` elementwise.
fn dominated(a: &[u8], b: &[u8]) -> bool {
    a.iter().zip(b).all(|(x, y)| x <= y)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ForkMethod {
    Sonc,
    Sage,
    #[default]
    Both,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrthantBound {
    pub orthant: SignVector,
    pub lower_bound: f64,
    pub status: SolverStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ForkResult {
    pub lower_bound: f64,
    /// Optimal when every orthant produced a bound.
    pub status: SolverStatus,
    pub orthants: Vec<OrthantBound>,
    pub wall_time: f64,
}

/// Best available bound for `relax_signed(p, s)` over the positive orthant.
pub fn orthant_bound(p: &Polynomial, s: &SignVector, method: ForkMethod, opts: &BoundOptions) -> (f64, SolverStatus) {
    let q = relax_signed(p, s);
    let runs: Vec<BoundResult> = match method {
        ForkMethod::Sonc => vec![sonc_bound_positive(&q, opts)],
        ForkMethod::Sage => vec![sage_bound_positive(&q, opts)],
        ForkMethod::Both => vec![sonc_bound_positive(&q, opts), sage_bound_positive(&q, opts)],
    };
    best_of(&runs)
}

pub(crate) fn best_of(runs: &[BoundResult]) -> (f64, SolverStatus) {
    runs.iter()
        .filter(|r| r.is_optimal())
        .map(|r| r.lower_bound)
        .fold(None, |m: Option<f64>, b| Some(m.map_or(b, |m| m.max(b))))
        .map_or_else(|| (f64::NEG_INFINITY, runs[0].status), |b| (b, SolverStatus::Optimal))
}

/// Minimum of the orthant bounds over the minimal orthants; `-inf` as soon
/// as any orthant fails.
pub fn fork_bound(p: &Polynomial, method: ForkMethod) -> Result<ForkResult> {
    fork_bound_with(p, method, &BoundOptions::default())
}

pub fn fork_bound_with(p: &Polynomial, method: ForkMethod, opts: &BoundOptions) -> Result<ForkResult> {
    let start = Instant::now();
    let minimal = minimal_orthants(p)?;
    let orthants: Vec<OrthantBound> = minimal
        .par_iter()
        .map(|e| {
            let s = e.sign_vector();
            let (lower_bound, status) = orthant_bound(p, &s, method, opts);
            OrthantBound { orthant: s, lower_bound, status }
        })
        .collect();
    let failed = orthants.iter().find(|o| o.status != SolverStatus::Optimal);
    let (lower_bound, status) = match failed {
        Some(f) => (f64::NEG_INFINITY, f.status),
        None => (orthants.iter().map(|o| o.lower_bound).fold(f64::INFINITY, f64::min), SolverStatus::Optimal),
    };
    Ok(ForkResult { lower_bound, status, orthants, wall_time: start.elapsed().as_secs_f64() })
}
