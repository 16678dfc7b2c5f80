//! Seeded random instances with a full-dimensional Newton polytope.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::Polynomial;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub n: usize,
    /// Even degree; the vertices are `d * e_i`.
    pub d: u32,
    pub t: usize,
    pub seed: u64,
    /// Interior coefficients are drawn from `[-coeff_range, coeff_range]`.
    pub coeff_range: f64,
    /// Share of the interior terms that are forced to be non-squares; the
    /// rest are forced to be monomial squares.
    pub nonsquare_fraction: f64,
}

impl GeneratorSpec {
    pub fn new(n: usize, d: u32, t: usize, seed: u64) -> Self {
        Self { n, d, t, seed, coeff_range: 10.0, nonsquare_fraction: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidSpec(m));
        if self.n == 0 {
            return bad("n must be at least 1".into());
        }
        if self.d < 2 || !self.d.is_multiple_of(2) {
            return bad(format!("degree must be even and at least 2, got {}", self.d));
        }
        if self.t < self.n + 1 {
            return bad(format!("t = {} is below n + 1 = {}", self.t, self.n + 1));
        }
        if !(self.coeff_range > 0.0 && self.coeff_range.is_finite()) {
            return bad("coefficient range must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.nonsquare_fraction) {
            return bad("non-square fraction must lie in [0, 1]".into());
        }
        let interior = self.t - self.n - 1;
        let (odd, even) = lattice_counts(self.n, self.d);
        let nonsq = self.nonsquare_count();
        if interior > odd + even || interior - nonsq > even {
            return bad(format!("the degree-{} simplex has too few lattice points for t = {}", self.d, self.t));
        }
        Ok(())
    }

    fn nonsquare_count(&self) -> usize {
        ((self.t - self.n - 1) as f64 * self.nonsquare_fraction).round() as usize
    }
}

/// Lattice points of `{a >= 0, Σa <= d}` other than the origin and the
/// vertices `d e_i`, split into (any, all-even).
fn lattice_counts(n: usize, d: u32) -> (usize, usize) {
    let mut all = 0usize;
    let mut even = 0usize;
    let mut a = vec![0u32; n];
    loop {
        let s: u32 = a.iter().sum();
        if s <= d && s > 0 && !a.contains(&d) {
            all += 1;
            if a.iter().all(|v| v % 2 == 0) {
                even += 1;
            }
        }
        let mut i = 0;
        loop {
            if i == n {
                return (all - even, even);
            }
            a[i] += 1;
            if a[i] <= d {
                break;
            }
            a[i] = 0;
            i += 1;
        }
    }
}

/// Origin plus `n` vertices `d e_i` with coefficients in `[1, coeff_range]`,
/// then `t - n - 1` distinct lattice points of the simplex.
pub fn generate(spec: &GeneratorSpec) -> Result<Polynomial> {
    spec.validate()?;
    let n = spec.n;
    let d = spec.d;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let hi = spec.coeff_range.max(1.0);
    let mut used: BTreeSet<Vec<u32>> = BTreeSet::new();
    let mut terms: Vec<(Vec<u32>, f64)> = Vec::with_capacity(spec.t);
    let origin = vec![0u32; n];
    used.insert(origin.clone());
    terms.push((origin, rng.gen_range(1.0..=hi)));
    for i in 0..n {
        let mut v = vec![0u32; n];
        v[i] = d;
        used.insert(v.clone());
        terms.push((v, rng.gen_range(1.0..=hi)));
    }
    let nonsq = spec.nonsquare_count();
    let interior = spec.t - n - 1;
    // squares first: non-squares may also land on all-even points
    for k in 0..interior {
        let want_square = k < interior - nonsq;
        let a = loop {
            let a: Vec<u32> = (0..n)
                .map(|_| {
                    let v = rng.gen_range(0..=d);
                    if want_square {
                        v & !1
                    } else {
                        v
                    }
                })
                .collect();
            if a.iter().sum::<u32>() <= d && !used.contains(&a) {
                break a;
            }
        };
        used.insert(a.clone());
        let mut c = 0.0;
        while c == 0.0 {
            c = rng.gen_range(-spec.coeff_range..=spec.coeff_range);
        }
        let even = a.iter().all(|v| v % 2 == 0);
        if want_square {
            c = c.abs();
        } else if even && c > 0.0 {
            c = -c;
        }
        terms.push((a, c));
    }
    Polynomial::new(n, terms)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic() {
        let s = GeneratorSpec::new(2, 4, 6, 1);
        assert_eq!(generate(&s).unwrap().to_string(), generate(&s).unwrap().to_string());
        assert_ne!(generate(&s).unwrap(), generate(&GeneratorSpec::new(2, 4, 6, 2)).unwrap());
    }

    #[test]
    fn shape() {
        let p = generate(&GeneratorSpec::new(3, 8, 10, 7)).unwrap();
        assert_eq!(p.num_terms(), 10);
        assert!(p.classify_support().mosq.len() >= 4);
        assert!(p.origin_index().is_some());
        let sq = generate(&GeneratorSpec { nonsquare_fraction: 0.0, ..GeneratorSpec::new(2, 6, 8, 3) }).unwrap();
        assert!(sq.classify_support().nosq.is_empty());
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(matches!(generate(&GeneratorSpec::new(2, 4, 2, 1)), Err(Error::InvalidSpec(_))));
        assert!(generate(&GeneratorSpec::new(2, 3, 6, 1)).is_err());
        assert!(generate(&GeneratorSpec::new(1, 2, 4, 1)).is_err());
        assert!(generate(&GeneratorSpec::new(1, 2, 3, 1)).is_ok());
    }
}
