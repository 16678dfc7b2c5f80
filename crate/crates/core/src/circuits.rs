//! Circuit coverings of the positive-orthant relaxation.
//!
//! On the positive orthant every term with a positive coefficient is
//! nonnegative, so those terms (together with the origin) are the candidate
//! outer points. Every other non-constant term is an inner point that must be
//! written as a convex combination of outer points. For `relax(p)` this split
//! coincides with monomial squares versus non-squares.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::poly::Polynomial;
use crate::solver::{solve_lp, LinearProgram, SolverStatus};

/// Barycentric coordinates below this are treated as zero.
const LAMBDA_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Circuit {
    pub inner_index: usize,
    pub outer_indices: Vec<usize>,
    pub lambdas: Vec<f64>,
    /// Number of outer points other than the origin.
    pub r: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CoveringStrategy {
    #[default]
    Simple,
    /// Also registers, for each circuit, the other inner terms that lie in
    /// its simplex, each with its own sub-circuit.
    Extended,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct Covering {
    pub circuits: Vec<Circuit>,
    /// Outer term index to the circuits using it.
    pub budget: BTreeMap<usize, Vec<usize>>,
}

impl Covering {
    pub fn is_empty(&self) -> bool {
        self.circuits.is_empty()
    }

    fn push(&mut self, c: Circuit) {
        let id = self.circuits.len();
        for &o in &c.outer_indices {
            self.budget.entry(o).or_default().push(id);
        }
        self.circuits.push(c);
    }
}

/// Indices treated as outer points: the origin and every positive term.
pub fn outer_candidates(p: &Polynomial) -> Vec<usize> {
    let origin = p.origin_index();
    (0..p.num_terms()).filter(|&j| Some(j) == origin || p.coeff(j) > 0.0).collect()
}

/// Non-constant terms with a negative coefficient.
pub fn inner_terms(p: &Polynomial) -> Vec<usize> {
    let origin = p.origin_index();
    (0..p.num_terms()).filter(|&j| Some(j) != origin && p.coeff(j) < 0.0).collect()
}

fn as_f64(e: &[u32]) -> Vec<f64> {
    e.iter().map(|&v| v as f64).collect()
}

fn dist(a: &[u32], b: &[u32]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| (x as f64 - y as f64).powi(2)).sum::<f64>().sqrt()
}

/// Columns `[α_j; 1]` for the given term indices.
fn lifted(p: &Polynomial, idx: &[usize]) -> DMatrix<f64> {
    let n = p.nvars();
    DMatrix::from_fn(n + 1, idx.len(), |i, k| if i < n { p.exponent(idx[k])[i] as f64 } else { 1.0 })
}

/// Writes `β = p.exponent(inner)` as a convex combination of the candidate
/// outer points, reduced to an affinely independent support. `None` when β
/// lies outside their hull.
fn express(p: &Polynomial, inner: usize, candidates: &[usize]) -> Result<Option<Circuit>> {
    let n = p.nvars();
    let beta = p.exponent(inner);
    let c: Vec<f64> = candidates.iter().map(|&j| dist(p.exponent(j), beta)).collect();
    let mut rows: Vec<Vec<f64>> = (0..n).map(|i| candidates.iter().map(|&j| p.exponent(j)[i] as f64).collect()).collect();
    rows.push(vec![1.0; candidates.len()]);
    let mut rhs = as_f64(beta);
    rhs.push(1.0);
    let sol = solve_lp(&LinearProgram::new(c, rows, rhs)?);
    match sol.status {
        SolverStatus::Optimal => {}
        SolverStatus::Infeasible => return Ok(None),
        _ => return Err(Error::Numerical(format!("covering LP for term {inner} failed"))),
    }
    let mut active: Vec<(usize, f64)> = candidates
        .iter()
        .zip(&sol.x)
        .filter(|(_, &l)| l > LAMBDA_EPS)
        .map(|(&j, &l)| (j, l))
        .collect();
    caratheodory(p, beta, &mut active);
    let idx: Vec<usize> = active.iter().map(|a| a.0).collect();
    let lambdas = barycentric(p, &idx, beta).unwrap_or_else(|| active.iter().map(|a| a.1).collect());
    let origin = p.origin_index();
    let r = idx.iter().filter(|&&j| Some(j) != origin).count();
    Ok(Some(Circuit { inner_index: inner, outer_indices: idx, lambdas, r }))
}

/// Drops points while the active set is affinely dependent.
fn caratheodory(p: &Polynomial, beta: &[u32], active: &mut Vec<(usize, f64)>) {
    while active.len() > 1 {
        let idx: Vec<usize> = active.iter().map(|a| a.0).collect();
        let m = lifted(p, &idx);
        let gram = m.tr_mul(&m);
        let eig = SymmetricEigen::new(gram);
        let top = eig.eigenvalues.amax();
        let (k, &low) = eig
            .eigenvalues
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .expect("nonempty");
        if low > 1e-10 * top.max(1.0) {
            return;
        }
        let mut mu: Vec<f64> = eig.eigenvectors.column(k).iter().copied().collect();
        if mu.iter().all(|&v| v <= 1e-12) {
            mu.iter_mut().for_each(|v| *v = -*v);
        }
        // shift λ along the dependency until a coordinate hits zero
        let mut theta = f64::INFINITY;
        for (a, &m) in active.iter().zip(&mu) {
            if m > 1e-12 {
                theta = theta.min(a.1 / m);
            }
        }
        let mut drop: Option<usize> = None;
        for (k, (a, &m)) in active.iter().zip(&mu).enumerate() {
            if m > 1e-12 && a.1 / m <= theta * (1.0 + 1e-9) + 1e-15 {
                let better = drop.is_none_or(|d| dist(p.exponent(a.0), beta) > dist(p.exponent(active[d].0), beta));
                if better {
                    drop = Some(k);
                }
            }
        }
        for (a, &m) in active.iter_mut().zip(&mu) {
            a.1 = (a.1 - theta * m).max(0.0);
        }
        active.remove(drop.expect("a positive entry exists"));
        active.retain(|a| a.1 > LAMBDA_EPS);
    }
}

/// Least-squares barycentric coordinates of β over the given points.
fn barycentric(p: &Polynomial, idx: &[usize], beta: &[u32]) -> Option<Vec<f64>> {
    let m = lifted(p, idx);
    let mut rhs = DVector::from_vec(as_f64(beta));
    rhs = rhs.push(1.0);
    let l = m.svd(true, true).solve(&rhs, 1e-12).ok()?;
    let ok = l.iter().all(|&v| v > 0.0) && (&lifted(p, idx) * &l - &rhs).amax() < 1e-9;
    ok.then(|| l.iter().copied().collect())
}

/// Covers every inner term of `p` by a circuit of outer points. Pass a
/// polynomial containing the origin (see [`Polynomial::with_origin`]) so the
/// constant term is an eligible outer point.
pub fn compute_covering(p: &Polynomial, strategy: CoveringStrategy) -> Result<Covering> {
    let candidates = outer_candidates(p);
    let inners = inner_terms(p);
    let mut cov = Covering::default();
    for &beta in &inners {
        match express(p, beta, &candidates)? {
            Some(c) => cov.push(c),
            None => return Err(Error::UnboundedRelaxation(beta)),
        }
    }
    if strategy == CoveringStrategy::Extended {
        let base = cov.circuits.clone();
        let mut seen: Vec<(usize, Vec<usize>)> = base
            .iter()
            .map(|c| {
                let mut o = c.outer_indices.clone();
                o.sort_unstable();
                (c.inner_index, o)
            })
            .collect();
        for c in &base {
            for &other in inners.iter().filter(|&&b| b != c.inner_index) {
                if let Some(sub) = express(p, other, &c.outer_indices)? {
                    let mut key = sub.outer_indices.clone();
                    key.sort_unstable();
                    let key = (sub.inner_index, key);
                    if !seen.contains(&key) {
                        seen.push(key);
                        cov.push(sub);
                    }
                }
            }
        }
    }
    Ok(cov)
}

/// `Θ = Π (w_j / λ_j)^{λ_j}` with weights aligned to `c.outer_indices`.
pub fn circuit_number(c: &Circuit, weights: &[f64]) -> Result<f64> {
    if weights.len() != c.lambdas.len() {
        return Err(Error::DimensionMismatch { expected: c.lambdas.len(), found: weights.len() });
    }
    if let Some(w) = weights.iter().find(|&&w| !(w > 0.0)) {
        return Err(Error::Domain(format!("circuit weights must be positive, got {w}")));
    }
    if let Some(l) = c.lambdas.iter().find(|&&l| !(l > 0.0)) {
        return Err(Error::Domain(format!("barycentric coordinates must be positive, got {l}")));
    }
    let log: f64 = c.lambdas.iter().zip(weights).map(|(&l, &w)| l * (w.ln() - l.ln())).sum();
    Ok(log.exp())
}

/// Nonnegativity of `p` restricted to the circuit's support. The boundary
/// `|b_β| = Θ` counts as nonnegative.
pub fn is_nonnegative_circuit(c: &Circuit, p: &Polynomial) -> bool {
    if p.is_monomial_square(c.inner_index) {
        return true;
    }
    let weights: Vec<f64> = c.outer_indices.iter().map(|&j| p.coeff(j)).collect();
    match circuit_number(c, &weights) {
        Ok(theta) => p.coeff(c.inner_index).abs() <= theta * (1.0 + 1e-12),
        Err(_) => false,
    }
}

/// Minimizer of the circuit polynomial formed by the circuit's terms of `p`.
pub fn circuit_minimizer(c: &Circuit, p: &Polynomial) -> Result<Vec<f64>> {
    let weights: Vec<f64> = c.outer_indices.iter().map(|&j| p.coeff(j)).collect();
    circuit_minimizer_weighted(c, p, &weights)
}

/// As [`circuit_minimizer`], with outer coefficients replaced by `weights`
/// (for example the parts of a SONC decomposition).
pub fn circuit_minimizer_weighted(c: &Circuit, p: &Polynomial, weights: &[f64]) -> Result<Vec<f64>> {
    let n = p.nvars();
    if p.is_monomial_square(c.inner_index) {
        return Ok(vec![0.0; n]);
    }
    let beta = p.exponent(c.inner_index);
    let b_beta = p.coeff(c.inner_index);
    // a positive inner term becomes negative after x_i -> -x_i for an odd β_i
    let flip = if b_beta > 0.0 { beta.iter().position(|e| e % 2 == 1) } else { None };
    let origin = p.origin_index();
    let rows: Vec<usize> = if c.outer_indices.iter().any(|&j| Some(j) == origin) {
        (0..c.outer_indices.len()).filter(|&k| Some(c.outer_indices[k]) != origin).collect()
    } else {
        (1..c.outer_indices.len()).collect()
    };
    if rows.is_empty() {
        return Ok(vec![1.0; n]);
    }
    let mut m = DMatrix::zeros(rows.len(), n);
    let mut rhs = DVector::zeros(rows.len());
    for (r, &k) in rows.iter().enumerate() {
        let alpha = p.exponent(c.outer_indices[k]);
        for i in 0..n {
            m[(r, i)] = alpha[i] as f64 - beta[i] as f64;
        }
        let w = weights[k];
        if !(w > 0.0) {
            return Err(Error::Numerical(format!("outer weight {w} is not positive")));
        }
        rhs[r] = (c.lambdas[k] * b_beta.abs() / w).ln();
    }
    let s = m
        .svd(true, true)
        .solve(&rhs, 1e-12)
        .map_err(|e| Error::Numerical(format!("circuit minimizer system: {e}")))?;
    let mut x: Vec<f64> = s.iter().map(|v| v.exp()).collect();
    if let Some(i) = flip {
        x[i] = -x[i];
    }
    Ok(x)
}

/// The circuit polynomial `Σ w_j x^{α_j} + b_β x^β` as a standalone polynomial.
pub fn circuit_polynomial(c: &Circuit, p: &Polynomial, weights: &[f64]) -> Result<Polynomial> {
    let mut terms: Vec<(Vec<u32>, f64)> =
        c.outer_indices.iter().zip(weights).map(|(&j, &w)| (p.exponent(j).to_vec(), w)).collect();
    terms.push((p.exponent(c.inner_index).to_vec(), p.coeff(c.inner_index)));
    Polynomial::new(p.nvars(), terms)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn poly(s: &str) -> Polynomial {
        s.parse::<Polynomial>().unwrap().with_origin()
    }

    fn motzkin() -> Polynomial {
        poly("x0^4*x1^2 + x0^2*x1^4 - 3*x0^2*x1^2 + 1")
    }

    fn outers(p: &Polynomial, c: &Circuit) -> Vec<(Vec<u32>, f64)> {
        let mut v: Vec<_> = c.outer_indices.iter().zip(&c.lambdas).map(|(&j, &l)| (p.exponent(j).to_vec(), l)).collect();
        v.sort_by(|a, b| a.0.cmp(&b.0));
        v
    }

    #[test]
    fn motzkin_covering() {
        let p = motzkin();
        let cov = compute_covering(&p, CoveringStrategy::Simple).unwrap();
        assert_eq!(cov.circuits.len(), 1);
        let c = &cov.circuits[0];
        assert_eq!(p.exponent(c.inner_index), &[2, 2]);
        let o = outers(&p, c);
        assert_eq!(o.iter().map(|x| x.0.clone()).collect::<Vec<_>>(), vec![vec![0, 0], vec![2, 4], vec![4, 2]]);
        assert!(o.iter().all(|x| (x.1 - 1.0 / 3.0).abs() < 1e-12));
        assert_eq!(c.r, 2);
    }

    #[test]
    fn univariate_covering() {
        let p = poly("x0^4 - x0^3 - x0 + 1");
        let cov = compute_covering(&p, CoveringStrategy::Simple).unwrap();
        assert_eq!(cov.circuits.len(), 2);
        for c in &cov.circuits {
            let o = outers(&p, c);
            let beta = p.exponent(c.inner_index)[0];
            let expect = if beta == 3 { [0.25, 0.75] } else { [0.75, 0.25] };
            assert_eq!(o[0].0, vec![0]);
            assert_eq!(o[1].0, vec![4]);
            assert!((o[0].1 - expect[0]).abs() < 1e-12 && (o[1].1 - expect[1]).abs() < 1e-12);
        }
        assert_eq!(cov.budget[&p.exponents().iter().position(|e| e == &[4]).unwrap()].len(), 2);
    }

    #[test]
    fn squares_give_empty_covering() {
        assert!(compute_covering(&poly("x0^2 + x1^2 + 1"), CoveringStrategy::Simple).unwrap().is_empty());
    }

    #[test]
    fn outside_hull_is_unbounded() {
        let p = poly("x0^2 - x0^3 + 1");
        assert!(matches!(compute_covering(&p, CoveringStrategy::Simple), Err(Error::UnboundedRelaxation(_))));
    }

    #[test]
    fn coverings_satisfy_barycentric_identity() {
        let p = poly("x0^6 + x1^6 + x0^2*x1^4 - x0*x1 - 2*x0^2*x1 - x0^3*x1^2 - 0.5*x1^3 + 2");
        for strategy in [CoveringStrategy::Simple, CoveringStrategy::Extended] {
            let cov = compute_covering(&p, strategy).unwrap();
            for c in &cov.circuits {
                assert!(c.outer_indices.len() <= p.nvars() + 1);
                let s: f64 = c.lambdas.iter().sum();
                assert!((s - 1.0).abs() < 1e-9);
                for i in 0..p.nvars() {
                    let comb: f64 = c.outer_indices.iter().zip(&c.lambdas).map(|(&j, l)| l * p.exponent(j)[i] as f64).sum();
                    assert!((comb - p.exponent(c.inner_index)[i] as f64).abs() < 1e-9);
                }
                assert!(c.lambdas.iter().all(|&l| l > 0.0));
            }
        }
        let simple = compute_covering(&p, CoveringStrategy::Simple).unwrap();
        let extended = compute_covering(&p, CoveringStrategy::Extended).unwrap();
        assert!(extended.circuits.len() >= simple.circuits.len());
    }

    #[test]
    fn caratheodory_reduces_dependent_support() {
        // β = (1,1) written over the four corners of a square
        let p = poly("x0^2 + x1^2 + x0^2*x1^2 - x0*x1 + 1");
        let beta = p.exponents().iter().position(|e| e == &[1, 1]).unwrap();
        let mut active: Vec<(usize, f64)> = outer_candidates(&p).into_iter().map(|j| (j, 0.25)).collect();
        caratheodory(&p, &[1, 1], &mut active);
        assert!(active.len() <= 3);
        let idx: Vec<usize> = active.iter().map(|a| a.0).collect();
        let l = barycentric(&p, &idx, p.exponent(beta)).unwrap();
        assert!((l.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn circuit_numbers() {
        let c = Circuit { inner_index: 3, outer_indices: vec![0, 1, 2], lambdas: vec![1.0 / 3.0; 3], r: 2 };
        assert!((circuit_number(&c, &[1.0, 1.0, 1.0]).unwrap() - 3.0).abs() < 1e-9);
        assert!((circuit_number(&c, &[1.0 / 3.0; 3]).unwrap() - 1.0).abs() < 1e-12);
        let two = Circuit { inner_index: 2, outer_indices: vec![0, 1], lambdas: vec![0.5, 0.5], r: 1 };
        assert!((circuit_number(&two, &[2.0, 2.0]).unwrap() - 4.0).abs() < 1e-12);
        assert!(circuit_number(&two, &[0.0, 2.0]).is_err());
    }

    #[test]
    fn nonnegativity_test() {
        let p = motzkin();
        let c = compute_covering(&p, CoveringStrategy::Simple).unwrap().circuits.remove(0);
        assert!(is_nonnegative_circuit(&c, &p));
        let q = poly("x0^4*x1^2 + x0^2*x1^4 - 3.01*x0^2*x1^2 + 1");
        assert!(!is_nonnegative_circuit(&c, &q));
        let sq = poly("x0^4*x1^2 + x0^2*x1^4 + 7*x0^2*x1^2 + 1");
        assert!(is_nonnegative_circuit(&c, &sq));
    }

    #[test]
    fn minimizers() {
        let p = poly("x0^2 - 2*x0 + 1");
        let c = compute_covering(&p, CoveringStrategy::Simple).unwrap().circuits.remove(0);
        let x = circuit_minimizer(&c, &p).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-12);

        let m = motzkin();
        let c = compute_covering(&m, CoveringStrategy::Simple).unwrap().circuits.remove(0);
        let x = circuit_minimizer(&c, &m).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-12 && (x[1] - 1.0).abs() < 1e-12);
        let g = m.gradient(&x).unwrap();
        assert!(g.iter().all(|v| v.abs() < 1e-6));

        // (x+1)^2: the inner term is positive, so the circuit comes from the relaxation
        let q = poly("x0^2 + 2*x0 + 1");
        let c = compute_covering(&q.relax(), CoveringStrategy::Simple).unwrap().circuits.remove(0);
        let x = circuit_minimizer(&c, &q).unwrap();
        assert!((x[0] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn boundary_circuits_vanish_at_their_minimizer() {
        // |b_β| = Θ: 2 x^4 y^2 + x^2 y^6 ... built from Θ of the circuit
        let base = poly("2*x0^4 + 3*x1^4 - x0*x1^2 + 1");
        let c = compute_covering(&base, CoveringStrategy::Simple).unwrap().circuits.remove(0);
        let weights: Vec<f64> = c.outer_indices.iter().map(|&j| base.coeff(j)).collect();
        let theta = circuit_number(&c, &weights).unwrap();
        let mut coeffs = base.coeffs().to_vec();
        coeffs[c.inner_index] = -theta;
        let p = base.with_coeffs(coeffs);
        let x = circuit_minimizer(&c, &p).unwrap();
        assert!(p.evaluate(&x).unwrap().abs() < 1e-6);
        assert!(p.gradient(&x).unwrap().iter().all(|g| g.abs() < 1e-6));
    }
}
