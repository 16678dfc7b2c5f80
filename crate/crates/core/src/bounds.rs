//! Lower bounds from SONC geometric programs and SAGE relative-entropy
//! programs.
//!
//! Both programs certify `q(x) >= γ` on the positive orthant, where `q` is a
//! polynomial whose negative non-constant terms must be dominated by its
//! positive terms. [`sonc_bound`] and [`sage_bound`] apply them to `relax(p)`,
//! which bounds `p` on all of `R^n`. Solver failures never raise; they give
//! `lower_bound = -inf` with the status recorded.

use std::time::Instant;

use serde::Serialize;

use crate::circuits::{self, Circuit, Covering, CoveringStrategy};
use crate::error::Error;
use crate::poly::Polynomial;
use crate::solver::{solve_convex, solve_lp, Affine, Atom, ConvexProgram, LinearProgram, Residuals, SolverStatus, DEFAULT_TOL};

const FACE_EPS: f64 = 1e-9;
const ORIGIN_START_CAP: f64 = 1e2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundMethod {
    Sonc,
    Sage,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundOptions {
    pub covering: CoveringStrategy,
    pub tol: f64,
}

impl Default for BoundOptions {
    fn default() -> Self {
        Self { covering: CoveringStrategy::Simple, tol: DEFAULT_TOL }
    }
}

/// Circuit decomposition: circuit `k` uses outer coefficients `weights[k]`
/// (aligned with its outer indices) and the share `inner_share[k]` of
/// `|b_β|`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SoncCertificate {
    pub covering: Covering,
    pub weights: Vec<Vec<f64>>,
    pub inner_share: Vec<f64>,
}

impl SoncCertificate {
    /// Dense `t × t` matrix with row `β`, column `α` holding `X_{β,α}`.
    pub fn matrix(&self, t: usize) -> Vec<Vec<f64>> {
        let mut m = vec![vec![0.0; t]; t];
        for (c, w) in self.covering.circuits.iter().zip(&self.weights) {
            for (&j, &x) in c.outer_indices.iter().zip(w) {
                m[c.inner_index][j] += x;
            }
        }
        m
    }
}

/// AGE decomposition as `t × t` matrices: row `i` is the AGE function that
/// carries the negative term `i` (coefficients `x[i]`, weights `nu[i]`);
/// rows of positive terms hold their unused coefficient on the diagonal.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SageCertificate {
    pub x: Vec<Vec<f64>>,
    pub nu: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Certificate {
    None,
    Sonc(SoncCertificate),
    Sage(SageCertificate),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundResult {
    pub method: BoundMethod,
    pub lower_bound: f64,
    pub status: SolverStatus,
    /// The polynomial the certificate's indices refer to: the positive-orthant
    /// polynomial with the origin added.
    #[serde(skip)]
    pub polynomial: Polynomial,
    pub certificate: Certificate,
    /// KKT residuals of the convex solve; zero when no program was needed.
    pub residuals: Residuals,
    /// Seconds.
    pub wall_time: f64,
}

impl BoundResult {
    pub fn is_optimal(&self) -> bool {
        self.status == SolverStatus::Optimal
    }

    pub fn is_finite(&self) -> bool {
        self.lower_bound.is_finite()
    }

    fn new(method: BoundMethod, q: Polynomial, lower_bound: f64, status: SolverStatus, certificate: Certificate, start: Instant) -> Self {
        let lower_bound = if status == SolverStatus::Optimal { lower_bound } else { f64::NEG_INFINITY };
        Self { method, lower_bound, status, polynomial: q, certificate, residuals: Residuals::default(), wall_time: start.elapsed().as_secs_f64() }
    }
}

pub fn sonc_bound(p: &Polynomial) -> BoundResult {
    sonc_bound_positive(&p.relax(), &BoundOptions::default())
}

pub fn sonc_bound_with(p: &Polynomial, opts: &BoundOptions) -> BoundResult {
    sonc_bound_positive(&p.relax(), opts)
}

pub fn sage_bound(p: &Polynomial) -> BoundResult {
    sage_bound_positive(&p.relax(), &BoundOptions::default())
}

pub fn sage_bound_with(p: &Polynomial, opts: &BoundOptions) -> BoundResult {
    sage_bound_positive(&p.relax(), opts)
}

/// SONC bound of `q` over the positive orthant.
pub fn sonc_bound_positive(q: &Polynomial, opts: &BoundOptions) -> BoundResult {
    let start = Instant::now();
    let q = q.with_origin();
    let fail = |status| BoundResult::new(BoundMethod::Sonc, q.clone(), f64::NEG_INFINITY, status, Certificate::None, start);
    let covering = match circuits::compute_covering(&q, opts.covering) {
        Ok(c) => c,
        Err(Error::UnboundedRelaxation(_)) => return fail(SolverStatus::Unbounded),
        Err(_) => return fail(SolverStatus::NumericalFailure),
    };
    if covering.is_empty() {
        let cert = Certificate::Sonc(SoncCertificate { covering, weights: Vec::new(), inner_share: Vec::new() });
        return BoundResult::new(BoundMethod::Sonc, q.clone(), q.constant(), SolverStatus::Optimal, cert, start);
    }
    let solved = match opts.covering {
        CoveringStrategy::Simple => solve_circuit_gp(&q, &covering, opts.tol),
        CoveringStrategy::Extended => solve_circuit_rep(&q, &covering, opts.tol),
    };
    match solved {
        Ok((spent, weights, inner_share, residuals)) => {
            let cert = Certificate::Sonc(SoncCertificate { covering, weights, inner_share });
            let mut r = BoundResult::new(BoundMethod::Sonc, q.clone(), q.constant() - spent, SolverStatus::Optimal, cert, start);
            r.residuals = residuals;
            r
        }
        Err(status) => fail(status),
    }
}

type Decomposition = (f64, Vec<Vec<f64>>, Vec<f64>, Residuals);

/// Index of the origin among a circuit's outer points.
fn origin_slot(q: &Polynomial, c: &Circuit) -> Option<usize> {
    let o = q.origin_index()?;
    c.outer_indices.iter().position(|&j| j == o)
}

/// The circuit program in log variables `y = log X`, one variable per
/// (circuit, outer point).
fn solve_circuit_gp(q: &Polynomial, cov: &Covering, tol: f64) -> Result<Decomposition, SolverStatus> {
    let mut offsets = Vec::with_capacity(cov.circuits.len());
    let mut nvars = 0;
    for c in &cov.circuits {
        offsets.push(nvars);
        nvars += c.outer_indices.len();
    }
    let mut prog = ConvexProgram::new(nvars);
    prog.tol(tol);
    let mut start = vec![0.0; nvars];
    for (k, c) in cov.circuits.iter().enumerate() {
        let b_beta = q.coeff(c.inner_index).abs();
        let terms: Vec<(usize, f64)> = c.lambdas.iter().enumerate().map(|(m, &l)| (offsets[k] + m, l)).collect();
        let rhs = b_beta.ln() + c.lambdas.iter().map(|l| l * l.ln()).sum::<f64>();
        prog.equality(Affine::new(terms, -rhs));
        let slot = origin_slot(q, c);
        let mut fixed = 0.0;
        for (m, &j) in c.outer_indices.iter().enumerate() {
            if Some(m) == slot {
                prog.minimize_exp(offsets[k] + m, 1.0);
            } else {
                let share = cov.budget[&j].len() as f64;
                start[offsets[k] + m] = (q.coeff(j) / share).ln() - 1.0;
                fixed += c.lambdas[m] * start[offsets[k] + m];
            }
        }
        if let Some(m) = slot {
            start[offsets[k] + m] = (rhs - fixed) / c.lambdas[m];
        }
    }
    for (&j, users) in &cov.budget {
        if Some(j) == q.origin_index() {
            continue;
        }
        let ln_b = q.coeff(j).ln();
        let rows = users
            .iter()
            .map(|&k| {
                let m = cov.circuits[k].outer_indices.iter().position(|&o| o == j).expect("budget entry");
                Affine::new(vec![(offsets[k] + m, 1.0)], -ln_b)
            })
            .collect();
        prog.atom(Atom::LogSumExp(rows));
    }
    prog.initial_point(start);
    let sol = solve_convex(&prog);
    if !sol.is_optimal() {
        return Err(sol.status);
    }
    let weights: Vec<Vec<f64>> = cov
        .circuits
        .iter()
        .zip(&offsets)
        .map(|(c, &off)| (0..c.outer_indices.len()).map(|m| sol.x[off + m].exp()).collect())
        .collect();
    let spent = spent_on_origin(q, cov, &weights);
    let shares = cov.circuits.iter().map(|c| q.coeff(c.inner_index).abs()).collect();
    Ok((spent, weights, shares, sol.residuals))
}

/// Starting origin share that lifts `log Θ` to `target`, capped relative
/// to the coefficient scale. Starting far out on the origin leaves the
/// barrier badly scaled; phase I repairs a start that falls short instead.
fn origin_start(q: &Polynomial, target: f64, log_theta: f64, l0: f64) -> (f64, f64) {
    let scale = (0..q.num_terms()).map(|j| q.coeff(j).abs()).fold(1.0, f64::max);
    let x0 = (l0 * ((target - log_theta) / l0).exp()).clamp(1e-9, ORIGIN_START_CAP * scale);
    (x0, log_theta + l0 * (x0 / l0).ln())
}

fn spent_on_origin(q: &Polynomial, cov: &Covering, weights: &[Vec<f64>]) -> f64 {
    cov.circuits.iter().zip(weights).filter_map(|(c, w)| origin_slot(q, c).map(|m| w[m])).sum()
}

/// The circuit program in linear variables, with each inner coefficient
/// distributed over all circuits sharing that inner term. Per circuit:
/// `D(λ s, e X) <= -a` holds for some `s > 0` iff `Θ(X) >= a`.
fn solve_circuit_rep(q: &Polynomial, cov: &Covering, tol: f64) -> Result<Decomposition, SolverStatus> {
    // layout per circuit: X_0..X_m, s, a
    let mut offsets = Vec::with_capacity(cov.circuits.len());
    let mut nvars = 0;
    for c in &cov.circuits {
        offsets.push(nvars);
        nvars += c.outer_indices.len() + 2;
    }
    let mut prog = ConvexProgram::new(nvars);
    prog.tol(tol).all_positive();
    let mut start = vec![1.0; nvars];
    let mut per_inner: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for (k, c) in cov.circuits.iter().enumerate() {
        per_inner.entry(c.inner_index).or_default().push(k);
    }
    for (k, c) in cov.circuits.iter().enumerate() {
        let m = c.outer_indices.len();
        let (s, a) = (offsets[k] + m, offsets[k] + m + 1);
        prog.atom(Atom::RelEntropy {
            u: c.lambdas.iter().map(|&l| (s, l)).collect(),
            v: (0..m).map(|i| offsets[k] + i).collect(),
            w: Affine::new(vec![(a, -1.0)], 0.0),
        });
        let slot = origin_slot(q, c);
        let share = q.coeff(c.inner_index).abs() / per_inner[&c.inner_index].len() as f64;
        start[a] = share;
        let mut log_theta = 0.0;
        for (i, &j) in c.outer_indices.iter().enumerate() {
            if Some(i) == slot {
                prog.minimize_linear(offsets[k] + i, 1.0);
                continue;
            }
            let x = q.coeff(j) / (2.0 * cov.budget[&j].len() as f64);
            start[offsets[k] + i] = x;
            log_theta += c.lambdas[i] * (x / c.lambdas[i]).ln();
        }
        if let Some(i) = slot {
            let (x0, lt) = origin_start(q, (2.0 * share).ln(), log_theta, c.lambdas[i]);
            start[offsets[k] + i] = x0;
            log_theta = lt;
        }
        start[s] = log_theta.exp().clamp(1e-12, 1e12);
    }
    for (&beta, users) in &per_inner {
        let terms = users.iter().map(|&k| (offsets[k] + cov.circuits[k].outer_indices.len() + 1, 1.0)).collect();
        prog.equality(Affine::new(terms, -q.coeff(beta).abs()));
    }
    for (&j, users) in &cov.budget {
        if Some(j) == q.origin_index() {
            continue;
        }
        let terms = users
            .iter()
            .map(|&k| {
                let i = cov.circuits[k].outer_indices.iter().position(|&o| o == j).expect("budget entry");
                (offsets[k] + i, 1.0)
            })
            .collect();
        prog.atom(Atom::Linear(Affine::new(terms, -q.coeff(j))));
    }
    prog.initial_point(start);
    let sol = solve_convex(&prog);

    if !sol.is_optimal() {
        return Err(sol.status);
    }
    let weights: Vec<Vec<f64>> = cov
        .circuits
        .iter()
        .zip(&offsets)
        .map(|(c, &off)| (0..c.outer_indices.len()).map(|i| sol.x[off + i]).collect())
        .collect();
    let shares = cov.circuits.iter().zip(&offsets).map(|(c, &off)| sol.x[off + c.outer_indices.len() + 1]).collect();
    Ok((spent_on_origin(q, cov, &weights), weights, shares, sol.residuals))
}

type Face = (Vec<usize>, Vec<f64>);

/// The smallest face of `conv(points)` containing `target`, as the member
/// indices plus a strictly positive combination over them. `None` when the
/// target lies outside the hull.
fn face_of(q: &Polynomial, target: usize, points: &[usize]) -> Result<Option<Face>, SolverStatus> {
    let n = q.nvars();
    let alpha = q.exponent(target);
    let mut rows: Vec<Vec<f64>> = (0..n).map(|i| points.iter().map(|&j| q.exponent(j)[i] as f64).collect()).collect();
    rows.push(vec![1.0; points.len()]);
    let mut rhs: Vec<f64> = alpha.iter().map(|&e| e as f64).collect();
    rhs.push(1.0);
    let mut on_face = vec![false; points.len()];
    let mut sum = vec![0.0; points.len()];
    let mut count = 0;
    let mut record = |x: &[f64], on_face: &mut Vec<bool>| {
        for (k, &v) in x.iter().enumerate() {
            if v > FACE_EPS {
                on_face[k] = true;
            }
            sum[k] += v;
        }
        count += 1;
    };
    let first = solve_lp(&LinearProgram::new(vec![0.0; points.len()], rows.clone(), rhs.clone()).expect("consistent sizes"));
    match first.status {
        SolverStatus::Optimal => record(&first.x, &mut on_face),
        SolverStatus::Infeasible => return Ok(None),
        s => return Err(s),
    }
    for k in 0..points.len() {
        if on_face[k] {
            continue;
        }
        let mut c = vec![0.0; points.len()];
        c[k] = -1.0;
        let sol = solve_lp(&LinearProgram::new(c, rows.clone(), rhs.clone()).expect("consistent sizes"));
        if !sol.is_optimal() {
            return Err(SolverStatus::NumericalFailure);
        }
        if sol.x[k] > FACE_EPS {
            record(&sol.x, &mut on_face);
        }
    }
    let members: Vec<usize> = (0..points.len()).filter(|&k| on_face[k]).collect();
    let weights = members.iter().map(|&k| sum[k] / count as f64).collect();
    Ok(Some((members.iter().map(|&k| points[k]).collect(), weights)))
}

/// SAGE bound of `q` over the positive orthant: one AGE function per
/// negative term, sharing the positive coefficients.
pub fn sage_bound_positive(q: &Polynomial, opts: &BoundOptions) -> BoundResult {
    let start = Instant::now();
    let q = q.with_origin();
    let t = q.num_terms();
    let fail = |status| BoundResult::new(BoundMethod::Sage, q.clone(), f64::NEG_INFINITY, status, Certificate::None, start);
    let positive = circuits::outer_candidates(&q);
    let negative = circuits::inner_terms(&q);
    let origin = q.origin_index();
    if negative.is_empty() {
        let mut x = vec![vec![0.0; t]; t];
        for &j in &positive {
            x[j][j] = q.coeff(j);
        }
        let cert = Certificate::Sage(SageCertificate { x, nu: vec![vec![0.0; t]; t] });
        return BoundResult::new(BoundMethod::Sage, q.clone(), q.constant(), SolverStatus::Optimal, cert, start);
    }
    let mut faces = Vec::with_capacity(negative.len());
    for &i in &negative {
        match face_of(&q, i, &positive) {
            Ok(Some(f)) => faces.push(f),
            Ok(None) => return fail(SolverStatus::Unbounded),
            Err(s) => return fail(s),
        }
    }
    // per negative term: c_j then ν_j for each face member
    let mut offsets = Vec::with_capacity(faces.len());
    let mut nvars = 0;
    for (members, _) in &faces {
        offsets.push(nvars);
        nvars += 2 * members.len();
    }
    let mut users = vec![0usize; t];
    for (members, _) in &faces {
        for &j in members {
            users[j] += 1;
        }
    }
    let mut prog = ConvexProgram::new(nvars);
    prog.tol(opts.tol).all_positive();
    let mut init = vec![1.0; nvars];
    for (k, (&i, (members, bary))) in negative.iter().zip(&faces).enumerate() {
        let m = members.len();
        let (c0, nu0) = (offsets[k], offsets[k] + m);
        let alpha_i = q.exponent(i);
        #[allow(clippy::needless_range_loop)]
        for d in 0..q.nvars() {
            let terms: Vec<(usize, f64)> = members
                .iter()
                .enumerate()
                .map(|(r, &j)| (nu0 + r, q.exponent(j)[d] as f64 - alpha_i[d] as f64))
                .filter(|&(_, a)| a != 0.0)
                .collect();
            if !terms.is_empty() {
                prog.equality(Affine::new(terms, 0.0));
            }
        }
        let b_i = q.coeff(i).abs();
        prog.atom(Atom::RelEntropy {
            u: (0..m).map(|r| (nu0 + r, 1.0)).collect(),
            v: (0..m).map(|r| c0 + r).collect(),
            w: Affine::constant(-b_i),
        });
        // start: ν = Θ·ν̄ with Θ = 2|b_i| when the origin allows it
        let mut log_theta = 0.0;
        let mut origin_pos = None;
        for (r, &j) in members.iter().enumerate() {
            if Some(j) == origin {
                prog.minimize_linear(c0 + r, 1.0);
                origin_pos = Some(r);
                continue;
            }
            let c = q.coeff(j) / (2.0 * users[j] as f64);
            init[c0 + r] = c;
            log_theta += bary[r] * (c / bary[r]).ln();
        }
        if let Some(r) = origin_pos {
            let (x0, lt) = origin_start(&q, (2.0 * b_i).ln(), log_theta, bary[r]);
            init[c0 + r] = x0;
            log_theta = lt;
        }
        let theta = log_theta.exp().clamp(1e-12, 1e12);
        for r in 0..m {
            init[nu0 + r] = theta * bary[r];
        }
    }
    for &j in &positive {
        if Some(j) == origin || users[j] == 0 {
            continue;
        }
        let terms: Vec<(usize, f64)> = faces
            .iter()
            .enumerate()
            .filter_map(|(k, (members, _))| members.iter().position(|&o| o == j).map(|r| (offsets[k] + r, 1.0)))
            .collect();
        prog.atom(Atom::Linear(Affine::new(terms, -q.coeff(j))));
    }
    prog.initial_point(init);
    let sol = solve_convex(&prog);
    if !sol.is_optimal() {
        return fail(sol.status);
    }
    let mut x = vec![vec![0.0; t]; t];
    let mut nu = vec![vec![0.0; t]; t];
    let mut spent = 0.0;
    let mut used = vec![0.0; t];
    for (k, (&i, (members, _))) in negative.iter().zip(&faces).enumerate() {
        let m = members.len();
        for (r, &j) in members.iter().enumerate() {
            let c = sol.x[offsets[k] + r];
            x[i][j] = c;
            nu[i][j] = sol.x[offsets[k] + m + r];
            used[j] += c;
            if Some(j) == origin {
                spent += c;
            }
        }
        x[i][i] = q.coeff(i);
    }
    for &j in &positive {
        if Some(j) != origin {
            x[j][j] = q.coeff(j) - used[j];
        }
    }
    if let Some(o) = origin {
        x[o][o] = q.coeff(o) - spent;
    }
    let cert = Certificate::Sage(SageCertificate { x, nu });
    let mut r = BoundResult::new(BoundMethod::Sage, q.clone(), q.constant() - spent, SolverStatus::Optimal, cert, start);
    r.residuals = sol.residuals;
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    fn poly(s: &str) -> Polynomial {
        s.parse().unwrap()
    }

    const MOTZKIN: &str = "x0^4*x1^2 + x0^2*x1^4 - 3*x0^2*x1^2 + 1";

    #[test]
    fn motzkin_bounds() {
        let p = poly(MOTZKIN);
        let s = sonc_bound(&p);
        assert!(s.is_optimal(), "{s:?}");
        assert!(s.lower_bound.abs() < 1e-6, "{}", s.lower_bound);
        let g = sage_bound(&p);
        assert!(g.is_optimal(), "{g:?}");
        assert!(g.lower_bound.abs() < 1e-5, "{}", g.lower_bound);
    }

    #[test]
    fn squares_give_the_constant() {
        let p = poly("x0^2 + 3*x1^4 + 5");
        assert_eq!(sonc_bound(&p).lower_bound, 5.0);
        assert_eq!(sage_bound(&p).lower_bound, 5.0);
        let z = poly("x0^2 + x1^2");
        assert_eq!(sonc_bound(&z).lower_bound, 0.0);
    }

    #[test]
    fn relaxed_univariate_example() {
        let p = poly("x0^4 + x0^3 - x0 + 1");
        let s = sonc_bound(&p);
        assert!(s.is_optimal());
        assert!(s.lower_bound <= 1e-9 && s.lower_bound >= -0.6, "{}", s.lower_bound);
        // frozen reference optimum of the relaxation's program
        assert!(s.lower_bound.abs() < 1e-5, "{}", s.lower_bound);
        let g = sage_bound(&p);
        assert!(g.lower_bound.abs() < 1e-5, "{}", g.lower_bound);
    }

    #[test]
    fn single_age_function() {
        let g = sage_bound(&poly("x0^2 - 2*x0 + 1"));
        assert!(g.is_optimal());
        assert!(g.lower_bound.abs() < 1e-5, "{}", g.lower_bound);
    }

    #[test]
    fn sage_matches_frozen_references() {
        let cases = [
            ("x0^4 + x0^3 - x0 + 1", 0.6820552868827936),
            ("x0^4 - x0^3 + x0 + 1", 1.0),
            ("x0^4 + x1^4 - 1.5*x0*x1 - 0.7*x0^2*x1 - 0.4*x0*x1^2 + 1", 0.2836342738142056),
        ];
        for (text, want) in cases {
            let g = sage_bound_positive(&poly(text), &BoundOptions::default());
            assert!(g.is_optimal(), "{text}: {g:?}");
            assert!((g.lower_bound - want).abs() < 1e-5, "{text}: {} vs {want}", g.lower_bound);
        }
    }

    #[test]
    fn outside_hull_gives_minus_infinity() {
        let p = poly("x0^2 + x0^3 + 1");
        let s = sonc_bound(&p);
        assert_eq!(s.lower_bound, f64::NEG_INFINITY);
        assert_eq!(s.status, SolverStatus::Unbounded);
        assert_eq!(sage_bound(&p).lower_bound, f64::NEG_INFINITY);
    }

    #[test]
    fn gp_and_rep_agree_on_simple_covering() {
        for text in [MOTZKIN, "x0^4 + x0^3 - x0 + 1", "x0^6 + x1^6 - x0*x1^2 - 2*x0^2*x1 + 3", "2*x0^4 + 3*x1^4 - x0*x1^2 + 1"] {
            let q = poly(text).relax().with_origin();
            let cov = circuits::compute_covering(&q, CoveringStrategy::Simple).unwrap();
            let (a, ..) = solve_circuit_gp(&q, &cov, DEFAULT_TOL).unwrap();
            let (b, ..) = solve_circuit_rep(&q, &cov, DEFAULT_TOL).unwrap();
            assert!((a - b).abs() < 1e-5, "{text}: {a} vs {b}");
        }
    }

    #[test]
    fn extended_covering_is_no_worse() {
        let p = poly("x0^6 + x1^6 - x0*x1 - 2*x0^2*x1 - x0^3*x1^2 + 2");
        let simple = sonc_bound(&p);
        let ext = sonc_bound_with(&p, &BoundOptions { covering: CoveringStrategy::Extended, ..Default::default() });
        assert!(simple.is_optimal() && ext.is_optimal(), "{simple:?} {ext:?}");
        assert!(ext.lower_bound >= simple.lower_bound - 1e-6, "{} < {}", ext.lower_bound, simple.lower_bound);
    }

    #[test]
    fn sonc_certificate_is_valid() {
        let p = poly("x0^6 + x1^6 + x0^2*x1^2 - x0*x1 - 2*x0^2*x1 - x0^3*x1^2 + 2");
        let r = sonc_bound(&p);
        let Certificate::Sonc(cert) = &r.certificate else { panic!() };
        let q = &r.polynomial;
        for (c, w) in cert.covering.circuits.iter().zip(&cert.weights) {
            let cp = circuits::circuit_polynomial(c, q, w).unwrap();
            let cc = circuits::compute_covering(&cp.with_origin(), CoveringStrategy::Simple).unwrap();
            for sub in &cc.circuits {
                let theta = circuits::circuit_number(sub, &sub.outer_indices.iter().map(|&j| cp.with_origin().coeff(j)).collect::<Vec<_>>()).unwrap();
                assert!(cp.with_origin().coeff(sub.inner_index).abs() <= theta * (1.0 + 1e-6));
            }
        }
        // budgets
        let m = cert.matrix(q.num_terms());
        for j in 1..q.num_terms() {
            let used: f64 = m.iter().map(|row| row[j]).sum();
            if q.coeff(j) > 0.0 {
                assert!(used <= q.coeff(j) * (1.0 + 1e-6));
            }
        }
    }

    #[test]
    fn sage_dominates_sonc_and_scales() {
        for text in [
            "x0^4 + x1^4 - 1.5*x0*x1 - 0.7*x0^2*x1 - 0.4*x0*x1^2 + 1",
            "x0^6 + x1^6 + x0^2*x1^2 - x0*x1 - 2*x0^2*x1 - x0^3*x1^2 + 2",
            MOTZKIN,
        ] {
            let p = poly(text);
            let s = sonc_bound(&p);
            let g = sage_bound(&p);
            assert!(g.lower_bound >= s.lower_bound - 1e-4, "{text}: {} < {}", g.lower_bound, s.lower_bound);
            let p3 = p.scale(3.0);
            let s3 = sonc_bound(&p3);
            let g3 = sage_bound(&p3);
            assert!((s3.lower_bound - 3.0 * s.lower_bound).abs() <= 1e-6 * (1.0 + s3.lower_bound.abs()) + 1e-6);
            assert!((g3.lower_bound - 3.0 * g.lower_bound).abs() <= 1e-6 * (1.0 + g3.lower_bound.abs()) + 1e-6);
        }
    }

    #[test]
    fn bounds_stay_below_sampled_values() {
        let p = poly("x0^6 + x1^6 + x0^2*x1^2 - x0*x1 - 2*x0^2*x1 - x0^3*x1^2 + 2");
        let q = p.relax();
        let s = sonc_bound(&p).lower_bound;
        let g = sage_bound(&p).lower_bound;
        for a in 0..30 {
            for b in 0..30 {
                let x = [a as f64 * 0.07, b as f64 * 0.07];
                let v = q.evaluate(&x).unwrap();
                assert!(s <= v + 1e-6 && g <= v + 1e-6);
            }
        }
    }
}
