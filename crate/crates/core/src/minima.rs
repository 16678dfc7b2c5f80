//! Candidate minimizers from circuit minimizers followed by local descent.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::circuits::{circuit_minimizer, compute_covering, CoveringStrategy};
use crate::orthants::{relax_signed, SignVector};
use crate::poly::Polynomial;

pub const DEFAULT_DESCENT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 500;
pub const MULTI_STARTS: usize = 8;
const MULTI_START_SEED: u64 = 0x5eed;
const START_BOX: f64 = 2.0;

const ARMIJO_SLOPE: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 60;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MinimaResult {
    pub candidate: Vec<f64>,
    /// `p(candidate)`.
    pub value: f64,
    pub relaxed_candidate: Vec<f64>,
    pub circuit_minimizers: Vec<Vec<f64>>,
    /// Descent iterations over all phases.
    pub iterations: usize,
    /// Whether the final descent met the gradient tolerance.
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Descent {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// BFGS with Armijo backtracking from `start`.
pub fn local_min(p: &Polynomial, start: &[f64], tol: f64, max_iter: usize) -> Vec<f64> {
    descend(p, start, None, tol, max_iter).x
}

/// Projected BFGS. With `cone`, coordinates with a fixed sign are clamped at
/// zero, so every iterate stays in the closed cone. Accepted iterates never
/// increase `p`.
pub fn descend(p: &Polynomial, start: &[f64], cone: Option<&SignVector>, tol: f64, max_iter: usize) -> Descent {
    let n = p.nvars();
    assert_eq!(start.len(), n, "start point has the wrong dimension");
    let signs: Vec<i8> = cone.map_or_else(|| vec![0; n], |s| s.entries().to_vec());
    let project = |x: &mut [f64]| {
        for (v, &s) in x.iter_mut().zip(&signs) {
            if (s == 1 && *v < 0.0) || (s == -1 && *v > 0.0) {
                *v = 0.0;
            }
        }
    };
    let mut x = start.to_vec();
    project(&mut x);
    let mut f = p.eval(&x);
    let mut g = p.grad(&x);
    let mut h = identity(n);
    let mut fresh = true;
    let mut prev_active: Vec<bool> = vec![false; n];
    let mut iterations = 0;
    let mut converged = false;
    if !f.is_finite() {
        return Descent { x, value: f, iterations, converged };
    }
    while iterations < max_iter {
        // coordinates pinned at the cone boundary by an outward gradient
        let active: Vec<bool> = (0..n)
            .map(|i| x[i] == 0.0 && ((signs[i] == 1 && g[i] > 0.0) || (signs[i] == -1 && g[i] < 0.0)))
            .collect();
        let pg_norm = (0..n).filter(|&i| !active[i]).map(|i| g[i] * g[i]).sum::<f64>().sqrt();
        if pg_norm <= tol {
            converged = true;
            break;
        }
        if active != prev_active {
            h = identity(n);
            fresh = true;
            prev_active = active.clone();
        }
        let mut d = direction(&h, &g, &active);
        let mut slope: f64 = d.iter().zip(&g).map(|(a, b)| a * b).sum();
        if !(slope < 0.0) {
            h = identity(n);
            fresh = true;
            d = direction(&h, &g, &active);
            slope = d.iter().zip(&g).map(|(a, b)| a * b).sum();
            if !(slope < 0.0) {
                converged = pg_norm <= tol;
                break;
            }
        }
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            let mut trial: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + alpha * b).collect();
            project(&mut trial);
            let decrease: f64 = trial.iter().zip(&x).zip(&g).map(|((t, a), gi)| (t - a) * gi).sum();
            let ft = p.eval(&trial);
            if ft.is_finite() && ft <= f + ARMIJO_SLOPE * decrease && ft <= f {
                accepted = Some((trial, ft));
                break;
            }
            alpha *= 0.5;
        }
        iterations += 1;
        let Some((xn, fnew)) = accepted else { break };
        let gn = p.grad(&xn);
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
        if sy > 1e-12 * norm(&s) * norm(&y) && sy > 0.0 {
            if fresh {
                let yy: f64 = y.iter().map(|v| v * v).sum();
                h = identity(n);
                for (i, row) in h.iter_mut().enumerate() {
                    row[i] = sy / yy;
                }
                fresh = false;
            }
            bfgs_update(&mut h, &s, &y, sy);
        }
        let stalled = s.iter().all(|&v| v == 0.0);
        x = xn;
        f = fnew;
        g = gn;
        if stalled {
            break;
        }
    }
    Descent { x, value: f, iterations, converged }
}

fn identity(n: usize) -> Vec<Vec<f64>> {
    (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

fn direction(h: &[Vec<f64>], g: &[f64], active: &[bool]) -> Vec<f64> {
    let n = g.len();
    (0..n)
        .map(|i| {
            if active[i] {
                0.0
            } else {
                -(0..n).filter(|&j| !active[j]).map(|j| h[i][j] * g[j]).sum::<f64>()
            }
        })
        .collect()
}

/// Inverse-Hessian BFGS update.
fn bfgs_update(h: &mut [Vec<f64>], s: &[f64], y: &[f64], sy: f64) {
    let n = s.len();
    let rho = 1.0 / sy;
    let hy: Vec<f64> = (0..n).map(|i| (0..n).map(|j| h[i][j] * y[j]).sum()).collect();
    let yhy: f64 = y.iter().zip(&hy).map(|(a, b)| a * b).sum();
    for i in 0..n {
        for j in 0..n {
            h[i][j] += -rho * (hy[i] * s[j] + s[i] * hy[j]) + (rho * rho * yhy + rho) * s[i] * s[j];
        }
    }
}

/// Circuit minimizers of the covering of `q` (a positive-orthant
/// polynomial), or `None` when there is nothing to average.
fn circuit_points(q: &Polynomial) -> Option<Vec<Vec<f64>>> {
    let q = q.with_origin();
    let cov = compute_covering(&q, CoveringStrategy::Simple).ok()?;
    let pts: Vec<Vec<f64>> = cov.circuits.iter().filter_map(|c| circuit_minimizer(c, &q).ok()).collect();
    (!pts.is_empty() && pts.iter().flatten().all(|v| v.is_finite())).then_some(pts)
}

fn barycenter(points: &[Vec<f64>]) -> Vec<f64> {
    let n = points[0].len();
    let k = points.len() as f64;
    (0..n).map(|i| points.iter().map(|m| m[i]).sum::<f64>() / k).collect()
}

/// Best descent among the origin and seeded random starts in the cone.
fn multi_start(p: &Polynomial, cone: Option<&SignVector>) -> Descent {
    let n = p.nvars();
    let mut rng = ChaCha8Rng::seed_from_u64(MULTI_START_SEED);
    let mut starts = vec![vec![0.0; n]];
    for _ in 0..MULTI_STARTS {
        let mut x: Vec<f64> = (0..n).map(|_| rng.gen_range(-START_BOX..=START_BOX)).collect();
        if let Some(s) = cone {
            for (v, &si) in x.iter_mut().zip(s.entries()) {
                if si != 0 {
                    *v = si as f64 * v.abs();
                }
            }
        }
        starts.push(x);
    }
    let mut best: Option<Descent> = None;
    let mut total = 0;
    for x0 in &starts {
        let d = descend(p, x0, cone, DEFAULT_DESCENT_TOL, DEFAULT_MAX_ITER);
        total += d.iterations;
        if best.as_ref().is_none_or(|b| d.value < b.value) {
            best = Some(d);
        }
    }
    let mut best = best.expect("at least one start");
    best.iterations = total;
    best
}

/// A circuit-guided descent that diverged or stalled is compared against
/// the multi-start result; the lower value wins.
fn rescue(p: &Polynomial, d: Descent, cone: Option<&SignVector>) -> Descent {
    if d.converged && d.value.is_finite() {
        return d;
    }
    let m = multi_start(p, cone);
    let iterations = d.iterations + m.iterations;
    let mut best = if m.value < d.value || !d.value.is_finite() { m } else { d };
    best.iterations = iterations;
    best
}

/// Circuit minimizers of the relaxation, their barycenter, descent on the
/// relaxation over the nonnegative orthant, then descent on `p`.
pub fn sonc_min(p: &Polynomial) -> MinimaResult {
    let n = p.nvars();
    let q = p.relax();
    let Some(points) = circuit_points(&q) else {
        let d = multi_start(p, None);
        return MinimaResult {
            relaxed_candidate: d.x.clone(),
            candidate: d.x,
            value: d.value,
            circuit_minimizers: Vec::new(),
            iterations: d.iterations,
            converged: d.converged,
        };
    };
    let positive = SignVector::new(vec![1; n]).expect("valid signs");
    let relaxed = descend(&q, &barycenter(&points), Some(&positive), DEFAULT_DESCENT_TOL, DEFAULT_MAX_ITER);
    let fin = if &q == p {
        relaxed.clone()
    } else {
        descend(p, &relaxed.x, None, DEFAULT_DESCENT_TOL, DEFAULT_MAX_ITER)
    };
    let extra = if &q == p { 0 } else { fin.iterations };
    let fin = rescue(p, fin, None);
    MinimaResult {
        candidate: fin.x.clone(),
        value: fin.value,
        relaxed_candidate: relaxed.x,
        circuit_minimizers: points,
        iterations: relaxed.iterations + extra.max(fin.iterations),
        converged: fin.converged,
    }
}

/// As [`sonc_min`] on the cone `s`: the relaxation of `p` over the cone is
/// minimized on the positive orthant, mapped back by negating coordinates
/// with `s_i = -1`, and refined on `p` inside the cone.
pub fn sonc_min_signed(p: &Polynomial, s: &SignVector) -> MinimaResult {
    let n = p.nvars();
    assert_eq!(s.len(), n, "sign vector length must match the variable count");
    let q = relax_signed(p, s);
    let Some(points) = circuit_points(&q) else {
        let d = multi_start(p, Some(s));
        return MinimaResult {
            relaxed_candidate: d.x.clone(),
            candidate: d.x,
            value: d.value,
            circuit_minimizers: Vec::new(),
            iterations: d.iterations,
            converged: d.converged,
        };
    };
    let positive = SignVector::new(vec![1; n]).expect("valid signs");
    let relaxed = descend(&q, &barycenter(&points), Some(&positive), DEFAULT_DESCENT_TOL, DEFAULT_MAX_ITER);
    let start: Vec<f64> = relaxed.x.iter().zip(s.entries()).map(|(&v, &si)| if si == -1 { -v } else { v }).collect();
    let fin = rescue(p, descend(p, &start, Some(s), DEFAULT_DESCENT_TOL, DEFAULT_MAX_ITER), Some(s));
    MinimaResult {
        candidate: fin.x.clone(),
        value: fin.value,
        relaxed_candidate: relaxed.x,
        circuit_minimizers: points,
        iterations: relaxed.iterations + fin.iterations,
        converged: fin.converged,
    }
}
