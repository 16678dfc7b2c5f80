use nalgebra::{DMatrix, DVector};

use super::{Residuals, SolverSolution, SolverStatus};

/// 2^-23.
pub const DEFAULT_TOL: f64 = 1.0 / 8_388_608.0;

const T_GROWTH: f64 = 10.0;
const CENTERED: f64 = 1e-12;
const ARMIJO: f64 = 1e-4;
const MAX_ITERS: usize = 5000;
const MAX_INNER: usize = 400;
const MAX_STALLS: usize = 50;
const UNBOUNDED_BELOW: f64 = -1e12;
/// Phase I keeps near the start with a proximal term whose weight is
/// relaxed whenever it, rather than the constraints, blocks feasibility.
const PROX_WEIGHTS: [f64; 3] = [1e-2, 1e-5, 0.0];
/// Largest coordinate change per phase I step, relative to `1 + |x|`. The
/// phase I barrier problem may be flat along recession directions of the
/// constraints, where undamped Newton steps overshoot by orders of magnitude.
const PHASE_ONE_STEP: f64 = 4.0;

/// The phase I proximal term measures moves relative to the start, so
/// large starting values are not pinned in place.
fn prox_scale(c: f64) -> f64 {
    1.0 + c * c
}

/// `Σ coef·x_i + constant`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Affine {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl Affine {
    pub fn new(terms: Vec<(usize, f64)>, constant: f64) -> Self {
        Self { terms, constant }
    }

    pub fn constant(constant: f64) -> Self {
        Self { terms: Vec::new(), constant }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|&(i, a)| a * x[i]).sum::<f64>() + self.constant
    }

    fn plus_var(&self, var: usize, coef: f64) -> Self {
        let mut out = self.clone();
        out.terms.push((var, coef));
        out
    }
}

/// A convex constraint `g(x) <= 0`.
#[derive(Debug, Clone, PartialEq)]
pub enum Atom {
    /// `a(x) <= 0`.
    Linear(Affine),
    /// `log Σ_r exp(a_r(x)) <= 0`.
    LogSumExp(Vec<Affine>),
    /// `Σ_k u_k log(u_k / (e·v_k)) - w(x) <= 0` where `u_k = scale_k · x[var_k]`
    /// and `v_k = x[v[k]]`. Requires all `u_k, v_k > 0`.
    RelEntropy { u: Vec<(usize, f64)>, v: Vec<usize>, w: Affine },
}

/// Value and derivatives of an atom over a local list of variables (indices
/// may repeat; scattering adds contributions).
#[derive(Debug, Clone, PartialEq)]
pub struct AtomEval {
    pub value: f64,
    pub vars: Vec<usize>,
    pub grad: Vec<f64>,
    /// Row-major `vars.len() × vars.len()`, empty for affine atoms.
    pub hess: Vec<f64>,
}

impl AtomEval {
    pub fn dense_grad(&self, n: usize) -> Vec<f64> {
        let mut g = vec![0.0; n];
        for (&i, &v) in self.vars.iter().zip(&self.grad) {
            g[i] += v;
        }
        g
    }

    pub fn dense_hess(&self, n: usize) -> Vec<Vec<f64>> {
        let mut h = vec![vec![0.0; n]; n];
        let k = self.vars.len();
        if !self.hess.is_empty() {
            for p in 0..k {
                for q in 0..k {
                    h[self.vars[p]][self.vars[q]] += self.hess[p * k + q];
                }
            }
        }
        h
    }

    /// Adds `-log(-g)` derivatives.
    fn add_barrier(&self, grad: &mut DVector<f64>, hess: &mut DMatrix<f64>) {
        let inv = 1.0 / -self.value;
        let k = self.vars.len();
        for p in 0..k {
            let (vp, gp) = (self.vars[p], self.grad[p]);
            grad[vp] += gp * inv;
            for q in 0..k {
                let mut hv = gp * self.grad[q] * inv * inv;
                if !self.hess.is_empty() {
                    hv += self.hess[p * k + q] * inv;
                }
                hess[(vp, self.vars[q])] += hv;
            }
        }
    }
}

impl Atom {
    /// `None` outside the atom's domain or when the value is not finite.
    pub fn value(&self, x: &[f64]) -> Option<f64> {
        let v = match self {
            Atom::Linear(a) => a.eval(x),
            Atom::LogSumExp(rows) => {
                let vals: Vec<f64> = rows.iter().map(|r| r.eval(x)).collect();
                log_sum_exp(&vals)?
            }
            Atom::RelEntropy { u, v, w } => {
                let mut d = 0.0;
                for (&(ui, s), &vi) in u.iter().zip(v) {
                    let (uk, vk) = (s * x[ui], x[vi]);
                    if uk <= 0.0 || vk <= 0.0 {
                        return None;
                    }
                    d += uk * (uk / vk).ln() - uk;
                }
                d - w.eval(x)
            }
        };
        v.is_finite().then_some(v)
    }

    pub fn eval(&self, x: &[f64]) -> Option<AtomEval> {
        let value = self.value(x)?;
        let out = match self {
            Atom::Linear(a) => AtomEval {
                value,
                vars: a.terms.iter().map(|t| t.0).collect(),
                grad: a.terms.iter().map(|t| t.1).collect(),
                hess: Vec::new(),
            },
            Atom::LogSumExp(rows) => {
                let vals: Vec<f64> = rows.iter().map(|r| r.eval(x)).collect();
                let lse = log_sum_exp(&vals)?;
                let probs: Vec<f64> = vals.iter().map(|v| (v - lse).exp()).collect();
                let mut vars = Vec::new();
                let mut grad = Vec::new();
                let mut owner = Vec::new();
                for (r, row) in rows.iter().enumerate() {
                    for &(i, a) in &row.terms {
                        vars.push(i);
                        grad.push(probs[r] * a);
                        owner.push((r, a));
                    }
                }
                let k = vars.len();
                let mut hess = vec![0.0; k * k];
                for p in 0..k {
                    for q in 0..k {
                        let (rp, ap) = owner[p];
                        let (rq, aq) = owner[q];
                        let diag = if rp == rq { probs[rp] * ap * aq } else { 0.0 };
                        hess[p * k + q] = diag - grad[p] * grad[q];
                    }
                }
                AtomEval { value, vars, grad, hess }
            }
            Atom::RelEntropy { u, v, w } => {
                let m = u.len();
                let k = 2 * m + w.terms.len();
                let mut vars = Vec::with_capacity(k);
                let mut grad = Vec::with_capacity(k);
                for (kk, &(ui, s)) in u.iter().enumerate() {
                    vars.push(ui);
                    grad.push(s * (s * x[ui] / x[v[kk]]).ln());
                }
                for (kk, &vi) in v.iter().enumerate() {
                    vars.push(vi);
                    grad.push(-u[kk].1 * x[u[kk].0] / x[vi]);
                }
                for &(i, a) in &w.terms {
                    vars.push(i);
                    grad.push(-a);
                }
                let mut hess = vec![0.0; k * k];
                for (kk, &(ui, s)) in u.iter().enumerate() {
                    let uk = s * x[ui];
                    let vk = x[v[kk]];
                    let (pu, pv) = (kk, m + kk);
                    hess[pu * k + pu] = s * s / uk;
                    hess[pu * k + pv] = -s / vk;
                    hess[pv * k + pu] = -s / vk;
                    hess[pv * k + pv] = uk / (vk * vk);
                }
                AtomEval { value, vars, grad, hess }
            }
        };
        Some(out)
    }

    /// The atom relaxed by a slack variable: `g(x) - s <= 0`.
    fn shifted(&self, s: usize) -> Atom {
        match self {
            Atom::Linear(a) => Atom::Linear(a.plus_var(s, -1.0)),
            Atom::LogSumExp(rows) => Atom::LogSumExp(rows.iter().map(|r| r.plus_var(s, -1.0)).collect()),
            Atom::RelEntropy { u, v, w } => Atom::RelEntropy { u: u.clone(), v: v.clone(), w: w.plus_var(s, 1.0) },
        }
    }
}

fn log_sum_exp(vals: &[f64]) -> Option<f64> {
    let m = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return None;
    }
    Some(m + vals.iter().map(|v| (v - m).exp()).sum::<f64>().ln())
}

/// `minimize Σ c_i x_i + Σ w_k exp(x_k)` subject to affine equalities,
/// convex atoms and positivity of selected variables.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexProgram {
    nvars: usize,
    linear: Vec<f64>,
    exp_terms: Vec<(usize, f64)>,
    positive: Vec<bool>,
    equalities: Vec<Affine>,
    atoms: Vec<Atom>,
    initial: Option<Vec<f64>>,
    tol: f64,
}

impl ConvexProgram {
    pub fn new(nvars: usize) -> Self {
        Self {
            nvars,
            linear: vec![0.0; nvars],
            exp_terms: Vec::new(),
            positive: vec![false; nvars],
            equalities: Vec::new(),
            atoms: Vec::new(),
            initial: None,
            tol: DEFAULT_TOL,
        }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn equalities(&self) -> &[Affine] {
        &self.equalities
    }

    /// Restricts `x_i` to the open positive half-line.
    pub fn positive(&mut self, i: usize) -> &mut Self {
        self.positive[i] = true;
        self
    }

    pub fn all_positive(&mut self) -> &mut Self {
        self.positive.iter_mut().for_each(|p| *p = true);
        self
    }

    pub fn minimize_linear(&mut self, i: usize, coef: f64) -> &mut Self {
        self.linear[i] += coef;
        self
    }

    pub fn minimize_exp(&mut self, i: usize, weight: f64) -> &mut Self {
        assert!(i < self.nvars);
        self.exp_terms.push((i, weight));
        self
    }

    /// Adds `a(x) = 0`.
    pub fn equality(&mut self, a: Affine) -> &mut Self {
        self.check(&a);
        self.equalities.push(a);
        self
    }

    pub fn atom(&mut self, atom: Atom) -> &mut Self {
        match &atom {
            Atom::Linear(a) => self.check(a),
            Atom::LogSumExp(rows) => rows.iter().for_each(|r| self.check(r)),
            Atom::RelEntropy { u, v, w } => {
                assert_eq!(u.len(), v.len(), "relative entropy arguments differ in length");
                assert!(u.iter().all(|&(i, s)| i < self.nvars && s > 0.0));
                assert!(v.iter().all(|&i| i < self.nvars));
                self.check(w);
            }
        }
        self.atoms.push(atom);
        self
    }

    /// Starting hint; it is projected onto the equality constraints.
    pub fn initial_point(&mut self, x: Vec<f64>) -> &mut Self {
        assert_eq!(x.len(), self.nvars);
        self.initial = Some(x);
        self
    }

    pub fn tol(&mut self, tol: f64) -> &mut Self {
        self.tol = tol;
        self
    }

    fn check(&self, a: &Affine) {
        assert!(a.terms.iter().all(|&(i, _)| i < self.nvars), "variable index out of range");
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.linear.iter().zip(x).map(|(c, x)| c * x).sum::<f64>()
            + self.exp_terms.iter().map(|&(i, w)| w * x[i].exp()).sum::<f64>()
    }
}

struct Problem {
    n: usize,
    linear: Vec<f64>,
    exp_terms: Vec<(usize, f64)>,
    prox: Option<(DVector<f64>, f64)>,
    positive: Vec<bool>,
    atoms: Vec<Atom>,
}

impl Problem {
    fn barrier_count(&self) -> usize {
        self.atoms.len() + self.positive.iter().filter(|&&p| p).count()
    }

    fn in_domain(&self, x: &[f64]) -> bool {
        x.iter().zip(&self.positive).all(|(&v, &p)| !p || v > 0.0)
    }

    /// Largest atom value, `None` if some atom cannot be evaluated.
    fn max_atom(&self, x: &[f64]) -> Option<f64> {
        self.atoms.iter().try_fold(f64::NEG_INFINITY, |m, a| a.value(x).map(|v| m.max(v)))
    }

    fn strictly_feasible(&self, x: &[f64]) -> bool {
        self.in_domain(x) && self.max_atom(x).is_some_and(|m| m < 0.0)
    }

    fn f0(&self, x: &[f64]) -> f64 {
        let mut f: f64 = self.linear.iter().zip(x).map(|(c, x)| c * x).sum();
        f += self.exp_terms.iter().map(|&(i, w)| w * x[i].exp()).sum::<f64>();
        if let Some((c, w)) = &self.prox {
            f += w * c.iter().zip(x).map(|(c, x)| (x - c).powi(2) / prox_scale(*c)).sum::<f64>();
        }
        f
    }

    fn f0_grad(&self, x: &[f64]) -> DVector<f64> {
        let mut g = DVector::from_column_slice(&self.linear);
        for &(i, w) in &self.exp_terms {
            g[i] += w * x[i].exp();
        }
        if let Some((c, w)) = &self.prox {
            for (i, ci) in c.iter().enumerate() {
                g[i] += 2.0 * w * (x[i] - ci) / prox_scale(*ci);
            }
        }
        g
    }

    /// `t·f0 + barrier`, `None` outside the strict interior.
    fn merit(&self, x: &[f64], t: f64) -> Option<f64> {
        if !self.in_domain(x) {
            return None;
        }
        let mut f = t * self.f0(x);
        for a in &self.atoms {
            let v = a.value(x)?;
            if v >= 0.0 {
                return None;
            }
            f -= (-v).ln();
        }
        for (&v, &p) in x.iter().zip(&self.positive) {
            if p {
                f -= v.ln();
            }
        }
        f.is_finite().then_some(f)
    }

    /// Gradient and Hessian of the merit function.
    fn derivs(&self, x: &[f64], t: f64) -> (DVector<f64>, DMatrix<f64>) {
        let n = self.n;
        let mut g = self.f0_grad(x) * t;
        let mut h = DMatrix::zeros(n, n);
        for &(i, w) in &self.exp_terms {
            h[(i, i)] += t * w * x[i].exp();
        }
        if let Some((c, w)) = &self.prox {
            for (i, ci) in c.iter().enumerate() {
                h[(i, i)] += t * 2.0 * w / prox_scale(*ci);
            }
        }
        for a in &self.atoms {
            if let Some(e) = a.eval(x) {
                e.add_barrier(&mut g, &mut h);
            }
        }
        for (i, (&v, &p)) in x.iter().zip(&self.positive).enumerate() {
            if p {
                g[i] -= 1.0 / v;
                h[(i, i)] += 1.0 / (v * v);
            }
        }
        (g, h)
    }
}

/// Affine parametrization `x = xp + Z z` of the equality constraints.
struct Nullspace {
    xp: DVector<f64>,
    z: DMatrix<f64>,
    a: DMatrix<f64>,
    b: DVector<f64>,
}

impl Nullspace {
    fn new(n: usize, eqs: &[Affine]) -> Option<Self> {
        let m = eqs.len();
        if m == 0 {
            return Some(Self {
                xp: DVector::zeros(n),
                z: DMatrix::identity(n, n),
                a: DMatrix::zeros(0, n),
                b: DVector::zeros(0),
            });
        }
        let mut a = DMatrix::zeros(m, n);
        let mut b = DVector::zeros(m);
        for (r, e) in eqs.iter().enumerate() {
            for &(i, c) in &e.terms {
                a[(r, i)] += c;
            }
            b[r] = -e.constant;
        }
        // pad to at least n rows so the SVD returns a full right basis
        let rows = m.max(n);
        let mut padded = DMatrix::zeros(rows, n);
        padded.view_mut((0, 0), (m, n)).copy_from(&a);
        let mut bpad = DVector::zeros(rows);
        bpad.rows_mut(0, m).copy_from(&b);
        let svd = padded.svd(true, true);
        let u = svd.u.as_ref()?;
        let vt = svd.v_t.as_ref()?;
        let smax = svd.singular_values.max();
        let cut = 1e-10 * smax;
        let mut xp = DVector::zeros(n);
        let mut null = Vec::new();
        for (k, &s) in svd.singular_values.iter().enumerate() {
            let v = vt.row(k).transpose();
            if s > cut && s > 0.0 {
                xp += v * (u.column(k).dot(&bpad) / s);
            } else {
                null.push(v);
            }
        }
        let z = if null.is_empty() { DMatrix::zeros(n, 0) } else { DMatrix::from_columns(&null) };
        let resid = (&a * &xp - &b).amax();
        if resid > 1e-8 * (1.0 + b.amax()) {
            return None;
        }
        Some(Self { xp, z, a, b })
    }

    fn project(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.xp + &self.z * self.z.tr_mul(&(x - &self.xp))
    }

    fn eq_residual(&self, x: &DVector<f64>) -> f64 {
        if self.a.nrows() == 0 {
            return 0.0;
        }
        (&self.a * x.rows(0, self.a.ncols()) - &self.b).amax()
    }

    /// Appends one unconstrained variable.
    fn with_slack(&self) -> Self {
        let (n, k) = self.z.shape();
        let mut z = DMatrix::zeros(n + 1, k + 1);
        z.view_mut((0, 0), (n, k)).copy_from(&self.z);
        z[(n, k)] = 1.0;
        let mut xp = DVector::zeros(n + 1);
        xp.rows_mut(0, n).copy_from(&self.xp);
        Self { xp, z, a: self.a.clone(), b: self.b.clone() }
    }
}

fn newton_direction(h: &DMatrix<f64>, g: &DVector<f64>) -> Option<DVector<f64>> {
    let k = g.len();
    if k == 0 {
        return Some(DVector::zeros(0));
    }
    let finite = |d: DVector<f64>| d.iter().all(|v| v.is_finite()).then_some(d);
    if let Some(ch) = h.clone().cholesky() {
        if let Some(d) = finite(-ch.solve(g)) {
            return Some(d);
        }
    }
    let scale = 1.0 + h.diagonal().amax();
    let mut reg = 1e-12 * scale;
    for _ in 0..6 {
        let hr = h + DMatrix::identity(k, k) * reg;
        if let Some(ch) = hr.cholesky() {
            if let Some(d) = finite(-ch.solve(g)) {
                return Some(d);
            }
        }
        reg *= 100.0;
    }
    h.clone().lu().solve(g).and_then(|d| finite(-d))
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Outcome {
    Converged,
    /// The watched variable went negative (phase I only).
    Stopped,
    Unbounded,
    Failed,
}

struct Run {
    x: DVector<f64>,
    outcome: Outcome,
    t: f64,
    iterations: usize,
}

/// Newton decrement of the centering problem in objective units,
/// `λ² / (2t)`. Measured in the barrier's local norm it is insensitive to
/// the rounding of slacks near active constraints, which dominates the
/// plain gradient norm once `t` is large.
fn stationarity(prob: &Problem, ns: &Nullspace, x: &DVector<f64>, t: f64) -> f64 {
    let (g, h) = prob.derivs(x.as_slice(), t);
    let gz = ns.z.tr_mul(&g);
    let hz = ns.z.tr_mul(&(&h * &ns.z));
    match newton_direction(&hz, &gz) {
        Some(dz) => (-gz.dot(&dz)).max(0.0) / (2.0 * t),
        None => f64::INFINITY,
    }
}

/// Phase I exit test: slack negative and the original objective finite.
struct Watch<'a> {
    slack: usize,
    base: &'a Problem,
}

impl Watch<'_> {
    fn reached(&self, x: &DVector<f64>) -> bool {
        x[self.slack] < 0.0 && self.base.f0(&x.as_slice()[..self.slack]).is_finite()
    }
}

fn barrier(prob: &Problem, ns: &Nullspace, x0: DVector<f64>, tol: f64, watch: Option<Watch>) -> Run {
    let m = prob.barrier_count() as f64;
    let mut x = x0;
    // damped Newton steps cost about one unit of merit each, so the first
    // stage starts with a merit gap of order m rather than m·|f0|
    let mut t = (m / (1.0 + prob.f0(x.as_slice()).abs())).clamp(1e-8, 1.0);
    let mut iterations = 0;
    let done = |x: DVector<f64>, outcome, t, iterations| Run { x, outcome, t, iterations };
    loop {
        let last = m / t <= tol;
        let mut stalls = 0;
        for _ in 0..MAX_INNER {
            if iterations >= MAX_ITERS {
                return done(x, Outcome::Failed, t, iterations);
            }
            let (g, h) = prob.derivs(x.as_slice(), t);
            let gz = ns.z.tr_mul(&g);
            let hz = ns.z.tr_mul(&(&h * &ns.z));
            let Some(dz) = newton_direction(&hz, &gz) else {
                return done(x, Outcome::Failed, t, iterations);
            };
            let mut slope = gz.dot(&dz);
            let decrement = -slope;
            if decrement / 2.0 <= CENTERED {
                break;
            }
            let mut dx = &ns.z * dz;
            if watch.is_some() {
                let cap = PHASE_ONE_STEP * (1.0 + x.amax());
                let big = dx.amax();
                if big > cap {
                    dx *= cap / big;
                    slope *= cap / big;
                }
            }
            let Some(f) = prob.merit(x.as_slice(), t) else {
                return done(x, Outcome::Failed, t, iterations);
            };
            let noise = 4.0 * f64::EPSILON * f.abs();
            let mut step = 1.0;
            let mut accepted = None;
            while step > 1e-16 {
                let xn = &x + &dx * step;
                if let Some(fnew) = prob.merit(xn.as_slice(), t) {
                    if fnew <= f + ARMIJO * step * slope.min(0.0) + noise {
                        accepted = Some((xn, fnew));
                        break;
                    }
                }
                step *= 0.5;
            }
            iterations += 1;
            let progressed = accepted.is_some();
            match accepted {
                Some((xn, fnew)) => {
                    if f - fnew <= 1e-15 * (1.0 + f.abs()) {
                        stalls += 1;
                    } else {
                        stalls = 0;
                    }
                    x = xn;
                }
                None => stalls += 1,
            }
            if stalls >= MAX_STALLS {
                // centered as far as rounding allows; the residuals decide
                break;
            }
            if let Some(w) = &watch {
                if w.reached(&x) {
                    return done(x, Outcome::Stopped, t, iterations);
                }
            }
            if prob.f0(x.as_slice()) < UNBOUNDED_BELOW {
                return done(x, Outcome::Unbounded, t, iterations);
            }
            if !progressed {
                // no further progress possible at this t
                break;
            }
        }
        if let Some(w) = &watch {
            if w.reached(&x) {
                return done(x, Outcome::Stopped, t, iterations);
            }
        }
        if last {
            return done(x, Outcome::Converged, t, iterations);
        }
        // the last stage lands just past the gap target rather than a full
        // factor beyond it, keeping slacks as large as the target allows
        t = (t * T_GROWTH).min(m / (0.999 * tol));
    }
}

/// Finds a strictly feasible point, or reports infeasibility.
fn phase_one(base: &Problem, ns: &Nullspace, x0: DVector<f64>, tol: f64) -> Result<(DVector<f64>, usize), (SolverStatus, usize)> {
    let n = base.n;
    let mut x = x0;
    let mut iterations = 0;
    if !base.in_domain(x.as_slice()) {
        // positivity becomes a relaxed linear constraint; relative entropy
        // atoms are not defined yet and wait for the second stage
        let mut atoms: Vec<Atom> = base
            .atoms
            .iter()
            .filter(|a| !matches!(a, Atom::RelEntropy { .. }))
            .map(|a| a.shifted(n))
            .collect();
        for (j, &p) in base.positive.iter().enumerate() {
            if p {
                atoms.push(Atom::Linear(Affine::new(vec![(j, -1.0), (n, -1.0)], 0.0)));
            }
        }
        let (xn, it) = slack_stage(base, ns, x, atoms, vec![false; n + 1], tol)?;
        x = xn;
        iterations += it;
    }
    if !base.strictly_feasible(x.as_slice()) {
        let atoms = base.atoms.iter().map(|a| a.shifted(n)).collect();
        let mut positive = base.positive.clone();
        positive.push(false);
        let (xn, it) = slack_stage(base, ns, x, atoms, positive, tol).map_err(|(s, i)| (s, i + iterations))?;
        x = xn;
        iterations += it;
    }
    Ok((x, iterations))
}

fn slack_stage(
    base: &Problem,
    ns: &Nullspace,
    x: DVector<f64>,
    mut atoms: Vec<Atom>,
    positive: Vec<bool>,
    tol: f64,
) -> Result<(DVector<f64>, usize), (SolverStatus, usize)> {
    let n = x.len();
    let mut xs = DVector::zeros(n + 1);
    xs.rows_mut(0, n).copy_from(&x);
    let worst = atoms
        .iter()
        .try_fold(f64::NEG_INFINITY, |m, a| a.value(xs.as_slice()).map(|v| m.max(v)))
        .ok_or((SolverStatus::NumericalFailure, 0))?;
    xs[n] = worst.max(-1.0) + 1.0;
    atoms.push(Atom::Linear(Affine::new(vec![(n, -1.0)], -1.0)));
    let mut linear = vec![0.0; n + 1];
    linear[n] = 1.0;
    let mut prob = Problem { n: n + 1, linear, exp_terms: Vec::new(), prox: None, positive, atoms };
    let ns1 = ns.with_slack();
    let mut iterations = 0;
    for (k, &weight) in PROX_WEIGHTS.iter().enumerate() {
        prob.prox = (weight > 0.0).then(|| (x.clone(), weight));
        let run = barrier(&prob, &ns1, xs, tol, Some(Watch { slack: n, base }));
        iterations += run.iterations;
        let feasible = Watch { slack: n, base }.reached(&run.x);
        match run.outcome {
            Outcome::Stopped => return Ok((run.x.rows(0, n).into_owned(), iterations)),
            Outcome::Converged if feasible => return Ok((run.x.rows(0, n).into_owned(), iterations)),
            // the proximal pull may be what holds the slack up
            Outcome::Converged if k + 1 < PROX_WEIGHTS.len() => xs = run.x,
            Outcome::Converged => return Err((SolverStatus::Infeasible, iterations)),
            Outcome::Unbounded | Outcome::Failed => return Err((SolverStatus::NumericalFailure, iterations)),
        }
    }
    unreachable!("the last proximal weight returns")
}

/// Per-term epigraph split of one relative entropy atom.
struct Split {
    terms: Vec<((usize, f64), usize, usize)>,
    w: Affine,
}

/// Rewrites every multi-term relative entropy atom as scalar atoms
/// `u_k log(u_k / (e v_k)) <= τ_k` and `Σ τ_k <= w`. The barrier of the
/// lumped constraint is not self-concordant and Newton's method crawls on it.
fn lift(prog: &ConvexProgram) -> (Vec<Atom>, Vec<Split>, usize) {
    let mut next = prog.nvars;
    let mut atoms = Vec::with_capacity(prog.atoms.len());
    let mut splits = Vec::new();
    for atom in &prog.atoms {
        match atom {
            Atom::RelEntropy { u, v, w } if u.len() > 1 => {
                let mut terms = Vec::with_capacity(u.len());
                let mut sum = Affine::new(w.terms.iter().map(|&(i, c)| (i, -c)).collect(), -w.constant);
                for (&uk, &vk) in u.iter().zip(v) {
                    atoms.push(Atom::RelEntropy { u: vec![uk], v: vec![vk], w: Affine::new(vec![(next, 1.0)], 0.0) });
                    sum.terms.push((next, 1.0));
                    terms.push((uk, vk, next));
                    next += 1;
                }
                atoms.push(Atom::Linear(sum));
                splits.push(Split { terms, w: w.clone() });
            }
            a => atoms.push(a.clone()),
        }
    }
    (atoms, splits, next - prog.nvars)
}

/// Epigraph variables at the start: each term plus an even share of the
/// lumped constraint's slack, or zero where the start is outside the domain.
fn lift_start(x: &mut DVector<f64>, splits: &[Split]) {
    for sp in splits {
        let vals: Option<Vec<f64>> = sp
            .terms
            .iter()
            .map(|&((ui, s), vi, _)| {
                let (u, v) = (s * x[ui], x[vi]);
                (u > 0.0 && v > 0.0).then(|| u * (u / v).ln() - u)
            })
            .collect();
        let Some(vals) = vals else {
            sp.terms.iter().for_each(|&(_, _, k)| x[k] = 0.0);
            continue;
        };
        let g = vals.iter().sum::<f64>() - sp.w.eval(x.as_slice());
        let share = if g < 0.0 { -g / (vals.len() + 1) as f64 } else { 1.0 };
        for (&(_, _, k), v) in sp.terms.iter().zip(vals) {
            x[k] = v + share;
        }
    }
}

pub fn solve_convex(prog: &ConvexProgram) -> SolverSolution {
    let n = prog.nvars;
    let (atoms, splits, extra) = lift(prog);
    let nl = n + extra;
    let Some(ns) = Nullspace::new(nl, &prog.equalities) else {
        return SolverSolution::failed(SolverStatus::Infeasible, n, 0);
    };
    let mut start = DVector::zeros(nl);
    match &prog.initial {
        Some(x) => start.rows_mut(0, n).copy_from_slice(x),
        None => prog.positive.iter().enumerate().filter(|p| *p.1).for_each(|(i, _)| start[i] = 1.0),
    }
    let mut x = ns.project(&start);
    lift_start(&mut x, &splits);
    let mut linear = prog.linear.clone();
    linear.resize(nl, 0.0);
    let mut positive = prog.positive.clone();
    positive.resize(nl, false);
    let base = Problem { n: nl, linear, exp_terms: prog.exp_terms.clone(), prox: None, positive, atoms };
    let mut iterations = 0;
    if !base.strictly_feasible(x.as_slice()) {
        match phase_one(&base, &ns, x, prog.tol) {
            Ok((x1, it)) => {
                x = x1;
                iterations = it;
            }
            Err((status, it)) => return SolverSolution::failed(status, n, it),
        }
    }
    let run = barrier(&base, &ns, x, prog.tol, None);
    iterations += run.iterations;
    match run.outcome {
        Outcome::Unbounded => return SolverSolution::failed(SolverStatus::Unbounded, n, iterations),
        Outcome::Failed | Outcome::Converged | Outcome::Stopped => {}
    }
    let x = run.x;
    let violation = base.max_atom(x.as_slice()).map_or(f64::INFINITY, |m| m.max(0.0));
    let domain = if base.in_domain(x.as_slice()) { 0.0 } else { f64::INFINITY };
    let residuals = Residuals {
        stationarity: stationarity(&base, &ns, &x, run.t),
        primal: ns.eq_residual(&x).max(violation).max(domain),
        gap: base.barrier_count() as f64 / run.t,
    };
    let ok = run.outcome == Outcome::Converged && residuals.max() <= prog.tol;
    SolverSolution {
        status: if ok { SolverStatus::Optimal } else { SolverStatus::NumericalFailure },
        objective: base.f0(x.as_slice()),
        x: x.as_slice()[..n].to_vec(),
        residuals,
        iterations,
    }
}
