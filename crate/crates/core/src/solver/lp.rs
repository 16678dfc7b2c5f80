use super::{Residuals, SolverSolution, SolverStatus};
use crate::error::{Error, Result};

/// Entries at or below this magnitude are never used as pivots.
const PIVOT_TOL: f64 = 1e-12;
/// Reduced-cost and feasibility tolerance.
const OPT_TOL: f64 = 1e-10;

/// `min c·x  s.t.  E x = f,  x >= 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    c: Vec<f64>,
    rows: Vec<Vec<f64>>,
    rhs: Vec<f64>,
}

impl LinearProgram {
    pub fn new(c: Vec<f64>, rows: Vec<Vec<f64>>, rhs: Vec<f64>) -> Result<Self> {
        let m = c.len();
        if rows.len() != rhs.len() {
            return Err(Error::DimensionMismatch { expected: rows.len(), found: rhs.len() });
        }
        if let Some(r) = rows.iter().find(|r| r.len() != m) {
            return Err(Error::DimensionMismatch { expected: m, found: r.len() });
        }
        let finite = c.iter().chain(rows.iter().flatten()).chain(&rhs).all(|v| v.is_finite());
        if !finite {
            return Err(Error::Domain("linear program data must be finite".into()));
        }
        Ok(Self { c, rows, rhs })
    }

    pub fn num_vars(&self) -> usize {
        self.c.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn objective(&self) -> &[f64] {
        &self.c
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn rhs(&self) -> &[f64] {
        &self.rhs
    }
}

/// Dense simplex tableau. Column layout: structural variables, then one
/// artificial per row, then the right-hand side.
struct Tableau {
    a: Vec<Vec<f64>>,
    cost: Vec<f64>,
    basis: Vec<usize>,
    nvars: usize,
    width: usize,
}

enum PivotOutcome {
    Optimal,
    Unbounded,
    Stalled,
}

impl Tableau {
    fn rhs(&self, i: usize) -> f64 {
        self.a[i][self.width]
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.a[r][c];
        for v in self.a[r].iter_mut() {
            *v /= p;
        }
        let prow = self.a[r].clone();
        for (i, row) in self.a.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[c];
            if f != 0.0 {
                for (v, pv) in row.iter_mut().zip(&prow) {
                    *v -= f * pv;
                }
                row[c] = 0.0;
            }
        }
        let f = self.cost[c];
        if f != 0.0 {
            for (v, pv) in self.cost.iter_mut().zip(&prow) {
                *v -= f * pv;
            }
            self.cost[c] = 0.0;
        }
        self.basis[r] = c;
    }

    /// Loads reduced costs for the objective `obj` over the current basis.
    fn price(&mut self, obj: &[f64]) {
        self.cost = vec![0.0; self.width + 1];
        self.cost[..obj.len()].copy_from_slice(obj);
        for (i, &b) in self.basis.iter().enumerate() {
            let cb = obj.get(b).copied().unwrap_or(0.0);
            if cb != 0.0 {
                for (v, a) in self.cost.iter_mut().zip(&self.a[i]) {
                    *v -= cb * a;
                }
            }
        }
    }

    /// Bland's rule iterations over columns `< ncols`.
    fn run(&mut self, ncols: usize, iterations: &mut usize, cap: usize) -> PivotOutcome {
        loop {
            if *iterations >= cap {
                return PivotOutcome::Stalled;
            }
            let Some(enter) = (0..ncols).find(|&j| self.cost[j] < -OPT_TOL) else {
                return PivotOutcome::Optimal;
            };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.a.len() {
                let aij = self.a[i][enter];
                if aij <= PIVOT_TOL {
                    continue;
                }
                let ratio = self.rhs(i) / aij;
                leave = match leave {
                    None => Some((i, ratio)),
                    Some((k, best)) => {
                        if ratio < best - 1e-14 || (ratio <= best + 1e-14 && self.basis[i] < self.basis[k]) {
                            Some((i, ratio))
                        } else {
                            Some((k, best))
                        }
                    }
                };
            }
            let Some((r, _)) = leave else {
                return PivotOutcome::Unbounded;
            };
            self.pivot(r, enter);
            *iterations += 1;
        }
    }
}

pub fn solve_lp(lp: &LinearProgram) -> SolverSolution {
    let nvars = lp.num_vars();
    let nrows = lp.num_rows();
    let width = nvars + nrows;
    let mut a = Vec::with_capacity(nrows);
    for (i, (row, &f)) in lp.rows.iter().zip(&lp.rhs).enumerate() {
        let sign = if f < 0.0 { -1.0 } else { 1.0 };
        let mut t = vec![0.0; width + 1];
        for (j, v) in row.iter().enumerate() {
            t[j] = sign * v;
        }
        t[nvars + i] = 1.0;
        t[width] = sign * f;
        a.push(t);
    }
    let mut tab = Tableau { a, cost: Vec::new(), basis: (nvars..width).collect(), nvars, width };
    let cap = 100 * (width + 10);
    let mut iterations = 0;

    // phase 1: minimize the sum of artificials
    let mut phase1 = vec![0.0; width];
    for v in phase1[nvars..].iter_mut() {
        *v = 1.0;
    }
    tab.price(&phase1);
    match tab.run(width, &mut iterations, cap) {
        PivotOutcome::Stalled => return SolverSolution::failed(SolverStatus::NumericalFailure, nvars, iterations),
        PivotOutcome::Unbounded => unreachable!("phase 1 is bounded below by zero"),
        PivotOutcome::Optimal => {}
    }
    let scale = 1.0 + lp.rhs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let infeas: f64 = (0..nrows).filter(|&i| tab.basis[i] >= nvars).map(|i| tab.rhs(i)).sum();
    if infeas > 1e-9 * scale {
        return SolverSolution::failed(SolverStatus::Infeasible, nvars, iterations);
    }

    // drive artificials out of the basis; rows where that fails are redundant
    let mut i = 0;
    while i < tab.a.len() {
        if tab.basis[i] >= nvars {
            let col = (0..nvars)
                .filter(|&j| tab.a[i][j].abs() > 1e-9)
                .max_by(|&x, &y| tab.a[i][x].abs().total_cmp(&tab.a[i][y].abs()));
            match col {
                Some(j) => tab.pivot(i, j),
                None => {
                    tab.a.remove(i);
                    tab.basis.remove(i);
                    continue;
                }
            }
        }
        i += 1;
    }

    // phase 2
    tab.price(&lp.c);
    match tab.run(tab.nvars, &mut iterations, cap) {
        PivotOutcome::Stalled => return SolverSolution::failed(SolverStatus::NumericalFailure, nvars, iterations),
        PivotOutcome::Unbounded => return SolverSolution::failed(SolverStatus::Unbounded, nvars, iterations),
        PivotOutcome::Optimal => {}
    }

    let mut x = vec![0.0; nvars];
    for (i, &b) in tab.basis.iter().enumerate() {
        if b < nvars {
            x[b] = tab.rhs(i).max(0.0);
        }
    }
    let objective: f64 = lp.c.iter().zip(&x).map(|(c, x)| c * x).sum();
    let primal = lp
        .rows
        .iter()
        .zip(&lp.rhs)
        .map(|(row, f)| (row.iter().zip(&x).map(|(a, x)| a * x).sum::<f64>() - f).abs())
        .fold(0.0, f64::max);
    let dual = tab.cost[..nvars].iter().fold(0.0f64, |m, &d| m.max(-d));
    SolverSolution {
        status: SolverStatus::Optimal,
        x,
        objective,
        residuals: Residuals { stationarity: dual, primal, gap: 0.0 },
        iterations,
    }
}
