//! Per-run records, benchmark sweeps and their summaries.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bnb::{branch_and_bound, BnbOptions, StopReason};
use crate::bounds::{sage_bound_with, sonc_bound_with, BoundOptions};
use crate::error::{Error, Result};
use crate::generate::{generate, GeneratorSpec};
use crate::minima::sonc_min;
use crate::orthants::{fork_bound_with, ForkMethod};
use crate::poly::Polynomial;
use crate::solver::SolverStatus;

pub const SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(60);
/// Gaps at or below this are numerically zero.
pub const ZERO_GAP: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Sonc,
    Sage,
    Fork,
    Bnb,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Sonc, Method::Sage, Method::Fork, Method::Bnb];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Sonc => "sonc",
            Method::Sage => "sage",
            Method::Fork => "fork",
            Method::Bnb => "bnb",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::InvalidSpec(format!("unknown method '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NumericalFailure,
    Timeout,
}

impl From<SolverStatus> for RunStatus {
    fn from(s: SolverStatus) -> Self {
        match s {
            SolverStatus::Optimal => RunStatus::Optimal,
            SolverStatus::Infeasible => RunStatus::Infeasible,
            SolverStatus::Unbounded => RunStatus::Unbounded,
            SolverStatus::NumericalFailure => RunStatus::NumericalFailure,
        }
    }
}

/// One method on one instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub instance: String,
    pub n: usize,
    pub d: u32,
    pub t: usize,
    pub seed: Option<u64>,
    pub method: Method,
    pub lower_bound: f64,
    pub best_value: f64,
    pub gap: f64,
    pub wall_time: f64,
    pub nodes_expanded: usize,
    pub status: RunStatus,
}

pub fn gap(lower_bound: f64, best_value: f64) -> f64 {
    if lower_bound == f64::NEG_INFINITY || !best_value.is_finite() {
        f64::INFINITY
    } else {
        best_value - lower_bound
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub id: String,
    pub seed: Option<u64>,
    pub polynomial: Polynomial,
}

impl Instance {
    pub fn generated(spec: &GeneratorSpec) -> Result<Self> {
        Ok(Self {
            id: format!("n{}_d{}_t{}_s{}", spec.n, spec.d, spec.t, spec.seed),
            seed: Some(spec.seed),
            polynomial: generate(spec)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub bound: BoundOptions,
    pub bnb: BnbOptions,
    pub fork: ForkMethod,
    pub timeout: Duration,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            bound: BoundOptions::default(),
            bnb: BnbOptions::default(),
            fork: ForkMethod::Both,
            timeout: DEFAULT_TIMEOUT,
        }
    }
}

/// Runs `method` on the instance. The best value comes from the minima
/// heuristic, or from the search itself for branch-and-bound.
pub fn run(inst: &Instance, method: Method, cfg: &RunConfig) -> RunReport {
    let start = Instant::now();
    let p = &inst.polynomial;
    let (lower_bound, best_value, nodes, mut status) = match method {
        Method::Sonc | Method::Sage => {
            let r = if method == Method::Sonc { sonc_bound_with(p, &cfg.bound) } else { sage_bound_with(p, &cfg.bound) };
            (r.lower_bound, sonc_min(p).value, 1, r.status.into())
        }
        Method::Fork => match fork_bound_with(p, cfg.fork, &cfg.bound) {
            Ok(r) => (r.lower_bound, sonc_min(p).value, r.orthants.len(), r.status.into()),
            Err(_) => (f64::NEG_INFINITY, sonc_min(p).value, 0, RunStatus::Infeasible),
        },
        Method::Bnb => {
            let opts = BnbOptions { timeout: Some(cfg.timeout), ..cfg.bnb.clone() };
            match branch_and_bound(p, &opts) {
                Ok(r) => {
                    let status = if r.stop_reason == StopReason::Timeout {
                        RunStatus::Timeout
                    } else if r.lower_bound == f64::NEG_INFINITY {
                        RunStatus::NumericalFailure
                    } else {
                        RunStatus::Optimal
                    };
                    (r.lower_bound, r.best_value, r.nodes_expanded, status)
                }
                Err(_) => (f64::NEG_INFINITY, f64::INFINITY, 0, RunStatus::Infeasible),
            }
        }
    };
    let wall_time = start.elapsed().as_secs_f64();
    if wall_time > cfg.timeout.as_secs_f64() {
        status = RunStatus::Timeout;
    }
    RunReport {
        schema_version: SCHEMA_VERSION,
        instance: inst.id.clone(),
        n: p.nvars(),
        d: p.degree(),
        t: p.num_terms(),
        seed: inst.seed,
        method,
        lower_bound,
        best_value,
        gap: gap(lower_bound, best_value),
        wall_time,
        nodes_expanded: nodes,
        status,
    }
}

/// Every method on every instance, `workers` at a time. Rows come back in
/// instance order, then method order.
pub fn bench(instances: &[Instance], methods: &[Method], cfg: &RunConfig, workers: usize) -> Result<Vec<RunReport>> {
    let jobs: Vec<(&Instance, Method)> = instances.iter().flat_map(|i| methods.iter().map(move |&m| (i, m))).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidSpec(format!("thread pool: {e}")))?;
    Ok(pool.install(|| jobs.par_iter().map(|&(i, m)| run(i, m, cfg)).collect()))
}

pub fn write_csv<W: Write>(rows: &[RunReport], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    for r in rows {
        wtr.serialize(r)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(r: R) -> Result<Vec<RunReport>> {
    let mut rdr = csv::Reader::from_reader(r);
    let rows: std::result::Result<Vec<RunReport>, csv::Error> = rdr.deserialize().collect();
    let rows = rows?;
    if let Some(bad) = rows.iter().find(|r| r.schema_version != SCHEMA_VERSION) {
        return Err(Error::InvalidSpec(format!("unsupported schema version {}", bad.schema_version)));
    }
    Ok(rows)
}

/// Mean wall time per method and `(n, t)`, pooled over all degrees.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimeRow {
    pub method: Method,
    pub n: usize,
    pub t: usize,
    pub runs: usize,
    pub mean_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapHistogram {
    pub method: Method,
    /// Labels of the buckets in `counts`.
    pub buckets: Vec<String>,
    pub counts: Vec<usize>,
    pub zero_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub schema_version: u32,
    pub times: Vec<TimeRow>,
    pub gaps: Vec<GapHistogram>,
}

const GAP_EDGES: [f64; 4] = [ZERO_GAP, 1e-4, 1e-2, 1.0];
const GAP_LABELS: [&str; 6] = ["<=1e-6", "(1e-6,1e-4]", "(1e-4,1e-2]", "(1e-2,1]", ">1", "inf"];

fn bucket(gap: f64) -> usize {
    if !gap.is_finite() {
        return GAP_LABELS.len() - 1;
    }
    GAP_EDGES.iter().position(|&e| gap <= e).unwrap_or(GAP_EDGES.len())
}

pub fn summarize(rows: &[RunReport]) -> Summary {
    let mut times: BTreeMap<(Method, usize, usize), (usize, f64)> = BTreeMap::new();
    let mut gaps: BTreeMap<Method, Vec<usize>> = BTreeMap::new();
    for r in rows {
        let e = times.entry((r.method, r.n, r.t)).or_default();
        e.0 += 1;
        e.1 += r.wall_time;
        gaps.entry(r.method).or_insert_with(|| vec![0; GAP_LABELS.len()])[bucket(r.gap)] += 1;
    }
    Summary {
        schema_version: SCHEMA_VERSION,
        times: times
            .into_iter()
            .map(|((method, n, t), (runs, total))| TimeRow { method, n, t, runs, mean_time: total / runs as f64 })
            .collect(),
        gaps: gaps
            .into_iter()
            .map(|(method, counts)| {
                let total: usize = counts.iter().sum();
                GapHistogram {
                    method,
                    buckets: GAP_LABELS.iter().map(|s| s.to_string()).collect(),
                    zero_fraction: counts[0] as f64 / total as f64,
                    counts,
                }
            })
            .collect(),
    }
}

impl fmt::Display for Summary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "mean wall time (s) by n and t, all degrees pooled")?;
        writeln!(f, "{:<6} {:>3} {:>4} {:>5} {:>12}", "method", "n", "t", "runs", "mean_time")?;
        for r in &self.times {
            writeln!(f, "{:<6} {:>3} {:>4} {:>5} {:>12.6}", r.method, r.n, r.t, r.runs, r.mean_time)?;
        }
        writeln!(f)?;
        writeln!(f, "optimality gap distribution")?;
        write!(f, "{:<6}", "method")?;
        for l in GAP_LABELS {
            write!(f, " {l:>12}")?;
        }
        writeln!(f, " {:>10}", "zero_frac")?;
        for g in &self.gaps {
            write!(f, "{:<6}", g.method)?;
            for c in &g.counts {
                write!(f, " {c:>12}")?;
            }
            writeln!(f, " {:>10.4}", g.zero_fraction)?;
        }
        Ok(())
    }
}
