//! Branch-and-bound over variable signs.

use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::Serialize;

use crate::bounds::{sage_bound_positive, sonc_bound_positive, BoundOptions};
use crate::circuits::CoveringStrategy;
use crate::minima::{sonc_min, sonc_min_signed, MinimaResult};
use crate::orthants::{minimal_orthants, relax_signed, SignVector};
use crate::poly::Polynomial;
use crate::solver::DEFAULT_TOL;
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeStrategy {
    #[default]
    WorstFirst,
    Dfs,
}

/// When SAGE bounds are computed for a node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SageMode {
    Off,
    /// Together with the SONC bound when the node is created.
    #[default]
    Eager,
    /// On the node's first selection; the node then goes back to the queue.
    Deferred,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    GapClosed,
    LeafCriterion,
    TreeExhausted,
    NodeBudget,
    Timeout,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CutDecision {
    Continue,
    Cut,
    StopAll(StopReason),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BnbOptions {
    pub strategy: NodeStrategy,
    pub sparse: bool,
    pub eps: f64,
    /// Maximum tree size; `None` means `4 * 2^n`.
    pub node_budget: Option<usize>,
    pub sage: SageMode,
    pub covering: CoveringStrategy,
    pub tol: f64,
    pub timeout: Option<Duration>,
    /// Evaluate the children of a node concurrently.
    pub parallel: bool,
    /// Disable all cuts and expand every node down to full sign vectors.
    pub exhaustive: bool,
}

impl Default for BnbOptions {
    fn default() -> Self {
        Self {
            strategy: NodeStrategy::WorstFirst,
            sparse: false,
            eps: DEFAULT_TOL,
            node_budget: None,
            sage: SageMode::Eager,
            covering: CoveringStrategy::Simple,
            tol: DEFAULT_TOL,
            timeout: None,
            parallel: false,
            exhaustive: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BnbNode {
    pub id: usize,
    pub sign: SignVector,
    /// Stored bound: never below the parent's, raised to the minimum over
    /// the children once the node is branched.
    pub lower_bound: f64,
    /// The node's own certified bound, `-inf` when every solve failed.
    pub own_bound: f64,
    pub best_value: f64,
    pub minimizer: Vec<f64>,
    pub active: bool,
    pub sage_done: bool,
    pub failed: bool,
    /// No further branching changes the relaxation.
    pub terminal: bool,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
}

impl BnbNode {
    pub fn depth(&self) -> usize {
        self.sign.depth()
    }

    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SearchTree {
    pub nodes: Vec<BnbNode>,
}

impl SearchTree {
    pub fn root(&self) -> &BnbNode {
        &self.nodes[0]
    }

    pub fn leaves(&self) -> impl Iterator<Item = &BnbNode> {
        self.nodes.iter().filter(|n| n.is_leaf())
    }

    /// Minimum of the stored bounds over the current leaves.
    pub fn leaf_min(&self) -> f64 {
        self.leaves().map(|n| n.lower_bound).fold(f64::INFINITY, f64::min)
    }

    fn propagate(&mut self, mut id: usize) {
        while let Some(parent) = self.nodes[id].parent {
            let m = self.nodes[parent].children.iter().map(|&c| self.nodes[c].lower_bound).fold(f64::INFINITY, f64::min);
            let node = &mut self.nodes[parent];
            node.lower_bound = node.lower_bound.max(m);
            id = parent;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BnbResult {
    pub lower_bound: f64,
    pub best_value: f64,
    pub minimizer: Vec<f64>,
    /// Nodes whose bounds were computed.
    pub nodes_expanded: usize,
    pub leaf_reached: bool,
    pub stop_reason: StopReason,
    /// Nodes where every bound computation failed.
    pub failures: usize,
    /// Points produced by the minima heuristic during the run.
    #[serde(skip)]
    pub visited: Vec<Vec<f64>>,
    #[serde(skip)]
    pub tree: SearchTree,
    pub wall_time: f64,
}

/// Global information the cut tests need.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CutState {
    pub strategy: NodeStrategy,
    pub eps: f64,
    /// Smallest value of `p` at any known point.
    pub best_value: f64,
    /// Smallest stored bound among full-sign leaves other than the node.
    pub best_leaf_bound: Option<f64>,
    pub exhaustive: bool,
}

/// Decides what happens to a node selected for expansion.
///
/// For a finite bound, the ε-test `bound >= best - eps` stops the search
/// under worst-first and cuts the node under dfs; the Min criterion
/// (`best <= bound`) and the Leaf criterion (some full-sign leaf with a bound
/// `<=` the node's) cut. A `-inf` bound is never cut. A node that cannot be
/// branched (a full sign vector, or a cone on which no free variable has an
/// odd exponent) is final: under worst-first its bound is the tree's bound
/// and the search stops, otherwise it is cut.
pub fn cut_criteria(node: &BnbNode, state: &CutState) -> CutDecision {
    let lb = node.lower_bound;
    let worst_first = state.strategy == NodeStrategy::WorstFirst;
    if !state.exhaustive && lb > f64::NEG_INFINITY {
        if lb >= state.best_value - state.eps {
            return if worst_first { CutDecision::StopAll(StopReason::GapClosed) } else { CutDecision::Cut };
        }
        if state.best_value <= lb {
            return CutDecision::Cut;
        }
        if state.best_leaf_bound.is_some_and(|b| b <= lb) {
            return CutDecision::Cut;
        }
    }
    if node.terminal {
        return if worst_first && !state.exhaustive { CutDecision::StopAll(StopReason::LeafCriterion) } else { CutDecision::Cut };
    }
    CutDecision::Continue
}

struct NodeEval {
    bound: f64,
    failed: bool,
    sage_done: bool,
    minima: MinimaResult,
}

fn evaluate(p: &Polynomial, s: &SignVector, opts: &BnbOptions, root: bool) -> NodeEval {
    let bopts = BoundOptions { covering: opts.covering, tol: opts.tol };
    let q = relax_signed(p, s);
    let mut runs = vec![sonc_bound_positive(&q, &bopts)];
    let sage_now = opts.sage == SageMode::Eager;
    if sage_now {
        runs.push(sage_bound_positive(&q, &bopts));
    }
    let (bound, _) = crate::orthants::best_of(&runs);
    let minima = if root { sonc_min(p) } else { sonc_min_signed(p, s) };
    NodeEval { bound, failed: bound == f64::NEG_INFINITY, sage_done: opts.sage != SageMode::Deferred, minima }
}

/// Free variables that still occur with an odd exponent, weighted by the
/// absolute coefficient mass of those terms.
fn odd_mass(p: &Polynomial, s: &SignVector) -> Vec<f64> {
    let mut mass = vec![0.0; p.nvars()];
    for j in 0..p.num_terms() {
        for (i, &e) in p.exponent(j).iter().enumerate() {
            if e % 2 == 1 && s.entries()[i] == 0 {
                mass[i] += p.coeff(j).abs();
            }
        }
    }
    mass
}

fn branch_variable(p: &Polynomial, s: &SignVector) -> Option<usize> {
    let mass = odd_mass(p, s);
    let mut best: Option<usize> = None;
    for (i, &m) in mass.iter().enumerate() {
        if s.entries()[i] == 0 && m > 0.0 && best.is_none_or(|b| m > mass[b]) {
            best = Some(i);
        }
    }
    best
}

/// Children of `s` in the sparse tree: split the minimal orthants below `s`
/// on the first free variable, then fix every following variable on which a
/// group agrees.
fn sparse_children(s: &SignVector, minimal: &[SignVector]) -> Vec<SignVector> {
    let below: Vec<&SignVector> =
        minimal.iter().filter(|m| s.entries().iter().zip(m.entries()).all(|(&a, &b)| a == 0 || a == b)).collect();
    let Some(k) = s.entries().iter().position(|&v| v == 0) else { return Vec::new() };
    let n = s.len();
    let mut out = Vec::new();
    for sign in [1i8, -1] {
        let group: Vec<&&SignVector> = below.iter().filter(|m| m.entries()[k] == sign).collect();
        if group.is_empty() {
            continue;
        }
        let mut child = s.with(k, sign);
        for j in k + 1..n {
            let v = group[0].entries()[j];
            if child.entries()[j] != 0 || !group.iter().all(|m| m.entries()[j] == v) {
                break;
            }
            child = child.with(j, v);
        }
        out.push(child);
    }
    out
}

pub fn branch_and_bound(p: &Polynomial, opts: &BnbOptions) -> Result<BnbResult> {
    branch_and_bound_observed(p, opts, |_| {})
}

/// As [`branch_and_bound`], calling `observer` with the tree after the root
/// is bounded and after every iteration.
pub fn branch_and_bound_observed<F: FnMut(&SearchTree)>(p: &Polynomial, opts: &BnbOptions, mut observer: F) -> Result<BnbResult> {
    let start = Instant::now();
    let n = p.nvars();
    let minimal: Option<Vec<SignVector>> = if opts.sparse {
        Some(minimal_orthants(p)?.iter().map(|e| e.sign_vector()).collect())
    } else {
        None
    };
    let budget = opts.node_budget.unwrap_or_else(|| 4usize.saturating_mul(1usize.checked_shl(n as u32).unwrap_or(usize::MAX)));
    let is_terminal = |s: &SignVector| match &minimal {
        Some(_) => s.is_full(),
        None => branch_variable(p, s).is_none(),
    };

    let mut tree = SearchTree::default();
    let mut visited: Vec<Vec<f64>> = Vec::new();
    let mut best_value = f64::INFINITY;
    let mut minimizer: Vec<f64> = vec![0.0; n];
    let record = |m: &MinimaResult, visited: &mut Vec<Vec<f64>>, best_value: &mut f64, minimizer: &mut Vec<f64>| {
        visited.push(m.candidate.clone());
        if m.value < *best_value {
            *best_value = m.value;
            *minimizer = m.candidate.clone();
        }
    };

    let root_sign = SignVector::zeros(n);
    let ev = evaluate(p, &root_sign, opts, true);
    record(&ev.minima, &mut visited, &mut best_value, &mut minimizer);
    tree.nodes.push(BnbNode {
        id: 0,
        terminal: is_terminal(&root_sign),
        sign: root_sign,
        lower_bound: ev.bound,
        own_bound: ev.bound,
        best_value: ev.minima.value,
        minimizer: ev.minima.candidate,
        active: true,
        sage_done: ev.sage_done,
        failed: ev.failed,
        parent: None,
        children: Vec::new(),
    });
    observer(&tree);

    let stop_reason = loop {
        if opts.timeout.is_some_and(|t| start.elapsed() >= t) {
            break StopReason::Timeout;
        }
        let Some(id) = select(&tree, opts.strategy) else { break StopReason::TreeExhausted };
        let best_leaf_bound = tree
            .nodes
            .iter()
            .filter(|m| m.id != id && m.is_leaf() && m.terminal)
            .map(|m| m.lower_bound)
            .fold(None, |acc: Option<f64>, b| Some(acc.map_or(b, |a| a.min(b))));
        let state = CutState { strategy: opts.strategy, eps: opts.eps, best_value, best_leaf_bound, exhaustive: opts.exhaustive };
        let decision = cut_criteria(&tree.nodes[id], &state);
        let node = &tree.nodes[id];
        let refine = !node.sage_done && decision != CutDecision::StopAll(StopReason::GapClosed) && (decision == CutDecision::Continue || node.terminal);
        if refine {
            let bopts = BoundOptions { covering: opts.covering, tol: opts.tol };
            let r = sage_bound_positive(&relax_signed(p, &node.sign), &bopts);
            let node = &mut tree.nodes[id];
            node.sage_done = true;
            if r.is_optimal() {
                node.own_bound = node.own_bound.max(r.lower_bound);
                node.lower_bound = node.lower_bound.max(r.lower_bound);
                node.failed = false;
            }
            tree.propagate(id);
            observer(&tree);
            continue;
        }
        match decision {
            CutDecision::StopAll(reason) => break reason,
            CutDecision::Cut => {
                tree.nodes[id].active = false;
                observer(&tree);
                continue;
            }
            CutDecision::Continue => {}
        }
        if tree.nodes.len() >= budget {
            break StopReason::NodeBudget;
        }
        let sign = tree.nodes[id].sign.clone();
        let child_signs: Vec<SignVector> = match &minimal {
            Some(m) => sparse_children(&sign, m),
            None => {
                let i = branch_variable(p, &sign).expect("non-terminal nodes have a branch variable");
                vec![sign.with(i, 1), sign.with(i, -1)]
            }
        };
        let evals: Vec<NodeEval> = if opts.parallel {
            child_signs.par_iter().map(|s| evaluate(p, s, opts, false)).collect()
        } else {
            child_signs.iter().map(|s| evaluate(p, s, opts, false)).collect()
        };
        let parent_bound = tree.nodes[id].lower_bound;
        tree.nodes[id].active = false;
        for (s, ev) in child_signs.into_iter().zip(evals) {
            record(&ev.minima, &mut visited, &mut best_value, &mut minimizer);
            let cid = tree.nodes.len();
            tree.nodes.push(BnbNode {
                id: cid,
                terminal: is_terminal(&s),
                sign: s,
                lower_bound: ev.bound.max(parent_bound),
                own_bound: ev.bound,
                best_value: ev.minima.value,
                minimizer: ev.minima.candidate,
                active: true,
                sage_done: ev.sage_done,
                failed: ev.failed,
                parent: Some(id),
                children: Vec::new(),
            });
            tree.nodes[id].children.push(cid);
        }
        if let Some(&c) = tree.nodes[id].children.first() {
            tree.propagate(c);
        }
        observer(&tree);
    };

    Ok(BnbResult {
        lower_bound: tree.leaf_min(),
        best_value,
        minimizer,
        nodes_expanded: tree.nodes.len(),
        leaf_reached: tree.nodes.iter().any(|m| m.sign.is_full()),
        stop_reason,
        failures: tree.nodes.iter().filter(|m| m.failed).count(),
        visited,
        tree,
        wall_time: start.elapsed().as_secs_f64(),
    })
}

/// Worst-first: smallest bound, then smallest depth, then oldest.
/// Dfs: newest active node.
fn select(tree: &SearchTree, strategy: NodeStrategy) -> Option<usize> {
    let active = tree.nodes.iter().filter(|m| m.active);
    match strategy {
        NodeStrategy::Dfs => active.map(|m| m.id).max(),
        NodeStrategy::WorstFirst => active
            .min_by(|a, b| a.lower_bound.total_cmp(&b.lower_bound).then(a.depth().cmp(&b.depth())).then(a.id.cmp(&b.id)))
            .map(|m| m.id),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::orthants::minimal_orthants;

    const QUARTIC: &str = "x0^4 + x0^3 - x0 + 1";

    fn poly(s: &str) -> Polynomial {
        s.parse().unwrap()
    }

    fn node(sign: Vec<i8>, lb: f64, terminal: bool) -> BnbNode {
        BnbNode {
            id: 1,
            sign: SignVector::new(sign).unwrap(),
            lower_bound: lb,
            own_bound: lb,
            best_value: f64::INFINITY,
            minimizer: vec![],
            active: true,
            sage_done: true,
            failed: false,
            terminal,
            parent: Some(0),
            children: vec![],
        }
    }

    fn state(best: f64, eps: f64, leaf: Option<f64>) -> CutState {
        CutState { strategy: NodeStrategy::WorstFirst, eps, best_value: best, best_leaf_bound: leaf, exhaustive: false }
    }

    #[test]
    fn cut_examples() {
        let n = node(vec![1, 0], 5.0, false);
        assert_eq!(cut_criteria(&n, &state(4.9, 0.2, None)), CutDecision::StopAll(StopReason::GapClosed));
        let n = node(vec![1, 0], 2.0, false);
        assert_eq!(cut_criteria(&n, &state(10.0, 1e-7, Some(1.0))), CutDecision::Cut);
        let n = node(vec![1, 0], f64::NEG_INFINITY, false);
        assert_eq!(cut_criteria(&n, &state(f64::NEG_INFINITY, 1.0, Some(f64::NEG_INFINITY))), CutDecision::Continue);
        let n = node(vec![1, 1], 0.5, true);
        assert_eq!(cut_criteria(&n, &state(10.0, 1e-7, None)), CutDecision::StopAll(StopReason::LeafCriterion));
        let dfs = CutState { strategy: NodeStrategy::Dfs, ..state(4.9, 0.2, None) };
        assert_eq!(cut_criteria(&node(vec![1, 0], 5.0, false), &dfs), CutDecision::Cut);
    }

    #[test]
    fn squares_close_at_root() {
        let r = branch_and_bound(&poly("x0^2 + 3*x1^4 + 2"), &BnbOptions::default()).unwrap();
        assert_eq!(r.lower_bound, 2.0);
        assert!(r.best_value <= 2.0 + DEFAULT_TOL);
        assert_eq!(r.nodes_expanded, 1);
        assert_eq!(r.stop_reason, StopReason::GapClosed);
    }

    #[test]
    fn example_31() {
        let p = poly(QUARTIC);
        let opts = BnbOptions { eps: 1e-3, ..Default::default() };
        let r = branch_and_bound(&p, &opts).unwrap();
        assert!(r.lower_bound <= 0.6821 && r.lower_bound >= 0.682 - 1e-3, "{r:?}");
        assert!((r.best_value - 0.682).abs() < 1e-3);
        let plus = r.tree.nodes.iter().find(|m| m.sign.entries() == [1]).unwrap();
        let minus = r.tree.nodes.iter().find(|m| m.sign.entries() == [-1]).unwrap();
        assert!(plus.lower_bound < minus.lower_bound);
        assert_eq!(r.lower_bound, plus.lower_bound);
        for strategy in [NodeStrategy::Dfs, NodeStrategy::WorstFirst] {
            for sage in [SageMode::Off, SageMode::Eager, SageMode::Deferred] {
                let o = BnbOptions { strategy, sage, eps: 1e-3, ..Default::default() };
                let r = branch_and_bound(&p, &o).unwrap();
                assert!(r.lower_bound <= 0.6821 && r.lower_bound > 0.0, "{strategy:?} {sage:?} {}", r.lower_bound);
            }
        }
    }

    #[test]
    fn example_41_sparse_leaves() {
        let p = poly(crate::orthants::tests::THREE_VAR);
        let opts = BnbOptions { sparse: true, exhaustive: true, ..Default::default() };
        let r = branch_and_bound(&p, &opts).unwrap();
        let mut leaves: Vec<SignVector> = r.tree.leaves().map(|m| m.sign.clone()).collect();
        let mut expected: Vec<SignVector> = minimal_orthants(&p).unwrap().iter().map(|e| e.sign_vector()).collect();
        leaves.sort();
        expected.sort();
        assert_eq!(leaves, expected);
        assert_eq!(r.stop_reason, StopReason::TreeExhausted);
    }

    #[test]
    fn deferral_branches_once() {
        let p = poly(QUARTIC);
        let mut selections = Vec::new();
        let opts = BnbOptions { sage: SageMode::Deferred, exhaustive: true, ..Default::default() };
        let r = branch_and_bound_observed(&p, &opts, |t| {
            selections.push(t.nodes.iter().map(|m| (m.sage_done, m.children.len())).collect::<Vec<_>>());
        })
        .unwrap();
        assert_eq!(r.tree.root().children.len(), 2);
        assert!(r.tree.nodes.iter().all(|m| m.sage_done));
        // the root is first refined by SAGE, then branched
        assert_eq!(selections[1][0], (true, 0));
        assert_eq!(selections[2][0], (true, 2));
    }

    #[test]
    fn leaf_min_invariant() {
        let p = poly("x0^4*x1^2 + x0^6 + x1^6 - x0*x1^3 + 2*x0^3*x1 - x0 + x1 + 1");
        for strategy in [NodeStrategy::WorstFirst, NodeStrategy::Dfs] {
            for sparse in [false, true] {
                let opts = BnbOptions { strategy, sparse, exhaustive: true, ..Default::default() };
                let r = branch_and_bound_observed(&p, &opts, |t| {
                    assert_eq!(t.root().lower_bound, t.leaf_min());
                    for m in &t.nodes {
                        if let Some(par) = m.parent {
                            assert!(m.lower_bound >= t.nodes[par].lower_bound - 1e-9);
                        }
                    }
                })
                .unwrap();
                for x in &r.visited {
                    assert!(r.lower_bound <= p.eval(x) + 1e-6);
                }
                assert!(r.lower_bound >= crate::bounds::sonc_bound(&p).lower_bound - 1e-6);
            }
        }
    }

    #[test]
    fn budget_is_reported() {
        let p = poly("x0^4*x1^2 + x0^6 + x1^6 - x0*x1^3 + 2*x0^3*x1 - x0 + x1 + 1");
        let opts = BnbOptions { node_budget: Some(1), exhaustive: true, ..Default::default() };
        let r = branch_and_bound(&p, &opts).unwrap();
        assert_eq!(r.stop_reason, StopReason::NodeBudget);
        let par = BnbOptions { parallel: true, exhaustive: true, ..Default::default() };
        let seq = BnbOptions { exhaustive: true, ..Default::default() };
        assert_eq!(branch_and_bound(&p, &par).unwrap().lower_bound, branch_and_bound(&p, &seq).unwrap().lower_bound);
    }
}
