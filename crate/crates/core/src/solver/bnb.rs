//! Best-first branch-and-bound over the binary variables of a [`MiqpProblem`].

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::{Duration, Instant};

use rayon::prelude::*;

use super::qp::{solve_qp, Fixings, QpSolution, QpStatus, QpTolerances};
use crate::problem::MiqpProblem;

/// Pruning slack: a node is discarded when its bound is within this of the incumbent.
pub const PRUNE_TOL: f64 = 1e-9;
/// Relaxations a single dive may solve.
const DIVE_BUDGET: usize = 400;
/// While no incumbent exists, a dive from the best open node is started
/// every this many nodes.
const DIVE_INTERVAL: usize = 500;

#[derive(Debug, Clone, PartialEq)]
pub struct MiqpLimits {
    /// Relative gap `(incumbent - bound) / max(1, |incumbent|)` at which to stop.
    pub gap_tol: f64,
    pub node_limit: usize,
    pub time_limit: Option<Duration>,
    /// Distance from {0, 1} below which a relaxed binary counts as integral.
    pub int_tol: f64,
    /// Nodes expanded per round; results are merged in a fixed order, so any
    /// given worker count is deterministic, but counts differ between worker counts.
    pub workers: usize,
    pub qp: QpTolerances,
}

impl Default for MiqpLimits {
    fn default() -> Self {
        Self {
            gap_tol: 1e-4,
            node_limit: 200_000,
            time_limit: None,
            int_tol: 1e-5,
            workers: 1,
            qp: QpTolerances::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MiqpStatus {
    /// Search tree exhausted (or bound met incumbent).
    Optimal,
    /// Stopped with a positive gap no larger than the gap tolerance.
    GapLimit,
    Infeasible,
    NodeLimit,
    TimeLimit,
}

impl MiqpStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            MiqpStatus::Optimal => "optimal",
            MiqpStatus::GapLimit => "gap-limit",
            MiqpStatus::Infeasible => "infeasible",
            MiqpStatus::NodeLimit => "node-limit",
            MiqpStatus::TimeLimit => "time-limit",
        }
    }

    /// Optimal within the requested gap.
    pub fn is_solved(self) -> bool {
        matches!(self, MiqpStatus::Optimal | MiqpStatus::GapLimit)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MiqpSolution {
    /// Best integral point found; binaries are exactly 0 or 1.
    pub x: Option<Vec<f64>>,
    pub objective: f64,
    pub best_bound: f64,
    pub gap: f64,
    /// Relaxations solved.
    pub nodes: usize,
    pub wall_time: Duration,
    pub status: MiqpStatus,
    /// Incumbent objective each time it improved, with the node count at that moment.
    pub incumbent_trace: Vec<(usize, f64)>,
}

pub fn relative_gap(incumbent: f64, bound: f64) -> f64 {
    if !incumbent.is_finite() {
        return f64::INFINITY;
    }
    ((incumbent - bound) / incumbent.abs().max(1.0)).max(0.0)
}

#[derive(Debug, Clone)]
pub struct BnbNode {
    pub fixings: Fixings,
    /// Relaxation lower bound, never below the parent's.
    pub bound: f64,
    pub depth: usize,
    id: u64,
    /// Binary position to branch on next.
    branch_pos: usize,
}

impl PartialEq for BnbNode {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for BnbNode {}
impl PartialOrd for BnbNode {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for BnbNode {
    // BinaryHeap is a max-heap: the "greatest" node is the lowest bound,
    // then the deepest, then the oldest.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then(self.depth.cmp(&other.depth))
            .then(other.id.cmp(&self.id))
    }
}

enum Outcome {
    Infeasible,
    /// Integral point; the whole subtree is resolved.
    Integral { x: Vec<f64>, objective: f64 },
    Branch { bound: f64, branch_pos: usize },
}

struct Search<'a> {
    problem: &'a MiqpProblem,
    limits: &'a MiqpLimits,
}

impl Search<'_> {
    fn evaluate(&self, fixings: &Fixings, parent_bound: f64) -> Outcome {
        let sol = solve_qp(self.problem, fixings, &self.limits.qp);
        match sol.status {
            QpStatus::Infeasible => Outcome::Infeasible,
            QpStatus::Optimal => {
                let bound = sol.objective.max(parent_bound);
                match self.most_fractional(&sol, fixings, self.limits.int_tol) {
                    Some(branch_pos) => Outcome::Branch { bound, branch_pos },
                    None => self.refix(&sol, fixings, bound),
                }
            }
            // The relaxation gave no usable bound: keep the parent's and split.
            _ => match self.first_free(fixings) {
                Some(branch_pos) => Outcome::Branch { bound: parent_bound, branch_pos },
                None => Outcome::Infeasible,
            },
        }
    }

    /// Rounds a near-integral relaxation and re-solves with every binary fixed.
    fn refix(&self, sol: &QpSolution, fixings: &Fixings, bound: f64) -> Outcome {
        let values: Vec<bool> = self.problem.binaries.iter().map(|&j| sol.x[j] > 0.5).collect();
        let exact = solve_qp(self.problem, &Fixings::from_values(&values), &self.limits.qp);
        if exact.status == QpStatus::Optimal {
            return Outcome::Integral { objective: exact.objective, x: exact.x };
        }
        match self.most_fractional(sol, fixings, 0.0) {
            Some(branch_pos) => Outcome::Branch { bound, branch_pos },
            None => Outcome::Infeasible,
        }
    }

    fn most_fractional(&self, sol: &QpSolution, fixings: &Fixings, tol: f64) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (pos, &j) in self.problem.binaries.iter().enumerate() {
            if fixings.get(pos).is_some() {
                continue;
            }
            let v = sol.x[j];
            let frac = v.min(1.0 - v);
            if frac <= tol {
                continue;
            }
            let dist = (v - 0.5).abs();
            if best.is_none_or(|(_, d)| dist < d) {
                best = Some((pos, dist));
            }
        }
        best.map(|(pos, _)| pos)
    }

    /// Diving heuristic: starting from `fixings`, repeatedly fixes the free
    /// fractional binary with the largest relaxed value to 1 (or to 0 if that
    /// is infeasible) until the relaxation is integral. Returns the integral
    /// point found, if any, and the number of relaxations solved.
    fn dive(&self, fixings: &Fixings) -> (Option<(Vec<f64>, f64)>, usize) {
        let mut fix = fixings.clone();
        let mut sol = solve_qp(self.problem, &fix, &self.limits.qp);
        let mut solves = 1;
        while sol.status == QpStatus::Optimal && solves < DIVE_BUDGET {
            let Some(pos) = self.most_decided(&sol, &fix) else {
                return match self.refix(&sol, &fix, sol.objective) {
                    Outcome::Integral { x, objective } => (Some((x, objective)), solves + 1),
                    _ => (None, solves + 1),
                };
            };
            fix.fix(pos, true);
            sol = solve_qp(self.problem, &fix, &self.limits.qp);
            solves += 1;
            if sol.status != QpStatus::Optimal {
                fix.fix(pos, false);
                sol = solve_qp(self.problem, &fix, &self.limits.qp);
                solves += 1;
            }
        }
        (None, solves)
    }

    /// Free fractional binary with the largest relaxed value.
    fn most_decided(&self, sol: &QpSolution, fixings: &Fixings) -> Option<usize> {
        let tol = self.limits.int_tol;
        let mut best: Option<(usize, f64)> = None;
        for (pos, &j) in self.problem.binaries.iter().enumerate() {
            let v = sol.x[j];
            if fixings.get(pos).is_some() || v <= tol || v >= 1.0 - tol {
                continue;
            }
            if best.is_none_or(|(_, b)| v > b) {
                best = Some((pos, v));
            }
        }
        best.map(|(pos, _)| pos)
    }

    fn first_free(&self, fixings: &Fixings) -> Option<usize> {
        (0..fixings.len()).find(|&pos| fixings.get(pos).is_none())
    }
}

/// Solves `problem` to within `limits.gap_tol` by best-first branch-and-bound.
pub fn solve_miqp(problem: &MiqpProblem, limits: &MiqpLimits) -> MiqpSolution {
    let start = Instant::now();
    let search = Search { problem, limits };
    let mut next_id: u64 = 0;
    let mut nodes = 0usize;
    let mut incumbent: Option<(Vec<f64>, f64)> = None;
    let mut trace: Vec<(usize, f64)> = Vec::new();
    let mut heap: BinaryHeap<BnbNode> = BinaryHeap::new();

    let root_fix = Fixings::none(problem.binaries.len());
    nodes += 1;
    match search.evaluate(&root_fix, f64::NEG_INFINITY) {
        Outcome::Infeasible => {}
        Outcome::Integral { x, objective } => {
            trace.push((nodes, objective));
            incumbent = Some((x, objective));
        }
        Outcome::Branch { bound, branch_pos } => {
            heap.push(BnbNode { fixings: root_fix, bound, depth: 0, id: next_id, branch_pos });
            next_id += 1;
        }
    }
    let mut next_dive = 0;

    let workers = limits.workers.max(1);
    let status = loop {
        let inc_obj = incumbent.as_ref().map_or(f64::INFINITY, |(_, o)| *o);
        let Some(top) = heap.peek() else {
            break if incumbent.is_some() { MiqpStatus::Optimal } else { MiqpStatus::Infeasible };
        };
        if top.bound >= inc_obj - PRUNE_TOL {
            heap.clear();
            continue;
        }
        let gap = relative_gap(inc_obj, top.bound);
        if gap <= limits.gap_tol {
            break MiqpStatus::GapLimit;
        }
        if nodes >= limits.node_limit {
            break MiqpStatus::NodeLimit;
        }
        if limits.time_limit.is_some_and(|t| start.elapsed() >= t) {
            break MiqpStatus::TimeLimit;
        }
        if incumbent.is_none() && nodes >= next_dive {
            let (found, solves) = search.dive(&top.fixings);
            nodes += solves;
            next_dive = nodes + DIVE_INTERVAL;
            if let Some((x, objective)) = found {
                trace.push((nodes, objective));
                incumbent = Some((x, objective));
            }
            continue;
        }

        let mut batch = Vec::with_capacity(workers);
        while batch.len() < workers {
            match heap.pop() {
                Some(node) if node.bound < inc_obj - PRUNE_TOL => batch.push(node),
                Some(_) => heap.clear(),
                None => break,
            }
        }
        let children: Vec<(Fixings, f64, usize)> = batch
            .iter()
            .flat_map(|node| {
                [false, true].map(|value| {
                    let mut fix = node.fixings.clone();
                    fix.fix(node.branch_pos, value);
                    (fix, node.bound, node.depth + 1)
                })
            })
            .collect();
        let outcomes: Vec<Outcome> = if workers == 1 {
            children.iter().map(|(fix, bound, _)| search.evaluate(fix, *bound)).collect()
        } else {
            children.par_iter().map(|(fix, bound, _)| search.evaluate(fix, *bound)).collect()
        };
        nodes += outcomes.len();
        for ((fix, _, depth), outcome) in children.into_iter().zip(outcomes) {
            let inc_obj = incumbent.as_ref().map_or(f64::INFINITY, |(_, o)| *o);
            match outcome {
                Outcome::Infeasible => {}
                Outcome::Integral { x, objective } => {
                    if objective < inc_obj {
                        trace.push((nodes, objective));
                        incumbent = Some((x, objective));
                    }
                }
                Outcome::Branch { bound, branch_pos } => {
                    if bound < inc_obj - PRUNE_TOL {
                        heap.push(BnbNode { fixings: fix, bound, depth, id: next_id, branch_pos });
                        next_id += 1;
                    }
                }
            }
        }
    };

    let (x, objective) = match incumbent {
        Some((x, o)) => (Some(x), o),
        None => (None, f64::INFINITY),
    };
    let best_bound = match status {
        MiqpStatus::Optimal => objective,
        MiqpStatus::Infeasible => f64::INFINITY,
        _ => heap.peek().map_or(objective, |n| n.bound.min(objective)),
    };
    let gap = if x.is_some() { relative_gap(objective, best_bound) } else { f64::INFINITY };
    let status = if status == MiqpStatus::GapLimit && gap <= PRUNE_TOL { MiqpStatus::Optimal } else { status };
    MiqpSolution {
        x,
        objective,
        best_bound,
        gap,
        nodes,
        wall_time: start.elapsed(),
        status,
        incumbent_trace: trace,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::RowTag;

    #[test]
    fn prefixed_binaries_take_one_node() {
        let mut p = MiqpProblem::new(3);
        p.add_product(0, 0, 1.0);
        p.linear = vec![-2.0, 1.0, -1.0];
        p.mark_binary(1);
        p.mark_binary(2);
        p.add_le(vec![(0, 1.0), (1, 1.0)], 3.0, RowTag::generic(0));
        // pre-fix both binaries through their bounds
        p.set_bounds(1, 1.0, 1.0);
        p.set_bounds(2, 0.0, 0.0);
        let s = solve_miqp(&p, &MiqpLimits::default());
        assert_eq!(s.nodes, 1);
        assert_eq!(s.status, MiqpStatus::Optimal);
        let x = s.x.unwrap();
        assert_eq!((x[1], x[2]), (1.0, 0.0));
    }

    #[test]
    fn knapsack_like_choice() {
        // max 3a + 2b + 2c  s.t. 2a + b + c <= 2.5 ... as minimization with a tiny quadratic
        let mut p = MiqpProblem::new(3);
        for j in 0..3 {
            p.mark_binary(j);
            p.add_product(j, j, 0.01);
        }
        p.linear = vec![-3.0, -2.0, -2.0];
        p.add_le(vec![(0, 2.0), (1, 1.0), (2, 1.0)], 2.5, RowTag::generic(0));
        let s = solve_miqp(&p, &MiqpLimits { gap_tol: 0.0, ..MiqpLimits::default() });
        assert_eq!(s.status, MiqpStatus::Optimal);
        let x = s.x.unwrap();
        assert_eq!(x, vec![0.0, 1.0, 1.0]);
        assert!((s.objective + 3.98).abs() < 1e-6);
    }

    #[test]
    fn infeasible_root() {
        let mut p = MiqpProblem::new(1);
        p.mark_binary(0);
        p.add_le(vec![(0, 1.0)], -0.5, RowTag::generic(0));
        let s = solve_miqp(&p, &MiqpLimits::default());
        assert_eq!(s.status, MiqpStatus::Infeasible);
        assert!(s.x.is_none());
    }

    #[test]
    fn heap_orders_by_bound_then_depth() {
        let node = |bound: f64, depth: usize, id: u64| BnbNode {
            fixings: Fixings::none(0),
            bound,
            depth,
            id,
            branch_pos: 0,
        };
        let mut heap = BinaryHeap::new();
        heap.push(node(2.0, 5, 0));
        heap.push(node(1.0, 1, 1));
        heap.push(node(1.0, 3, 2));
        heap.push(node(1.0, 3, 3));
        let order: Vec<u64> = std::iter::from_fn(|| heap.pop().map(|n| n.id)).collect();
        assert_eq!(order, vec![2, 3, 1, 0]);
    }
}
