//! Best-bound branch-and-bound over binary variables.
//!
//! Nodes are keyed by their parent's relaxation bound and solved when popped. Ties go
//! to the older node. Branching picks the most fractional binary, lowest id first, and
//! pushes the down branch before the up branch. Children reuse the parent's tableau
//! while the stored warm starts fit in a fixed memory budget.

use alloc::collections::BinaryHeap;
use alloc::rc::Rc;
use alloc::vec::Vec;
use core::cmp::Ordering;

use super::model::{Model, ObjSense, VarKind};
use super::simplex::{LpData, LpState, LpStatus};
use super::SolveError;
use crate::clock::{Clock, NoClock};

const WARM_START_BUDGET: usize = 256 << 20;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MilpParams {
    /// Seconds; `None` disables the limit.
    pub time_limit: Option<f64>,
    pub node_limit: Option<u64>,
    pub gap_tol: f64,
    pub int_tol: f64,
}

impl Default for MilpParams {
    fn default() -> Self {
        MilpParams { time_limit: None, node_limit: None, gap_tol: 1e-6, int_tol: 1e-6 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    /// A time or node limit stopped the search; the incumbent, if any, is kept.
    Limit,
}

impl SolveStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::Unbounded => "unbounded",
            SolveStatus::Limit => "limit",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimelinePoint {
    pub elapsed: f64,
    pub dual: f64,
    pub primal: Option<f64>,
    pub nodes_open: u64,
    pub nodes_closed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveStats {
    pub sense: ObjSense,
    pub primal: Option<f64>,
    /// Best proven bound, in the model's sense.
    pub dual: f64,
    pub nodes_open: u64,
    pub nodes_closed: u64,
    pub status: SolveStatus,
    /// Relaxation value at the root node, when it was solved to optimality.
    pub root_bound: Option<f64>,
    pub elapsed: f64,
    pub timeline: Vec<TimelinePoint>,
}

impl SolveStats {
    /// Checks bound ordering and timeline monotonicity. Returns the first failure.
    pub fn check_invariants(&self) -> Result<(), &'static str> {
        let tol = 1e-9;
        let better = |a: f64, b: f64| match self.sense {
            ObjSense::Maximize => a >= b - tol * b.abs().max(1.0),
            ObjSense::Minimize => a <= b + tol * b.abs().max(1.0),
        };
        if let Some(p) = self.primal {
            if !better(self.dual, p) {
                return Err("dual bound is worse than the incumbent");
            }
        }
        for w in self.timeline.windows(2) {
            if !better(w[0].dual, w[1].dual) {
                return Err("timeline dual bound moved the wrong way");
            }
            if w[1].nodes_closed < w[0].nodes_closed {
                return Err("closed node count decreased");
            }
            if w[1].elapsed < w[0].elapsed {
                return Err("timeline time decreased");
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MilpResult {
    pub x: Option<Vec<f64>>,
    pub stats: SolveStats,
}

impl MilpResult {
    pub fn objective(&self) -> Option<f64> {
        self.stats.primal
    }
}

pub fn solve_milp(model: &Model, params: &MilpParams) -> Result<MilpResult, SolveError> {
    solve_milp_with_clock(model, params, &NoClock)
}

struct Node {
    /// Upper bound on the maximized internal objective below this node.
    key: f64,
    seq: u64,
    lo: Vec<f64>,
    hi: Vec<f64>,
    warm: Option<Rc<LpState>>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key.total_cmp(&other.key).then_with(|| other.seq.cmp(&self.seq))
    }
}

pub fn solve_milp_with_clock(model: &Model, params: &MilpParams, clock: &dyn Clock) -> Result<MilpResult, SolveError> {
    model.validate()?;
    if model.is_quadratic() {
        return Err(SolveError::NotLinear);
    }
    let start = clock.elapsed_secs();
    let elapsed = || clock.elapsed_secs() - start;
    let sense = model.objective.sense;
    // Internally the objective is maximized.
    let sign = match sense {
        ObjSense::Maximize => 1.0,
        ObjSense::Minimize => -1.0,
    };
    let data = LpData::new(model);
    let binaries: Vec<usize> = (0..model.vars.len()).filter(|&j| model.vars[j].kind == VarKind::Binary).collect();

    let mut heap = BinaryHeap::new();
    let mut seq = 0u64;
    heap.push(Node { key: f64::INFINITY, seq, lo: data.var_lo.clone(), hi: data.var_hi.clone(), warm: None });
    let mut incumbent: Option<(f64, Vec<f64>)> = None;
    let mut closed = 0u64;
    let mut timeline = Vec::new();
    let mut root_bound = None;
    let mut warm_bytes = 0usize;
    let mut status = None;
    let mut last_dual = f64::INFINITY;
    let mut last_primal: Option<f64> = None;

    let gap_ok = |dual: f64, primal: f64| dual - primal <= params.gap_tol * primal.abs().max(1.0);

    while let Some(top) = heap.peek() {
        if let Some((p, _)) = &incumbent {
            if gap_ok(top.key, *p) {
                heap.clear();
                break;
            }
        }
        if params.node_limit.is_some_and(|lim| closed >= lim) || params.time_limit.is_some_and(|t| elapsed() >= t) {
            status = Some(SolveStatus::Limit);
            break;
        }
        let node = heap.pop().expect("peeked");
        if let Some(w) = &node.warm {
            warm_bytes = warm_bytes.saturating_sub(w.bytes() / 2);
        }
        let mut state = match node.warm {
            Some(rc) => {
                let mut s = Rc::try_unwrap(rc).unwrap_or_else(|rc| (*rc).clone());
                for &j in &binaries {
                    s.set_bounds(j, node.lo[j], node.hi[j]);
                }
                s
            }
            None => LpState::cold(&data, &node.lo, &node.hi),
        };
        let lp_status = match state.solve(&data) {
            Ok(s) => s,
            Err(_) => {
                state = LpState::cold(&data, &node.lo, &node.hi);
                state.solve(&data)?
            }
        };
        closed += 1;
        match lp_status {
            LpStatus::Infeasible => {}
            LpStatus::Unbounded => {
                if closed == 1 {
                    status = Some(SolveStatus::Unbounded);
                    break;
                }
                return Err(SolveError::NumericBreakdown("unbounded relaxation below a bounded root".into()));
            }
            LpStatus::Optimal => {
                let x = state.structural(&data);
                let value = sign * data.objective(&x);
                let bound = value.min(node.key);
                if closed == 1 {
                    root_bound = Some(sign * value);
                }
                let prune = incumbent.as_ref().is_some_and(|(p, _)| gap_ok(bound, *p));
                if !prune {
                    match most_fractional(&x, &binaries, params.int_tol) {
                        None => {
                            let mut x = x;
                            for &j in &binaries {
                                x[j] = libm::round(x[j]);
                            }
                            let value = sign * model.objective_value(&x);
                            if incumbent.as_ref().is_none_or(|(p, _)| value > *p) {
                                incumbent = Some((value, x));
                            }
                        }
                        Some(j) => {
                            let shared = if warm_bytes + state.bytes() <= WARM_START_BUDGET {
                                warm_bytes += state.bytes();
                                Some(Rc::new(state))
                            } else {
                                None
                            };
                            for fix in [0.0, 1.0] {
                                let mut lo = node.lo.clone();
                                let mut hi = node.hi.clone();
                                lo[j] = fix;
                                hi[j] = fix;
                                seq += 1;
                                heap.push(Node { key: bound, seq, lo, hi, warm: shared.clone() });
                            }
                        }
                    }
                }
            }
        }
        let dual = current_dual(&heap, &incumbent);
        let primal = incumbent.as_ref().map(|(p, _)| *p);
        if dual != last_dual || primal != last_primal {
            timeline.push(TimelinePoint {
                elapsed: elapsed(),
                dual: sign * dual,
                primal: primal.map(|p| sign * p),
                nodes_open: heap.len() as u64,
                nodes_closed: closed,
            });
            last_dual = dual;
            last_primal = primal;
        }
    }

    let status = status.unwrap_or(if incumbent.is_some() { SolveStatus::Optimal } else { SolveStatus::Infeasible });
    let dual = match status {
        SolveStatus::Optimal => incumbent.as_ref().map(|(p, _)| *p).expect("incumbent"),
        SolveStatus::Unbounded => f64::INFINITY,
        _ => current_dual(&heap, &incumbent),
    };
    let nodes_open = if status == SolveStatus::Limit { heap.len() as u64 } else { 0 };
    let elapsed_total = elapsed();
    let primal = incumbent.as_ref().map(|(p, _)| sign * p);
    let final_point =
        TimelinePoint { elapsed: elapsed_total, dual: sign * dual, primal, nodes_open, nodes_closed: closed };
    if timeline.last() != Some(&final_point) {
        timeline.push(final_point);
    }
    let stats = SolveStats {
        sense,
        primal,
        dual: sign * dual,
        nodes_open,
        nodes_closed: closed,
        status,
        root_bound,
        elapsed: elapsed_total,
        timeline,
    };
    Ok(MilpResult { x: incumbent.map(|(_, x)| x), stats })
}

fn current_dual(heap: &BinaryHeap<Node>, incumbent: &Option<(f64, Vec<f64>)>) -> f64 {
    let open = heap.peek().map_or(f64::NEG_INFINITY, |n| n.key);
    let inc = incumbent.as_ref().map_or(f64::NEG_INFINITY, |(p, _)| *p);
    open.max(inc)
}

fn most_fractional(x: &[f64], binaries: &[usize], int_tol: f64) -> Option<usize> {
    let mut best = None;
    let mut best_frac = int_tol;
    for &j in binaries {
        let f = (x[j] - libm::floor(x[j])).min(libm::ceil(x[j]) - x[j]);
        if f > best_frac {
            best_frac = f;
            best = Some(j);
        }
    }
    best
}
