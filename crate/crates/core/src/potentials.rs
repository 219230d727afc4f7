//! Reward potentials for hidden units.
//!
//! A potential assigns `v_off` to a unit that is off and `v_on[i]` to a unit whose
//! output lies in interval `i` of `N` equal slices of `[0, N_u]`. Potentials are valid
//! when, for every feasible one-step transition, the potentials of its activation
//! pattern sum to at least the step reward.
//!
//! [`compute_potentials`] finds the valid potentials minimizing `Σ v + λ v²` by
//! constraint generation: a master QP over the patterns seen so far alternates with a
//! subproblem MILP that returns the pattern with the largest reward excess.
//! [`oracle_enumerate`] solves the same master over every feasible pattern.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::clock::{Clock, NoClock};
use crate::compiler::{interval_of, CompileError, Encoder};
use crate::milp::{
    self, solve_milp_with_clock, LinExpr, LpStatus, MilpParams, Model, ObjSense, Sense, SolveError, SolveStatus, VarId,
    FEAS_TOL,
};
use crate::nn::{NeuralNet, UnitBounds};
use crate::problem::PlanningInstance;

pub const DEFAULT_EPSILON: f64 = 1e-6;
/// Largest pattern space [`oracle_enumerate`] accepts.
pub const ORACLE_LIMIT: f64 = 1e5;
const ITERATION_CAP: f64 = 1e6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PotentialError {
    #[error(transparent)]
    Compile(#[from] CompileError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error("learned planning problem infeasible: no feasible one-step transition")]
    Infeasible,
    #[error("one-step model is unbounded; check the variable domains")]
    Unbounded,
    #[error("degenerate instance: {0}")]
    Degenerate(String),
    #[error("constraint generation did not terminate after {generated} generated patterns")]
    Nontermination { generated: usize },
    #[error("pattern space of {patterns} exceeds the enumeration limit")]
    ScaleGuard { patterns: f64 },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnitPotential {
    pub v_off: f64,
    /// One entry per interval.
    pub v_on: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RewardPotentials {
    pub n_intervals: usize,
    pub lambda: f64,
    pub epsilon: f64,
    /// Violation reported by the final check.
    pub certified_violation: f64,
    pub units: Vec<UnitPotential>,
}

/// Per unit: 0 when off, else the 1-based interval of its output.
pub type Pattern = Vec<usize>;

impl RewardPotentials {
    /// Every potential set to `value`.
    pub fn uniform(bounds: &UnitBounds, n_intervals: usize, value: f64) -> Self {
        RewardPotentials {
            n_intervals,
            lambda: 0.0,
            epsilon: DEFAULT_EPSILON,
            certified_violation: f64::INFINITY,
            units: (0..bounds.len()).map(|_| UnitPotential { v_off: value, v_on: vec![value; n_intervals] }).collect(),
        }
    }

    /// Sum of the potentials selected by a pattern.
    pub fn total(&self, pattern: &[usize]) -> f64 {
        self.units.iter().zip(pattern).map(|(u, &p)| if p == 0 { u.v_off } else { u.v_on[p - 1] }).sum()
    }

    pub fn check_against(&self, bounds: &UnitBounds) -> Result<(), String> {
        if self.n_intervals == 0 {
            return Err("interval count must be at least 1".into());
        }
        if self.units.len() != bounds.len() {
            return Err(format!("{} unit potentials for {} units", self.units.len(), bounds.len()));
        }
        for (u, p) in self.units.iter().enumerate() {
            if p.v_on.len() != self.n_intervals {
                return Err(format!(
                    "unit {u} has {} interval potentials, expected {}",
                    p.v_on.len(),
                    self.n_intervals
                ));
            }
            if !p.v_off.is_finite() || p.v_on.iter().any(|v| !v.is_finite()) {
                return Err(format!("unit {u} has a non-finite potential"));
            }
        }
        Ok(())
    }
}

/// `1/√M` with `M` the largest per-unit big-M; 1 when there is no live unit.
pub fn default_lambda(bounds: &UnitBounds) -> f64 {
    let m = bounds.global_big_m();
    if m > 0.0 {
        1.0 / libm::sqrt(m)
    } else {
        1.0
    }
}

/// Box `[-V, V]` for master variables, large enough that every pattern constraint
/// can be met: `V = (|U| + 1) · max(1, M) · (max |R| + 1)`.
pub fn master_bound(instance: &PlanningInstance, bounds: &UnitBounds) -> f64 {
    let r = instance.reward.range(&instance.state_box(), &instance.action_box()).max_abs();
    (bounds.len() as f64 + 1.0) * bounds.global_big_m().max(1.0) * (r + 1.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cut {
    pub pattern: Pattern,
    pub r_star: f64,
}

/// Regularized master over a growing set of pattern cuts.
#[derive(Debug, Clone)]
pub struct MasterProblem {
    pub n_intervals: usize,
    pub lambda: f64,
    pub v_max: f64,
    alive: Vec<bool>,
    pub cuts: Vec<Cut>,
}

impl MasterProblem {
    pub fn new(bounds: &UnitBounds, n_intervals: usize, lambda: f64, v_max: f64) -> Self {
        MasterProblem {
            n_intervals,
            lambda,
            v_max,
            alive: bounds.units.iter().map(|u| !u.is_dead()).collect(),
            cuts: Vec::new(),
        }
    }

    pub fn add_cut(&mut self, cut: Cut) {
        self.cuts.push(cut);
    }

    /// Returns the potentials and the master objective. Dead units keep `v_on = 0`.
    pub fn solve(&self) -> Result<(RewardPotentials, f64), PotentialError> {
        let n = self.n_intervals;
        let v = self.v_max;
        let mut m = Model::new(ObjSense::Minimize);
        let mut off = Vec::with_capacity(self.alive.len());
        let mut on: Vec<Vec<VarId>> = Vec::with_capacity(self.alive.len());
        let mut obj = LinExpr::new();
        for (u, &alive) in self.alive.iter().enumerate() {
            let x = m.add_continuous(format!("voff_u{u}"), -v, v);
            obj.add_term(x, 1.0);
            off.push(x);
            let ids: Vec<VarId> = if alive {
                (1..=n).map(|i| m.add_continuous(format!("von_{i}_u{u}"), -v, v)).collect()
            } else {
                Vec::new()
            };
            for &x in &ids {
                obj.add_term(x, 1.0);
            }
            on.push(ids);
        }
        for (k, cut) in self.cuts.iter().enumerate() {
            if self.alive.is_empty() {
                if cut.r_star > FEAS_TOL {
                    return Err(PotentialError::Degenerate(format!(
                        "no hidden units can carry a reward of {}",
                        cut.r_star
                    )));
                }
                continue;
            }
            let terms: Vec<(VarId, f64)> = cut
                .pattern
                .iter()
                .enumerate()
                .map(|(u, &p)| (if p == 0 { off[u] } else { on[u][p - 1] }, 1.0))
                .collect();
            m.add_constraint(format!("K{k}"), terms, Sense::Ge, cut.r_star);
        }
        m.set_objective(ObjSense::Minimize, &obj);
        if self.lambda > 0.0 {
            for j in 0..m.n_vars() {
                m.add_quadratic(VarId(j), self.lambda);
            }
        }
        let x = if m.n_vars() == 0 {
            Vec::new()
        } else if self.lambda > 0.0 {
            milp::solve_qp(&m)?.x
        } else {
            let sol = milp::solve_lp(&m)?;
            match sol.status {
                LpStatus::Optimal => sol.x,
                LpStatus::Infeasible => return Err(SolveError::QpInfeasible.into()),
                LpStatus::Unbounded => return Err(PotentialError::Unbounded),
            }
        };
        let objective = m.objective_value(&x);
        let units = (0..self.alive.len())
            .map(|u| UnitPotential {
                v_off: x[off[u].0],
                v_on: if on[u].is_empty() { vec![0.0; n] } else { on[u].iter().map(|v| x[v.0]).collect() },
            })
            .collect();
        let pot = RewardPotentials {
            n_intervals: n,
            lambda: self.lambda,
            epsilon: DEFAULT_EPSILON,
            certified_violation: f64::INFINITY,
            units,
        };
        Ok((pot, objective))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubproblemResult {
    pub pattern: Pattern,
    /// Best step reward under `pattern`.
    pub r_star: f64,
    /// `r_star` minus the pattern's potentials; the subproblem optimum.
    pub violation: f64,
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    pub next_state: Vec<f64>,
    pub nodes: u64,
}

struct OneStep {
    model: Model,
    y: Vec<VarId>,
    x: Vec<VarId>,
    next: Vec<VarId>,
    pb: Vec<VarId>,
    pi: Vec<Vec<VarId>>,
    reward: LinExpr,
}

fn one_step(
    instance: &PlanningInstance,
    net: &NeuralNet,
    bounds: &UnitBounds,
    n_intervals: usize,
) -> Result<OneStep, PotentialError> {
    let mut enc = Encoder::new(instance, net, bounds)?;
    let y = enc.states(1);
    let step = enc.step(1, &y, n_intervals);
    Ok(OneStep { model: enc.model, y, x: step.actions, next: step.next, pb: step.pb, pi: step.pi, reward: step.reward })
}

pub fn solve_subproblem(
    net: &NeuralNet,
    instance: &PlanningInstance,
    bounds: &UnitBounds,
    candidate: &RewardPotentials,
) -> Result<SubproblemResult, PotentialError> {
    solve_subproblem_with_clock(net, instance, bounds, candidate, &NoClock)
}

pub fn solve_subproblem_with_clock(
    net: &NeuralNet,
    instance: &PlanningInstance,
    bounds: &UnitBounds,
    candidate: &RewardPotentials,
    clock: &dyn Clock,
) -> Result<SubproblemResult, PotentialError> {
    candidate.check_against(bounds).map_err(CompileError::PotentialMismatch)?;
    let mut step = one_step(instance, net, bounds, candidate.n_intervals)?;
    // R - Σ v_on Pi - Σ v_off (1 - Pb)
    let mut obj = step.reward.clone();
    for (u, unit) in candidate.units.iter().enumerate() {
        for (k, &b) in step.pi[u].iter().enumerate() {
            obj.add_term(b, -unit.v_on[k]);
        }
        obj.add_term(step.pb[u], unit.v_off);
        obj.add_constant(-unit.v_off);
    }
    step.model.set_objective(ObjSense::Maximize, &obj);
    let params = MilpParams { gap_tol: 1e-10, int_tol: 1e-9, ..MilpParams::default() };
    let res = solve_milp_with_clock(&step.model, &params, clock)?;
    match res.stats.status {
        SolveStatus::Optimal => {}
        SolveStatus::Infeasible => return Err(PotentialError::Infeasible),
        SolveStatus::Unbounded => return Err(PotentialError::Unbounded),
        SolveStatus::Limit => return Err(SolveError::NumericBreakdown("subproblem stopped at a limit".into()).into()),
    }
    let x = res.x.expect("optimal solution");
    let pattern: Pattern =
        (0..candidate.units.len())
            .map(|u| {
                if x[step.pb[u].0] < 0.5 {
                    0
                } else {
                    step.pi[u].iter().position(|b| x[b.0] > 0.5).map_or(1, |i| i + 1)
                }
            })
            .collect();
    let violation = res.stats.primal.expect("optimal objective");
    let r_star = violation + candidate.total(&pattern);
    let read = |ids: &[VarId]| ids.iter().map(|v| x[v.0]).collect::<Vec<f64>>();
    Ok(SubproblemResult {
        pattern,
        r_star,
        violation,
        state: read(&step.y),
        action: read(&step.x),
        next_state: read(&step.next),
        nodes: res.stats.nodes_closed,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CgIteration {
    pub k: usize,
    pub pattern: Pattern,
    pub r_star: f64,
    pub violation: f64,
    /// Objective of the master whose potentials this iteration checked.
    pub master_objective: f64,
    pub elapsed: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CgTrace {
    pub iterations: Vec<CgIteration>,
}

impl CgTrace {
    /// Iterations whose pattern entered the master.
    pub fn generated(&self, epsilon: f64) -> usize {
        self.iterations.iter().filter(|it| it.violation > epsilon).count()
    }

    /// CSV with header `k,violation,master_obj,elapsed`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("k,violation,master_obj,elapsed\n");
        for it in &self.iterations {
            s.push_str(&format!("{},{},{},{}\n", it.k, it.violation, it.master_objective, it.elapsed));
        }
        s
    }
}

/// Solves the master over the cuts recorded in a trace (iterations with violation
/// above `epsilon`).
pub fn solve_master(
    trace: &CgTrace,
    bounds: &UnitBounds,
    n_intervals: usize,
    lambda: f64,
    epsilon: f64,
    v_max: f64,
) -> Result<RewardPotentials, PotentialError> {
    let mut master = MasterProblem::new(bounds, n_intervals, lambda, v_max);
    for it in trace.iterations.iter().filter(|it| it.violation > epsilon) {
        master.add_cut(Cut { pattern: it.pattern.clone(), r_star: it.r_star });
    }
    Ok(master.solve()?.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgParams {
    pub n_intervals: usize,
    /// `None` selects [`default_lambda`].
    pub lambda: Option<f64>,
    pub epsilon: f64,
    /// Cap on generated patterns; `None` uses `min((N+1)^|U|, 10^6)`.
    pub max_generated: Option<usize>,
}

impl Default for CgParams {
    fn default() -> Self {
        CgParams { n_intervals: 1, lambda: None, epsilon: DEFAULT_EPSILON, max_generated: None }
    }
}

fn pattern_space(n_units: usize, n_intervals: usize) -> f64 {
    libm::pow(n_intervals as f64 + 1.0, n_units as f64)
}

pub fn compute_potentials(
    net: &NeuralNet,
    instance: &PlanningInstance,
    bounds: &UnitBounds,
    params: &CgParams,
) -> Result<(RewardPotentials, CgTrace), PotentialError> {
    compute_potentials_with_clock(net, instance, bounds, params, &NoClock)
}

pub fn compute_potentials_with_clock(
    net: &NeuralNet,
    instance: &PlanningInstance,
    bounds: &UnitBounds,
    params: &CgParams,
    clock: &dyn Clock,
) -> Result<(RewardPotentials, CgTrace), PotentialError> {
    if params.n_intervals == 0 {
        return Err(PotentialError::InvalidParams("interval count must be at least 1".into()));
    }
    if !(params.epsilon > 0.0) {
        return Err(PotentialError::InvalidParams("epsilon must be positive".into()));
    }
    let lambda = params.lambda.unwrap_or_else(|| default_lambda(bounds));
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(PotentialError::InvalidParams("lambda must be finite and nonnegative".into()));
    }
    let start = clock.elapsed_secs();
    let cap = params
        .max_generated
        .unwrap_or_else(|| pattern_space(bounds.len(), params.n_intervals).min(ITERATION_CAP) as usize);
    let mut master = MasterProblem::new(bounds, params.n_intervals, lambda, master_bound(instance, bounds));
    let mut trace = CgTrace::default();
    let (mut candidate, mut master_obj) = master.solve()?;
    loop {
        let sub = solve_subproblem_with_clock(net, instance, bounds, &candidate, clock)?;
        trace.iterations.push(CgIteration {
            k: trace.iterations.len() + 1,
            pattern: sub.pattern.clone(),
            r_star: sub.r_star,
            violation: sub.violation,
            master_objective: master_obj,
            elapsed: clock.elapsed_secs() - start,
        });
        if sub.violation <= params.epsilon {
            candidate.epsilon = params.epsilon;
            candidate.certified_violation = sub.violation;
            return Ok((candidate, trace));
        }
        if master.cuts.iter().any(|c| c.pattern == sub.pattern) || master.cuts.len() >= cap {
            return Err(PotentialError::Nontermination { generated: master.cuts.len() });
        }
        master.add_cut(Cut { pattern: sub.pattern, r_star: sub.r_star });
        (candidate, master_obj) = master.solve()?;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub potentials: RewardPotentials,
    pub master_objective: f64,
    /// Feasible patterns with their best step reward.
    pub cuts: Vec<Cut>,
    pub lp_solves: usize,
}

/// Enumerates every activation/interval pattern (pruning infeasible prefixes), solves
/// the step LP per feasible pattern, and solves one master over all of them.
pub fn oracle_enumerate(
    net: &NeuralNet,
    instance: &PlanningInstance,
    bounds: &UnitBounds,
    n_intervals: usize,
    lambda: f64,
) -> Result<OracleResult, PotentialError> {
    if n_intervals == 0 {
        return Err(PotentialError::InvalidParams("interval count must be at least 1".into()));
    }
    let space = pattern_space(bounds.len(), n_intervals);
    if space > ORACLE_LIMIT {
        return Err(PotentialError::ScaleGuard { patterns: space });
    }
    let mut step = one_step(instance, net, bounds, n_intervals)?;
    let reward = step.reward.clone();
    step.model.set_objective(ObjSense::Maximize, &reward);
    let mut model = step.model.relaxed();
    let alive: Vec<usize> = (0..bounds.len()).filter(|&u| !bounds.units[u].is_dead()).collect();
    let mut pattern = vec![0usize; bounds.len()];
    let mut cuts = Vec::new();
    let mut lp_solves = 0usize;
    enumerate(&mut model, &step.pb, &step.pi, &alive, 0, n_intervals, &mut pattern, &mut cuts, &mut lp_solves)?;
    if cuts.is_empty() {
        return Err(PotentialError::Infeasible);
    }
    let mut master = MasterProblem::new(bounds, n_intervals, lambda, master_bound(instance, bounds));
    for c in &cuts {
        master.add_cut(c.clone());
    }
    let (mut potentials, master_objective) = master.solve()?;
    potentials.certified_violation =
        cuts.iter().map(|c| c.r_star - potentials.total(&c.pattern)).fold(f64::NEG_INFINITY, f64::max);
    Ok(OracleResult { potentials, master_objective, cuts, lp_solves })
}

fn fix_unit(model: &mut Model, pb: VarId, pi: &[VarId], choice: Option<usize>) {
    let set = |m: &mut Model, v: VarId, lo: f64, hi: f64| {
        m.vars[v.0].lo = lo;
        m.vars[v.0].hi = hi;
    };
    match choice {
        None => {
            set(model, pb, 0.0, 1.0);
            for &b in pi {
                set(model, b, 0.0, 1.0);
            }
        }
        Some(0) => {
            set(model, pb, 0.0, 0.0);
            for &b in pi {
                set(model, b, 0.0, 0.0);
            }
        }
        Some(i) => {
            set(model, pb, 1.0, 1.0);
            for (k, &b) in pi.iter().enumerate() {
                let v = if k + 1 == i { 1.0 } else { 0.0 };
                set(model, b, v, v);
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn enumerate(
    model: &mut Model,
    pb: &[VarId],
    pi: &[Vec<VarId>],
    alive: &[usize],
    depth: usize,
    n: usize,
    pattern: &mut Pattern,
    cuts: &mut Vec<Cut>,
    lp_solves: &mut usize,
) -> Result<(), PotentialError> {
    if depth == alive.len() {
        *lp_solves += 1;
        let sol = milp::solve_lp(model)?;
        match sol.status {
            LpStatus::Optimal => cuts.push(Cut { pattern: pattern.clone(), r_star: sol.objective }),
            LpStatus::Infeasible => {}
            LpStatus::Unbounded => return Err(PotentialError::Unbounded),
        }
        return Ok(());
    }
    let u = alive[depth];
    for choice in 0..=n {
        fix_unit(model, pb[u], &pi[u], Some(choice));
        pattern[u] = choice;
        let feasible = if depth + 1 < alive.len() {
            *lp_solves += 1;
            milp::solve_lp(model)?.status != LpStatus::Infeasible
        } else {
            true
        };
        if feasible {
            enumerate(model, pb, pi, alive, depth + 1, n, pattern, cuts, lp_solves)?;
        }
    }
    fix_unit(model, pb[u], &pi[u], None);
    pattern[u] = 0;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleCheck {
    pub samples: usize,
    /// Draws discarded because they broke a constraint or left the state domain.
    pub rejected: usize,
    pub violations: usize,
    /// Largest `R - Σ potentials` seen.
    pub worst: f64,
}

/// Checks the upper-bound property on uniformly drawn one-step transitions whose action
/// satisfies the instance constraints and whose next state stays in the state domain.
pub fn sample_upper_bound(
    net: &NeuralNet,
    instance: &PlanningInstance,
    bounds: &UnitBounds,
    potentials: &RewardPotentials,
    samples: usize,
    seed: u64,
    tol: f64,
) -> Result<SampleCheck, PotentialError> {
    potentials.check_against(bounds).map_err(CompileError::PotentialMismatch)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (sb, ab) = (instance.state_box(), instance.action_box());
    let mut check = SampleCheck { samples: 0, rejected: 0, violations: 0, worst: f64::NEG_INFINITY };
    let n = potentials.n_intervals;
    let max_draws = samples.saturating_mul(100).max(1000);
    while check.samples < samples && check.samples + check.rejected < max_draws {
        let s: Vec<f64> = sb.iter().map(|iv| rng.random_range(iv.lo..=iv.hi)).collect();
        let a: Vec<f64> = ab.iter().map(|iv| rng.random_range(iv.lo..=iv.hi)).collect();
        if instance.constraints.iter().any(|c| c.violation(&s, &a) > 0.0) {
            check.rejected += 1;
            continue;
        }
        let (next, record) = net.step(&s, &a).map_err(CompileError::from)?;
        if next.iter().zip(&sb).any(|(y, iv)| !iv.contains(*y, 0.0)) {
            check.rejected += 1;
            continue;
        }
        let pattern: Pattern = (0..bounds.len()).map(|u| interval_of(&record, bounds, n, u)).collect();
        let excess = instance.reward.evaluate(&next, &a) - potentials.total(&pattern);
        check.samples += 1;
        check.worst = check.worst.max(excess);
        if excess > tol {
            check.violations += 1;
        }
    }
    Ok(check)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compiler::instance_bounds;
    use crate::nn::{Activation, Layer};
    use crate::problem::{simple_instance, LinearForm, RewardSpec, VarDecl};

    /// `s' = relu(s)`, `s ∈ [0, 1]`, reward `sign · s'`.
    fn relu_toy(sign: f64) -> (PlanningInstance, NeuralNet, UnitBounds) {
        let net = NeuralNet::new(
            vec![
                Layer::new(vec![vec![1.0]], vec![0.0], Activation::Relu),
                Layer::new(vec![vec![1.0]], vec![0.0], Activation::Linear),
            ],
            vec![0],
            vec![],
            vec![0],
        )
        .unwrap();
        let reward = RewardSpec { linear: LinearForm::new(vec![sign], vec![]), ..Default::default() };
        let inst = simple_instance(vec![VarDecl::new("s", 0.0, 1.0)], vec![], vec![0.0], reward, 1);
        let bounds = instance_bounds(&inst, &net).unwrap();
        (inst, net, bounds)
    }

    fn with(v_off: f64, v_on: f64) -> RewardPotentials {
        RewardPotentials {
            n_intervals: 1,
            lambda: 0.0,
            epsilon: DEFAULT_EPSILON,
            certified_violation: 0.0,
            units: vec![UnitPotential { v_off, v_on: vec![v_on] }],
        }
    }

    #[test]
    fn subproblem_examples() {
        let (inst, net, b) = relu_toy(1.0);
        let s = solve_subproblem(&net, &inst, &b, &with(0.0, 0.0)).unwrap();
        assert_eq!(s.pattern, vec![1]);
        assert!((s.r_star - 1.0).abs() < 1e-9 && (s.violation - 1.0).abs() < 1e-9);
        let s = solve_subproblem(&net, &inst, &b, &with(0.0, 1.0)).unwrap();
        assert!(s.violation.abs() < 1e-9);
        let (inst, net, b) = relu_toy(-1.0);
        let s = solve_subproblem(&net, &inst, &b, &with(0.0, 0.0)).unwrap();
        assert!(s.r_star.abs() < 1e-9 && s.violation.abs() < 1e-9);
    }

    #[test]
    fn master_examples() {
        let (_, _, b) = relu_toy(1.0);
        let mut m = MasterProblem::new(&b, 1, 0.1, 100.0);
        m.add_cut(Cut { pattern: vec![1], r_star: 1.0 });
        m.add_cut(Cut { pattern: vec![0], r_star: 0.0 });
        let (p, _) = m.solve().unwrap();
        assert!((p.units[0].v_on[0] - 1.0).abs() < 1e-9 && p.units[0].v_off.abs() < 1e-9);

        let mut m = MasterProblem::new(&b, 1, 0.0, 100.0);
        m.add_cut(Cut { pattern: vec![0], r_star: -2.0 });
        let (p, _) = m.solve().unwrap();
        assert_eq!(p.units[0].v_off, -2.0);
        assert_eq!(p.units[0].v_on[0], -100.0);

        let empty = UnitBounds { units: vec![], outputs: vec![] };
        let mut m = MasterProblem::new(&empty, 1, 0.1, 1.0);
        m.add_cut(Cut { pattern: vec![], r_star: 7.0 });
        assert!(matches!(m.solve(), Err(PotentialError::Degenerate(_))));
    }

    #[test]
    fn relu_toy_cg_trace() {
        let (inst, net, b) = relu_toy(1.0);
        let params = CgParams { lambda: Some(0.01), ..Default::default() };
        let (p, trace) = compute_potentials(&net, &inst, &b, &params).unwrap();
        assert!((p.units[0].v_on[0] - 1.0).abs() < 1e-7);
        assert!(p.units[0].v_off.abs() < 1e-7);
        assert!(trace.iterations.len() <= 3);
        assert!(p.certified_violation <= 1e-6);
        assert_eq!(p.certified_violation, trace.iterations.last().unwrap().violation);
        let oracle = oracle_enumerate(&net, &inst, &b, 1, 0.01).unwrap();
        assert!((oracle.potentials.units[0].v_on[0] - 1.0).abs() < 1e-9);
        assert_eq!(oracle.cuts.len(), 2);
    }

    #[test]
    fn constant_reward_is_covered() {
        let (mut inst, net, b) = relu_toy(0.0);
        inst.reward = RewardSpec::constant(3.0);
        let (p, _) =
            compute_potentials(&net, &inst, &b, &CgParams { lambda: Some(0.5), ..Default::default() }).unwrap();
        assert!(p.total(&[0]) >= 3.0 - 1e-6 && p.total(&[1]) >= 3.0 - 1e-6);
    }

    #[test]
    fn dead_unit_only_off() {
        let net = NeuralNet::new(
            vec![
                Layer::new(vec![vec![0.0], vec![1.0]], vec![-5.0, 0.0], Activation::Relu),
                Layer::new(vec![vec![1.0, 1.0]], vec![0.0], Activation::Linear),
            ],
            vec![0],
            vec![],
            vec![0],
        )
        .unwrap();
        let reward = RewardSpec { linear: LinearForm::new(vec![1.0], vec![]), ..Default::default() };
        let inst = simple_instance(vec![VarDecl::new("s", 0.0, 1.0)], vec![], vec![0.0], reward, 1);
        let b = instance_bounds(&inst, &net).unwrap();
        let o = oracle_enumerate(&net, &inst, &b, 2, 0.5).unwrap();
        assert!(o.cuts.iter().all(|c| c.pattern[0] == 0));
        assert_eq!(o.potentials.units[0].v_on, vec![0.0, 0.0]);
    }

    #[test]
    fn infeasible_joint_pattern_skipped() {
        // u0 = relu(s - 0.5), u1 = relu(-s - 0.5): both on is impossible.
        let net = NeuralNet::new(
            vec![
                Layer::new(vec![vec![1.0], vec![-1.0]], vec![-0.5, -0.5], Activation::Relu),
                Layer::new(vec![vec![0.5, 0.5]], vec![0.0], Activation::Linear),
            ],
            vec![0],
            vec![],
            vec![0],
        )
        .unwrap();
        let reward = RewardSpec { linear: LinearForm::new(vec![1.0], vec![]), ..Default::default() };
        let inst = simple_instance(vec![VarDecl::new("s", -1.0, 1.0)], vec![], vec![0.0], reward, 1);
        let b = instance_bounds(&inst, &net).unwrap();
        let o = oracle_enumerate(&net, &inst, &b, 1, 0.5).unwrap();
        assert_eq!(o.cuts.len(), 3);
    }

    #[test]
    fn oracle_scale_guard() {
        let b = UnitBounds {
            units: vec![crate::nn::UnitBound::from_pre(crate::Interval::new(-1.0, 1.0)); 17],
            outputs: vec![],
        };
        let (inst, net, _) = relu_toy(1.0);
        assert!(matches!(oracle_enumerate(&net, &inst, &b, 1, 0.1), Err(PotentialError::ScaleGuard { .. })));
    }
}
