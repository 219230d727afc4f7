//! Factored planning instances over continuous state and action variables.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use crate::interval::Interval;
use crate::milp::Sense;
use crate::nn::{ActivationRecord, NetError, NeuralNet};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProblemError {
    #[error("invalid instance: {0}")]
    Invalid(String),
    #[error("{what} has length {found}, expected {expected}")]
    Length { what: &'static str, expected: usize, found: usize },
    #[error("initial state is not fully fixed and the plan carries no states")]
    MissingInitial,
    #[error(transparent)]
    Net(#[from] NetError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarDecl {
    pub name: String,
    pub domain: Interval,
}

impl VarDecl {
    pub fn new(name: impl Into<String>, lo: f64, hi: f64) -> Self {
        VarDecl { name: name.into(), domain: Interval::new(lo, hi) }
    }
}

/// Linear form over one state vector and one action vector. Missing trailing
/// coefficients are zero.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LinearForm {
    pub state: Vec<f64>,
    pub action: Vec<f64>,
}

impl LinearForm {
    pub fn new(state: Vec<f64>, action: Vec<f64>) -> Self {
        LinearForm { state, action }
    }

    pub fn eval(&self, state: &[f64], action: &[f64]) -> f64 {
        let s: f64 = self.state.iter().zip(state).map(|(c, x)| c * x).sum();
        let a: f64 = self.action.iter().zip(action).map(|(c, x)| c * x).sum();
        s + a
    }

    /// Range of the form over a box.
    pub fn range(&self, state_box: &[Interval], action_box: &[Interval]) -> Interval {
        let init = Interval::point(0.0);
        let s = self.state.iter().zip(state_box).fold(init, |acc, (&c, b)| acc + b.scale(c));
        self.action.iter().zip(action_box).fold(s, |acc, (&c, b)| acc + b.scale(c))
    }

    fn fits(&self, n_states: usize, n_actions: usize) -> bool {
        self.state.len() <= n_states
            && self.action.len() <= n_actions
            && self.state.iter().chain(&self.action).all(|c| c.is_finite())
    }
}

/// Global constraint `form(s_t, a_t) sense rhs`, imposed at every step.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearConstraint {
    pub form: LinearForm,
    pub sense: Sense,
    pub rhs: f64,
}

impl LinearConstraint {
    /// Amount by which the constraint is violated, zero when satisfied.
    pub fn violation(&self, state: &[f64], action: &[f64]) -> f64 {
        let lhs = self.form.eval(state, action);
        match self.sense {
            Sense::Le => (lhs - self.rhs).max(0.0),
            Sense::Ge => (self.rhs - lhs).max(0.0),
            Sense::Eq => (lhs - self.rhs).abs(),
        }
    }
}

/// Concave term `-weight * |form(s', a) - target|`.
#[derive(Debug, Clone, PartialEq)]
pub struct AbsTerm {
    pub weight: f64,
    pub form: LinearForm,
    pub target: f64,
}

/// Piecewise-linear concave reward over the next state and the action.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RewardSpec {
    pub constant: f64,
    pub linear: LinearForm,
    pub abs_terms: Vec<AbsTerm>,
}

impl RewardSpec {
    pub fn constant(c: f64) -> Self {
        RewardSpec { constant: c, ..Default::default() }
    }

    pub fn evaluate(&self, next_state: &[f64], action: &[f64]) -> f64 {
        let penalty: f64 =
            self.abs_terms.iter().map(|t| t.weight * (t.form.eval(next_state, action) - t.target).abs()).sum();
        self.constant + self.linear.eval(next_state, action) - penalty
    }

    /// Interval enclosure of the reward over a box.
    pub fn range(&self, state_box: &[Interval], action_box: &[Interval]) -> Interval {
        let base = self.linear.range(state_box, action_box) + self.constant;
        self.abs_terms.iter().fold(base, |acc, t| {
            let dev = t.form.range(state_box, action_box).abs_dev(t.target);
            acc + dev.scale(-t.weight)
        })
    }

    fn validate(&self, n_states: usize, n_actions: usize) -> Result<(), ProblemError> {
        if !self.constant.is_finite() || !self.linear.fits(n_states, n_actions) {
            return Err(ProblemError::Invalid("reward references undeclared variables".into()));
        }
        for (k, t) in self.abs_terms.iter().enumerate() {
            if !(t.weight >= 0.0) || !t.weight.is_finite() || !t.target.is_finite() {
                return Err(ProblemError::Invalid(alloc::format!(
                    "reward term {k}: weight must be finite and nonnegative"
                )));
            }
            if !t.form.fits(n_states, n_actions) {
                return Err(ProblemError::Invalid(alloc::format!("reward term {k} references undeclared variables")));
            }
        }
        Ok(())
    }
}

/// Action values per step, optionally with the visited states.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Plan {
    pub actions: Vec<Vec<f64>>,
    pub states: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanningInstance {
    pub state_vars: Vec<VarDecl>,
    pub action_vars: Vec<VarDecl>,
    /// Initial constraint per state variable; a point interval fixes the value.
    pub initial: Vec<Interval>,
    pub goal: Vec<Interval>,
    pub constraints: Vec<LinearConstraint>,
    pub reward: RewardSpec,
    pub horizon: usize,
}

impl PlanningInstance {
    pub fn n_states(&self) -> usize {
        self.state_vars.len()
    }

    pub fn n_actions(&self) -> usize {
        self.action_vars.len()
    }

    pub fn state_box(&self) -> Vec<Interval> {
        self.state_vars.iter().map(|v| v.domain).collect()
    }

    pub fn action_box(&self) -> Vec<Interval> {
        self.action_vars.iter().map(|v| v.domain).collect()
    }

    /// The initial state when every initial constraint is a point.
    pub fn fixed_initial(&self) -> Option<Vec<f64>> {
        self.initial.iter().map(|iv| (iv.lo == iv.hi).then_some(iv.lo)).collect()
    }

    pub fn validate(&self) -> Result<(), ProblemError> {
        let (ns, na) = (self.n_states(), self.n_actions());
        for v in self.state_vars.iter().chain(&self.action_vars) {
            if !v.domain.is_finite() || v.domain.is_empty() {
                return Err(ProblemError::Invalid(alloc::format!(
                    "variable {} needs a finite domain with lo <= hi",
                    v.name
                )));
            }
        }
        if self.initial.len() != ns {
            return Err(ProblemError::Length { what: "initial", expected: ns, found: self.initial.len() });
        }
        if self.goal.len() != ns {
            return Err(ProblemError::Length { what: "goal", expected: ns, found: self.goal.len() });
        }
        for (s, v) in self.state_vars.iter().enumerate() {
            if self.initial[s].is_empty() || !self.initial[s].subset_of(&v.domain) {
                return Err(ProblemError::Invalid(alloc::format!(
                    "initial value of {} lies outside its domain",
                    v.name
                )));
            }
            if self.goal[s].intersect(v.domain).is_empty() {
                return Err(ProblemError::Invalid(alloc::format!("goal of {} does not meet its domain", v.name)));
            }
        }
        for (k, c) in self.constraints.iter().enumerate() {
            if !c.form.fits(ns, na) || !c.rhs.is_finite() {
                return Err(ProblemError::Invalid(alloc::format!("constraint {k} references undeclared variables")));
            }
        }
        self.reward.validate(ns, na)?;
        if self.horizon == 0 {
            return Err(ProblemError::Invalid("horizon must be positive".into()));
        }
        Ok(())
    }

    /// Checks that the instance and the network describe the same variables.
    pub fn validate_with(&self, net: &NeuralNet) -> Result<(), ProblemError> {
        self.validate()?;
        if net.n_states() != self.n_states() || net.n_actions() != self.n_actions() {
            return Err(ProblemError::Invalid(alloc::format!(
                "network has {} states and {} actions, instance has {} and {}",
                net.n_states(),
                net.n_actions(),
                self.n_states(),
                self.n_actions()
            )));
        }
        Ok(())
    }

    pub fn evaluate_reward(&self, next_state: &[f64], action: &[f64]) -> Result<f64, ProblemError> {
        if next_state.len() != self.n_states() {
            return Err(ProblemError::Length { what: "state", expected: self.n_states(), found: next_state.len() });
        }
        if action.len() != self.n_actions() {
            return Err(ProblemError::Length { what: "action", expected: self.n_actions(), found: action.len() });
        }
        Ok(self.reward.evaluate(next_state, action))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// `horizon + 1` states, the first one being the initial state.
    pub states: Vec<Vec<f64>>,
    pub rewards: Vec<f64>,
    pub patterns: Vec<ActivationRecord>,
    pub total_reward: f64,
}

/// Rolls the plan through the network from the initial state.
///
/// The initial state is the instance's fixed initial state, or the plan's first
/// state when the instance only gives an interval.
pub fn simulate(instance: &PlanningInstance, net: &NeuralNet, plan: &Plan) -> Result<Trajectory, ProblemError> {
    if plan.actions.len() != instance.horizon {
        return Err(ProblemError::Length { what: "plan", expected: instance.horizon, found: plan.actions.len() });
    }
    let start = match instance.fixed_initial() {
        Some(s) => s,
        None => plan.states.as_ref().and_then(|st| st.first().cloned()).ok_or(ProblemError::MissingInitial)?,
    };
    let mut states = Vec::with_capacity(instance.horizon + 1);
    let mut rewards = Vec::with_capacity(instance.horizon);
    let mut patterns = Vec::with_capacity(instance.horizon);
    states.push(start);
    for action in &plan.actions {
        let (next, pattern) = net.step(states.last().expect("non-empty"), action)?;
        rewards.push(instance.evaluate_reward(&next, action)?);
        patterns.push(pattern);
        states.push(next);
    }
    let total_reward = rewards.iter().sum();
    Ok(Trajectory { states, rewards, patterns, total_reward })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    /// Plan shape or simulation failure; magnitude is infinite.
    Shape,
    ActionDomain,
    StateDomain,
    Initial,
    Constraint,
    Goal,
    /// Plan-supplied states disagree with the network.
    Dynamics,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub kind: ViolationKind,
    /// 1-based time step.
    pub step: usize,
    /// Variable or constraint index.
    pub index: usize,
    pub magnitude: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanReport {
    pub violations: Vec<Violation>,
    pub trajectory: Option<Trajectory>,
}

impl PlanReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn max_violation(&self) -> f64 {
        self.violations.iter().map(|v| v.magnitude).fold(0.0, f64::max)
    }
}

pub const DEFAULT_PLAN_TOL: f64 = 1e-6;

/// Lists every violation larger than `tol`. Dynamics come from the network.
pub fn check_plan(instance: &PlanningInstance, net: &NeuralNet, plan: &Plan, tol: f64) -> PlanReport {
    let mut violations = Vec::new();
    let mut push = |kind, step, index, magnitude: f64| {
        if !(magnitude <= tol) {
            violations.push(Violation { kind, step, index, magnitude });
        }
    };
    let traj = match simulate(instance, net, plan) {
        Ok(t) => t,
        Err(_) => {
            push(ViolationKind::Shape, 0, 0, f64::INFINITY);
            return PlanReport { violations, trajectory: None };
        }
    };
    for (t, action) in plan.actions.iter().enumerate() {
        for (a, v) in instance.action_vars.iter().enumerate() {
            push(ViolationKind::ActionDomain, t + 1, a, v.domain.distance(action[a]));
        }
        for (k, c) in instance.constraints.iter().enumerate() {
            push(ViolationKind::Constraint, t + 1, k, c.violation(&traj.states[t], action));
        }
    }
    for (t, state) in traj.states.iter().enumerate() {
        for (s, v) in instance.state_vars.iter().enumerate() {
            push(ViolationKind::StateDomain, t + 1, s, v.domain.distance(state[s]));
        }
    }
    for (s, iv) in instance.initial.iter().enumerate() {
        push(ViolationKind::Initial, 1, s, iv.distance(traj.states[0][s]));
    }
    let last = traj.states.last().expect("non-empty");
    for (s, iv) in instance.goal.iter().enumerate() {
        push(ViolationKind::Goal, instance.horizon + 1, s, iv.distance(last[s]));
    }
    if let Some(states) = &plan.states {
        if states.len() != traj.states.len() {
            push(ViolationKind::Shape, 0, 0, f64::INFINITY);
        } else {
            for (t, (given, sim)) in states.iter().zip(&traj.states).enumerate() {
                if given.len() != sim.len() {
                    push(ViolationKind::Shape, t + 1, 0, f64::INFINITY);
                    continue;
                }
                for (s, (g, x)) in given.iter().zip(sim).enumerate() {
                    push(ViolationKind::Dynamics, t + 1, s, (g - x).abs());
                }
            }
        }
    }
    PlanReport { violations, trajectory: Some(traj) }
}

/// Convenience builder for an instance with trivial goals and no constraints.
pub fn simple_instance(
    state_vars: Vec<VarDecl>,
    action_vars: Vec<VarDecl>,
    initial: Vec<f64>,
    reward: RewardSpec,
    horizon: usize,
) -> PlanningInstance {
    let goal = state_vars.iter().map(|v| v.domain).collect();
    PlanningInstance {
        initial: initial.into_iter().map(Interval::point).collect(),
        goal,
        state_vars,
        action_vars,
        constraints: vec![],
        reward,
        horizon,
    }
}
