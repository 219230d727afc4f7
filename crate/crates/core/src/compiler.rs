//! Big-M compilation of a planning instance with a ReLU transition network.
//!
//! Per step `t = 1..H` every hidden unit `u` gets an output `P_u{j}_t{t} ∈ [0, N_u]` and
//! a binary `Pb_u{j}_t{t}` with
//!
//! ```text
//! P <= M_u Pb,   P <= M_u (1 - Pb) + In,   P >= In
//! ```
//!
//! where `In` is the unit's affine input. States at `t + 1` equal the output layer.
//! Absolute-value reward terms use `Z_r{k}_t{t} >= ±(form - target)`.
//!
//! The strengthened model adds interval bits `Pi_{i}_u{j}_t{t}` (`i = 1..N`), one per
//! slice of `[0, N_u]`, with `Σ_i Pi = Pb`, `N_u (i-1)/N Pi <= P <= N_u - (N_u - N_u i/N) Pi`,
//! and the per-step cap `Σ v_on Pi + Σ v_off (1 - Pb) >= R_t`.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use thiserror::Error;

use crate::milp::{self, LinExpr, LpStatus, Model, ObjSense, Sense, SolveError, VarId};
use crate::nn::{ActivationRecord, NetError, NeuralNet, UnitBounds};
use crate::potentials::RewardPotentials;
use crate::problem::{Plan, PlanningInstance, ProblemError, Trajectory};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CompileError {
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error("bounds describe {found} units, network has {expected}")]
    BoundsMismatch { expected: usize, found: usize },
    #[error("potentials do not match the network: {0}")]
    PotentialMismatch(String),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error("root relaxation is {0:?}")]
    Relaxation(LpStatus),
}

/// Key of a model variable. Entity ids are 0-based, time steps 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum VarKey {
    X {
        a: usize,
        t: usize,
    },
    Y {
        s: usize,
        t: usize,
    },
    P {
        u: usize,
        t: usize,
    },
    Pb {
        u: usize,
        t: usize,
    },
    /// Interval `i` in `1..=N`.
    Pi {
        i: usize,
        u: usize,
        t: usize,
    },
    Z {
        r: usize,
        t: usize,
    },
}

impl VarKey {
    pub fn name(&self) -> String {
        match *self {
            VarKey::X { a, t } => format!("X_a{a}_t{t}"),
            VarKey::Y { s, t } => format!("Y_s{s}_t{t}"),
            VarKey::P { u, t } => format!("P_u{u}_t{t}"),
            VarKey::Pb { u, t } => format!("Pb_u{u}_t{t}"),
            VarKey::Pi { i, u, t } => format!("Pi_{i}_u{u}_t{t}"),
            VarKey::Z { r, t } => format!("Z_r{r}_t{t}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompiledModel {
    pub model: Model,
    pub var_index: BTreeMap<VarKey, VarId>,
    pub horizon: usize,
    /// Interval count of the strengthening; 0 for the base encoding.
    pub intervals: usize,
}

impl CompiledModel {
    pub fn var(&self, key: VarKey) -> Option<VarId> {
        self.var_index.get(&key).copied()
    }

    /// Reads actions and states out of a model solution.
    pub fn extract_plan(&self, x: &[f64], n_states: usize, n_actions: usize) -> Plan {
        let get = |k: VarKey| self.var(k).map_or(0.0, |v| x[v.0]);
        let actions = (1..=self.horizon).map(|t| (0..n_actions).map(|a| get(VarKey::X { a, t })).collect()).collect();
        let states = (1..=self.horizon + 1).map(|t| (0..n_states).map(|s| get(VarKey::Y { s, t })).collect()).collect();
        Plan { actions, states: Some(states) }
    }

    /// Full model assignment reproducing a simulated trajectory: unit outputs and bits from
    /// the activation records, interval bits from the unit outputs, auxiliaries at
    /// their tight values.
    pub fn lift_trajectory(
        &self,
        instance: &PlanningInstance,
        bounds: &UnitBounds,
        plan: &Plan,
        traj: &Trajectory,
    ) -> Vec<f64> {
        let mut x = alloc::vec![0.0; self.model.n_vars()];
        for (&key, &v) in &self.var_index {
            x[v.0] = match key {
                VarKey::X { a, t } => plan.actions[t - 1][a],
                VarKey::Y { s, t } => traj.states[t - 1][s],
                VarKey::P { u, t } => traj.patterns[t - 1].values[u],
                VarKey::Pb { u, t } => f64::from(u8::from(traj.patterns[t - 1].bits[u])),
                VarKey::Pi { i, u, t } => {
                    let sel = interval_of(&traj.patterns[t - 1], bounds, self.intervals.max(1), u);
                    f64::from(u8::from(sel == i))
                }
                VarKey::Z { r, t } => {
                    let term = &instance.reward.abs_terms[r];
                    (term.form.eval(&traj.states[t], &plan.actions[t - 1]) - term.target).abs()
                }
            };
        }
        x
    }
}

/// Interval index (1-based, 0 when off) a unit's output falls in.
pub fn interval_of(record: &ActivationRecord, bounds: &UnitBounds, n: usize, u: usize) -> usize {
    if !record.bits[u] {
        return 0;
    }
    let nu = bounds.units[u].out_hi;
    if nu <= 0.0 {
        return 1;
    }
    let i = libm::ceil(record.values[u] * n as f64 / nu) as usize;
    i.clamp(1, n)
}

/// Reachability bounds over the instance's state and action domains.
pub fn instance_bounds(instance: &PlanningInstance, net: &NeuralNet) -> Result<UnitBounds, CompileError> {
    instance.validate_with(net)?;
    Ok(net.propagate_variable_bounds(&instance.state_box(), &instance.action_box())?)
}

/// Variables of one encoded transition.
#[derive(Debug, Clone)]
pub(crate) struct StepVars {
    pub(crate) actions: Vec<VarId>,
    pub(crate) pb: Vec<VarId>,
    /// Interval bits per unit; empty for dead units or without intervals.
    pub(crate) pi: Vec<Vec<VarId>>,
    pub(crate) next: Vec<VarId>,
    /// Reward of the transition as an affine expression.
    pub(crate) reward: LinExpr,
}

pub(crate) struct Encoder<'a> {
    pub(crate) model: Model,
    pub(crate) index: BTreeMap<VarKey, VarId>,
    instance: &'a PlanningInstance,
    net: &'a NeuralNet,
    bounds: &'a UnitBounds,
}

impl<'a> Encoder<'a> {
    pub(crate) fn new(
        instance: &'a PlanningInstance,
        net: &'a NeuralNet,
        bounds: &'a UnitBounds,
    ) -> Result<Self, CompileError> {
        instance.validate_with(net)?;
        if bounds.len() != net.n_hidden() {
            return Err(CompileError::BoundsMismatch { expected: net.n_hidden(), found: bounds.len() });
        }
        Ok(Encoder { model: Model::new(ObjSense::Maximize), index: BTreeMap::new(), instance, net, bounds })
    }

    fn add(&mut self, key: VarKey, binary: bool, lo: f64, hi: f64) -> VarId {
        let v = if binary {
            let v = self.model.add_binary(key.name());
            self.model.vars[v.0].lo = lo;
            self.model.vars[v.0].hi = hi;
            v
        } else {
            self.model.add_continuous(key.name(), lo, hi)
        };
        self.index.insert(key, v);
        v
    }

    pub(crate) fn states(&mut self, t: usize) -> Vec<VarId> {
        (0..self.instance.n_states())
            .map(|s| {
                let d = self.instance.state_vars[s].domain;
                self.add(VarKey::Y { s, t }, false, d.lo, d.hi)
            })
            .collect()
    }

    /// Encodes the transition from `state` (already at step `t`) with `intervals`
    /// interval bits per live unit (0 for none). Creates the states at `t + 1`.
    pub(crate) fn step(&mut self, t: usize, state: &[VarId], intervals: usize) -> StepVars {
        let (instance, net, bounds) = (self.instance, self.net, self.bounds);
        let actions: Vec<VarId> = (0..instance.n_actions())
            .map(|a| {
                let d = instance.action_vars[a].domain;
                self.add(VarKey::X { a, t }, false, d.lo, d.hi)
            })
            .collect();
        for (k, c) in instance.constraints.iter().enumerate() {
            let mut e = LinExpr::new();
            for (&coef, &v) in c.form.state.iter().zip(state) {
                e.add_term(v, coef);
            }
            for (&coef, &v) in c.form.action.iter().zip(&actions) {
                e.add_term(v, coef);
            }
            self.model.add_expr_constraint(format!("C{k}_t{t}"), &e, c.sense, c.rhs);
        }

        let mut inputs: Vec<VarId> = alloc::vec![VarId(0); net.input_width()];
        for (s, &slot) in net.state_inputs().iter().enumerate() {
            inputs[slot] = state[s];
        }
        for (a, &slot) in net.action_inputs().iter().enumerate() {
            inputs[slot] = actions[a];
        }
        let n_hidden = net.n_hidden();
        let mut p = Vec::with_capacity(n_hidden);
        let mut pb = Vec::with_capacity(n_hidden);
        let mut pi = Vec::with_capacity(n_hidden);
        let mut u = 0;
        for layer in net.hidden_layers() {
            let mut outs = Vec::with_capacity(layer.width());
            for (row, &bias) in layer.weights.iter().zip(&layer.bias) {
                let ub = bounds.units[u];
                let dead = ub.is_dead();
                let pv = self.add(VarKey::P { u, t }, false, 0.0, ub.out_hi);
                let bv = self.add(VarKey::Pb { u, t }, true, 0.0, if dead { 0.0 } else { 1.0 });
                let mut input = LinExpr::constant(bias);
                for (&w, &v) in row.iter().zip(&inputs) {
                    input.add_term(v, w);
                }
                let m = ub.big_m;
                self.model.add_constraint(format!("On_u{u}_t{t}"), [(pv, 1.0), (bv, -m)], Sense::Le, 0.0);
                let mut e = LinExpr::var(pv);
                e.add_expr(&input, -1.0).add_term(bv, m);
                self.model.add_expr_constraint(format!("Off_u{u}_t{t}"), &e, Sense::Le, m);
                let mut e = LinExpr::var(pv);
                e.add_expr(&input, -1.0);
                self.model.add_expr_constraint(format!("Ge_u{u}_t{t}"), &e, Sense::Ge, 0.0);
                let mut bits = Vec::new();
                if intervals > 0 && !dead {
                    let nu = ub.out_hi;
                    let nf = intervals as f64;
                    let mut link = LinExpr::new();
                    for i in 1..=intervals {
                        let b = self.add(VarKey::Pi { i, u, t }, true, 0.0, 1.0);
                        link.add_term(b, 1.0);
                        let lo = nu * (i - 1) as f64 / nf;
                        self.model.add_constraint(format!("Ilo_{i}_u{u}_t{t}"), [(pv, 1.0), (b, -lo)], Sense::Ge, 0.0);
                        let slack = nu - nu * i as f64 / nf;
                        self.model.add_constraint(format!("Ihi_{i}_u{u}_t{t}"), [(pv, 1.0), (b, slack)], Sense::Le, nu);
                        bits.push(b);
                    }
                    link.add_term(bv, -1.0);
                    self.model.add_expr_constraint(format!("L_u{u}_t{t}"), &link, Sense::Eq, 0.0);
                }
                outs.push(pv);
                p.push(pv);
                pb.push(bv);
                pi.push(bits);
                u += 1;
            }
            inputs = outs;
        }

        let next = self.states(t + 1);
        let out = net.output_layer();
        for (k, &s) in net.output_states().iter().enumerate() {
            let mut e = LinExpr::var(next[s]);
            for (&w, &v) in out.weights[k].iter().zip(&inputs) {
                e.add_term(v, -w);
            }
            self.model.add_expr_constraint(format!("T_s{s}_t{t}"), &e, Sense::Eq, out.bias[k]);
        }

        let reward = self.reward(t, &next, &actions);
        StepVars { actions, pb, pi, next, reward }
    }

    fn reward(&mut self, t: usize, next: &[VarId], actions: &[VarId]) -> LinExpr {
        let spec = &self.instance.reward;
        let mut r = LinExpr::constant(spec.constant);
        for (&c, &v) in spec.linear.state.iter().zip(next) {
            r.add_term(v, c);
        }
        for (&c, &v) in spec.linear.action.iter().zip(actions) {
            r.add_term(v, c);
        }
        let (sbox, abox) = (self.instance.state_box(), self.instance.action_box());
        for (k, term) in spec.abs_terms.iter().enumerate() {
            let zmax = term.form.range(&sbox, &abox).abs_dev(term.target).hi;
            let z = self.add(VarKey::Z { r: k, t }, false, 0.0, zmax);
            let mut form = LinExpr::constant(-term.target);
            for (&c, &v) in term.form.state.iter().zip(next) {
                form.add_term(v, c);
            }
            for (&c, &v) in term.form.action.iter().zip(actions) {
                form.add_term(v, c);
            }
            let mut up = LinExpr::var(z);
            up.add_expr(&form, -1.0);
            self.model.add_expr_constraint(format!("Zp_r{k}_t{t}"), &up, Sense::Ge, 0.0);
            let mut down = LinExpr::var(z);
            down.add_expr(&form, 1.0);
            self.model.add_expr_constraint(format!("Zm_r{k}_t{t}"), &down, Sense::Ge, 0.0);
            r.add_term(z, -term.weight);
        }
        r
    }
}

fn compile(
    instance: &PlanningInstance,
    net: &NeuralNet,
    bounds: &UnitBounds,
    potentials: Option<&RewardPotentials>,
) -> Result<CompiledModel, CompileError> {
    let mut enc = Encoder::new(instance, net, bounds)?;
    let intervals = potentials.map_or(0, |p| p.n_intervals);
    let mut state = enc.states(1);
    for (s, iv) in instance.initial.iter().enumerate() {
        if iv.lo == iv.hi {
            enc.model.add_constraint(format!("I_s{s}"), [(state[s], 1.0)], Sense::Eq, iv.lo);
        } else {
            enc.model.add_constraint(format!("I_s{s}_lo"), [(state[s], 1.0)], Sense::Ge, iv.lo);
            enc.model.add_constraint(format!("I_s{s}_hi"), [(state[s], 1.0)], Sense::Le, iv.hi);
        }
    }
    let mut objective = LinExpr::new();
    for t in 1..=instance.horizon {
        let step = enc.step(t, &state, intervals);
        if let Some(pot) = potentials {
            // Σ v_on Pi - Σ v_off Pb - R >= -Σ v_off
            let mut e = LinExpr::new();
            let mut rhs = 0.0;
            for (u, unit) in pot.units.iter().enumerate() {
                for (k, &b) in step.pi[u].iter().enumerate() {
                    e.add_term(b, unit.v_on[k]);
                }
                e.add_term(step.pb[u], -unit.v_off);
                rhs -= unit.v_off;
            }
            e.add_expr(&step.reward, -1.0);
            enc.model.add_expr_constraint(format!("Pot_t{t}"), &e, Sense::Ge, rhs);
        }
        objective.add_expr(&step.reward, 1.0);
        state = step.next;
    }
    for (s, iv) in instance.goal.iter().enumerate() {
        let d = instance.state_vars[s].domain;
        if iv.lo > d.lo {
            enc.model.add_constraint(format!("G_s{s}_lo"), [(state[s], 1.0)], Sense::Ge, iv.lo);
        }
        if iv.hi < d.hi {
            enc.model.add_constraint(format!("G_s{s}_hi"), [(state[s], 1.0)], Sense::Le, iv.hi);
        }
    }
    enc.model.set_objective(ObjSense::Maximize, &objective);
    Ok(CompiledModel { model: enc.model, var_index: enc.index, horizon: instance.horizon, intervals })
}

pub fn compile_base(
    instance: &PlanningInstance,
    net: &NeuralNet,
    bounds: &UnitBounds,
) -> Result<CompiledModel, CompileError> {
    compile(instance, net, bounds, None)
}

pub fn compile_strengthened(
    instance: &PlanningInstance,
    net: &NeuralNet,
    bounds: &UnitBounds,
    potentials: &RewardPotentials,
) -> Result<CompiledModel, CompileError> {
    potentials.check_against(bounds).map_err(CompileError::PotentialMismatch)?;
    compile(instance, net, bounds, Some(potentials))
}

/// Optimum of the model with every binary relaxed to its bounds.
pub fn root_relaxation(compiled: &CompiledModel) -> Result<f64, CompileError> {
    let sol = milp::solve_lp(&compiled.model)?;
    match sol.status {
        LpStatus::Optimal => Ok(sol.objective),
        s => Err(CompileError::Relaxation(s)),
    }
}
