//! JSON documents read and written by the command line.

use reluplan_core::domains::Generated;
use reluplan_core::milp::{ObjSense, Sense, SolveStats, TimelinePoint};
use reluplan_core::nn::{Activation, Layer, NeuralNet};
use reluplan_core::potentials::{RewardPotentials, UnitPotential};
use reluplan_core::problem::{
    AbsTerm, LinearConstraint, LinearForm, PlanningInstance, RewardSpec, Trajectory, VarDecl,
};
use reluplan_core::Interval;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceFile {
    #[serde(default)]
    pub synthetic: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub notes: Option<String>,
    pub network: NetworkFile,
    pub state_vars: Vec<VarFile>,
    pub action_vars: Vec<VarFile>,
    pub initial: Vec<Bound>,
    pub goal: Vec<Bound>,
    #[serde(default)]
    pub constraints: Vec<ConstraintFile>,
    pub reward: RewardFile,
    pub horizon: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkFile {
    /// Layer widths including the input, e.g. `[4, 8, 2]`. Checked against the layers.
    pub widths: Vec<usize>,
    pub layers: Vec<LayerFile>,
    pub state_inputs: Vec<usize>,
    pub action_inputs: Vec<usize>,
    pub output_states: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerFile {
    pub w: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub act: ActFile,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActFile {
    Relu,
    Linear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarFile {
    pub name: String,
    pub lo: f64,
    pub hi: f64,
}

/// A point `2.0` or an interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Bound {
    Point(f64),
    Range([f64; 2]),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintFile {
    #[serde(default)]
    pub state: Vec<f64>,
    #[serde(default)]
    pub action: Vec<f64>,
    pub sense: String,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardFile {
    #[serde(default)]
    pub constant: f64,
    #[serde(default)]
    pub state: Vec<f64>,
    #[serde(default)]
    pub action: Vec<f64>,
    #[serde(default)]
    pub abs_terms: Vec<AbsFile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbsFile {
    pub weight: f64,
    #[serde(default)]
    pub state: Vec<f64>,
    #[serde(default)]
    pub action: Vec<f64>,
    pub target: f64,
}

fn to_bound(iv: Interval) -> Bound {
    if iv.lo == iv.hi {
        Bound::Point(iv.lo)
    } else {
        Bound::Range([iv.lo, iv.hi])
    }
}

fn from_bound(b: Bound) -> Interval {
    match b {
        Bound::Point(x) => Interval::point(x),
        Bound::Range([lo, hi]) => Interval::new(lo, hi),
    }
}

fn sense_str(s: Sense) -> &'static str {
    match s {
        Sense::Le => "<=",
        Sense::Ge => ">=",
        Sense::Eq => "=",
    }
}

fn parse_sense(s: &str) -> Result<Sense, CliError> {
    match s {
        "<=" => Ok(Sense::Le),
        ">=" => Ok(Sense::Ge),
        "=" | "==" => Ok(Sense::Eq),
        other => Err(CliError::Format(format!("unknown constraint sense {other:?}"))),
    }
}

impl NetworkFile {
    pub fn from_net(net: &NeuralNet) -> Self {
        let mut widths = vec![net.input_width()];
        widths.extend(net.layers().iter().map(Layer::width));
        NetworkFile {
            widths,
            layers: net
                .layers()
                .iter()
                .map(|l| LayerFile {
                    w: l.weights.clone(),
                    b: l.bias.clone(),
                    act: match l.activation {
                        Activation::Relu => ActFile::Relu,
                        Activation::Linear => ActFile::Linear,
                    },
                })
                .collect(),
            state_inputs: net.state_inputs().to_vec(),
            action_inputs: net.action_inputs().to_vec(),
            output_states: net.output_states().to_vec(),
        }
    }

    pub fn to_net(&self) -> Result<NeuralNet, CliError> {
        let layers = self
            .layers
            .iter()
            .map(|l| {
                let act = match l.act {
                    ActFile::Relu => Activation::Relu,
                    ActFile::Linear => Activation::Linear,
                };
                Layer::new(l.w.clone(), l.b.clone(), act)
            })
            .collect();
        let net =
            NeuralNet::new(layers, self.state_inputs.clone(), self.action_inputs.clone(), self.output_states.clone())?;
        let mut widths = vec![net.input_width()];
        widths.extend(net.layers().iter().map(Layer::width));
        if widths != self.widths {
            return Err(CliError::Format(format!(
                "network widths {:?} do not match its layers {widths:?}",
                self.widths
            )));
        }
        Ok(net)
    }
}

fn vars_to_file(vars: &[VarDecl]) -> Vec<VarFile> {
    vars.iter().map(|v| VarFile { name: v.name.clone(), lo: v.domain.lo, hi: v.domain.hi }).collect()
}

fn vars_from_file(vars: &[VarFile]) -> Vec<VarDecl> {
    vars.iter().map(|v| VarDecl::new(v.name.clone(), v.lo, v.hi)).collect()
}

impl InstanceFile {
    pub fn from_parts(instance: &PlanningInstance, net: &NeuralNet, synthetic: bool, notes: Option<String>) -> Self {
        let r = &instance.reward;
        InstanceFile {
            synthetic,
            notes,
            network: NetworkFile::from_net(net),
            state_vars: vars_to_file(&instance.state_vars),
            action_vars: vars_to_file(&instance.action_vars),
            initial: instance.initial.iter().copied().map(to_bound).collect(),
            goal: instance.goal.iter().map(|iv| Bound::Range([iv.lo, iv.hi])).collect(),
            constraints: instance
                .constraints
                .iter()
                .map(|c| ConstraintFile {
                    state: c.form.state.clone(),
                    action: c.form.action.clone(),
                    sense: sense_str(c.sense).to_string(),
                    rhs: c.rhs,
                })
                .collect(),
            reward: RewardFile {
                constant: r.constant,
                state: r.linear.state.clone(),
                action: r.linear.action.clone(),
                abs_terms: r
                    .abs_terms
                    .iter()
                    .map(|t| AbsFile {
                        weight: t.weight,
                        state: t.form.state.clone(),
                        action: t.form.action.clone(),
                        target: t.target,
                    })
                    .collect(),
            },
            horizon: instance.horizon,
        }
    }

    pub fn from_generated(g: &Generated) -> Self {
        InstanceFile::from_parts(&g.instance, &g.net, true, Some(g.notes.clone()))
    }

    /// Builds and validates the instance and its network.
    pub fn to_parts(&self) -> Result<(PlanningInstance, NeuralNet), CliError> {
        let net = self.network.to_net()?;
        let constraints = self
            .constraints
            .iter()
            .map(|c| {
                Ok(LinearConstraint {
                    form: LinearForm::new(c.state.clone(), c.action.clone()),
                    sense: parse_sense(&c.sense)?,
                    rhs: c.rhs,
                })
            })
            .collect::<Result<_, CliError>>()?;
        let r = &self.reward;
        let instance = PlanningInstance {
            state_vars: vars_from_file(&self.state_vars),
            action_vars: vars_from_file(&self.action_vars),
            initial: self.initial.iter().copied().map(from_bound).collect(),
            goal: self.goal.iter().copied().map(from_bound).collect(),
            constraints,
            reward: RewardSpec {
                constant: r.constant,
                linear: LinearForm::new(r.state.clone(), r.action.clone()),
                abs_terms: r
                    .abs_terms
                    .iter()
                    .map(|t| AbsTerm {
                        weight: t.weight,
                        form: LinearForm::new(t.state.clone(), t.action.clone()),
                        target: t.target,
                    })
                    .collect(),
            },
            horizon: self.horizon,
        };
        instance.validate_with(&net)?;
        Ok((instance, net))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialsFile {
    #[serde(rename = "N")]
    pub n: usize,
    pub lambda: f64,
    pub epsilon: f64,
    pub units: Vec<UnitFile>,
    pub certified_violation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitFile {
    pub v_off: f64,
    pub v_on: Vec<f64>,
}

impl From<&RewardPotentials> for PotentialsFile {
    fn from(p: &RewardPotentials) -> Self {
        PotentialsFile {
            n: p.n_intervals,
            lambda: p.lambda,
            epsilon: p.epsilon,
            units: p.units.iter().map(|u| UnitFile { v_off: u.v_off, v_on: u.v_on.clone() }).collect(),
            certified_violation: p.certified_violation,
        }
    }
}

impl From<&PotentialsFile> for RewardPotentials {
    fn from(p: &PotentialsFile) -> Self {
        RewardPotentials {
            n_intervals: p.n,
            lambda: p.lambda,
            epsilon: p.epsilon,
            certified_violation: p.certified_violation,
            units: p.units.iter().map(|u| UnitPotential { v_off: u.v_off, v_on: u.v_on.clone() }).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanFile {
    pub status: String,
    /// MILP objective of the incumbent.
    pub objective: f64,
    /// Reward of the plan re-simulated through the network.
    pub total_reward: f64,
    pub actions: Vec<Vec<f64>>,
    /// `horizon + 1` simulated states, starting with the initial state.
    pub states: Vec<Vec<f64>>,
    pub rewards: Vec<f64>,
}

impl PlanFile {
    pub fn new(status: &str, objective: f64, actions: Vec<Vec<f64>>, traj: &Trajectory) -> Self {
        PlanFile {
            status: status.to_string(),
            objective,
            total_reward: traj.total_reward,
            actions,
            states: traj.states.clone(),
            rewards: traj.rewards.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsFile {
    pub sense: String,
    pub status: String,
    pub primal: Option<f64>,
    pub dual: Option<f64>,
    pub nodes_open: u64,
    pub nodes_closed: u64,
    pub root_bound: Option<f64>,
    pub elapsed: f64,
    pub timeline: Vec<TimelineRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimelineRow {
    pub t: f64,
    pub dual: Option<f64>,
    pub primal: Option<f64>,
    pub open: u64,
    pub closed: u64,
}

/// JSON has no infinities; unbounded values are written as null.
pub fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

impl From<&TimelinePoint> for TimelineRow {
    fn from(p: &TimelinePoint) -> Self {
        TimelineRow { t: p.elapsed, dual: finite(p.dual), primal: p.primal, open: p.nodes_open, closed: p.nodes_closed }
    }
}

impl From<&SolveStats> for StatsFile {
    fn from(s: &SolveStats) -> Self {
        StatsFile {
            sense: match s.sense {
                ObjSense::Maximize => "maximize",
                ObjSense::Minimize => "minimize",
            }
            .to_string(),
            status: s.status.as_str().to_string(),
            primal: s.primal,
            dual: finite(s.dual),
            nodes_open: s.nodes_open,
            nodes_closed: s.nodes_closed,
            root_bound: s.root_bound,
            elapsed: s.elapsed,
            timeline: s.timeline.iter().map(TimelineRow::from).collect(),
        }
    }
}
