//! Seeded synthetic instances with hand-built ReLU dynamics.
//!
//! None of these networks were trained; they are small stand-ins shaped like the
//! navigation, reservoir and HVAC benchmarks, plus random networks for testing. Every
//! generator keeps the next state inside the state domain for any state and action in
//! their domains, so the all-zero plan is always feasible.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::interval::Interval;
use crate::milp::Sense;
use crate::nn::{Activation, Layer, NetError, NeuralNet};
use crate::problem::{AbsTerm, LinearConstraint, LinearForm, PlanningInstance, RewardSpec, VarDecl};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DomainError {
    #[error("invalid domain spec: {0}")]
    Invalid(String),
    #[error(transparent)]
    Net(#[from] NetError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DomainKind {
    Navigation,
    Reservoir,
    Hvac,
    Random,
}

impl FromStr for DomainKind {
    type Err = DomainError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "navigation" => Ok(DomainKind::Navigation),
            "reservoir" => Ok(DomainKind::Reservoir),
            "hvac" => Ok(DomainKind::Hvac),
            "random" => Ok(DomainKind::Random),
            other => Err(DomainError::Invalid(format!("unknown domain {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DomainSpec {
    pub kind: DomainKind,
    /// Maze side, reservoir count or room count; unused for random networks.
    pub size: usize,
    /// Layer widths for random networks, e.g. `[4, 6, 2]`.
    pub widths: Vec<usize>,
    pub seed: u64,
    pub horizon: usize,
    /// Navigation only: pad the network to the `4:32:32:2` benchmark shape.
    pub paper_width: bool,
}

impl DomainSpec {
    pub fn new(kind: DomainKind, size: usize, horizon: usize) -> Self {
        DomainSpec { kind, size, widths: Vec::new(), seed: 0, horizon, paper_width: false }
    }

    pub fn random(widths: Vec<usize>, seed: u64, horizon: usize) -> Self {
        DomainSpec { kind: DomainKind::Random, size: 0, widths, seed, horizon, paper_width: false }
    }

    pub fn validate(&self) -> Result<(), DomainError> {
        if self.horizon == 0 {
            return Err(DomainError::Invalid("horizon must be at least 1".into()));
        }
        match self.kind {
            DomainKind::Random => {
                if self.widths.len() < 2 || self.widths.contains(&0) {
                    return Err(DomainError::Invalid("random widths need at least two positive entries".into()));
                }
                let (inp, out) = (self.widths[0], *self.widths.last().expect("len >= 2"));
                if out > inp {
                    return Err(DomainError::Invalid(format!(
                        "output width {out} exceeds input width {inp}; inputs are states then actions"
                    )));
                }
            }
            _ => {
                if self.size == 0 {
                    return Err(DomainError::Invalid("size must be positive".into()));
                }
            }
        }
        Ok(())
    }
}

/// Parses `4:6:2`.
pub fn parse_widths(s: &str) -> Result<Vec<usize>, DomainError> {
    s.split(':')
        .map(|w| w.trim().parse::<usize>().map_err(|_| DomainError::Invalid(format!("bad width {w:?} in {s:?}"))))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Generated {
    pub instance: PlanningInstance,
    pub net: NeuralNet,
    /// How the initial state, goal and reward were chosen.
    pub notes: String,
}

pub fn generate(spec: &DomainSpec) -> Result<Generated, DomainError> {
    spec.validate()?;
    match spec.kind {
        DomainKind::Navigation => navigation(spec),
        DomainKind::Reservoir => reservoir(spec),
        DomainKind::Hvac => hvac(spec),
        DomainKind::Random => random(spec),
    }
}

/// `max(0, x) - max(0, x - hi)`, the clip to `[0, hi]` for `x >= -∞`, as two hidden rows.
fn clip_rows(input: &[f64], bias: f64, hi: f64) -> [(Vec<f64>, f64); 2] {
    [(input.to_vec(), bias), (input.to_vec(), bias - hi)]
}

fn navigation(spec: &DomainSpec) -> Result<Generated, DomainError> {
    let n = spec.size as f64;
    let c = n / 2.0;
    let kappa = 1.0;
    // Inputs: x, y, ax, ay. Per axis: clip units and a slow-down pair that equals the
    // action once the position is past the centre line, 0 well before it.
    let mut rows = Vec::new();
    let mut out = vec![vec![0.0; 8]; 2];
    for axis in 0..2 {
        let mut unit = vec![0.0; 4];
        unit[axis] = 1.0;
        unit[2 + axis] = 1.0;
        let base = rows.len();
        rows.extend(clip_rows(&unit, 0.0, n));
        let mut zone_a = vec![0.0; 4];
        zone_a[axis] = kappa;
        zone_a[2 + axis] = 1.0;
        rows.push((zone_a, -kappa * c));
        let mut zone_b = vec![0.0; 4];
        zone_b[axis] = kappa;
        rows.push((zone_b, -kappa * c));
        out[axis][base] = 1.0;
        out[axis][base + 1] = -1.0;
        out[axis][base + 2] = -0.5;
        out[axis][base + 3] = 0.5;
    }
    let (w1, b1): (Vec<Vec<f64>>, Vec<f64>) = rows.into_iter().unzip();
    let layers = if spec.paper_width {
        // 32 units per layer: the 8 working units, padded with units that are always off;
        // the second layer copies the first.
        let mut w = w1.clone();
        let mut b = b1.clone();
        while w.len() < 32 {
            w.push(vec![0.0; 4]);
            b.push(-1.0);
        }
        let copy: Vec<Vec<f64>> = (0..32)
            .map(|j| {
                let mut r = vec![0.0; 32];
                if j < 8 {
                    r[j] = 1.0;
                }
                r
            })
            .collect();
        let b2 = (0..32).map(|j| if j < 8 { 0.0 } else { -1.0 }).collect();
        let w3 = out.iter().map(|r| {
            let mut row = r.clone();
            row.resize(32, 0.0);
            row
        });
        vec![
            Layer::new(w, b, Activation::Relu),
            Layer::new(copy, b2, Activation::Relu),
            Layer::new(w3.collect(), vec![0.0; 2], Activation::Linear),
        ]
    } else {
        vec![Layer::new(w1, b1, Activation::Relu), Layer::new(out, vec![0.0; 2], Activation::Linear)]
    };
    let net = NeuralNet::new(layers, vec![0, 1], vec![2, 3], vec![0, 1])?;
    let target = (n - 1.0).max(0.5);
    let dist = |s: usize| AbsTerm {
        weight: 1.0,
        form: LinearForm::new(if s == 0 { vec![1.0] } else { vec![0.0, 1.0] }, vec![]),
        target,
    };
    let state_vars = vec![VarDecl::new("x", 0.0, n), VarDecl::new("y", 0.0, n)];
    let instance = PlanningInstance {
        goal: state_vars.iter().map(|v| v.domain).collect(),
        state_vars,
        action_vars: vec![VarDecl::new("ax", -0.1, 0.1), VarDecl::new("ay", -0.1, 0.1)],
        initial: vec![Interval::point(0.5), Interval::point(0.5)],
        constraints: vec![LinearConstraint {
            form: LinearForm::new(vec![], vec![1.0, 1.0]),
            sense: Sense::Le,
            rhs: 0.15,
        }],
        reward: RewardSpec { constant: 0.0, linear: LinearForm::default(), abs_terms: vec![dist(0), dist(1)] },
        horizon: spec.horizon,
    };
    let notes = format!(
        "synthetic navigation: {n}x{n} area, start (0.5, 0.5), reward -|x-{target}|-|y-{target}|, \
         moves halve past the centre line {c}, goal = whole area, ax+ay <= 0.15"
    );
    Ok(Generated { instance, net, notes })
}

fn reservoir(spec: &DomainSpec) -> Result<Generated, DomainError> {
    let k = spec.size;
    let cap = 100.0;
    let (band_lo, band_hi, high) = (40.0, 60.0, 80.0);
    let width = 2 * k;
    // Inputs: levels then releases. Reservoir i receives half of the upstream release.
    let mut rows = Vec::new();
    let mut out = vec![vec![0.0; 3 * k]; k];
    for i in 0..k {
        let rain = 2.0 + i as f64;
        let mut v = vec![0.0; width];
        v[i] = 1.0;
        v[k + i] = -1.0;
        if i > 0 {
            v[k + i - 1] = 0.5;
        }
        let base = rows.len();
        rows.extend(clip_rows(&v, rain, cap));
        let mut evap = vec![0.0; width];
        evap[i] = 1.0;
        rows.push((evap, -high));
        out[i][base] = 1.0;
        out[i][base + 1] = -1.0;
        out[i][base + 2] = -0.1;
    }
    let (w1, b1): (Vec<Vec<f64>>, Vec<f64>) = rows.into_iter().unzip();
    let net = NeuralNet::new(
        vec![Layer::new(w1, b1, Activation::Relu), Layer::new(out, vec![0.0; k], Activation::Linear)],
        (0..k).collect(),
        (k..2 * k).collect(),
        (0..k).collect(),
    )?;
    let mut abs_terms = Vec::new();
    for i in 0..k {
        let mut s = vec![0.0; k];
        s[i] = 1.0;
        for target in [band_lo, band_hi] {
            abs_terms.push(AbsTerm { weight: 0.5, form: LinearForm::new(s.clone(), vec![]), target });
        }
    }
    let state_vars: Vec<VarDecl> = (0..k).map(|i| VarDecl::new(format!("level{i}"), 0.0, cap)).collect();
    let instance = PlanningInstance {
        goal: state_vars.iter().map(|v| v.domain).collect(),
        state_vars,
        action_vars: (0..k).map(|i| VarDecl::new(format!("release{i}"), 0.0, 10.0)).collect(),
        initial: vec![Interval::point(50.0); k],
        constraints: vec![],
        reward: RewardSpec {
            constant: k as f64 * (band_hi - band_lo) / 2.0,
            linear: LinearForm::new(vec![], vec![-0.01; k]),
            abs_terms,
        },
        horizon: spec.horizon,
    };
    let notes = format!(
        "synthetic reservoir: {k} reservoirs of capacity {cap}, rain 2+i per step, half of each release flows \
         downstream, evaporation 0.1 per unit above {high}; reward penalizes levels outside [{band_lo}, {band_hi}] \
         and 0.01 per unit released; start 50, goal = whole domain"
    );
    Ok(Generated { instance, net, notes })
}

fn hvac(spec: &DomainSpec) -> Result<Generated, DomainError> {
    let k = spec.size;
    let (lo, hi, setpoint, outside) = (10.0, 30.0, 21.0, 5.0);
    let floor = lo + 0.3;
    let width = 2 * k;
    let mut rows = Vec::new();
    let mut out = vec![vec![0.0; 3 * k]; k];
    let mut bias = vec![0.0; k];
    for i in 0..k {
        // v = T_i + 2 h_i - 0.05 (T_i - outside) + 0.02 Σ_j (T_j - T_i)
        let mut v = vec![0.0; width];
        v[i] = 1.0 - 0.05;
        for j in 0..k {
            if j != i {
                v[j] += 0.02;
                v[i] -= 0.02;
            }
        }
        v[k + i] = 2.0;
        let c = 0.05 * outside;
        let base = rows.len();
        rows.push((v.clone(), c - floor));
        rows.push((v, c - hi));
        let mut sat = vec![0.0; width];
        sat[k + i] = 1.0;
        rows.push((sat, -0.7));
        out[i][base] = 1.0;
        out[i][base + 1] = -1.0;
        out[i][base + 2] = -1.0;
        bias[i] = floor;
    }
    let (w1, b1): (Vec<Vec<f64>>, Vec<f64>) = rows.into_iter().unzip();
    let net = NeuralNet::new(
        vec![Layer::new(w1, b1, Activation::Relu), Layer::new(out, bias, Activation::Linear)],
        (0..k).collect(),
        (k..2 * k).collect(),
        (0..k).collect(),
    )?;
    let abs_terms = (0..k)
        .map(|i| {
            let mut s = vec![0.0; k];
            s[i] = 1.0;
            AbsTerm { weight: 1.0, form: LinearForm::new(s, vec![]), target: setpoint }
        })
        .collect();
    let state_vars: Vec<VarDecl> = (0..k).map(|i| VarDecl::new(format!("temp{i}"), lo, hi)).collect();
    let instance = PlanningInstance {
        goal: state_vars.iter().map(|v| v.domain).collect(),
        state_vars,
        action_vars: (0..k).map(|i| VarDecl::new(format!("heat{i}"), 0.0, 1.0)).collect(),
        initial: vec![Interval::point(15.0); k],
        constraints: vec![],
        reward: RewardSpec { constant: 0.0, linear: LinearForm::new(vec![], vec![-0.1; k]), abs_terms },
        horizon: spec.horizon,
    };
    let notes = format!(
        "synthetic hvac: {k} rooms in [{lo}, {hi}], loss 0.05 towards {outside}, coupling 0.02, heating 2 per unit \
         with output lost above 0.7; reward -|T-{setpoint}| - 0.1 heat; start 15, goal = whole domain"
    );
    Ok(Generated { instance, net, notes })
}

fn random(spec: &DomainSpec) -> Result<Generated, DomainError> {
    let w = &spec.widths;
    let n_in = w[0];
    let n_s = *w.last().expect("validated");
    let n_a = n_in - n_s;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut layers = Vec::new();
    for l in 1..w.len() {
        let fan_in = w[l - 1] as f64;
        let weights: Vec<Vec<f64>> =
            (0..w[l]).map(|_| (0..w[l - 1]).map(|_| rng.random_range(-1.0..=1.0) / fan_in).collect()).collect();
        let bias: Vec<f64> = (0..w[l]).map(|_| rng.random_range(-1.0..=1.0) / fan_in).collect();
        let act = if l + 1 == w.len() { Activation::Linear } else { Activation::Relu };
        layers.push(Layer::new(weights, bias, act));
    }
    let states: Vec<usize> = (0..n_s).collect();
    let actions: Vec<usize> = (n_s..n_in).collect();
    let unit_box = vec![Interval::new(-1.0, 1.0); n_in];
    // Shrink output rows whose reachable range leaves [-1, 1].
    let probe = NeuralNet::new(layers.clone(), states.clone(), actions.clone(), states.clone())?;
    let reach = probe.propagate_bounds(&unit_box)?;
    let last = layers.last_mut().expect("at least one layer");
    for (s, iv) in reach.outputs.iter().enumerate() {
        let m = iv.max_abs();
        if m > 1.0 {
            for x in &mut last.weights[s] {
                *x /= m;
            }
            last.bias[s] /= m;
        }
    }
    let net = NeuralNet::new(layers, states, actions, (0..n_s).collect())?;
    let lin_s: Vec<f64> = (0..n_s).map(|_| rng.random_range(-1.0..=1.0)).collect();
    let lin_a: Vec<f64> = (0..n_a).map(|_| rng.random_range(-0.5..=0.5)).collect();
    let abs_s: Vec<f64> = (0..n_s).map(|_| rng.random_range(-1.0..=1.0)).collect();
    let abs_a: Vec<f64> = (0..n_a).map(|_| rng.random_range(-1.0..=1.0)).collect();
    let reward = RewardSpec {
        constant: rng.random_range(-0.5..=0.5),
        linear: LinearForm::new(lin_s, lin_a),
        abs_terms: vec![AbsTerm {
            weight: rng.random_range(0.0..=1.0),
            form: LinearForm::new(abs_s, abs_a),
            target: rng.random_range(-0.5..=0.5),
        }],
    };
    let constraints = if n_a > 0 {
        vec![LinearConstraint {
            form: LinearForm::new(vec![], vec![1.0; n_a]),
            sense: Sense::Le,
            rhs: 0.5 * n_a as f64,
        }]
    } else {
        vec![]
    };
    let state_vars: Vec<VarDecl> = (0..n_s).map(|i| VarDecl::new(format!("s{i}"), -1.0, 1.0)).collect();
    let instance = PlanningInstance {
        goal: state_vars.iter().map(|v| v.domain).collect(),
        state_vars,
        action_vars: (0..n_a).map(|i| VarDecl::new(format!("a{i}"), -1.0, 1.0)).collect(),
        initial: vec![Interval::point(0.0); n_s],
        constraints,
        reward,
        horizon: spec.horizon,
    };
    let notes = format!(
        "synthetic random network (seed {}): weights and biases uniform in [-1, 1] / fan-in, output rows scaled \
         into [-1, 1]; random affine and absolute-value reward; start 0, goal = whole domain",
        spec.seed
    );
    Ok(Generated { instance, net, notes })
}
