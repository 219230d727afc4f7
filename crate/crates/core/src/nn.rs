//! Feed-forward ReLU transition networks.
//!
//! A [`NeuralNet`] is a chain of affine layers. Every layer except the last applies a
//! ReLU; the last layer is linear and predicts the next value of each state variable.
//! Hidden units are numbered globally, layer by layer, starting at zero.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use crate::interval::Interval;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Linear,
}

/// Affine layer. `weights[j]` is the incoming weight row of output unit `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl Layer {
    pub fn new(weights: Vec<Vec<f64>>, bias: Vec<f64>, activation: Activation) -> Self {
        Layer { weights, bias, activation }
    }

    pub fn width(&self) -> usize {
        self.bias.len()
    }

    pub fn input_width(&self) -> usize {
        self.weights.first().map_or(0, Vec::len)
    }

    fn apply(&self, input: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.bias)
            .map(|(row, b)| b + row.iter().zip(input).map(|(w, x)| w * x).sum::<f64>())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NetError {
    #[error("network has no layers")]
    Empty,
    #[error("layer {layer}: {detail}")]
    DimensionMismatch { layer: usize, detail: String },
    #[error("layer {layer}: non-finite weight or bias")]
    NonFinite { layer: usize },
    #[error("layer {layer}: hidden layers must use relu and the last layer must be linear")]
    Activation { layer: usize },
    #[error("input map: {0}")]
    InputMap(String),
    #[error("output map: {0}")]
    OutputMap(String),
    #[error("input has length {found}, expected {expected}")]
    InputLength { expected: usize, found: usize },
    #[error("input box side {index} is unbounded or empty")]
    UnboundedDomain { index: usize },
}

/// Per-unit record of one forward pass over the hidden units.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationRecord {
    pub pre: Vec<f64>,
    pub values: Vec<f64>,
    /// Pre-activation strictly positive. A tie at zero records `false`.
    pub bits: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardPass {
    /// Raw output slots, in output-layer order.
    pub output: Vec<f64>,
    pub pattern: ActivationRecord,
}

/// Validated ReLU network together with its input/output variable maps.
#[derive(Debug, Clone, PartialEq)]
pub struct NeuralNet {
    layers: Vec<Layer>,
    /// `state_inputs[s]` is the input slot fed by state variable `s`.
    state_inputs: Vec<usize>,
    /// `action_inputs[a]` is the input slot fed by action variable `a`.
    action_inputs: Vec<usize>,
    /// `output_states[k]` is the state variable predicted by output slot `k`.
    output_states: Vec<usize>,
    offsets: Vec<usize>,
}

impl NeuralNet {
    pub fn new(
        layers: Vec<Layer>,
        state_inputs: Vec<usize>,
        action_inputs: Vec<usize>,
        output_states: Vec<usize>,
    ) -> Result<Self, NetError> {
        if layers.is_empty() {
            return Err(NetError::Empty);
        }
        let n_states = state_inputs.len();
        let input_width = n_states + action_inputs.len();
        let mut prev = input_width;
        for (l, layer) in layers.iter().enumerate() {
            if layer.weights.len() != layer.bias.len() {
                return Err(NetError::DimensionMismatch {
                    layer: l,
                    detail: alloc::format!("{} weight rows but {} biases", layer.weights.len(), layer.bias.len()),
                });
            }
            if let Some((j, row)) = layer.weights.iter().enumerate().find(|(_, r)| r.len() != prev) {
                return Err(NetError::DimensionMismatch {
                    layer: l,
                    detail: alloc::format!("unit {j} expects {} inputs, previous width is {prev}", row.len()),
                });
            }
            let finite =
                layer.bias.iter().all(|b| b.is_finite()) && layer.weights.iter().flatten().all(|w| w.is_finite());
            if !finite {
                return Err(NetError::NonFinite { layer: l });
            }
            let want = if l + 1 == layers.len() { Activation::Linear } else { Activation::Relu };
            if layer.activation != want {
                return Err(NetError::Activation { layer: l });
            }
            prev = layer.width();
        }
        let mut seen = vec![false; input_width];
        for &slot in state_inputs.iter().chain(&action_inputs) {
            if slot >= input_width || seen[slot] {
                return Err(NetError::InputMap(alloc::format!(
                    "slot {slot} out of range or assigned twice (input width {input_width})"
                )));
            }
            seen[slot] = true;
        }
        if prev != n_states || output_states.len() != n_states {
            return Err(NetError::OutputMap(alloc::format!(
                "output width {prev} must equal the number of state variables {n_states}"
            )));
        }
        let mut seen = vec![false; n_states];
        for &s in &output_states {
            if s >= n_states || seen[s] {
                return Err(NetError::OutputMap(alloc::format!("state {s} predicted twice or unknown")));
            }
            seen[s] = true;
        }
        let mut offsets = Vec::with_capacity(layers.len());
        let mut acc = 0;
        for layer in &layers[..layers.len() - 1] {
            offsets.push(acc);
            acc += layer.width();
        }
        offsets.push(acc);
        Ok(NeuralNet { layers, state_inputs, action_inputs, output_states, offsets })
    }

    /// Network whose next state equals the current state, with no hidden units.
    pub fn identity(n_states: usize, n_actions: usize) -> Self {
        let weights = (0..n_states)
            .map(|s| (0..n_states + n_actions).map(|j| if j == s { 1.0 } else { 0.0 }).collect())
            .collect();
        let layer = Layer::new(weights, vec![0.0; n_states], Activation::Linear);
        NeuralNet::new(
            vec![layer],
            (0..n_states).collect(),
            (n_states..n_states + n_actions).collect(),
            (0..n_states).collect(),
        )
        .expect("identity network is well formed")
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn state_inputs(&self) -> &[usize] {
        &self.state_inputs
    }

    pub fn action_inputs(&self) -> &[usize] {
        &self.action_inputs
    }

    pub fn output_states(&self) -> &[usize] {
        &self.output_states
    }

    pub fn n_states(&self) -> usize {
        self.state_inputs.len()
    }

    pub fn n_actions(&self) -> usize {
        self.action_inputs.len()
    }

    pub fn input_width(&self) -> usize {
        self.n_states() + self.n_actions()
    }

    pub fn hidden_layers(&self) -> &[Layer] {
        &self.layers[..self.layers.len() - 1]
    }

    pub fn output_layer(&self) -> &Layer {
        self.layers.last().expect("non-empty")
    }

    /// Total number of hidden ReLU units.
    pub fn n_hidden(&self) -> usize {
        *self.offsets.last().expect("non-empty")
    }

    /// Global id of unit `index` in hidden layer `layer`.
    pub fn unit_id(&self, layer: usize, index: usize) -> usize {
        self.offsets[layer] + index
    }

    /// Layer widths joined by `:`, e.g. `4:32:32:2`.
    pub fn structure(&self) -> String {
        let mut s = alloc::format!("{}", self.input_width());
        for layer in &self.layers {
            s.push_str(&alloc::format!(":{}", layer.width()));
        }
        s
    }

    /// Places state and action values into their input slots.
    pub fn assemble_input(&self, state: &[f64], action: &[f64]) -> Result<Vec<f64>, NetError> {
        if state.len() != self.n_states() || action.len() != self.n_actions() {
            return Err(NetError::InputLength { expected: self.input_width(), found: state.len() + action.len() });
        }
        let mut input = vec![0.0; self.input_width()];
        for (s, &slot) in self.state_inputs.iter().enumerate() {
            input[slot] = state[s];
        }
        for (a, &slot) in self.action_inputs.iter().enumerate() {
            input[slot] = action[a];
        }
        Ok(input)
    }

    pub fn forward(&self, input: &[f64]) -> Result<ForwardPass, NetError> {
        if input.len() != self.input_width() {
            return Err(NetError::InputLength { expected: self.input_width(), found: input.len() });
        }
        let n = self.n_hidden();
        let mut pattern =
            ActivationRecord { pre: Vec::with_capacity(n), values: Vec::with_capacity(n), bits: Vec::with_capacity(n) };
        let mut current = input.to_vec();
        for layer in self.hidden_layers() {
            let pre = layer.apply(&current);
            current = pre.iter().map(|&x| x.max(0.0)).collect();
            pattern.bits.extend(pre.iter().map(|&x| x > 0.0));
            pattern.values.extend_from_slice(&current);
            pattern.pre.extend(pre);
        }
        let output = self.output_layer().apply(&current);
        Ok(ForwardPass { output, pattern })
    }

    /// One transition: returns the next state indexed by state variable, and the pattern.
    pub fn step(&self, state: &[f64], action: &[f64]) -> Result<(Vec<f64>, ActivationRecord), NetError> {
        let pass = self.forward(&self.assemble_input(state, action)?)?;
        let mut next = vec![0.0; self.n_states()];
        for (k, &s) in self.output_states.iter().enumerate() {
            next[s] = pass.output[k];
        }
        Ok((next, pass.pattern))
    }

    /// Interval bounds by forward reachability over a box given per input slot.
    pub fn propagate_bounds(&self, input_box: &[Interval]) -> Result<UnitBounds, NetError> {
        if input_box.len() != self.input_width() {
            return Err(NetError::InputLength { expected: self.input_width(), found: input_box.len() });
        }
        if let Some(index) = input_box.iter().position(|b| !b.is_finite() || b.is_empty()) {
            return Err(NetError::UnboundedDomain { index });
        }
        let mut units = Vec::with_capacity(self.n_hidden());
        let mut current = input_box.to_vec();
        for layer in self.hidden_layers() {
            let pre = affine_image(layer, &current);
            units.extend(pre.iter().map(|iv| UnitBound::from_pre(*iv)));
            current = pre.into_iter().map(Interval::relu).collect();
        }
        let out = affine_image(self.output_layer(), &current);
        let mut outputs = vec![Interval::point(0.0); self.n_states()];
        for (k, &s) in self.output_states.iter().enumerate() {
            outputs[s] = out[k];
        }
        Ok(UnitBounds { units, outputs })
    }

    /// Bounds over a box given per state variable and per action variable.
    pub fn propagate_variable_bounds(
        &self,
        state_box: &[Interval],
        action_box: &[Interval],
    ) -> Result<UnitBounds, NetError> {
        if state_box.len() != self.n_states() || action_box.len() != self.n_actions() {
            return Err(NetError::InputLength {
                expected: self.input_width(),
                found: state_box.len() + action_box.len(),
            });
        }
        let mut slots = vec![Interval::point(0.0); self.input_width()];
        for (s, &slot) in self.state_inputs.iter().enumerate() {
            slots[slot] = state_box[s];
        }
        for (a, &slot) in self.action_inputs.iter().enumerate() {
            slots[slot] = action_box[a];
        }
        self.propagate_bounds(&slots)
    }
}

fn affine_image(layer: &Layer, input: &[Interval]) -> Vec<Interval> {
    layer
        .weights
        .iter()
        .zip(&layer.bias)
        .map(|(row, &b)| row.iter().zip(input).fold(Interval::point(b), |acc, (&w, iv)| acc + iv.scale(w)))
        .collect()
}

/// Reachability bounds of one hidden unit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitBound {
    pub pre_lo: f64,
    pub pre_hi: f64,
    /// Upper bound on the unit output, `max(0, pre_hi)`.
    pub out_hi: f64,
    /// Big-M constant valid for both ReLU switching constraints.
    pub big_m: f64,
}

impl UnitBound {
    pub fn from_pre(pre: Interval) -> Self {
        UnitBound { pre_lo: pre.lo, pre_hi: pre.hi, out_hi: pre.hi.max(0.0), big_m: pre.hi.max(-pre.lo).max(0.0) }
    }

    /// The unit can never be active.
    pub fn is_dead(&self) -> bool {
        self.pre_hi <= 0.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnitBounds {
    pub units: Vec<UnitBound>,
    /// Reachable interval of each predicted state, indexed by state variable.
    pub outputs: Vec<Interval>,
}

impl UnitBounds {
    /// Largest per-unit big-M; 0 for a network without hidden units.
    pub fn global_big_m(&self) -> f64 {
        self.units.iter().map(|u| u.big_m).fold(0.0, f64::max)
    }

    pub fn len(&self) -> usize {
        self.units.len()
    }

    pub fn is_empty(&self) -> bool {
        self.units.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// s' = relu(w*s + b) with a unit linear output.
    fn single_relu(w: f64, b: f64) -> NeuralNet {
        NeuralNet::new(
            vec![
                Layer::new(vec![vec![w]], vec![b], Activation::Relu),
                Layer::new(vec![vec![1.0]], vec![0.0], Activation::Linear),
            ],
            vec![0],
            vec![],
            vec![0],
        )
        .unwrap()
    }

    fn random_net(rng: &mut ChaCha8Rng, widths: &[usize]) -> NeuralNet {
        let n_out = *widths.last().unwrap();
        let layers = widths
            .windows(2)
            .enumerate()
            .map(|(l, w)| {
                let act = if l + 2 == widths.len() { Activation::Linear } else { Activation::Relu };
                Layer::new(
                    (0..w[1]).map(|_| (0..w[0]).map(|_| rng.random_range(-1.0..1.0)).collect()).collect(),
                    (0..w[1]).map(|_| rng.random_range(-1.0..1.0)).collect(),
                    act,
                )
            })
            .collect();
        NeuralNet::new(layers, (0..n_out).collect(), (n_out..widths[0]).collect(), (0..n_out).collect()).unwrap()
    }

    #[test]
    fn structure_string() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let net = random_net(&mut rng, &[4, 32, 32, 2]);
        assert_eq!(net.structure(), "4:32:32:2");
        assert_eq!(net.n_hidden(), 64);
        assert_eq!(net.unit_id(1, 3), 35);
    }

    #[test]
    fn identity_forward() {
        let net = NeuralNet::identity(2, 1);
        let pass = net.forward(&[0.25, -3.0, 7.0]).unwrap();
        assert_eq!(pass.output, vec![0.25, -3.0]);
        assert!(pass.pattern.bits.is_empty());
    }

    #[test]
    fn layer_dimension_mismatch_names_layer() {
        let err = NeuralNet::new(
            vec![
                Layer::new(vec![vec![1.0], vec![1.0]], vec![0.0, 0.0], Activation::Relu),
                Layer::new(vec![vec![1.0, 1.0, 1.0]], vec![0.0], Activation::Linear),
            ],
            vec![0],
            vec![],
            vec![0],
        )
        .unwrap_err();
        assert!(matches!(err, NetError::DimensionMismatch { layer: 1, .. }));
    }

    #[test]
    fn non_finite_weight_rejected() {
        let err = NeuralNet::new(
            vec![Layer::new(vec![vec![f64::NAN]], vec![0.0], Activation::Linear)],
            vec![0],
            vec![],
            vec![0],
        )
        .unwrap_err();
        assert_eq!(err, NetError::NonFinite { layer: 0 });
    }

    #[test]
    fn forward_negative_and_positive() {
        let net = single_relu(2.0, 1.0);
        let pass = net.forward(&[-1.0]).unwrap();
        assert_eq!(pass.pattern.pre, vec![-1.0]);
        assert_eq!(pass.pattern.values, vec![0.0]);
        assert_eq!(pass.pattern.bits, vec![false]);
        let pass = net.forward(&[1.0]).unwrap();
        assert_eq!(pass.output, vec![3.0]);
        assert_eq!(pass.pattern.bits, vec![true]);
        assert_eq!(pass.pattern.values, vec![3.0]);
    }

    #[test]
    fn zero_tie_records_off() {
        let net = single_relu(1.0, 0.0);
        assert_eq!(net.forward(&[0.0]).unwrap().pattern.bits, vec![false]);
    }

    #[test]
    fn zero_weights_output_bias() {
        let net = NeuralNet::new(
            vec![
                Layer::new(vec![vec![0.0, 0.0]; 3], vec![0.5, -1.0, 2.0], Activation::Relu),
                Layer::new(vec![vec![0.0; 3]; 2], vec![4.0, -2.5], Activation::Linear),
            ],
            vec![0, 1],
            vec![],
            vec![0, 1],
        )
        .unwrap();
        assert_eq!(net.forward(&[9.0, -9.0]).unwrap().output, vec![4.0, -2.5]);
    }

    #[test]
    fn forward_length_mismatch() {
        let net = single_relu(1.0, 0.0);
        assert!(matches!(net.forward(&[1.0, 2.0]), Err(NetError::InputLength { .. })));
    }

    #[test]
    fn bounds_single_relu() {
        let net = single_relu(2.0, 1.0);
        let b = net.propagate_bounds(&[Interval::new(-1.0, 1.0)]).unwrap();
        let u = b.units[0];
        assert_eq!((u.pre_lo, u.pre_hi, u.out_hi, u.big_m), (-1.0, 3.0, 3.0, 3.0));
    }

    #[test]
    fn bounds_dead_unit() {
        let net = single_relu(0.0, -5.0);
        let u = net.propagate_bounds(&[Interval::new(-1.0, 1.0)]).unwrap().units[0];
        assert_eq!((u.pre_lo, u.pre_hi, u.out_hi, u.big_m), (-5.0, -5.0, 0.0, 5.0));
        assert!(u.is_dead());
    }

    #[test]
    fn bounds_stacked() {
        let net = NeuralNet::new(
            vec![
                Layer::new(vec![vec![2.0]], vec![1.0], Activation::Relu),
                Layer::new(vec![vec![-1.0]], vec![0.0], Activation::Relu),
                Layer::new(vec![vec![1.0]], vec![0.0], Activation::Linear),
            ],
            vec![0],
            vec![],
            vec![0],
        )
        .unwrap();
        let b = net.propagate_bounds(&[Interval::new(-1.0, 1.0)]).unwrap();
        assert_eq!((b.units[1].pre_lo, b.units[1].pre_hi), (-3.0, 0.0));
        assert_eq!(b.units[1].out_hi, 0.0);
    }

    #[test]
    fn unbounded_box_rejected() {
        let net = single_relu(1.0, 0.0);
        let err = net.propagate_bounds(&[Interval::new(0.0, f64::INFINITY)]).unwrap_err();
        assert_eq!(err, NetError::UnboundedDomain { index: 0 });
    }

    #[test]
    fn bounds_sound_under_sampling() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for trial in 0..20 {
            let net = random_net(&mut rng, &[3, 5, 4, 2]);
            let lo: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..0.0)).collect();
            let boxed: Vec<Interval> = lo.iter().map(|&l| Interval::new(l, l + rng.random_range(0.0..3.0))).collect();
            let bounds = net.propagate_bounds(&boxed).unwrap();
            for _ in 0..1000 {
                let x: Vec<f64> = boxed.iter().map(|b| b.lo + rng.random::<f64>() * b.width()).collect();
                let pass = net.forward(&x).unwrap();
                for (u, ub) in bounds.units.iter().enumerate() {
                    let pre = pass.pattern.pre[u];
                    assert!(pre >= ub.pre_lo - 1e-9 && pre <= ub.pre_hi + 1e-9, "trial {trial} unit {u}");
                    assert!(pass.pattern.values[u] <= ub.out_hi + 1e-9);
                    if ub.is_dead() {
                        assert_eq!(pass.pattern.values[u], 0.0);
                    }
                    assert!(ub.big_m >= ub.out_hi && ub.big_m >= -ub.pre_lo);
                }
                for (k, iv) in bounds.outputs.iter().enumerate() {
                    assert!(iv.contains(pass.output[k], 1e-9));
                }
            }
        }
    }

    proptest! {
        #[test]
        fn shrinking_box_never_widens(seed in 0u64..500, shrink in 0.0f64..1.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let net = random_net(&mut rng, &[2, 4, 3, 1]);
            let outer = [Interval::new(-1.0, 1.0), Interval::new(-2.0, 0.5)];
            let inner: Vec<Interval> = outer
                .iter()
                .map(|b| {
                    let c = 0.5 * (b.lo + b.hi);
                    let h = 0.5 * b.width() * shrink;
                    Interval::new(c - h, c + h)
                })
                .collect();
            let bo = net.propagate_bounds(&outer).unwrap();
            let bi = net.propagate_bounds(&inner).unwrap();
            for (o, i) in bo.units.iter().zip(&bi.units) {
                prop_assert!(i.pre_lo >= o.pre_lo - 1e-12 && i.pre_hi <= o.pre_hi + 1e-12);
                prop_assert!(i.out_hi <= o.out_hi + 1e-12);
            }
        }

        #[test]
        fn forward_deterministic(seed in 0u64..200, x in -3.0f64..3.0, y in -3.0f64..3.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let net = random_net(&mut rng, &[2, 3, 1]);
            prop_assert_eq!(net.forward(&[x, y]).unwrap(), net.forward(&[x, y]).unwrap());
        }
    }
}
