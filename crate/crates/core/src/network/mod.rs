//! Fully connected network `u(x; θ)`: hidden layers `h = σ(W h_prev + b)`
//! followed by an affine scalar output.

pub mod batch;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{check_len, DerivativeBundle, ExprGraph, GraphFn, KinkSite, ScalarField, Var};
use crate::error::{Error, Result};

pub use batch::{forward_batch, hessian_pairs, BatchForward, Order};

/// Widths of the canonical hidden layers.
pub const CANONICAL_HIDDEN: [usize; 4] = [32, 64, 128, 64];

/// RNG stream used for weight initialization.
pub(crate) const INIT_STREAM: u64 = 0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Tanh,
    Relu,
    Identity,
}

impl Activation {
    /// `(σ, σ', σ'', σ''')` at `z`.
    #[inline]
    pub fn eval(self, z: f64) -> (f64, f64, f64, f64) {
        match self {
            Activation::Tanh => {
                let s = z.tanh();
                let d1 = 1.0 - s * s;
                let d2 = -2.0 * s * d1;
                let d3 = d1 * (4.0 * s * s - 2.0 * d1);
                (s, d1, d2, d3)
            }
            Activation::Relu => {
                if z > 0.0 {
                    (z, 1.0, 0.0, 0.0)
                } else {
                    (0.0, 0.0, 0.0, 0.0)
                }
            }
            Activation::Identity => (z, 1.0, 0.0, 0.0),
        }
    }

    fn on_graph(self, g: &mut ExprGraph, z: Var) -> Var {
        match self {
            Activation::Tanh => g.tanh(z),
            Activation::Relu => g.relu(z),
            Activation::Identity => z,
        }
    }
}

impl std::str::FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tanh" => Ok(Activation::Tanh),
            "relu" => Ok(Activation::Relu),
            "identity" => Ok(Activation::Identity),
            other => Err(Error::config(format!(
                "unknown activation `{other}` (expected tanh, relu or identity)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub width: usize,
    pub activation: Activation,
}

impl LayerSpec {
    pub fn new(width: usize, activation: Activation) -> Self {
        LayerSpec { width, activation }
    }
}

/// Hidden layers 32-64-128-64 with the given activation, then a linear output.
pub fn canonical_spec(hidden: Activation) -> Vec<LayerSpec> {
    CANONICAL_HIDDEN
        .iter()
        .map(|&w| LayerSpec::new(w, hidden))
        .chain(std::iter::once(LayerSpec::new(1, Activation::Identity)))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct LayerShape {
    pub inputs: usize,
    pub outputs: usize,
    pub activation: Activation,
    /// Start of this layer's weights in the flat parameter vector; the bias
    /// follows the `outputs × inputs` weight block.
    pub offset: usize,
}

impl LayerShape {
    pub fn weights_len(&self) -> usize {
        self.inputs * self.outputs
    }

    pub fn bias_offset(&self) -> usize {
        self.offset + self.weights_len()
    }

    pub fn end(&self) -> usize {
        self.bias_offset() + self.outputs
    }
}

/// All weights and biases, stored flat: per layer, the row-major weight
/// matrix followed by the bias vector. Gradients use the same layout.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkParams {
    input_dim: usize,
    shapes: Vec<LayerShape>,
    values: Vec<f64>,
}

/// Borrowed view of one layer.
#[derive(Clone, Copy, Debug)]
pub struct LayerView<'a> {
    pub inputs: usize,
    pub outputs: usize,
    pub activation: Activation,
    pub weights: &'a [f64],
    pub bias: &'a [f64],
}

impl<'a> LayerView<'a> {
    pub fn weight(&self, row: usize, col: usize) -> f64 {
        self.weights[row * self.inputs + col]
    }
}

fn validate(d: usize, spec: &[LayerSpec]) -> Result<()> {
    if !(2..=4).contains(&d) {
        return Err(Error::config(format!("input dimension {d} not in 2..=4")));
    }
    let Some(last) = spec.last() else {
        return Err(Error::config("network spec has no layers"));
    };
    if last.width != 1 || last.activation != Activation::Identity {
        return Err(Error::config("output layer must have width 1 and identity activation"));
    }
    if let Some(bad) = spec.iter().position(|l| l.width == 0) {
        return Err(Error::config(format!("layer {bad} has zero width")));
    }
    Ok(())
}

fn shapes_for(d: usize, spec: &[LayerSpec]) -> Vec<LayerShape> {
    let mut shapes = Vec::with_capacity(spec.len());
    let mut inputs = d;
    let mut offset = 0;
    for layer in spec {
        let shape = LayerShape {
            inputs,
            outputs: layer.width,
            activation: layer.activation,
            offset,
        };
        offset = shape.end();
        inputs = layer.width;
        shapes.push(shape);
    }
    shapes
}

/// Glorot-uniform weights, zero biases, reproducible from `seed`.
pub fn init_network(d: usize, spec: &[LayerSpec], seed: u64) -> Result<NetworkParams> {
    validate(d, spec)?;
    let shapes = shapes_for(d, spec);
    let total = shapes.last().map_or(0, LayerShape::end);
    let mut values = vec![0.0; total];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(INIT_STREAM);
    for s in &shapes {
        let limit = (6.0 / (s.inputs + s.outputs) as f64).sqrt();
        for w in &mut values[s.offset..s.bias_offset()] {
            *w = rng.random_range(-limit..=limit);
        }
    }
    Ok(NetworkParams {
        input_dim: d,
        shapes,
        values,
    })
}

impl NetworkParams {
    /// Builds a network from explicit per-layer weights (row-major) and biases.
    pub fn from_layers(d: usize, layers: &[(LayerSpec, Vec<f64>, Vec<f64>)]) -> Result<Self> {
        let spec: Vec<LayerSpec> = layers.iter().map(|(s, _, _)| *s).collect();
        validate(d, &spec)?;
        let shapes = shapes_for(d, &spec);
        let mut values = Vec::with_capacity(shapes.last().map_or(0, LayerShape::end));
        for (shape, (_, w, b)) in shapes.iter().zip(layers) {
            if w.len() != shape.weights_len() || b.len() != shape.outputs {
                return Err(Error::structure(format!(
                    "layer with {} inputs and {} outputs needs {} weights and {} biases, got {} and {}",
                    shape.inputs,
                    shape.outputs,
                    shape.weights_len(),
                    shape.outputs,
                    w.len(),
                    b.len()
                )));
            }
            values.extend_from_slice(w);
            values.extend_from_slice(b);
        }
        let params = NetworkParams {
            input_dim: d,
            shapes,
            values,
        };
        params.check_finite()?;
        Ok(params)
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn num_layers(&self) -> usize {
        self.shapes.len()
    }

    pub fn num_params(&self) -> usize {
        self.values.len()
    }

    pub fn spec(&self) -> Vec<LayerSpec> {
        self.shapes
            .iter()
            .map(|s| LayerSpec::new(s.outputs, s.activation))
            .collect()
    }

    pub fn layer(&self, l: usize) -> LayerView<'_> {
        let s = &self.shapes[l];
        LayerView {
            inputs: s.inputs,
            outputs: s.outputs,
            activation: s.activation,
            weights: &self.values[s.offset..s.bias_offset()],
            bias: &self.values[s.bias_offset()..s.end()],
        }
    }

    pub(crate) fn shapes(&self) -> &[LayerShape] {
        &self.shapes
    }

    /// Flat parameter vector (layer by layer: weights row-major, then bias).
    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Same architecture, different parameter values.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        if values.len() != self.values.len() {
            return Err(Error::structure(format!(
                "expected {} parameters, got {}",
                self.values.len(),
                values.len()
            )));
        }
        Ok(NetworkParams {
            values,
            ..self.clone()
        })
    }

    pub fn check_finite(&self) -> Result<()> {
        match self.values.iter().position(|v| !v.is_finite()) {
            None => Ok(()),
            Some(k) => Err(Error::eval(format!("parameter {k} is {}", self.values[k]))),
        }
    }

    /// Records the network on a graph with every weight and bias as a
    /// parameter leaf, in flat order. Returns the output node and the leaves.
    pub fn build_with_param_leaves(&self, g: &mut ExprGraph, inputs: &[Var]) -> Result<(Var, Vec<Var>)> {
        check_len(self.input_dim, inputs)?;
        let leaves: Vec<Var> = self.values.iter().map(|&v| g.param(v)).collect();
        let out = self.build_from(g, inputs, &leaves);
        Ok((out, leaves))
    }

    fn build_from(&self, g: &mut ExprGraph, inputs: &[Var], theta: &[Var]) -> Var {
        let mut h: Vec<Var> = inputs.to_vec();
        for s in &self.shapes {
            let mut next = Vec::with_capacity(s.outputs);
            for r in 0..s.outputs {
                let mut acc = theta[s.bias_offset() + r];
                for (c, &hc) in h.iter().enumerate() {
                    let t = g.mul(theta[s.offset + r * s.inputs + c], hc);
                    acc = g.add(acc, t);
                }
                next.push(s.activation.on_graph(g, acc));
            }
            h = next;
        }
        h[0]
    }
}

/// Plain per-point evaluation of `u(x; θ)`.
pub fn forward(params: &NetworkParams, x: &[f64]) -> Result<f64> {
    check_len(params.input_dim, x)?;
    let mut h = x.to_vec();
    for l in 0..params.num_layers() {
        let layer = params.layer(l);
        h = (0..layer.outputs)
            .map(|r| {
                let z = layer.bias[r]
                    + (0..layer.inputs)
                        .map(|c| layer.weight(r, c) * h[c])
                        .sum::<f64>();
                layer.activation.eval(z).0
            })
            .collect();
    }
    Ok(h[0])
}

impl GraphFn for NetworkParams {
    fn dim(&self) -> usize {
        self.input_dim
    }

    fn build(&self, g: &mut ExprGraph, inputs: &[Var]) -> Result<Var> {
        check_len(self.input_dim, inputs)?;
        let theta: Vec<Var> = self.values.iter().map(|&v| g.constant(v)).collect();
        Ok(self.build_from(g, inputs, &theta))
    }
}

impl ScalarField for NetworkParams {
    fn dim(&self) -> usize {
        self.input_dim
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        check_len(self.input_dim, x)?;
        let fwd = batch::forward_batch(self, x, Order::Value)?;
        Ok(fwd.value(0))
    }

    fn bundle(&self, x: &[f64]) -> Result<DerivativeBundle> {
        check_len(self.input_dim, x)?;
        let fwd = batch::forward_batch(self, x, Order::Hessian)?;
        Ok(fwd.bundle(0))
    }

    fn kink_sites(&self, x: &[f64], h: f64) -> Result<Vec<KinkSite>> {
        check_len(self.input_dim, x)?;
        let fwd = batch::forward_batch(self, x, Order::Gradient)?;
        Ok(fwd.relu_kinks(0, h))
    }
}
