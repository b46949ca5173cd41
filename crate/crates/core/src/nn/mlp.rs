//! Dense feed-forward network with a linear output layer.
//!
//! Parameters live in one flat buffer. Layer `l` occupies a contiguous block:
//! the row-major weight matrix `(out, in)` followed by the bias vector `(out)`.
//! Gradients use the same layout, so an optimizer only needs slices.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Tanh,
    Sigmoid,
    Relu,
    Linear,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Sigmoid => 1.0 / (1.0 + (-x).exp()),
            Activation::Relu => x.max(0.0),
            Activation::Linear => x,
        }
    }

    /// Derivative expressed through the pre-activation `z` and output `a`.
    fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - a * a,
            Activation::Sigmoid => a * (1.0 - a),
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Linear => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MlpDoc", into = "MlpDoc")]
pub struct Mlp {
    dims: Vec<usize>,
    hidden: Activation,
    params: Vec<f64>,
}

/// Activations recorded by a forward pass, consumed by [`Mlp::backward`].
#[derive(Debug, Clone)]
pub struct Trace {
    /// `activations[0]` is the input, the last entry is the output.
    activations: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
}

impl Trace {
    pub fn output(&self) -> &[f64] {
        self.activations.last().expect("trace has an output")
    }

    pub fn input(&self) -> &[f64] {
        &self.activations[0]
    }
}

fn check_dims(dims: &[usize]) -> Result<()> {
    if dims.len() < 2 || dims.contains(&0) {
        return Err(Error::Config(format!(
            "layer dims need at least an input and an output, all positive: {dims:?}"
        )));
    }
    Ok(())
}

fn param_count(dims: &[usize]) -> usize {
    dims.windows(2).map(|w| w[1] * w[0] + w[1]).sum()
}

impl Mlp {
    /// Glorot-uniform weights, zero biases.
    pub fn new(dims: &[usize], hidden: Activation, seed: u64) -> Result<Self> {
        let mut mlp = Mlp::zeros(dims, hidden)?;
        let mut rng = crate::seed::rng(seed);
        for l in 0..mlp.num_layers() {
            let (fan_in, fan_out) = (dims[l], dims[l + 1]);
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let (w, _) = mlp.layer_ranges(l);
            for p in &mut mlp.params[w] {
                *p = rng.random_range(-bound..bound);
            }
        }
        Ok(mlp)
    }

    pub fn zeros(dims: &[usize], hidden: Activation) -> Result<Self> {
        check_dims(dims)?;
        Ok(Mlp {
            dims: dims.to_vec(),
            hidden,
            params: vec![0.0; param_count(dims)],
        })
    }

    /// Builds a network from explicit `(row-major weights, biases)` per layer.
    pub fn from_layers(dims: &[usize], hidden: Activation, layers: &[(Vec<f64>, Vec<f64>)]) -> Result<Self> {
        check_dims(dims)?;
        if layers.len() != dims.len() - 1 {
            return Err(Error::Shape {
                context: "layer count",
                expected: dims.len() - 1,
                got: layers.len(),
            });
        }
        let mut params = Vec::with_capacity(param_count(dims));
        for (l, (w, b)) in layers.iter().enumerate() {
            if w.len() != dims[l] * dims[l + 1] {
                return Err(Error::Shape {
                    context: "weight matrix",
                    expected: dims[l] * dims[l + 1],
                    got: w.len(),
                });
            }
            if b.len() != dims[l + 1] {
                return Err(Error::Shape {
                    context: "bias vector",
                    expected: dims[l + 1],
                    got: b.len(),
                });
            }
            params.extend_from_slice(w);
            params.extend_from_slice(b);
        }
        Ok(Mlp {
            dims: dims.to_vec(),
            hidden,
            params,
        })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.dims.last().expect("dims validated")
    }

    pub fn hidden_activation(&self) -> Activation {
        self.hidden
    }

    pub fn num_layers(&self) -> usize {
        self.dims.len() - 1
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn layer_ranges(&self, layer: usize) -> (std::ops::Range<usize>, std::ops::Range<usize>) {
        let start = param_count(&self.dims[..=layer]);
        let (n_in, n_out) = (self.dims[layer], self.dims[layer + 1]);
        let w = start..start + n_in * n_out;
        let b = w.end..w.end + n_out;
        (w, b)
    }

    pub fn weights(&self, layer: usize) -> &[f64] {
        &self.params[self.layer_ranges(layer).0]
    }

    pub fn biases(&self, layer: usize) -> &[f64] {
        &self.params[self.layer_ranges(layer).1]
    }

    fn activation_of(&self, layer: usize) -> Activation {
        if layer + 1 == self.num_layers() {
            Activation::Linear
        } else {
            self.hidden
        }
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut trace = self.forward_trace(x)?;
        Ok(trace.activations.pop().expect("output"))
    }

    pub fn forward_trace(&self, x: &[f64]) -> Result<Trace> {
        if x.len() != self.input_dim() {
            return Err(Error::Shape {
                context: "network input",
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        let mut activations = Vec::with_capacity(self.dims.len());
        let mut pre = Vec::with_capacity(self.num_layers());
        activations.push(x.to_vec());
        for l in 0..self.num_layers() {
            let (n_in, n_out) = (self.dims[l], self.dims[l + 1]);
            let w = self.weights(l);
            let b = self.biases(l);
            let input = &activations[l];
            let z: Vec<f64> = (0..n_out)
                .map(|o| {
                    let row = &w[o * n_in..(o + 1) * n_in];
                    b[o] + row.iter().zip(input).map(|(wi, xi)| wi * xi).sum::<f64>()
                })
                .collect();
            let act = self.activation_of(l);
            let a = z.iter().map(|&v| act.apply(v)).collect();
            pre.push(z);
            activations.push(a);
        }
        Ok(Trace { activations, pre })
    }

    /// Reverse pass. Adds `∂L/∂θ` into `grads` (flat parameter layout) and
    /// returns `∂L/∂x`.
    pub fn backward_into(&self, trace: &Trace, upstream: &[f64], grads: &mut [f64]) -> Result<Vec<f64>> {
        if upstream.len() != self.output_dim() {
            return Err(Error::Shape {
                context: "upstream gradient",
                expected: self.output_dim(),
                got: upstream.len(),
            });
        }
        if grads.len() != self.params.len() {
            return Err(Error::Shape {
                context: "gradient buffer",
                expected: self.params.len(),
                got: grads.len(),
            });
        }
        if trace.activations.len() != self.dims.len() || trace.input().len() != self.input_dim() {
            return Err(Error::Shape {
                context: "forward trace",
                expected: self.dims.len(),
                got: trace.activations.len(),
            });
        }
        let mut delta_out: Vec<f64> = upstream.to_vec();
        for l in (0..self.num_layers()).rev() {
            let (n_in, n_out) = (self.dims[l], self.dims[l + 1]);
            let act = self.activation_of(l);
            let delta: Vec<f64> = (0..n_out)
                .map(|o| delta_out[o] * act.derivative(trace.pre[l][o], trace.activations[l + 1][o]))
                .collect();
            let input = &trace.activations[l];
            let (w_range, b_range) = self.layer_ranges(l);
            {
                let gw = &mut grads[w_range.clone()];
                for o in 0..n_out {
                    for i in 0..n_in {
                        gw[o * n_in + i] += delta[o] * input[i];
                    }
                }
            }
            for (g, d) in grads[b_range].iter_mut().zip(&delta) {
                *g += d;
            }
            let w = &self.params[w_range];
            delta_out = (0..n_in)
                .map(|i| (0..n_out).map(|o| w[o * n_in + i] * delta[o]).sum())
                .collect();
        }
        Ok(delta_out)
    }

    /// `(∂L/∂θ, ∂L/∂x)` for a single input.
    pub fn backward(&self, trace: &Trace, upstream: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let mut grads = vec![0.0; self.params.len()];
        let input_grad = self.backward_into(trace, upstream, &mut grads)?;
        Ok((grads, input_grad))
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().all(|p| p.is_finite())
    }
}

#[derive(Serialize, Deserialize)]
struct LayerDoc {
    /// Row-major `(out, in)`.
    weights: Vec<Vec<f64>>,
    biases: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct MlpDoc {
    layer_dims: Vec<usize>,
    hidden_activation: Activation,
    output_activation: Activation,
    layers: Vec<LayerDoc>,
}

impl From<Mlp> for MlpDoc {
    fn from(m: Mlp) -> Self {
        let layers = (0..m.num_layers())
            .map(|l| LayerDoc {
                weights: m.weights(l).chunks(m.dims[l]).map(<[f64]>::to_vec).collect(),
                biases: m.biases(l).to_vec(),
            })
            .collect();
        MlpDoc {
            layer_dims: m.dims.clone(),
            hidden_activation: m.hidden,
            output_activation: Activation::Linear,
            layers,
        }
    }
}

impl TryFrom<MlpDoc> for Mlp {
    type Error = Error;

    fn try_from(doc: MlpDoc) -> Result<Self> {
        if doc.output_activation != Activation::Linear {
            return Err(Error::Config("only linear output layers are supported".into()));
        }
        let layers: Vec<(Vec<f64>, Vec<f64>)> = doc
            .layers
            .into_iter()
            .map(|l| (l.weights.concat(), l.biases))
            .collect();
        let mlp = Mlp::from_layers(&doc.layer_dims, doc.hidden_activation, &layers)?;
        if !mlp.is_finite() {
            return Err(Error::Config("network parameters must be finite".into()));
        }
        Ok(mlp)
    }
}
