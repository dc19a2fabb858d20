use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2, Axis, Zip};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Tanh,
    Identity,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Identity => z,
        }
    }

    /// Derivative expressed through the activation output `y`.
    #[inline]
    fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - y * y,
            Activation::Identity => 1.0,
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            Activation::Tanh => "tanh",
            Activation::Identity => "identity",
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tanh" => Ok(Activation::Tanh),
            "identity" => Ok(Activation::Identity),
            other => Err(Error::InvalidArgument(format!(
                "unknown activation tag `{other}`"
            ))),
        }
    }
}

/// Multi-layer perceptron with tanh hidden units.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layer_sizes: Vec<usize>,
    weights: Vec<Array2<f64>>,
    biases: Vec<Array1<f64>>,
    hidden_activation: Activation,
    output_activation: Activation,
}

/// Per-layer activations recorded by [`Mlp::forward`] for the backward pass.
///
/// `activations[0]` is the input batch and `activations[l + 1]` is the
/// output of layer `l`.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    activations: Vec<Array2<f64>>,
}

impl ForwardCache {
    pub fn batch_size(&self) -> usize {
        self.activations[0].nrows()
    }

    pub fn output(&self) -> &Array2<f64> {
        self.activations.last().expect("cache always holds the input")
    }
}

/// Parameter-shaped container used for gradients and optimizer moments.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

impl Gradients {
    pub fn zeros_like(net: &Mlp) -> Self {
        Gradients {
            weights: net.weights.iter().map(|w| Array2::zeros(w.raw_dim())).collect(),
            biases: net.biases.iter().map(|b| Array1::zeros(b.raw_dim())).collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().all(|w| w.iter().all(|v| v.is_finite()))
            && self.biases.iter().all(|b| b.iter().all(|v| v.is_finite()))
    }

    pub(crate) fn matches(&self, net: &Mlp) -> bool {
        self.weights.len() == net.weights.len()
            && self.biases.len() == net.biases.len()
            && self
                .weights
                .iter()
                .zip(&net.weights)
                .all(|(g, w)| g.dim() == w.dim())
            && self
                .biases
                .iter()
                .zip(&net.biases)
                .all(|(g, b)| g.dim() == b.dim())
    }
}

impl Mlp {
    /// Build a network with weights drawn uniformly in `±1/√fan_in` and zero biases.
    pub fn new(layer_sizes: &[usize], output_activation: Activation, seed: u64) -> Result<Self> {
        if layer_sizes.len() < 2 {
            return Err(Error::InvalidArgument(
                "an MLP needs at least an input and an output size".into(),
            ));
        }
        if layer_sizes.contains(&0) {
            return Err(Error::InvalidArgument(format!(
                "layer sizes must be positive, got {layer_sizes:?}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut weights = Vec::with_capacity(layer_sizes.len() - 1);
        let mut biases = Vec::with_capacity(layer_sizes.len() - 1);
        for pair in layer_sizes.windows(2) {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let limit = 1.0 / (fan_in as f64).sqrt();
            let w = Array2::from_shape_simple_fn((fan_out, fan_in), || {
                rng.random_range(-limit..limit)
            });
            weights.push(w);
            biases.push(Array1::zeros(fan_out));
        }
        Ok(Mlp {
            layer_sizes: layer_sizes.to_vec(),
            weights,
            biases,
            hidden_activation: Activation::Tanh,
            output_activation,
        })
    }

    /// Assemble a network from explicit parameters (checkpoint loading, tests).
    pub fn from_parts(
        weights: Vec<Array2<f64>>,
        biases: Vec<Array1<f64>>,
        output_activation: Activation,
    ) -> Result<Self> {
        if weights.is_empty() || weights.len() != biases.len() {
            return Err(Error::ShapeMismatch(
                "need one bias vector per weight matrix".into(),
            ));
        }
        let mut layer_sizes = vec![weights[0].ncols()];
        for (i, (w, b)) in weights.iter().zip(&biases).enumerate() {
            if w.ncols() != *layer_sizes.last().unwrap() || w.nrows() != b.len() {
                return Err(Error::ShapeMismatch(format!("layer {i} does not chain")));
            }
            if w.nrows() == 0 || w.ncols() == 0 {
                return Err(Error::InvalidArgument(format!("layer {i} is empty")));
            }
            layer_sizes.push(w.nrows());
        }
        let net = Mlp {
            layer_sizes,
            weights,
            biases,
            hidden_activation: Activation::Tanh,
            output_activation,
        };
        if !net.is_finite() {
            return Err(Error::NonFinite("network parameters".into()));
        }
        Ok(net)
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    pub fn num_layers(&self) -> usize {
        self.weights.len()
    }

    pub fn hidden_activation(&self) -> Activation {
        self.hidden_activation
    }

    pub fn output_activation(&self) -> Activation {
        self.output_activation
    }

    pub fn weights(&self) -> &[Array2<f64>] {
        &self.weights
    }

    pub fn biases(&self) -> &[Array1<f64>] {
        &self.biases
    }

    pub fn weights_mut(&mut self) -> &mut [Array2<f64>] {
        &mut self.weights
    }

    pub fn biases_mut(&mut self) -> &mut [Array1<f64>] {
        &mut self.biases
    }

    pub fn num_params(&self) -> usize {
        self.weights.iter().map(|w| w.len()).sum::<usize>()
            + self.biases.iter().map(|b| b.len()).sum::<usize>()
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().all(|w| w.iter().all(|v| v.is_finite()))
            && self.biases.iter().all(|b| b.iter().all(|v| v.is_finite()))
    }

    pub fn same_shape(&self, other: &Mlp) -> bool {
        self.layer_sizes == other.layer_sizes && self.output_activation == other.output_activation
    }

    fn activation_of(&self, layer: usize) -> Activation {
        if layer + 1 == self.weights.len() {
            self.output_activation
        } else {
            self.hidden_activation
        }
    }

    fn check_input(&self, input: &Array2<f64>) -> Result<()> {
        if input.ncols() != self.input_dim() {
            return Err(Error::ShapeMismatch(format!(
                "input has width {}, network expects {}",
                input.ncols(),
                self.input_dim()
            )));
        }
        if !input.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("network input".into()));
        }
        Ok(())
    }

    fn layer_forward(&self, layer: usize, x: &Array2<f64>) -> Array2<f64> {
        let mut z = x.dot(&self.weights[layer].t());
        z += &self.biases[layer];
        let act = self.activation_of(layer);
        if act != Activation::Identity {
            z.mapv_inplace(|v| act.apply(v));
        }
        z
    }

    /// Forward pass keeping every intermediate activation.
    pub fn forward(&self, input: &Array2<f64>) -> Result<(Array2<f64>, ForwardCache)> {
        self.check_input(input)?;
        let mut activations = Vec::with_capacity(self.weights.len() + 1);
        activations.push(input.clone());
        for layer in 0..self.weights.len() {
            let next = self.layer_forward(layer, &activations[layer]);
            activations.push(next);
        }
        let output = activations.last().unwrap().clone();
        Ok((output, ForwardCache { activations }))
    }

    /// Forward pass without a cache.
    pub fn predict(&self, input: &Array2<f64>) -> Result<Array2<f64>> {
        self.check_input(input)?;
        let mut x = self.layer_forward(0, input);
        for layer in 1..self.weights.len() {
            x = self.layer_forward(layer, &x);
        }
        Ok(x)
    }

    /// Single-row convenience wrapper around [`Mlp::predict`].
    pub fn predict_one(&self, input: &[f64]) -> Result<Vec<f64>> {
        let x = Array2::from_shape_vec((1, input.len()), input.to_vec())
            .map_err(|e| Error::ShapeMismatch(e.to_string()))?;
        Ok(self.predict(&x)?.into_raw_vec_and_offset().0)
    }

    /// Reverse pass for the scalar `Σ output ⊙ output_grad`.
    ///
    /// Returns the parameter gradients and the gradient with respect to the
    /// input batch.
    pub fn backward(
        &self,
        cache: &ForwardCache,
        output_grad: &Array2<f64>,
    ) -> Result<(Gradients, Array2<f64>)> {
        let n_layers = self.weights.len();
        if cache.activations.len() != n_layers + 1
            || cache
                .activations
                .iter()
                .zip(&self.layer_sizes)
                .any(|(a, &width)| a.ncols() != width)
        {
            return Err(Error::ShapeMismatch(
                "forward cache does not belong to this network".into(),
            ));
        }
        let out = cache.output();
        if output_grad.dim() != out.dim() {
            return Err(Error::ShapeMismatch(format!(
                "output gradient is {:?}, output is {:?}",
                output_grad.dim(),
                out.dim()
            )));
        }

        let mut grads = Gradients {
            weights: Vec::with_capacity(n_layers),
            biases: Vec::with_capacity(n_layers),
        };
        let mut delta = output_grad.clone();
        for layer in (0..n_layers).rev() {
            let act = self.activation_of(layer);
            if act != Activation::Identity {
                Zip::from(&mut delta)
                    .and(&cache.activations[layer + 1])
                    .for_each(|d, &y| *d *= act.derivative_from_output(y));
            }
            let x = &cache.activations[layer];
            grads.weights.push(delta.t().dot(x));
            grads.biases.push(delta.sum_axis(Axis(0)));
            delta = delta.dot(&self.weights[layer]);
        }
        grads.weights.reverse();
        grads.biases.reverse();
        Ok((grads, delta))
    }
}
