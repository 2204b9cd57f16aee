use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Hidden widths of the default head.
pub const DEFAULT_HIDDEN: [usize; 5] = [512, 256, 128, 64, 32];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Relu,
}

/// Weights (`fan_in × fan_out`) and biases of every layer. Also used for
/// gradients and optimizer moments.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

impl Params {
    pub fn zeros(layer_dims: &[usize]) -> Self {
        let (weights, biases) = layer_dims
            .windows(2)
            .map(|w| (Array2::zeros((w[0], w[1])), Array1::zeros(w[1])))
            .unzip();
        Self { weights, biases }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            weights: self.weights.iter().map(|w| Array2::zeros(w.raw_dim())).collect(),
            biases: self.biases.iter().map(|b| Array1::zeros(b.raw_dim())).collect(),
        }
    }

    pub fn same_shape(&self, other: &Params) -> bool {
        self.weights.len() == other.weights.len()
            && self.weights.iter().zip(&other.weights).all(|(a, b)| a.dim() == b.dim())
            && self.biases.iter().zip(&other.biases).all(|(a, b)| a.dim() == b.dim())
    }

    pub fn len(&self) -> usize {
        self.weights.iter().map(|w| w.len()).sum::<usize>()
            + self.biases.iter().map(|b| b.len()).sum::<usize>()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Per layer: weights row-major, then biases.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend(w.iter());
            out.extend(b.iter());
        }
        out
    }

    pub fn from_flat(layer_dims: &[usize], flat: &[f64]) -> Result<Self> {
        let mut p = Self::zeros(layer_dims);
        if flat.len() != p.len() {
            return Err(Error::DimensionMismatch {
                expected: p.len(),
                found: flat.len(),
            });
        }
        let mut it = flat.iter();
        for (w, b) in p.weights.iter_mut().zip(p.biases.iter_mut()) {
            w.iter_mut().chain(b.iter_mut()).for_each(|x| *x = *it.next().unwrap());
        }
        Ok(p)
    }

    pub fn scalars_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.weights
            .iter_mut()
            .zip(self.biases.iter_mut())
            .flat_map(|(w, b)| w.iter_mut().chain(b.iter_mut()))
    }

    pub fn scale(&mut self, c: f64) {
        self.scalars_mut().for_each(|x| *x *= c);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpClassifier {
    layer_dims: Vec<usize>,
    params: Params,
    activation: Activation,
}

/// Forward activations kept for backpropagation: `inputs[l]` is the input of
/// layer `l`, `logits` the output of the last.
pub(crate) struct ForwardCache {
    pub inputs: Vec<Array2<f64>>,
    pub logits: Array2<f64>,
}

impl MlpClassifier {
    /// `input_dim → 512 → 256 → 128 → 64 → 32 → class_count`.
    pub fn new(input_dim: usize, class_count: usize, seed: u64) -> Result<Self> {
        Self::with_hidden(input_dim, &DEFAULT_HIDDEN, class_count, seed)
    }

    /// He-uniform weights (`U(±√(6/fan_in))`), zero biases.
    pub fn with_hidden(
        input_dim: usize,
        hidden: &[usize],
        class_count: usize,
        seed: u64,
    ) -> Result<Self> {
        if input_dim == 0 || class_count < 2 || hidden.contains(&0) {
            return Err(Error::invalid(format!(
                "invalid layer spec: input {input_dim}, hidden {hidden:?}, classes {class_count}"
            )));
        }
        let layer_dims: Vec<usize> = std::iter::once(input_dim)
            .chain(hidden.iter().copied())
            .chain(std::iter::once(class_count))
            .collect();
        let mut r = rng::stream(seed, &[rng::tag::INIT]);
        let mut params = Params::zeros(&layer_dims);
        for w in &mut params.weights {
            let limit = (6.0 / w.nrows() as f64).sqrt();
            w.mapv_inplace(|_| r.random_range(-limit..limit));
        }
        Ok(Self {
            layer_dims,
            params,
            activation: Activation::Relu,
        })
    }

    pub fn from_params(layer_dims: Vec<usize>, params: Params, activation: Activation) -> Result<Self> {
        if layer_dims.len() < 2 || !params.same_shape(&Params::zeros(&layer_dims)) {
            return Err(Error::invalid("parameters do not match the layer dims"));
        }
        if params.weights.iter().any(|w| w.iter().any(|v| !v.is_finite()))
            || params.biases.iter().any(|b| b.iter().any(|v| !v.is_finite()))
        {
            return Err(Error::invalid("non-finite parameter"));
        }
        Ok(Self {
            layer_dims,
            params,
            activation,
        })
    }

    pub fn layer_dims(&self) -> &[usize] {
        &self.layer_dims
    }

    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn class_count(&self) -> usize {
        *self.layer_dims.last().expect("at least two layers")
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut Params {
        &mut self.params
    }

    pub fn parameter_count(&self) -> usize {
        self.params.len()
    }

    fn check_input(&self, batch: &ArrayView2<f64>) -> Result<()> {
        if batch.ncols() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                found: batch.ncols(),
            });
        }
        Ok(())
    }

    /// Logits, `n × class_count`.
    pub fn forward(&self, batch: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_input(&batch)?;
        let last = self.params.weights.len() - 1;
        let mut a = batch.to_owned();
        for (l, (w, b)) in self.params.weights.iter().zip(&self.params.biases).enumerate() {
            a = a.dot(w) + b;
            if l < last {
                a.mapv_inplace(relu);
            }
        }
        Ok(a)
    }

    pub(crate) fn forward_cached(&self, batch: ArrayView2<f64>) -> Result<ForwardCache> {
        self.check_input(&batch)?;
        let last = self.params.weights.len() - 1;
        let mut inputs = Vec::with_capacity(last + 1);
        let mut a = batch.to_owned();
        for (l, (w, b)) in self.params.weights.iter().zip(&self.params.biases).enumerate() {
            let mut z = a.dot(w) + b;
            if l < last {
                z.mapv_inplace(relu);
            }
            inputs.push(a);
            a = z;
        }
        Ok(ForwardCache { inputs, logits: a })
    }

    /// Backpropagates `d_logits` (gradient of the loss w.r.t. the logits)
    /// through the cached forward pass.
    pub(crate) fn backward(&self, cache: &ForwardCache, d_logits: Array2<f64>) -> Params {
        let mut grads = self.params.zeros_like();
        let mut delta = d_logits;
        for l in (0..self.params.weights.len()).rev() {
            let input = &cache.inputs[l];
            grads.weights[l] = input.t().dot(&delta);
            grads.biases[l] = delta.sum_axis(Axis(0));
            if l > 0 {
                let mut prev = delta.dot(&self.params.weights[l].t());
                // `input` is the post-ReLU activation of layer l-1: zero exactly
                // where the pre-activation was non-positive.
                Zip::from(&mut prev).and(input).for_each(|d, &a| {
                    if a <= 0.0 {
                        *d = 0.0;
                    }
                });
                delta = prev;
            }
        }
        grads
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        Checkpoint {
            format_version: Checkpoint::FORMAT_VERSION,
            layer_dims: self.layer_dims.clone(),
            activation: self.activation,
            parameters: self.params.flatten(),
        }
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        if ckpt.format_version != Checkpoint::FORMAT_VERSION {
            return Err(Error::invalid(format!(
                "unsupported checkpoint format {}",
                ckpt.format_version
            )));
        }
        let params = Params::from_flat(&ckpt.layer_dims, &ckpt.parameters)?;
        Self::from_params(ckpt.layer_dims.clone(), params, ckpt.activation)
    }
}

fn relu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

/// JSON model checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub layer_dims: Vec<usize>,
    pub activation: Activation,
    pub parameters: Vec<f64>,
}

impl Checkpoint {
    pub const FORMAT_VERSION: u32 = 1;
}
