use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, ArrayViewMut2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::{derive_seed, rng_from_seed};
use crate::signal::Spectrogram;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Tanh,
    LeakyRelu,
}

impl Activation {
    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
            Activation::LeakyRelu => "leaky_relu",
        }
    }

    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
            Activation::LeakyRelu => {
                if x > 0.0 {
                    x
                } else {
                    0.01 * x
                }
            }
        }
    }

    /// Derivative expressed through the pre-activation.
    fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => {
                let t = x.tanh();
                1.0 - t * t
            }
            Activation::LeakyRelu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.01
                }
            }
        }
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relu" => Ok(Activation::Relu),
            "tanh" => Ok(Activation::Tanh),
            "leaky_relu" => Ok(Activation::LeakyRelu),
            other => Err(Error::UnknownName {
                kind: "activation",
                name: other.to_string(),
            }),
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EncoderConfig {
    /// `(n_frames, n_bins)` of the input spectrograms.
    pub input_dims: (usize, usize),
    pub hidden_widths: Vec<usize>,
    pub embed_dim: usize,
    pub activation: Activation,
    pub seed: u64,
}

impl EncoderConfig {
    pub fn new(input_dims: (usize, usize)) -> Self {
        Self {
            input_dims,
            hidden_widths: vec![256, 128],
            embed_dim: 64,
            activation: Activation::Relu,
            seed: 0,
        }
    }

    pub fn input_len(&self) -> usize {
        self.input_dims.0 * self.input_dims.1
    }

    pub fn validate(&self) -> Result<()> {
        if self.embed_dim < 2 {
            return Err(Error::Config(format!(
                "embed_dim must be >= 2, got {}",
                self.embed_dim
            )));
        }
        if self.hidden_widths.is_empty() || self.hidden_widths.contains(&0) {
            return Err(Error::Config(
                "hidden_widths must be non-empty with positive widths".into(),
            ));
        }
        if self.input_len() == 0 {
            return Err(Error::Config("input_dims must be positive".into()));
        }
        Ok(())
    }
}

/// Position of one dense layer inside the flat parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerShape {
    pub fan_in: usize,
    pub fan_out: usize,
    /// Row-major `fan_out × fan_in` weights.
    pub weight_offset: usize,
    pub bias_offset: usize,
}

impl LayerShape {
    pub fn end(&self) -> usize {
        self.bias_offset + self.fan_out
    }
}

fn layer_shapes(
    widths: impl Iterator<Item = (usize, usize)>,
    mut offset: usize,
) -> Vec<LayerShape> {
    widths
        .map(|(fan_in, fan_out)| {
            let shape = LayerShape {
                fan_in,
                fan_out,
                weight_offset: offset,
                bias_offset: offset + fan_in * fan_out,
            };
            offset = shape.end();
            shape
        })
        .collect()
}

pub(crate) fn weight_view(params: &[f64], layer: LayerShape) -> ArrayView2<'_, f64> {
    ArrayView2::from_shape(
        (layer.fan_out, layer.fan_in),
        &params[layer.weight_offset..layer.bias_offset],
    )
    .expect("layer layout")
}

pub(crate) fn bias_view(params: &[f64], layer: LayerShape) -> ArrayView1<'_, f64> {
    ArrayView1::from(&params[layer.bias_offset..layer.end()])
}

fn weight_view_mut(params: &mut [f64], layer: LayerShape) -> ArrayViewMut2<'_, f64> {
    ArrayViewMut2::from_shape(
        (layer.fan_out, layer.fan_in),
        &mut params[layer.weight_offset..layer.bias_offset],
    )
    .expect("layer layout")
}

/// Adam moment accumulators for parameters and centers.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub m_params: Vec<f64>,
    pub v_params: Vec<f64>,
    pub m_centers: Vec<f64>,
    pub v_centers: Vec<f64>,
}

impl AdamState {
    pub fn new(n_params: usize, n_center_values: usize) -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            m_params: vec![0.0; n_params],
            v_params: vec![0.0; n_params],
            m_centers: vec![0.0; n_center_values],
            v_centers: vec![0.0; n_center_values],
        }
    }
}

/// Encoder, classifier head, class centers and optimizer state.
///
/// `parameters` holds the encoder layers in order, followed by the head
/// weights (`n_classes × embed_dim`) and head bias (`n_classes`).
#[derive(Debug, Clone, PartialEq)]
pub struct TrainState {
    pub config: EncoderConfig,
    pub parameters: Vec<f64>,
    pub n_classes: usize,
    /// `n_classes × embed_dim`.
    pub class_centers: Array2<f64>,
    pub optimizer: AdamState,
    pub step_count: u64,
}

impl TrainState {
    /// Fresh state with uniform fan-in initialization `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`
    /// for weights and zero biases.
    pub fn new(config: EncoderConfig, n_classes: usize) -> Result<Self> {
        config.validate()?;
        if n_classes == 0 {
            return Err(Error::Config("at least one class is required".into()));
        }
        let encoder = Self::encoder_layout(&config);
        let encoder_len = encoder.last().map_or(0, LayerShape::end);
        let head_len = n_classes * config.embed_dim + n_classes;
        let mut parameters = vec![0.0; encoder_len + head_len];
        let mut rng = rng_from_seed(derive_seed(config.seed, "encoder/init"));
        for layer in &encoder {
            let bound = 1.0 / (layer.fan_in as f64).sqrt();
            for w in &mut parameters[layer.weight_offset..layer.bias_offset] {
                *w = rng.random_range(-bound..bound);
            }
        }
        let head = LayerShape {
            fan_in: config.embed_dim,
            fan_out: n_classes,
            weight_offset: encoder_len,
            bias_offset: encoder_len + n_classes * config.embed_dim,
        };
        let bound = 1.0 / (config.embed_dim as f64).sqrt();
        for w in &mut parameters[head.weight_offset..head.bias_offset] {
            *w = rng.random_range(-bound..bound);
        }
        let n_params = parameters.len();
        let d = config.embed_dim;
        Ok(Self {
            config,
            parameters,
            n_classes,
            class_centers: Array2::zeros((n_classes, d)),
            optimizer: AdamState::new(n_params, n_classes * d),
            step_count: 0,
        })
    }

    fn encoder_layout(config: &EncoderConfig) -> Vec<LayerShape> {
        let mut dims = vec![config.input_len()];
        dims.extend(&config.hidden_widths);
        dims.push(config.embed_dim);
        layer_shapes(dims.windows(2).map(|w| (w[0], w[1])), 0)
    }

    pub fn encoder_layers(&self) -> Vec<LayerShape> {
        Self::encoder_layout(&self.config)
    }

    pub fn encoder_len(&self) -> usize {
        self.encoder_layers().last().map_or(0, LayerShape::end)
    }

    pub fn head_layer(&self) -> LayerShape {
        let start = self.encoder_len();
        LayerShape {
            fan_in: self.config.embed_dim,
            fan_out: self.n_classes,
            weight_offset: start,
            bias_offset: start + self.n_classes * self.config.embed_dim,
        }
    }

    pub fn embed_dim(&self) -> usize {
        self.config.embed_dim
    }

    /// Encoder weight matrices in layer order.
    pub fn weight_matrices(&self) -> Vec<ArrayView2<'_, f64>> {
        self.encoder_layers()
            .into_iter()
            .map(|l| weight_view(&self.parameters, l))
            .collect()
    }

    /// Sets the final encoder layer (weights and bias) to zero.
    pub fn zero_final_layer(&mut self) {
        if let Some(last) = self.encoder_layers().last().copied() {
            self.parameters[last.weight_offset..last.end()].fill(0.0);
        }
    }

    pub fn encode(&self, spec: &Spectrogram) -> Result<Array1<f64>> {
        if spec.dims() != self.config.input_dims {
            return Err(Error::DimensionMismatch {
                expected: self.config.input_len(),
                got: spec.n_frames() * spec.n_bins(),
            });
        }
        let x = Array2::from_shape_vec((1, self.config.input_len()), spec.flatten())
            .expect("flattened spectrogram");
        let z = self.embed_batch(x.view())?;
        Ok(z.row(0).to_owned())
    }

    /// Embeds a batch of flattened inputs (rows are samples).
    pub fn embed_batch(&self, inputs: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if inputs.ncols() != self.config.input_len() {
            return Err(Error::DimensionMismatch {
                expected: self.config.input_len(),
                got: inputs.ncols(),
            });
        }
        Ok(self.forward(inputs).embeddings)
    }

    pub fn logits(&self, embeddings: ArrayView2<'_, f64>) -> Array2<f64> {
        let head = self.head_layer();
        embeddings.dot(&weight_view(&self.parameters, head).t()) + bias_view(&self.parameters, head)
    }

    /// Closed-set prediction of the classifier head.
    pub fn predict(&self, embeddings: ArrayView2<'_, f64>) -> Vec<usize> {
        self.logits(embeddings)
            .rows()
            .into_iter()
            .map(|row| {
                let mut best = 0;
                for (i, &v) in row.iter().enumerate() {
                    if v > row[best] {
                        best = i;
                    }
                }
                best
            })
            .collect()
    }

    pub(crate) fn forward(&self, inputs: ArrayView2<'_, f64>) -> Forward {
        let act = self.config.activation;
        let layers = self.encoder_layers();
        let mut layer_inputs = Vec::with_capacity(layers.len());
        let mut pre_activations = Vec::with_capacity(layers.len());
        let mut h = inputs.to_owned();
        for (i, layer) in layers.iter().enumerate() {
            let a = h.dot(&weight_view(&self.parameters, *layer).t())
                + bias_view(&self.parameters, *layer);
            let is_last = i + 1 == layers.len();
            let next = if is_last {
                a.clone()
            } else {
                a.mapv(|v| act.apply(v))
            };
            layer_inputs.push(std::mem::replace(&mut h, next));
            pre_activations.push(a);
        }
        let logits = self.logits(h.view());
        Forward {
            layer_inputs,
            pre_activations,
            embeddings: h,
            logits,
        }
    }

    /// Backpropagates upstream gradients on embeddings and logits into a
    /// gradient over `parameters`.
    pub(crate) fn backward(
        &self,
        fwd: &Forward,
        grad_embeddings: &Array2<f64>,
        grad_logits: &Array2<f64>,
    ) -> Vec<f64> {
        let mut grad = vec![0.0; self.parameters.len()];
        let head = self.head_layer();
        weight_view_mut(&mut grad, head).assign(&grad_logits.t().dot(&fwd.embeddings));
        for (g, s) in grad[head.bias_offset..head.end()]
            .iter_mut()
            .zip(grad_logits.sum_axis(Axis(0)))
        {
            *g = s;
        }

        let mut upstream = grad_embeddings + &grad_logits.dot(&weight_view(&self.parameters, head));
        let layers = self.encoder_layers();
        let act = self.config.activation;
        for (i, layer) in layers.iter().enumerate().rev() {
            if i + 1 != layers.len() {
                upstream.zip_mut_with(&fwd.pre_activations[i], |g, &a| *g *= act.derivative(a));
            }
            weight_view_mut(&mut grad, *layer).assign(&upstream.t().dot(&fwd.layer_inputs[i]));
            for (g, s) in grad[layer.bias_offset..layer.end()]
                .iter_mut()
                .zip(upstream.sum_axis(Axis(0)))
            {
                *g = s;
            }
            if i > 0 {
                upstream = upstream.dot(&weight_view(&self.parameters, *layer));
            }
        }
        grad
    }

    /// Appends `extra` classes to the head, optimizer state and centers.
    /// New head rows are initialized like the rest of the head; new centers
    /// are set from `new_centers` (`extra × embed_dim`).
    pub fn grow_head(&mut self, new_centers: ArrayView2<'_, f64>, seed: u64) -> Result<()> {
        let extra = new_centers.nrows();
        let d = self.config.embed_dim;
        if new_centers.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: new_centers.ncols(),
            });
        }
        if extra == 0 {
            return Ok(());
        }
        let old = self.head_layer();
        let c_old = self.n_classes;
        let c_new = c_old + extra;
        let enc = old.weight_offset;

        let mut rng = rng_from_seed(seed);
        let bound = 1.0 / (d as f64).sqrt();
        let fresh: Vec<f64> = (0..extra * d)
            .map(|_| rng.random_range(-bound..bound))
            .collect();

        let rebuild = |src: &[f64], new_rows: &[f64]| -> Vec<f64> {
            let mut out = Vec::with_capacity(enc + c_new * d + c_new);
            out.extend_from_slice(&src[..enc]);
            out.extend_from_slice(&src[old.weight_offset..old.bias_offset]);
            out.extend_from_slice(new_rows);
            out.extend_from_slice(&src[old.bias_offset..old.end()]);
            out.extend(std::iter::repeat_n(0.0, extra));
            out
        };
        let zeros = vec![0.0; extra * d];
        self.parameters = rebuild(&self.parameters, &fresh);
        self.optimizer.m_params = rebuild(&self.optimizer.m_params, &zeros);
        self.optimizer.v_params = rebuild(&self.optimizer.v_params, &zeros);
        self.optimizer
            .m_centers
            .extend(std::iter::repeat_n(0.0, extra * d));
        self.optimizer
            .v_centers
            .extend(std::iter::repeat_n(0.0, extra * d));
        let mut centers = Array2::zeros((c_new, d));
        centers
            .slice_mut(ndarray::s![..c_old, ..])
            .assign(&self.class_centers);
        centers
            .slice_mut(ndarray::s![c_old.., ..])
            .assign(&new_centers);
        self.class_centers = centers;
        self.n_classes = c_new;
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.parameters.iter().all(|v| v.is_finite())
            && self.class_centers.iter().all(|v| v.is_finite())
    }
}

/// Activations cached by a forward pass.
pub(crate) struct Forward {
    pub layer_inputs: Vec<Array2<f64>>,
    pub pre_activations: Vec<Array2<f64>>,
    pub embeddings: Array2<f64>,
    pub logits: Array2<f64>,
}
