//! A small from-scratch neural-network engine: MLP and 1D-CNN forward and
//! backward passes over `(50, 14)` windows, weighted softmax cross-entropy,
//! Adam, early stopping, and learning-rate reduction.
//!
//! All production arithmetic is 32-bit for latency realism; parameter counts
//! are reported next to accuracy in the offline report.

mod adam;
mod bundle;
mod layers;
mod train;

pub use adam::{adam_update_slice, AdamConfig, AdamState};
pub use bundle::{load_bundle, save_bundle, ModelBundle};
pub use train::{train, EpochStats, TrainConfig, TrainingHistory};

use ndarray::{Array2, ArrayView3, NdFloat};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use layers::{softmax_rows, Act, Layer, ParamGrad};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Architecture {
    Mlp,
    Cnn1d,
}

impl std::fmt::Display for Architecture {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Architecture::Mlp => write!(f, "mlp"),
            Architecture::Cnn1d => write!(f, "cnn1d"),
        }
    }
}

impl std::str::FromStr for Architecture {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mlp" => Ok(Architecture::Mlp),
            "cnn1d" | "cnn" => Ok(Architecture::Cnn1d),
            other => Err(Error::Config(format!("unknown architecture {:?}", other))),
        }
    }
}

/// Shape description of a classifier over `(input_len, input_channels)`
/// windows with `num_classes` outputs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub architecture: Architecture,
    pub input_len: usize,
    pub input_channels: usize,
    /// Dense hidden widths (MLP only).
    pub hidden: Vec<usize>,
    /// Filters per convolution layer (CNN only).
    pub conv_filters: Vec<usize>,
    /// Convolution kernel width (CNN only).
    pub kernel: usize,
    pub num_classes: usize,
}

impl ModelSpec {
    /// Default MLP: flatten 700 -> 128 -> 64 -> 18.
    pub fn mlp() -> ModelSpec {
        ModelSpec {
            architecture: Architecture::Mlp,
            input_len: crate::preprocess::WINDOW_LEN,
            input_channels: crate::dataset::NUM_CHANNELS,
            hidden: vec![128, 64],
            conv_filters: vec![],
            kernel: 0,
            num_classes: crate::dataset::NUM_CLASSES,
        }
    }

    /// Default 1D-CNN: conv(32, k5) -> conv(64, k5) -> global average pool
    /// -> dense 18.
    pub fn cnn1d() -> ModelSpec {
        ModelSpec {
            architecture: Architecture::Cnn1d,
            input_len: crate::preprocess::WINDOW_LEN,
            input_channels: crate::dataset::NUM_CHANNELS,
            hidden: vec![],
            conv_filters: vec![32, 64],
            kernel: 5,
            num_classes: crate::dataset::NUM_CLASSES,
        }
    }

    pub fn for_architecture(arch: Architecture) -> ModelSpec {
        match arch {
            Architecture::Mlp => ModelSpec::mlp(),
            Architecture::Cnn1d => ModelSpec::cnn1d(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_classes < 2 {
            return Err(Error::Config("need at least two classes".to_string()));
        }
        if self.input_len == 0 || self.input_channels == 0 {
            return Err(Error::Config("input shape must be non-empty".to_string()));
        }
        match self.architecture {
            Architecture::Mlp => {
                if self.hidden.iter().any(|&h| h == 0) {
                    return Err(Error::Config("hidden widths must be positive".to_string()));
                }
            }
            Architecture::Cnn1d => {
                if self.conv_filters.is_empty() || self.conv_filters.iter().any(|&f| f == 0) {
                    return Err(Error::Config("conv filters must be positive".to_string()));
                }
                if self.kernel == 0 {
                    return Err(Error::Config("kernel width must be positive".to_string()));
                }
                let shrink = self.conv_filters.len() * (self.kernel - 1);
                if self.input_len <= shrink {
                    return Err(Error::Config(format!(
                        "input length {} too short for {} valid conv layers of kernel {}",
                        self.input_len,
                        self.conv_filters.len(),
                        self.kernel
                    )));
                }
            }
        }
        Ok(())
    }

    /// Builds a network with He-normal weights drawn from the given rng.
    fn build_with_rng<F: NdFloat>(&self, rng: &mut ChaCha8Rng) -> Result<Network<F>> {
        self.validate()?;
        let normal = Normal::new(0.0f64, 1.0).expect("unit normal");
        let mut he_matrix = |rows: usize, cols: usize, fan_in: usize| -> Array2<F> {
            let std = (2.0 / fan_in as f64).sqrt();
            Array2::from_shape_fn((rows, cols), |_| {
                F::from(normal.sample(rng) * std).unwrap()
            })
        };

        let mut layers: Vec<Layer<F>> = Vec::new();
        match self.architecture {
            Architecture::Mlp => {
                layers.push(Layer::Flatten);
                let mut width = self.input_len * self.input_channels;
                for &h in &self.hidden {
                    layers.push(Layer::Dense {
                        w: he_matrix(width, h, width),
                        b: ndarray::Array1::zeros(h),
                    });
                    layers.push(Layer::Relu);
                    width = h;
                }
                layers.push(Layer::Dense {
                    w: he_matrix(width, self.num_classes, width),
                    b: ndarray::Array1::zeros(self.num_classes),
                });
            }
            Architecture::Cnn1d => {
                let mut in_ch = self.input_channels;
                for &f in &self.conv_filters {
                    let fan_in = self.kernel * in_ch;
                    layers.push(Layer::Conv1d {
                        w: he_matrix(fan_in, f, fan_in),
                        b: ndarray::Array1::zeros(f),
                        kernel: self.kernel,
                        in_ch,
                        out_ch: f,
                    });
                    layers.push(Layer::Relu);
                    in_ch = f;
                }
                layers.push(Layer::GlobalAvgPool);
                layers.push(Layer::Dense {
                    w: he_matrix(in_ch, self.num_classes, in_ch),
                    b: ndarray::Array1::zeros(self.num_classes),
                });
            }
        }
        Ok(Network { spec: self.clone(), layers })
    }

    /// Builds an f32 network seeded for reproducible initialization.
    pub fn build(&self, seed: u64) -> Result<Network<f32>> {
        self.build_with_rng(&mut ChaCha8Rng::seed_from_u64(seed))
    }

    /// f64 twin of [`build`](Self::build), used by gradient checking.
    pub fn build_f64(&self, seed: u64) -> Result<Network<f64>> {
        self.build_with_rng(&mut ChaCha8Rng::seed_from_u64(seed))
    }
}

/// Loss, batch accuracy count, and parameter gradients of one batch.
pub struct LossOutput<F> {
    pub loss: f64,
    pub correct: usize,
    pub gradients: Gradients<F>,
}

/// Parameter gradients aligned with the network's layer list.
pub struct Gradients<F> {
    grads: Vec<Option<ParamGrad<F>>>,
}

impl<F: NdFloat> Gradients<F> {
    /// Flattened gradient slices in canonical order (per layer: w then b).
    pub fn slices(&self) -> Vec<&[F]> {
        let mut out = Vec::new();
        for g in self.grads.iter().flatten() {
            out.push(g.w.as_slice().expect("standard layout"));
            out.push(g.b.as_slice().expect("standard layout"));
        }
        out
    }

    pub fn scale(&mut self, factor: F) {
        for g in self.grads.iter_mut().flatten() {
            g.w.mapv_inplace(|v| v * factor);
            g.b.mapv_inplace(|v| v * factor);
        }
    }
}

/// A classifier: a spec plus its parameters.
#[derive(Debug, Clone)]
pub struct Network<F = f32> {
    pub spec: ModelSpec,
    layers: Vec<Layer<F>>,
}

impl<F: NdFloat> Network<F> {
    /// Flattened parameter slices in canonical order (per layer: w then b).
    pub fn param_slices(&self) -> Vec<&[F]> {
        let mut out = Vec::new();
        for layer in &self.layers {
            match layer {
                Layer::Dense { w, b } | Layer::Conv1d { w, b, .. } => {
                    out.push(w.as_slice().expect("standard layout"));
                    out.push(b.as_slice().expect("standard layout"));
                }
                _ => {}
            }
        }
        out
    }

    pub fn param_slices_mut(&mut self) -> Vec<&mut [F]> {
        let mut out = Vec::new();
        for layer in &mut self.layers {
            match layer {
                Layer::Dense { w, b } | Layer::Conv1d { w, b, .. } => {
                    out.push(w.as_slice_mut().expect("standard layout"));
                    out.push(b.as_slice_mut().expect("standard layout"));
                }
                _ => {}
            }
        }
        out
    }

    /// Total trainable parameter count.
    pub fn param_count(&self) -> usize {
        self.param_slices().iter().map(|s| s.len()).sum()
    }

    fn check_input(&self, x: &ArrayView3<F>) -> Result<()> {
        let (_, t, c) = x.dim();
        if t != self.spec.input_len || c != self.spec.input_channels {
            return Err(Error::Shape(format!(
                "expected windows of ({}, {}), got ({}, {})",
                self.spec.input_len, self.spec.input_channels, t, c
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("non-finite value in network input".to_string()));
        }
        Ok(())
    }

    /// Class posterior probabilities for a batch of windows `(B, T, C)`.
    /// Every output row is a distribution: non-negative, summing to one.
    pub fn forward(&self, x: ArrayView3<F>) -> Result<Array2<F>> {
        self.check_input(&x)?;
        let mut act = Act::Seq(x.to_owned());
        for layer in &self.layers {
            act = layer.forward(&act);
        }
        let mut logits = act.mat();
        softmax_rows(&mut logits);
        Ok(logits)
    }

    /// Weighted softmax cross-entropy over a batch plus gradients.
    ///
    /// Loss is `mean_i w[y_i] * (-ln p[y_i])`; gradients share the shapes of
    /// the parameters, in layer order.
    pub fn loss_and_gradients(
        &self,
        x: ArrayView3<F>,
        labels: &[usize],
        class_weights: &[F],
    ) -> Result<LossOutput<F>> {
        self.check_input(&x)?;
        let batch = x.dim().0;
        if labels.len() != batch {
            return Err(Error::Shape(format!(
                "batch of {} windows with {} labels",
                batch,
                labels.len()
            )));
        }
        if class_weights.len() != self.spec.num_classes {
            return Err(Error::Shape(format!(
                "{} class weights for {} classes",
                class_weights.len(),
                self.spec.num_classes
            )));
        }
        for &y in labels {
            if y >= self.spec.num_classes {
                return Err(Error::Label(y as i64));
            }
        }

        // forward, caching each layer's input
        let mut inputs: Vec<Act<F>> = Vec::with_capacity(self.layers.len());
        let mut act = Act::Seq(x.to_owned());
        for layer in &self.layers {
            let next = layer.forward(&act);
            inputs.push(act);
            act = next;
        }
        let mut probs = act.mat();
        softmax_rows(&mut probs);

        let mut loss = 0.0f64;
        let mut correct = 0usize;
        let inv_batch = F::one() / F::from(batch).unwrap();
        let mut dlogits = probs.clone();
        for (i, &y) in labels.iter().enumerate() {
            let w = class_weights[y];
            let p = probs[[i, y]];
            loss += (w.to_f64().unwrap()) * -(p.to_f64().unwrap().max(f64::MIN_POSITIVE)).ln();
            let row_argmax = argmax_row(&probs, i);
            if row_argmax == y {
                correct += 1;
            }
            let mut row = dlogits.row_mut(i);
            for (k, v) in row.iter_mut().enumerate() {
                let target = if k == y { F::one() } else { F::zero() };
                *v = w * (*v - target) * inv_batch;
            }
        }
        loss /= batch as f64;
        if !loss.is_finite() {
            return Err(Error::Data(format!("non-finite training loss {}", loss)));
        }

        // backward
        let mut grad: Act<F> = Act::Mat(dlogits);
        let mut grads: Vec<Option<ParamGrad<F>>> = vec![None; self.layers.len()];
        for (idx, layer) in self.layers.iter().enumerate().rev() {
            let (next_grad, pg) = layer.backward(&inputs[idx], grad);
            grads[idx] = pg;
            grad = next_grad;
        }
        Ok(LossOutput { loss, correct, gradients: Gradients { grads } })
    }
}

fn argmax_row<F: NdFloat>(m: &Array2<F>, row: usize) -> usize {
    let mut best = 0usize;
    let mut best_v = F::neg_infinity();
    for (k, &v) in m.row(row).iter().enumerate() {
        if v > best_v {
            best_v = v;
            best = k;
        }
    }
    best
}

impl Network<f32> {
    /// Applies one Adam update in place; `state` carries the moments and the
    /// step counter.
    pub fn adam_step(
        &mut self,
        state: &mut AdamState,
        gradients: &Gradients<f32>,
        learning_rate: f32,
        cfg: &AdamConfig,
    ) -> Result<()> {
        let grads = gradients.slices();
        let mut params = self.param_slices_mut();
        state.step_all(&mut params, &grads, learning_rate, cfg)
    }
}
