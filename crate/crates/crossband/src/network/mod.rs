//! The detector network: six convolutions and a two-layer head.
//!
//! Layer ladder (fixed; only the widths vary between configurations):
//!
//! ```text
//! conv 3x3 -> ReLU
//! conv 5x5 -> maxpool 2x2/2
//! conv 3x3 -> ReLU
//! conv 5x5 -> maxpool 2x2/2
//! conv 3x3 -> ReLU
//! conv 5x5 -> maxpool 2x2/2
//! flatten -> dense -> ReLU -> dense(1) -> sigmoid
//! ```
//!
//! Convolutions are "same"-padded with unit stride, so three pools take a
//! 256-side input to 32 and the flattened width is `(side/8)^2 * filters[5]`.
//! The loss is binary cross-entropy over the sigmoid score with the
//! probability clamped to `[1e-7, 1 - 1e-7]`.
//!
//! Everything is generic over the scalar: `f32` for training, `f64` for
//! gradient verification (see the crate-root aliases).

mod checkpoint;
mod layers;
mod train;

pub use checkpoint::{load_model, load_model_expecting, read_model, save_model, write_model};
pub use train::{
    evaluate, metrics_to_text, train, DenseSamples, EpochMetrics, SampleSource, TrainConfig,
    TrainOutcome, DECISION_THRESHOLD,
};

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use layers::{
    conv_backward_input, conv_backward_params, conv_forward, dense_backward, dense_forward,
    maxpool_backward, maxpool_forward, relu_backward, relu_inplace,
};

/// Number of convolution layers in the ladder.
pub const CONV_LAYERS: usize = 6;

/// Kernel sizes along the ladder.
pub const KERNEL_SIZES: [usize; CONV_LAYERS] = [3, 5, 3, 5, 3, 5];

/// Probability clamp for the cross-entropy loss.
const PROB_EPS: f64 = 1e-7;

/// How many batch items are processed concurrently. Gradient buffers are
/// allocated per in-flight item, so this bounds peak memory; the reduction
/// order is fixed by item index either way.
const ITEM_CHUNK: usize = 4;

/// Network structure: input channels, spatial side, filter widths, head width.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub in_channels: usize,
    pub input_size: usize,
    pub conv_filters: [usize; CONV_LAYERS],
    pub dense_width: usize,
}

impl ModelConfig {
    /// Full-size cross-band detector: 6-channel 256x256 input.
    pub fn cross_conet() -> Self {
        ModelConfig {
            in_channels: 6,
            input_size: 256,
            conv_filters: [32, 32, 64, 64, 128, 128],
            dense_width: 256,
        }
    }

    /// Full-size intra-band baseline: 3-channel 256x256 input.
    pub fn conet() -> Self {
        ModelConfig {
            in_channels: 3,
            ..Self::cross_conet()
        }
    }

    /// Down-scaled ladder for tests and toy runs: `filters` everywhere.
    pub fn reduced(in_channels: usize, input_size: usize, filters: usize, dense_width: usize) -> Self {
        ModelConfig {
            in_channels,
            input_size,
            conv_filters: [filters; CONV_LAYERS],
            dense_width,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.in_channels == 0 {
            return Err(Error::Config("in_channels must be at least 1".into()));
        }
        if self.input_size < 8 || self.input_size % 8 != 0 {
            return Err(Error::Config(format!(
                "input size must be a positive multiple of 8 (three 2x2 pools), got {}",
                self.input_size
            )));
        }
        if self.conv_filters.iter().any(|&f| f == 0) || self.dense_width == 0 {
            return Err(Error::Config("layer widths must be at least 1".into()));
        }
        Ok(())
    }

    /// Spatial side at the input of each conv layer.
    fn conv_sides(&self) -> [usize; CONV_LAYERS] {
        let s = self.input_size;
        [s, s, s / 2, s / 2, s / 4, s / 4]
    }

    /// Input channel count of each conv layer.
    fn conv_in_channels(&self) -> [usize; CONV_LAYERS] {
        [
            self.in_channels,
            self.conv_filters[0],
            self.conv_filters[1],
            self.conv_filters[2],
            self.conv_filters[3],
            self.conv_filters[4],
        ]
    }

    /// Width of the flattened feature vector feeding the head.
    pub fn flatten_width(&self) -> usize {
        let s = self.input_size / 8;
        s * s * self.conv_filters[CONV_LAYERS - 1]
    }

    /// Shapes of all eight parameterized layers, in order.
    pub fn layer_shapes(&self) -> Vec<LayerShape> {
        let sides = self.conv_in_channels();
        let mut shapes: Vec<LayerShape> = (0..CONV_LAYERS)
            .map(|i| LayerShape::Conv {
                out_c: self.conv_filters[i],
                in_c: sides[i],
                k: KERNEL_SIZES[i],
            })
            .collect();
        shapes.push(LayerShape::Dense {
            out_d: self.dense_width,
            in_d: self.flatten_width(),
        });
        shapes.push(LayerShape::Dense {
            out_d: 1,
            in_d: self.dense_width,
        });
        shapes
    }

    /// Total number of trainable parameters.
    pub fn param_count(&self) -> usize {
        self.layer_shapes().iter().map(|s| s.weights() + s.biases()).sum()
    }
}

/// Shape of one parameterized layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerShape {
    Conv { out_c: usize, in_c: usize, k: usize },
    Dense { out_d: usize, in_d: usize },
}

impl LayerShape {
    pub fn weights(&self) -> usize {
        match *self {
            LayerShape::Conv { out_c, in_c, k } => out_c * in_c * k * k,
            LayerShape::Dense { out_d, in_d } => out_d * in_d,
        }
    }

    pub fn biases(&self) -> usize {
        match *self {
            LayerShape::Conv { out_c, .. } => out_c,
            LayerShape::Dense { out_d, .. } => out_d,
        }
    }

    /// Fan-in used for initialization scaling.
    fn fan_in(&self) -> usize {
        match *self {
            LayerShape::Conv { in_c, k, .. } => in_c * k * k,
            LayerShape::Dense { in_d, .. } => in_d,
        }
    }
}

/// Weights, biases, and momentum buffers of one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams<F> {
    pub w: Vec<F>,
    pub b: Vec<F>,
    pub vw: Vec<F>,
    pub vb: Vec<F>,
}

/// All trainable parameters plus optimizer momentum state, layer by layer in
/// ladder order (six convolutions, then the two dense layers).
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<F> {
    pub layers: Vec<LayerParams<F>>,
}

/// Per-layer loss gradients, in the same order as [`ModelParams::layers`].
#[derive(Debug, Clone)]
pub struct GradientSet<F> {
    pub layers: Vec<(Vec<F>, Vec<F>)>,
}

impl<F: Scalar> GradientSet<F> {
    fn zeros_like(config: &ModelConfig) -> Self {
        GradientSet {
            layers: config
                .layer_shapes()
                .iter()
                .map(|s| (vec![F::zero(); s.weights()], vec![F::zero(); s.biases()]))
                .collect(),
        }
    }

    fn add_assign(&mut self, other: &GradientSet<F>) {
        for ((w, b), (ow, ob)) in self.layers.iter_mut().zip(&other.layers) {
            for (a, &o) in w.iter_mut().zip(ow) {
                *a += o;
            }
            for (a, &o) in b.iter_mut().zip(ob) {
                *a += o;
            }
        }
    }

    fn scale(&mut self, s: F) {
        for (w, b) in self.layers.iter_mut() {
            for v in w.iter_mut() {
                *v *= s;
            }
            for v in b.iter_mut() {
                *v *= s;
            }
        }
    }

    /// Flat view for gradient-check coordinate addressing: (layer, is_bias, index).
    pub fn get(&self, layer: usize, is_bias: bool, index: usize) -> F {
        let (w, b) = &self.layers[layer];
        if is_bias {
            b[index]
        } else {
            w[index]
        }
    }
}

/// A batch of network inputs in item-major, channel-major layout.
#[derive(Debug, Clone)]
pub struct Batch<F> {
    items: usize,
    channels: usize,
    side: usize,
    data: Vec<F>,
}

impl<F: Scalar> Batch<F> {
    pub fn zeroed(items: usize, channels: usize, side: usize) -> Self {
        Batch {
            items,
            channels,
            side,
            data: vec![F::zero(); items * channels * side * side],
        }
    }

    pub fn items(&self) -> usize {
        self.items
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn item_len(&self) -> usize {
        self.channels * self.side * self.side
    }

    pub fn item(&self, i: usize) -> &[F] {
        let len = self.item_len();
        &self.data[i * len..(i + 1) * len]
    }

    pub fn item_mut(&mut self, i: usize) -> &mut [F] {
        let len = self.item_len();
        &mut self.data[i * len..(i + 1) * len]
    }

    /// Mutable per-item chunks, for parallel filling.
    pub fn items_mut(&mut self) -> impl Iterator<Item = &mut [F]> {
        let len = self.item_len();
        self.data.chunks_mut(len)
    }
}

/// Configuration plus parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Model<F> {
    pub config: ModelConfig,
    pub params: ModelParams<F>,
}

impl<F: Scalar> Model<F> {
    /// Fan-in-scaled uniform initialization, fully determined by `seed`:
    /// weights from `[-sqrt(6/fan_in), sqrt(6/fan_in)]` (variance-preserving
    /// under ReLU, so activations neither explode nor vanish along the
    /// six-layer ladder), zero biases and momentum. With zero biases the
    /// ladder is positively homogeneous, so sparse co-occurrence inputs
    /// propagate as pure class signal at any input scale.
    pub fn init(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = config
            .layer_shapes()
            .iter()
            .map(|shape| {
                let limit = (6.0 / shape.fan_in() as f64).sqrt();
                let w = (0..shape.weights())
                    .map(|_| F::from_f64_lossy((rng.random::<f64>() * 2.0 - 1.0) * limit))
                    .collect();
                LayerParams {
                    w,
                    b: vec![F::zero(); shape.biases()],
                    vw: vec![F::zero(); shape.weights()],
                    vb: vec![F::zero(); shape.biases()],
                }
            })
            .collect();
        Ok(Model {
            config,
            params: ModelParams { layers },
        })
    }

    /// All-zero parameters (the model scores 0.5 everywhere).
    pub fn zeros(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let layers = config
            .layer_shapes()
            .iter()
            .map(|shape| LayerParams {
                w: vec![F::zero(); shape.weights()],
                b: vec![F::zero(); shape.biases()],
                vw: vec![F::zero(); shape.weights()],
                vb: vec![F::zero(); shape.biases()],
            })
            .collect();
        Ok(Model {
            config,
            params: ModelParams { layers },
        })
    }

    pub fn param_count(&self) -> usize {
        self.config.param_count()
    }

    fn check_batch(&self, batch: &Batch<F>) -> Result<()> {
        if batch.channels() != self.config.in_channels {
            return Err(Error::Shape(format!(
                "batch has {} channels, model expects {}",
                batch.channels(),
                self.config.in_channels
            )));
        }
        if batch.side() != self.config.input_size {
            return Err(Error::Shape(format!(
                "batch side {} does not match model input size {}",
                batch.side(),
                self.config.input_size
            )));
        }
        Ok(())
    }

    /// Scores in (0, 1) for every batch item.
    pub fn forward(&self, batch: &Batch<F>) -> Result<Vec<F>> {
        self.check_batch(batch)?;
        let indices: Vec<usize> = (0..batch.items()).collect();
        let mut scores = Vec::with_capacity(batch.items());
        for chunk in indices.chunks(ITEM_CHUNK) {
            let partial: Vec<Result<F>> = {
                use rayon::prelude::*;
                chunk
                    .par_iter()
                    .map(|&i| self.forward_item(batch.item(i)).map(|t| t.p))
                    .collect()
            };
            for r in partial {
                scores.push(r?);
            }
        }
        Ok(scores)
    }

    /// Mean binary cross-entropy of the batch under labels (`true` = positive).
    pub fn loss(&self, batch: &Batch<F>, labels: &[bool]) -> Result<F> {
        let scores = self.forward(batch)?;
        if labels.len() != scores.len() {
            return Err(Error::Shape(format!(
                "{} labels for {} items",
                labels.len(),
                scores.len()
            )));
        }
        let mut total = F::zero();
        for (&p, &y) in scores.iter().zip(labels) {
            total += bce(p, y);
        }
        let loss = total / F::from_f64_lossy(labels.len() as f64);
        if !loss.is_finite() {
            return Err(Error::Numerical {
                layer: "loss".into(),
            });
        }
        Ok(loss)
    }

    /// Mean loss and its gradient with respect to every parameter.
    pub fn loss_and_grad(&self, batch: &Batch<F>, labels: &[bool]) -> Result<(F, GradientSet<F>)> {
        let (loss, grads, _) = self.loss_grad_scores(batch, labels)?;
        Ok((loss, grads))
    }

    /// Like [`Model::loss_and_grad`] but also returns the per-item scores.
    pub fn loss_grad_scores(
        &self,
        batch: &Batch<F>,
        labels: &[bool],
    ) -> Result<(F, GradientSet<F>, Vec<F>)> {
        self.check_batch(batch)?;
        if labels.len() != batch.items() {
            return Err(Error::Shape(format!(
                "{} labels for {} items",
                labels.len(),
                batch.items()
            )));
        }
        let items = batch.items();
        let mut total = GradientSet::zeros_like(&self.config);
        let mut loss_sum = F::zero();
        let mut scores = Vec::with_capacity(items);
        let indices: Vec<usize> = (0..items).collect();
        for chunk in indices.chunks(ITEM_CHUNK) {
            // Per-item gradients are computed in parallel but folded in item
            // order, so the result does not depend on thread scheduling.
            let partial: Vec<Result<(F, GradientSet<F>, F)>> = {
                use rayon::prelude::*;
                chunk
                    .par_iter()
                    .map(|&i| self.item_loss_and_grad(batch.item(i), labels[i]))
                    .collect()
            };
            for r in partial {
                let (l, g, p) = r?;
                loss_sum += l;
                total.add_assign(&g);
                scores.push(p);
            }
        }
        let inv = F::one() / F::from_f64_lossy(items as f64);
        total.scale(inv);
        let loss = loss_sum * inv;
        if !loss.is_finite() {
            return Err(Error::Numerical {
                layer: "loss".into(),
            });
        }
        Ok((loss, total, scores))
    }

    /// Forward pass for one item, keeping what backward needs.
    fn forward_item(&self, x: &[F]) -> Result<ItemTrace<F>> {
        let cfg = &self.config;
        let f = cfg.conv_filters;
        let s = cfg.input_size;
        let in_c = cfg.conv_in_channels();
        let sides = cfg.conv_sides();
        let p = &self.params.layers;

        // Stage 1: conv(k3) + ReLU, conv(k5) + pool.
        let mut a0 = vec![F::zero(); f[0] * s * s];
        conv_forward(x, in_c[0], sides[0], &p[0].w, &p[0].b, f[0], KERNEL_SIZES[0], &mut a0);
        relu_inplace(&mut a0);
        let mut z1 = vec![F::zero(); f[1] * s * s];
        conv_forward(&a0, in_c[1], sides[1], &p[1].w, &p[1].b, f[1], KERNEL_SIZES[1], &mut z1);
        let s2 = s / 2;
        let mut p1 = vec![F::zero(); f[1] * s2 * s2];
        let mut idx1 = vec![0u32; f[1] * s2 * s2];
        maxpool_forward(&z1, f[1], s, &mut p1, &mut idx1);
        drop(z1);

        // Stage 2.
        let mut a2 = vec![F::zero(); f[2] * s2 * s2];
        conv_forward(&p1, in_c[2], sides[2], &p[2].w, &p[2].b, f[2], KERNEL_SIZES[2], &mut a2);
        relu_inplace(&mut a2);
        let mut z3 = vec![F::zero(); f[3] * s2 * s2];
        conv_forward(&a2, in_c[3], sides[3], &p[3].w, &p[3].b, f[3], KERNEL_SIZES[3], &mut z3);
        let s4 = s / 4;
        let mut p3 = vec![F::zero(); f[3] * s4 * s4];
        let mut idx3 = vec![0u32; f[3] * s4 * s4];
        maxpool_forward(&z3, f[3], s2, &mut p3, &mut idx3);
        drop(z3);

        // Stage 3.
        let mut a4 = vec![F::zero(); f[4] * s4 * s4];
        conv_forward(&p3, in_c[4], sides[4], &p[4].w, &p[4].b, f[4], KERNEL_SIZES[4], &mut a4);
        relu_inplace(&mut a4);
        let mut z5 = vec![F::zero(); f[5] * s4 * s4];
        conv_forward(&a4, in_c[5], sides[5], &p[5].w, &p[5].b, f[5], KERNEL_SIZES[5], &mut z5);
        let s8 = s / 8;
        let mut p5 = vec![F::zero(); f[5] * s8 * s8];
        let mut idx5 = vec![0u32; f[5] * s8 * s8];
        maxpool_forward(&z5, f[5], s4, &mut p5, &mut idx5);
        drop(z5);

        // Head: dense + ReLU, dense(1) + sigmoid.
        let dense1 = &p[6];
        let mut h = vec![F::zero(); cfg.dense_width];
        dense_forward(&p5, &dense1.w, &dense1.b, cfg.dense_width, cfg.flatten_width(), &mut h);
        relu_inplace(&mut h);
        let dense2 = &p[7];
        let mut z = [F::zero()];
        dense_forward(&h, &dense2.w, &dense2.b, 1, cfg.dense_width, &mut z);
        let prob = sigmoid(z[0]);
        if !prob.is_finite() {
            return Err(self.locate_nonfinite(&[&a0, &p1, &a2, &p3, &a4, &p5, &h]));
        }

        Ok(ItemTrace {
            a0,
            p1,
            idx1,
            a2,
            p3,
            idx3,
            a4,
            p5,
            idx5,
            h,
            p: prob,
        })
    }

    /// Name the first stage holding a non-finite activation.
    fn locate_nonfinite(&self, stages: &[&[F]]) -> Error {
        const NAMES: [&str; 7] = [
            "conv1+relu", "pool1", "conv3+relu", "pool2", "conv5+relu", "flatten", "dense1",
        ];
        for (name, buf) in NAMES.iter().zip(stages) {
            if buf.iter().any(|v| !v.is_finite()) {
                return Error::Numerical {
                    layer: (*name).into(),
                };
            }
        }
        Error::Numerical {
            layer: "sigmoid".into(),
        }
    }

    /// Loss and gradients for one item (un-normalized by the batch size).
    fn item_loss_and_grad(&self, x: &[F], label: bool) -> Result<(F, GradientSet<F>, F)> {
        let trace = self.forward_item(x)?;
        let cfg = &self.config;
        let f = cfg.conv_filters;
        let s = cfg.input_size;
        let (s2, s4) = (s / 2, s / 4);
        let in_c = cfg.conv_in_channels();
        let sides = cfg.conv_sides();
        let p = &self.params.layers;
        let mut g = GradientSet::zeros_like(cfg);

        let loss = bce(trace.p, label);
        // d loss / d z for sigmoid + clamped BCE: (p - y) inside the clamp
        // range, 0 outside (the clamp is flat there).
        let pf = trace.p.to_f64_lossy();
        let y = if label { F::one() } else { F::zero() };
        let dz2 = if pf > PROB_EPS && pf < 1.0 - PROB_EPS {
            trace.p - y
        } else {
            F::zero()
        };

        // Head backward.
        let mut dh = vec![F::zero(); cfg.dense_width];
        {
            let (dw, db) = &mut g.layers[7];
            dense_backward(&trace.h, &p[7].w, &[dz2], 1, cfg.dense_width, dw, db, Some(&mut dh));
        }
        relu_backward(&mut dh, &trace.h);
        let mut dp5 = vec![F::zero(); cfg.flatten_width()];
        {
            let (dw, db) = &mut g.layers[6];
            dense_backward(
                &trace.p5,
                &p[6].w,
                &dh,
                cfg.dense_width,
                cfg.flatten_width(),
                dw,
                db,
                Some(&mut dp5),
            );
        }

        // Stage 3 backward.
        let mut dz5 = vec![F::zero(); f[5] * s4 * s4];
        maxpool_backward(&dp5, &trace.idx5, f[5], s4, &mut dz5);
        let mut da4 = vec![F::zero(); f[4] * s4 * s4];
        {
            let (dw, db) = &mut g.layers[5];
            conv_backward_params(&trace.a4, in_c[5], sides[5], &dz5, f[5], KERNEL_SIZES[5], dw, db);
        }
        conv_backward_input(&p[5].w, f[5], in_c[5], sides[5], KERNEL_SIZES[5], &dz5, &mut da4);
        relu_backward(&mut da4, &trace.a4);
        let mut dp3 = vec![F::zero(); f[3] * s4 * s4];
        {
            let (dw, db) = &mut g.layers[4];
            conv_backward_params(&trace.p3, in_c[4], sides[4], &da4, f[4], KERNEL_SIZES[4], dw, db);
        }
        conv_backward_input(&p[4].w, f[4], in_c[4], sides[4], KERNEL_SIZES[4], &da4, &mut dp3);

        // Stage 2 backward.
        let mut dz3 = vec![F::zero(); f[3] * s2 * s2];
        maxpool_backward(&dp3, &trace.idx3, f[3], s2, &mut dz3);
        let mut da2 = vec![F::zero(); f[2] * s2 * s2];
        {
            let (dw, db) = &mut g.layers[3];
            conv_backward_params(&trace.a2, in_c[3], sides[3], &dz3, f[3], KERNEL_SIZES[3], dw, db);
        }
        conv_backward_input(&p[3].w, f[3], in_c[3], sides[3], KERNEL_SIZES[3], &dz3, &mut da2);
        relu_backward(&mut da2, &trace.a2);
        let mut dp1 = vec![F::zero(); f[1] * s2 * s2];
        {
            let (dw, db) = &mut g.layers[2];
            conv_backward_params(&trace.p1, in_c[2], sides[2], &da2, f[2], KERNEL_SIZES[2], dw, db);
        }
        conv_backward_input(&p[2].w, f[2], in_c[2], sides[2], KERNEL_SIZES[2], &da2, &mut dp1);

        // Stage 1 backward.
        let mut dz1 = vec![F::zero(); f[1] * s * s];
        maxpool_backward(&dp1, &trace.idx1, f[1], s, &mut dz1);
        let mut da0 = vec![F::zero(); f[0] * s * s];
        {
            let (dw, db) = &mut g.layers[1];
            conv_backward_params(&trace.a0, in_c[1], sides[1], &dz1, f[1], KERNEL_SIZES[1], dw, db);
        }
        conv_backward_input(&p[1].w, f[1], in_c[1], sides[1], KERNEL_SIZES[1], &dz1, &mut da0);
        relu_backward(&mut da0, &trace.a0);
        {
            let (dw, db) = &mut g.layers[0];
            conv_backward_params(x, in_c[0], sides[0], &da0, f[0], KERNEL_SIZES[0], dw, db);
        }
        // No input gradient needed below the first convolution.

        Ok((loss, g, trace.p))
    }
}

/// Per-item forward activations kept for the backward pass.
struct ItemTrace<F> {
    a0: Vec<F>,
    p1: Vec<F>,
    idx1: Vec<u32>,
    a2: Vec<F>,
    p3: Vec<F>,
    idx3: Vec<u32>,
    a4: Vec<F>,
    p5: Vec<F>,
    idx5: Vec<u32>,
    h: Vec<F>,
    p: F,
}

#[inline]
fn sigmoid<F: Scalar>(z: F) -> F {
    F::one() / (F::one() + (-z).exp())
}

/// Binary cross-entropy of one score, with the probability clamped to
/// `[1e-7, 1 - 1e-7]`.
fn bce<F: Scalar>(p: F, label: bool) -> F {
    let lo = F::from_f64_lossy(PROB_EPS);
    let hi = F::one() - lo;
    let pc = p.max(lo).min(hi);
    if label {
        -pc.ln()
    } else {
        -(F::one() - pc).ln()
    }
}

/// Classical momentum update: `v <- mu * v - lr * g; w <- w + v`.
pub fn sgd_momentum_step<F: Scalar>(
    params: &mut ModelParams<F>,
    grads: &GradientSet<F>,
    learning_rate: F,
    momentum: F,
) {
    for (layer, (gw, gb)) in params.layers.iter_mut().zip(&grads.layers) {
        for ((v, w), &g) in layer.vw.iter_mut().zip(layer.w.iter_mut()).zip(gw) {
            *v = momentum * *v - learning_rate * g;
            *w = *w + *v;
        }
        for ((v, b), &g) in layer.vb.iter_mut().zip(layer.b.iter_mut()).zip(gb) {
            *v = momentum * *v - learning_rate * g;
            *b = *b + *v;
        }
    }
}
