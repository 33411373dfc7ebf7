//! SGD-with-momentum training loop and evaluation.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::{sgd_momentum_step, Batch, Model};

/// Classification threshold: scores at or above it are called positive (gan).
pub const DECISION_THRESHOLD: f64 = 0.5;

/// Training hyper-parameters. Defaults follow the evaluation protocol:
/// learning rate 0.01, momentum 0.9, batch size 40, 40 epochs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    /// Stop once validation accuracy reaches this value (used by short
    /// sanity runs; full runs leave it unset).
    #[serde(default)]
    pub early_stop_val_acc: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.01,
            momentum: 0.9,
            batch_size: 40,
            epochs: 40,
            seed: 0,
            early_stop_val_acc: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.learning_rate <= 0.0 {
            return Err(Error::Config(format!(
                "learning rate must be > 0, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config(format!(
                "momentum must be in [0, 1), got {}",
                self.momentum
            )));
        }
        Ok(())
    }

    /// Canonical fingerprint material for checkpoints.
    pub fn fingerprint_bytes(&self) -> Vec<u8> {
        serde_json::to_vec(self).expect("config serializes")
    }
}

/// Loss/accuracy record for one epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_loss: f64,
    pub val_acc: f64,
}

/// Result of a training run.
#[derive(Debug, Clone)]
pub struct TrainOutcome<F> {
    /// Model restored to the epoch with the best validation accuracy.
    pub model: Model<F>,
    pub metrics: Vec<EpochMetrics>,
    /// Epoch index of the restored parameters (None for zero-epoch runs).
    pub best_epoch: Option<usize>,
}

/// Source of network inputs: something that can materialize sample `idx`
/// into a dense channels-major buffer and report its label.
pub trait SampleSource<F>: Sync {
    fn len(&self) -> usize;
    fn channels(&self) -> usize;
    fn side(&self) -> usize;
    fn write_sample(&self, idx: usize, out: &mut [F]);
    /// `true` = positive class (gan).
    fn label(&self, idx: usize) -> bool;
}

/// Dense in-memory sample set, mainly for tests and toy corpora.
#[derive(Debug, Clone)]
pub struct DenseSamples<F> {
    channels: usize,
    side: usize,
    data: Vec<Vec<F>>,
    labels: Vec<bool>,
}

impl<F: Scalar> DenseSamples<F> {
    pub fn new(channels: usize, side: usize) -> Self {
        DenseSamples {
            channels,
            side,
            data: Vec::new(),
            labels: Vec::new(),
        }
    }

    pub fn push(&mut self, sample: Vec<F>, label: bool) {
        assert_eq!(sample.len(), self.channels * self.side * self.side);
        self.data.push(sample);
        self.labels.push(label);
    }
}

impl<F: Scalar> SampleSource<F> for DenseSamples<F> {
    fn len(&self) -> usize {
        self.data.len()
    }

    fn channels(&self) -> usize {
        self.channels
    }

    fn side(&self) -> usize {
        self.side
    }

    fn write_sample(&self, idx: usize, out: &mut [F]) {
        out.copy_from_slice(&self.data[idx]);
    }

    fn label(&self, idx: usize) -> bool {
        self.labels[idx]
    }
}

fn fill_batch<F: Scalar>(set: &dyn SampleSource<F>, indices: &[usize], batch: &mut Batch<F>) -> Vec<bool> {
    let item_len = batch.item_len();
    batch
        .items_mut()
        .zip(indices)
        .par_bridge()
        .for_each(|(slot, &idx)| {
            debug_assert_eq!(slot.len(), item_len);
            set.write_sample(idx, slot);
        });
    indices.iter().map(|&i| set.label(i)).collect()
}

/// Mean loss and accuracy of `model` over `set`.
pub fn evaluate<F: Scalar>(
    model: &Model<F>,
    set: &dyn SampleSource<F>,
    batch_size: usize,
) -> Result<(f64, f64)> {
    let n = set.len();
    if n == 0 {
        return Err(Error::Config("cannot evaluate an empty sample set".into()));
    }
    let mut loss_sum = 0.0f64;
    let mut correct = 0usize;
    let indices: Vec<usize> = (0..n).collect();
    for chunk in indices.chunks(batch_size.max(1)) {
        let mut batch = Batch::zeroed(chunk.len(), set.channels(), set.side());
        let labels = fill_batch(set, chunk, &mut batch);
        let scores = model.forward(&batch)?;
        for (&p, &y) in scores.iter().zip(&labels) {
            let pf = p.to_f64_lossy();
            loss_sum += if y {
                -pf.clamp(1e-7, 1.0 - 1e-7).ln()
            } else {
                -(1.0 - pf.clamp(1e-7, 1.0 - 1e-7)).ln()
            };
            if (pf >= DECISION_THRESHOLD) == y {
                correct += 1;
            }
        }
    }
    Ok((loss_sum / n as f64, correct as f64 / n as f64))
}

/// Train `model` on `train_set`, tracking `val_set` accuracy each epoch.
///
/// Deterministic for a fixed `cfg.seed` on one platform/build: shuffling is
/// seed-derived and gradient reduction order is fixed. Returns the
/// parameters of the epoch with the highest validation accuracy (earliest
/// epoch wins ties); a zero-epoch run returns the initialization unchanged.
pub fn train<F: Scalar>(
    model: Model<F>,
    train_set: &dyn SampleSource<F>,
    val_set: &dyn SampleSource<F>,
    cfg: &TrainConfig,
    progress: &mut dyn FnMut(&EpochMetrics),
) -> Result<TrainOutcome<F>> {
    cfg.validate()?;
    if train_set.len() == 0 {
        return Err(Error::Config("training set is empty".into()));
    }
    if train_set.channels() != model.config.in_channels
        || train_set.side() != model.config.input_size
    {
        return Err(Error::Shape(format!(
            "training samples are {}ch {}px, model wants {}ch {}px",
            train_set.channels(),
            train_set.side(),
            model.config.in_channels,
            model.config.input_size
        )));
    }

    let mut model = model;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let lr = F::from_f64_lossy(cfg.learning_rate);
    let mu = F::from_f64_lossy(cfg.momentum);
    let mut metrics = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(usize, f64, super::ModelParams<F>)> = None;

    let mut indices: Vec<usize> = (0..train_set.len()).collect();
    for epoch in 0..cfg.epochs {
        indices.shuffle(&mut rng);
        let mut loss_weighted = 0.0f64;
        let mut correct = 0usize;
        for (batch_no, chunk) in indices.chunks(cfg.batch_size).enumerate() {
            let mut batch = Batch::zeroed(chunk.len(), train_set.channels(), train_set.side());
            let labels = fill_batch(train_set, chunk, &mut batch);
            let (loss, grads, scores) =
                model
                    .loss_grad_scores(&batch, &labels)
                    .map_err(|e| match e {
                        Error::Numerical { layer } => Error::Training {
                            epoch,
                            batch: batch_no,
                            message: format!("non-finite value in {layer}"),
                        },
                        other => other,
                    })?;
            let lf = loss.to_f64_lossy();
            if !lf.is_finite() {
                return Err(Error::Training {
                    epoch,
                    batch: batch_no,
                    message: "loss diverged".into(),
                });
            }
            loss_weighted += lf * chunk.len() as f64;
            for (&p, &y) in scores.iter().zip(&labels) {
                if (p.to_f64_lossy() >= DECISION_THRESHOLD) == y {
                    correct += 1;
                }
            }
            sgd_momentum_step(&mut model.params, &grads, lr, mu);
        }
        let train_loss = loss_weighted / train_set.len() as f64;
        let train_acc = correct as f64 / train_set.len() as f64;
        let (val_loss, val_acc) = evaluate(&model, val_set, cfg.batch_size)?;
        let m = EpochMetrics {
            epoch,
            train_loss,
            train_acc,
            val_loss,
            val_acc,
        };
        progress(&m);
        metrics.push(m);
        let improved = match &best {
            None => true,
            Some((_, acc, _)) => val_acc > *acc,
        };
        if improved {
            best = Some((epoch, val_acc, model.params.clone()));
        }
        if let Some(target) = cfg.early_stop_val_acc {
            if val_acc >= target {
                break;
            }
        }
    }

    let best_epoch = best.as_ref().map(|(e, _, _)| *e);
    if let Some((_, _, params)) = best {
        model.params = params;
    }
    Ok(TrainOutcome {
        model,
        metrics,
        best_epoch,
    })
}

/// Render metrics as line-oriented records: `epoch<TAB>split<TAB>loss<TAB>accuracy`.
pub fn metrics_to_text(metrics: &[EpochMetrics]) -> String {
    let mut out = String::from("epoch\tsplit\tloss\taccuracy\n");
    for m in metrics {
        out.push_str(&format!(
            "{}\ttrain\t{:.6}\t{:.6}\n{}\tval\t{:.6}\t{:.6}\n",
            m.epoch, m.train_loss, m.train_acc, m.epoch, m.val_loss, m.val_acc
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::ModelConfig;
    use rand::RngExt;

    fn toy_sets(seed: u64) -> (DenseSamples<f32>, DenseSamples<f32>) {
        // Class false: near-zero inputs; class true: inputs near one.
        // Trivially separable, exercising the full train loop.
        let cfg = ModelConfig::reduced(2, 8, 2, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut make = |n: usize| {
            let mut set = DenseSamples::new(cfg.in_channels, cfg.input_size);
            for i in 0..n {
                let label = i % 2 == 0;
                let base: f32 = if label { 0.8 } else { 0.1 };
                let sample: Vec<f32> = (0..cfg.in_channels * 64)
                    .map(|_| base + 0.1 * rng.random::<f32>())
                    .collect();
                set.push(sample, label);
            }
            set
        };
        (make(32), make(12))
    }

    #[test]
    fn zero_epochs_returns_initialization() {
        let cfg = ModelConfig::reduced(2, 8, 2, 4);
        let model = Model::<f32>::init(cfg, 3).unwrap();
        let snapshot = model.params.clone();
        let (train_set, val_set) = toy_sets(1);
        let out = train(
            model,
            &train_set,
            &val_set,
            &TrainConfig {
                epochs: 0,
                ..Default::default()
            },
            &mut |_| {},
        )
        .unwrap();
        assert_eq!(out.model.params, snapshot);
        assert!(out.metrics.is_empty());
        assert!(out.best_epoch.is_none());
    }

    #[test]
    fn separable_task_reaches_high_accuracy() {
        let cfg = ModelConfig::reduced(2, 8, 2, 4);
        let model = Model::<f32>::init(cfg, 3).unwrap();
        let (train_set, val_set) = toy_sets(2);
        let out = train(
            model,
            &train_set,
            &val_set,
            &TrainConfig {
                epochs: 30,
                batch_size: 8,
                learning_rate: 0.05,
                seed: 5,
                early_stop_val_acc: Some(1.0),
                ..Default::default()
            },
            &mut |_| {},
        )
        .unwrap();
        let best = out
            .metrics
            .iter()
            .map(|m| m.val_acc)
            .fold(0.0f64, f64::max);
        assert!(best >= 0.9, "best val accuracy {best}");
    }

    #[test]
    fn same_seed_identical_trajectory() {
        let cfg = ModelConfig::reduced(2, 8, 2, 4);
        let (train_set, val_set) = toy_sets(4);
        let run = || {
            let model = Model::<f32>::init(cfg.clone(), 9).unwrap();
            train(
                model,
                &train_set,
                &val_set,
                &TrainConfig {
                    epochs: 3,
                    batch_size: 8,
                    seed: 11,
                    ..Default::default()
                },
                &mut |_| {},
            )
            .unwrap()
        };
        let a = run();
        let b = run();
        assert_eq!(a.metrics, b.metrics);
        assert_eq!(a.model.params, b.model.params);
    }

    #[test]
    fn divergence_is_a_training_error_with_location() {
        // An absurd learning rate overflows f32 weights; the resulting
        // non-finite forward pass must surface as a training error carrying
        // the epoch and batch indices.
        let cfg = ModelConfig::reduced(2, 8, 2, 4);
        let model = Model::<f32>::init(cfg, 3).unwrap();
        let (train_set, val_set) = toy_sets(8);
        let err = train(
            model,
            &train_set,
            &val_set,
            &TrainConfig {
                epochs: 5,
                batch_size: 8,
                learning_rate: 1e30,
                seed: 1,
                ..Default::default()
            },
            &mut |_| {},
        )
        .unwrap_err();
        match err {
            crate::error::Error::Training { epoch, batch, .. } => {
                assert!(epoch < 5, "epoch {epoch}");
                let _ = batch;
            }
            other => panic!("expected a training error, got {other:?}"),
        }
    }

    #[test]
    fn metrics_text_format() {
        let m = vec![EpochMetrics {
            epoch: 0,
            train_loss: 0.5,
            train_acc: 0.75,
            val_loss: 0.6,
            val_acc: 0.5,
        }];
        let text = metrics_to_text(&m);
        assert!(text.contains("0\ttrain\t0.500000\t0.750000"));
        assert!(text.contains("0\tval\t0.600000\t0.500000"));
    }
}
