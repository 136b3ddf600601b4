//! Cross-entropy loss, SGD with momentum, the training loop, and
//! evaluation. Everything is seeded and single-threaded so a run is a
//! pure function of (network, data, config).

use crate::blocks::{Gradients, Network, NetworkParams};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::numerics::{Matrix, SplitMix64};

/// Hyperparameters of one training run.
#[derive(Clone, Debug)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Momentum coefficient in [0, 1).
    pub momentum: f64,
    /// Multiplicative learning-rate factor applied after each epoch, in (0, 1].
    pub lr_decay: f64,
    /// Seeds the per-epoch batch shuffling.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            batch_size: 32,
            learning_rate: 0.1,
            momentum: 0.9,
            lr_decay: 0.97,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |name: &str, message: String| {
            Err(Error::InvalidConfig {
                name: name.into(),
                message,
            })
        };
        if self.batch_size == 0 {
            return bad("batch_size", "must be at least 1".into());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate", format!("{} is not positive", self.learning_rate));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad("momentum", format!("{} is outside [0, 1)", self.momentum));
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return bad("lr_decay", format!("{} is outside (0, 1]", self.lr_decay));
        }
        Ok(())
    }
}

/// Mean softmax cross-entropy over a batch and its gradient with respect
/// to the logits. Stabilized with the log-sum-exp shift; the gradient is
/// (softmax - one_hot) / batch.
pub fn softmax_cross_entropy(logits: &Matrix<f64>, labels: &[usize]) -> Result<(f64, Matrix<f64>)> {
    if logits.rows() == 0 {
        return Err(Error::Empty("batch"));
    }
    if labels.len() != logits.rows() {
        return Err(Error::DimensionMismatch {
            op: "softmax_cross_entropy",
            left_rows: logits.rows(),
            left_cols: logits.cols(),
            right_rows: labels.len(),
            right_cols: 1,
        });
    }
    let classes = logits.cols();
    let batch = logits.rows();
    let mut grad = Matrix::zeros(batch, classes);
    let mut loss = 0.0;
    let inv_batch = 1.0 / batch as f64;
    for r in 0..batch {
        let label = labels[r];
        if label >= classes {
            return Err(Error::LabelOutOfRange {
                label,
                num_classes: classes,
            });
        }
        let row = logits.row(r);
        let max = row.iter().fold(f64::NEG_INFINITY, |a, &v| a.max(v));
        let sum_exp: f64 = row.iter().map(|&v| (v - max).exp()).sum();
        let lse = max + sum_exp.ln();
        loss += lse - row[label];
        for c in 0..classes {
            let p = (row[c] - lse).exp();
            grad[(r, c)] = (p - f64::from(c == label)) * inv_batch;
        }
    }
    Ok((loss * inv_batch, grad))
}

/// Momentum buffers, one per parameter matrix in canonical order.
#[derive(Clone, Debug)]
pub struct Velocity {
    slots: Vec<Matrix<f64>>,
}

impl Velocity {
    pub fn zeros(params: &NetworkParams<f64>) -> Self {
        Self {
            slots: params
                .matrices()
                .iter()
                .map(|m| Matrix::zeros(m.rows(), m.cols()))
                .collect(),
        }
    }
}

/// One SGD update: v <- momentum * v - lr * g, then params <- params + v.
pub fn sgd_step(
    params: &mut NetworkParams<f64>,
    grads: &Gradients<f64>,
    velocity: &mut Velocity,
    learning_rate: f64,
    momentum: f64,
) -> Result<()> {
    let grads = grads.matrices();
    let mut targets = params.matrices_mut();
    if targets.len() != grads.len() || targets.len() != velocity.slots.len() {
        return Err(Error::InvalidSpec(
            "optimizer state does not match the parameter structure".into(),
        ));
    }
    for ((p, g), v) in targets.iter_mut().zip(&grads).zip(&mut velocity.slots) {
        v.scale_in_place(momentum);
        v.axpy(-learning_rate, g)?;
        p.add_assign(v)?;
    }
    Ok(())
}

/// Loss and accuracy for one dataset at one point in training.
#[derive(Clone, Copy, Debug)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_loss: f64,
    pub val_acc: f64,
}

/// Final metrics plus the per-epoch history.
#[derive(Clone, Debug)]
pub struct Metrics {
    /// Validation loss after the last epoch.
    pub loss: f64,
    /// Validation accuracy after the last epoch.
    pub accuracy: f64,
    pub history: Vec<EpochMetrics>,
}

impl Metrics {
    /// CSV with one row per epoch.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss,train_acc,val_loss,val_acc\n");
        for m in &self.history {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                m.epoch, m.train_loss, m.train_acc, m.val_loss, m.val_acc
            ));
        }
        out
    }
}

const EVAL_CHUNK: usize = 1024;

/// Loss and accuracy without touching parameters. Evaluation runs in
/// fixed-size chunks in storage order, so results are deterministic.
pub fn evaluate(net: &Network<f64>, dataset: &Dataset) -> Result<Metrics> {
    if dataset.is_empty() {
        return Err(Error::Empty("dataset"));
    }
    let n = dataset.len();
    let mut loss_sum = 0.0;
    let mut correct = 0usize;
    let mut start = 0;
    while start < n {
        let end = (start + EVAL_CHUNK).min(n);
        let indices: Vec<usize> = (start..end).collect();
        let (inputs, labels) = dataset.minibatch(&indices);
        let logits = net.logits(&inputs)?;
        let (loss, _) = softmax_cross_entropy(&logits, &labels)?;
        loss_sum += loss * (end - start) as f64;
        for (r, &label) in labels.iter().enumerate() {
            if argmax(logits.row(r)) == label {
                correct += 1;
            }
        }
        start = end;
    }
    Ok(Metrics {
        loss: loss_sum / n as f64,
        accuracy: correct as f64 / n as f64,
        history: Vec::new(),
    })
}

/// Index of the largest value; ties go to the earliest index.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Trains with shuffled minibatches and returns the final network plus
/// per-epoch metrics on both splits. Aborts on a non-finite batch loss
/// rather than continuing from poisoned parameters. With an empty
/// validation set the validation columns are NaN.
pub fn train(
    net: Network<f64>,
    train_set: &Dataset,
    val_set: &Dataset,
    cfg: &TrainConfig,
) -> Result<(Network<f64>, Metrics)> {
    cfg.validate()?;
    if train_set.is_empty() {
        return Err(Error::Empty("training set"));
    }
    let mut net = net;
    let mut velocity = Velocity::zeros(net.params());
    let mut rng = SplitMix64::new(cfg.seed);
    let mut lr = cfg.learning_rate;
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let order = rng.permutation(train_set.len());
        for (batch_idx, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let (inputs, labels) = train_set.minibatch(chunk);
            let trace = net.forward(&inputs)?;
            let (loss, d_logits) = softmax_cross_entropy(&trace.logits, &labels)?;
            if !loss.is_finite() {
                return Err(Error::NanLoss {
                    epoch,
                    batch: batch_idx,
                });
            }
            let grads = net.backward(&trace, &d_logits)?;
            sgd_step(net.params_mut(), &grads, &mut velocity, lr, cfg.momentum)?;
        }
        let train_metrics = evaluate(&net, train_set)?;
        let (val_loss, val_acc) = eval_or_nan(&net, val_set)?;
        history.push(EpochMetrics {
            epoch,
            train_loss: train_metrics.loss,
            train_acc: train_metrics.accuracy,
            val_loss,
            val_acc,
        });
        lr *= cfg.lr_decay;
    }
    let (loss, accuracy) = eval_or_nan(&net, val_set)?;
    Ok((net, Metrics { loss, accuracy, history }))
}

// An empty validation set yields NaN columns rather than an error, so
// training without a holdout still works.
fn eval_or_nan(net: &Network<f64>, set: &Dataset) -> Result<(f64, f64)> {
    if set.is_empty() {
        return Ok((f64::NAN, f64::NAN));
    }
    let m = evaluate(net, set)?;
    Ok((m.loss, m.accuracy))
}
