//! Data containers and deterministic task generators.
//!
//! Both synthetic tasks are pure functions of their parameters and seed.
//! The spiral task is a plain nonlinear classification benchmark; the
//! feature-swap task is built so the label depends on which subset of
//! features matters, switched per sample by a type bit, which rewards
//! architectures that can gate parts of their representation.

mod idx;
pub use idx::load_idx;

use crate::error::{Error, Result};
use crate::numerics::{Matrix, SplitMix64};

/// A labeled batch: one row per sample.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub inputs: Matrix<f64>,
    pub labels: Vec<usize>,
    pub num_classes: usize,
}

impl Dataset {
    pub fn new(inputs: Matrix<f64>, labels: Vec<usize>, num_classes: usize) -> Result<Self> {
        if inputs.rows() != labels.len() {
            return Err(Error::BadDataLength {
                rows: inputs.rows(),
                cols: 1,
                len: labels.len(),
            });
        }
        for &label in &labels {
            if label >= num_classes {
                return Err(Error::LabelOutOfRange { label, num_classes });
            }
        }
        Ok(Self { inputs, labels, num_classes })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn features(&self) -> usize {
        self.inputs.cols()
    }

    /// Rows and labels at the given indices, in the given order.
    pub fn minibatch(&self, indices: &[usize]) -> (Matrix<f64>, Vec<usize>) {
        let mut inputs = Matrix::zeros(indices.len(), self.inputs.cols());
        let mut labels = Vec::with_capacity(indices.len());
        for (r, &i) in indices.iter().enumerate() {
            inputs.data_mut()[r * self.inputs.cols()..(r + 1) * self.inputs.cols()]
                .copy_from_slice(self.inputs.row(i));
            labels.push(self.labels[i]);
        }
        (inputs, labels)
    }

    /// Same samples stored in a different order.
    pub fn reordered(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.len() {
            return Err(Error::InvalidPermutation(format!(
                "length {} does not match {} samples",
                perm.len(),
                self.len()
            )));
        }
        let (inputs, labels) = self.minibatch(perm);
        Ok(Self {
            inputs,
            labels,
            num_classes: self.num_classes,
        })
    }

    /// Seeded split into disjoint, exhaustive train and validation sets.
    pub fn split(&self, val_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
        if !(0.0..1.0).contains(&val_fraction) {
            return Err(Error::InvalidConfig {
                name: "val_fraction".into(),
                message: format!("{val_fraction} is outside [0, 1)"),
            });
        }
        let n = self.len();
        let n_val = (n as f64 * val_fraction).round() as usize;
        let mut rng = SplitMix64::new(seed);
        let perm = rng.permutation(n);
        let (val_idx, train_idx) = perm.split_at(n_val);
        let (vi, vl) = self.minibatch(val_idx);
        let (ti, tl) = self.minibatch(train_idx);
        Ok((
            Dataset { inputs: ti, labels: tl, num_classes: self.num_classes },
            Dataset { inputs: vi, labels: vl, num_classes: self.num_classes },
        ))
    }
}

/// Interleaved 2-D Archimedean spirals, one per class, with Gaussian
/// position noise, standardized to zero mean and unit variance per
/// feature.
pub fn make_spirals(n_per_class: usize, classes: usize, noise_std: f64, seed: u64) -> Result<Dataset> {
    if classes < 2 {
        return Err(Error::InvalidConfig {
            name: "classes".into(),
            message: format!("{classes} classes, need at least 2"),
        });
    }
    if n_per_class == 0 {
        return Err(Error::InvalidConfig {
            name: "n_per_class".into(),
            message: "need at least one sample per class".into(),
        });
    }
    if !noise_std.is_finite() || noise_std < 0.0 {
        return Err(Error::InvalidConfig {
            name: "noise_std".into(),
            message: format!("{noise_std} is not a finite non-negative value"),
        });
    }
    let n = n_per_class * classes;
    let mut inputs = Matrix::zeros(n, 2);
    let mut labels = Vec::with_capacity(n);
    let mut rng = SplitMix64::new(seed);
    let mut row = 0;
    for class in 0..classes {
        let offset = std::f64::consts::TAU * class as f64 / classes as f64;
        for j in 0..n_per_class {
            let t = if n_per_class == 1 {
                0.0
            } else {
                j as f64 / (n_per_class - 1) as f64
            };
            let radius = 0.15 + 0.85 * t;
            let angle = 2.25 * std::f64::consts::PI * t + offset;
            inputs[(row, 0)] = radius * angle.cos() + noise_std * rng.normal();
            inputs[(row, 1)] = radius * angle.sin() + noise_std * rng.normal();
            labels.push(class);
            row += 1;
        }
    }
    standardize(&mut inputs);
    Dataset::new(inputs, labels, classes)
}

/// In-place per-column standardization using population statistics.
fn standardize(m: &mut Matrix<f64>) {
    let (rows, cols) = m.shape();
    for c in 0..cols {
        let mut mean = 0.0;
        for r in 0..rows {
            mean += m[(r, c)];
        }
        mean /= rows as f64;
        let mut var = 0.0;
        for r in 0..rows {
            let d = m[(r, c)] - mean;
            var += d * d;
        }
        let std = (var / rows as f64).sqrt();
        for r in 0..rows {
            m[(r, c)] = m[(r, c)] - mean;
            if std > 0.0 {
                m[(r, c)] /= std;
            }
        }
    }
}

/// Label rule of the feature-swap task.
///
/// Inputs are `[t, u_1 .. u_{d-1}]` with `t` in {0, 1} and `u` standard
/// normal. The `u` features are split into two fixed halves; the label
/// is the sign of a fixed random linear functional of the first half
/// when `t = 0` and of the second half when `t = 1`. Which features are
/// relevant is therefore swapped per sample by the type bit.
#[derive(Clone, Debug)]
pub struct FeatureSwapTask {
    pub dim: usize,
    pub w0: Vec<f64>,
    pub w1: Vec<f64>,
}

impl FeatureSwapTask {
    /// Draws the two weight vectors from the stream. Must be called
    /// before any sample draws so datasets are reproducible.
    pub fn draw(dim: usize, rng: &mut SplitMix64) -> Result<Self> {
        if dim < 4 {
            return Err(Error::InvalidConfig {
                name: "dim".into(),
                message: format!("{dim} is too small, need at least 4"),
            });
        }
        let m = dim - 1;
        let half = m / 2;
        let w0 = (0..half).map(|_| rng.normal()).collect();
        let w1 = (half..m).map(|_| rng.normal()).collect();
        Ok(Self { dim, w0, w1 })
    }

    pub fn new(dim: usize, seed: u64) -> Result<Self> {
        Self::draw(dim, &mut SplitMix64::new(seed))
    }

    /// Applies the label rule to one input row `[t, u...]`.
    pub fn label(&self, features: &[f64]) -> usize {
        let half = self.w0.len();
        let u = &features[1..];
        let score: f64 = if features[0] < 0.5 {
            self.w0.iter().zip(&u[..half]).map(|(w, v)| w * v).sum()
        } else {
            self.w1.iter().zip(&u[half..]).map(|(w, v)| w * v).sum()
        };
        usize::from(score > 0.0)
    }
}

/// Feature-swap dataset: binary labels, balanced in expectation.
pub fn make_feature_swap(n: usize, dim: usize, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::InvalidConfig {
            name: "n".into(),
            message: "need at least one sample".into(),
        });
    }
    let mut rng = SplitMix64::new(seed);
    let task = FeatureSwapTask::draw(dim, &mut rng)?;
    let mut inputs = Matrix::zeros(n, dim);
    let mut labels = Vec::with_capacity(n);
    for r in 0..n {
        inputs[(r, 0)] = rng.below(2) as f64;
        for c in 1..dim {
            inputs[(r, c)] = rng.normal();
        }
        labels.push(task.label(inputs.row(r)));
    }
    Dataset::new(inputs, labels, 2)
}
