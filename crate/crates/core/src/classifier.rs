//! Three-class softmax head over fixed sentence embeddings, trained with
//! mini-batch Adam on mean cross-entropy plus an L2 penalty on the weights.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Label;
use crate::embedding::EmbeddingMatrix;

pub const NUM_CLASSES: usize = 3;

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPSILON: f64 = 1e-8;
const INIT_SCALE: f64 = 0.01;

/// Smallest training set accepted by [`train_head`].
pub const MIN_TRAIN_EXAMPLES: usize = 20;

#[derive(Debug, Error)]
pub enum ClassifierError {
    #[error("input has {got} features, head expects {expected}")]
    DimMismatch { expected: usize, got: usize },
    #[error("non-finite input")]
    NonFiniteInput,
    #[error("training data has a single class")]
    SingleClass,
    #[error("need at least {MIN_TRAIN_EXAMPLES} training examples, got {0}")]
    TooFewExamples(usize),
    #[error("{features} feature rows but {labels} labels")]
    LabelCount { features: usize, labels: usize },
    #[error("invalid training config: {0}")]
    InvalidConfig(&'static str),
    #[error("diverged: non-finite loss at epoch {0}")]
    Diverged(usize),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

/// Row-major features with one label per row.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledData {
    dim: usize,
    features: Vec<f64>,
    labels: Vec<Label>,
}

impl LabeledData {
    pub fn new(dim: usize, features: Vec<f64>, labels: Vec<Label>) -> Result<Self, ClassifierError> {
        if dim == 0 || features.len() != labels.len() * dim {
            return Err(ClassifierError::LabelCount {
                features: if dim == 0 { 0 } else { features.len() / dim },
                labels: labels.len(),
            });
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(ClassifierError::NonFiniteInput);
        }
        Ok(LabeledData { dim, features, labels })
    }

    pub fn from_matrix(m: &EmbeddingMatrix, labels: Vec<Label>) -> Result<Self, ClassifierError> {
        let features = m.rows().flatten().map(|&v| v as f64).collect();
        LabeledData::new(m.dim(), features, labels)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn label(&self, i: usize) -> Label {
        self.labels[i]
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SoftmaxHead {
    dim: usize,
    /// `NUM_CLASSES × dim`, row-major in [`Label::ALL`] order.
    weights: Vec<f64>,
    bias: [f64; NUM_CLASSES],
}

impl SoftmaxHead {
    pub fn zeros(dim: usize) -> Self {
        SoftmaxHead {
            dim,
            weights: vec![0.0; NUM_CLASSES * dim],
            bias: [0.0; NUM_CLASSES],
        }
    }

    /// Weights uniform in (-0.01, 0.01), zero bias.
    pub fn init(dim: usize, rng: &mut impl Rng) -> Self {
        let weights = (0..NUM_CLASSES * dim)
            .map(|_| rng.random_range(-INIT_SCALE..INIT_SCALE))
            .collect();
        SoftmaxHead {
            dim,
            weights,
            bias: [0.0; NUM_CLASSES],
        }
    }

    pub fn from_parts(dim: usize, weights: Vec<f64>, bias: [f64; NUM_CLASSES]) -> Result<Self, ClassifierError> {
        if weights.len() != NUM_CLASSES * dim {
            return Err(ClassifierError::DimMismatch {
                expected: NUM_CLASSES * dim,
                got: weights.len(),
            });
        }
        if weights.iter().chain(&bias).any(|v| !v.is_finite()) {
            return Err(ClassifierError::NonFiniteInput);
        }
        Ok(SoftmaxHead { dim, weights, bias })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> [f64; NUM_CLASSES] {
        self.bias
    }

    fn class_row(&self, k: usize) -> &[f64] {
        &self.weights[k * self.dim..(k + 1) * self.dim]
    }

    fn logits(&self, x: &[f64]) -> [f64; NUM_CLASSES] {
        let mut z = self.bias;
        for (k, zk) in z.iter_mut().enumerate() {
            *zk += self.class_row(k).iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
        }
        z
    }

    /// `softmax(Wx + b)` in [`Label::ALL`] order.
    pub fn predict_proba(&self, x: &[f64]) -> Result<[f64; NUM_CLASSES], ClassifierError> {
        if x.len() != self.dim {
            return Err(ClassifierError::DimMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(ClassifierError::NonFiniteInput);
        }
        Ok(softmax(self.logits(x)))
    }

    /// Most probable label; ties go to the earlier class.
    pub fn predict(&self, x: &[f64]) -> Result<Label, ClassifierError> {
        let p = self.predict_proba(x)?;
        let mut best = 0;
        for k in 1..NUM_CLASSES {
            if p[k] > p[best] {
                best = k;
            }
        }
        Ok(Label::ALL[best])
    }
}

pub fn softmax(z: [f64; NUM_CLASSES]) -> [f64; NUM_CLASSES] {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e = z.map(|v| (v - max).exp());
    let sum: f64 = e.iter().sum();
    e.map(|v| v / sum)
}

fn log_softmax(z: [f64; NUM_CLASSES]) -> [f64; NUM_CLASSES] {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
    z.map(|v| v - lse)
}

/// Mean cross-entropy over `idx`, without the penalty.
pub fn cross_entropy(head: &SoftmaxHead, data: &LabeledData, idx: &[usize]) -> f64 {
    let total: f64 = idx
        .iter()
        .map(|&i| -log_softmax(head.logits(data.row(i)))[data.label(i).index()])
        .sum();
    total / idx.len() as f64
}

/// Training objective: mean cross-entropy plus `l2/2 · |W|²`.
pub fn objective(head: &SoftmaxHead, data: &LabeledData, idx: &[usize], l2: f64) -> f64 {
    let penalty = 0.5 * l2 * head.weights.iter().map(|w| w * w).sum::<f64>();
    cross_entropy(head, data, idx) + penalty
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub weights: Vec<f64>,
    pub bias: [f64; NUM_CLASSES],
}

/// Analytic gradient of [`objective`]: `mean((p - onehot) xᵀ) + l2 W`.
pub fn gradient(head: &SoftmaxHead, data: &LabeledData, idx: &[usize], l2: f64) -> Gradient {
    let dim = head.dim;
    let mut gw = vec![0.0; NUM_CLASSES * dim];
    let mut gb = [0.0; NUM_CLASSES];
    for &i in idx {
        let x = data.row(i);
        let mut delta = softmax(head.logits(x));
        delta[data.label(i).index()] -= 1.0;
        for k in 0..NUM_CLASSES {
            gb[k] += delta[k];
            for (g, v) in gw[k * dim..(k + 1) * dim].iter_mut().zip(x) {
                *g += delta[k] * v;
            }
        }
    }
    let n = idx.len() as f64;
    for (g, w) in gw.iter_mut().zip(&head.weights) {
        *g = *g / n + l2 * w;
    }
    Gradient {
        weights: gw,
        bias: gb.map(|g| g / n),
    }
}

/// Largest relative disagreement between [`gradient`] and central finite
/// differences of [`objective`] (step 1e-5) over every parameter. Relative
/// error is `|a - n| / max(|a|, |n|, 1e-6)`.
pub fn gradient_check(head: &SoftmaxHead, data: &LabeledData, idx: &[usize], l2: f64) -> f64 {
    const H: f64 = 1e-5;
    let analytic = gradient(head, data, idx, l2);
    let mut probe = head.clone();
    let mut worst = 0.0f64;
    let mut compare = |a: f64, n: f64| {
        let rel = (a - n).abs() / a.abs().max(n.abs()).max(1e-6);
        worst = worst.max(rel);
    };
    for p in 0..head.weights.len() {
        let orig = probe.weights[p];
        probe.weights[p] = orig + H;
        let up = objective(&probe, data, idx, l2);
        probe.weights[p] = orig - H;
        let down = objective(&probe, data, idx, l2);
        probe.weights[p] = orig;
        compare(analytic.weights[p], (up - down) / (2.0 * H));
    }
    for k in 0..NUM_CLASSES {
        let orig = probe.bias[k];
        probe.bias[k] = orig + H;
        let up = objective(&probe, data, idx, l2);
        probe.bias[k] = orig - H;
        let down = objective(&probe, data, idx, l2);
        probe.bias[k] = orig;
        compare(analytic.bias[k], (up - down) / (2.0 * H));
    }
    worst
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub validation_fraction: f64,
    pub seed: u64,
    pub l2_penalty: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-2,
            epochs: 200,
            batch_size: 32,
            validation_fraction: 0.1,
            seed: 0,
            l2_penalty: 1e-4,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ClassifierError> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(ClassifierError::InvalidConfig("learning_rate must be positive"));
        }
        if self.batch_size == 0 {
            return Err(ClassifierError::InvalidConfig("batch_size must be positive"));
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 0.5) {
            return Err(ClassifierError::InvalidConfig("validation_fraction must be in (0, 0.5)"));
        }
        if !(self.l2_penalty >= 0.0 && self.l2_penalty.is_finite()) {
            return Err(ClassifierError::InvalidConfig("l2_penalty must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Mean training cross-entropy; index 0 is the initialization.
    pub train_loss: Vec<f64>,
    /// Mean validation cross-entropy, aligned with `train_loss`.
    pub val_loss: Vec<f64>,
    /// First epoch with the lowest validation loss.
    pub selected_epoch: usize,
    pub head: SoftmaxHead,
    pub train_indices: Vec<usize>,
    pub validation_indices: Vec<usize>,
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    step: i32,
}

impl Adam {
    fn new(n: usize) -> Self {
        Adam {
            m: vec![0.0; n],
            v: vec![0.0; n],
            step: 0,
        }
    }

    fn update(&mut self, params: &mut [f64], grads: impl Iterator<Item = f64>, lr: f64) {
        self.step += 1;
        let c1 = 1.0 - ADAM_BETA1.powi(self.step);
        let c2 = 1.0 - ADAM_BETA2.powi(self.step);
        for (((p, g), m), v) in params.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
            *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + ADAM_EPSILON);
        }
    }
}

/// Trains a head. A seeded, label-agnostic validation split is taken first;
/// the returned head is the snapshot at the epoch of lowest validation loss.
pub fn train_head(data: &LabeledData, cfg: &TrainConfig) -> Result<TrainReport, ClassifierError> {
    cfg.validate()?;
    if data.len() < MIN_TRAIN_EXAMPLES {
        return Err(ClassifierError::TooFewExamples(data.len()));
    }
    if data.labels.iter().collect::<BTreeSet<_>>().len() < 2 {
        return Err(ClassifierError::SingleClass);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.shuffle(&mut rng);
    let n_val = ((data.len() as f64 * cfg.validation_fraction).floor() as usize).max(1);
    let validation_indices = order[..n_val].to_vec();
    let mut train_indices = order[n_val..].to_vec();

    let mut head = SoftmaxHead::init(data.dim, &mut rng);
    let mut adam_w = Adam::new(head.weights.len());
    let mut adam_b = Adam::new(NUM_CLASSES);

    let mut train_loss = vec![cross_entropy(&head, data, &train_indices)];
    let mut val_loss = vec![cross_entropy(&head, data, &validation_indices)];
    let mut best = (val_loss[0], 0usize, head.clone());

    for epoch in 1..=cfg.epochs {
        train_indices.shuffle(&mut rng);
        for batch in train_indices.chunks(cfg.batch_size) {
            let g = gradient(&head, data, batch, cfg.l2_penalty);
            adam_w.update(&mut head.weights, g.weights.into_iter(), cfg.learning_rate);
            adam_b.update(&mut head.bias, g.bias.into_iter(), cfg.learning_rate);
        }
        let tl = cross_entropy(&head, data, &train_indices);
        let vl = cross_entropy(&head, data, &validation_indices);
        if !tl.is_finite() || !vl.is_finite() {
            return Err(ClassifierError::Diverged(epoch));
        }
        train_loss.push(tl);
        val_loss.push(vl);
        if vl < best.0 {
            best = (vl, epoch, head.clone());
        }
    }
    train_indices.sort_unstable();
    let mut validation_indices = validation_indices;
    validation_indices.sort_unstable();
    Ok(TrainReport {
        train_loss,
        val_loss,
        selected_epoch: best.1,
        head: best.2,
        train_indices,
        validation_indices,
    })
}

/// JSON checkpoint of a trained head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadCheckpoint {
    pub dim: usize,
    pub class_order: Vec<Label>,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub selected_epoch: usize,
}

impl HeadCheckpoint {
    pub fn new(head: &SoftmaxHead, selected_epoch: usize) -> Self {
        HeadCheckpoint {
            dim: head.dim,
            class_order: Label::ALL.to_vec(),
            weights: head.weights.clone(),
            bias: head.bias.to_vec(),
            selected_epoch,
        }
    }

    pub fn into_head(self) -> Result<SoftmaxHead, ClassifierError> {
        if self.class_order != Label::ALL {
            return Err(ClassifierError::Checkpoint(format!(
                "unsupported class order {:?}",
                self.class_order
            )));
        }
        let bias: [f64; NUM_CLASSES] = self
            .bias
            .try_into()
            .map_err(|_| ClassifierError::Checkpoint("bias must have 3 entries".into()))?;
        SoftmaxHead::from_parts(self.dim, self.weights, bias)
    }
}
