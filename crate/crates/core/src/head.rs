//! Linear prediction head over `[sentence embedding ; normalized features]`.
//!
//! DA uses a least-squares regression layer, CED a logistic classification
//! layer predicting P(ERR). Both are trained by full-batch gradient descent
//! from zero, so training is fully deterministic.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{NormalizationStats, UncertaintyFeatures, FEATURE_COUNT};
use crate::seed::fnv1a64;
use crate::types::{CedClass, Dataset, QeSample, Task, TokenSeq};

pub const DEFAULT_DIM: usize = 256;
pub const MIN_TOY_DIM: usize = 8;
/// P(ERR) at or above this is classified ERR.
pub const DECISION_THRESHOLD: f64 = 0.5;
pub const SEPARATOR: &str = "<sep>";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Embedding(Vec<f64>);

impl Embedding {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::param("embedding", "contains a non-finite value"));
        }
        Ok(Embedding(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

/// Hashed, signed bag of tokens over `src ++ [<sep>] ++ mt`, L2-normalized.
pub fn toy_encode(src: &TokenSeq, mt: &TokenSeq, dim: usize) -> Result<Embedding> {
    if dim < MIN_TOY_DIM {
        return Err(Error::param("dim", format!("{dim} is below {MIN_TOY_DIM}")));
    }
    let mut v = vec![0.0f64; dim];
    for tok in src.iter().chain(core::iter::once(SEPARATOR)).chain(mt.iter()) {
        let h = fnv1a64(tok);
        let sign = if h >> 63 == 0 { 1.0 } else { -1.0 };
        v[(h % dim as u64) as usize] += sign;
    }
    let norm = libm::sqrt(v.iter().map(|x| x * x).sum::<f64>());
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    Embedding::new(v)
}

/// Sentence-pair encoder producing the embedding half of the head input.
pub trait Encoder {
    fn dim(&self) -> usize;
    fn encode(&self, sample: &QeSample) -> Result<Embedding>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToyEncoder {
    pub dim: usize,
}

impl Encoder for ToyEncoder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn encode(&self, sample: &QeSample) -> Result<Embedding> {
        toy_encode(&sample.src, &sample.mt, self.dim)
    }
}

/// Which encoder produced a model's embeddings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum EncoderConfig {
    Toy { dim: usize },
    /// Embeddings supplied per sample id from an external source.
    External { dim: usize },
}

impl EncoderConfig {
    pub fn dim(&self) -> usize {
        match *self {
            EncoderConfig::Toy { dim } | EncoderConfig::External { dim } => dim,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HyperParams {
    pub learning_rate: f64,
    pub epochs: usize,
    pub l2: f64,
}

impl Default for HyperParams {
    fn default() -> Self {
        HyperParams {
            learning_rate: 0.1,
            epochs: 500,
            l2: 1e-4,
        }
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + libm::exp(-z))
    } else {
        let e = libm::exp(z);
        e / (1.0 + e)
    }
}

fn dot(w: &[f64], v: &[f64]) -> f64 {
    w.iter().zip(v).map(|(a, b)| a * b).sum()
}

/// Result of [`fit_linear`]: parameters and the objective before each epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearFit {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub losses: Vec<f64>,
}

/// Full-batch gradient descent on a linear model, starting from zero.
///
/// DA minimizes `½·mean((w·v + b − y)²) + ½·l2·‖w‖²`; CED minimizes the
/// mean binary cross-entropy of `sigmoid(w·v + b)` plus the same penalty.
/// The bias is not penalized.
pub fn fit_linear(inputs: &[Vec<f64>], targets: &[f64], task: Task, hyper: &HyperParams) -> Result<LinearFit> {
    if inputs.is_empty() {
        return Err(Error::Empty("training set"));
    }
    if inputs.len() != targets.len() {
        return Err(Error::LengthMismatch(inputs.len(), targets.len()));
    }
    let dim = inputs[0].len();
    if let Some(bad) = inputs.iter().find(|v| v.len() != dim) {
        return Err(Error::Dimension { expected: dim, got: bad.len() });
    }
    let lr_ok = hyper.learning_rate.is_finite() && hyper.learning_rate > 0.0;
    if !lr_ok || hyper.l2.is_nan() || hyper.l2 < 0.0 {
        return Err(Error::param("hyper", "learning_rate must be positive and l2 non-negative"));
    }
    let n = inputs.len() as f64;
    let mut w = vec![0.0; dim];
    let mut b = 0.0;
    let mut losses = Vec::with_capacity(hyper.epochs);
    let mut grad = vec![0.0; dim];
    for epoch in 1..=hyper.epochs {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut grad_b = 0.0;
        let mut loss = 0.0;
        for (v, &y) in inputs.iter().zip(targets) {
            let z = dot(&w, v) + b;
            let residual = match task {
                Task::Da => {
                    loss += 0.5 * (z - y) * (z - y);
                    z - y
                }
                Task::Ced => {
                    // log(1 + e^z) − y·z, computed stably.
                    loss += z.max(0.0) + libm::log1p(libm::exp(-z.abs())) - y * z;
                    sigmoid(z) - y
                }
            };
            grad_b += residual;
            for (g, x) in grad.iter_mut().zip(v) {
                *g += residual * x;
            }
        }
        loss = loss / n + 0.5 * hyper.l2 * dot(&w, &w);
        if !loss.is_finite() {
            return Err(Error::NanLoss(epoch));
        }
        losses.push(loss);
        for (wi, g) in w.iter_mut().zip(&grad) {
            *wi -= hyper.learning_rate * (g / n + hyper.l2 * *wi);
        }
        b -= hyper.learning_rate * grad_b / n;
    }
    if w.iter().any(|x| !x.is_finite()) || !b.is_finite() {
        return Err(Error::NanLoss(hyper.epochs));
    }
    Ok(LinearFit { weights: w, bias: b, losses })
}

/// Trained head: embedding weights first, then the 21 feature weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadModel {
    pub task: Task,
    pub weights: Vec<f64>,
    pub bias: f64,
    pub encoder: EncoderConfig,
    pub norm_stats: NormalizationStats,
    pub hyper: HyperParams,
}

impl HeadModel {
    pub fn input_dim(&self) -> usize {
        self.encoder.dim() + FEATURE_COUNT
    }

    /// Raw linear score `w·v + b`.
    pub fn score(&self, embedding: &Embedding, feats: &UncertaintyFeatures) -> Result<f64> {
        let v = head_input(embedding, feats, &self.norm_stats);
        if v.len() != self.weights.len() {
            return Err(Error::Dimension { expected: self.weights.len(), got: v.len() });
        }
        Ok(dot(&self.weights, &v) + self.bias)
    }

    /// DA score, or P(ERR) for CED.
    pub fn predict(&self, embedding: &Embedding, feats: &UncertaintyFeatures) -> Result<f64> {
        let z = self.score(embedding, feats)?;
        Ok(match self.task {
            Task::Da => z,
            Task::Ced => sigmoid(z),
        })
    }
}

/// Thresholds a CED probability.
pub fn decide(prob_err: f64) -> CedClass {
    if prob_err >= DECISION_THRESHOLD {
        CedClass::Err
    } else {
        CedClass::Not
    }
}

/// `[embedding ; normalized features]`.
pub fn head_input(embedding: &Embedding, feats: &UncertaintyFeatures, stats: &NormalizationStats) -> Vec<f64> {
    let mut v = Vec::with_capacity(embedding.dim() + FEATURE_COUNT);
    v.extend_from_slice(embedding.values());
    v.extend_from_slice(&stats.apply(feats));
    v
}

fn lookup<'a>(feats: &'a BTreeMap<String, UncertaintyFeatures>, samples: &[QeSample]) -> Result<Vec<&'a UncertaintyFeatures>> {
    let mut missing = Vec::new();
    let found: Vec<_> = samples
        .iter()
        .filter_map(|s| {
            let f = feats.get(&s.id);
            if f.is_none() {
                missing.push(s.id.as_str());
            }
            f
        })
        .collect();
    if missing.is_empty() {
        Ok(found)
    } else {
        Err(Error::MissingIds(missing.join(", ")))
    }
}

/// Fits the normalizer on the training features, then the linear layer.
/// Every training sample needs a feature row with the same id.
pub fn train_head<E: Encoder + ?Sized>(
    train: &Dataset,
    feats: &BTreeMap<String, UncertaintyFeatures>,
    encoder: &E,
    encoder_config: EncoderConfig,
    hyper: &HyperParams,
) -> Result<HeadModel> {
    if train.is_empty() {
        return Err(Error::Empty("training set"));
    }
    if encoder.dim() != encoder_config.dim() {
        return Err(Error::Dimension { expected: encoder_config.dim(), got: encoder.dim() });
    }
    let rows = lookup(feats, train.samples())?;
    if train.task() == Task::Ced {
        let has = |c: CedClass| train.samples().iter().any(|s| s.label == crate::types::Label::Ced(c));
        if !(has(CedClass::Not) && has(CedClass::Err)) {
            return Err(Error::SingleClass("training set".into()));
        }
    }
    let owned: Vec<UncertaintyFeatures> = rows.iter().map(|f| **f).collect();
    let norm_stats = if owned.len() >= 2 {
        NormalizationStats::fit(&owned)?
    } else {
        NormalizationStats::identity()
    };
    let mut inputs = Vec::with_capacity(train.len());
    for (s, f) in train.samples().iter().zip(&owned) {
        let e = encoder.encode(s)?;
        if e.dim() != encoder.dim() {
            return Err(Error::Dimension { expected: encoder.dim(), got: e.dim() });
        }
        inputs.push(head_input(&e, f, &norm_stats));
    }
    let targets: Vec<f64> = train.samples().iter().map(|s| s.label.target()).collect();
    let fit = fit_linear(&inputs, &targets, train.task(), hyper)?;
    Ok(HeadModel {
        task: train.task(),
        weights: fit.weights,
        bias: fit.bias,
        encoder: encoder_config,
        norm_stats,
        hyper: *hyper,
    })
}

/// Predicts one sample, encoding it with `encoder`.
pub fn predict<E: Encoder + ?Sized>(
    model: &HeadModel,
    sample: &QeSample,
    feats: &UncertaintyFeatures,
    encoder: &E,
) -> Result<f64> {
    model.predict(&encoder.encode(sample)?, feats)
}
