//! Pearson correlation for DA and Matthews correlation for CED.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::head::decide;
use crate::types::{CedClass, Dataset, Label, Task};

fn constant(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[0] == w[1])
}

/// Sample Pearson correlation.
pub fn pearson(preds: &[f64], golds: &[f64]) -> Result<f64> {
    if preds.len() != golds.len() {
        return Err(Error::LengthMismatch(preds.len(), golds.len()));
    }
    if preds.len() < 2 {
        return Err(Error::TooFew { needed: 2, got: preds.len() });
    }
    if constant(preds) {
        return Err(Error::UndefinedCorrelation("prediction"));
    }
    if constant(golds) {
        return Err(Error::UndefinedCorrelation("gold"));
    }
    let n = preds.len() as f64;
    let mp = preds.iter().sum::<f64>() / n;
    let mg = golds.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (p, g) in preds.iter().zip(golds) {
        let (dp, dg) = (p - mp, g - mg);
        sxy += dp * dg;
        sxx += dp * dp;
        syy += dg * dg;
    }
    Ok((sxy / libm::sqrt(sxx * syy)).clamp(-1.0, 1.0))
}

/// Binary confusion counts with ERR as the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Confusion {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    pub fn_: u64,
}

impl Confusion {
    pub fn from_labels(pred: &[CedClass], gold: &[CedClass]) -> Result<Self> {
        if pred.len() != gold.len() {
            return Err(Error::LengthMismatch(pred.len(), gold.len()));
        }
        let mut c = Confusion::default();
        for (p, g) in pred.iter().zip(gold) {
            match (p.is_positive(), g.is_positive()) {
                (true, true) => c.tp += 1,
                (false, false) => c.tn += 1,
                (true, false) => c.fp += 1,
                (false, true) => c.fn_ += 1,
            }
        }
        Ok(c)
    }

    /// Matthews correlation; 0 when any marginal is empty.
    pub fn mcc(&self) -> f64 {
        let (tp, tn, fp, fn_) = (self.tp as f64, self.tn as f64, self.fp as f64, self.fn_ as f64);
        let denom = (tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_);
        if denom == 0.0 {
            return 0.0;
        }
        ((tp * tn - fp * fn_) / libm::sqrt(denom)).clamp(-1.0, 1.0)
    }
}

pub fn mcc(pred: &[CedClass], gold: &[CedClass]) -> Result<f64> {
    if pred.is_empty() {
        return Err(Error::Empty("label list"));
    }
    Ok(Confusion::from_labels(pred, gold)?.mcc())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub metric: String,
    pub value: f64,
    pub count: usize,
    pub by_pair: BTreeMap<String, f64>,
}

fn metric_of(task: Task, preds: &[f64], labels: &[Label]) -> Result<f64> {
    match task {
        Task::Da => {
            let golds: Vec<f64> = labels.iter().map(Label::target).collect();
            pearson(preds, &golds)
        }
        Task::Ced => {
            let p: Vec<CedClass> = preds.iter().map(|x| decide(*x)).collect();
            let g: Vec<CedClass> = labels
                .iter()
                .map(|l| match l {
                    Label::Ced(c) => *c,
                    Label::Da(_) => CedClass::Not,
                })
                .collect();
            mcc(&p, &g)
        }
    }
}

/// Scores predictions (keyed by sample id) against `gold`, overall and per
/// language pair. CED predictions are probabilities thresholded at 0.5.
pub fn evaluate(preds: &BTreeMap<String, f64>, gold: &Dataset) -> Result<EvalReport> {
    let missing: Vec<&str> = gold
        .samples()
        .iter()
        .filter(|s| !preds.contains_key(&s.id))
        .map(|s| s.id.as_str())
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingIds(missing.join(", ")));
    }
    let task = gold.task();
    let collect = |pair: Option<&str>| -> (Vec<f64>, Vec<Label>) {
        gold.samples()
            .iter()
            .filter(|s| pair.is_none_or(|p| s.lang_pair.as_str() == p))
            .map(|s| (preds[&s.id], s.label))
            .unzip()
    };
    let (p, l) = collect(None);
    let value = metric_of(task, &p, &l)?;
    let mut by_pair = BTreeMap::new();
    for pair in gold.lang_pairs() {
        let (p, l) = collect(Some(pair.as_str()));
        by_pair.insert(String::from(pair.as_str()), metric_of(task, &p, &l)?);
    }
    Ok(EvalReport {
        metric: String::from(match task {
            Task::Da => "pearson",
            Task::Ced => "mcc",
        }),
        value,
        count: gold.len(),
        by_pair,
    })
}
