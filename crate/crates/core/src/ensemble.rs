//! Greedy forward ensembling of prediction sets.

use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval;
use crate::types::{Dataset, Task};

/// Scores of one model, keyed by sample id (DA score or P(ERR)).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionSet {
    pub model_id: String,
    pub scores: BTreeMap<String, f64>,
}

fn id_difference(a: &PredictionSet, b: &PredictionSet) -> Option<String> {
    fn only<'a>(x: &'a PredictionSet, y: &PredictionSet) -> Vec<&'a str> {
        x.scores.keys().filter(|k| !y.scores.contains_key(*k)).map(String::as_str).collect()
    }
    let (ab, ba) = (only(a, b), only(b, a));
    if ab.is_empty() && ba.is_empty() {
        None
    } else {
        Some(format!(
            "only in `{}`: [{}]; only in `{}`: [{}]",
            a.model_id,
            ab.join(", "),
            b.model_id,
            ba.join(", ")
        ))
    }
}

/// Per-id arithmetic mean of the members' scores.
pub fn average_predictions(members: &[&PredictionSet]) -> Result<PredictionSet> {
    let first = *members.first().ok_or(Error::Empty("ensemble"))?;
    for m in &members[1..] {
        if let Some(diff) = id_difference(first, m) {
            return Err(Error::IdSetMismatch(diff));
        }
    }
    let k = members.len() as f64;
    let scores = first
        .scores
        .iter()
        .map(|(id, &v0)| {
            let vals = members.iter().map(|m| m.scores[id]);
            let mean = if vals.clone().all(|v| v.to_bits() == v0.to_bits()) {
                v0
            } else {
                vals.sum::<f64>() / k
            };
            (id.clone(), mean)
        })
        .collect();
    let ids: Vec<&str> = members.iter().map(|m| m.model_id.as_str()).collect();
    Ok(PredictionSet {
        model_id: ids.join("+"),
        scores,
    })
}

/// Accepted members in order of acceptance, with the dev metric of the
/// ensemble after each acceptance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSelection {
    pub members: Vec<String>,
    pub trajectory: Vec<f64>,
    pub task: Task,
    pub max_steps: usize,
}

/// Dev metric of one prediction set: Pearson for DA, MCC at 0.5 for CED.
pub fn dev_metric(preds: &PredictionSet, dev: &Dataset) -> Result<f64> {
    eval::evaluate(&preds.scores, dev)
        .map(|r| r.value)
        .map_err(|e| Error::Candidate {
            model: preds.model_id.clone(),
            source: Box::new(e),
        })
}

/// Sorts candidates by dev metric (ties by model id), starts from the best
/// one, and walks the sorted list adding each next model while the averaged
/// ensemble strictly improves the dev metric, up to `max_steps` members.
pub fn greedy_select(candidates: &[PredictionSet], dev: &Dataset, max_steps: usize) -> Result<EnsembleSelection> {
    if candidates.is_empty() {
        return Err(Error::Empty("candidate list"));
    }
    if max_steps == 0 {
        return Err(Error::param("max_steps", "must be at least 1"));
    }
    for c in &candidates[1..] {
        if let Some(diff) = id_difference(&candidates[0], c) {
            return Err(Error::IdSetMismatch(diff));
        }
    }
    let mut ranked: Vec<(f64, &PredictionSet)> = candidates
        .iter()
        .map(|c| Ok((dev_metric(c, dev)?, c)))
        .collect::<Result<_>>()?;
    ranked.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.model_id.cmp(&b.1.model_id)));

    let mut chosen = alloc::vec![ranked[0].1];
    let mut trajectory = alloc::vec![ranked[0].0];
    for &(_, next) in &ranked[1..] {
        if chosen.len() >= max_steps {
            break;
        }
        chosen.push(next);
        let avg = average_predictions(&chosen)?;
        let value = dev_metric(&avg, dev)?;
        if value > trajectory[trajectory.len() - 1] {
            trajectory.push(value);
        } else {
            chosen.pop();
            break;
        }
    }
    Ok(EnsembleSelection {
        members: chosen.iter().map(|c| c.model_id.clone()).collect(),
        trajectory,
        task: dev.task(),
        max_steps,
    })
}

/// Averaged predictions of the selected members.
pub fn selected_average(candidates: &[PredictionSet], selection: &EnsembleSelection) -> Result<PredictionSet> {
    let members = selection
        .members
        .iter()
        .map(|id| {
            candidates
                .iter()
                .find(|c| &c.model_id == id)
                .ok_or_else(|| Error::MissingIds(id.clone()))
        })
        .collect::<Result<Vec<_>>>()?;
    average_predictions(&members)
}
