//! Training-set augmentation: per-pair class balancing for CED and
//! multilingual mixing.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::index;

use crate::error::{Error, Result};
use crate::seed::{self, Purpose};
use crate::types::{CedClass, Dataset, Label, QeSample, Task};

/// Separator between an original id and its duplicate counter.
pub const DUPLICATE_MARK: &str = "~up";

/// How samples from different language pairs are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MixStrategy {
    /// Keep every sample as source + translation.
    AsIs,
    /// Put the English side first, swapping `xx-en` samples to `en-xx`.
    EnglishFirst,
}

/// Duplicates minority-class samples of every language pair until both
/// classes have the same count.
///
/// Each minority sample appears `floor(maj / min)` times; the remaining
/// `maj mod min` copies are drawn without replacement from the minority set.
/// Duplicates get ids `<id>~up<k>` and are appended after the original
/// samples, pair by pair in order of first appearance.
pub fn upsample_minority(data: &Dataset, seed: u64) -> Result<Dataset> {
    if data.task() != Task::Ced {
        return Err(Error::TaskMismatch(Task::Ced.name(), data.task().name()));
    }
    let mut out: Vec<QeSample> = data.samples().to_vec();
    for pair in data.lang_pairs() {
        let of_class = |c: CedClass| -> Vec<&QeSample> {
            data.samples()
                .iter()
                .filter(|s| s.lang_pair == pair && s.label == Label::Ced(c))
                .collect()
        };
        let not = of_class(CedClass::Not);
        let err = of_class(CedClass::Err);
        if not.is_empty() || err.is_empty() {
            return Err(Error::SingleClass(pair.as_str().into()));
        }
        let (minority, majority) = if err.len() < not.len() {
            (err, not)
        } else {
            (not, err)
        };
        let (min, maj) = (minority.len(), majority.len());
        let repeats = maj / min;
        let mut copies = alloc::vec![0usize; min];
        let mut push = |i: usize, out: &mut Vec<QeSample>| {
            copies[i] += 1;
            let mut dup = minority[i].clone();
            dup.id = format!("{}{DUPLICATE_MARK}{}", dup.id, copies[i]);
            out.push(dup);
        };
        for _ in 1..repeats {
            for i in 0..min {
                push(i, &mut out);
            }
        }
        let rest = maj % min;
        if rest > 0 {
            let mut rng = seed::rng(seed::derive(
                seed,
                seed::fnv1a64(pair.as_str()),
                Purpose::Sample,
            ));
            let mut picks = index::sample(&mut rng, min, rest).into_vec();
            picks.sort_unstable();
            for i in picks {
                push(i, &mut out);
            }
        }
    }
    Dataset::new(Task::Ced, out)
}

/// Concatenates datasets of one task, optionally moving English first.
pub fn mix_multilingual(datasets: &[Dataset], strategy: MixStrategy) -> Result<Dataset> {
    let task = datasets.first().ok_or(Error::Empty("dataset list"))?.task();
    let mut out = Vec::with_capacity(datasets.iter().map(Dataset::len).sum());
    for d in datasets {
        if d.task() != task {
            return Err(Error::TaskMismatch(task.name(), d.task().name()));
        }
        for s in d.samples() {
            out.push(match strategy {
                MixStrategy::AsIs => s.clone(),
                MixStrategy::EnglishFirst => english_first(s)?,
            });
        }
    }
    Dataset::new(task, out)
}

fn english_first(s: &QeSample) -> Result<QeSample> {
    let pair = &s.lang_pair;
    if pair.source() == "en" {
        Ok(s.clone())
    } else if pair.target() == "en" {
        Ok(QeSample {
            id: s.id.clone(),
            lang_pair: pair.reversed(),
            src: s.mt.clone(),
            mt: s.src.clone(),
            label: s.label,
        })
    } else {
        Err(Error::NoEnglishSide(String::from(pair.as_str())))
    }
}
