//! Feature extraction over a dataset with a fixed number of worker threads.
//!
//! Samples are dealt to workers round-robin and results are written back by
//! index, so the output is identical for every worker count.

use std::num::NonZeroUsize;
use std::thread;

use anyhow::{anyhow, Result};

use qe_core::features::{extract_features, FeatureConfig, UncertaintyFeatures};
use qe_core::glassbox::GlassBox;
use qe_core::noise::MaskedLm;
use qe_core::Dataset;

pub fn extract_dataset<M, L>(
    data: &Dataset,
    model: &M,
    mlm: &L,
    cfg: &FeatureConfig,
    workers: NonZeroUsize,
) -> Result<Vec<(String, UncertaintyFeatures)>>
where
    M: GlassBox + Sync + ?Sized,
    L: MaskedLm + Sync + ?Sized,
{
    cfg.validate()?;
    let samples = data.samples();
    let workers = workers.get().min(samples.len().max(1));
    let mut slots: Vec<Option<qe_core::Result<UncertaintyFeatures>>> = vec![None; samples.len()];
    thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                scope.spawn(move || {
                    samples
                        .iter()
                        .enumerate()
                        .skip(w)
                        .step_by(workers)
                        .map(|(i, s)| (i, extract_features(s, model, mlm, cfg)))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        for h in handles {
            for (i, r) in h.join().expect("extraction worker panicked") {
                slots[i] = Some(r);
            }
        }
    });
    samples
        .iter()
        .zip(slots)
        .map(|(s, r)| {
            let f = r
                .ok_or_else(|| anyhow!("sample `{}` was not processed", s.id))?
                .map_err(|e| anyhow!("sample `{}`: {e}", s.id))?;
            Ok((s.id.clone(), f))
        })
        .collect()
}
