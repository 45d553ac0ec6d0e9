//! The 21 uncertainty features of a (source, translation) pair.
//!
//! Three come from the forced-decoding log-probabilities of the translation
//! itself. Nine summarize MC-dropout samples and nine summarize translations
//! of noised sources; each of those groups is the (mean, std, combo) of
//! three per-sample series: similarity to the translation, average
//! similarity to the other samples, and mean step log-probability.

use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::glassbox::{self, Dropout, GlassBox};
use crate::noise::{self, MaskedLm, NoiseConfig};
use crate::seed::{self, Purpose};
use crate::similarity::sim;
use crate::stats::{self, SeriesStats};
use crate::types::{QeSample, TokenSeq};

pub const FEATURE_COUNT: usize = 21;

/// Canonical feature names, in vector order.
pub const FEATURE_NAMES: [&str; FEATURE_COUNT] = [
    "dp_mean",
    "dp_std",
    "dp_combo",
    "mc_sim_mean",
    "mc_sim_std",
    "mc_sim_combo",
    "mc_sim_inner_mean",
    "mc_sim_inner_std",
    "mc_sim_inner_combo",
    "mc_pstep_mean",
    "mc_pstep_std",
    "mc_pstep_combo",
    "noise_sim_mean",
    "noise_sim_std",
    "noise_sim_combo",
    "noise_sim_inner_mean",
    "noise_sim_inner_std",
    "noise_sim_inner_combo",
    "noise_pstep_mean",
    "noise_pstep_std",
    "noise_pstep_combo",
];

/// Sampling configuration for feature extraction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureConfig {
    pub n_mc: usize,
    pub dropout_rate: f64,
    pub n_noise: usize,
    pub noise_rounds: usize,
    pub p_insert: f64,
    pub p_delete: f64,
    pub base_seed: u64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        let noise = NoiseConfig::default();
        FeatureConfig {
            n_mc: 8,
            dropout_rate: 0.3,
            n_noise: 8,
            noise_rounds: noise.rounds,
            p_insert: noise.p_insert,
            p_delete: noise.p_delete,
            base_seed: 0,
        }
    }
}

impl FeatureConfig {
    pub fn noise(&self) -> NoiseConfig {
        NoiseConfig {
            rounds: self.noise_rounds,
            p_insert: self.p_insert,
            p_delete: self.p_delete,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_mc < 2 || self.n_noise < 2 {
            return Err(Error::param("sample counts", "n_mc and n_noise must be at least 2"));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::param("dropout_rate", format!("{} is outside [0, 1)", self.dropout_rate)));
        }
        self.noise().validate()
    }

    /// Per-sample configuration: the base seed is replaced by one derived
    /// from the sample id.
    pub fn for_sample(&self, id: &str) -> FeatureConfig {
        FeatureConfig {
            base_seed: seed::derive(self.base_seed, seed::fnv1a64(id), Purpose::Sample),
            ..*self
        }
    }
}

/// Statistics of the three per-sample series of one sampling scheme.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplingFeatures {
    pub sim: SeriesStats,
    pub sim_inner: SeriesStats,
    pub pstep: SeriesStats,
}

/// Order-independent sum: values are added in ascending order.
fn sorted_sum(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    values.iter().sum()
}

fn stats_sorted(values: &mut [f64]) -> Result<SeriesStats> {
    values.sort_by(f64::total_cmp);
    stats::sample_stats(values)
}

/// Summarizes sampled translations against `mt`. `pstep[i]` is the mean
/// step log-probability of `samples[i]`. The inner similarity of sample `i`
/// averages `sim(samples[i], samples[j])` over all `j`, including `i`.
pub fn sampling_features(mt: &TokenSeq, samples: &[TokenSeq], pstep: &[f64]) -> Result<SamplingFeatures> {
    if samples.len() != pstep.len() {
        return Err(Error::LengthMismatch(samples.len(), pstep.len()));
    }
    let n = samples.len() as f64;
    let mut sims: Vec<f64> = samples.iter().map(|s| sim(mt, s).value()).collect();
    let mut inner: Vec<f64> = samples
        .iter()
        .map(|a| {
            let mut row: Vec<f64> = samples.iter().map(|b| sim(a, b).value()).collect();
            sorted_sum(&mut row) / n
        })
        .collect();
    let mut pstep = pstep.to_vec();
    Ok(SamplingFeatures {
        sim: stats_sorted(&mut sims)?,
        sim_inner: stats_sorted(&mut inner)?,
        pstep: stats_sorted(&mut pstep)?,
    })
}

/// MC-dropout features: `n_mc` dropout decodes of `src`, compared with `mt`.
pub fn mc_features<M: GlassBox + ?Sized>(
    model: &M,
    src: &TokenSeq,
    mt: &TokenSeq,
    cfg: &FeatureConfig,
) -> Result<SamplingFeatures> {
    cfg.validate()?;
    let samples = glassbox::mc_dropout_samples(model, src, cfg.n_mc, cfg.dropout_rate, cfg.base_seed)?;
    let pstep = samples
        .iter()
        .map(|s| stats::expectation(s.step_logprobs.values()))
        .collect::<Result<Vec<_>>>()?;
    let tokens: Vec<TokenSeq> = samples.into_iter().map(|s| s.tokens).collect();
    sampling_features(mt, &tokens, &pstep)
}

/// Noised-input features: `n_noise` noised sources decoded without dropout.
pub fn noise_features<M: GlassBox + ?Sized, L: MaskedLm + ?Sized>(
    model: &M,
    mlm: &L,
    src: &TokenSeq,
    mt: &TokenSeq,
    cfg: &FeatureConfig,
) -> Result<SamplingFeatures> {
    cfg.validate()?;
    let noise_cfg = cfg.noise();
    let mut tokens = Vec::with_capacity(cfg.n_noise);
    let mut pstep = Vec::with_capacity(cfg.n_noise);
    for i in 0..cfg.n_noise as u64 {
        let noised = noise::generate_noised_input(src, &noise_cfg, mlm, seed::derive(cfg.base_seed, i, Purpose::Noise))?;
        let decoded = model.greedy_translate(&noised, Dropout::Off)?;
        let forced = model.force_decode(&noised, &decoded.tokens, Dropout::Off)?;
        pstep.push(stats::expectation(forced.values())?);
        tokens.push(decoded.tokens);
    }
    sampling_features(mt, &tokens, &pstep)
}

/// The 21 features of one sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct UncertaintyFeatures([f64; FEATURE_COUNT]);

impl UncertaintyFeatures {
    pub fn from_array(values: [f64; FEATURE_COUNT]) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::param("feature", format!("{} is not finite", FEATURE_NAMES[i])));
        }
        Ok(UncertaintyFeatures(values))
    }

    pub fn from_parts(dp: SeriesStats, mc: &SamplingFeatures, noise: &SamplingFeatures) -> Result<Self> {
        let mut v = [0.0; FEATURE_COUNT];
        let groups = [dp, mc.sim, mc.sim_inner, mc.pstep, noise.sim, noise.sim_inner, noise.pstep];
        for (i, g) in groups.iter().enumerate() {
            v[3 * i..3 * i + 3].copy_from_slice(&[g.mean, g.std, g.combo]);
        }
        UncertaintyFeatures::from_array(v)
    }

    pub fn zeros() -> Self {
        UncertaintyFeatures([0.0; FEATURE_COUNT])
    }

    pub fn values(&self) -> &[f64; FEATURE_COUNT] {
        &self.0
    }

    /// Value by canonical name.
    pub fn get(&self, name: &str) -> Option<f64> {
        FEATURE_NAMES.iter().position(|n| *n == name).map(|i| self.0[i])
    }

    pub fn dp_mean(&self) -> f64 {
        self.0[0]
    }
}

/// Extracts all 21 features of `sample`. Random streams are derived from
/// `cfg.base_seed` and the sample id, so the result does not depend on the
/// order in which samples are processed.
pub fn extract_features<M: GlassBox + ?Sized, L: MaskedLm + ?Sized>(
    sample: &QeSample,
    model: &M,
    mlm: &L,
    cfg: &FeatureConfig,
) -> Result<UncertaintyFeatures> {
    cfg.validate()?;
    let forced = model.force_decode(&sample.src, &sample.mt, Dropout::Off)?;
    let p = forced.values();
    let dp = SeriesStats {
        mean: stats::expectation(p)?,
        std: stats::std_dev(p)?,
        combo: stats::combo(p)?,
    };
    let local = cfg.for_sample(&sample.id);
    let mc = mc_features(model, &sample.src, &sample.mt, &local)?;
    let noise = noise_features(model, mlm, &sample.src, &sample.mt, &local)?;
    UncertaintyFeatures::from_parts(dp, &mc, &noise)
}

/// Per-feature z-score statistics fitted on a training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationStats {
    pub mean: [f64; FEATURE_COUNT],
    pub std: [f64; FEATURE_COUNT],
}

impl NormalizationStats {
    /// Population mean and standard deviation of every column.
    pub fn fit(rows: &[UncertaintyFeatures]) -> Result<Self> {
        if rows.len() < 2 {
            return Err(Error::TooFew { needed: 2, got: rows.len() });
        }
        let mut mean = [0.0; FEATURE_COUNT];
        let mut std = [0.0; FEATURE_COUNT];
        let mut column = Vec::with_capacity(rows.len());
        for f in 0..FEATURE_COUNT {
            column.clear();
            column.extend(rows.iter().map(|r| r.0[f]));
            mean[f] = stats::expectation(&column)?;
            std[f] = stats::std_dev(&column)?;
        }
        Ok(NormalizationStats { mean, std })
    }

    /// Statistics that leave features unchanged.
    pub fn identity() -> Self {
        NormalizationStats {
            mean: [0.0; FEATURE_COUNT],
            std: [1.0; FEATURE_COUNT],
        }
    }

    /// `(v − mean) / std`; columns with std below 1e-9 map to 0.
    pub fn apply(&self, v: &UncertaintyFeatures) -> [f64; FEATURE_COUNT] {
        let mut out = [0.0; FEATURE_COUNT];
        for (f, o) in out.iter_mut().enumerate() {
            if self.std[f] >= stats::SIGMA_GUARD {
                *o = (v.0[f] - self.mean[f]) / self.std[f];
            }
        }
        out
    }
}

pub fn fit_normalizer(rows: &[UncertaintyFeatures]) -> Result<NormalizationStats> {
    NormalizationStats::fit(rows)
}

pub fn apply_normalizer(v: &UncertaintyFeatures, stats: &NormalizationStats) -> [f64; FEATURE_COUNT] {
    stats.apply(v)
}
