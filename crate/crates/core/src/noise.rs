//! Noised source generation by random "post-editing".
//!
//! For each round, every current token is deleted with probability
//! `p_delete`, then a `<mask>` is inserted into each of the `k + 1` gaps of
//! the remaining `k` tokens with probability `p_insert`. Masks from earlier
//! rounds can be deleted later. If nothing is left a single mask is
//! inserted, and finally a masked LM fills every mask.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::{self, Purpose};
use crate::types::{TokenSeq, MASK};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    pub rounds: usize,
    pub p_insert: f64,
    pub p_delete: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig {
            rounds: 2,
            p_insert: 0.15,
            p_delete: 0.15,
        }
    }
}

impl NoiseConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rounds == 0 {
            return Err(Error::param("noise rounds", "must be at least 1"));
        }
        for (name, p) in [("p_insert", self.p_insert), ("p_delete", self.p_delete)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::param(name, format!("{p} is outside [0, 1]")));
            }
        }
        Ok(())
    }
}

/// Fills `<mask>` tokens.
pub trait MaskedLm {
    fn fill(&self, masked: &TokenSeq, seed: u64) -> TokenSeq;
}

impl<M: MaskedLm + ?Sized> MaskedLm for &M {
    fn fill(&self, masked: &TokenSeq, seed: u64) -> TokenSeq {
        (**self).fill(masked, seed)
    }
}

/// Unigram stand-in for a masked LM: every mask is replaced by a token
/// sampled from add-one smoothed corpus frequencies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "UnigramDoc", into = "UnigramDoc")]
pub struct UnigramMlm {
    vocab: Vec<String>,
    probs: Vec<f64>,
    cumulative: Vec<f64>,
}

/// Persisted form of [`UnigramMlm`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnigramDoc {
    pub vocab: Vec<String>,
    pub probs: Vec<f64>,
}

impl TryFrom<UnigramDoc> for UnigramMlm {
    type Error = Error;
    fn try_from(doc: UnigramDoc) -> Result<Self> {
        UnigramMlm::new(doc.vocab, doc.probs)
    }
}

impl From<UnigramMlm> for UnigramDoc {
    fn from(m: UnigramMlm) -> UnigramDoc {
        UnigramDoc {
            vocab: m.vocab,
            probs: m.probs,
        }
    }
}

impl UnigramMlm {
    pub fn new(vocab: Vec<String>, probs: Vec<f64>) -> Result<Self> {
        if vocab.is_empty() {
            return Err(Error::Empty("unigram table"));
        }
        if vocab.len() != probs.len() {
            return Err(Error::LengthMismatch(vocab.len(), probs.len()));
        }
        if probs.iter().any(|p| !(p.is_finite() && *p > 0.0)) {
            return Err(Error::param("probs", "entries must be positive"));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::param("probs", format!("sum to {total}")));
        }
        let mut acc = 0.0;
        let cumulative = probs
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        Ok(UnigramMlm {
            vocab,
            probs,
            cumulative,
        })
    }

    /// Builds the table from corpus sentences with add-one smoothing over
    /// the observed vocabulary. `<mask>` itself is never a candidate.
    pub fn from_corpus<'a>(sentences: impl IntoIterator<Item = &'a TokenSeq>) -> Result<Self> {
        let mut counts: BTreeMap<&str, u64> = BTreeMap::new();
        for s in sentences {
            for tok in s.iter().filter(|t| *t != MASK) {
                *counts.entry(tok).or_default() += 1;
            }
        }
        let total: u64 = counts.values().map(|c| c + 1).sum();
        let (vocab, probs) = counts
            .into_iter()
            .map(|(tok, c)| (tok.to_string(), (c + 1) as f64 / total as f64))
            .unzip();
        UnigramMlm::new(vocab, probs)
    }

    pub fn vocab(&self) -> &[String] {
        &self.vocab
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    fn draw(&self, u: f64) -> &str {
        let target = u * self.cumulative[self.cumulative.len() - 1];
        let i = self.cumulative.partition_point(|c| *c <= target);
        &self.vocab[i.min(self.vocab.len() - 1)]
    }
}

impl MaskedLm for UnigramMlm {
    fn fill(&self, masked: &TokenSeq, seed: u64) -> TokenSeq {
        let mut rng = seed::rng(seed);
        let tokens = masked
            .iter()
            .map(|t| {
                if t == MASK {
                    self.draw(rng.random::<f64>()).to_string()
                } else {
                    t.to_string()
                }
            })
            .collect();
        TokenSeq::from_vec_unchecked(tokens)
    }
}

/// Applies the delete/insert rounds to `x` and returns the masked sequence,
/// before any filling.
pub fn post_edit_masks(x: &TokenSeq, cfg: &NoiseConfig, seed: u64) -> Result<TokenSeq> {
    if x.is_empty() {
        return Err(Error::Empty("source"));
    }
    cfg.validate()?;
    let mut rng = seed::rng(seed);
    let mut cur: Vec<String> = x.tokens().to_vec();
    for _ in 0..cfg.rounds {
        cur.retain(|_| rng.random::<f64>() >= cfg.p_delete);
        let mut next = Vec::with_capacity(2 * cur.len() + 1);
        for tok in cur.drain(..) {
            if rng.random::<f64>() < cfg.p_insert {
                next.push(MASK.to_string());
            }
            next.push(tok);
        }
        if rng.random::<f64>() < cfg.p_insert {
            next.push(MASK.to_string());
        }
        cur = next;
    }
    if cur.is_empty() {
        cur.push(MASK.to_string());
    }
    Ok(TokenSeq::from_vec_unchecked(cur))
}

/// Produces a noised version of `x`; mask filling uses a seed derived from
/// `seed`.
pub fn generate_noised_input<L: MaskedLm + ?Sized>(
    x: &TokenSeq,
    cfg: &NoiseConfig,
    mlm: &L,
    seed: u64,
) -> Result<TokenSeq> {
    let masked = post_edit_masks(x, cfg, seed)?;
    Ok(mlm.fill(&masked, seed::derive(seed, 0, Purpose::MaskFill)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn t(s: &str) -> TokenSeq {
        TokenSeq::from_text(s)
    }

    fn stub() -> UnigramMlm {
        UnigramMlm::from_corpus(&[t("the cat sat on the mat"), t("a dog sat")]).unwrap()
    }

    fn cfg(rounds: usize, p_insert: f64, p_delete: f64) -> NoiseConfig {
        NoiseConfig { rounds, p_insert, p_delete }
    }

    #[test]
    fn unigram_probs_are_add_one() {
        let m = stub();
        // 9 tokens, 7 types -> total 16.
        let the = m.vocab().iter().position(|v| v == "the").unwrap();
        assert!((m.probs()[the] - 3.0 / 16.0).abs() < 1e-15);
        assert!((m.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn empty_table_is_rejected() {
        assert_eq!(UnigramMlm::from_corpus(&[t("")]).unwrap_err(), Error::Empty("unigram table"));
    }

    #[test]
    fn fill_without_masks_is_identity() {
        assert_eq!(stub().fill(&t("a b c"), 5), t("a b c"));
    }

    #[test]
    fn single_token_table_fills_everything() {
        let m = UnigramMlm::from_corpus(&[t("w w")]).unwrap();
        assert_eq!(m.fill(&t("<mask> x <mask>"), 1), t("w x w"));
    }

    #[test]
    fn fill_is_seeded() {
        let m = stub();
        let masked = t("<mask> <mask> <mask> <mask> <mask> <mask>");
        assert_eq!(m.fill(&masked, 3), m.fill(&masked, 3));
        assert!((0..10).any(|s| m.fill(&masked, s) != m.fill(&masked, s + 50)));
    }

    #[test]
    fn no_edit_probability_is_identity() {
        for r in 1..5 {
            for seed in 0..10 {
                let x = t("a b c d");
                assert_eq!(generate_noised_input(&x, &cfg(r, 0.0, 0.0), &stub(), seed).unwrap(), x);
            }
        }
    }

    #[test]
    fn full_deletion_leaves_one_filled_mask() {
        let seed = 42;
        let out = generate_noised_input(&t("a b c"), &cfg(1, 0.0, 1.0), &stub(), seed).unwrap();
        assert_eq!(out.len(), 1);
        // Trace: all three tokens deleted, guard inserts one mask, and the
        // stub samples it with the derived fill seed.
        let expected = stub().fill(&t("<mask>"), seed::derive(seed, 0, Purpose::MaskFill));
        assert_eq!(out, expected);
        assert_eq!(post_edit_masks(&t("a b c"), &cfg(1, 0.0, 1.0), seed).unwrap(), t("<mask>"));
    }

    #[test]
    fn full_insertion_fills_every_gap() {
        let masked = post_edit_masks(&t("a b"), &cfg(1, 1.0, 0.0), 7).unwrap();
        assert_eq!(masked, t("<mask> a <mask> b <mask>"));
        let m = UnigramMlm::from_corpus(&[t("q")]).unwrap();
        let out = generate_noised_input(&t("a b"), &cfg(1, 1.0, 0.0), &m, 7).unwrap();
        assert_eq!(out, t("q a q b q"));
    }

    #[test]
    fn masks_from_earlier_rounds_can_be_deleted() {
        // Round 1 inserts everywhere, round 2 deletes everything.
        let c = cfg(2, 1.0, 0.0);
        assert_eq!(post_edit_masks(&t("a"), &c, 0).unwrap().len(), 7);
        let found = (0..200).any(|seed| {
            let m = post_edit_masks(&t("a"), &cfg(2, 0.5, 0.5), seed).unwrap();
            let all_masks = m.iter().all(|x| x == MASK);
            all_masks
        });
        assert!(found);
    }

    #[test]
    fn bad_config_and_empty_input() {
        assert!(post_edit_masks(&t(""), &cfg(1, 0.1, 0.1), 0).is_err());
        assert!(post_edit_masks(&t("a"), &cfg(0, 0.1, 0.1), 0).is_err());
        assert!(post_edit_masks(&t("a"), &cfg(1, 1.1, 0.1), 0).is_err());
    }

    #[test]
    fn bounded_growth_over_many_trials() {
        let x = t("a b c d e");
        for rounds in 1..=4 {
            let bound = (x.len() + rounds) << rounds;
            for seed in 0..1000u64 {
                let c = cfg(rounds, 0.5, 0.1);
                let out = generate_noised_input(&x, &c, &stub(), seed).unwrap();
                assert!(out.len() <= bound, "{rounds} {seed} {}", out.len());
            }
        }
    }

    proptest! {
        #[test]
        fn identity_without_edits(toks in prop::collection::vec("[a-z]{1,4}", 1..10), r in 1usize..5, seed in any::<u64>()) {
            let x = TokenSeq::new(toks).unwrap();
            prop_assert_eq!(generate_noised_input(&x, &cfg(r, 0.0, 0.0), &stub(), seed).unwrap(), x);
        }

        #[test]
        fn output_never_contains_masks(seed in any::<u64>(), pi in 0.0f64..1.0, pd in 0.0f64..1.0) {
            let out = generate_noised_input(&t("x y z"), &cfg(2, pi, pd), &stub(), seed).unwrap();
            prop_assert!(!out.is_empty());
            prop_assert!(out.iter().all(|tok| tok != MASK));
        }
    }

    #[test]
    fn doc_round_trip_rebuilds_cumulative() {
        let m = stub();
        let doc: UnigramDoc = m.clone().into();
        assert_eq!(UnigramMlm::try_from(doc).unwrap(), m);
        assert!(UnigramMlm::new(vec!["a".into()], vec![0.5]).is_err());
    }
}
