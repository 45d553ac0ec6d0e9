//! Exact-match Meteor.
//!
//! Unigrams are aligned greedily: each hypothesis token, left to right,
//! takes the leftmost still-unmatched identical reference token. The score
//! is the recall-weighted harmonic mean of unigram precision and recall,
//! discounted by a fragmentation penalty over contiguous match chunks.
//! There is no stemming or synonym matching.

use alloc::vec;

use serde::{Deserialize, Serialize};

use crate::types::TokenSeq;

/// Weight of recall relative to precision in the harmonic mean.
pub const RECALL_WEIGHT: f64 = 9.0;
/// Maximum fragmentation penalty.
pub const PENALTY_GAMMA: f64 = 0.5;
/// Exponent applied to the chunk ratio.
pub const PENALTY_BETA: u32 = 3;

/// Similarity in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SimScore(f64);

impl SimScore {
    pub fn value(self) -> f64 {
        self.0
    }
}

impl From<SimScore> for f64 {
    fn from(s: SimScore) -> f64 {
        s.0
    }
}

/// Matched unigram count and chunk count of the greedy alignment.
pub fn align(reference: &TokenSeq, hypothesis: &TokenSeq) -> (usize, usize) {
    let refs = reference.tokens();
    let mut used = vec![false; refs.len()];
    let mut matches = 0;
    let mut chunks = 0;
    // Reference position of the previous hypothesis token, if it matched.
    let mut prev: Option<usize> = None;
    for tok in hypothesis.tokens() {
        let hit = refs
            .iter()
            .enumerate()
            .position(|(j, r)| !used[j] && r == tok);
        match hit {
            Some(j) => {
                used[j] = true;
                matches += 1;
                if j == 0 || prev != Some(j - 1) {
                    chunks += 1;
                }
                prev = Some(j);
            }
            None => prev = None,
        }
    }
    (matches, chunks)
}

/// Meteor score of `hypothesis` against `reference` (argument order matters).
pub fn sim(reference: &TokenSeq, hypothesis: &TokenSeq) -> SimScore {
    match (reference.is_empty(), hypothesis.is_empty()) {
        (true, true) => return SimScore(1.0),
        (true, false) | (false, true) => return SimScore(0.0),
        _ => {}
    }
    let (m, chunks) = align(reference, hypothesis);
    if m == 0 {
        return SimScore(0.0);
    }
    let m_f = m as f64;
    let precision = m_f / hypothesis.len() as f64;
    let recall = m_f / reference.len() as f64;
    let fmean = (1.0 + RECALL_WEIGHT) * precision * recall / (recall + RECALL_WEIGHT * precision);
    // (chunks / m)^3 from exact integer cubes: a single rounding.
    let frag = (chunks as u64).pow(PENALTY_BETA) as f64 / (m as u64).pow(PENALTY_BETA) as f64;
    let penalty = PENALTY_GAMMA * frag;
    SimScore((fmean * (1.0 - penalty)).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::String;
    use alloc::vec::Vec;
    use proptest::prelude::*;

    fn t(s: &str) -> TokenSeq {
        TokenSeq::from_text(s)
    }

    #[test]
    fn identical_four_tokens() {
        assert_eq!(sim(&t("a b c d"), &t("a b c d")).value(), 0.9921875);
    }

    #[test]
    fn disjoint_scores_zero() {
        assert_eq!(sim(&t("a b"), &t("c d")).value(), 0.0);
    }

    #[test]
    fn truncated_hypothesis() {
        // P = 1, R = 2/3, Fmean = 20/29, one chunk of two matches.
        let expected = 20.0 / 29.0 * (15.0 / 16.0);
        let got = sim(&t("the cat sat"), &t("the cat")).value();
        assert!((got - expected).abs() < 1e-12);
        assert!((got - 0.646552).abs() < 1e-6);
    }

    #[test]
    fn swapped_pair_is_two_chunks() {
        assert_eq!(align(&t("a b"), &t("b a")), (2, 2));
        assert_eq!(sim(&t("a b"), &t("b a")).value(), 0.5);
    }

    #[test]
    fn emptiness_rules() {
        assert_eq!(sim(&t(""), &t("")).value(), 1.0);
        assert_eq!(sim(&t("a"), &t("")).value(), 0.0);
        assert_eq!(sim(&t(""), &t("a")).value(), 0.0);
    }

    #[test]
    fn greedy_alignment_with_repeats() {
        // hyp "a a" matches ref positions 0 and 1: one chunk.
        assert_eq!(align(&t("a a b"), &t("a a")), (2, 1));
        // hyp "b a" -> b@2, a@0: not adjacent, two chunks.
        assert_eq!(align(&t("a a b"), &t("b a")), (2, 2));
        // a match at reference position 0 always starts a new chunk.
        assert_eq!(align(&t("a b"), &t("b x a")), (2, 2));
    }

    #[test]
    fn asymmetric() {
        let a = t("the cat sat");
        let b = t("the cat");
        assert_ne!(sim(&a, &b), sim(&b, &a));
    }

    proptest! {
        #[test]
        fn score_in_unit_interval(
            r in prop::collection::vec(0u8..5, 0..12),
            h in prop::collection::vec(0u8..5, 0..12),
        ) {
            let mk = |v: &Vec<u8>| v.iter().map(|x| String::from(["a","b","c","d","e"][*x as usize])).collect::<TokenSeq>();
            let s = sim(&mk(&r), &mk(&h)).value();
            prop_assert!((0.0..=1.0).contains(&s));
        }

        #[test]
        fn identity_form(m in 1usize..40) {
            let seq: TokenSeq = (0..m).map(|i| alloc::format!("w{i}")).collect();
            let expected = 1.0 - 0.5 / (m as f64).powi(3);
            prop_assert_eq!(sim(&seq, &seq).value(), expected);
        }
    }
}
