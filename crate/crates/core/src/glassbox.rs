//! Glass-box translation models.
//!
//! A [`GlassBox`] model exposes per-step decoding log-probabilities for a
//! forced target and can decode greedily, optionally with dropout applied to
//! its parameters. [`ToyLexicalModel`] is a positional lexical translation
//! model interpolated with a target bigram LM; dropout masks entries of its
//! translation table.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::{self, Purpose};
use crate::types::{TokenSeq, UNK};

/// Probability floor applied before every logarithm.
pub const PROB_FLOOR: f64 = 1e-9;

const ROW_TOLERANCE: f64 = 1e-9;

/// Natural-log probability of each target token, all finite and `<= 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct StepLogProbs(Vec<f64>);

impl StepLogProbs {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(v) = values.iter().find(|v| !v.is_finite() || **v > 0.0) {
            return Err(Error::param("step log-probability", format!("{v} is not a finite value <= 0")));
        }
        Ok(StepLogProbs(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl TryFrom<Vec<f64>> for StepLogProbs {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        StepLogProbs::new(v)
    }
}

impl From<StepLogProbs> for Vec<f64> {
    fn from(p: StepLogProbs) -> Vec<f64> {
        p.0
    }
}

/// A decoded translation and the log-probability of each emitted token.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodeSample {
    pub tokens: TokenSeq,
    pub step_logprobs: StepLogProbs,
}

/// Inference-time dropout.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Dropout {
    Off,
    /// Drop parameters with probability `rate`; a rate of 0 behaves as `Off`.
    On { rate: f64, seed: u64 },
}

impl Dropout {
    fn validate(self) -> Result<Self> {
        match self {
            Dropout::On { rate, .. } if !(0.0..1.0).contains(&rate) => {
                Err(Error::param("dropout rate", format!("{rate} is outside [0, 1)")))
            }
            Dropout::On { rate: 0.0, .. } => Ok(Dropout::Off),
            d => Ok(d),
        }
    }
}

pub trait GlassBox {
    /// Log-probability of each `mt` token given `src` and the preceding
    /// `mt` tokens.
    fn force_decode(&self, src: &TokenSeq, mt: &TokenSeq, dropout: Dropout) -> Result<StepLogProbs>;

    /// Greedy (argmax) translation of `src`.
    fn greedy_translate(&self, src: &TokenSeq, dropout: Dropout) -> Result<DecodeSample>;
}

impl<M: GlassBox + ?Sized> GlassBox for &M {
    fn force_decode(&self, src: &TokenSeq, mt: &TokenSeq, dropout: Dropout) -> Result<StepLogProbs> {
        (**self).force_decode(src, mt, dropout)
    }

    fn greedy_translate(&self, src: &TokenSeq, dropout: Dropout) -> Result<DecodeSample> {
        (**self).greedy_translate(src, dropout)
    }
}

/// `n` greedy translations, sample `i` decoded with dropout seed
/// `derive(base_seed, i)`. A rate of 0 yields `n` copies of the plain
/// greedy output.
pub fn mc_dropout_samples<M: GlassBox + ?Sized>(
    model: &M,
    src: &TokenSeq,
    n: usize,
    rate: f64,
    base_seed: u64,
) -> Result<Vec<DecodeSample>> {
    if n == 0 {
        return Err(Error::param("sample count", "must be at least 1"));
    }
    (0..n as u64)
        .map(|i| {
            let seed = seed::derive(base_seed, i, Purpose::McDropout);
            model.greedy_translate(src, Dropout::On { rate, seed })
        })
        .collect()
}

fn require_non_empty(src: &TokenSeq, what: &'static str) -> Result<()> {
    if src.is_empty() {
        Err(Error::Empty(what))
    } else {
        Ok(())
    }
}

/// Assigns every target token the same probability and translates by
/// echoing the source.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantModel {
    pub prob: f64,
}

impl ConstantModel {
    fn logprob(&self) -> f64 {
        libm::log(self.prob.clamp(PROB_FLOOR, 1.0))
    }
}

impl GlassBox for ConstantModel {
    fn force_decode(&self, src: &TokenSeq, mt: &TokenSeq, dropout: Dropout) -> Result<StepLogProbs> {
        require_non_empty(src, "source")?;
        require_non_empty(mt, "translation")?;
        dropout.validate()?;
        StepLogProbs::new(vec![self.logprob(); mt.len()])
    }

    fn greedy_translate(&self, src: &TokenSeq, dropout: Dropout) -> Result<DecodeSample> {
        require_non_empty(src, "source")?;
        dropout.validate()?;
        Ok(DecodeSample {
            tokens: src.clone(),
            step_logprobs: StepLogProbs::new(vec![self.logprob(); src.len()])?,
        })
    }
}

/// Persisted form of [`ToyLexicalModel`].
///
/// `trans_table[s][t]` is P(target `t` | source `s`); `bigram_table[0]` is
/// the begin-of-sentence row and `bigram_table[u + 1][v]` is
/// P(target `v` | previous target `u`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyModelDoc {
    pub src_vocab: Vec<String>,
    pub tgt_vocab: Vec<String>,
    pub trans_table: Vec<Vec<f64>>,
    pub bigram_table: Vec<Vec<f64>>,
    pub lambda: f64,
    pub alpha: f64,
    pub floor: f64,
}

/// Positional lexical translation model with a target bigram LM.
///
/// At step `t` the next-token distribution is
/// `p(v) ∝ T[x_t][v]^λ · B[prev][v]^(1−λ)`; the source position is clamped
/// to the last token when the target is longer than the source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ToyModelDoc", into = "ToyModelDoc")]
pub struct ToyLexicalModel {
    doc: ToyModelDoc,
    src_index: BTreeMap<String, usize>,
    tgt_index: BTreeMap<String, usize>,
    src_unk: usize,
    tgt_unk: usize,
}

fn index_vocab(vocab: &[String], what: &'static str) -> Result<(BTreeMap<String, usize>, usize)> {
    let mut index = BTreeMap::new();
    for (i, tok) in vocab.iter().enumerate() {
        if index.insert(tok.clone(), i).is_some() {
            return Err(Error::param(what, format!("duplicate token `{tok}`")));
        }
    }
    let unk = *index
        .get(UNK)
        .ok_or_else(|| Error::param(what, format!("missing `{UNK}`")))?;
    Ok((index, unk))
}

fn check_table(table: &[Vec<f64>], rows: usize, cols: usize, what: &'static str) -> Result<()> {
    if table.len() != rows {
        return Err(Error::param(what, format!("expected {rows} rows, got {}", table.len())));
    }
    for (r, row) in table.iter().enumerate() {
        if row.len() != cols {
            return Err(Error::param(what, format!("row {r} has {} columns, expected {cols}", row.len())));
        }
        if row.iter().any(|p| !(p.is_finite() && *p > 0.0)) {
            return Err(Error::param(what, format!("row {r} has a non-positive entry")));
        }
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > ROW_TOLERANCE {
            return Err(Error::param(what, format!("row {r} sums to {sum}")));
        }
    }
    Ok(())
}

impl TryFrom<ToyModelDoc> for ToyLexicalModel {
    type Error = Error;

    fn try_from(doc: ToyModelDoc) -> Result<Self> {
        let (src_index, src_unk) = index_vocab(&doc.src_vocab, "src_vocab")?;
        let (tgt_index, tgt_unk) = index_vocab(&doc.tgt_vocab, "tgt_vocab")?;
        let nt = doc.tgt_vocab.len();
        check_table(&doc.trans_table, doc.src_vocab.len(), nt, "trans_table")?;
        check_table(&doc.bigram_table, nt + 1, nt, "bigram_table")?;
        if !(0.0..=1.0).contains(&doc.lambda) {
            return Err(Error::param("lambda", format!("{} is outside [0, 1]", doc.lambda)));
        }
        if !(doc.alpha > 0.0 && doc.alpha.is_finite()) {
            return Err(Error::param("alpha", "must be positive"));
        }
        if !(doc.floor > 0.0 && doc.floor < 1.0) {
            return Err(Error::param("floor", "must lie in (0, 1)"));
        }
        Ok(ToyLexicalModel {
            doc,
            src_index,
            tgt_index,
            src_unk,
            tgt_unk,
        })
    }
}

impl From<ToyLexicalModel> for ToyModelDoc {
    fn from(m: ToyLexicalModel) -> ToyModelDoc {
        m.doc
    }
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + libm::log(xs.iter().map(|x| libm::exp(x - max)).sum::<f64>())
}

impl ToyLexicalModel {
    pub fn new(doc: ToyModelDoc) -> Result<Self> {
        doc.try_into()
    }

    pub fn doc(&self) -> &ToyModelDoc {
        &self.doc
    }

    pub fn src_vocab(&self) -> &[String] {
        &self.doc.src_vocab
    }

    pub fn tgt_vocab(&self) -> &[String] {
        &self.doc.tgt_vocab
    }

    pub fn trans_table(&self) -> &[Vec<f64>] {
        &self.doc.trans_table
    }

    pub fn bigram_table(&self) -> &[Vec<f64>] {
        &self.doc.bigram_table
    }

    pub fn lambda(&self) -> f64 {
        self.doc.lambda
    }

    pub fn floor(&self) -> f64 {
        self.doc.floor
    }

    fn src_id(&self, tok: &str) -> usize {
        self.src_index.get(tok).copied().unwrap_or(self.src_unk)
    }

    fn tgt_id(&self, tok: &str) -> usize {
        self.tgt_index.get(tok).copied().unwrap_or(self.tgt_unk)
    }

    /// Dropout realized on the translation table: every entry, in row-major
    /// order, is independently replaced by the probability floor with
    /// probability `rate`; rows where anything was masked are renormalized.
    /// The bigram table and λ are shared with `self`.
    pub fn dropout_perturb(&self, rate: f64, seed: u64) -> Result<ToyLexicalModel> {
        if !(rate > 0.0 && rate < 1.0) {
            return Err(Error::param("dropout rate", format!("{rate} is outside (0, 1)")));
        }
        let mut doc = self.doc.clone();
        doc.trans_table = self.perturbed_table(rate, seed);
        Ok(ToyLexicalModel {
            doc,
            ..self.clone()
        })
    }

    fn perturbed_table(&self, rate: f64, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = seed::rng(seed);
        let floor = self.doc.floor;
        self.doc
            .trans_table
            .iter()
            .map(|row| {
                let mut out = row.clone();
                let mut masked = false;
                for p in out.iter_mut() {
                    if rng.random::<f64>() < rate {
                        *p = floor;
                        masked = true;
                    }
                }
                if masked {
                    let sum: f64 = out.iter().sum();
                    out.iter_mut().for_each(|p| *p /= sum);
                }
                out
            })
            .collect()
    }

    fn table_for(&self, dropout: Dropout) -> Result<Option<Vec<Vec<f64>>>> {
        Ok(match dropout.validate()? {
            Dropout::Off => None,
            Dropout::On { rate, seed } => Some(self.perturbed_table(rate, seed)),
        })
    }

    /// Normalized log-distribution over target tokens for one step.
    fn step_distribution(&self, trans_row: &[f64], prev: usize) -> Vec<f64> {
        let lambda = self.doc.lambda;
        let bigram_row = &self.doc.bigram_table[prev];
        let scores: Vec<f64> = trans_row
            .iter()
            .zip(bigram_row)
            .map(|(t, b)| lambda * libm::log(*t) + (1.0 - lambda) * libm::log(*b))
            .collect();
        let z = log_sum_exp(&scores);
        scores.into_iter().map(|s| s - z).collect()
    }

    fn floored(&self, logp: f64) -> f64 {
        logp.max(libm::log(self.doc.floor)).min(0.0)
    }

    fn force_with(&self, table: &[Vec<f64>], src: &TokenSeq, mt: &TokenSeq) -> Result<StepLogProbs> {
        let src_ids: Vec<usize> = src.iter().map(|t| self.src_id(t)).collect();
        let mut prev = 0;
        let mut out = Vec::with_capacity(mt.len());
        for (t, tok) in mt.iter().enumerate() {
            let x = src_ids[t.min(src_ids.len() - 1)];
            let dist = self.step_distribution(&table[x], prev);
            let y = self.tgt_id(tok);
            out.push(self.floored(dist[y]));
            prev = y + 1;
        }
        StepLogProbs::new(out)
    }

    fn greedy_with(&self, table: &[Vec<f64>], src: &TokenSeq) -> Result<DecodeSample> {
        let vocab = &self.doc.tgt_vocab;
        let mut prev = 0;
        let mut tokens = Vec::with_capacity(src.len());
        let mut logprobs = Vec::with_capacity(src.len());
        for tok in src.iter() {
            let dist = self.step_distribution(&table[self.src_id(tok)], prev);
            let mut best = 0;
            for v in 1..dist.len() {
                if dist[v] > dist[best] || (dist[v] == dist[best] && vocab[v] < vocab[best]) {
                    best = v;
                }
            }
            tokens.push(vocab[best].clone());
            logprobs.push(self.floored(dist[best]));
            prev = best + 1;
        }
        Ok(DecodeSample {
            tokens: TokenSeq::from_vec_unchecked(tokens),
            step_logprobs: StepLogProbs::new(logprobs)?,
        })
    }
}

impl GlassBox for ToyLexicalModel {
    fn force_decode(&self, src: &TokenSeq, mt: &TokenSeq, dropout: Dropout) -> Result<StepLogProbs> {
        require_non_empty(src, "source")?;
        require_non_empty(mt, "translation")?;
        match self.table_for(dropout)? {
            Some(t) => self.force_with(&t, src, mt),
            None => self.force_with(&self.doc.trans_table, src, mt),
        }
    }

    fn greedy_translate(&self, src: &TokenSeq, dropout: Dropout) -> Result<DecodeSample> {
        require_non_empty(src, "source")?;
        match self.table_for(dropout)? {
            Some(t) => self.greedy_with(&t, src),
            None => self.greedy_with(&self.doc.trans_table, src),
        }
    }
}

/// Estimates a [`ToyLexicalModel`] from a position-aligned parallel corpus.
///
/// Source token `i` is paired with target token `i` up to the shorter
/// length; translation and bigram counts get add-`alpha` smoothing over the
/// target vocabulary. Both vocabularies are the sorted corpus tokens plus
/// `<unk>`, whose source row is uniform.
pub fn train_toy_model(corpus: &[(TokenSeq, TokenSeq)], alpha: f64, lambda: f64) -> Result<ToyLexicalModel> {
    if corpus.is_empty() {
        return Err(Error::Empty("parallel corpus"));
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::param("alpha", format!("{alpha} must be positive")));
    }
    let vocab = |side: fn(&(TokenSeq, TokenSeq)) -> &TokenSeq| -> Vec<String> {
        let mut set: alloc::collections::BTreeSet<String> =
            corpus.iter().flat_map(|p| side(p).iter().map(str::to_string)).collect();
        set.insert(UNK.to_string());
        set.into_iter().collect()
    };
    let src_vocab = vocab(|p| &p.0);
    let tgt_vocab = vocab(|p| &p.1);
    let pos = |v: &[String], t: &str| v.binary_search_by(|x| x.as_str().cmp(t)).unwrap_or(0);
    let (ns, nt) = (src_vocab.len(), tgt_vocab.len());

    let mut trans = vec![vec![0.0f64; nt]; ns];
    let mut bigram = vec![vec![0.0f64; nt]; nt + 1];
    for (src, tgt) in corpus {
        let tgt_ids: Vec<usize> = tgt.iter().map(|t| pos(&tgt_vocab, t)).collect();
        for (s, &y) in src.iter().zip(&tgt_ids) {
            trans[pos(&src_vocab, s)][y] += 1.0;
        }
        let mut prev = 0;
        for &y in &tgt_ids {
            bigram[prev][y] += 1.0;
            prev = y + 1;
        }
    }
    let smooth = |table: &mut Vec<Vec<f64>>| {
        for row in table.iter_mut() {
            let denom = row.iter().sum::<f64>() + alpha * nt as f64;
            row.iter_mut().for_each(|c| *c = (*c + alpha) / denom);
        }
    };
    smooth(&mut trans);
    smooth(&mut bigram);
    ToyLexicalModel::new(ToyModelDoc {
        src_vocab,
        tgt_vocab,
        trans_table: trans,
        bigram_table: bigram,
        lambda,
        alpha,
        floor: PROB_FLOOR,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use proptest::prelude::*;

    fn t(s: &str) -> TokenSeq {
        TokenSeq::from_text(s)
    }

    fn corpus() -> Vec<(TokenSeq, TokenSeq)> {
        [
            ("the cat sat", "die katze sass"),
            ("the dog sat", "der hund sass"),
            ("a cat ran", "eine katze rannte"),
            ("the cat ran", "die katze rannte"),
            ("a dog sat", "ein hund sass"),
        ]
        .iter()
        .map(|(s, m)| (t(s), t(m)))
        .collect()
    }

    /// Each source token maps to one target token with probability 1 - eps.
    fn permutation_model(lambda: f64) -> ToyLexicalModel {
        let src_vocab: Vec<String> = ["<unk>", "a", "b", "c"].iter().map(|s| s.to_string()).collect();
        let tgt_vocab: Vec<String> = ["<unk>", "x", "y", "z"].iter().map(|s| s.to_string()).collect();
        let eps = 1e-3;
        let mut trans = vec![vec![0.25; 4]];
        for s in 1..4 {
            let mut row = vec![eps / 3.0; 4];
            row[4 - s] = 1.0 - eps;
            trans.push(row);
        }
        ToyLexicalModel::new(ToyModelDoc {
            src_vocab,
            tgt_vocab,
            trans_table: trans,
            bigram_table: vec![vec![0.25; 4]; 5],
            lambda,
            alpha: 1.0,
            floor: PROB_FLOOR,
        })
        .unwrap()
    }

    #[test]
    fn constant_model_logprobs() {
        let m = ConstantModel { prob: 0.5 };
        let p = m.force_decode(&t("a"), &t("x y z"), Dropout::Off).unwrap();
        assert_eq!(p.values(), &[libm::log(0.5); 3]);
    }

    #[test]
    fn empty_inputs_are_errors() {
        let m = train_toy_model(&corpus(), 0.1, 0.7).unwrap();
        assert!(m.force_decode(&t(""), &t("x"), Dropout::Off).is_err());
        assert!(m.force_decode(&t("a"), &t(""), Dropout::Off).is_err());
        assert!(m.greedy_translate(&t(""), Dropout::Off).is_err());
    }

    #[test]
    fn permutation_table_translates_tokenwise() {
        let m = permutation_model(1.0);
        let out = m.greedy_translate(&t("a b c a"), Dropout::Off).unwrap();
        assert_eq!(out.tokens, t("z y x z"));
    }

    #[test]
    fn force_decoding_own_greedy_output_matches() {
        let m = train_toy_model(&corpus(), 0.1, 0.7).unwrap();
        for src in ["the cat sat", "a dog ran", "the unknown dog"] {
            let g = m.greedy_translate(&t(src), Dropout::Off).unwrap();
            let f = m.force_decode(&t(src), &g.tokens, Dropout::Off).unwrap();
            assert_eq!(f, g.step_logprobs);
            let d = Dropout::On { rate: 0.4, seed: 9 };
            let g = m.greedy_translate(&t(src), d).unwrap();
            assert_eq!(m.force_decode(&t(src), &g.tokens, d).unwrap(), g.step_logprobs);
        }
    }

    #[test]
    fn zero_rate_dropout_is_off() {
        let m = train_toy_model(&corpus(), 0.1, 0.7).unwrap();
        let off = m.force_decode(&t("the cat"), &t("die katze"), Dropout::Off).unwrap();
        let zero = m
            .force_decode(&t("the cat"), &t("die katze"), Dropout::On { rate: 0.0, seed: 3 })
            .unwrap();
        assert_eq!(off, zero);
        assert!(m
            .force_decode(&t("a"), &t("b"), Dropout::On { rate: 1.0, seed: 0 })
            .is_err());
    }

    #[test]
    fn greedy_is_deterministic_and_seeded() {
        let m = train_toy_model(&corpus(), 0.5, 0.5).unwrap();
        let src = t("the cat sat a dog ran");
        assert_eq!(
            m.greedy_translate(&src, Dropout::Off).unwrap(),
            m.greedy_translate(&src, Dropout::Off).unwrap()
        );
        let on = |seed| m.greedy_translate(&src, Dropout::On { rate: 0.5, seed }).unwrap();
        assert_eq!(on(1), on(1));
        assert!((0..20).any(|s| on(s) != on(s + 100)));
    }

    #[test]
    fn tie_break_picks_smallest_token() {
        let mut doc = permutation_model(1.0).doc().clone();
        doc.trans_table[1] = vec![0.1, 0.3, 0.3, 0.3];
        let m = ToyLexicalModel::new(doc).unwrap();
        assert_eq!(m.greedy_translate(&t("a"), Dropout::Off).unwrap().tokens, t("x"));
    }

    #[test]
    fn clamped_source_position_for_long_targets() {
        let m = permutation_model(1.0);
        let long = m.force_decode(&t("a"), &t("z z z"), Dropout::Off).unwrap();
        let lp = libm::log(1.0 - 1e-3);
        for v in long.values() {
            assert!((v - lp).abs() < 1e-12);
        }
    }

    #[test]
    fn oov_source_uses_uniform_unk_row() {
        let m = permutation_model(1.0);
        let p = m.force_decode(&t("qqq"), &t("x"), Dropout::Off).unwrap();
        assert!((p.values()[0] - libm::log(0.25)).abs() < 1e-12);
    }

    #[test]
    fn disjoint_corpus_with_tiny_alpha() {
        let m = train_toy_model(&[(t("a"), t("x")), (t("b"), t("y"))], 1e-9, 1.0).unwrap();
        let row = |s: &str| &m.trans_table()[m.src_id(s)];
        assert!(row("a")[m.tgt_id("x")] > 1.0 - 1e-6);
        assert!(row("b")[m.tgt_id("y")] > 1.0 - 1e-6);
    }

    #[test]
    fn large_alpha_approaches_uniform() {
        let m = train_toy_model(&corpus(), 1e9, 0.5).unwrap();
        let u = 1.0 / m.tgt_vocab().len() as f64;
        for row in m.trans_table().iter().chain(m.bigram_table()) {
            assert!(row.iter().all(|p| (p - u).abs() < 1e-6));
        }
    }

    #[test]
    fn empty_corpus_is_rejected() {
        assert_eq!(train_toy_model(&[], 0.1, 0.5).unwrap_err(), Error::Empty("parallel corpus"));
    }

    #[test]
    fn fully_masked_row_becomes_uniform() {
        let m = permutation_model(1.0);
        let p = m.dropout_perturb(0.999_999_999, 4).unwrap();
        for row in p.trans_table() {
            for v in row {
                assert!((v - 0.25).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn unmasked_rows_stay_bit_identical() {
        let m = train_toy_model(&corpus(), 0.1, 0.7).unwrap();
        let p = m.dropout_perturb(1e-12, 5).unwrap();
        assert_eq!(p.trans_table(), m.trans_table());
        assert_eq!(m.dropout_perturb(0.3, 5).unwrap(), m.dropout_perturb(0.3, 5).unwrap());
        assert!(m.dropout_perturb(0.0, 1).is_err());
    }

    #[test]
    fn mc_samples_are_pure() {
        let m = train_toy_model(&corpus(), 0.3, 0.6).unwrap();
        let src = t("the dog ran");
        let a = mc_dropout_samples(&m, &src, 6, 0.4, 17).unwrap();
        assert_eq!(a, mc_dropout_samples(&m, &src, 6, 0.4, 17).unwrap());
        let single = mc_dropout_samples(&m, &src, 1, 0.4, 17).unwrap();
        assert_eq!(single[0], a[0]);
        let s0 = seed::derive(17, 0, Purpose::McDropout);
        assert_eq!(single[0], m.greedy_translate(&src, Dropout::On { rate: 0.4, seed: s0 }).unwrap());
        let off = mc_dropout_samples(&m, &src, 4, 0.0, 17).unwrap();
        assert!(off.iter().all(|s| *s == off[0]));
        assert!(mc_dropout_samples(&m, &src, 0, 0.4, 17).is_err());
    }

    #[test]
    fn invalid_docs_are_rejected() {
        let good = permutation_model(0.5).doc().clone();
        let mut bad = good.clone();
        bad.trans_table[1][1] += 0.1;
        assert!(ToyLexicalModel::new(bad).is_err());
        let mut bad = good.clone();
        bad.lambda = 1.5;
        assert!(ToyLexicalModel::new(bad).is_err());
        let mut bad = good.clone();
        bad.src_vocab[0] = "q".into();
        assert!(ToyLexicalModel::new(bad).is_err());
        let mut bad = good;
        bad.bigram_table.pop();
        assert!(ToyLexicalModel::new(bad).is_err());
    }

    proptest! {
        #[test]
        fn trained_tables_are_stochastic(alpha in 1e-6f64..10.0, seed in any::<u64>(), rate in 0.01f64..0.99) {
            let m = train_toy_model(&corpus(), alpha, 0.5).unwrap();
            let p = m.dropout_perturb(rate, seed).unwrap();
            for row in m.trans_table().iter().chain(m.bigram_table()).chain(p.trans_table()) {
                prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
                prop_assert!(row.iter().all(|v| *v > 0.0));
            }
        }

        #[test]
        fn logprobs_within_floor(seed in any::<u64>(), rate in 0.0f64..0.95) {
            let m = train_toy_model(&corpus(), 1e-3, 0.3).unwrap();
            let d = Dropout::On { rate, seed };
            let g = m.greedy_translate(&t("the cat sat a dog"), d).unwrap();
            let f = m.force_decode(&t("the cat"), &t("eine hund rannte x"), d).unwrap();
            let lo = libm::log(PROB_FLOOR);
            for v in g.step_logprobs.values().iter().chain(f.values()) {
                prop_assert!(*v <= 0.0 && *v >= lo);
            }
        }
    }
}
