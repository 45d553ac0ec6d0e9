//! Domain types shared by every stage of the pipeline.

use alloc::collections::BTreeSet;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Placeholder token inserted by the noiser and filled by a masked LM.
pub const MASK: &str = "<mask>";
/// Out-of-vocabulary token of the toy model.
pub const UNK: &str = "<unk>";

/// A whitespace-tokenized sentence.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TokenSeq(Vec<String>);

impl TokenSeq {
    /// Builds a sequence, rejecting empty tokens and tokens containing
    /// whitespace (which would not survive whitespace tokenization).
    pub fn new(tokens: Vec<String>) -> Result<Self> {
        if let Some(bad) = tokens
            .iter()
            .find(|t| t.is_empty() || t.contains(char::is_whitespace))
        {
            return Err(Error::BadToken(bad.clone()));
        }
        Ok(TokenSeq(tokens))
    }

    /// Splits on runs of whitespace. Never fails: tabs and newlines are
    /// separators, so no token can contain them.
    pub fn from_text(text: &str) -> Self {
        TokenSeq(text.split_whitespace().map(str::to_string).collect())
    }

    pub fn tokens(&self) -> &[String] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(String::as_str)
    }

    pub fn into_inner(self) -> Vec<String> {
        self.0
    }

    pub(crate) fn from_vec_unchecked(tokens: Vec<String>) -> Self {
        TokenSeq(tokens)
    }
}

impl fmt::Display for TokenSeq {
    /// Tokens joined by single spaces.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, t) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            f.write_str(t)?;
        }
        Ok(())
    }
}

impl<S: AsRef<str>> FromIterator<S> for TokenSeq {
    /// Collects tokens; each item is whitespace-split so the invariant holds.
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        TokenSeq(
            iter.into_iter()
                .flat_map(|s| {
                    s.as_ref()
                        .split_whitespace()
                        .map(str::to_string)
                        .collect::<Vec<_>>()
                })
                .collect(),
        )
    }
}

/// Language pair `xx-yy`, lowercase ISO-639-1 codes.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct LangPair(String);

impl LangPair {
    pub fn source(&self) -> &str {
        &self.0[..2]
    }

    pub fn target(&self) -> &str {
        &self.0[3..]
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn reversed(&self) -> LangPair {
        let mut s = String::with_capacity(5);
        s.push_str(self.target());
        s.push('-');
        s.push_str(self.source());
        LangPair(s)
    }
}

impl FromStr for LangPair {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let b = s.as_bytes();
        let ok = b.len() == 5
            && b[2] == b'-'
            && b[..2].iter().chain(&b[3..]).all(u8::is_ascii_lowercase);
        if ok {
            Ok(LangPair(s.to_string()))
        } else {
            Err(Error::BadLangPair(s.to_string()))
        }
    }
}

impl TryFrom<String> for LangPair {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<LangPair> for String {
    fn from(p: LangPair) -> String {
        p.0
    }
}

impl fmt::Display for LangPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    /// Direct assessment: real-valued z-scored quality.
    Da,
    /// Critical error detection: NOT / ERR.
    Ced,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Da => "da",
            Task::Ced => "ced",
        }
    }
}

impl FromStr for Task {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "da" | "DA" => Ok(Task::Da),
            "ced" | "CED" => Ok(Task::Ced),
            _ => Err(Error::param("task", alloc::format!("unknown task `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CedClass {
    #[serde(rename = "NOT")]
    Not,
    #[serde(rename = "ERR")]
    Err,
}

impl CedClass {
    pub fn as_str(self) -> &'static str {
        match self {
            CedClass::Not => "NOT",
            CedClass::Err => "ERR",
        }
    }

    /// ERR is the positive class.
    pub fn is_positive(self) -> bool {
        self == CedClass::Err
    }

    pub fn other(self) -> CedClass {
        match self {
            CedClass::Not => CedClass::Err,
            CedClass::Err => CedClass::Not,
        }
    }
}

impl FromStr for CedClass {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "NOT" => Ok(CedClass::Not),
            "ERR" => Ok(CedClass::Err),
            _ => Err(Error::param("label", alloc::format!("`{s}` is not NOT/ERR"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Label {
    Da(f64),
    Ced(CedClass),
}

impl Label {
    pub fn task(&self) -> Task {
        match self {
            Label::Da(_) => Task::Da,
            Label::Ced(_) => Task::Ced,
        }
    }

    /// Regression/classification target: the DA score, or 1 for ERR and 0
    /// for NOT.
    pub fn target(&self) -> f64 {
        match *self {
            Label::Da(v) => v,
            Label::Ced(c) => {
                if c.is_positive() {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QeSample {
    pub id: String,
    pub lang_pair: LangPair,
    pub src: TokenSeq,
    pub mt: TokenSeq,
    pub label: Label,
}

/// Samples of a single task with unique ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    task: Task,
    samples: Vec<QeSample>,
}

impl Dataset {
    pub fn new(task: Task, samples: Vec<QeSample>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for s in &samples {
            if s.label.task() != task {
                return Err(Error::LabelKind {
                    id: s.id.clone(),
                    expected: task.name(),
                    found: s.label.task().name(),
                });
            }
            if !seen.insert(s.id.as_str()) {
                return Err(Error::DuplicateId(s.id.clone()));
            }
        }
        Ok(Dataset { task, samples })
    }

    pub fn task(&self) -> Task {
        self.task
    }

    pub fn samples(&self) -> &[QeSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn into_samples(self) -> Vec<QeSample> {
        self.samples
    }

    /// Language pairs in order of first appearance.
    pub fn lang_pairs(&self) -> Vec<LangPair> {
        let mut out: Vec<LangPair> = Vec::new();
        for s in &self.samples {
            if !out.contains(&s.lang_pair) {
                out.push(s.lang_pair.clone());
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn lang_pair_validation() {
        assert!("en-de".parse::<LangPair>().is_ok());
        for bad in ["EN-de", "en_de", "eng-de", "en-", "e1-de", ""] {
            assert!(bad.parse::<LangPair>().is_err(), "{bad}");
        }
        let p: LangPair = "ro-en".parse().unwrap();
        assert_eq!(p.reversed().as_str(), "en-ro");
        assert_eq!(p.source(), "ro");
        assert_eq!(p.target(), "en");
    }

    #[test]
    fn token_seq_rejects_control_whitespace() {
        assert!(TokenSeq::new(vec!["a\tb".into()]).is_err());
        assert!(TokenSeq::new(vec!["a\nb".into()]).is_err());
        assert!(TokenSeq::new(vec!["a b".into()]).is_err());
        assert!(TokenSeq::new(vec![String::new()]).is_err());
        assert_eq!(TokenSeq::from_text("  the \t cat\n").len(), 2);
    }

    #[test]
    fn dataset_rejects_duplicates_and_mixed_labels() {
        let s = |id: &str, label| QeSample {
            id: id.into(),
            lang_pair: "en-de".parse().unwrap(),
            src: TokenSeq::from_text("a"),
            mt: TokenSeq::from_text("b"),
            label,
        };
        assert!(matches!(
            Dataset::new(Task::Da, vec![s("x", Label::Da(0.0)), s("x", Label::Da(1.0))]),
            Err(Error::DuplicateId(_))
        ));
        assert!(matches!(
            Dataset::new(Task::Da, vec![s("x", Label::Ced(CedClass::Err))]),
            Err(Error::LabelKind { .. })
        ));
    }
}
