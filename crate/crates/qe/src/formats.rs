//! On-disk formats.
//!
//! All tables are UTF-8, LF-terminated, tab-separated and unquoted. JSON
//! documents (toy model, unigram MLM, configs, head model, reports) are
//! written pretty-printed with a trailing newline.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use qe_core::ensemble::PredictionSet;
use qe_core::features::{UncertaintyFeatures, FEATURE_COUNT, FEATURE_NAMES};
use qe_core::head::{Embedding, Encoder, HyperParams, DEFAULT_DIM};
use qe_core::{CedClass, Dataset, Label, QeSample, Task, TokenSeq};

pub const DATASET_HEADER: &str = "id\tlang_pair\tsrc\tmt\tlabel";
pub const PREDICTION_HEADER: &str = "id\tscore";

/// Writes `contents` to `path` through a temporary file in the same
/// directory and a rename.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .with_context(|| format!("creating temporary file in {}", dir.display()))?;
    tmp.write_all(contents)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path)
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = read_text(path)?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_atomic(path, to_json(value)?.as_bytes())
}

/// Data lines with 1-based line numbers; a final empty line is ignored and
/// a trailing `\r` is stripped.
fn lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    let last = text.split('\n').count();
    text.split('\n')
        .enumerate()
        .map(|(i, l)| (i + 1, l.strip_suffix('\r').unwrap_or(l)))
        .filter(move |(i, l)| !(l.is_empty() && *i == last))
}

fn parse_float(s: &str, line: usize, what: &str) -> Result<f64> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| anyhow!("line {line}: cannot parse {what} `{s}`"))?;
    if !v.is_finite() {
        bail!("line {line}: {what} `{s}` is not finite");
    }
    Ok(v)
}

fn clean_field(s: &str) -> String {
    s.replace(['\t', '\n', '\r'], " ")
}

// ---------------------------------------------------------------- datasets

pub fn parse_dataset(text: &str, task: Task) -> Result<Dataset> {
    let mut it = lines(text);
    match it.next() {
        Some((_, h)) if h == DATASET_HEADER => {}
        Some((_, h)) => bail!("line 1: expected header `{DATASET_HEADER}`, found `{h}`"),
        None => bail!("empty file: missing header"),
    }
    let mut samples = Vec::new();
    for (n, line) in it {
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 5 {
            bail!("line {n}: expected 5 fields, found {}", fields.len());
        }
        let lang_pair = fields[1]
            .parse()
            .map_err(|e| anyhow!("line {n}: {e}"))?;
        let label = match task {
            Task::Da => Label::Da(parse_float(fields[4], n, "DA label")?),
            Task::Ced => Label::Ced(
                fields[4]
                    .trim()
                    .parse::<CedClass>()
                    .map_err(|e| anyhow!("line {n}: {e}"))?,
            ),
        };
        samples.push(QeSample {
            id: fields[0].to_string(),
            lang_pair,
            src: TokenSeq::from_text(fields[2]),
            mt: TokenSeq::from_text(fields[3]),
            label,
        });
    }
    if samples.is_empty() {
        bail!("no data rows after the header");
    }
    Ok(Dataset::new(task, samples)?)
}

pub fn load_dataset(path: &Path, task: Task) -> Result<Dataset> {
    parse_dataset(&read_text(path)?, task).with_context(|| format!("in {}", path.display()))
}

pub fn format_dataset(data: &Dataset) -> String {
    let mut out = String::with_capacity(64 * data.len());
    out.push_str(DATASET_HEADER);
    out.push('\n');
    for s in data.samples() {
        let label = match s.label {
            Label::Da(v) => v.to_string(),
            Label::Ced(c) => c.as_str().to_string(),
        };
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}",
            clean_field(&s.id),
            s.lang_pair,
            s.src,
            s.mt,
            label
        );
    }
    out
}

pub fn save_dataset(path: &Path, data: &Dataset) -> Result<()> {
    write_atomic(path, format_dataset(data).as_bytes())
}

// ---------------------------------------------------------------- features

pub fn feature_header() -> String {
    let mut h = String::from("id");
    for n in FEATURE_NAMES {
        h.push('\t');
        h.push_str(n);
    }
    h
}

/// 17 significant digits, scientific notation.
pub fn format_f64_17(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn format_features(rows: &[(String, UncertaintyFeatures)]) -> String {
    let mut out = feature_header();
    out.push('\n');
    for (id, f) in rows {
        out.push_str(&clean_field(id));
        for v in f.values() {
            out.push('\t');
            out.push_str(&format_f64_17(*v));
        }
        out.push('\n');
    }
    out
}

pub fn parse_features(text: &str) -> Result<Vec<(String, UncertaintyFeatures)>> {
    let header = feature_header();
    let mut it = lines(text);
    match it.next() {
        Some((_, h)) if h == header => {}
        _ => bail!("line 1: expected the feature header `id\\tdp_mean\\t...`"),
    }
    let mut rows = Vec::new();
    for (n, line) in it {
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != FEATURE_COUNT + 1 {
            bail!("line {n}: expected {} fields, found {}", FEATURE_COUNT + 1, fields.len());
        }
        let mut v = [0.0; FEATURE_COUNT];
        for (slot, (f, name)) in v.iter_mut().zip(fields[1..].iter().zip(FEATURE_NAMES)) {
            *slot = parse_float(f, n, name)?;
        }
        rows.push((fields[0].to_string(), UncertaintyFeatures::from_array(v)?));
    }
    Ok(rows)
}

pub fn load_features(path: &Path) -> Result<BTreeMap<String, UncertaintyFeatures>> {
    let rows = parse_features(&read_text(path)?).with_context(|| format!("in {}", path.display()))?;
    let mut map = BTreeMap::new();
    for (id, f) in rows {
        if map.insert(id.clone(), f).is_some() {
            bail!("{}: duplicate id `{id}`", path.display());
        }
    }
    Ok(map)
}

// ------------------------------------------------------------- predictions

pub fn format_predictions(scores: &BTreeMap<String, f64>, order: &[&str]) -> String {
    let mut out = String::from(PREDICTION_HEADER);
    out.push('\n');
    for id in order {
        let _ = writeln!(out, "{}\t{}", id, scores[*id]);
    }
    out
}

pub fn parse_predictions(text: &str) -> Result<BTreeMap<String, f64>> {
    let mut it = lines(text);
    match it.next() {
        Some((_, h)) if h == PREDICTION_HEADER => {}
        _ => bail!("line 1: expected header `id\\tscore`"),
    }
    let mut out = BTreeMap::new();
    for (n, line) in it {
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 2 {
            bail!("line {n}: expected 2 fields, found {}", fields.len());
        }
        if out.insert(fields[0].to_string(), parse_float(fields[1], n, "score")?).is_some() {
            bail!("line {n}: duplicate id `{}`", fields[0]);
        }
    }
    Ok(out)
}

/// Loads a prediction file as a [`PredictionSet`] named by the file stem.
pub fn load_prediction_set(path: &Path) -> Result<PredictionSet> {
    let scores = parse_predictions(&read_text(path)?).with_context(|| format!("in {}", path.display()))?;
    let model_id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string());
    Ok(PredictionSet { model_id, scores })
}

// -------------------------------------------------------------- embeddings

/// Embeddings keyed by sample id, read from `id` + floats rows after a
/// header line whose first field is `id`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExternalEmbeddings {
    dim: usize,
    rows: BTreeMap<String, Embedding>,
}

impl ExternalEmbeddings {
    pub fn parse(text: &str) -> Result<Self> {
        let mut it = lines(text);
        match it.next() {
            Some((_, h)) if h.split('\t').next() == Some("id") => {}
            _ => bail!("line 1: expected a header starting with `id`"),
        }
        let mut rows = BTreeMap::new();
        let mut dim = None;
        for (n, line) in it {
            let fields: Vec<&str> = line.split('\t').collect();
            let d = *dim.get_or_insert(fields.len() - 1);
            if d == 0 || fields.len() - 1 != d {
                bail!("line {n}: expected {} values, found {}", d, fields.len() - 1);
            }
            let v = fields[1..]
                .iter()
                .map(|f| parse_float(f, n, "embedding value"))
                .collect::<Result<Vec<_>>>()?;
            rows.insert(fields[0].to_string(), Embedding::new(v)?);
        }
        let dim = dim.ok_or_else(|| anyhow!("no embedding rows"))?;
        Ok(ExternalEmbeddings { dim, rows })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&read_text(path)?).with_context(|| format!("in {}", path.display()))
    }
}

impl Encoder for ExternalEmbeddings {
    fn dim(&self) -> usize {
        self.dim
    }

    fn encode(&self, sample: &QeSample) -> qe_core::Result<Embedding> {
        self.rows
            .get(&sample.id)
            .cloned()
            .ok_or_else(|| qe_core::Error::MissingIds(sample.id.clone()))
    }
}

// ------------------------------------------------------------------ config

/// `train --config` document.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub l2: f64,
    /// Toy encoder dimension; ignored when embeddings are supplied.
    pub dim: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let h = HyperParams::default();
        TrainConfig {
            learning_rate: h.learning_rate,
            epochs: h.epochs,
            l2: h.l2,
            dim: DEFAULT_DIM,
        }
    }
}

impl TrainConfig {
    pub fn hyper(&self) -> HyperParams {
        HyperParams {
            learning_rate: self.learning_rate,
            epochs: self.epochs,
            l2: self.l2,
        }
    }
}

// ------------------------------------------------------------------ corpus

/// Parallel corpus: one `source<TAB>target` pair per line.
pub fn parse_parallel_corpus(text: &str) -> Result<Vec<(TokenSeq, TokenSeq)>> {
    lines(text)
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, l)| {
            let fields: Vec<&str> = l.split('\t').collect();
            if fields.len() != 2 {
                bail!("line {n}: expected `source<TAB>target`, found {} fields", fields.len());
            }
            Ok((TokenSeq::from_text(fields[0]), TokenSeq::from_text(fields[1])))
        })
        .collect()
}

/// Monolingual view of a corpus file: every tab-separated field of every
/// line is one sentence.
pub fn parse_sentences(text: &str) -> Vec<TokenSeq> {
    lines(text)
        .flat_map(|(_, l)| l.split('\t').map(TokenSeq::from_text).collect::<Vec<_>>())
        .filter(|s| !s.is_empty())
        .collect()
}
