//! The `qe` command line.
//!
//! Exit status: 0 on success, 2 for usage errors (unknown subcommand or
//! flag, missing flag), 1 when the operation itself fails.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::num::NonZeroUsize;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use qe_core::augment::{mix_multilingual, upsample_minority, MixStrategy};
use qe_core::ensemble::{greedy_select, selected_average};
use qe_core::eval::evaluate;
use qe_core::features::FeatureConfig;
use qe_core::glassbox::{train_toy_model, ToyLexicalModel};
use qe_core::head::{train_head, Encoder, EncoderConfig, HeadModel, ToyEncoder};
use qe_core::noise::UnigramMlm;
use qe_core::similarity::sim;
use qe_core::{Task, TokenSeq};

use crate::extract::extract_dataset;
use crate::formats::{self, ExternalEmbeddings, TrainConfig};

#[derive(Debug, Parser)]
#[command(name = "qe", version, about = "Uncertainty-feature quality estimation pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum TaskArg {
    Da,
    Ced,
}

impl From<TaskArg> for Task {
    fn from(t: TaskArg) -> Task {
        match t {
            TaskArg::Da => Task::Da,
            TaskArg::Ced => Task::Ced,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum StrategyArg {
    AsIs,
    EnglishFirst,
}

const DATASET_HELP: &str = "Dataset TSV: header `id<TAB>lang_pair<TAB>src<TAB>mt<TAB>label`; \
    DA labels are decimals, CED labels NOT/ERR; text is whitespace-tokenized.";

#[derive(Debug, Subcommand)]
enum Command {
    /// Train the toy lexical translation model.
    #[command(after_help = "Corpus: one `source<TAB>target` sentence pair per line. \
        Output: JSON with src_vocab, tgt_vocab, trans_table, bigram_table, lambda, alpha, floor.")]
    TrainToyModel {
        #[arg(long)]
        corpus: PathBuf,
        /// Add-alpha smoothing constant (> 0).
        #[arg(long)]
        alpha: f64,
        /// Interpolation weight of the translation table, in [0, 1].
        #[arg(long)]
        lambda: f64,
        #[arg(long)]
        output: PathBuf,
    },
    /// Build the unigram masked-LM stub.
    #[command(after_help = "Corpus: every tab-separated field of every line is a sentence. \
        Output: JSON with vocab and probs.")]
    BuildMlm {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Extract the 21 uncertainty features of every sample.
    #[command(after_help = "Config JSON: n_mc, dropout_rate, n_noise, noise_rounds, p_insert, \
        p_delete, base_seed. Output TSV: `id` and the 21 feature columns, 17 significant digits.")]
    Extract {
        /// Dataset TSV.
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum, default_value = "da")]
        task: TaskArg,
        /// Toy model JSON.
        #[arg(long)]
        model: PathBuf,
        /// Unigram MLM JSON.
        #[arg(long)]
        mlm: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Worker threads; the output does not depend on this.
        #[arg(long, default_value = "1")]
        workers: NonZeroUsize,
        /// Overrides `base_seed` from the config.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Train the linear head.
    #[command(after_help = "Config JSON (all optional): learning_rate, epochs, l2, dim. \
        Embeddings TSV: header starting with `id`, then `id` plus one float per dimension. \
        Output: JSON with task, weights, bias, encoder, norm_stats, hyper.")]
    Train {
        #[arg(long, value_enum)]
        task: TaskArg,
        #[arg(long, help = DATASET_HELP)]
        data: PathBuf,
        /// Feature TSV from `extract`.
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        embeddings: Option<PathBuf>,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Predict with a trained head.
    #[command(after_help = "Output TSV: header `id<TAB>score`; DA scores or CED P(ERR).")]
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, help = DATASET_HELP)]
        data: PathBuf,
        #[arg(long)]
        features: PathBuf,
        /// Required when the model was trained on external embeddings.
        #[arg(long)]
        embeddings: Option<PathBuf>,
        #[arg(long)]
        output: PathBuf,
    },
    /// Pearson (DA) or MCC (CED) of predictions against gold labels.
    Evaluate {
        #[arg(long, value_enum)]
        task: TaskArg,
        /// Prediction TSV.
        #[arg(long)]
        preds: PathBuf,
        /// Gold dataset TSV.
        #[arg(long)]
        gold: PathBuf,
        /// Also print one line per language pair.
        #[arg(long)]
        by_pair: bool,
        /// Write the report as JSON here.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Greedy forward ensemble of prediction files.
    #[command(after_help = "Model ids are the prediction file stems. Writes the averaged \
        prediction TSV and a JSON selection report with members and trajectory.")]
    Ensemble {
        #[arg(long, value_enum)]
        task: TaskArg,
        #[arg(long, num_args = 1.., required = true)]
        preds: Vec<PathBuf>,
        /// Development dataset TSV.
        #[arg(long)]
        dev: PathBuf,
        #[arg(long)]
        max_steps: usize,
        #[arg(long)]
        output: PathBuf,
        /// Selection report path (default: `<output>.selection.json`).
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Balance NOT/ERR per language pair by duplicating the minority class.
    Upsample {
        /// CED dataset TSV.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        output: PathBuf,
    },
    /// Concatenate datasets, optionally putting the English side first.
    Mix {
        #[arg(long, value_enum)]
        strategy: StrategyArg,
        #[arg(long, num_args = 1.., required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long, value_enum, default_value = "da")]
        task: TaskArg,
        #[arg(long)]
        output: PathBuf,
    },
    /// Meteor similarity of two whitespace-tokenized strings.
    Sim {
        #[arg(long = "ref")]
        reference: String,
        #[arg(long)]
        hyp: String,
    },
}

impl Command {
    fn inputs(&self) -> Vec<&Path> {
        let mut v: Vec<&Path> = match self {
            Command::TrainToyModel { corpus, .. } | Command::BuildMlm { corpus, .. } => vec![corpus],
            Command::Extract { data, model, mlm, config, .. } => vec![data, model, mlm, config],
            Command::Train { data, features, config, .. } => vec![data, features, config],
            Command::Predict { model, data, features, .. } => vec![model, data, features],
            Command::Evaluate { preds, gold, .. } => vec![preds, gold],
            Command::Ensemble { preds, dev, .. } => preds.iter().map(PathBuf::as_path).chain([dev.as_path()]).collect(),
            Command::Upsample { input, .. } => vec![input],
            Command::Mix { inputs, .. } => inputs.iter().map(PathBuf::as_path).collect(),
            Command::Sim { .. } => vec![],
        };
        if let Command::Train { embeddings: Some(e), .. } | Command::Predict { embeddings: Some(e), .. } = self {
            v.push(e);
        }
        v
    }
}

/// Parses `args` (including the program name) and runs the subcommand.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let text = e.render().ansi().to_string();
            let _ = if e.use_stderr() { write!(err, "{text}") } else { write!(out, "{text}") };
            return code;
        }
    };
    let missing: Vec<String> = cli
        .command
        .inputs()
        .into_iter()
        .filter(|p| !p.exists())
        .map(|p| p.display().to_string())
        .collect();
    let result = if missing.is_empty() {
        execute(cli.command, out)
    } else {
        Err(anyhow::anyhow!("input file(s) not found: {}", missing.join(", ")))
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e:#}");
            1
        }
    }
}

fn load_encoder(model: &HeadModel, embeddings: Option<&Path>) -> Result<Box<dyn Encoder>> {
    match (model.encoder, embeddings) {
        (EncoderConfig::Toy { dim }, _) => Ok(Box::new(ToyEncoder { dim })),
        (EncoderConfig::External { dim }, Some(p)) => {
            let e = ExternalEmbeddings::load(p)?;
            if e.dim() != dim {
                bail!("embeddings have dimension {}, model expects {dim}", e.dim());
            }
            Ok(Box::new(e))
        }
        (EncoderConfig::External { .. }, None) => bail!("model uses external embeddings; pass --embeddings"),
    }
}

fn execute(command: Command, out: &mut dyn Write) -> Result<()> {
    match command {
        Command::TrainToyModel { corpus, alpha, lambda, output } => {
            let pairs = formats::parse_parallel_corpus(&formats::read_text(&corpus)?)
                .with_context(|| format!("in {}", corpus.display()))?;
            let model = train_toy_model(&pairs, alpha, lambda)?;
            formats::write_json(&output, &model)?;
            writeln!(
                out,
                "toy model: {} source / {} target tokens from {} pairs",
                model.src_vocab().len(),
                model.tgt_vocab().len(),
                pairs.len()
            )?;
        }
        Command::BuildMlm { corpus, output } => {
            let sentences = formats::parse_sentences(&formats::read_text(&corpus)?);
            let mlm = UnigramMlm::from_corpus(&sentences)?;
            formats::write_json(&output, &mlm)?;
            writeln!(out, "unigram MLM: {} tokens", mlm.vocab().len())?;
        }
        Command::Extract { data, task, model, mlm, config, output, workers, seed } => {
            let data = formats::load_dataset(&data, task.into())?;
            let model: ToyLexicalModel = formats::read_json(&model)?;
            let mlm: UnigramMlm = formats::read_json(&mlm)?;
            let mut cfg: FeatureConfig = formats::read_json(&config)?;
            if let Some(s) = seed {
                cfg.base_seed = s;
            }
            let rows = extract_dataset(&data, &model, &mlm, &cfg, workers)?;
            formats::write_atomic(&output, formats::format_features(&rows).as_bytes())?;
            writeln!(out, "extracted {} samples (seed {}, workers {})", rows.len(), cfg.base_seed, workers)?;
        }
        Command::Train { task, data, features, embeddings, config, output } => {
            let data = formats::load_dataset(&data, task.into())?;
            let feats = formats::load_features(&features)?;
            let cfg: TrainConfig = formats::read_json(&config)?;
            let model = match embeddings {
                Some(p) => {
                    let enc = ExternalEmbeddings::load(&p)?;
                    let ec = EncoderConfig::External { dim: enc.dim() };
                    train_head(&data, &feats, &enc, ec, &cfg.hyper())?
                }
                None => {
                    let enc = ToyEncoder { dim: cfg.dim };
                    train_head(&data, &feats, &enc, EncoderConfig::Toy { dim: cfg.dim }, &cfg.hyper())?
                }
            };
            formats::write_json(&output, &model)?;
            writeln!(out, "trained {} head on {} samples", model.task.name(), data.len())?;
        }
        Command::Predict { model, data, features, embeddings, output } => {
            let model: HeadModel = formats::read_json(&model)?;
            let data = formats::load_dataset(&data, model.task)?;
            let feats = formats::load_features(&features)?;
            let encoder = load_encoder(&model, embeddings.as_deref())?;
            let mut scores = BTreeMap::new();
            for s in data.samples() {
                let f = feats
                    .get(&s.id)
                    .with_context(|| format!("no features for sample `{}`", s.id))?;
                scores.insert(s.id.clone(), model.predict(&encoder.encode(s)?, f)?);
            }
            let order: Vec<&str> = data.samples().iter().map(|s| s.id.as_str()).collect();
            formats::write_atomic(&output, formats::format_predictions(&scores, &order).as_bytes())?;
            writeln!(out, "predicted {} samples", order.len())?;
        }
        Command::Evaluate { task, preds, gold, by_pair, json } => {
            let preds = formats::parse_predictions(&formats::read_text(&preds)?)
                .with_context(|| format!("in {}", preds.display()))?;
            let gold = formats::load_dataset(&gold, task.into())?;
            let report = evaluate(&preds, &gold)?;
            writeln!(out, "{:<8} {:>9.6}  n={}", report.metric, report.value, report.count)?;
            if by_pair {
                for (pair, v) in &report.by_pair {
                    writeln!(out, "  {pair:<6} {v:>9.6}")?;
                }
            }
            if let Some(p) = json {
                formats::write_json(&p, &report)?;
            }
        }
        Command::Ensemble { task, preds, dev, max_steps, output, report } => {
            let dev = formats::load_dataset(&dev, task.into())?;
            let candidates = preds
                .iter()
                .map(|p| formats::load_prediction_set(p))
                .collect::<Result<Vec<_>>>()?;
            let mut ids: Vec<&str> = candidates.iter().map(|c| c.model_id.as_str()).collect();
            ids.sort_unstable();
            if ids.windows(2).any(|w| w[0] == w[1]) {
                bail!("prediction files must have distinct file names (model ids)");
            }
            let selection = greedy_select(&candidates, &dev, max_steps)?;
            let avg = selected_average(&candidates, &selection)?;
            let order: Vec<&str> = avg.scores.keys().map(String::as_str).collect();
            formats::write_atomic(&output, formats::format_predictions(&avg.scores, &order).as_bytes())?;
            let report = report.unwrap_or_else(|| {
                let mut s = output.clone().into_os_string();
                s.push(".selection.json");
                PathBuf::from(s)
            });
            formats::write_json(&report, &selection)?;
            writeln!(out, "selected {} of {} models: {}", selection.members.len(), candidates.len(), selection.members.join(", "))?;
            for (m, v) in selection.members.iter().zip(&selection.trajectory) {
                writeln!(out, "  +{m:<20} {v:.6}")?;
            }
        }
        Command::Upsample { input, seed, output } => {
            let data = formats::load_dataset(&input, Task::Ced)?;
            let up = upsample_minority(&data, seed)?;
            formats::save_dataset(&output, &up)?;
            writeln!(out, "upsampled {} -> {} samples (seed {seed})", data.len(), up.len())?;
        }
        Command::Mix { strategy, inputs, task, output } => {
            let sets = inputs
                .iter()
                .map(|p| formats::load_dataset(p, task.into()))
                .collect::<Result<Vec<_>>>()?;
            let strategy = match strategy {
                StrategyArg::AsIs => MixStrategy::AsIs,
                StrategyArg::EnglishFirst => MixStrategy::EnglishFirst,
            };
            let mixed = mix_multilingual(&sets, strategy)?;
            formats::save_dataset(&output, &mixed)?;
            writeln!(out, "mixed {} samples from {} files", mixed.len(), sets.len())?;
        }
        Command::Sim { reference, hyp } => {
            let s = sim(&TokenSeq::from_text(&reference), &TokenSeq::from_text(&hyp));
            writeln!(out, "{:.6}", s.value())?;
        }
    }
    Ok(())
}
