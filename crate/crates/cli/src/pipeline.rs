//! The workflow behind each subcommand. Every stage reads its inputs from the
//! workdir, writes its artifacts and a results file there, and returns a
//! summary that the command line prints as JSON.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use proofrec::baselines::{fit_tfidf, knn_train, linear_train, KnnModel, LinearModel, NgramConfig, Persist, TfidfModel};
use proofrec::corpus::{generate_synthetic, load_library, load_trace, split, write_library, write_trace};
use proofrec::corpus::{LemmaRecord, ProofStep, SequentState, SplitSpec, SynthConfig};
use proofrec::encoder::{pretrain as mlm_pretrain, siamese_train, train_classifier, EncoderParameters, EpochMetrics};
use proofrec::eval::{
    bootstrap, bootstrap_distribution, curve_csv, expected_random_mrr, frequency_baseline, mean, reciprocal_ranks,
    to_jsonl, top_n_curve, top_n_hits, truth_ranks, welch_t_test, CurvePoint, EvalReport, WelchResult,
};
use proofrec::featurizer::{Featurizer, FeaturizerConfig, TokenStream};
use proofrec::retrieval::{build_index, DenseEncoder, IndexArtifacts, IndexFingerprints, LemmaIndex, LemmaLibrary, Scorer};
use proofrec::tokenizer::{train_bpe, TokenId, Tokenizer};
use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::error::CliError;

pub const TOKENIZER_DIR: &str = "tokenizer";
pub const PRETRAINED_FILE: &str = "encoder_pretrained.json";
pub const COMMAND_MODEL_FILE: &str = "command_model.json";
pub const LEMMA_MODEL_FILE: &str = "lemma_model.json";
pub const INDEX_FILE: &str = "lemma_index.json";
pub const BASELINE_DIR: &str = "baselines";
pub const RESULTS_DIR: &str = "results";
pub const TOPN_CSV: &str = "command_topn.csv";

/// Artifact locations inside a workdir.
#[derive(Debug, Clone)]
pub struct Workdir {
    root: PathBuf,
}

impl Workdir {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn tokenizer(&self) -> PathBuf {
        self.root.join(TOKENIZER_DIR)
    }

    pub fn pretrained(&self) -> PathBuf {
        self.root.join(PRETRAINED_FILE)
    }

    pub fn command_model(&self) -> PathBuf {
        self.root.join(COMMAND_MODEL_FILE)
    }

    pub fn lemma_model(&self) -> PathBuf {
        self.root.join(LEMMA_MODEL_FILE)
    }

    pub fn index(&self) -> PathBuf {
        self.root.join(INDEX_FILE)
    }

    pub fn baseline(&self, name: &str) -> PathBuf {
        self.root.join(BASELINE_DIR).join(format!("{name}.json"))
    }

    pub fn results(&self, name: &str) -> PathBuf {
        self.root.join(RESULTS_DIR).join(name)
    }
}

fn require(path: &Path, what: &'static str, producer: &'static str) -> Result<(), CliError> {
    if path.exists() {
        Ok(())
    } else {
        Err(CliError::MissingArtifact {
            what,
            path: path.to_owned(),
            producer,
        })
    }
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(CliError::io(dir))?;
    }
    fs::write(path, text).map_err(CliError::io(path))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).expect("summaries serialize");
    write_file(path, &(text + "\n"))
}

/// The split trace and the lemma library.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub train: Vec<ProofStep>,
    pub test: Vec<ProofStep>,
    pub library: Vec<LemmaRecord>,
}

impl Dataset {
    pub fn load(config: &Config) -> Result<Self, CliError> {
        let trace = config.trace_path();
        let library = config.library_path();
        require(&trace, "trace file", "synth")?;
        require(&library, "lemma library", "synth")?;
        let steps = load_trace(&trace)?;
        let library = load_library(&library)?;
        let (train, test) = split(
            &steps,
            SplitSpec {
                train_fraction: config.data.train_fraction,
                seed: config.data.split_seed,
            },
        )?;
        if train.is_empty() || test.is_empty() {
            return Err(CliError::Data(format!(
                "split of {} steps leaves an empty train or test part",
                steps.len()
            )));
        }
        Ok(Self { train, test, library })
    }

    /// Commands seen in training, sorted.
    pub fn commands(&self) -> Vec<String> {
        let mut commands: Vec<String> = self.train.iter().map(|s| s.command.clone()).collect();
        commands.sort();
        commands.dedup();
        commands
    }

    /// `(step, library position)` for steps that import a lemma.
    pub fn lemma_queries<'a>(&self, steps: &'a [ProofStep]) -> Result<Vec<(&'a ProofStep, usize)>, CliError> {
        let positions: BTreeMap<&str, usize> = self
            .library
            .iter()
            .enumerate()
            .map(|(i, l)| (l.lemma_id.as_str(), i))
            .collect();
        steps
            .iter()
            .filter_map(|s| s.lemma_name.as_deref().map(|name| (s, name)))
            .map(|(s, name)| match positions.get(name) {
                Some(&i) => Ok((s, i)),
                None => Err(CliError::Data(format!(
                    "step {} of proof `{}` imports `{name}`, which is not in the library",
                    s.step_index, s.proof_id
                ))),
            })
            .collect()
    }
}

/// The two featurizations: placeholder mode for command prediction and typed
/// mode for lemma retrieval.
pub struct Featurizers {
    pub command: Featurizer,
    pub lemma: Featurizer,
}

impl Featurizers {
    pub fn new() -> Result<Self, CliError> {
        Ok(Self {
            command: Featurizer::new(FeaturizerConfig::command())?,
            lemma: Featurizer::new(FeaturizerConfig::lemma())?,
        })
    }

    pub fn command_stream(&self, step: &ProofStep) -> TokenStream {
        self.command.featurize_for_command(&step.sequent, &step.history)
    }

    pub fn query_stream(&self, sequent: &SequentState) -> TokenStream {
        self.lemma.featurize_query(sequent)
    }

    pub fn lemma_stream(&self, lemma: &LemmaRecord) -> TokenStream {
        self.lemma.featurize_lemma(lemma)
    }

    /// Every stream the encoder reads: training command inputs, training
    /// retrieval queries and the whole library.
    pub fn encoder_corpus(&self, data: &Dataset) -> Vec<TokenStream> {
        data.train
            .iter()
            .map(|s| self.command_stream(s))
            .chain(data.train.iter().map(|s| self.query_stream(&s.sequent)))
            .chain(data.library.iter().map(|l| self.lemma_stream(l)))
            .collect()
    }
}

pub fn encode(tokenizer: &Tokenizer, stream: &TokenStream, max_len: usize) -> Vec<TokenId> {
    let mut ids = tokenizer.encode(stream);
    ids.truncate(max_len);
    ids
}

pub fn load_tokenizer(work: &Workdir) -> Result<Tokenizer, CliError> {
    let dir = work.tokenizer();
    require(&dir, "tokenizer", "train-tokenizer")?;
    Ok(Tokenizer::load(&dir)?)
}

fn load_encoder(
    path: &Path,
    what: &'static str,
    producer: &'static str,
    tokenizer: &Tokenizer,
) -> Result<EncoderParameters, CliError> {
    require(path, what, producer)?;
    Ok(EncoderParameters::load(path, Some(&tokenizer.fingerprint()))?)
}

pub fn load_command_model(work: &Workdir, tokenizer: &Tokenizer) -> Result<EncoderParameters, CliError> {
    load_encoder(&work.command_model(), "command model", "train-command", tokenizer)
}

/// The lemma index with its siamese encoder, fingerprints checked.
pub fn load_index(work: &Workdir, tokenizer: &Tokenizer) -> Result<LemmaIndex, CliError> {
    let params = load_encoder(&work.lemma_model(), "lemma model", "train-lemma", tokenizer)?;
    require(&work.index(), "lemma index", "train-lemma")?;
    let dense = DenseEncoder {
        params,
        tokenizer: tokenizer.clone(),
    };
    Ok(LemmaIndex::load(&work.index(), Some(dense))?)
}

fn load_baseline<T: Persist>(work: &Workdir, name: &str) -> Result<T, CliError> {
    let path = work.baseline(name);
    require(&path, "baseline model", "fit-baselines")?;
    Ok(T::load(&path)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSummary {
    pub steps: usize,
    pub lemma_steps: usize,
    pub lemmas: usize,
    pub commands: usize,
    pub trace: PathBuf,
    pub library: PathBuf,
}

pub fn synth(config: &Config) -> Result<SynthSummary, CliError> {
    let corpus = generate_synthetic(&SynthConfig::from(&config.synth))?;
    let (trace, library) = (config.trace_path(), config.library_path());
    for path in [&trace, &library] {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(CliError::io(dir))?;
        }
    }
    write_trace(&trace, &corpus.steps)?;
    write_library(&library, &corpus.library)?;
    Ok(SynthSummary {
        steps: corpus.steps.len(),
        lemma_steps: corpus.steps.iter().filter(|s| s.lemma_name.is_some()).count(),
        lemmas: corpus.library.len(),
        commands: corpus.commands.len(),
        trace,
        library,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenizerSummary {
    pub streams: usize,
    pub vocab_size: usize,
    pub merges: usize,
    pub fingerprint: String,
}

pub fn train_tokenizer(config: &Config) -> Result<TokenizerSummary, CliError> {
    let work = Workdir::new(&config.workdir);
    let data = Dataset::load(config)?;
    let corpus = Featurizers::new()?.encoder_corpus(&data);
    let tokenizer = train_bpe(&corpus, config.tokenizer.vocab_budget)?;
    fs::create_dir_all(work.tokenizer()).map_err(CliError::io(work.tokenizer()))?;
    tokenizer.save(work.tokenizer())?;
    let summary = TokenizerSummary {
        streams: corpus.len(),
        vocab_size: tokenizer.vocab_size(),
        merges: tokenizer.merges().len(),
        fingerprint: tokenizer.fingerprint(),
    };
    write_json(&work.results("train_tokenizer.json"), &summary)?;
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossPoint {
    pub step: usize,
    pub loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PretrainSummary {
    pub sequences: usize,
    pub steps: usize,
    pub first_loss: f64,
    /// Mean loss over the last 100 steps.
    pub final_loss: f64,
    pub seconds: f64,
    pub fingerprint: String,
}

pub fn pretrain(config: &Config) -> Result<PretrainSummary, CliError> {
    let start = Instant::now();
    let work = Workdir::new(&config.workdir);
    let tokenizer = load_tokenizer(&work)?;
    let data = Dataset::load(config)?;
    let max_len = config.encoder.max_len;
    let corpus: Vec<Vec<TokenId>> = Featurizers::new()?
        .encoder_corpus(&data)
        .iter()
        .map(|s| encode(&tokenizer, s, max_len))
        .collect();
    let mut params = EncoderParameters::init(
        config.encoder.clone(),
        tokenizer.vocab_size(),
        data.commands(),
        tokenizer.fingerprint(),
    )?;
    let losses = mlm_pretrain(&mut params, &corpus, &config.pretrain)?;
    params.save(&work.pretrained())?;
    let curve: Vec<LossPoint> = losses
        .iter()
        .enumerate()
        .map(|(step, &loss)| LossPoint { step, loss })
        .collect();
    write_file(&work.results("pretrain.jsonl"), &to_jsonl(&curve))?;
    let tail = &losses[losses.len().saturating_sub(100)..];
    Ok(PretrainSummary {
        sequences: corpus.len(),
        steps: losses.len(),
        first_loss: losses.first().copied().unwrap_or(f64::NAN),
        final_loss: if tail.is_empty() { f64::NAN } else { mean(tail) },
        seconds: start.elapsed().as_secs_f64(),
        fingerprint: params.fingerprint(),
    })
}

fn load_pretrained(work: &Workdir, tokenizer: &Tokenizer) -> Result<EncoderParameters, CliError> {
    load_encoder(&work.pretrained(), "pretrained encoder", "pretrain", tokenizer)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommandTrainSummary {
    pub train_examples: usize,
    pub valid_examples: usize,
    pub commands: Vec<String>,
    pub best_epoch: usize,
    pub epochs: Vec<EpochMetrics>,
    pub seconds: f64,
    pub fingerprint: String,
}

pub fn train_command(config: &Config) -> Result<CommandTrainSummary, CliError> {
    let start = Instant::now();
    let work = Workdir::new(&config.workdir);
    let tokenizer = load_tokenizer(&work)?;
    let pretrained = load_pretrained(&work, &tokenizer)?;
    let data = Dataset::load(config)?;
    let feats = Featurizers::new()?;
    let commands = data.commands();
    let params = pretrained.with_commands(commands.clone(), config.command.seed);
    let (fit, valid) = if config.data.valid_fraction > 0.0 {
        split(
            &data.train,
            SplitSpec {
                train_fraction: 1.0 - config.data.valid_fraction,
                seed: config.data.split_seed,
            },
        )?
    } else {
        (data.train.clone(), Vec::new())
    };
    let max_len = config.encoder.max_len;
    let examples = |steps: &[ProofStep]| -> Vec<(Vec<TokenId>, usize)> {
        steps
            .iter()
            .map(|s| {
                let label = commands.binary_search(&s.command).expect("training command");
                (encode(&tokenizer, &feats.command_stream(s), max_len), label)
            })
            .collect()
    };
    let (fit, valid) = (examples(&fit), examples(&valid));
    let run = train_classifier(params, &fit, &valid, &config.command)?;
    run.params.save(&work.command_model())?;
    write_file(&work.results("train_command.jsonl"), &to_jsonl(&run.epochs))?;
    Ok(CommandTrainSummary {
        train_examples: fit.len(),
        valid_examples: valid.len(),
        commands,
        best_epoch: run.best_epoch,
        epochs: run.epochs,
        seconds: start.elapsed().as_secs_f64(),
        fingerprint: run.params.fingerprint(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaTrainSummary {
    pub positives: usize,
    pub library: usize,
    pub epoch_losses: Vec<f64>,
    pub seconds: f64,
    pub fingerprint: String,
    pub index: IndexFingerprints,
}

pub fn train_lemma(config: &Config) -> Result<LemmaTrainSummary, CliError> {
    let start = Instant::now();
    let work = Workdir::new(&config.workdir);
    let tokenizer = load_tokenizer(&work)?;
    let pretrained = load_pretrained(&work, &tokenizer)?;
    let data = Dataset::load(config)?;
    let feats = Featurizers::new()?;
    let max_len = config.encoder.max_len;
    let positives: Vec<(Vec<TokenId>, usize)> = data
        .lemma_queries(&data.train)?
        .into_iter()
        .map(|(s, i)| (encode(&tokenizer, &feats.query_stream(&s.sequent), max_len), i))
        .collect();
    let lemma_streams: Vec<TokenStream> = data.library.iter().map(|l| feats.lemma_stream(l)).collect();
    let library_ids: Vec<Vec<TokenId>> = lemma_streams
        .iter()
        .map(|s| encode(&tokenizer, s, max_len))
        .collect();
    let run = siamese_train(pretrained, &positives, &library_ids, &config.lemma)?;
    run.params.save(&work.lemma_model())?;
    let fingerprint = run.params.fingerprint();
    let index = build_index(
        LemmaLibrary::new(data.library.clone())?,
        FeaturizerConfig::lemma(),
        IndexArtifacts {
            dense: Some(DenseEncoder {
                params: run.params,
                tokenizer,
            }),
            tfidf: Some(fit_tfidf(&lemma_streams, NgramConfig { max_n: config.baselines.max_n })?),
            random_seed: config.eval.seed,
        },
    )?;
    index.save(&work.index())?;
    let curve: Vec<LossPoint> = run
        .epoch_losses
        .iter()
        .enumerate()
        .map(|(step, &loss)| LossPoint { step, loss })
        .collect();
    write_file(&work.results("train_lemma.jsonl"), &to_jsonl(&curve))?;
    Ok(LemmaTrainSummary {
        positives: positives.len(),
        library: data.library.len(),
        epoch_losses: run.epoch_losses,
        seconds: start.elapsed().as_secs_f64(),
        fingerprint,
        index: index.fingerprints().clone(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineSummary {
    pub train_examples: usize,
    pub features: usize,
    pub classes: usize,
    pub seconds: f64,
}

pub fn fit_baselines(config: &Config) -> Result<BaselineSummary, CliError> {
    let start = Instant::now();
    let work = Workdir::new(&config.workdir);
    let data = Dataset::load(config)?;
    let feats = Featurizers::new()?;
    let streams: Vec<TokenStream> = data.train.iter().map(|s| feats.command_stream(s)).collect();
    let labels: Vec<String> = data.train.iter().map(|s| s.command.clone()).collect();
    let tfidf = fit_tfidf(&streams, NgramConfig { max_n: config.baselines.max_n })?;
    let vectors: Vec<_> = streams.iter().map(|s| tfidf.transform(s)).collect();
    let linear = linear_train(&vectors, &labels, &config.baselines.linear)?;
    let knn = knn_train(vectors, labels)?;
    fs::create_dir_all(work.root().join(BASELINE_DIR)).map_err(CliError::io(work.root().join(BASELINE_DIR)))?;
    tfidf.save(&work.baseline("tfidf"))?;
    knn.save(&work.baseline("knn"))?;
    linear.save(&work.baseline("linear"))?;
    let summary = BaselineSummary {
        train_examples: knn.len(),
        features: tfidf.n_features(),
        classes: linear.classes().len(),
        seconds: start.elapsed().as_secs_f64(),
    };
    write_json(&work.results("fit_baselines.json"), &summary)?;
    Ok(summary)
}

/// Welch test between the bootstrap distributions of two systems. `None`
/// when both distributions are constant and the statistic is undefined.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub a: String,
    pub b: String,
    pub welch: Option<WelchResult>,
}

fn compare(
    names: &[String],
    distributions: &[Vec<f64>],
    reference: usize,
    alpha: f64,
) -> Result<Vec<Comparison>, CliError> {
    let mut out = Vec::new();
    for (i, name) in names.iter().enumerate() {
        if i == reference {
            continue;
        }
        let welch = match welch_t_test(&distributions[reference], &distributions[i], alpha) {
            Ok(w) => Some(w),
            Err(proofrec::eval::EvalError::ZeroVariance) => None,
            Err(e) => return Err(e.into()),
        };
        out.push(Comparison {
            a: names[reference].clone(),
            b: name.clone(),
            welch,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommandEvalSummary {
    pub test_examples: usize,
    pub commands: usize,
    /// Share of the most common command among the test truths.
    pub max_class_prior: f64,
    pub curve: Vec<CurvePoint>,
    pub reports: Vec<EvalReport>,
    pub comparisons: Vec<Comparison>,
    pub seconds: f64,
}

impl CommandEvalSummary {
    pub fn accuracy(&self, variant: &str, n: usize) -> Option<f64> {
        self.curve
            .iter()
            .find(|p| p.variant == variant && p.n == n)
            .map(|p| p.accuracy)
    }
}

pub const COMMAND_VARIANTS: [&str; 4] = ["neural", "knn", "linear", "frequency"];

pub fn eval_command(config: &Config) -> Result<CommandEvalSummary, CliError> {
    let start = Instant::now();
    let work = Workdir::new(&config.workdir);
    let tokenizer = load_tokenizer(&work)?;
    let model = load_command_model(&work, &tokenizer)?;
    let tfidf: TfidfModel = load_baseline(&work, "tfidf")?;
    let knn: KnnModel = load_baseline(&work, "knn")?;
    let linear: LinearModel = load_baseline(&work, "linear")?;
    let data = Dataset::load(config)?;
    let feats = Featurizers::new()?;
    let truths: Vec<String> = data.test.iter().map(|s| s.command.clone()).collect();
    let streams: Vec<TokenStream> = data.test.iter().map(|s| feats.command_stream(s)).collect();
    let train_commands: Vec<String> = data.train.iter().map(|s| s.command.clone()).collect();
    let n_commands = data.commands().len();

    let mut rankings: Vec<Vec<Vec<String>>> = vec![Vec::new(); COMMAND_VARIANTS.len()];
    let window = frequency_baseline(&train_commands, n_commands)?;
    for stream in &streams {
        let ids = encode(&tokenizer, stream, model.config.max_len);
        rankings[0].push(model.classify_command(&ids)?.into_iter().map(|(c, _)| c).collect());
        let v = tfidf.transform(stream);
        rankings[1].push(knn.predict(&v, config.baselines.k)?);
        rankings[2].push(linear.predict(&v).into_iter().map(|(c, _)| c).collect());
        rankings[3].push(window.clone());
    }

    let mut curve = Vec::new();
    let mut reports = Vec::new();
    let mut distributions = Vec::new();
    let seed = config.eval.seed;
    for (variant, ranking) in COMMAND_VARIANTS.iter().zip(&rankings) {
        curve.extend(top_n_curve(variant, ranking, &truths, config.eval.max_n)?);
        let hits = top_n_hits(ranking, &truths, 1)?;
        let name = format!("top1_accuracy/{variant}");
        reports.push(bootstrap(&name, |xs: &[f64]| mean(xs), &hits, config.eval.resamples, seed)?);
        distributions.push(bootstrap_distribution(|xs: &[f64]| mean(xs), &hits, config.eval.resamples, seed)?);
    }
    let names: Vec<String> = COMMAND_VARIANTS.iter().map(|s| s.to_string()).collect();
    let comparisons = compare(&names, &distributions, 0, config.eval.alpha)?;

    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for t in &truths {
        *counts.entry(t).or_default() += 1;
    }
    let max_class_prior = counts.values().copied().max().unwrap_or(0) as f64 / truths.len() as f64;

    write_file(&work.results(TOPN_CSV), &curve_csv(&curve))?;
    write_file(&work.results("eval_command.jsonl"), &to_jsonl(&reports))?;
    let summary = CommandEvalSummary {
        test_examples: truths.len(),
        commands: n_commands,
        max_class_prior,
        curve,
        reports,
        comparisons,
        seconds: start.elapsed().as_secs_f64(),
    };
    write_json(&work.results("eval_command.json"), &summary)?;
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScorerResult {
    pub scorer: Scorer,
    pub mrr: f64,
    /// `1 / mrr`, the harmonic-mean rank of the ground truth.
    pub mean_rank: f64,
    pub report: EvalReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaEvalSummary {
    pub queries: usize,
    pub library: usize,
    /// `H_L / L`, the expected MRR of a uniformly random ranking.
    pub expected_random_mrr: f64,
    pub scorers: Vec<ScorerResult>,
    pub comparisons: Vec<Comparison>,
    pub seconds: f64,
}

impl LemmaEvalSummary {
    pub fn mrr(&self, scorer: Scorer) -> Option<f64> {
        self.scorers.iter().find(|s| s.scorer == scorer).map(|s| s.mrr)
    }
}

pub fn eval_lemma(config: &Config) -> Result<LemmaEvalSummary, CliError> {
    let start = Instant::now();
    let work = Workdir::new(&config.workdir);
    let tokenizer = load_tokenizer(&work)?;
    let index = load_index(&work, &tokenizer)?;
    let data = Dataset::load(config)?;
    let queries = data.lemma_queries(&data.test)?;
    if queries.is_empty() {
        return Err(CliError::Data("no test step imports a lemma".into()));
    }
    let truths: Vec<String> = queries.iter().map(|(_, i)| data.library[*i].lemma_id.clone()).collect();
    let seed = config.eval.seed;
    let mut scorers = Vec::new();
    let mut distributions = Vec::new();
    for scorer in index.scorers() {
        let results = queries
            .iter()
            .map(|(s, _)| index.rank_lemmas(&s.sequent, scorer, None))
            .collect::<Result<Vec<_>, _>>()?;
        let rr = reciprocal_ranks(&truth_ranks(&results, &truths)?)?;
        let name = format!("mrr/{scorer}");
        let report = bootstrap(&name, |xs: &[f64]| mean(xs), &rr, config.eval.resamples, seed)?;
        distributions.push(bootstrap_distribution(|xs: &[f64]| mean(xs), &rr, config.eval.resamples, seed)?);
        scorers.push(ScorerResult {
            scorer,
            mrr: report.estimate,
            mean_rank: 1.0 / report.estimate,
            report,
        });
    }
    let names: Vec<String> = scorers.iter().map(|s| s.scorer.to_string()).collect();
    let comparisons = compare(&names, &distributions, 0, config.eval.alpha)?;
    let reports: Vec<&EvalReport> = scorers.iter().map(|s| &s.report).collect();
    write_file(&work.results("eval_lemma.jsonl"), &to_jsonl(&reports))?;
    let summary = LemmaEvalSummary {
        queries: queries.len(),
        library: index.len(),
        expected_random_mrr: expected_random_mrr(index.len()),
        scorers,
        comparisons,
        seconds: start.elapsed().as_secs_f64(),
    };
    write_json(&work.results("eval_lemma.json"), &summary)?;
    Ok(summary)
}
