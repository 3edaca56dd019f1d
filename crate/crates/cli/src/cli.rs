//! Command-line surface. Each subcommand loads the config file (if any),
//! applies its flags on top, validates, and runs one pipeline stage.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::Config;
use crate::error::CliError;
use crate::pipeline::{self, Workdir};
use crate::service::{self, Service};

#[derive(Debug, Parser)]
#[command(name = "proofrec", version, about = "Next-command prediction and lemma retrieval for proof assistants")]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// TOML config file; its values override the built-in defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Directory for data, artifacts and results.
    #[arg(long, global = true)]
    pub workdir: Option<PathBuf>,
    /// Seed of the train/test split.
    #[arg(long, global = true)]
    pub split_seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic trace and lemma library.
    Synth(SynthArgs),
    /// Learn the BPE merge table and vocabulary.
    TrainTokenizer(TokenizerArgs),
    /// Masked-token pretraining of the encoder.
    Pretrain(TrainArgs),
    /// Fine-tune the command classifier.
    TrainCommand(TrainArgs),
    /// Fine-tune the siamese lemma scorer and build the lemma index.
    TrainLemma(LemmaArgs),
    /// Fit the TF-IDF, kNN and logistic-regression command baselines.
    FitBaselines(BaselineArgs),
    /// Top-N command accuracy for every predictor, with bootstrap intervals.
    EvalCommand(EvalArgs),
    /// Lemma-retrieval MRR for every scorer, with bootstrap intervals.
    EvalLemma(EvalArgs),
    /// Run the JSON recommendation service.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of proof steps.
    #[arg(long)]
    pub steps: Option<usize>,
    /// Number of distinct commands.
    #[arg(long)]
    pub commands: Option<usize>,
    /// Number of library lemmas.
    #[arg(long)]
    pub lemmas: Option<usize>,
    #[arg(long)]
    pub theories: Option<usize>,
    /// Share of steps that import a lemma.
    #[arg(long)]
    pub lemma_rate: Option<f64>,
}

#[derive(Debug, Args)]
pub struct TokenizerArgs {
    /// Upper bound on the vocabulary size.
    #[arg(long)]
    pub vocab_budget: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub seed: Option<u64>,
    /// Optimiser steps (pretraining only).
    #[arg(long)]
    pub steps: Option<usize>,
    /// Passes over the training data (fine-tuning only).
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
}

#[derive(Debug, Args)]
pub struct LemmaArgs {
    #[command(flatten)]
    pub train: TrainArgs,
    /// Seed of the random scorer stored in the index.
    #[arg(long)]
    pub random_seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct BaselineArgs {
    /// Largest n-gram order.
    #[arg(long)]
    pub max_n: Option<usize>,
    /// Neighbours consulted by kNN.
    #[arg(long)]
    pub k: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Bootstrap seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Bootstrap resamples.
    #[arg(long)]
    pub resamples: Option<usize>,
    /// Largest N of the top-N curve.
    #[arg(long)]
    pub max_n: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub host: Option<String>,
    /// Port to bind; 0 picks a free one.
    #[arg(long)]
    pub port: Option<u16>,
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn apply_train(train: &mut proofrec::encoder::TrainConfig, args: &TrainArgs) {
    set(&mut train.seed, args.seed);
    set(&mut train.steps, args.steps);
    set(&mut train.epochs, args.epochs);
    set(&mut train.lr, args.lr);
    set(&mut train.batch_size, args.batch_size);
}

fn apply_eval(config: &mut Config, args: &EvalArgs) {
    set(&mut config.eval.seed, args.seed);
    set(&mut config.eval.resamples, args.resamples);
    set(&mut config.eval.max_n, args.max_n);
}

impl Cli {
    /// The effective configuration: defaults, then the file, then flags.
    pub fn config(&self) -> Result<Config, CliError> {
        let mut config = Config::load(self.common.config.as_deref())?;
        set(&mut config.workdir, self.common.workdir.clone());
        set(&mut config.data.split_seed, self.common.split_seed);
        match &self.command {
            Command::Synth(a) => {
                let s = &mut config.synth;
                set(&mut s.seed, a.seed);
                set(&mut s.n_steps, a.steps);
                set(&mut s.n_commands, a.commands);
                set(&mut s.n_lemmas, a.lemmas);
                set(&mut s.n_theories, a.theories);
                set(&mut s.lemma_rate, a.lemma_rate);
            }
            Command::TrainTokenizer(a) => set(&mut config.tokenizer.vocab_budget, a.vocab_budget),
            Command::Pretrain(a) => apply_train(&mut config.pretrain, a),
            Command::TrainCommand(a) => apply_train(&mut config.command, a),
            Command::TrainLemma(a) => {
                apply_train(&mut config.lemma, &a.train);
                set(&mut config.eval.seed, a.random_seed);
            }
            Command::FitBaselines(a) => {
                set(&mut config.baselines.max_n, a.max_n);
                set(&mut config.baselines.k, a.k);
            }
            Command::EvalCommand(a) | Command::EvalLemma(a) => apply_eval(&mut config, a),
            Command::Serve(a) => {
                set(&mut config.serve.host, a.host.clone());
                set(&mut config.serve.port, a.port);
            }
        }
        config.validate()?;
        Ok(config)
    }

    pub fn run(&self) -> Result<(), CliError> {
        let config = self.config()?;
        let print = |value: &dyn erased::Summary| println!("{}", value.to_json());
        match &self.command {
            Command::Synth(_) => print(&pipeline::synth(&config)?),
            Command::TrainTokenizer(_) => print(&pipeline::train_tokenizer(&config)?),
            Command::Pretrain(_) => print(&pipeline::pretrain(&config)?),
            Command::TrainCommand(_) => print(&pipeline::train_command(&config)?),
            Command::TrainLemma(_) => print(&pipeline::train_lemma(&config)?),
            Command::FitBaselines(_) => print(&pipeline::fit_baselines(&config)?),
            Command::EvalCommand(_) => {
                let summary = pipeline::eval_command(&config)?;
                print!("{}", proofrec::eval::curve_csv(&summary.curve));
            }
            Command::EvalLemma(_) => print(&pipeline::eval_lemma(&config)?),
            Command::Serve(_) => {
                let service = Service::load(&Workdir::new(&config.workdir))?;
                let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::Service(e.to_string()))?;
                runtime.block_on(service::serve(service, &config.serve.host, config.serve.port))?;
            }
        }
        Ok(())
    }
}

mod erased {
    /// Lets differently typed summaries share one printing closure.
    pub trait Summary {
        fn to_json(&self) -> String;
    }

    impl<T: serde::Serialize> Summary for T {
        fn to_json(&self) -> String {
            serde_json::to_string_pretty(self).expect("summaries serialize")
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("proofrec").chain(args.iter().copied())).unwrap()
    }

    #[test]
    fn flags_override_defaults() {
        let c = parse(&["--workdir", "/tmp/x", "pretrain", "--steps", "7", "--lr", "0.01"])
            .config()
            .unwrap();
        assert_eq!(c.workdir, PathBuf::from("/tmp/x"));
        assert_eq!(c.pretrain.steps, 7);
        assert_eq!(c.pretrain.lr, 0.01);
        assert_eq!(c.command, Config::default().command);
    }

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(&path, "[lemma]\nepochs = 3\nlr = 0.1\n").unwrap();
        let c = parse(&["train-lemma", "--config", path.to_str().unwrap(), "--epochs", "5"])
            .config()
            .unwrap();
        assert_eq!(c.lemma.epochs, 5);
        assert_eq!(c.lemma.lr, 0.1);
    }

    #[test]
    fn global_flags_work_after_the_subcommand() {
        let c = parse(&["synth", "--split-seed", "9", "--seed", "4"]).config().unwrap();
        assert_eq!(c.data.split_seed, 9);
        assert_eq!(c.synth.seed, 4);
    }

    #[test]
    fn invalid_flag_values_fail_validation() {
        assert!(parse(&["synth", "--lemma-rate", "2"]).config().is_err());
        assert!(parse(&["eval-command", "--max-n", "0"]).config().is_err());
    }

    #[test]
    fn unknown_subcommand_is_a_usage_error() {
        let e = Cli::try_parse_from(["proofrec", "train-everything"]).unwrap_err();
        assert_eq!(e.kind(), clap::error::ErrorKind::InvalidSubcommand);
    }
}
