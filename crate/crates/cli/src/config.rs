//! Pipeline configuration. Values come from built-in defaults, overridden by
//! an optional TOML file, overridden in turn by command-line flags.

use std::path::{Path, PathBuf};

use proofrec::baselines::LinearConfig;
use proofrec::corpus::SynthConfig;
use proofrec::encoder::{EncoderConfig, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Config {
    /// Directory holding every artifact and results file.
    pub workdir: PathBuf,
    pub data: DataSection,
    pub synth: SynthSection,
    pub tokenizer: TokenizerSection,
    pub encoder: EncoderConfig,
    pub pretrain: TrainConfig,
    pub command: TrainConfig,
    pub lemma: TrainConfig,
    pub baselines: BaselineSection,
    pub eval: EvalSection,
    pub serve: ServeSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataSection {
    /// Trace file; relative paths are resolved against the workdir.
    pub trace: PathBuf,
    /// Lemma library file; relative paths are resolved against the workdir.
    pub library: PathBuf,
    pub train_fraction: f64,
    /// Share of the training portion held out for checkpoint selection.
    pub valid_fraction: f64,
    pub split_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSection {
    pub n_commands: usize,
    pub n_lemmas: usize,
    pub n_steps: usize,
    pub n_theories: usize,
    pub lemma_rate: f64,
    pub max_distractors: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenizerSection {
    pub vocab_budget: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineSection {
    /// Largest n-gram order of the TF-IDF features.
    pub max_n: usize,
    /// Neighbours consulted by the kNN classifier.
    pub k: usize,
    pub linear: LinearConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSection {
    /// Top-N accuracy is reported for N = 1..=max_n.
    pub max_n: usize,
    pub resamples: usize,
    pub seed: u64,
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServeSection {
    pub host: String,
    pub port: u16,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            workdir: PathBuf::from("work"),
            data: DataSection {
                trace: PathBuf::from("trace.jsonl"),
                library: PathBuf::from("library.jsonl"),
                train_fraction: 0.9,
                valid_fraction: 0.1,
                split_seed: 1,
            },
            synth: SynthSection::from(&SynthConfig::default()),
            tokenizer: TokenizerSection { vocab_budget: 1000 },
            encoder: EncoderConfig::default(),
            pretrain: TrainConfig::default(),
            command: TrainConfig {
                epochs: 10,
                batch_size: 16,
                ..TrainConfig::default()
            },
            lemma: TrainConfig {
                epochs: 20,
                batch_size: 4,
                lr: 5e-4,
                ..TrainConfig::default()
            },
            baselines: BaselineSection {
                max_n: 1,
                k: 5,
                linear: LinearConfig::default(),
            },
            eval: EvalSection {
                max_n: 10,
                resamples: 1000,
                seed: 0,
                alpha: 0.001,
            },
            serve: ServeSection {
                host: "127.0.0.1".into(),
                port: 8080,
            },
        }
    }
}

impl From<&SynthConfig> for SynthSection {
    fn from(c: &SynthConfig) -> Self {
        Self {
            n_commands: c.n_commands,
            n_lemmas: c.n_lemmas,
            n_steps: c.n_steps,
            n_theories: c.n_theories,
            lemma_rate: c.lemma_rate,
            max_distractors: c.max_distractors,
            seed: c.seed,
        }
    }
}

impl From<&SynthSection> for SynthConfig {
    fn from(s: &SynthSection) -> Self {
        Self {
            n_commands: s.n_commands,
            n_lemmas: s.n_lemmas,
            n_steps: s.n_steps,
            n_theories: s.n_theories,
            lemma_rate: s.lemma_rate,
            max_distractors: s.max_distractors,
            seed: s.seed,
        }
    }
}

/// Overlays `over` onto `base` table by table. Keys absent from `base` are
/// rejected so typos surface instead of being ignored.
fn merge(base: &mut toml::Value, over: toml::Value, path: &str) -> Result<(), CliError> {
    match (base, over) {
        (toml::Value::Table(base), toml::Value::Table(over)) => {
            for (key, value) in over {
                let field = if path.is_empty() {
                    key.clone()
                } else {
                    format!("{path}.{key}")
                };
                match base.get_mut(&key) {
                    Some(slot) => merge(slot, value, &field)?,
                    None => return Err(CliError::Config(format!("unknown key `{field}`"))),
                }
            }
            Ok(())
        }
        (base @ toml::Value::Table(_), _) => Err(CliError::Config(format!(
            "`{path}` must be a table, not a {}",
            base.type_str()
        ))),
        (slot, value) => {
            *slot = value;
            Ok(())
        }
    }
}

impl Config {
    /// Defaults overlaid with the TOML text, then validated.
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let over: toml::Value = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        let mut base = toml::Value::try_from(Config::default()).map_err(|e| CliError::Config(e.to_string()))?;
        merge(&mut base, over, "")?;
        let config: Config = base.try_into().map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// Defaults, or defaults overlaid with the file at `path`.
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        match path {
            None => Ok(Config::default()),
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
                Self::from_toml(&text).map_err(|e| match e {
                    CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
                    other => other,
                })
            }
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        let d = &self.data;
        if !(d.train_fraction > 0.0 && d.train_fraction < 1.0) {
            return bad(format!("data.train_fraction must lie in (0, 1), got {}", d.train_fraction));
        }
        if !(d.valid_fraction >= 0.0 && d.valid_fraction < 1.0) {
            return bad(format!("data.valid_fraction must lie in [0, 1), got {}", d.valid_fraction));
        }
        if !(0.0..=1.0).contains(&self.synth.lemma_rate) {
            return bad(format!("synth.lemma_rate must lie in [0, 1], got {}", self.synth.lemma_rate));
        }
        if self.tokenizer.vocab_budget == 0 {
            return bad("tokenizer.vocab_budget must be positive".into());
        }
        if self.baselines.max_n == 0 || self.baselines.k == 0 {
            return bad("baselines.max_n and baselines.k must be positive".into());
        }
        if self.eval.max_n == 0 {
            return bad("eval.max_n must be positive".into());
        }
        if !(self.eval.alpha > 0.0 && self.eval.alpha < 1.0) {
            return bad(format!("eval.alpha must lie in (0, 1), got {}", self.eval.alpha));
        }
        self.encoder
            .validate()
            .map_err(|e| CliError::Config(format!("encoder: {e}")))?;
        for (name, train) in [("pretrain", &self.pretrain), ("command", &self.command), ("lemma", &self.lemma)] {
            train
                .validate()
                .map_err(|e| CliError::Config(format!("{name}: {e}")))?;
        }
        Ok(())
    }

    pub fn trace_path(&self) -> PathBuf {
        self.workdir.join(&self.data.trace)
    }

    pub fn library_path(&self) -> PathBuf {
        self.workdir.join(&self.data.library)
    }
}
