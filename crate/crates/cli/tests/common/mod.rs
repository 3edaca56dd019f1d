#![allow(dead_code)]

use std::path::{Path, PathBuf};

use proofrec_cli::config::Config;

/// A configuration small enough to run every stage in a few seconds.
pub const TINY_TOML: &str = r#"
[synth]
n_commands = 4
n_lemmas = 8
n_steps = 120
n_theories = 2
lemma_rate = 0.5
max_distractors = 1
seed = 5

[tokenizer]
vocab_budget = 120

[encoder]
d_model = 8
n_layers = 1
n_heads = 2
ffn_dim = 16
max_len = 96

[pretrain]
steps = 30

[command]
epochs = 2
batch_size = 8

[lemma]
epochs = 2
batch_size = 8

[baselines]
max_n = 2

[eval]
max_n = 4
resamples = 100
"#;

pub fn tiny_config(workdir: &Path) -> Config {
    let mut config = Config::from_toml(TINY_TOML).unwrap();
    config.workdir = workdir.to_owned();
    config
}

pub fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/service")
}

/// Files of the pinned service fixture.
pub const ARTIFACTS: [&str; 3] = ["command_model.json", "lemma_model.json", "lemma_index.json"];
pub const TOKENIZER_FILES: [&str; 2] = ["merges.txt", "vocab.txt"];
