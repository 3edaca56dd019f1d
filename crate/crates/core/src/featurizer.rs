//! Flattens sequents, command histories and lemma statements into token
//! streams.
//!
//! Operator symbols are copied verbatim in depth-first pre-order and integer
//! literals keep their decimal value. Variables and constants are abstracted:
//! to `<TRM>` in [`FeaturizeMode::Placeholder`], or to their type name in
//! [`FeaturizeMode::Typed`]. No bracketing tokens are emitted, so a term of
//! `n` nodes yields exactly `n` tokens.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{LemmaRecord, SequentState, Term, TermKind};

/// Normative spellings of the reserved tokens.
pub mod special {
    pub const CMD1: &str = "CMD1";
    pub const ANT: &str = "<ANT>";
    pub const CONS: &str = "<CONS>";
    pub const HID: &str = "<HID>";
    pub const SEP: &str = "<SEP>";
    pub const NOCMD: &str = "<NOCMD>";
    pub const TRM: &str = "<TRM>";
    pub const TYP: &str = "<TYP>";
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct TokenStream(pub Vec<String>);

impl TokenStream {
    pub fn new() -> Self {
        Self::default()
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

    pub fn push(&mut self, token: impl Into<String>) {
        self.0.push(token.into());
    }
}

impl<S: Into<String>> FromIterator<S> for TokenStream {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        TokenStream(iter.into_iter().map(Into::into).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeaturizeMode {
    Placeholder,
    Typed,
}

#[derive(Debug, Error, PartialEq)]
pub enum FeaturizerError {
    #[error("max_tokens must be at least 16, got {0}")]
    MaxTokensTooSmall(usize),
}

/// Types spelled out in typed mode; anything else (custom or function types)
/// becomes `<TYP>`.
pub const DEFAULT_BASE_TYPES: &[&str] = &[
    "bool", "nat", "int", "integer", "rat", "rational", "real", "number", "posnat", "posint",
    "posrat", "posreal", "nnint", "nnrat", "nnreal", "nzint", "nzrat", "nzreal", "upto", "below",
    "char", "string",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeaturizerConfig {
    pub mode: FeaturizeMode,
    pub history_len: usize,
    pub max_tokens: usize,
    pub base_types: BTreeSet<String>,
}

impl FeaturizerConfig {
    pub fn new(mode: FeaturizeMode) -> Self {
        Self {
            mode,
            history_len: 3,
            max_tokens: 256,
            base_types: DEFAULT_BASE_TYPES.iter().map(|s| s.to_string()).collect(),
        }
    }

    /// Defaults for command prediction.
    pub fn command() -> Self {
        Self::new(FeaturizeMode::Placeholder)
    }

    /// Defaults for lemma retrieval.
    pub fn lemma() -> Self {
        Self::new(FeaturizeMode::Typed)
    }

    pub fn validate(&self) -> Result<(), FeaturizerError> {
        if self.max_tokens < 16 {
            return Err(FeaturizerError::MaxTokensTooSmall(self.max_tokens));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Featurizer {
    config: FeaturizerConfig,
}

impl Featurizer {
    pub fn new(config: FeaturizerConfig) -> Result<Self, FeaturizerError> {
        config.validate()?;
        Ok(Self { config })
    }

    pub fn config(&self) -> &FeaturizerConfig {
        &self.config
    }

    fn leaf_token(&self, term: &Term) -> String {
        match self.config.mode {
            FeaturizeMode::Placeholder => special::TRM.to_owned(),
            FeaturizeMode::Typed => match &term.type_name {
                Some(ty) if self.config.base_types.contains(ty) => ty.clone(),
                _ => special::TYP.to_owned(),
            },
        }
    }

    fn push_term(&self, term: &Term, out: &mut TokenStream) {
        match term.kind {
            TermKind::Operator => out.push(term.name.clone()),
            TermKind::Integer => out.push(
                term.value
                    .map(|v| v.to_string())
                    .unwrap_or_else(|| term.name.clone()),
            ),
            TermKind::Variable | TermKind::Constant => out.push(self.leaf_token(term)),
        }
        for child in &term.children {
            self.push_term(child, out);
        }
    }

    pub fn featurize_term(&self, term: &Term) -> TokenStream {
        let mut out = TokenStream::new();
        self.push_term(term, &mut out);
        out
    }

    /// `<ANT> a1 <SEP> a2 .. <CONS> c1 .. <HID> h1 ..`; every marker is
    /// present even for an empty region.
    pub fn featurize_sequent(&self, sequent: &SequentState) -> TokenStream {
        let mut out = TokenStream::new();
        for (marker, region) in [
            (special::ANT, &sequent.antecedents),
            (special::CONS, &sequent.consequents),
            (special::HID, &sequent.hidden),
        ] {
            out.push(marker);
            for (i, formula) in region.iter().enumerate() {
                if i > 0 {
                    out.push(special::SEP);
                }
                self.push_term(formula, &mut out);
            }
        }
        out
    }

    /// `CMD1`, the last `history_len` commands (front-padded with `<NOCMD>`),
    /// then the sequent; cut to `max_tokens` from the end.
    pub fn featurize_for_command(&self, sequent: &SequentState, history: &[String]) -> TokenStream {
        let n = self.config.history_len;
        let mut out = TokenStream::new();
        out.push(special::CMD1);
        let recent = &history[history.len().saturating_sub(n)..];
        for _ in recent.len()..n {
            out.push(special::NOCMD);
        }
        for cmd in recent {
            out.push(cmd.clone());
        }
        out.0.extend(self.featurize_sequent(sequent).0);
        out.0.truncate(self.config.max_tokens);
        out
    }

    /// Statement tokens only; always typed, regardless of the configured mode.
    pub fn featurize_lemma(&self, lemma: &LemmaRecord) -> TokenStream {
        let typed = Featurizer {
            config: FeaturizerConfig {
                mode: FeaturizeMode::Typed,
                ..self.config.clone()
            },
        };
        let mut out = typed.featurize_term(&lemma.statement);
        out.0.truncate(self.config.max_tokens);
        out
    }

    /// Sequent tokens for lemma retrieval queries: no task prefix, no
    /// history, cut to `max_tokens`.
    pub fn featurize_query(&self, sequent: &SequentState) -> TokenStream {
        let mut out = self.featurize_sequent(sequent);
        out.0.truncate(self.config.max_tokens);
        out
    }
}
