//! Byte-pair encoding over featurized tokens.
//!
//! Each featurized token is one word; its characters are the base symbols and
//! the final character carries an end-of-word suffix so that id sequences
//! decode back to word boundaries. Merges never cross words and never touch
//! reserved tokens, which map to fixed ids.

use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::featurizer::{special, TokenStream};
use crate::fingerprint;

pub type TokenId = u32;

pub const PAD: &str = "<PAD>";
pub const UNK: &str = "<UNK>";
pub const MASK: &str = "<MASK>";

/// Reserved tokens in id order.
pub const SPECIAL_TOKENS: [&str; 11] = [
    PAD,
    UNK,
    MASK,
    special::CMD1,
    special::ANT,
    special::CONS,
    special::HID,
    special::SEP,
    special::NOCMD,
    special::TRM,
    special::TYP,
];

pub const PAD_ID: TokenId = 0;
pub const UNK_ID: TokenId = 1;
pub const MASK_ID: TokenId = 2;
pub const CMD1_ID: TokenId = 3;

const END_OF_WORD: &str = "</w>";
const MERGES_HEADER: &str = "#bpe-merges v1";
const VOCAB_HEADER: &str = "#bpe-vocab v1";
pub const MERGES_FILE: &str = "merges.txt";
pub const VOCAB_FILE: &str = "vocab.txt";

#[derive(Debug, Error)]
pub enum TokenizerError {
    #[error("training corpus is empty")]
    EmptyCorpus,
    #[error("vocabulary budget {budget} must exceed {required} (base alphabet plus reserved tokens)")]
    BudgetTooSmall { budget: usize, required: usize },
    #[error("unknown token id {0}")]
    UnknownId(TokenId),
    #[error("malformed {file} line {line}: {message}")]
    Format {
        file: &'static str,
        line: usize,
        message: String,
    },
    #[error("failed to access {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub fn is_special(token: &str) -> bool {
    SPECIAL_TOKENS.contains(&token)
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct MergeTable {
    merges: Vec<(String, String)>,
    // left -> right -> rank
    ranks: HashMap<String, HashMap<String, usize>>,
}

impl MergeTable {
    fn push(&mut self, pair: (String, String)) {
        self.ranks
            .entry(pair.0.clone())
            .or_default()
            .insert(pair.1.clone(), self.merges.len());
        self.merges.push(pair);
    }

    pub fn len(&self) -> usize {
        self.merges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.merges.is_empty()
    }

    pub fn pairs(&self) -> &[(String, String)] {
        &self.merges
    }

    fn rank(&self, left: &str, right: &str) -> Option<usize> {
        self.ranks.get(left)?.get(right).copied()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    id_to_token: Vec<String>,
    token_to_id: HashMap<String, TokenId>,
}

impl Vocab {
    fn with_specials() -> Self {
        let mut vocab = Vocab {
            id_to_token: Vec::new(),
            token_to_id: HashMap::new(),
        };
        for tok in SPECIAL_TOKENS {
            vocab.insert(tok);
        }
        vocab
    }

    fn insert(&mut self, token: &str) -> TokenId {
        if let Some(&id) = self.token_to_id.get(token) {
            return id;
        }
        let id = self.id_to_token.len() as TokenId;
        self.id_to_token.push(token.to_owned());
        self.token_to_id.insert(token.to_owned(), id);
        id
    }

    pub fn len(&self) -> usize {
        self.id_to_token.len()
    }

    pub fn is_empty(&self) -> bool {
        self.id_to_token.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<TokenId> {
        self.token_to_id.get(token).copied()
    }

    pub fn token(&self, id: TokenId) -> Option<&str> {
        self.id_to_token.get(id as usize).map(String::as_str)
    }
}

/// Trained merge table and vocabulary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tokenizer {
    merges: MergeTable,
    vocab: Vocab,
}

fn word_symbols(word: &str) -> Vec<String> {
    let chars: Vec<char> = word.chars().collect();
    chars
        .iter()
        .enumerate()
        .map(|(i, c)| {
            if i + 1 == chars.len() {
                format!("{c}{END_OF_WORD}")
            } else {
                c.to_string()
            }
        })
        .collect()
}

fn merge_pair(symbols: &mut Vec<String>, left: &str, right: &str) {
    let mut i = 0;
    while i + 1 < symbols.len() {
        if symbols[i] == left && symbols[i + 1] == right {
            let merged = format!("{left}{right}");
            symbols[i] = merged;
            symbols.remove(i + 1);
        }
        i += 1;
    }
}

/// Learns merges until the vocabulary holds `vocab_budget` entries or no
/// adjacent pair occurs at least twice. Equal-frequency pairs are broken by
/// lexicographic order of `(left, right)`.
pub fn train_bpe(corpus: &[TokenStream], vocab_budget: usize) -> Result<Tokenizer, TokenizerError> {
    if corpus.is_empty() {
        return Err(TokenizerError::EmptyCorpus);
    }
    let mut word_counts: HashMap<&str, usize> = HashMap::new();
    for stream in corpus {
        for tok in stream.tokens() {
            if !is_special(tok) && !tok.is_empty() {
                *word_counts.entry(tok.as_str()).or_default() += 1;
            }
        }
    }

    let alphabet: BTreeSet<char> = word_counts.keys().flat_map(|w| w.chars()).collect();
    let required = SPECIAL_TOKENS.len() + 2 * alphabet.len();
    if vocab_budget <= required {
        return Err(TokenizerError::BudgetTooSmall {
            budget: vocab_budget,
            required,
        });
    }

    let mut vocab = Vocab::with_specials();
    for c in &alphabet {
        vocab.insert(&c.to_string());
        vocab.insert(&format!("{c}{END_OF_WORD}"));
    }

    let mut words: Vec<(Vec<String>, usize)> = word_counts
        .into_iter()
        .map(|(w, n)| (word_symbols(w), n))
        .collect();
    words.sort();

    let mut merges = MergeTable::default();
    while vocab.len() < vocab_budget {
        let mut pair_counts: HashMap<(&str, &str), usize> = HashMap::new();
        for (symbols, count) in &words {
            for w in symbols.windows(2) {
                *pair_counts.entry((&w[0], &w[1])).or_default() += count;
            }
        }
        let best = pair_counts
            .into_iter()
            .max_by(|(pa, ca), (pb, cb)| ca.cmp(cb).then_with(|| pb.cmp(pa)));
        let Some(((left, right), count)) = best else {
            break;
        };
        if count < 2 {
            break;
        }
        let (left, right) = (left.to_owned(), right.to_owned());
        for (symbols, _) in &mut words {
            merge_pair(symbols, &left, &right);
        }
        vocab.insert(&format!("{left}{right}"));
        merges.push((left, right));
    }

    Ok(Tokenizer { merges, vocab })
}

impl Tokenizer {
    pub fn merges(&self) -> &MergeTable {
        &self.merges
    }

    pub fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    fn encode_word(&self, word: &str, out: &mut Vec<TokenId>) {
        if word.is_empty() {
            out.push(UNK_ID);
            return;
        }
        let mut symbols = word_symbols(word);
        loop {
            let best = symbols
                .windows(2)
                .filter_map(|w| self.merges.rank(&w[0], &w[1]))
                .min();
            let Some(rank) = best else { break };
            let (left, right) = &self.merges.merges[rank];
            merge_pair(&mut symbols, left, right);
        }
        out.extend(
            symbols
                .iter()
                .map(|s| self.vocab.id(s).unwrap_or(UNK_ID)),
        );
    }

    pub fn encode(&self, stream: &TokenStream) -> Vec<TokenId> {
        let mut out = Vec::with_capacity(stream.len());
        for tok in stream.tokens() {
            if let Some(id) = is_special(tok).then(|| self.vocab.id(tok)).flatten() {
                out.push(id);
            } else {
                self.encode_word(tok, &mut out);
            }
        }
        out
    }

    pub fn decode(&self, ids: &[TokenId]) -> Result<TokenStream, TokenizerError> {
        let mut out = TokenStream::new();
        let mut pending = String::new();
        for &id in ids {
            let sym = self.vocab.token(id).ok_or(TokenizerError::UnknownId(id))?;
            if is_special(sym) {
                if !pending.is_empty() {
                    out.push(std::mem::take(&mut pending));
                }
                out.push(sym);
            } else if let Some(stem) = sym.strip_suffix(END_OF_WORD) {
                pending.push_str(stem);
                out.push(std::mem::take(&mut pending));
            } else {
                pending.push_str(sym);
            }
        }
        if !pending.is_empty() {
            out.push(pending);
        }
        Ok(out)
    }

    /// Persisted text of the merge table.
    pub fn merges_text(&self) -> String {
        let mut s = String::from(MERGES_HEADER);
        s.push('\n');
        for (l, r) in self.merges.pairs() {
            s.push_str(&escape(l));
            s.push('\t');
            s.push_str(&escape(r));
            s.push('\n');
        }
        s
    }

    /// Persisted text of the vocabulary, one `token<TAB>id` line per entry.
    pub fn vocab_text(&self) -> String {
        let mut s = String::from(VOCAB_HEADER);
        s.push('\n');
        for (id, tok) in self.vocab.id_to_token.iter().enumerate() {
            s.push_str(&format!("{}\t{id}\n", escape(tok)));
        }
        s
    }

    /// Stable identity of the merges and vocabulary.
    pub fn fingerprint(&self) -> String {
        fingerprint(format!("{}\0{}", self.merges_text(), self.vocab_text()).as_bytes())
    }

    pub fn from_texts(merges_text: &str, vocab_text: &str) -> Result<Self, TokenizerError> {
        let mut vocab = Vocab {
            id_to_token: Vec::new(),
            token_to_id: HashMap::new(),
        };
        let mut lines = vocab_text.lines().enumerate();
        check_header(lines.next(), VOCAB_HEADER, VOCAB_FILE)?;
        for (i, line) in lines {
            let fmt = |message: String| TokenizerError::Format {
                file: VOCAB_FILE,
                line: i + 1,
                message,
            };
            let (tok, id) = line
                .rsplit_once('\t')
                .ok_or_else(|| fmt("expected `token<TAB>id`".into()))?;
            let id: usize = id.parse().map_err(|_| fmt(format!("bad id `{id}`")))?;
            if id != vocab.len() {
                return Err(fmt(format!("expected id {}, found {id}", vocab.len())));
            }
            let tok = unescape(tok);
            if vocab.token_to_id.contains_key(&tok) {
                return Err(fmt(format!("duplicate token `{tok}`")));
            }
            vocab.insert(&tok);
        }
        for (id, tok) in SPECIAL_TOKENS.iter().enumerate() {
            if vocab.token(id as TokenId) != Some(tok) {
                return Err(TokenizerError::Format {
                    file: VOCAB_FILE,
                    line: id + 2,
                    message: format!("reserved token `{tok}` must have id {id}"),
                });
            }
        }

        let mut merges = MergeTable::default();
        let mut lines = merges_text.lines().enumerate();
        check_header(lines.next(), MERGES_HEADER, MERGES_FILE)?;
        for (i, line) in lines {
            let fmt = |message: String| TokenizerError::Format {
                file: MERGES_FILE,
                line: i + 1,
                message,
            };
            let (l, r) = line
                .split_once('\t')
                .ok_or_else(|| fmt("expected `left<TAB>right`".into()))?;
            let pair = (unescape(l), unescape(r));
            if merges.rank(&pair.0, &pair.1).is_some() {
                return Err(fmt("duplicate merge".into()));
            }
            if vocab.id(&format!("{}{}", pair.0, pair.1)).is_none() {
                return Err(fmt("merge result missing from vocabulary".into()));
            }
            merges.push(pair);
        }
        Ok(Tokenizer { merges, vocab })
    }

    pub fn save(&self, dir: impl AsRef<Path>) -> Result<(), TokenizerError> {
        let dir = dir.as_ref();
        write(&dir.join(MERGES_FILE), &self.merges_text())?;
        write(&dir.join(VOCAB_FILE), &self.vocab_text())
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self, TokenizerError> {
        let dir = dir.as_ref();
        Self::from_texts(&read(&dir.join(MERGES_FILE))?, &read(&dir.join(VOCAB_FILE))?)
    }
}

fn check_header(
    line: Option<(usize, &str)>,
    header: &str,
    file: &'static str,
) -> Result<(), TokenizerError> {
    match line {
        Some((_, l)) if l == header => Ok(()),
        _ => Err(TokenizerError::Format {
            file,
            line: 1,
            message: format!("expected header `{header}`"),
        }),
    }
}

fn write(path: &Path, text: &str) -> Result<(), TokenizerError> {
    fs::write(path, text).map_err(|source| TokenizerError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn read(path: &Path) -> Result<String, TokenizerError> {
    fs::read_to_string(path).map_err(|source| TokenizerError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out
}

fn unescape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('t') => out.push('\t'),
            Some('n') => out.push('\n'),
            Some('r') => out.push('\r'),
            Some(other) => out.push(other),
            None => out.push('\\'),
        }
    }
    out
}
