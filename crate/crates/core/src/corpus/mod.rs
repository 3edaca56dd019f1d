//! Proof-trace data model, trace/library file I/O, and reproducible splits.
//!
//! Trace files hold one JSON object per line:
//!
//! ```text
//! {"proof_id":"p1","step":0,
//!  "sequent":{"ant":[],"cons":[{"k":"op","n":"<=","c":[{"k":"var","n":"x","t":"nat"},{"k":"int","v":3}]}],"hid":[]},
//!  "history":["skolem"],"command":"lemma","lemma":"reals.le_trans"}
//! ```
//!
//! Lemma libraries use the same term encoding, one `{"id","theory","statement"}`
//! object per line.

mod synth;

pub use synth::{generate_synthetic, SynthConfig, SyntheticCorpus, LEMMA_COMMAND};

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Map, Value};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("failed to access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: field `{}`: {}", .error.field, .error.message)]
    Parse { line: usize, error: FieldError },
    #[error("duplicate lemma id `{0}`")]
    DuplicateLemma(String),
    #[error("train fraction must lie strictly between 0 and 1, got {0}")]
    BadFraction(f64),
    #[error("cannot split an empty list")]
    EmptySplit,
    #[error("requested {requested} items from a list of {available}")]
    SubsampleTooLarge { requested: usize, available: usize },
    #[error("synthetic corpus needs at least 2 {what}, got {got}")]
    SynthTooSmall { what: &'static str, got: usize },
}

/// A structural problem in a JSON record, located by a dotted field path.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("`{field}`: {message}")]
pub struct FieldError {
    pub field: String,
    pub message: String,
}

impl FieldError {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TermKind {
    Operator,
    Variable,
    Constant,
    Integer,
}

impl TermKind {
    fn wire_name(self) -> &'static str {
        match self {
            TermKind::Operator => "op",
            TermKind::Variable => "var",
            TermKind::Constant => "const",
            TermKind::Integer => "int",
        }
    }

    fn from_wire(s: &str) -> Option<Self> {
        match s {
            "op" => Some(TermKind::Operator),
            "var" => Some(TermKind::Variable),
            "const" => Some(TermKind::Constant),
            "int" => Some(TermKind::Integer),
            _ => None,
        }
    }
}

/// A formula tree. Quantifiers, connectives and function applications are
/// operators; only operators carry children.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Term {
    pub kind: TermKind,
    pub name: String,
    pub type_name: Option<String>,
    /// Set for integer literals only.
    pub value: Option<i64>,
    pub children: Vec<Term>,
}

impl Term {
    pub fn op(name: impl Into<String>, children: Vec<Term>) -> Self {
        Self {
            kind: TermKind::Operator,
            name: name.into(),
            type_name: None,
            value: None,
            children,
        }
    }

    pub fn var(name: impl Into<String>, type_name: Option<&str>) -> Self {
        Self::leaf(TermKind::Variable, name, type_name)
    }

    pub fn constant(name: impl Into<String>, type_name: Option<&str>) -> Self {
        Self::leaf(TermKind::Constant, name, type_name)
    }

    pub fn int(value: i64) -> Self {
        Self {
            kind: TermKind::Integer,
            name: value.to_string(),
            type_name: None,
            value: Some(value),
            children: Vec::new(),
        }
    }

    fn leaf(kind: TermKind, name: impl Into<String>, type_name: Option<&str>) -> Self {
        Self {
            kind,
            name: name.into(),
            type_name: type_name.map(str::to_owned),
            value: None,
            children: Vec::new(),
        }
    }

    /// Number of nodes in the tree.
    pub fn size(&self) -> usize {
        1 + self.children.iter().map(Term::size).sum::<usize>()
    }

    pub fn to_json(&self) -> Value {
        let mut obj = Map::new();
        obj.insert("k".into(), json!(self.kind.wire_name()));
        if self.kind == TermKind::Integer {
            obj.insert("v".into(), json!(self.value.unwrap_or_default()));
        } else {
            obj.insert("n".into(), json!(self.name));
        }
        if let Some(t) = &self.type_name {
            obj.insert("t".into(), json!(t));
        }
        if !self.children.is_empty() {
            obj.insert(
                "c".into(),
                Value::Array(self.children.iter().map(Term::to_json).collect()),
            );
        }
        Value::Object(obj)
    }

    /// Parses the wire encoding; `path` prefixes field names in errors.
    pub fn from_json(value: &Value, path: &str) -> Result<Self, FieldError> {
        let obj = value
            .as_object()
            .ok_or_else(|| FieldError::new(path, "expected a term object"))?;
        let kind_path = format!("{path}.k");
        let kind_str = obj
            .get("k")
            .ok_or_else(|| FieldError::new(&kind_path, "missing"))?
            .as_str()
            .ok_or_else(|| FieldError::new(&kind_path, "expected a string"))?;
        let kind = TermKind::from_wire(kind_str).ok_or_else(|| {
            FieldError::new(&kind_path, format!("unknown term kind `{kind_str}`"))
        })?;

        let type_name = match obj.get("t") {
            None | Some(Value::Null) => None,
            Some(Value::String(s)) => Some(s.clone()),
            Some(_) => return Err(FieldError::new(format!("{path}.t"), "expected a string")),
        };
        let children = match obj.get("c") {
            None | Some(Value::Null) => Vec::new(),
            Some(Value::Array(items)) => items
                .iter()
                .enumerate()
                .map(|(i, c)| Term::from_json(c, &format!("{path}.c[{i}]")))
                .collect::<Result<Vec<_>, _>>()?,
            Some(_) => return Err(FieldError::new(format!("{path}.c"), "expected an array")),
        };
        if kind != TermKind::Operator && !children.is_empty() {
            return Err(FieldError::new(
                format!("{path}.c"),
                "only operator terms may have children",
            ));
        }

        if kind == TermKind::Integer {
            let v = obj
                .get("v")
                .ok_or_else(|| FieldError::new(format!("{path}.v"), "missing"))?
                .as_i64()
                .ok_or_else(|| FieldError::new(format!("{path}.v"), "expected an integer"))?;
            return Ok(Term {
                type_name,
                ..Term::int(v)
            });
        }

        let name_path = format!("{path}.n");
        let name = obj
            .get("n")
            .ok_or_else(|| FieldError::new(&name_path, "missing"))?
            .as_str()
            .ok_or_else(|| FieldError::new(&name_path, "expected a string"))?;
        if name.is_empty() {
            return Err(FieldError::new(&name_path, "must be nonempty"));
        }
        Ok(Term {
            kind,
            name: name.to_owned(),
            type_name,
            value: None,
            children,
        })
    }
}

/// A proof state: assumptions, goals, and formulas hidden from commands.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct SequentState {
    pub antecedents: Vec<Term>,
    pub consequents: Vec<Term>,
    pub hidden: Vec<Term>,
}

impl SequentState {
    pub fn is_empty(&self) -> bool {
        self.antecedents.is_empty() && self.consequents.is_empty() && self.hidden.is_empty()
    }

    pub fn to_json(&self) -> Value {
        let region = |terms: &[Term]| Value::Array(terms.iter().map(Term::to_json).collect());
        json!({
            "ant": region(&self.antecedents),
            "cons": region(&self.consequents),
            "hid": region(&self.hidden),
        })
    }

    /// Missing regions are read as empty; a sequent with all regions empty
    /// is rejected.
    pub fn from_json(value: &Value, path: &str) -> Result<Self, FieldError> {
        let obj = value
            .as_object()
            .ok_or_else(|| FieldError::new(path, "expected a sequent object"))?;
        let region = |key: &str| -> Result<Vec<Term>, FieldError> {
            match obj.get(key) {
                None | Some(Value::Null) => Ok(Vec::new()),
                Some(Value::Array(items)) => items
                    .iter()
                    .enumerate()
                    .map(|(i, t)| Term::from_json(t, &format!("{path}.{key}[{i}]")))
                    .collect(),
                Some(_) => Err(FieldError::new(format!("{path}.{key}"), "expected an array")),
            }
        };
        let sequent = SequentState {
            antecedents: region("ant")?,
            consequents: region("cons")?,
            hidden: region("hid")?,
        };
        if sequent.is_empty() {
            return Err(FieldError::new(path, "sequent has no formulas"));
        }
        Ok(sequent)
    }
}

/// One recorded prover interaction.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ProofStep {
    pub proof_id: String,
    pub step_index: u64,
    pub sequent: SequentState,
    /// Commands issued earlier in the same proof, oldest first.
    pub history: Vec<String>,
    pub command: String,
    /// Present iff the command imports a lemma.
    pub lemma_name: Option<String>,
}

impl ProofStep {
    pub fn to_json(&self) -> Value {
        let mut obj = Map::new();
        obj.insert("proof_id".into(), json!(self.proof_id));
        obj.insert("step".into(), json!(self.step_index));
        obj.insert("sequent".into(), self.sequent.to_json());
        obj.insert("history".into(), json!(self.history));
        obj.insert("command".into(), json!(self.command));
        if let Some(lemma) = &self.lemma_name {
            obj.insert("lemma".into(), json!(lemma));
        }
        Value::Object(obj)
    }

    pub fn from_json(value: &Value) -> Result<Self, FieldError> {
        let obj = value
            .as_object()
            .ok_or_else(|| FieldError::new("<record>", "expected a JSON object"))?;
        let proof_id = required_str(obj, "proof_id")?;
        let step_index = obj
            .get("step")
            .ok_or_else(|| FieldError::new("step", "missing"))?
            .as_u64()
            .ok_or_else(|| FieldError::new("step", "expected a nonnegative integer"))?;
        let sequent = SequentState::from_json(
            obj.get("sequent")
                .ok_or_else(|| FieldError::new("sequent", "missing"))?,
            "sequent",
        )?;
        let history = string_list(obj.get("history"), "history")?;
        let command = required_str(obj, "command")?;
        if command.is_empty() {
            return Err(FieldError::new("command", "must be nonempty"));
        }
        let lemma_name = match obj.get("lemma") {
            None | Some(Value::Null) => None,
            Some(Value::String(s)) => Some(s.clone()),
            Some(_) => return Err(FieldError::new("lemma", "expected a string")),
        };
        Ok(ProofStep {
            proof_id,
            step_index,
            sequent,
            history,
            command,
            lemma_name,
        })
    }
}

/// A named statement in a lemma library.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LemmaRecord {
    pub lemma_id: String,
    pub theory: String,
    pub statement: Term,
}

impl LemmaRecord {
    pub fn to_json(&self) -> Value {
        json!({
            "id": self.lemma_id,
            "theory": self.theory,
            "statement": self.statement.to_json(),
        })
    }

    pub fn from_json(value: &Value) -> Result<Self, FieldError> {
        let obj = value
            .as_object()
            .ok_or_else(|| FieldError::new("<record>", "expected a JSON object"))?;
        let lemma_id = required_str(obj, "id")?;
        if lemma_id.is_empty() {
            return Err(FieldError::new("id", "must be nonempty"));
        }
        Ok(LemmaRecord {
            lemma_id,
            theory: required_str(obj, "theory")?,
            statement: Term::from_json(
                obj.get("statement")
                    .ok_or_else(|| FieldError::new("statement", "missing"))?,
                "statement",
            )?,
        })
    }
}

pub(crate) fn required_str(obj: &Map<String, Value>, key: &str) -> Result<String, FieldError> {
    obj.get(key)
        .ok_or_else(|| FieldError::new(key, "missing"))?
        .as_str()
        .map(str::to_owned)
        .ok_or_else(|| FieldError::new(key, "expected a string"))
}

pub(crate) fn string_list(value: Option<&Value>, field: &str) -> Result<Vec<String>, FieldError> {
    match value {
        None | Some(Value::Null) => Ok(Vec::new()),
        Some(Value::Array(items)) => items
            .iter()
            .enumerate()
            .map(|(i, v)| {
                v.as_str()
                    .map(str::to_owned)
                    .ok_or_else(|| FieldError::new(format!("{field}[{i}]"), "expected a string"))
            })
            .collect(),
        Some(_) => Err(FieldError::new(field, "expected an array of strings")),
    }
}

/// Parses non-blank lines, pairing each record with its 1-based line number.
fn read_records<T>(
    path: &Path,
    parse: impl Fn(&Value) -> Result<T, FieldError>,
) -> Result<Vec<(usize, T)>, CorpusError> {
    let text = fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.to_owned(),
        source,
    })?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let line_no = i + 1;
        let value: Value = serde_json::from_str(line).map_err(|e| CorpusError::Parse {
            line: line_no,
            error: FieldError::new("<record>", format!("invalid JSON: {e}")),
        })?;
        let record = parse(&value).map_err(|error| CorpusError::Parse {
            line: line_no,
            error,
        })?;
        out.push((line_no, record));
    }
    Ok(out)
}

fn write_records(path: &Path, records: impl Iterator<Item = Value>) -> Result<(), CorpusError> {
    let io_err = |source| CorpusError::Io {
        path: path.to_owned(),
        source,
    };
    let mut out = BufWriter::new(fs::File::create(path).map_err(io_err)?);
    for record in records {
        writeln!(out, "{record}").map_err(io_err)?;
    }
    out.flush().map_err(io_err)
}

/// Reads a trace file, preserving record order. Step indices must increase
/// within each proof.
pub fn load_trace(path: impl AsRef<Path>) -> Result<Vec<ProofStep>, CorpusError> {
    let records = read_records(path.as_ref(), ProofStep::from_json)?;
    let mut last_step: HashMap<&str, u64> = HashMap::new();
    for (line, step) in &records {
        if let Some(&prev) = last_step.get(step.proof_id.as_str()) {
            if step.step_index <= prev {
                return Err(CorpusError::Parse {
                    line: *line,
                    error: FieldError::new(
                        "step",
                        format!(
                            "step {} does not follow step {prev} of proof `{}`",
                            step.step_index, step.proof_id
                        ),
                    ),
                });
            }
        }
        last_step.insert(&step.proof_id, step.step_index);
    }
    let steps = records.into_iter().map(|(_, s)| s).collect();
    Ok(steps)
}

pub fn write_trace(path: impl AsRef<Path>, steps: &[ProofStep]) -> Result<(), CorpusError> {
    write_records(path.as_ref(), steps.iter().map(ProofStep::to_json))
}

pub fn load_library(path: impl AsRef<Path>) -> Result<Vec<LemmaRecord>, CorpusError> {
    let lemmas: Vec<LemmaRecord> = read_records(path.as_ref(), LemmaRecord::from_json)?
        .into_iter()
        .map(|(_, l)| l)
        .collect();
    let mut seen = HashSet::new();
    for lemma in &lemmas {
        if !seen.insert(lemma.lemma_id.as_str()) {
            return Err(CorpusError::DuplicateLemma(lemma.lemma_id.clone()));
        }
    }
    Ok(lemmas)
}

pub fn write_library(path: impl AsRef<Path>, lemmas: &[LemmaRecord]) -> Result<(), CorpusError> {
    write_records(path.as_ref(), lemmas.iter().map(LemmaRecord::to_json))
}

/// Groups lemma ids by theory, ids in library order.
pub fn theory_index(lemmas: &[LemmaRecord]) -> BTreeMap<String, Vec<String>> {
    let mut index: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for lemma in lemmas {
        index
            .entry(lemma.theory.clone())
            .or_default()
            .push(lemma.lemma_id.clone());
    }
    index
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
}

/// Number of training records for a split of `n`: `floor(fraction * n)`.
pub fn train_count(n: usize, train_fraction: f64) -> usize {
    ((train_fraction * n as f64) + 1e-9).floor() as usize
}

/// Shuffles record positions under `spec.seed` and cuts the permutation at
/// [`train_count`]. Both halves keep the shuffled order.
pub fn split<T: Clone>(items: &[T], spec: SplitSpec) -> Result<(Vec<T>, Vec<T>), CorpusError> {
    if !(spec.train_fraction > 0.0 && spec.train_fraction < 1.0) {
        return Err(CorpusError::BadFraction(spec.train_fraction));
    }
    if items.is_empty() {
        return Err(CorpusError::EmptySplit);
    }
    let mut order: Vec<usize> = (0..items.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(spec.seed));
    let cut = train_count(items.len(), spec.train_fraction);
    let train = order[..cut].iter().map(|&i| items[i].clone()).collect();
    let test = order[cut..].iter().map(|&i| items[i].clone()).collect();
    Ok((train, test))
}

/// Uniform sample of `n` records without replacement, returned in input order.
pub fn subsample<T: Clone>(items: &[T], n: usize, seed: u64) -> Result<Vec<T>, CorpusError> {
    if n > items.len() {
        return Err(CorpusError::SubsampleTooLarge {
            requested: n,
            available: items.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = rand::seq::index::sample(&mut rng, items.len(), n).into_vec();
    picked.sort_unstable();
    Ok(picked.into_iter().map(|i| items[i].clone()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_step(proof: &str, step: u64, command: &str) -> ProofStep {
        ProofStep {
            proof_id: proof.into(),
            step_index: step,
            sequent: SequentState {
                antecedents: vec![],
                consequents: vec![Term::op(
                    "<=",
                    vec![Term::var("x", Some("nat")), Term::int(3)],
                )],
                hidden: vec![],
            },
            history: vec!["skolem".into()],
            command: command.into(),
            lemma_name: None,
        }
    }

    fn write_lines(lines: &[&str]) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        for l in lines {
            writeln!(f, "{l}").unwrap();
        }
        f
    }

    #[test]
    fn loads_two_records_in_order() {
        let a = sample_step("p", 0, "skolem").to_json().to_string();
        let b = sample_step("p", 1, "grind").to_json().to_string();
        let f = write_lines(&[&a, &b]);
        let steps = load_trace(f.path()).unwrap();
        assert_eq!(steps.len(), 2);
        assert_eq!(steps[0].command, "skolem");
        assert_eq!(steps[1], sample_step("p", 1, "grind"));
    }

    #[test]
    fn empty_file_is_empty_trace() {
        let f = write_lines(&[]);
        assert!(load_trace(f.path()).unwrap().is_empty());
    }

    #[test]
    fn missing_command_names_line_and_field() {
        let good = sample_step("p", 0, "grind").to_json().to_string();
        let mut bad = sample_step("p", 1, "grind").to_json();
        bad.as_object_mut().unwrap().remove("command");
        let f = write_lines(&[&good, &bad.to_string()]);
        match load_trace(f.path()).unwrap_err() {
            CorpusError::Parse { line, error } => {
                assert_eq!(line, 2);
                assert_eq!(error.field, "command");
            }
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn unknown_term_kind_is_rejected() {
        let line = r#"{"proof_id":"p","step":0,"sequent":{"cons":[{"k":"lambda","n":"f"}]},"command":"grind"}"#;
        let f = write_lines(&[line]);
        match load_trace(f.path()).unwrap_err() {
            CorpusError::Parse { error, .. } => {
                assert_eq!(error.field, "sequent.cons[0].k");
                assert!(error.message.contains("lambda"));
            }
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn leaf_with_children_is_rejected() {
        let v: Value = serde_json::from_str(r#"{"k":"var","n":"x","c":[{"k":"int","v":1}]}"#)
            .unwrap();
        assert_eq!(Term::from_json(&v, "t").unwrap_err().field, "t.c");
    }

    #[test]
    fn non_increasing_steps_are_rejected() {
        let a = sample_step("p", 3, "skolem").to_json().to_string();
        let b = sample_step("p", 3, "grind").to_json().to_string();
        let f = write_lines(&[&a, "", &b]);
        match load_trace(f.path()).unwrap_err() {
            CorpusError::Parse { line, error } => {
                assert_eq!(line, 3);
                assert_eq!(error.field, "step");
            }
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn trace_file_round_trips() {
        let mut steps = vec![sample_step("p", 0, "skolem"), sample_step("p", 1, "lemma")];
        steps[1].lemma_name = Some("th.l1".into());
        steps[1].sequent.hidden.push(Term::constant("pi", Some("real")));
        let f = tempfile::NamedTempFile::new().unwrap();
        write_trace(f.path(), &steps).unwrap();
        assert_eq!(load_trace(f.path()).unwrap(), steps);
    }

    #[test]
    fn duplicate_lemma_ids_are_rejected() {
        let l = LemmaRecord {
            lemma_id: "a".into(),
            theory: "t".into(),
            statement: Term::int(1),
        };
        let f = tempfile::NamedTempFile::new().unwrap();
        write_library(f.path(), &[l.clone(), l]).unwrap();
        assert!(matches!(
            load_library(f.path()),
            Err(CorpusError::DuplicateLemma(id)) if id == "a"
        ));
    }

    #[test]
    fn split_counts_match_reported_sizes() {
        let items: Vec<usize> = (0..20_000).collect();
        let (train, test) = split(&items, SplitSpec { train_fraction: 0.9, seed: 1 }).unwrap();
        assert_eq!((train.len(), test.len()), (18_000, 2_000));

        let pairs: Vec<usize> = (0..20_221).collect();
        let (train, test) = split(&pairs, SplitSpec { train_fraction: 0.6, seed: 1 }).unwrap();
        assert_eq!((train.len(), test.len()), (12_132, 8_089));
    }

    #[test]
    fn split_is_deterministic() {
        let items: Vec<usize> = (0..10).collect();
        let spec = SplitSpec { train_fraction: 0.9, seed: 42 };
        assert_eq!(split(&items, spec).unwrap(), split(&items, spec).unwrap());
    }

    #[test]
    fn split_rejects_bad_fraction_and_empty_input() {
        let items = [1, 2, 3];
        for f in [0.0, 1.0, -0.5, 1.5, f64::NAN] {
            assert!(split(&items, SplitSpec { train_fraction: f, seed: 0 }).is_err());
        }
        let empty: [u8; 0] = [];
        assert!(matches!(
            split(&empty, SplitSpec { train_fraction: 0.5, seed: 0 }),
            Err(CorpusError::EmptySplit)
        ));
    }

    #[test]
    fn subsample_edge_cases() {
        let items: Vec<usize> = (0..50).collect();
        assert_eq!(subsample(&items, 50, 3).unwrap(), items);
        assert!(subsample(&items, 0, 3).unwrap().is_empty());
        assert!(subsample(&items, 51, 3).is_err());
    }

    #[test]
    fn subsample_golden_hash() {
        use sha2::{Digest, Sha256};
        let items: Vec<usize> = (0..1000).collect();
        let picked = subsample(&items, 100, 2024).unwrap();
        let text = picked
            .iter()
            .map(usize::to_string)
            .collect::<Vec<_>>()
            .join(",");
        let digest = hex::encode(Sha256::digest(text.as_bytes()));
        assert_eq!(digest, GOLDEN_SUBSAMPLE_DIGEST, "picked: {text}");
    }

    const GOLDEN_SUBSAMPLE_DIGEST: &str =
        "ddb00a9f80aed170a6bc9db6a544876216e76dea1ac687cf8ffed65a4d33ad3d";

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn split_partitions_input(n in 1usize..200, frac in 0.01f64..0.99, seed: u64) {
                let items: Vec<usize> = (0..n).collect();
                let spec = SplitSpec { train_fraction: frac, seed };
                let (train, test) = split(&items, spec).unwrap();
                prop_assert_eq!(train.len(), train_count(n, frac));
                let mut all: Vec<usize> = train.iter().chain(&test).copied().collect();
                all.sort_unstable();
                prop_assert_eq!(all, items.clone());
                prop_assert_eq!(split(&items, spec).unwrap(), (train, test));
            }
        }
    }
}
