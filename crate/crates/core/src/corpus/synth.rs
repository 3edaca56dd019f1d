//! Synthetic proof corpora with planted, exactly recoverable structure.
//!
//! Every generated sequent carries planted formulas:
//!
//! * a command signature `sig{k}(tag{k}(..))`, where `k` is the index of the
//!   command taken at that step, echoed by a `pre{k}(..)` antecedent, and
//! * a lemma anchor `lp{j}(..)`, where `j` indexes the one library lemma whose
//!   statement also contains `lp{j}`.
//!
//! Everything else (extra formulas, subterms, variable names, history) is
//! drawn from a shared distractor vocabulary that carries no label
//! information. [`SyntheticCorpus::rule_command`] and
//! [`SyntheticCorpus::rule_lemma`] invert the planting and are exact.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{CorpusError, LemmaRecord, ProofStep, SequentState, Term, TermKind};

/// The lemma-import command; steps taking it carry a lemma name.
pub const LEMMA_COMMAND: &str = "lemma";

const COMMAND_NAMES: &[&str] = &[
    LEMMA_COMMAND,
    "grind",
    "assert",
    "expand",
    "skolem",
    "inst",
    "flatten",
    "split",
    "prop",
    "case",
    "replace",
    "induct",
    "rewrite",
    "hide",
    "simplify",
    "beta",
    "use",
    "ground",
    "typepred",
    "lift-if",
];

const BINARY_OPS: &[&str] = &["+", "-", "*", "/", "<=", "<", "=", "AND", "OR", "IMPLIES", "max"];
const UNARY_OPS: &[&str] = &["NOT", "abs", "sq"];
const VAR_NAMES: &[&str] = &["x", "y", "z", "n", "m", "i", "j", "eps", "high", "low"];
const VAR_TYPES: &[&str] = &["nat", "int", "real", "posnat", "bool", "vect"];
const CONSTANTS: &[(&str, &str)] = &[("pi", "real"), ("zero", "real"), ("e", "real")];

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    /// Number of distinct commands (K).
    pub n_commands: usize,
    /// Number of library lemmas (L).
    pub n_lemmas: usize,
    /// Number of proof steps (N).
    pub n_steps: usize,
    pub n_theories: usize,
    /// Probability that a step takes [`LEMMA_COMMAND`]; the remaining mass is
    /// uniform over the other commands.
    pub lemma_rate: f64,
    /// Upper bound on unplanted formulas per sequent.
    pub max_distractors: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_commands: 10,
            n_lemmas: 200,
            n_steps: 2_000,
            n_theories: 8,
            lemma_rate: 0.5,
            max_distractors: 2,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub steps: Vec<ProofStep>,
    pub library: Vec<LemmaRecord>,
    /// Command names, index `k` planted as `sig{k}`.
    pub commands: Vec<String>,
}

fn command_name(k: usize) -> String {
    COMMAND_NAMES
        .get(k)
        .map(|s| s.to_string())
        .unwrap_or_else(|| format!("cmd{k}"))
}

fn lemma_id(j: usize, n_theories: usize) -> (String, String) {
    let theory = format!("th{}", j % n_theories.max(1));
    (format!("{theory}.lem{j}"), theory)
}

fn parse_index(name: &str, prefix: &str) -> Option<usize> {
    let digits = name.strip_prefix(prefix)?;
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    digits.parse().ok()
}

fn collect_operator_indices(term: &Term, prefix: &str, out: &mut Vec<usize>) {
    if term.kind == TermKind::Operator {
        if let Some(i) = parse_index(&term.name, prefix) {
            out.push(i);
        }
    }
    for child in &term.children {
        collect_operator_indices(child, prefix, out);
    }
}

fn sequent_indices(sequent: &SequentState, prefix: &str) -> Vec<usize> {
    let mut out = Vec::new();
    for term in sequent
        .antecedents
        .iter()
        .chain(&sequent.consequents)
        .chain(&sequent.hidden)
    {
        collect_operator_indices(term, prefix, &mut out);
    }
    out
}

struct Gen {
    rng: ChaCha8Rng,
}

impl Gen {
    fn leaf(&mut self) -> Term {
        match self.rng.gen_range(0..10) {
            0..=5 => {
                let name = *VAR_NAMES.choose(&mut self.rng).unwrap();
                let ty = *VAR_TYPES.choose(&mut self.rng).unwrap();
                Term::var(name, Some(ty))
            }
            6 => {
                let (name, ty) = *CONSTANTS.choose(&mut self.rng).unwrap();
                Term::constant(name, Some(ty))
            }
            _ => Term::int(self.rng.gen_range(0..10)),
        }
    }

    fn term(&mut self, depth: usize) -> Term {
        if depth == 0 || self.rng.gen_bool(0.35) {
            return self.leaf();
        }
        if self.rng.gen_bool(0.2) {
            let op = *UNARY_OPS.choose(&mut self.rng).unwrap();
            Term::op(op, vec![self.term(depth - 1)])
        } else {
            let op = *BINARY_OPS.choose(&mut self.rng).unwrap();
            Term::op(op, vec![self.term(depth - 1), self.term(depth - 1)])
        }
    }

    fn formula(&mut self) -> Term {
        let body = self.term(2);
        if self.rng.gen_bool(0.25) {
            let name = *VAR_NAMES.choose(&mut self.rng).unwrap();
            let ty = *VAR_TYPES.choose(&mut self.rng).unwrap();
            Term::op("FORALL", vec![Term::var(name, Some(ty)), body])
        } else {
            body
        }
    }

    fn distractors(&mut self, max: usize) -> Vec<Term> {
        let n = self.rng.gen_range(0..=max);
        (0..n).map(|_| self.formula()).collect()
    }
}

/// Generates a corpus whose labels are fully determined by planted patterns.
pub fn generate_synthetic(config: &SynthConfig) -> Result<SyntheticCorpus, CorpusError> {
    if config.n_commands < 2 {
        return Err(CorpusError::SynthTooSmall {
            what: "commands",
            got: config.n_commands,
        });
    }
    if config.n_lemmas < 2 {
        return Err(CorpusError::SynthTooSmall {
            what: "lemmas",
            got: config.n_lemmas,
        });
    }
    let mut gen = Gen {
        rng: ChaCha8Rng::seed_from_u64(config.seed),
    };
    let commands: Vec<String> = (0..config.n_commands).map(command_name).collect();

    let library: Vec<LemmaRecord> = (0..config.n_lemmas)
        .map(|j| {
            let (lemma_id, theory) = lemma_id(j, config.n_theories);
            let anchor = Term::op(format!("lp{j}"), vec![gen.leaf(), gen.leaf()]);
            let side = gen.formula();
            let var = Term::var(
                *VAR_NAMES.choose(&mut gen.rng).unwrap(),
                Some(VAR_TYPES.choose(&mut gen.rng).unwrap()),
            );
            LemmaRecord {
                lemma_id,
                theory,
                statement: Term::op(
                    "FORALL",
                    vec![var, Term::op("IMPLIES", vec![anchor, side])],
                ),
            }
        })
        .collect();

    let mut steps = Vec::with_capacity(config.n_steps);
    let mut proof = 0usize;
    let mut history: Vec<String> = Vec::new();
    let mut remaining_in_proof = 0usize;
    for _ in 0..config.n_steps {
        if remaining_in_proof == 0 {
            proof += 1;
            history.clear();
            remaining_in_proof = gen.rng.gen_range(1..=8);
        }
        remaining_in_proof -= 1;

        let k = if gen.rng.gen_bool(config.lemma_rate.clamp(0.0, 1.0)) {
            0
        } else {
            gen.rng.gen_range(1..config.n_commands)
        };
        let j = gen.rng.gen_range(0..config.n_lemmas);

        let signature = Term::op(
            format!("sig{k}"),
            vec![Term::op(format!("tag{k}"), vec![gen.term(1)])],
        );
        let anchor = Term::op(format!("lp{j}"), vec![gen.leaf(), gen.leaf()]);
        let mut consequents = vec![signature, anchor];
        consequents.extend(gen.distractors(config.max_distractors.min(1)));
        consequents.shuffle(&mut gen.rng);

        let hidden = if gen.rng.gen_bool(0.3) {
            vec![gen.formula()]
        } else {
            Vec::new()
        };
        let mut antecedents = gen.distractors(config.max_distractors);
        antecedents.push(Term::op(format!("pre{k}"), vec![gen.leaf()]));
        antecedents.shuffle(&mut gen.rng);
        let sequent = SequentState {
            antecedents,
            consequents,
            hidden,
        };
        let command = commands[k].clone();
        steps.push(ProofStep {
            proof_id: format!("syn{proof}"),
            step_index: history.len() as u64,
            sequent,
            history: history.clone(),
            lemma_name: (k == 0).then(|| library[j].lemma_id.clone()),
            command: command.clone(),
        });
        history.push(command);
    }

    Ok(SyntheticCorpus {
        steps,
        library,
        commands,
    })
}

impl SyntheticCorpus {
    /// The command planted in `sequent`, if it carries exactly one signature.
    pub fn rule_command(&self, sequent: &SequentState) -> Option<&str> {
        match sequent_indices(sequent, "sig").as_slice() {
            [k] => self.commands.get(*k).map(String::as_str),
            _ => None,
        }
    }

    /// The lemma whose anchor is planted in `sequent`.
    pub fn rule_lemma(&self, sequent: &SequentState) -> Option<&str> {
        match sequent_indices(sequent, "lp").as_slice() {
            [j] => self.library.get(*j).map(|l| l.lemma_id.as_str()),
            _ => None,
        }
    }

    /// `(sequent, lemma id)` pairs for steps that import a lemma.
    pub fn lemma_pairs(&self) -> Vec<(SequentState, String)> {
        self.steps
            .iter()
            .filter_map(|s| Some((s.sequent.clone(), s.lemma_name.clone()?)))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn small(seed: u64) -> SynthConfig {
        SynthConfig {
            n_commands: 5,
            n_lemmas: 50,
            n_steps: 1_000,
            seed,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn rule_recovers_every_command() {
        let corpus = generate_synthetic(&small(1)).unwrap();
        assert_eq!(corpus.steps.len(), 1_000);
        for step in &corpus.steps {
            assert_eq!(corpus.rule_command(&step.sequent), Some(step.command.as_str()));
        }
    }

    #[test]
    fn generation_is_byte_identical_under_seed() {
        let a = generate_synthetic(&small(9)).unwrap();
        let b = generate_synthetic(&small(9)).unwrap();
        let dump = |c: &SyntheticCorpus| {
            c.steps
                .iter()
                .map(|s| s.to_json().to_string())
                .chain(c.library.iter().map(|l| l.to_json().to_string()))
                .collect::<Vec<_>>()
                .join("\n")
        };
        assert_eq!(dump(&a), dump(&b));
        assert_ne!(dump(&a), dump(&generate_synthetic(&small(10)).unwrap()));
    }

    #[test]
    fn exactly_one_lemma_shares_each_planted_anchor() {
        let corpus = generate_synthetic(&small(3)).unwrap();
        let lemma_anchors: Vec<HashSet<usize>> = corpus
            .library
            .iter()
            .map(|l| {
                let mut out = Vec::new();
                collect_operator_indices(&l.statement, "lp", &mut out);
                out.into_iter().collect()
            })
            .collect();
        for step in &corpus.steps {
            let anchors: HashSet<usize> = sequent_indices(&step.sequent, "lp").into_iter().collect();
            let sharing: Vec<usize> = lemma_anchors
                .iter()
                .enumerate()
                .filter(|(_, a)| !a.is_disjoint(&anchors))
                .map(|(i, _)| i)
                .collect();
            assert_eq!(sharing.len(), 1);
            let expected = corpus.rule_lemma(&step.sequent).unwrap();
            assert_eq!(corpus.library[sharing[0]].lemma_id, expected);
            if let Some(name) = &step.lemma_name {
                assert_eq!(name, expected);
                assert_eq!(step.command, LEMMA_COMMAND);
            } else {
                assert_ne!(step.command, LEMMA_COMMAND);
            }
        }
    }

    #[test]
    fn history_matches_earlier_commands_of_the_proof() {
        let corpus = generate_synthetic(&small(4)).unwrap();
        for pair in corpus.steps.windows(2) {
            if pair[0].proof_id == pair[1].proof_id {
                let mut expected = pair[0].history.clone();
                expected.push(pair[0].command.clone());
                assert_eq!(pair[1].history, expected);
                assert_eq!(pair[1].step_index, pair[0].step_index + 1);
            } else {
                assert!(pair[1].history.is_empty());
            }
        }
    }

    #[test]
    fn rejects_degenerate_sizes() {
        let mut cfg = small(0);
        cfg.n_commands = 1;
        assert!(generate_synthetic(&cfg).is_err());
        let mut cfg = small(0);
        cfg.n_lemmas = 1;
        assert!(generate_synthetic(&cfg).is_err());
    }
}
