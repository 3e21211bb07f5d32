//! Distant supervision: trigger examples found by matching curated
//! lexicons against unannotated text, sampled negatives, human
//! adjudication, document down-sampling, and argument candidates.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, MentionKind, Sentence};
use crate::error::{Error, Result};
use crate::io;
use crate::rolemap::{RoleMapping, NONE};

/// Default per-type cap on distant positives.
pub const DEFAULT_CAP: usize = 60;
/// Default negatives drawn per positive.
pub const DEFAULT_NEG_RATIO: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Distant,
    Adjudicated,
    Negative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Judgment {
    Correct,
    Incorrect,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TriggerExample {
    pub id: String,
    pub doc_id: String,
    pub sentence: usize,
    pub token_start: usize,
    /// Exclusive.
    pub token_end: usize,
    pub s: usize,
    pub e: usize,
    /// Surface text of the span, for human review.
    pub text: String,
    pub label: String,
    pub provenance: Provenance,
    #[serde(default)]
    pub judgment: Option<Judgment>,
}

impl TriggerExample {
    fn new(
        doc_id: &str,
        index: usize,
        sentence: &Sentence,
        (first, last): (usize, usize),
        label: &str,
        provenance: Provenance,
    ) -> Self {
        let (s, e) = sentence.char_span(first, last);
        let text = sentence.tokens[first..last]
            .iter()
            .map(|t| t.text.as_str())
            .collect::<Vec<_>>()
            .join(" ");
        TriggerExample {
            id: format!("{doc_id}#{index}#{s}-{e}#{label}"),
            doc_id: doc_id.to_string(),
            sentence: index,
            token_start: first,
            token_end: last,
            s,
            e,
            text,
            label: label.to_string(),
            provenance,
            judgment: None,
        }
    }

    pub fn is_positive(&self) -> bool {
        self.provenance != Provenance::Negative
    }
}

/// A (trigger, mention) pair considered as a possible event argument.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArgumentCandidate {
    pub id: String,
    pub doc_id: String,
    pub sentence: usize,
    pub event_type: String,
    pub trigger_s: usize,
    pub trigger_e: usize,
    pub s: usize,
    pub e: usize,
    pub mention_kind: MentionKind,
    /// Gold role (raw or generic), NONE for a negative, absent at inference.
    #[serde(default)]
    pub label: Option<String>,
}

/// One line of an examples file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "example", rename_all = "lowercase")]
pub enum ExampleRecord {
    Trigger(TriggerExample),
    Argument(ArgumentCandidate),
}

pub fn read_examples(path: &Path) -> Result<Vec<ExampleRecord>> {
    io::read_jsonl(path)
}

pub fn read_trigger_examples(path: &Path) -> Result<Vec<TriggerExample>> {
    read_examples(path)?
        .into_iter()
        .map(|r| match r {
            ExampleRecord::Trigger(t) => Ok(t),
            ExampleRecord::Argument(a) => Err(Error::Validation(format!(
                "{}: expected trigger examples, found argument candidate {}",
                path.display(),
                a.id
            ))),
        })
        .collect()
}

pub fn read_argument_candidates(path: &Path) -> Result<Vec<ArgumentCandidate>> {
    read_examples(path)?
        .into_iter()
        .map(|r| match r {
            ExampleRecord::Argument(a) => Ok(a),
            ExampleRecord::Trigger(t) => Err(Error::Validation(format!(
                "{}: expected argument candidates, found trigger example {}",
                path.display(),
                t.id
            ))),
        })
        .collect()
}

pub fn write_trigger_examples(path: &Path, examples: &[TriggerExample]) -> Result<()> {
    let records: Vec<ExampleRecord> = examples.iter().cloned().map(ExampleRecord::Trigger).collect();
    io::write_jsonl(path, &records)
}

pub fn write_argument_candidates(path: &Path, candidates: &[ArgumentCandidate]) -> Result<()> {
    let records: Vec<ExampleRecord> = candidates.iter().cloned().map(ExampleRecord::Argument).collect();
    io::write_jsonl(path, &records)
}

/// Final trigger words per event type.
pub type Lexicons = BTreeMap<String, BTreeSet<String>>;

/// Lexicon entries split into lower-cased tokens, longest first.
fn compile(lexicons: &Lexicons) -> Vec<(&str, Vec<Vec<String>>)> {
    lexicons
        .iter()
        .map(|(ty, words)| {
            let mut phrases: Vec<Vec<String>> = words
                .iter()
                .map(|w| w.split_whitespace().map(str::to_lowercase).collect::<Vec<_>>())
                .filter(|p| !p.is_empty())
                .collect();
            phrases.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));
            (ty.as_str(), phrases)
        })
        .collect()
}

/// Lexicon matches of one sentence as `(first, last, type)`, sorted by
/// position then type. Within a type the scan is greedy left to right,
/// taking the longest phrase at each position.
fn match_sentence<'a>(tokens: &[String], compiled: &[(&'a str, Vec<Vec<String>>)]) -> Vec<(usize, usize, &'a str)> {
    let mut hits = Vec::new();
    for (ty, phrases) in compiled {
        let mut pos = 0;
        while pos < tokens.len() {
            let found = phrases
                .iter()
                .find(|p| tokens.len() - pos >= p.len() && tokens[pos..pos + p.len()] == p[..]);
            match found {
                Some(p) => {
                    hits.push((pos, pos + p.len(), *ty));
                    pos += p.len();
                }
                None => pos += 1,
            }
        }
    }
    hits.sort();
    hits
}

/// Case-insensitive token-sequence matches of every trigger, at most
/// `cap` per event type, taken in corpus order.
pub fn find_occurrences(corpus: &Corpus, lexicons: &Lexicons, cap: usize) -> Result<Vec<TriggerExample>> {
    if lexicons.values().all(BTreeSet::is_empty) {
        return Err(Error::invalid("no trigger words to search for"));
    }
    if cap == 0 {
        return Err(Error::invalid("cap must be at least 1"));
    }
    let compiled = compile(lexicons);
    let mut taken: HashMap<&str, usize> = HashMap::new();
    let mut out = Vec::new();
    for (doc_id, index, sentence) in corpus.sentences() {
        let lower: Vec<String> = sentence.tokens.iter().map(|t| t.text.to_lowercase()).collect();
        for (first, last, ty) in match_sentence(&lower, &compiled) {
            let n = taken.entry(ty).or_insert(0);
            if *n >= cap {
                continue;
            }
            *n += 1;
            out.push(TriggerExample::new(doc_id, index, sentence, (first, last), ty, Provenance::Distant));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NegativeSample {
    pub examples: Vec<TriggerExample>,
    pub requested: usize,
    /// Fewer eligible tokens existed than were requested.
    pub short: bool,
}

/// Uniformly samples `ceil(ratio · #positives)` single tokens that are in
/// no lexicon and overlap no positive, returned in corpus order.
pub fn sample_negatives(
    corpus: &Corpus,
    lexicons: &Lexicons,
    positives: &[TriggerExample],
    ratio: f64,
    seed: u64,
) -> Result<NegativeSample> {
    if !(ratio > 0.0) {
        return Err(Error::invalid("negative ratio must be positive"));
    }
    let words: HashSet<String> = lexicons.values().flatten().map(|w| w.to_lowercase()).collect();
    let mut covered: HashSet<(&str, usize, usize)> = HashSet::new();
    for p in positives {
        for t in p.token_start..p.token_end {
            covered.insert((p.doc_id.as_str(), p.sentence, t));
        }
    }
    let mut eligible = Vec::new();
    for (doc_id, index, sentence) in corpus.sentences() {
        for (t, token) in sentence.tokens.iter().enumerate() {
            if !covered.contains(&(doc_id, index, t)) && !words.contains(&token.text.to_lowercase()) {
                eligible.push((doc_id, index, t));
            }
        }
    }
    let requested = (ratio * positives.len() as f64).ceil() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked: Vec<usize> = rand::seq::index::sample(&mut rng, eligible.len(), requested.min(eligible.len()))
        .into_vec();
    picked.sort_unstable();
    let examples = picked
        .into_iter()
        .map(|i| {
            let (doc_id, index, t) = eligible[i];
            let sentence = corpus.sentence(doc_id, index).expect("sentence from this corpus");
            TriggerExample::new(doc_id, index, sentence, (t, t + 1), NONE, Provenance::Negative)
        })
        .collect();
    Ok(NegativeSample {
        examples,
        requested,
        short: requested > eligible.len(),
    })
}

/// Keeps positives judged correct (now adjudicated) and every negative;
/// drops positives judged incorrect. Unjudged positives stay as they are.
pub fn adjudicate(
    examples: &[TriggerExample],
    judgments: &BTreeMap<String, Judgment>,
) -> Result<Vec<TriggerExample>> {
    let ids: HashSet<&str> = examples.iter().map(|e| e.id.as_str()).collect();
    if let Some(unknown) = judgments.keys().find(|k| !ids.contains(k.as_str())) {
        return Err(Error::Validation(format!("judgment for unknown example id {unknown:?}")));
    }
    Ok(examples
        .iter()
        .filter_map(|e| {
            if !e.is_positive() {
                return Some(e.clone());
            }
            match judgments.get(&e.id) {
                Some(Judgment::Correct) => Some(TriggerExample {
                    provenance: Provenance::Adjudicated,
                    judgment: Some(Judgment::Correct),
                    ..e.clone()
                }),
                Some(Judgment::Incorrect) => None,
                None => Some(e.clone()),
            }
        })
        .collect())
}

/// Distinct document ids in order of first appearance.
pub fn documents_of(examples: &[TriggerExample]) -> Vec<String> {
    let mut seen = HashSet::new();
    examples
        .iter()
        .filter(|e| seen.insert(e.doc_id.as_str()))
        .map(|e| e.doc_id.clone())
        .collect()
}

/// Documents that hold at least one positive example.
pub fn positive_documents(examples: &[TriggerExample]) -> BTreeSet<String> {
    examples.iter().filter(|e| e.is_positive()).map(|e| e.doc_id.clone()).collect()
}

pub fn restrict_to_documents(examples: &[TriggerExample], docs: &BTreeSet<String>) -> Vec<TriggerExample> {
    examples.iter().filter(|e| docs.contains(&e.doc_id)).cloned().collect()
}

/// Seeded uniform choice of `target` documents.
pub fn sample_documents(docs: &[String], target: usize, seed: u64) -> Result<BTreeSet<String>> {
    if target > docs.len() {
        return Err(Error::invalid(format!(
            "cannot keep {target} documents, only {} available",
            docs.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(docs.choose_multiple(&mut rng, target).cloned().collect())
}

/// Keeps every example of `target` uniformly chosen documents.
pub fn downsample_documents(examples: &[TriggerExample], target: usize, seed: u64) -> Result<Vec<TriggerExample>> {
    let keep = sample_documents(&documents_of(examples), target, seed)?;
    Ok(restrict_to_documents(examples, &keep))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TriggerSpan {
    pub s: usize,
    pub e: usize,
    pub event_type: String,
}

/// Pairs every trigger with every mention of the sentence. With `training`
/// set, labels come from the gold arguments (through `mapping` when given)
/// and default to NONE; otherwise labels are left unset.
pub fn build_argument_candidates(
    doc_id: &str,
    index: usize,
    sentence: &Sentence,
    triggers: &[TriggerSpan],
    mapping: Option<&RoleMapping>,
    training: bool,
) -> Vec<ArgumentCandidate> {
    let mut out = Vec::with_capacity(triggers.len() * sentence.mentions.len());
    for t in triggers {
        for m in &sentence.mentions {
            let label = training.then(|| {
                sentence
                    .gold_arguments
                    .iter()
                    .find(|a| a.trigger_s == t.s && a.trigger_e == t.e && a.s == m.s && a.e == m.e)
                    .map(|a| match mapping {
                        Some(map) => map
                            .canonical(&a.role, &t.event_type)
                            .map_or(NONE.to_string(), |r| r.as_str().to_string()),
                        None => a.role.clone(),
                    })
                    .unwrap_or_else(|| NONE.to_string())
            });
            out.push(ArgumentCandidate {
                id: format!("{doc_id}#{index}#{}-{}#{}-{}", t.s, t.e, m.s, m.e),
                doc_id: doc_id.to_string(),
                sentence: index,
                event_type: t.event_type.clone(),
                trigger_s: t.s,
                trigger_e: t.e,
                s: m.s,
                e: m.e,
                mention_kind: m.kind,
                label,
            });
        }
    }
    out
}

/// Gold trigger spans of a sentence.
pub fn gold_trigger_spans(sentence: &Sentence) -> Vec<TriggerSpan> {
    sentence
        .gold_triggers
        .iter()
        .map(|g| TriggerSpan {
            s: g.s,
            e: g.e,
            event_type: g.event_type.clone(),
        })
        .collect()
}

/// Training candidates for every gold trigger in the corpus, raw roles.
pub fn gold_argument_candidates(corpus: &Corpus, mapping: Option<&RoleMapping>) -> Vec<ArgumentCandidate> {
    corpus
        .sentences()
        .flat_map(|(doc_id, index, s)| {
            build_argument_candidates(doc_id, index, s, &gold_trigger_spans(s), mapping, true)
        })
        .collect()
}
