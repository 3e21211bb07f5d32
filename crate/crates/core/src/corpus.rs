//! Tokenized documents with character offsets, gold annotations and
//! entity/time mentions, plus seeded train/dev/test document splits.
//!
//! All offsets count Unicode scalar values (not bytes) from the start of the
//! sentence's `text`. Scoring keys include the sentence index, so offsets
//! never need to be unique across a document.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    #[serde(rename = "t")]
    pub text: String,
    #[serde(rename = "s")]
    pub start: usize,
    #[serde(rename = "e")]
    pub end: usize,
}

impl Token {
    pub fn new(text: impl Into<String>, start: usize, end: usize) -> Self {
        Token {
            text: text.into(),
            start,
            end,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MentionKind {
    Entity,
    Time,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mention {
    pub s: usize,
    pub e: usize,
    pub kind: MentionKind,
    #[serde(default)]
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldTrigger {
    pub s: usize,
    pub e: usize,
    #[serde(rename = "type")]
    pub event_type: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldArgument {
    pub trigger_s: usize,
    pub trigger_e: usize,
    pub s: usize,
    pub e: usize,
    pub role: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    #[serde(default)]
    pub text: String,
    pub tokens: Vec<Token>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub mentions: Vec<Mention>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub gold_triggers: Vec<GoldTrigger>,
    #[serde(default, rename = "gold_args", skip_serializing_if = "Vec::is_empty")]
    pub gold_arguments: Vec<GoldArgument>,
}

impl Sentence {
    /// Builds an unannotated sentence with [`tokenize`].
    pub fn from_text(text: &str) -> Self {
        Sentence {
            text: text.to_string(),
            tokens: tokenize(text),
            mentions: Vec::new(),
            gold_triggers: Vec::new(),
            gold_arguments: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Maps a character span onto the half-open token range it covers exactly,
    /// or `None` when either end falls inside a token.
    pub fn token_range(&self, s: usize, e: usize) -> Option<(usize, usize)> {
        let first = self.tokens.iter().position(|t| t.start == s)?;
        let last = self.tokens.iter().position(|t| t.end == e)?;
        (first <= last).then_some((first, last + 1))
    }

    /// Character span of the half-open token range `[first, last)`.
    pub fn char_span(&self, first: usize, last: usize) -> (usize, usize) {
        (self.tokens[first].start, self.tokens[last - 1].end)
    }

    /// Event type of the gold trigger at exactly this span.
    pub fn gold_trigger_type(&self, s: usize, e: usize) -> Option<&str> {
        self.gold_triggers
            .iter()
            .find(|g| g.s == s && g.e == e)
            .map(|g| g.event_type.as_str())
    }

    fn char_len(&self) -> usize {
        if self.text.is_empty() {
            self.tokens.last().map_or(0, |t| t.end)
        } else {
            self.text.chars().count()
        }
    }

    /// Checks every sentence invariant; the message names the offending item.
    pub fn validate(&self) -> std::result::Result<(), String> {
        if self.tokens.is_empty() {
            return Err("sentence has no tokens".into());
        }
        let chars: Vec<char> = self.text.chars().collect();
        let mut prev_end = 0;
        for (i, t) in self.tokens.iter().enumerate() {
            if t.start >= t.end {
                return Err(format!("token {i} {:?} has end {} <= start {}", t.text, t.end, t.start));
            }
            if i > 0 && t.start < prev_end {
                return Err(format!("token {i} {:?} overlaps or precedes token {}", t.text, i - 1));
            }
            prev_end = t.end;
            if !chars.is_empty() {
                if t.end > chars.len() {
                    return Err(format!("token {i} {:?} ends past the sentence text", t.text));
                }
                let slice: String = chars[t.start..t.end].iter().collect();
                if slice != t.text {
                    return Err(format!(
                        "token {i} {:?} does not match text {:?} at {}..{}",
                        t.text, slice, t.start, t.end
                    ));
                }
            }
        }
        let len = self.char_len();
        for (i, m) in self.mentions.iter().enumerate() {
            if m.s >= m.e || m.e > len {
                return Err(format!("mention {i} span {}..{} lies outside the sentence", m.s, m.e));
            }
        }
        for (i, g) in self.gold_triggers.iter().enumerate() {
            if self.token_range(g.s, g.e).is_none() {
                return Err(format!("gold trigger {i} span {}..{} is not token-aligned", g.s, g.e));
            }
        }
        for (i, a) in self.gold_arguments.iter().enumerate() {
            if self.token_range(a.trigger_s, a.trigger_e).is_none() {
                return Err(format!(
                    "gold argument {i} trigger span {}..{} is not token-aligned",
                    a.trigger_s, a.trigger_e
                ));
            }
            if self.token_range(a.s, a.e).is_none() {
                return Err(format!("gold argument {i} span {}..{} is not token-aligned", a.s, a.e));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub sentences: Vec<Sentence>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Corpus {
    pub documents: Vec<Document>,
}

impl Corpus {
    pub fn new(documents: Vec<Document>) -> Result<Self> {
        let corpus = Corpus { documents };
        corpus.validate()?;
        Ok(corpus)
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn document(&self, doc_id: &str) -> Option<&Document> {
        self.documents.iter().find(|d| d.doc_id == doc_id)
    }

    pub fn sentence(&self, doc_id: &str, index: usize) -> Option<&Sentence> {
        self.document(doc_id).and_then(|d| d.sentences.get(index))
    }

    /// Every sentence with its document id and index, in corpus order.
    pub fn sentences(&self) -> impl Iterator<Item = (&str, usize, &Sentence)> {
        self.documents.iter().flat_map(|d| {
            d.sentences
                .iter()
                .enumerate()
                .map(move |(i, s)| (d.doc_id.as_str(), i, s))
        })
    }

    /// Documents whose ids are in `ids`, corpus order preserved.
    pub fn restrict(&self, ids: &BTreeSet<String>) -> Corpus {
        Corpus {
            documents: self
                .documents
                .iter()
                .filter(|d| ids.contains(&d.doc_id))
                .cloned()
                .collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for doc in &self.documents {
            if !seen.insert(doc.doc_id.as_str()) {
                return Err(Error::Validation(format!("duplicate doc_id {:?}", doc.doc_id)));
            }
            for (i, s) in doc.sentences.iter().enumerate() {
                s.validate().map_err(|m| {
                    Error::Validation(format!("doc {:?} sentence {i}: {m}", doc.doc_id))
                })?;
            }
        }
        Ok(())
    }
}

/// Reads a JSON Lines corpus, one document per line.
pub fn load_corpus(path: &Path) -> Result<Corpus> {
    let documents: Vec<Document> = io::read_jsonl(path)?;
    Corpus::new(documents)
}

pub fn write_corpus(path: &Path, corpus: &Corpus) -> Result<()> {
    io::write_jsonl(path, &corpus.documents)
}

/// Splits on whitespace, then detaches each leading and trailing ASCII
/// punctuation character into its own token.
pub fn tokenize(text: &str) -> Vec<Token> {
    let mut tokens = Vec::new();
    let mut chunk: Vec<(usize, char)> = Vec::new();
    let flush = |chunk: &mut Vec<(usize, char)>, tokens: &mut Vec<Token>| {
        if chunk.is_empty() {
            return;
        }
        let mut lo = 0;
        let mut hi = chunk.len();
        while lo < hi && chunk[lo].1.is_ascii_punctuation() {
            lo += 1;
        }
        while hi > lo && chunk[hi - 1].1.is_ascii_punctuation() {
            hi -= 1;
        }
        let single = |(i, c): (usize, char)| Token::new(c.to_string(), i, i + 1);
        tokens.extend(chunk[..lo].iter().copied().map(single));
        if lo < hi {
            let word: String = chunk[lo..hi].iter().map(|&(_, c)| c).collect();
            tokens.push(Token::new(word, chunk[lo].0, chunk[hi - 1].0 + 1));
        }
        tokens.extend(chunk[hi..].iter().copied().map(single));
        chunk.clear();
    };
    for (i, c) in text.chars().enumerate() {
        if c.is_whitespace() {
            flush(&mut chunk, &mut tokens);
        } else {
            chunk.push((i, c));
        }
    }
    flush(&mut chunk, &mut tokens);
    tokens
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Part {
    Train,
    Dev,
    Test,
}

impl FromStr for Part {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Part::Train),
            "dev" => Ok(Part::Dev),
            "test" => Ok(Part::Test),
            _ => Err(Error::invalid(format!("unknown split part {s:?}"))),
        }
    }
}

impl fmt::Display for Part {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Part::Train => "train",
            Part::Dev => "dev",
            Part::Test => "test",
        })
    }
}

/// Disjoint train/dev/test document id sets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub seed: u64,
    pub train: Vec<String>,
    pub dev: Vec<String>,
    pub test: Vec<String>,
}

impl DatasetSplit {
    pub fn part(&self, part: Part) -> &[String] {
        match part {
            Part::Train => &self.train,
            Part::Dev => &self.dev,
            Part::Test => &self.test,
        }
    }

    pub fn ids(&self, part: Part) -> BTreeSet<String> {
        self.part(part).iter().cloned().collect()
    }

    pub fn sizes(&self) -> (usize, usize, usize) {
        (self.train.len(), self.dev.len(), self.test.len())
    }

    pub fn load(path: &Path) -> Result<Self> {
        io::read_json(path)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        io::write_json(path, self)
    }
}

/// Shuffles documents with a seeded permutation and assigns
/// `round(dev·N)` to dev, `round(test·N)` to test and the rest to train.
/// Each part lists its ids in corpus order.
pub fn split_documents(corpus: &Corpus, ratios: (f64, f64, f64), seed: u64) -> Result<DatasetSplit> {
    let (train, dev, test) = ratios;
    if corpus.is_empty() {
        return Err(Error::invalid("cannot split an empty corpus"));
    }
    if !(train > 0.0 && dev > 0.0 && test > 0.0) {
        return Err(Error::invalid(format!("split ratios must be positive, got {ratios:?}")));
    }
    if (train + dev + test - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(format!("split ratios must sum to 1, got {ratios:?}")));
    }
    let n = corpus.len();
    let n_dev = (dev * n as f64).round() as usize;
    let n_test = (test * n as f64).round() as usize;
    let n_train = n - n_dev - n_test;

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let collect = |slice: &[usize]| {
        let mut idx = slice.to_vec();
        idx.sort_unstable();
        idx.into_iter()
            .map(|i| corpus.documents[i].doc_id.clone())
            .collect::<Vec<_>>()
    };
    Ok(DatasetSplit {
        seed,
        train: collect(&order[..n_train]),
        dev: collect(&order[n_train..n_train + n_dev]),
        test: collect(&order[n_train + n_dev..]),
    })
}
