//! Word-embedding tables: loading the word2vec text format, cosine
//! similarity, exhaustive nearest-neighbour search, and a small
//! negative-sampling Skip-gram trainer for setups without pretrained vectors.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::io;
use crate::neuralnet::{softmax, Tensor};
use crate::scalar::Scalar;

/// Lower-cased vocabulary mapped to fixed-dimension vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable<T> {
    dim: usize,
    words: Vec<String>,
    vectors: Vec<T>,
    index: HashMap<String, usize>,
    duplicates: usize,
}

impl<T: Scalar> EmbeddingTable<T> {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("embedding dimension must be positive"));
        }
        Ok(EmbeddingTable {
            dim,
            words: Vec::new(),
            vectors: Vec::new(),
            index: HashMap::new(),
            duplicates: 0,
        })
    }

    pub fn from_rows<S: AsRef<str>>(dim: usize, rows: impl IntoIterator<Item = (S, Vec<T>)>) -> Result<Self> {
        let mut table = Self::new(dim)?;
        for (w, v) in rows {
            table.insert(w.as_ref(), v)?;
        }
        Ok(table)
    }

    /// Adds a row; returns `false` (and counts a duplicate) when the
    /// lower-cased word is already present, keeping the first vector.
    pub fn insert(&mut self, word: &str, vector: Vec<T>) -> Result<bool> {
        if vector.len() != self.dim {
            return Err(Error::invalid(format!(
                "vector for {word:?} has {} values, table dimension is {}",
                vector.len(),
                self.dim
            )));
        }
        let key = word.to_lowercase();
        if self.index.contains_key(&key) {
            self.duplicates += 1;
            return Ok(false);
        }
        self.index.insert(key.clone(), self.words.len());
        self.words.push(key);
        self.vectors.extend(vector);
        Ok(true)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// Rows dropped at load time because their word was already present.
    pub fn duplicates(&self) -> usize {
        self.duplicates
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn index_of(&self, word: &str) -> Option<usize> {
        self.index.get(&word.to_lowercase()).copied()
    }

    pub fn contains(&self, word: &str) -> bool {
        self.index_of(word).is_some()
    }

    /// Case-insensitive lookup.
    pub fn get(&self, word: &str) -> Option<&[T]> {
        self.index_of(word).map(|i| self.row(i))
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.vectors[i * self.dim..(i + 1) * self.dim]
    }

    /// Writes the text format with a `count dim` header line.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = format!("{} {}\n", self.len(), self.dim);
        for (i, w) in self.words.iter().enumerate() {
            out.push_str(w);
            for v in self.row(i) {
                let _ = write!(out, " {v}");
            }
            out.push('\n');
        }
        io::write_atomic(path, out.as_bytes())
    }

    pub fn cast<U: Scalar>(&self) -> EmbeddingTable<U> {
        EmbeddingTable {
            dim: self.dim,
            words: self.words.clone(),
            vectors: self.vectors.iter().map(|v| U::of(v.to_f64_lossy())).collect(),
            index: self.index.clone(),
            duplicates: self.duplicates,
        }
    }
}

/// Parses `word v1 … vd` lines with an optional leading `count dim` header.
pub fn parse_embeddings<T: Scalar>(text: &str, context: &str) -> Result<EmbeddingTable<T>> {
    let mut dim: Option<usize> = None;
    let mut table: Option<EmbeddingTable<T>> = None;
    for (i, line) in text.lines().enumerate() {
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        if i == 0 && fields.len() == 2 {
            if let (Ok(_), Ok(d)) = (fields[0].parse::<usize>(), fields[1].parse::<usize>()) {
                dim = Some(d);
                continue;
            }
        }
        let values = fields[1..]
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .map(T::of)
                    .map_err(|_| Error::parse(context, i + 1, format!("non-numeric value {f:?}")))
            })
            .collect::<Result<Vec<T>>>()?;
        let d = *dim.get_or_insert(values.len());
        if values.len() != d || d == 0 {
            return Err(Error::parse(
                context,
                i + 1,
                format!("expected {d} values, found {}", values.len()),
            ));
        }
        let t = match &mut table {
            Some(t) => t,
            None => table.insert(EmbeddingTable::new(d)?),
        };
        t.insert(fields[0], values)?;
    }
    match table {
        Some(t) => Ok(t),
        None => EmbeddingTable::new(dim.unwrap_or(1).max(1)),
    }
}

pub fn load_embeddings<T: Scalar>(path: &Path) -> Result<EmbeddingTable<T>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_embeddings(&text, &path.display().to_string())
}

/// Cosine similarity `u·v / (‖u‖‖v‖)`.
pub fn cosine<T: Scalar>(u: &[T], v: &[T]) -> Result<T> {
    if u.len() != v.len() {
        return Err(Error::invalid(format!("vector lengths differ: {} vs {}", u.len(), v.len())));
    }
    let (mut uv, mut uu, mut vv) = (T::zero(), T::zero(), T::zero());
    for (&a, &b) in u.iter().zip(v) {
        uv += a * b;
        uu += a * a;
        vv += b * b;
    }
    if uu == T::zero() || vv == T::zero() {
        return Err(Error::invalid("cosine of a zero vector is undefined"));
    }
    let c = uv / (uu.sqrt() * vv.sqrt());
    Ok(c.max(-T::one()).min(T::one()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Neighbor<T> {
    pub word: String,
    pub similarity: T,
}

/// Up to `k` words with cosine ≥ `min_sim` to `word`, by descending
/// similarity with lexicographic tie-breaks. Scans the whole table.
pub fn nearest_neighbors<T: Scalar>(
    table: &EmbeddingTable<T>,
    word: &str,
    k: usize,
    min_sim: f64,
) -> Result<Vec<Neighbor<T>>> {
    let q = table
        .index_of(word)
        .ok_or_else(|| Error::OutOfVocabulary(word.to_string()))?;
    if k == 0 {
        return Ok(Vec::new());
    }
    let query = table.row(q);
    let threshold = T::of(min_sim);
    let mut hits = Vec::new();
    for (i, w) in table.words().iter().enumerate() {
        if i == q {
            continue;
        }
        // Zero rows have no direction; skip them rather than fail the query.
        let Ok(sim) = cosine(query, table.row(i)) else {
            if table.row(i).iter().all(|x| *x == T::zero()) {
                continue;
            }
            return Err(Error::invalid(format!("query {word:?} has a zero vector")));
        };
        if sim >= threshold {
            hits.push(Neighbor {
                word: w.clone(),
                similarity: sim,
            });
        }
    }
    hits.sort_by(|a, b| {
        b.similarity
            .partial_cmp(&a.similarity)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.word.cmp(&b.word))
    });
    hits.truncate(k);
    Ok(hits)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkipgramConfig {
    pub dim: usize,
    /// Context words taken on each side of the centre word.
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    /// Initial learning rate, decayed linearly towards zero.
    pub learning_rate: f64,
    pub min_count: usize,
    pub seed: u64,
}

impl Default for SkipgramConfig {
    fn default() -> Self {
        SkipgramConfig {
            dim: 50,
            window: 5,
            negatives: 10,
            epochs: 5,
            learning_rate: 0.025,
            min_count: 1,
            seed: 1,
        }
    }
}

/// Skip-gram parameters: centre vectors `e` and context vectors `e'`.
#[derive(Debug, Clone)]
pub struct SkipgramModel<T> {
    config: SkipgramConfig,
    vocab: Vec<String>,
    index: HashMap<String, usize>,
    counts: Vec<usize>,
    input: Tensor<T>,
    output: Tensor<T>,
}

fn sigmoid<T: Scalar>(x: T) -> T {
    T::one() / (T::one() + (-x).exp())
}

impl<T: Scalar> SkipgramModel<T> {
    /// Builds the vocabulary (lower-cased, `min_count` filtered, ordered by
    /// frequency then spelling) and initializes parameters.
    pub fn new(corpus: &Corpus, config: SkipgramConfig) -> Result<Self> {
        if config.dim == 0 || config.window == 0 || config.negatives == 0 {
            return Err(Error::invalid("skip-gram needs dim, window and negatives >= 1"));
        }
        let mut freq: HashMap<String, usize> = HashMap::new();
        for (_, _, s) in corpus.sentences() {
            for t in &s.tokens {
                *freq.entry(t.text.to_lowercase()).or_default() += 1;
            }
        }
        let mut entries: Vec<(String, usize)> =
            freq.into_iter().filter(|(_, c)| *c >= config.min_count.max(1)).collect();
        entries.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        if entries.len() < 2 {
            return Err(Error::invalid(format!(
                "skip-gram needs at least 2 vocabulary words, found {}",
                entries.len()
            )));
        }
        let vocab: Vec<String> = entries.iter().map(|(w, _)| w.clone()).collect();
        let counts = entries.iter().map(|(_, c)| *c).collect();
        let index = vocab.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let input = Tensor::uniform(&[vocab.len(), config.dim], 0.5 / config.dim as f64, &mut rng);
        let output = Tensor::zeros(&[vocab.len(), config.dim]);
        Ok(SkipgramModel {
            config,
            vocab,
            index,
            counts,
            input,
            output,
        })
    }

    pub fn vocab(&self) -> &[String] {
        &self.vocab
    }

    fn encode(&self, corpus: &Corpus) -> Vec<Vec<usize>> {
        corpus
            .sentences()
            .map(|(_, _, s)| {
                s.tokens
                    .iter()
                    .filter_map(|t| self.index.get(&t.text.to_lowercase()).copied())
                    .collect()
            })
            .collect()
    }

    /// Runs all configured epochs of negative-sampling updates. Single
    /// threaded, so the result is a pure function of corpus and config.
    pub fn train(&mut self, corpus: &Corpus) -> Result<()> {
        let sentences = self.encode(corpus);
        let weights: Vec<f64> = self.counts.iter().map(|&c| (c as f64).powf(0.75)).collect();
        let noise = WeightedIndex::new(&weights).map_err(|e| Error::Runtime(e.to_string()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed.wrapping_add(1));
        let total_words: usize = sentences.iter().map(Vec::len).sum::<usize>() * self.config.epochs;
        let lr0 = self.config.learning_rate;
        let dim = self.config.dim;
        let mut seen = 0usize;
        let mut grad_h = vec![T::zero(); dim];
        for _ in 0..self.config.epochs {
            for sent in &sentences {
                for (pos, &center) in sent.iter().enumerate() {
                    let progress = seen as f64 / total_words.max(1) as f64;
                    let lr = T::of((lr0 * (1.0 - progress)).max(lr0 * 1e-4));
                    seen += 1;
                    let lo = pos.saturating_sub(self.config.window);
                    let hi = (pos + self.config.window + 1).min(sent.len());
                    for (ctx_pos, &context) in sent.iter().enumerate().take(hi).skip(lo) {
                        if ctx_pos == pos {
                            continue;
                        }
                        grad_h.iter_mut().for_each(|g| *g = T::zero());
                        self.update_pair(center, context, T::one(), lr, &mut grad_h);
                        for _ in 0..self.config.negatives {
                            let neg = noise.sample(&mut rng);
                            if neg != context {
                                self.update_pair(center, neg, T::zero(), lr, &mut grad_h);
                            }
                        }
                        for (x, g) in self.input.row_mut(center).iter_mut().zip(&grad_h) {
                            *x += *g;
                        }
                    }
                }
            }
        }
        Ok(())
    }

    fn update_pair(&mut self, center: usize, target: usize, label: T, lr: T, grad_h: &mut [T]) {
        let h = self.input.row(center);
        let score = sigmoid(h.iter().zip(self.output.row(target)).map(|(&a, &b)| a * b).sum());
        let g = lr * (label - score);
        let h = h.to_vec();
        let out = self.output.row_mut(target);
        for i in 0..h.len() {
            grad_h[i] += g * out[i];
            out[i] += g * h[i];
        }
    }

    /// Full-softmax `p(w | center)` over the vocabulary.
    pub fn conditional_probabilities(&self, center: usize) -> Vec<T> {
        let h = self.input.row(center);
        let scores: Vec<T> = (0..self.vocab.len())
            .map(|w| h.iter().zip(self.output.row(w)).map(|(&a, &b)| a * b).sum())
            .collect();
        softmax(&scores)
    }

    /// Average over centre words of the summed log-probability of their
    /// window contexts, under the full softmax. Quadratic in vocabulary size.
    pub fn average_log_probability(&self, corpus: &Corpus) -> f64 {
        let sentences = self.encode(corpus);
        let mut total = 0.0;
        let mut centers = 0usize;
        for sent in &sentences {
            for (pos, &center) in sent.iter().enumerate() {
                let probs = self.conditional_probabilities(center);
                let lo = pos.saturating_sub(self.config.window);
                let hi = (pos + self.config.window + 1).min(sent.len());
                for (j, &ctx) in sent.iter().enumerate().take(hi).skip(lo) {
                    if j != pos {
                        total += probs[ctx].to_f64_lossy().ln();
                    }
                }
                centers += 1;
            }
        }
        total / centers.max(1) as f64
    }

    /// Keeps the centre vectors and drops the context table.
    pub fn into_table(self) -> Result<EmbeddingTable<T>> {
        let dim = self.config.dim;
        let input = self.input;
        EmbeddingTable::from_rows(
            dim,
            self.vocab.iter().enumerate().map(|(i, w)| (w.as_str(), input.row(i).to_vec())),
        )
    }
}

/// Trains Skip-gram embeddings on the corpus tokens.
pub fn train_skipgram<T: Scalar>(corpus: &Corpus, config: &SkipgramConfig) -> Result<EmbeddingTable<T>> {
    let mut model = SkipgramModel::new(corpus, config.clone())?;
    model.train(corpus)?;
    model.into_table()
}

/// Draws a random unit-free table; handy for fixtures and smoke runs.
pub fn random_table<T: Scalar>(words: &[&str], dim: usize, seed: u64) -> Result<EmbeddingTable<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = words
        .iter()
        .map(|w| (*w, (0..dim).map(|_| T::of(rng.gen_range(-1.0..1.0))).collect::<Vec<T>>()))
        .collect::<Vec<_>>();
    EmbeddingTable::from_rows(dim, rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_with_and_without_header() {
        let a: EmbeddingTable<f64> = parse_embeddings("a 1 0\nb 0 1", "t").unwrap();
        let b: EmbeddingTable<f64> = parse_embeddings("2 2\na 1 0\nb 0 1\n", "t").unwrap();
        assert_eq!(a.dim(), 2);
        assert_eq!(a.len(), 2);
        assert_eq!(a, b);
    }

    #[test]
    fn parse_reports_dimension_mismatch_line() {
        let err = parse_embeddings::<f64>("a 1 0\nb 0 1 1", "t").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        let err = parse_embeddings::<f64>("a 1 x", "t").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }), "{err}");
    }

    #[test]
    fn duplicates_keep_first() {
        let t: EmbeddingTable<f32> = parse_embeddings("Dog 1 0\ndog 0 1\n", "t").unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t.duplicates(), 1);
        assert_eq!(t.get("DOG").unwrap(), &[1.0, 0.0]);
    }

    #[test]
    fn cosine_examples() {
        assert!((cosine(&[3.0, 4.0], &[3.0, 4.0]).unwrap() - 1.0f64).abs() < 1e-15);
        assert_eq!(cosine(&[1.0f64, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert!((cosine(&[1.0f64, 2.0, 2.0], &[2.0, 1.0, 2.0]).unwrap() - 8.0 / 9.0).abs() < 1e-15);
        assert!(cosine(&[0.0f64, 0.0], &[1.0, 0.0]).is_err());
        assert!(cosine(&[1.0f64], &[1.0, 0.0]).is_err());
    }

    #[test]
    fn neighbors_example() {
        let t = EmbeddingTable::from_rows(
            2,
            [("a", vec![1.0, 0.0]), ("b", vec![1.0, 0.01]), ("c", vec![0.0, 1.0])],
        )
        .unwrap();
        let n = nearest_neighbors(&t, "a", 2, 0.5).unwrap();
        assert_eq!(n.len(), 1);
        assert_eq!(n[0].word, "b");
        assert!((n[0].similarity - 1.0 / (1.0f64 + 1e-4).sqrt()).abs() < 1e-12);
        assert!(nearest_neighbors(&t, "a", 0, 0.5).unwrap().is_empty());
        assert!(matches!(
            nearest_neighbors(&t, "zzz", 2, 0.5),
            Err(Error::OutOfVocabulary(_))
        ));
        assert_eq!(nearest_neighbors(&t, "A", 5, -1.0).unwrap().len(), 2);
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let t = random_table::<f64>(&["x", "y", "z"], 4, 2).unwrap();
        let path = dir.path().join("e.txt");
        t.save(&path).unwrap();
        assert_eq!(load_embeddings::<f64>(&path).unwrap(), t);
    }
}
