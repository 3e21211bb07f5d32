//! Featurization, grid-searched training and decoding for the trigger
//! classifier and the generic argument classifier.
//!
//! A trigger instance is one token of a sentence: every token carries its
//! word row and its distance to the candidate trigger, and the lexical
//! vector holds the candidate with one neighbour on each side. Argument
//! instances add a second distance channel and lexical window anchored on
//! the mention head (its last token). No event-type feature is used.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::de::Deserializer;
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Mention, MentionKind, Sentence};
use crate::distsup::{ArgumentCandidate, TriggerExample, TriggerSpan};
use crate::embeddings::EmbeddingTable;
use crate::error::{Error, Result};
use crate::io;
use crate::neuralnet::{softmax, Activation, AdadeltaState, Instance, LayerConfig, LayerStack, Tensor, WordRef};
use crate::rolemap::{NONE, TIME};
use crate::scalar::Scalar;

pub const PF_DIM: usize = 5;
pub const PF_CLAMP: i32 = 30;
pub const FILTER_WIDTH: usize = 3;
/// Version tag written into model files.
pub const MODEL_FORMAT: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Trigger,
    Argument,
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Task::Trigger => "trigger",
            Task::Argument => "argument",
        })
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "trigger" => Ok(Task::Trigger),
            "argument" => Ok(Task::Argument),
            _ => Err(Error::invalid(format!("unknown mode {s:?} (expected trigger or argument)"))),
        }
    }
}

/// Lower-cased words that have a frozen embedding row, in row order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Vocabulary {
    words: Vec<String>,
    index: HashMap<String, usize>,
}

impl Serialize for Vocabulary {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.words.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Vocabulary {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        Ok(Vocabulary::from_words(Vec::deserialize(d)?))
    }
}

impl Vocabulary {
    fn from_words(words: Vec<String>) -> Self {
        let index = words.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
        Vocabulary { words, index }
    }

    /// Keeps the table rows of `words` (lower-cased, sorted) and returns
    /// them as the frozen word matrix.
    pub fn build<'a, T: Scalar>(
        table: &EmbeddingTable<T>,
        words: impl IntoIterator<Item = &'a str>,
    ) -> (Vocabulary, Tensor<T>) {
        let kept: BTreeSet<String> = words
            .into_iter()
            .map(str::to_lowercase)
            .filter(|w| table.contains(w))
            .collect();
        let mut data = Vec::with_capacity(kept.len() * table.dim());
        for w in &kept {
            data.extend_from_slice(table.get(w).expect("filtered on contains"));
        }
        let matrix = Tensor::from_vec(&[kept.len(), table.dim()], data).expect("shape matches data");
        (Vocabulary::from_words(kept.into_iter().collect()), matrix)
    }

    /// Vocabulary over every token of `corpus`.
    pub fn for_corpus<T: Scalar>(table: &EmbeddingTable<T>, corpus: &Corpus) -> (Vocabulary, Tensor<T>) {
        Self::build(
            table,
            corpus.sentences().flat_map(|(_, _, s)| s.tokens.iter().map(|t| t.text.as_str())),
        )
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn lookup(&self, word: &str) -> WordRef {
        match self.index.get(&word.to_lowercase()) {
            Some(&i) => WordRef::Known(i),
            None => WordRef::Unk,
        }
    }
}

fn clamp_distance(j: usize, anchor: usize, clamp: i32) -> i32 {
    let d = j as i64 - anchor as i64;
    d.clamp(-(clamp as i64), clamp as i64) as i32
}

fn window(words: &[WordRef], anchor: usize) -> [WordRef; 3] {
    let at = |k: Option<usize>| k.and_then(|k| words.get(k)).copied().unwrap_or(WordRef::Pad);
    [at(anchor.checked_sub(1)), at(Some(anchor)), at(Some(anchor + 1))]
}

fn words_of(vocab: &Vocabulary, sentence: &Sentence) -> Vec<WordRef> {
    sentence.tokens.iter().map(|t| vocab.lookup(&t.text)).collect()
}

/// Instance for the candidate trigger at `token_index`.
pub fn featurize_trigger(vocab: &Vocabulary, sentence: &Sentence, token_index: usize) -> Result<Instance> {
    featurize_trigger_clamped(vocab, sentence, token_index, PF_CLAMP)
}

pub fn featurize_trigger_clamped(
    vocab: &Vocabulary,
    sentence: &Sentence,
    token_index: usize,
    clamp: i32,
) -> Result<Instance> {
    let n = sentence.len();
    if token_index >= n {
        return Err(Error::invalid(format!("token index {token_index} outside sentence of {n} tokens")));
    }
    let words = words_of(vocab, sentence);
    Ok(Instance {
        pf_trigger: (0..n).map(|j| clamp_distance(j, token_index, clamp)).collect(),
        pf_arg: None,
        lexical: window(&words, token_index).to_vec(),
        words,
    })
}

/// Index of the mention's head, its last token.
pub fn mention_head(sentence: &Sentence, mention: &Mention) -> Result<usize> {
    sentence
        .token_range(mention.s, mention.e)
        .map(|(_, last)| last - 1)
        .ok_or_else(|| {
            Error::Validation(format!(
                "mention {}..{} is not aligned to token boundaries",
                mention.s, mention.e
            ))
        })
}

/// Instance for the pair (trigger token, mention).
pub fn featurize_argument(
    vocab: &Vocabulary,
    sentence: &Sentence,
    trigger_index: usize,
    mention: &Mention,
) -> Result<Instance> {
    featurize_argument_clamped(vocab, sentence, trigger_index, mention, PF_CLAMP)
}

pub fn featurize_argument_clamped(
    vocab: &Vocabulary,
    sentence: &Sentence,
    trigger_index: usize,
    mention: &Mention,
    clamp: i32,
) -> Result<Instance> {
    let head = mention_head(sentence, mention)?;
    let mut x = featurize_trigger_clamped(vocab, sentence, trigger_index, clamp)?;
    x.pf_arg = Some((0..sentence.len()).map(|j| clamp_distance(j, head, clamp)).collect());
    x.lexical.extend(window(&x.words, head));
    Ok(x)
}

/// Anchor token of a trigger span: its last token.
fn trigger_anchor(sentence: &Sentence, s: usize, e: usize) -> Result<usize> {
    sentence
        .token_range(s, e)
        .map(|(_, last)| last - 1)
        .ok_or_else(|| Error::Validation(format!("trigger {s}..{e} is not aligned to token boundaries")))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledInstance {
    pub instance: Instance,
    pub label: String,
    /// Set for argument instances so decoding can apply the Time constraint.
    pub mention_kind: Option<MentionKind>,
}

fn sentence_for<'a>(corpus: &'a Corpus, doc_id: &str, index: usize) -> Result<&'a Sentence> {
    corpus
        .sentence(doc_id, index)
        .ok_or_else(|| Error::Validation(format!("example refers to missing sentence {doc_id}#{index}")))
}

/// One instance per token of every example span.
pub fn trigger_instances(
    corpus: &Corpus,
    examples: &[TriggerExample],
    vocab: &Vocabulary,
) -> Result<Vec<LabeledInstance>> {
    let mut out = Vec::new();
    for ex in examples {
        let sentence = sentence_for(corpus, &ex.doc_id, ex.sentence)?;
        if ex.token_end > sentence.len() || ex.token_start >= ex.token_end {
            return Err(Error::Validation(format!("example {} has an invalid token span", ex.id)));
        }
        for t in ex.token_start..ex.token_end {
            out.push(LabeledInstance {
                instance: featurize_trigger(vocab, sentence, t)?,
                label: ex.label.clone(),
                mention_kind: None,
            });
        }
    }
    Ok(out)
}

/// Every token of the corpus, labelled with the gold trigger covering it.
pub fn gold_trigger_instances(corpus: &Corpus, vocab: &Vocabulary) -> Result<Vec<LabeledInstance>> {
    let mut out = Vec::new();
    for (_, _, sentence) in corpus.sentences() {
        let mut labels = vec![NONE.to_string(); sentence.len()];
        for g in &sentence.gold_triggers {
            if let Some((a, b)) = sentence.token_range(g.s, g.e) {
                labels[a..b].iter_mut().for_each(|l| *l = g.event_type.clone());
            }
        }
        for (t, label) in labels.into_iter().enumerate() {
            out.push(LabeledInstance {
                instance: featurize_trigger(vocab, sentence, t)?,
                label,
                mention_kind: None,
            });
        }
    }
    Ok(out)
}

/// Labelled argument instances; every candidate must carry a label.
pub fn argument_instances(
    corpus: &Corpus,
    candidates: &[ArgumentCandidate],
    vocab: &Vocabulary,
) -> Result<Vec<LabeledInstance>> {
    candidates
        .iter()
        .map(|c| {
            let sentence = sentence_for(corpus, &c.doc_id, c.sentence)?;
            let label = c
                .label
                .clone()
                .ok_or_else(|| Error::Validation(format!("argument candidate {} has no label", c.id)))?;
            let anchor = trigger_anchor(sentence, c.trigger_s, c.trigger_e)?;
            let mention = Mention {
                s: c.s,
                e: c.e,
                kind: c.mention_kind,
                label: String::new(),
            };
            Ok(LabeledInstance {
                instance: featurize_argument(vocab, sentence, anchor, &mention)?,
                label,
                mention_kind: Some(c.mention_kind),
            })
        })
        .collect()
}

/// Hyper-parameter grid and fixed training settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: Vec<usize>,
    pub positive_weights: Vec<f64>,
    pub batch_sizes: Vec<usize>,
    pub filters: Vec<usize>,
    pub dropout: f64,
    pub seed: u64,
    pub activation: Activation,
    /// Decode Time only for time mentions.
    pub time_constraint: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: vec![5, 10, 20],
            positive_weights: vec![1.0, 3.0, 5.0, 10.0],
            batch_sizes: vec![16, 32],
            filters: vec![64, 128],
            dropout: 0.5,
            seed: 1,
            activation: Activation::Tanh,
            time_constraint: true,
        }
    }
}

impl TrainConfig {
    pub fn load(path: &Path) -> Result<Self> {
        io::read_json(path)
    }

    pub fn validate(&self) -> Result<()> {
        let empty = [
            ("epochs", self.epochs.is_empty()),
            ("positive_weights", self.positive_weights.is_empty()),
            ("batch_sizes", self.batch_sizes.is_empty()),
            ("filters", self.filters.is_empty()),
        ];
        if let Some((name, _)) = empty.iter().find(|(_, e)| *e) {
            return Err(Error::invalid(format!("grid {name} is empty")));
        }
        if self.epochs.contains(&0) || self.batch_sizes.contains(&0) || self.filters.contains(&0) {
            return Err(Error::invalid("epochs, batch sizes and filters must be positive"));
        }
        if self.positive_weights.iter().any(|w| !(*w > 0.0)) {
            return Err(Error::invalid("positive weights must be positive"));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::invalid("dropout must lie in [0, 1)"));
        }
        Ok(())
    }

    /// Grid points in enumeration order (epochs vary fastest).
    pub fn points(&self) -> Vec<GridPoint> {
        let mut out = Vec::new();
        for &filters in &self.filters {
            for &batch_size in &self.batch_sizes {
                for &positive_weight in &self.positive_weights {
                    for &epochs in &self.epochs {
                        out.push(GridPoint {
                            epochs,
                            positive_weight,
                            batch_size,
                            filters,
                        });
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub epochs: usize,
    pub positive_weight: f64,
    pub batch_size: usize,
    pub filters: usize,
}

impl GridPoint {
    /// Seed of the run that produces this point. Epochs are left out so
    /// that shorter runs are prefixes of longer ones.
    fn run_seed(&self, master: u64) -> u64 {
        let mut h = master ^ 0x9E37_79B9_7F4A_7C15;
        for v in [self.positive_weight.to_bits(), self.batch_size as u64, self.filters as u64] {
            h = splitmix(h ^ v);
        }
        h
    }

    fn run_key(&self) -> (u64, usize, usize) {
        (self.positive_weight.to_bits(), self.batch_size, self.filters)
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Micro precision/recall/F1 over non-NONE labels.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Prf {
    pub p: f64,
    pub r: f64,
    pub f1: f64,
}

impl Prf {
    pub fn from_counts(matched: usize, predicted: usize, gold: usize) -> Self {
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let p = ratio(matched, predicted);
        let r = ratio(matched, gold);
        let f1 = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
        Prf { p, r, f1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub point: GridPoint,
    pub dev: Prf,
    pub train_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    pub task: Task,
    pub labels: Vec<String>,
    pub train_instances: usize,
    pub dev_instances: usize,
    pub results: Vec<GridResult>,
    pub selected: usize,
}

/// A trained classifier with everything needed to featurize and decode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct CnnModel<T> {
    pub format: u32,
    pub task: Task,
    /// Output labels; index 0 is NONE.
    pub labels: Vec<String>,
    pub vocab: Vocabulary,
    pub time_constraint: bool,
    pub point: GridPoint,
    pub net: LayerStack<T>,
}

impl<T: Scalar> CnnModel<T> {
    pub fn load(path: &Path) -> Result<Self> {
        let model: Self = io::read_json(path)?;
        if model.format != MODEL_FORMAT {
            return Err(Error::Validation(format!(
                "{}: unsupported model format {} (expected {MODEL_FORMAT})",
                path.display(),
                model.format
            )));
        }
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        io::write_json(path, self)
    }

    pub fn cast<U: Scalar>(&self) -> CnnModel<U> {
        CnnModel {
            format: self.format,
            task: self.task,
            labels: self.labels.clone(),
            vocab: self.vocab.clone(),
            time_constraint: self.time_constraint,
            point: self.point,
            net: self.net.cast(),
        }
    }

    fn expect_task(&self, task: Task) -> Result<()> {
        if self.task != task {
            return Err(Error::invalid(format!("expected a {task} model, got a {} model", self.task)));
        }
        Ok(())
    }

    /// Highest-probability label and its probability. Labels rejected by
    /// the Time constraint are skipped.
    pub fn classify(&self, x: &Instance, mention_kind: Option<MentionKind>) -> Result<(usize, T)> {
        let probs = self.net.probabilities(x)?;
        let blocked = |l: usize| {
            self.time_constraint
                && mention_kind.is_some_and(|k| k != MentionKind::Time)
                && is_time_label(&self.labels[l])
        };
        let mut best: Option<(usize, T)> = None;
        for (l, &p) in probs.iter().enumerate() {
            if blocked(l) {
                continue;
            }
            if best.is_none_or(|(_, bp)| p > bp) {
                best = Some((l, p));
            }
        }
        Ok(best.expect("NONE is never blocked"))
    }

    /// Instance-level micro P/R/F1 with NONE excluded.
    pub fn evaluate(&self, data: &[LabeledInstance]) -> Result<Prf> {
        let (mut matched, mut predicted, mut gold) = (0, 0, 0);
        for d in data {
            let (l, _) = self.classify(&d.instance, d.mention_kind)?;
            let pred = self.labels[l].as_str();
            if pred != NONE {
                predicted += 1;
            }
            if d.label != NONE {
                gold += 1;
                if pred == d.label {
                    matched += 1;
                }
            }
        }
        Ok(Prf::from_counts(matched, predicted, gold))
    }

    /// Fraction of instances whose decoded label equals the gold label.
    pub fn accuracy(&self, data: &[LabeledInstance]) -> Result<f64> {
        if data.is_empty() {
            return Ok(0.0);
        }
        let mut right = 0;
        for d in data {
            let (l, _) = self.classify(&d.instance, d.mention_kind)?;
            if self.labels[l] == d.label {
                right += 1;
            }
        }
        Ok(right as f64 / data.len() as f64)
    }
}

fn is_time_label(label: &str) -> bool {
    label == TIME || label.starts_with("Time-")
}

/// Label inventory: NONE first, then the other labels sorted.
fn label_set(train: &[LabeledInstance]) -> Vec<String> {
    let others: BTreeSet<&str> = train.iter().map(|d| d.label.as_str()).filter(|l| *l != NONE).collect();
    std::iter::once(NONE).chain(others).map(str::to_string).collect()
}

struct Run<T> {
    snapshots: Vec<(usize, LayerStack<T>, f64)>,
}

fn train_run<T: Scalar>(
    base: LayerConfig,
    words: &Tensor<T>,
    data: &[(Instance, usize)],
    point: GridPoint,
    epochs: &BTreeSet<usize>,
    master_seed: u64,
) -> Result<Run<T>> {
    let config = LayerConfig {
        filters: point.filters,
        ..base
    };
    let seed = point.run_seed(master_seed);
    let mut net = LayerStack::init(config.clone(), words.clone(), seed)?;
    let mut weights = vec![T::of(point.positive_weight); config.labels];
    weights[0] = T::one();
    let mut opt = AdadeltaState::with_defaults(&net.params);
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix(seed));
    let mut order: Vec<usize> = (0..data.len()).collect();
    let last = *epochs.iter().next_back().expect("grid validated");
    let mut snapshots = Vec::new();
    for epoch in 1..=last {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(point.batch_size) {
            let mut grads = net.zero_grads();
            let scale = T::one() / T::of_usize(batch.len());
            for &i in batch {
                let (x, label) = &data[i];
                let loss = net.accumulate_gradients(x, *label, &weights, Some(&mut rng), scale, &mut grads)?;
                total += loss.to_f64_lossy();
            }
            opt.step(&mut net.params, &grads)?;
        }
        if epochs.contains(&epoch) {
            snapshots.push((epoch, net.clone(), total / data.len() as f64));
        }
    }
    Ok(Run { snapshots })
}

/// Trains one network per grid point and keeps the one with the best dev
/// micro-F1 (NONE excluded). Ties go to fewer filters, then fewer epochs,
/// then the earlier grid point.
pub fn train<T: Scalar>(
    task: Task,
    vocab: Vocabulary,
    words: Tensor<T>,
    train: &[LabeledInstance],
    dev: &[LabeledInstance],
    config: &TrainConfig,
) -> Result<(CnnModel<T>, SelectionReport)> {
    config.validate()?;
    if dev.is_empty() {
        return Err(Error::Validation("development set is empty".into()));
    }
    let labels = label_set(train);
    if labels.len() < 2 || train.iter().all(|d| d.label == train[0].label) {
        return Err(Error::Validation("training data needs at least two distinct labels".into()));
    }
    if words.rows() != vocab.len() {
        return Err(Error::invalid("word matrix does not match the vocabulary"));
    }
    let label_index: HashMap<&str, usize> = labels.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();
    let data: Vec<(Instance, usize)> = train
        .iter()
        .map(|d| (d.instance.clone(), label_index[d.label.as_str()]))
        .collect();
    let base = LayerConfig {
        word_dim: words.row_len(),
        pf_dim: PF_DIM,
        pf_clamp: PF_CLAMP,
        arg_features: task == Task::Argument,
        lexical_slots: if task == Task::Argument { 6 } else { 3 },
        filter_width: FILTER_WIDTH,
        filters: 1,
        labels: labels.len(),
        activation: config.activation,
        dropout: config.dropout,
    };

    let points = config.points();
    let epochs: BTreeSet<usize> = config.epochs.iter().copied().collect();
    let mut runs: Vec<GridPoint> = Vec::new();
    for p in &points {
        if !runs.iter().any(|r| r.run_key() == p.run_key()) {
            runs.push(*p);
        }
    }
    let trained: Vec<Run<T>> = runs
        .par_iter()
        .map(|p| train_run(base.clone(), &words, &data, *p, &epochs, config.seed))
        .collect::<Result<_>>()?;

    let wrap = |net: LayerStack<T>, point: GridPoint| CnnModel {
        format: MODEL_FORMAT,
        task,
        labels: labels.clone(),
        vocab: vocab.clone(),
        time_constraint: config.time_constraint,
        point,
        net,
    };
    let mut results = Vec::with_capacity(points.len());
    let mut best: Option<(usize, f64)> = None;
    for (i, p) in points.iter().enumerate() {
        let run = runs.iter().position(|r| r.run_key() == p.run_key()).expect("run for every point");
        let (_, net, loss) = trained[run]
            .snapshots
            .iter()
            .find(|(e, _, _)| *e == p.epochs)
            .expect("snapshot for every epoch count");
        let dev_score = wrap(net.clone(), *p).evaluate(dev)?;
        let better = match best {
            None => true,
            Some((b, f1)) => {
                let q = &points[b];
                dev_score.f1 > f1 || (dev_score.f1 == f1 && (p.filters, p.epochs) < (q.filters, q.epochs))
            }
        };
        if better {
            best = Some((i, dev_score.f1));
        }
        results.push(GridResult {
            point: *p,
            dev: dev_score,
            train_loss: *loss,
        });
    }
    let (selected, _) = best.expect("grid validated");
    let p = points[selected];
    let run = runs.iter().position(|r| r.run_key() == p.run_key()).expect("run for every point");
    let (_, net, _) = trained[run]
        .snapshots
        .iter()
        .find(|(e, _, _)| *e == p.epochs)
        .expect("snapshot for every epoch count");
    let model = wrap(net.clone(), p);
    let report = SelectionReport {
        task,
        labels: labels.clone(),
        train_instances: train.len(),
        dev_instances: dev.len(),
        results,
        selected,
    };
    Ok((model, report))
}

/// One decoded trigger or argument.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub doc_id: String,
    pub sentence: usize,
    pub s: usize,
    pub e: usize,
    pub label: String,
    pub conf: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trigger_s: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trigger_e: Option<usize>,
    /// Event type of the trigger an argument attaches to.
    #[serde(rename = "type", default, skip_serializing_if = "Option::is_none")]
    pub event_type: Option<String>,
}

impl Prediction {
    pub fn is_argument(&self) -> bool {
        self.trigger_s.is_some()
    }
}

pub fn read_predictions(path: &Path) -> Result<Vec<Prediction>> {
    io::read_jsonl(path)
}

pub fn write_predictions(path: &Path, predictions: &[Prediction]) -> Result<()> {
    io::write_jsonl(path, predictions)
}

/// Labels every token and merges runs of adjacent tokens with the same
/// type into one span, whose confidence is the lowest of its tokens.
pub fn predict_triggers<T: Scalar>(
    model: &CnnModel<T>,
    doc_id: &str,
    index: usize,
    sentence: &Sentence,
) -> Result<Vec<Prediction>> {
    model.expect_task(Task::Trigger)?;
    let mut out: Vec<(usize, usize, usize, f64)> = Vec::new();
    for t in 0..sentence.len() {
        let x = featurize_trigger(&model.vocab, sentence, t)?;
        let (l, p) = model.classify(&x, None)?;
        if l == 0 {
            continue;
        }
        let p = p.to_f64_lossy();
        match out.last_mut() {
            Some(last) if last.1 == t && last.2 == l => {
                last.1 = t + 1;
                last.3 = last.3.min(p);
            }
            _ => out.push((t, t + 1, l, p)),
        }
    }
    Ok(out
        .into_iter()
        .map(|(a, b, l, conf)| {
            let (s, e) = sentence.char_span(a, b);
            Prediction {
                doc_id: doc_id.to_string(),
                sentence: index,
                s,
                e,
                label: model.labels[l].clone(),
                conf,
                trigger_s: None,
                trigger_e: None,
                event_type: None,
            }
        })
        .collect())
}

/// Labels every (trigger, mention) pair; predictions inherit the trigger's
/// event type.
pub fn predict_arguments<T: Scalar>(
    model: &CnnModel<T>,
    doc_id: &str,
    index: usize,
    sentence: &Sentence,
    triggers: &[TriggerSpan],
) -> Result<Vec<Prediction>> {
    model.expect_task(Task::Argument)?;
    let mut out = Vec::new();
    for t in triggers {
        let anchor = trigger_anchor(sentence, t.s, t.e)?;
        for m in &sentence.mentions {
            let x = featurize_argument(&model.vocab, sentence, anchor, m)?;
            let (l, p) = model.classify(&x, Some(m.kind))?;
            if l == 0 {
                continue;
            }
            out.push(Prediction {
                doc_id: doc_id.to_string(),
                sentence: index,
                s: m.s,
                e: m.e,
                label: model.labels[l].clone(),
                conf: p.to_f64_lossy(),
                trigger_s: Some(t.s),
                trigger_e: Some(t.e),
                event_type: Some(t.event_type.clone()),
            });
        }
    }
    Ok(out)
}

/// Trigger predictions for every sentence of `corpus`, in corpus order.
pub fn predict_corpus_triggers<T: Scalar>(model: &CnnModel<T>, corpus: &Corpus) -> Result<Vec<Prediction>> {
    let per_sentence: Vec<Vec<Prediction>> = corpus
        .sentences()
        .collect::<Vec<_>>()
        .par_iter()
        .map(|(d, i, s)| predict_triggers(model, d, *i, s))
        .collect::<Result<_>>()?;
    Ok(per_sentence.into_iter().flatten().collect())
}

/// Argument predictions for every sentence, attached to `triggers` (trigger
/// predictions or gold triggers, matched by doc and sentence).
pub fn predict_corpus_arguments<T: Scalar>(
    model: &CnnModel<T>,
    corpus: &Corpus,
    triggers: &[Prediction],
) -> Result<Vec<Prediction>> {
    let mut by_sentence: HashMap<(&str, usize), Vec<TriggerSpan>> = HashMap::new();
    for t in triggers.iter().filter(|t| !t.is_argument()) {
        by_sentence.entry((t.doc_id.as_str(), t.sentence)).or_default().push(TriggerSpan {
            s: t.s,
            e: t.e,
            event_type: t.label.clone(),
        });
    }
    let per_sentence: Vec<Vec<Prediction>> = corpus
        .sentences()
        .collect::<Vec<_>>()
        .par_iter()
        .map(|(d, i, s)| match by_sentence.get(&(*d, *i)) {
            Some(ts) => predict_arguments(model, d, *i, s, ts),
            None => Ok(Vec::new()),
        })
        .collect::<Result<_>>()?;
    Ok(per_sentence.into_iter().flatten().collect())
}

/// Decodes prepared candidates (labels ignored), in candidate order.
pub fn predict_argument_candidates<T: Scalar>(
    model: &CnnModel<T>,
    corpus: &Corpus,
    candidates: &[ArgumentCandidate],
) -> Result<Vec<Prediction>> {
    model.expect_task(Task::Argument)?;
    let decoded: Vec<Option<Prediction>> = candidates
        .par_iter()
        .map(|c| {
            let sentence = sentence_for(corpus, &c.doc_id, c.sentence)?;
            let anchor = trigger_anchor(sentence, c.trigger_s, c.trigger_e)?;
            let mention = Mention {
                s: c.s,
                e: c.e,
                kind: c.mention_kind,
                label: String::new(),
            };
            let x = featurize_argument(&model.vocab, sentence, anchor, &mention)?;
            let (l, p) = model.classify(&x, Some(c.mention_kind))?;
            Ok((l != 0).then(|| Prediction {
                doc_id: c.doc_id.clone(),
                sentence: c.sentence,
                s: c.s,
                e: c.e,
                label: model.labels[l].clone(),
                conf: p.to_f64_lossy(),
                trigger_s: Some(c.trigger_s),
                trigger_e: Some(c.trigger_e),
                event_type: Some(c.event_type.clone()),
            }))
        })
        .collect::<Result<_>>()?;
    Ok(decoded.into_iter().flatten().collect())
}

/// Gold triggers of `corpus` in prediction form (confidence 1).
pub fn gold_trigger_predictions(corpus: &Corpus) -> Vec<Prediction> {
    corpus
        .sentences()
        .flat_map(|(d, i, s)| {
            s.gold_triggers.iter().map(move |g| Prediction {
                doc_id: d.to_string(),
                sentence: i,
                s: g.s,
                e: g.e,
                label: g.event_type.clone(),
                conf: 1.0,
                trigger_s: None,
                trigger_e: None,
                event_type: None,
            })
        })
        .collect()
}

/// Probability vector for one instance, exposed for inspection.
pub fn label_distribution<T: Scalar>(model: &CnnModel<T>, x: &Instance) -> Result<Vec<(String, f64)>> {
    let logits = model.net.forward(x, None)?.logits;
    Ok(model
        .labels
        .iter()
        .cloned()
        .zip(softmax(&logits).into_iter().map(Scalar::to_f64_lossy))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embeddings::random_table;

    fn relief() -> Sentence {
        Sentence::from_text("The government spent money on relief and recovery efforts.")
    }

    #[test]
    fn figure_sentence_distances() {
        let s = relief();
        let vocab = Vocabulary::default();
        let x = featurize_trigger(&vocab, &s, 5).unwrap();
        assert_eq!(s.tokens[4].text, "on");
        assert_eq!(x.pf_trigger[4], -1);
        assert_eq!(s.tokens[7].text, "recovery");
        assert_eq!(x.pf_trigger[7], 2);
        assert_eq!(x.pf_trigger[5], 0);
        assert_eq!(x.lexical.len(), 3);
    }

    #[test]
    fn distances_clamp() {
        let text: Vec<String> = (0..100).map(|i| format!("w{i}")).collect();
        let s = Sentence::from_text(&text.join(" "));
        let x = featurize_trigger(&Vocabulary::default(), &s, 0).unwrap();
        assert_eq!(x.pf_trigger[99], 30);
        assert_eq!(x.lexical[0], WordRef::Pad);
    }

    #[test]
    fn argument_channels() {
        let s = Sentence::from_text("21 people were wounded in Tuesday's southern Philippines airport blast.");
        let airport = Mention { s: 57, e: 64, kind: MentionKind::Entity, label: String::new() };
        assert_eq!(&s.text[57..64], "airport");
        let x = featurize_argument(&Vocabulary::default(), &s, 3, &airport).unwrap();
        let arg = x.pf_arg.as_ref().unwrap();
        assert_eq!(arg[8], 0);
        assert_eq!(x.pf_trigger[3], 0);
        assert_eq!(x.lexical.len(), 6);
        let bad = Mention { s: 58, ..airport };
        assert!(featurize_argument(&Vocabulary::default(), &s, 3, &bad).is_err());
    }

    #[test]
    fn vocabulary_keeps_intersection() {
        let table = random_table::<f64>(&["relief", "money", "unused"], 4, 3).unwrap();
        let (v, m) = Vocabulary::build(&table, ["Relief", "money", "cash"]);
        assert_eq!(v.len(), 2);
        assert_eq!(m.shape(), &[2, 4]);
        assert_eq!(v.lookup("RELIEF"), WordRef::Known(1));
        assert_eq!(v.lookup("cash"), WordRef::Unk);
        assert_eq!(m.row(0), table.get("money").unwrap());
    }

    #[test]
    fn grid_enumeration() {
        let c = TrainConfig::default();
        assert_eq!(c.points().len(), 48);
        let empty = TrainConfig { filters: vec![], ..c };
        assert!(empty.validate().is_err());
    }

    #[test]
    fn prediction_json_shape() {
        let p = Prediction {
            doc_id: "d".into(),
            sentence: 0,
            s: 1,
            e: 2,
            label: "Attack".into(),
            conf: 0.5,
            trigger_s: None,
            trigger_e: None,
            event_type: None,
        };
        assert_eq!(
            serde_json::to_string(&p).unwrap(),
            r#"{"doc_id":"d","sentence":0,"s":1,"e":2,"label":"Attack","conf":0.5}"#
        );
    }
}
