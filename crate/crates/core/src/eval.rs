//! Exact-offset scoring, leave-one-out folds over event-type groups, the
//! experiment-arm runner and audit sampling.
//!
//! A trigger prediction matches a gold trigger when document, sentence,
//! offsets and event type agree. An argument matches when document,
//! sentence, argument offsets, event type and role agree. By default every
//! gold item can be consumed once; [`MatchMode::Any`] lets any number of
//! predictions match the same gold item.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, DatasetSplit, Part};
use crate::distsup::{self, ArgumentCandidate, Judgment, TriggerExample};
use crate::embeddings::load_embeddings;
use crate::error::{Error, Result, StageExt};
use crate::io;
use crate::models::{self, Prediction, Prf, Task, TrainConfig, Vocabulary};
use crate::neuralnet::Tensor;
use crate::rolemap::{RoleMapping, ACTOR, NONE, PLACE, TIME};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MatchMode {
    #[default]
    OneToOne,
    Any,
}

impl FromStr for MatchMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "one-to-one" => Ok(MatchMode::OneToOne),
            "any" => Ok(MatchMode::Any),
            _ => Err(Error::invalid(format!("unknown match mode {s:?} (expected one-to-one or any)"))),
        }
    }
}

impl fmt::Display for MatchMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MatchMode::OneToOne => "one-to-one",
            MatchMode::Any => "any",
        })
    }
}

/// Scoring key. `role` is set for arguments only.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ScoreItem {
    pub doc_id: String,
    pub sentence: usize,
    pub s: usize,
    pub e: usize,
    pub event_type: String,
    pub role: Option<String>,
}

impl ScoreItem {
    /// Breakdown label: the role for arguments, else the event type.
    pub fn label(&self) -> &str {
        self.role.as_deref().unwrap_or(&self.event_type)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Counts {
    pub predicted: usize,
    pub gold: usize,
    /// Predictions that found a gold partner.
    pub matched: usize,
    /// Gold items that found a prediction; equals `matched` one-to-one.
    pub matched_gold: usize,
}

impl Counts {
    pub fn prf(&self) -> Prf {
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let p = ratio(self.matched, self.predicted);
        let r = ratio(self.matched_gold, self.gold);
        let f1 = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
        Prf { p, r, f1 }
    }

    fn add(&mut self, other: &Counts) {
        self.predicted += other.predicted;
        self.gold += other.gold;
        self.matched += other.matched;
        self.matched_gold += other.matched_gold;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub overall: Prf,
    pub per_label: BTreeMap<String, Prf>,
    pub counts: Counts,
}

impl ScoreReport {
    /// Adds zero rows for labels that never occurred.
    pub fn with_labels<S: AsRef<str>>(mut self, labels: &[S]) -> Self {
        for l in labels {
            self.per_label.entry(l.as_ref().to_string()).or_default();
        }
        self
    }
}

fn count_matches(pred: &[&ScoreItem], gold: &[&ScoreItem], mode: MatchMode) -> Counts {
    let mut counts = Counts {
        predicted: pred.len(),
        gold: gold.len(),
        ..Counts::default()
    };
    match mode {
        MatchMode::OneToOne => {
            let mut available: HashMap<&ScoreItem, usize> = HashMap::new();
            for g in gold {
                *available.entry(g).or_insert(0) += 1;
            }
            for p in pred {
                if let Some(n) = available.get_mut(p).filter(|n| **n > 0) {
                    *n -= 1;
                    counts.matched += 1;
                }
            }
            counts.matched_gold = counts.matched;
        }
        MatchMode::Any => {
            let g: HashSet<&ScoreItem> = gold.iter().copied().collect();
            let p: HashSet<&ScoreItem> = pred.iter().copied().collect();
            counts.matched = pred.iter().filter(|x| g.contains(*x)).count();
            counts.matched_gold = gold.iter().filter(|x| p.contains(*x)).count();
        }
    }
    counts
}

/// Micro scores overall and per label.
pub fn score_items(pred: &[ScoreItem], gold: &[ScoreItem], mode: MatchMode) -> ScoreReport {
    let all_p: Vec<&ScoreItem> = pred.iter().collect();
    let all_g: Vec<&ScoreItem> = gold.iter().collect();
    let counts = count_matches(&all_p, &all_g, mode);
    let labels: BTreeSet<&str> = pred.iter().chain(gold).map(ScoreItem::label).collect();
    let per_label = labels
        .into_iter()
        .map(|l| {
            let p: Vec<&ScoreItem> = pred.iter().filter(|x| x.label() == l).collect();
            let g: Vec<&ScoreItem> = gold.iter().filter(|x| x.label() == l).collect();
            (l.to_string(), count_matches(&p, &g, mode).prf())
        })
        .collect();
    ScoreReport {
        overall: counts.prf(),
        per_label,
        counts,
    }
}

pub fn trigger_items(predictions: &[Prediction]) -> Vec<ScoreItem> {
    predictions
        .iter()
        .filter(|p| !p.is_argument())
        .map(|p| ScoreItem {
            doc_id: p.doc_id.clone(),
            sentence: p.sentence,
            s: p.s,
            e: p.e,
            event_type: p.label.clone(),
            role: None,
        })
        .collect()
}

pub fn gold_trigger_items(corpus: &Corpus) -> Vec<ScoreItem> {
    trigger_items(&models::gold_trigger_predictions(corpus))
}

fn generic(label: &str, event_type: &str, mapping: Option<&RoleMapping>) -> Option<String> {
    match mapping {
        Some(m) => m.canonical(label, event_type).map(|r| r.as_str().to_string()),
        None => Some(label.to_string()),
    }
}

/// Argument predictions as score items. With a mapping, roles are mapped
/// to Actor/Place/Time and unmapped roles dropped.
pub fn argument_items(predictions: &[Prediction], mapping: Option<&RoleMapping>) -> Result<Vec<ScoreItem>> {
    let mut out = Vec::new();
    for p in predictions.iter().filter(|p| p.is_argument()) {
        let event_type = p.event_type.clone().ok_or_else(|| {
            Error::Validation(format!(
                "argument prediction {}#{} {}..{} has no event type",
                p.doc_id, p.sentence, p.s, p.e
            ))
        })?;
        if let Some(role) = generic(&p.label, &event_type, mapping) {
            out.push(ScoreItem {
                doc_id: p.doc_id.clone(),
                sentence: p.sentence,
                s: p.s,
                e: p.e,
                event_type,
                role: Some(role),
            });
        }
    }
    Ok(out)
}

/// Gold arguments of the corpus; the event type comes from the gold trigger
/// the argument attaches to.
pub fn gold_argument_items(corpus: &Corpus, mapping: Option<&RoleMapping>) -> Vec<ScoreItem> {
    let mut out = Vec::new();
    for (doc_id, index, sentence) in corpus.sentences() {
        for a in &sentence.gold_arguments {
            let Some(event_type) = sentence.gold_trigger_type(a.trigger_s, a.trigger_e) else { continue };
            if let Some(role) = generic(&a.role, event_type, mapping) {
                out.push(ScoreItem {
                    doc_id: doc_id.to_string(),
                    sentence: index,
                    s: a.s,
                    e: a.e,
                    event_type: event_type.to_string(),
                    role: Some(role),
                });
            }
        }
    }
    out
}

/// Labelled candidates (NONE excluded) as gold score items.
pub fn candidate_items(candidates: &[ArgumentCandidate]) -> Vec<ScoreItem> {
    candidates
        .iter()
        .filter_map(|c| {
            let role = c.label.as_ref().filter(|l| l.as_str() != NONE)?;
            Some(ScoreItem {
                doc_id: c.doc_id.clone(),
                sentence: c.sentence,
                s: c.s,
                e: c.e,
                event_type: c.event_type.clone(),
                role: Some(role.clone()),
            })
        })
        .collect()
}

pub fn score_triggers(predictions: &[Prediction], gold: &Corpus, mode: MatchMode) -> ScoreReport {
    score_items(&trigger_items(predictions), &gold_trigger_items(gold), mode)
}

/// Argument scores; with a mapping both sides are mapped and the report
/// always lists Actor, Place and Time.
pub fn score_arguments(
    predictions: &[Prediction],
    gold: &Corpus,
    mapping: Option<&RoleMapping>,
    mode: MatchMode,
) -> Result<ScoreReport> {
    let report = score_items(&argument_items(predictions, mapping)?, &gold_argument_items(gold, mapping), mode);
    Ok(match mapping {
        Some(_) => report.with_labels(&[ACTOR, PLACE, TIME]),
        None => report,
    })
}

/// Event type → group id.
pub type Grouping = BTreeMap<String, String>;

pub fn load_grouping(path: &Path) -> Result<Grouping> {
    io::read_json(path)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Fold {
    pub group: String,
    /// Indices into the training candidates.
    pub train: Vec<usize>,
    pub dev: Vec<usize>,
    /// Indices into the evaluation candidates.
    pub eval: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FoldPlan {
    pub grouping: Grouping,
    pub folds: Vec<Fold>,
    /// Groups without evaluation examples.
    pub skipped: Vec<String>,
}

fn group_of<'a>(grouping: &'a Grouping, event_type: &str) -> Result<&'a str> {
    grouping
        .get(event_type)
        .map(String::as_str)
        .ok_or_else(|| Error::Validation(format!("event type {event_type:?} is missing from the grouping")))
}

/// One fold per group: train and tune without any candidate of the group,
/// evaluate only on it. Groups with nothing to evaluate are skipped.
pub fn plan_folds(
    train: &[ArgumentCandidate],
    dev: &[ArgumentCandidate],
    eval: &[ArgumentCandidate],
    grouping: &Grouping,
) -> Result<FoldPlan> {
    let groups: BTreeSet<&str> = grouping.values().map(String::as_str).collect();
    if groups.len() < 2 {
        return Err(Error::invalid("leave-one-out needs at least two groups"));
    }
    let tag = |cs: &[ArgumentCandidate]| -> Result<Vec<&str>> {
        cs.iter().map(|c| group_of(grouping, &c.event_type)).collect()
    };
    let (train_g, dev_g, eval_g) = (tag(train)?, tag(dev)?, tag(eval)?);
    let mut folds = Vec::new();
    let mut skipped = Vec::new();
    for g in groups {
        let pick = |tags: &[&str], keep: bool| -> Vec<usize> {
            tags.iter().enumerate().filter(|(_, t)| (**t == g) == keep).map(|(i, _)| i).collect()
        };
        let eval = pick(&eval_g, true);
        if eval.is_empty() {
            log::warn!("group {g}: no evaluation examples, fold skipped");
            skipped.push(g.to_string());
            continue;
        }
        folds.push(Fold {
            group: g.to_string(),
            train: pick(&train_g, false),
            dev: pick(&dev_g, false),
            eval,
        });
    }
    Ok(FoldPlan {
        grouping: grouping.clone(),
        folds,
        skipped,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FoldResult {
    pub group: String,
    pub report: ScoreReport,
    pub predictions: Vec<Prediction>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LooReport {
    pub plan: FoldPlan,
    pub folds: Vec<FoldResult>,
    /// Counts pooled over folds.
    pub pooled: ScoreReport,
}

/// Everything an argument model needs besides its examples.
pub struct ArgumentSetup<'a, T> {
    pub corpus: &'a Corpus,
    pub vocab: &'a Vocabulary,
    pub words: &'a Tensor<T>,
    pub config: &'a TrainConfig,
    pub mode: MatchMode,
}

fn subset(cs: &[ArgumentCandidate], idx: &[usize]) -> Vec<ArgumentCandidate> {
    idx.iter().map(|&i| cs[i].clone()).collect()
}

/// Trains and scores every fold of `plan_folds`. Candidate labels should
/// already be in the label space being evaluated.
pub fn leave_one_out<T: Scalar>(
    setup: &ArgumentSetup<'_, T>,
    train: &[ArgumentCandidate],
    dev: &[ArgumentCandidate],
    eval: &[ArgumentCandidate],
    grouping: &Grouping,
) -> Result<LooReport> {
    let plan = plan_folds(train, dev, eval, grouping)?;
    let folds: Vec<FoldResult> = plan
        .folds
        .par_iter()
        .map(|fold| {
            let stage = format!("fold {}", fold.group);
            let train_x = models::argument_instances(setup.corpus, &subset(train, &fold.train), setup.vocab)
                .stage(&stage)?;
            let dev_x =
                models::argument_instances(setup.corpus, &subset(dev, &fold.dev), setup.vocab).stage(&stage)?;
            let (model, _) = models::train(
                Task::Argument,
                setup.vocab.clone(),
                setup.words.clone(),
                &train_x,
                &dev_x,
                setup.config,
            )
            .stage(&stage)?;
            let eval_c = subset(eval, &fold.eval);
            let predictions = models::predict_argument_candidates(&model, setup.corpus, &eval_c).stage(&stage)?;
            let report = score_items(&argument_items(&predictions, None)?, &candidate_items(&eval_c), setup.mode);
            Ok(FoldResult {
                group: fold.group.clone(),
                report,
                predictions,
            })
        })
        .collect::<Result<_>>()?;
    let pooled = pool(&folds, setup.mode, eval, &plan)?;
    Ok(LooReport { plan, folds, pooled })
}

fn pool(folds: &[FoldResult], mode: MatchMode, eval: &[ArgumentCandidate], plan: &FoldPlan) -> Result<ScoreReport> {
    let mut counts = Counts::default();
    for f in folds {
        counts.add(&f.report.counts);
    }
    // Per-label figures come from the union, which pools the same counts
    // because folds share no event type.
    let preds: Vec<Prediction> = folds.iter().flat_map(|f| f.predictions.clone()).collect();
    let gold: Vec<ArgumentCandidate> = plan.folds.iter().flat_map(|f| subset(eval, &f.eval)).collect();
    let union = score_items(&argument_items(&preds, None)?, &candidate_items(&gold), mode);
    debug_assert_eq!(union.counts, counts);
    Ok(ScoreReport {
        overall: counts.prf(),
        per_label: union.per_label,
        counts,
    })
}

/// One row of an experiment table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmReport {
    pub arm: String,
    pub overall: Prf,
    pub per_label: BTreeMap<String, Prf>,
    pub counts: Counts,
}

impl ArmReport {
    pub fn new(arm: &str, report: ScoreReport) -> Self {
        ArmReport {
            arm: arm.to_string(),
            overall: report.overall,
            per_label: report.per_label,
            counts: report.counts,
        }
    }
}

/// Aligned text table: arm, overall P/R/F1, then F1 per label.
pub fn format_table(rows: &[ArmReport], labels: &[String]) -> String {
    let arm_w = rows.iter().map(|r| r.arm.len()).chain([3]).max().unwrap_or(3);
    let label_w: Vec<usize> = labels.iter().map(|l| l.len().max(5)).collect();
    let mut out = String::new();
    let _ = write!(out, "{:<arm_w$}  {:>5}  {:>5}  {:>5}", "arm", "P", "R", "F1");
    for (l, w) in labels.iter().zip(&label_w) {
        let _ = write!(out, "  {l:>w$}");
    }
    out.push('\n');
    for r in rows {
        let _ = write!(
            out,
            "{:<arm_w$}  {:>5.2}  {:>5.2}  {:>5.2}",
            r.arm, r.overall.p, r.overall.r, r.overall.f1
        );
        for (l, w) in labels.iter().zip(&label_w) {
            let f1 = r.per_label.get(l).map_or(0.0, |s| s.f1);
            let _ = write!(out, "  {f1:>w$.2}");
        }
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ArmKind {
    /// Train on every distant-supervision example.
    Distant,
    /// Train on the examples kept by adjudication.
    Adjudicated,
    /// Distant examples from as many documents as adjudication kept.
    Downsampled,
    /// Train on raw roles, map predictions and gold afterwards.
    NormalMapped,
    /// Map roles before training.
    PreMapped,
    /// Pre-mapped, holding out one event-type group per fold.
    LeaveOneOut,
}

impl ArmKind {
    pub const ALL: [ArmKind; 6] = [
        ArmKind::Distant,
        ArmKind::Adjudicated,
        ArmKind::Downsampled,
        ArmKind::NormalMapped,
        ArmKind::PreMapped,
        ArmKind::LeaveOneOut,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ArmKind::Distant => "distant",
            ArmKind::Adjudicated => "adjudicated",
            ArmKind::Downsampled => "downsampled",
            ArmKind::NormalMapped => "normal-mapped",
            ArmKind::PreMapped => "pre-mapped",
            ArmKind::LeaveOneOut => "leave-one-out",
        }
    }

    pub fn is_trigger(self) -> bool {
        matches!(self, ArmKind::Distant | ArmKind::Adjudicated | ArmKind::Downsampled)
    }
}

/// Where trigger models get their development data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DevSource {
    /// Every token of the dev documents, labelled from gold triggers.
    #[default]
    Gold,
    /// The distant-supervision examples that fall in dev documents.
    Examples,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriggerArms {
    pub examples: PathBuf,
    #[serde(default)]
    pub judgments: Option<PathBuf>,
    #[serde(default)]
    pub dev: DevSource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArgumentArms {
    #[serde(default)]
    pub mapping: Option<PathBuf>,
    #[serde(default)]
    pub grouping: Option<PathBuf>,
}

fn all_arms() -> Vec<ArmKind> {
    ArmKind::ALL.to_vec()
}

/// Experiment configuration. Relative paths resolve against the directory
/// of the configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmSuite {
    pub corpus: PathBuf,
    pub split: PathBuf,
    pub embeddings: PathBuf,
    #[serde(default)]
    pub grid: TrainConfig,
    #[serde(default)]
    pub matching: MatchMode,
    #[serde(default)]
    pub trigger: Option<TriggerArms>,
    #[serde(default)]
    pub argument: Option<ArgumentArms>,
    #[serde(default = "all_arms")]
    pub arms: Vec<ArmKind>,
    /// Directory for `triggers.jsonl` and `arguments.jsonl`.
    #[serde(default)]
    pub out: Option<PathBuf>,
}

impl ArmSuite {
    pub fn load(path: &Path) -> Result<Self> {
        let mut suite: ArmSuite = io::read_json(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut suite.corpus);
        fix(&mut suite.split);
        fix(&mut suite.embeddings);
        if let Some(t) = &mut suite.trigger {
            fix(&mut t.examples);
            if let Some(j) = &mut t.judgments {
                fix(j);
            }
        }
        if let Some(a) = &mut suite.argument {
            if let Some(m) = &mut a.mapping {
                fix(m);
            }
            if let Some(g) = &mut a.grouping {
                fix(g);
            }
        }
        if let Some(o) = &mut suite.out {
            fix(o);
        }
        Ok(suite)
    }
}

pub fn load_judgments(path: &Path) -> Result<BTreeMap<String, Judgment>> {
    io::read_json(path)
}

/// Inputs shared by every arm, loaded once.
pub struct ArmContext {
    pub suite: ArmSuite,
    pub corpus: Corpus,
    pub split: DatasetSplit,
    pub vocab: Vocabulary,
    pub words: Tensor<f64>,
}

impl ArmContext {
    pub fn load(suite: ArmSuite) -> Result<Self> {
        let corpus = crate::corpus::load_corpus(&suite.corpus).stage("load corpus")?;
        let split = DatasetSplit::load(&suite.split).stage("load split")?;
        let table = load_embeddings::<f64>(&suite.embeddings).stage("load embeddings")?;
        let (vocab, words) = Vocabulary::for_corpus(&table, &corpus);
        Ok(ArmContext {
            suite,
            corpus,
            split,
            vocab,
            words,
        })
    }

    fn part(&self, part: Part) -> Corpus {
        self.corpus.restrict(&self.split.ids(part))
    }

    fn trigger_arms(&self) -> Result<&TriggerArms> {
        self.suite
            .trigger
            .as_ref()
            .ok_or_else(|| Error::invalid("trigger arms need a \"trigger\" section"))
    }

    fn mapping(&self) -> Result<RoleMapping> {
        match self.suite.argument.as_ref().and_then(|a| a.mapping.as_ref()) {
            Some(p) => RoleMapping::load(p).stage("load role mapping"),
            None => Ok(RoleMapping::default()),
        }
    }

    fn train_trigger(&self, examples: &[TriggerExample]) -> Result<ArmReport> {
        let arms = self.trigger_arms()?;
        let train_ids = self.split.ids(Part::Train);
        let train: Vec<TriggerExample> =
            examples.iter().filter(|e| train_ids.contains(&e.doc_id)).cloned().collect();
        let train_x = models::trigger_instances(&self.corpus, &train, &self.vocab).stage("featurize")?;
        let dev_x = match arms.dev {
            DevSource::Gold => models::gold_trigger_instances(&self.part(Part::Dev), &self.vocab),
            DevSource::Examples => {
                let dev_ids = self.split.ids(Part::Dev);
                let dev: Vec<TriggerExample> =
                    examples.iter().filter(|e| dev_ids.contains(&e.doc_id)).cloned().collect();
                models::trigger_instances(&self.corpus, &dev, &self.vocab)
            }
        }
        .stage("featurize dev")?;
        let (model, _) = models::train(
            Task::Trigger,
            self.vocab.clone(),
            self.words.clone(),
            &train_x,
            &dev_x,
            &self.suite.grid,
        )
        .stage("train")?;
        let test = self.part(Part::Test);
        let predictions = models::predict_corpus_triggers(&model, &test).stage("predict")?;
        let report = score_triggers(&predictions, &test, self.suite.matching);
        Ok(ArmReport::new("", report))
    }

    fn argument_candidates(&self, part: Part, mapping: Option<&RoleMapping>) -> Vec<ArgumentCandidate> {
        distsup::gold_argument_candidates(&self.part(part), mapping)
    }

    fn argument_setup(&self) -> ArgumentSetup<'_, f64> {
        ArgumentSetup {
            corpus: &self.corpus,
            vocab: &self.vocab,
            words: &self.words,
            config: &self.suite.grid,
            mode: self.suite.matching,
        }
    }

    fn train_argument(&self, mapping: &RoleMapping, pre_map: bool) -> Result<ArmReport> {
        let pre = pre_map.then_some(mapping);
        let train = self.argument_candidates(Part::Train, pre);
        let dev = self.argument_candidates(Part::Dev, pre);
        let train_x = models::argument_instances(&self.corpus, &train, &self.vocab).stage("featurize")?;
        let dev_x = models::argument_instances(&self.corpus, &dev, &self.vocab).stage("featurize dev")?;
        let (model, _) = models::train(
            Task::Argument,
            self.vocab.clone(),
            self.words.clone(),
            &train_x,
            &dev_x,
            &self.suite.grid,
        )
        .stage("train")?;
        let test = self.part(Part::Test);
        let candidates = self.argument_candidates(Part::Test, None);
        let predictions = models::predict_argument_candidates(&model, &self.corpus, &candidates).stage("predict")?;
        let report = score_arguments(&predictions, &test, Some(mapping), self.suite.matching)?;
        Ok(ArmReport::new("", report))
    }

    /// Runs a single arm.
    pub fn run_arm(&self, arm: ArmKind) -> Result<ArmReport> {
        let mut row = match arm {
            ArmKind::Distant | ArmKind::Adjudicated | ArmKind::Downsampled => {
                let arms = self.trigger_arms()?;
                let distant = distsup::read_trigger_examples(&arms.examples).stage("load examples")?;
                let distant_docs = distsup::positive_documents(&distant);
                let judged = || -> Result<Vec<TriggerExample>> {
                    let path = arms
                        .judgments
                        .as_ref()
                        .ok_or_else(|| Error::invalid("adjudicated arms need \"judgments\""))?;
                    let judgments = load_judgments(path).stage("load judgments")?;
                    distsup::adjudicate(&distant, &judgments).stage("adjudicate")
                };
                let examples = match arm {
                    ArmKind::Distant => distsup::restrict_to_documents(&distant, &distant_docs),
                    ArmKind::Adjudicated => {
                        let kept = judged()?;
                        distsup::restrict_to_documents(&kept, &distsup::positive_documents(&kept))
                    }
                    _ => {
                        let target = distsup::positive_documents(&judged()?).len();
                        let pool: Vec<String> = distant_docs.iter().cloned().collect();
                        let docs = distsup::sample_documents(&pool, target, self.suite.grid.seed)
                            .stage("downsample")?;
                        distsup::restrict_to_documents(&distant, &docs)
                    }
                };
                self.train_trigger(&examples)?
            }
            ArmKind::NormalMapped => self.train_argument(&self.mapping()?, false)?,
            ArmKind::PreMapped => self.train_argument(&self.mapping()?, true)?,
            ArmKind::LeaveOneOut => {
                let mapping = self.mapping()?;
                let path = self
                    .suite
                    .argument
                    .as_ref()
                    .and_then(|a| a.grouping.as_ref())
                    .ok_or_else(|| Error::invalid("leave-one-out needs \"argument.grouping\""))?;
                let grouping = load_grouping(path).stage("load grouping")?;
                let train = self.argument_candidates(Part::Train, Some(&mapping));
                let dev = self.argument_candidates(Part::Dev, Some(&mapping));
                let eval = self.argument_candidates(Part::Test, Some(&mapping));
                let loo = leave_one_out(&self.argument_setup(), &train, &dev, &eval, &grouping)?;
                ArmReport::new("", loo.pooled.with_labels(&[ACTOR, PLACE, TIME]))
            }
        };
        row.arm = arm.name().to_string();
        Ok(row)
    }
}

/// Reports of a suite, split into the trigger and argument tables.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub triggers: Vec<ArmReport>,
    pub arguments: Vec<ArmReport>,
}

impl SuiteReport {
    /// Both tables as aligned text.
    pub fn render(&self) -> String {
        let mut out = String::new();
        if !self.triggers.is_empty() {
            let labels: BTreeSet<String> =
                self.triggers.iter().flat_map(|r| r.per_label.keys().cloned()).collect();
            out.push_str("Triggers\n");
            out.push_str(&format_table(&self.triggers, &labels.into_iter().collect::<Vec<_>>()));
        }
        if !self.arguments.is_empty() {
            if !out.is_empty() {
                out.push('\n');
            }
            out.push_str("Arguments\n");
            let labels = [ACTOR, PLACE, TIME].map(String::from);
            out.push_str(&format_table(&self.arguments, &labels));
        }
        out
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        io::write_jsonl(&dir.join("triggers.jsonl"), &self.triggers)?;
        io::write_jsonl(&dir.join("arguments.jsonl"), &self.arguments)
    }
}

/// Runs every arm of the suite in order, writing the tables to `out` when
/// configured.
pub fn run_suite(suite: ArmSuite) -> Result<SuiteReport> {
    let ctx = ArmContext::load(suite)?;
    let mut report = SuiteReport {
        triggers: Vec::new(),
        arguments: Vec::new(),
    };
    for &arm in &ctx.suite.arms {
        let row = ctx.run_arm(arm).stage(&format!("arm {}", arm.name()))?;
        if arm.is_trigger() {
            report.triggers.push(row);
        } else {
            report.arguments.push(row);
        }
    }
    if let Some(dir) = &ctx.suite.out {
        report.save(dir)?;
    }
    Ok(report)
}

/// Default role quotas for auditing argument predictions.
pub fn default_audit_quotas() -> BTreeMap<String, usize> {
    BTreeMap::from([(ACTOR.to_string(), 78), (PLACE.to_string(), 8), (TIME.to_string(), 14)])
}

/// Seeded sample of predictions for manual review, in input order. With
/// quotas, each label contributes up to its quota; otherwise `n` are drawn
/// uniformly.
pub fn sample_for_audit(
    predictions: &[Prediction],
    n: usize,
    quotas: &BTreeMap<String, usize>,
    seed: u64,
) -> Result<Vec<Prediction>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen: Vec<usize> = Vec::new();
    if quotas.is_empty() {
        chosen = rand::seq::index::sample(&mut rng, predictions.len(), n.min(predictions.len())).into_vec();
    } else {
        let total: usize = quotas.values().sum();
        if total != n {
            return Err(Error::invalid(format!("quotas add up to {total}, expected {n}")));
        }
        for (label, &q) in quotas {
            let pool: Vec<usize> = (0..predictions.len()).filter(|&i| &predictions[i].label == label).collect();
            if pool.len() < q {
                log::warn!("only {} {label} predictions available for a quota of {q}", pool.len());
            }
            let picked = rand::seq::index::sample(&mut rng, pool.len(), q.min(pool.len()));
            chosen.extend(picked.into_iter().map(|i| pool[i]));
        }
    }
    chosen.sort_unstable();
    Ok(chosen.into_iter().map(|i| predictions[i].clone()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(ty: &str, s: usize, e: usize) -> ScoreItem {
        ScoreItem {
            doc_id: "d".into(),
            sentence: 0,
            s,
            e,
            event_type: ty.into(),
            role: None,
        }
    }

    #[test]
    fn exact_and_mismatch() {
        let r = score_items(&[t("Attack", 10, 15)], &[t("Attack", 10, 15)], MatchMode::OneToOne);
        assert_eq!((r.overall.p, r.overall.r, r.overall.f1), (1.0, 1.0, 1.0));
        let r = score_items(&[t("Injury", 10, 15)], &[t("Attack", 10, 15)], MatchMode::OneToOne);
        assert_eq!(r.overall.f1, 0.0);
    }

    #[test]
    fn partial_overlap_example() {
        let pred = [t("A", 0, 3), t("B", 5, 8)];
        let gold = [t("A", 0, 3), t("C", 5, 8), t("B", 9, 12)];
        let r = score_items(&pred, &gold, MatchMode::OneToOne);
        assert_eq!(r.overall.p, 0.5);
        assert!((r.overall.r - 1.0 / 3.0).abs() < 1e-15);
        assert!((r.overall.f1 - 0.4).abs() < 1e-15);
    }

    #[test]
    fn duplicates_differ_by_mode() {
        let pred = [t("A", 0, 3), t("A", 0, 3)];
        let gold = [t("A", 0, 3)];
        let one = score_items(&pred, &gold, MatchMode::OneToOne);
        assert_eq!(one.overall.p, 0.5);
        let any = score_items(&pred, &gold, MatchMode::Any);
        assert_eq!(any.overall.p, 1.0);
        assert_eq!(any.overall.r, 1.0);
    }

    #[test]
    fn audit_quotas() {
        let preds: Vec<Prediction> = (0..30)
            .map(|i| Prediction {
                doc_id: "d".into(),
                sentence: i,
                s: 0,
                e: 1,
                label: [ACTOR, PLACE, TIME][i % 3].into(),
                conf: 0.9,
                trigger_s: Some(0),
                trigger_e: Some(1),
                event_type: Some("Attack".into()),
            })
            .collect();
        let q = BTreeMap::from([(ACTOR.to_string(), 5), (TIME.to_string(), 2)]);
        let s = sample_for_audit(&preds, 7, &q, 3).unwrap();
        assert_eq!(s.iter().filter(|p| p.label == ACTOR).count(), 5);
        assert_eq!(s.iter().filter(|p| p.label == TIME).count(), 2);
        assert!(sample_for_audit(&preds, 8, &q, 3).is_err());
        assert_eq!(sample_for_audit(&preds, 100, &BTreeMap::new(), 3).unwrap().len(), 30);
    }

    #[test]
    fn arm_row_json_keys() {
        let row = ArmReport::new("distant", score_items(&[], &[], MatchMode::OneToOne));
        let v = serde_json::to_value(&row).unwrap();
        for k in ["arm", "overall", "per_label", "counts"] {
            assert!(v.get(k).is_some(), "{k}");
        }
        assert!(v["overall"].get("f1").is_some());
    }
}
