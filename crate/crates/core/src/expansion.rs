//! Per-event-type trigger lexicons: human seeds, candidates proposed by
//! embedding similarity and WordNet hyponymy, and the accept/reject/move
//! decisions that turn them into the final trigger set.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use chrono::{DateTime, SecondsFormat, SubsecRound, Utc};
use serde::{Deserialize, Serialize};

use crate::embeddings::{nearest_neighbors, EmbeddingTable};
use crate::error::{Error, Result};
use crate::io;
use crate::scalar::Scalar;
use crate::wordnet::{Pos, WordNetDb};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Seed,
    Embedding,
    Wordnet,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pending,
    Accepted,
    Rejected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriggerCandidate {
    pub word: String,
    /// Every source that proposed this word.
    #[serde(rename = "source")]
    pub sources: BTreeSet<Source>,
    /// Best embedding similarity; present iff an embedding source is.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
    pub status: Status,
}

impl TriggerCandidate {
    fn merge_from(&mut self, other: &TriggerCandidate) {
        self.sources.extend(other.sources.iter().copied());
        self.score = match (self.score, other.score) {
            (Some(a), Some(b)) => Some(a.max(b)),
            (a, b) => a.or(b),
        };
    }
}

fn normalize_word(word: &str) -> String {
    word.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriggerLexicon {
    #[serde(skip)]
    pub event_type: String,
    #[serde(with = "candidate_list")]
    pub candidates: BTreeMap<String, TriggerCandidate>,
}

mod candidate_list {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(
        map: &BTreeMap<String, TriggerCandidate>,
        s: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        s.collect_seq(map.values())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> std::result::Result<BTreeMap<String, TriggerCandidate>, D::Error> {
        let list: Vec<TriggerCandidate> = Vec::deserialize(d)?;
        Ok(list.into_iter().map(|c| (c.word.clone(), c)).collect())
    }
}

impl TriggerLexicon {
    pub fn new(event_type: &str) -> Result<Self> {
        if event_type.trim().is_empty() {
            return Err(Error::invalid("event type name must not be empty"));
        }
        Ok(TriggerLexicon {
            event_type: event_type.trim().to_string(),
            candidates: BTreeMap::new(),
        })
    }

    pub fn get(&self, word: &str) -> Option<&TriggerCandidate> {
        self.candidates.get(&normalize_word(word))
    }

    /// Inserts or merges a candidate. New words take `status`; existing
    /// words keep theirs, except that a seed is always accepted.
    fn propose(&mut self, word: &str, source: Source, score: Option<f64>, status: Status) -> bool {
        let word = normalize_word(word);
        if word.is_empty() {
            return false;
        }
        let incoming = TriggerCandidate {
            word: word.clone(),
            sources: BTreeSet::from([source]),
            score,
            status,
        };
        match self.candidates.get_mut(&word) {
            Some(existing) => {
                existing.merge_from(&incoming);
                if source == Source::Seed {
                    existing.status = Status::Accepted;
                }
                false
            }
            None => {
                self.candidates.insert(word, incoming);
                true
            }
        }
    }

    /// Adds seeds as accepted candidates.
    pub fn add_seeds<S: AsRef<str>>(&mut self, keywords: impl IntoIterator<Item = S>) -> usize {
        keywords
            .into_iter()
            .filter(|k| self.propose(k.as_ref(), Source::Seed, None, Status::Accepted))
            .count()
    }

    pub fn seeds(&self) -> impl Iterator<Item = &TriggerCandidate> {
        self.candidates
            .values()
            .filter(|c| c.sources.contains(&Source::Seed) && c.status == Status::Accepted)
    }

    pub fn count(&self, status: Status) -> usize {
        self.candidates.values().filter(|c| c.status == status).count()
    }
}

/// Starts a lexicon from human-provided keywords, lower-cased.
pub fn seed_lexicon<S: AsRef<str>>(event_type: &str, keywords: &[S]) -> Result<TriggerLexicon> {
    let mut lex = TriggerLexicon::new(event_type)?;
    lex.add_seeds(keywords.iter().map(AsRef::as_ref));
    if lex.candidates.is_empty() {
        return Err(Error::invalid(format!("no keywords given for {event_type:?}")));
    }
    Ok(lex)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpansionParams {
    /// Embedding neighbours kept per seed.
    pub k: usize,
    pub min_sim: f64,
    pub max_depth: usize,
}

impl Default for ExpansionParams {
    fn default() -> Self {
        ExpansionParams {
            k: 20,
            min_sim: 0.5,
            max_depth: 1,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExpansionSummary {
    pub added: Vec<String>,
    pub oov_seeds: Vec<String>,
    /// Multi-word seeds, which get no embedding neighbours.
    pub skipped_phrases: Vec<String>,
    pub wordnet_misses: Vec<String>,
}

/// Proposes embedding neighbours of every accepted single-word seed and
/// WordNet hyponyms (noun and verb) of every accepted seed, all pending.
/// Existing candidates are merged, never demoted, so repeated runs on the
/// same inputs change nothing.
pub fn expand<T: Scalar>(
    lexicon: &TriggerLexicon,
    table: &EmbeddingTable<T>,
    db: &WordNetDb,
    params: &ExpansionParams,
) -> Result<(TriggerLexicon, ExpansionSummary)> {
    let seeds: Vec<String> = lexicon.seeds().map(|c| c.word.clone()).collect();
    if seeds.is_empty() {
        return Err(Error::invalid(format!(
            "lexicon {:?} has no accepted seeds to expand",
            lexicon.event_type
        )));
    }
    if params.max_depth == 0 {
        return Err(Error::invalid("max_depth must be at least 1"));
    }
    let mut out = lexicon.clone();
    let mut summary = ExpansionSummary::default();
    for seed in &seeds {
        if seed.contains(' ') {
            summary.skipped_phrases.push(seed.clone());
        } else {
            match nearest_neighbors(table, seed, params.k, params.min_sim) {
                Ok(neighbors) => {
                    for n in neighbors {
                        let sim = n.similarity.to_f64_lossy();
                        if out.propose(&n.word, Source::Embedding, Some(sim), Status::Pending) {
                            summary.added.push(n.word);
                        }
                    }
                }
                Err(Error::OutOfVocabulary(_)) => summary.oov_seeds.push(seed.clone()),
                Err(e) => return Err(e),
            }
        }
        let mut found = false;
        for pos in Pos::ALL {
            found |= db.contains(seed, pos);
            for lemma in db.hyponyms(seed, pos, params.max_depth)? {
                if out.propose(&lemma, Source::Wordnet, None, Status::Pending) {
                    summary.added.push(lemma);
                }
            }
        }
        if !found {
            summary.wordnet_misses.push(seed.clone());
        }
    }
    Ok((out, summary))
}

/// Words of all accepted candidates.
pub fn final_triggers(lexicon: &TriggerLexicon) -> BTreeSet<String> {
    lexicon
        .candidates
        .values()
        .filter(|c| c.status == Status::Accepted)
        .map(|c| c.word.clone())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Decision {
    Accept,
    Reject,
    Move { target: String },
}

impl Decision {
    pub fn parse(decision: &str, target: Option<&str>) -> Result<Self> {
        match (decision, target) {
            ("accept" | "accepted", _) => Ok(Decision::Accept),
            ("reject" | "rejected", _) => Ok(Decision::Reject),
            ("move" | "moved", Some(t)) => Ok(Decision::Move { target: t.to_string() }),
            ("move" | "moved", None) => Err(Error::invalid("move needs a target event type")),
            _ => Err(Error::invalid(format!("unknown decision {decision:?}"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Decision::Accept => "accept",
            Decision::Reject => "reject",
            Decision::Move { .. } => "move",
        }
    }

    pub fn target(&self) -> Option<&str> {
        match self {
            Decision::Move { target } => Some(target),
            _ => None,
        }
    }
}

impl fmt::Display for Decision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Decision::Move { target } => write!(f, "move to {target}"),
            d => f.write_str(d.name()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditEntry {
    #[serde(with = "iso8601")]
    pub ts: DateTime<Utc>,
    #[serde(rename = "type")]
    pub event_type: String,
    pub word: String,
    pub decision: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<String>,
}

mod iso8601 {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(ts: &DateTime<Utc>, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&ts.to_rfc3339_opts(SecondsFormat::Millis, true))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<DateTime<Utc>, D::Error> {
        let raw = String::deserialize(d)?;
        DateTime::parse_from_rfc3339(&raw)
            .map(|t| t.with_timezone(&Utc))
            .map_err(serde::de::Error::custom)
    }
}

impl AuditEntry {
    pub fn decision(&self) -> Result<Decision> {
        Decision::parse(&self.decision, self.target.as_deref())
    }
}

/// A curation session: lexicons per event type, expansion settings and an
/// append-only log of human decisions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "RawProject")]
pub struct Project {
    pub name: String,
    pub config: ExpansionParams,
    pub lexicons: BTreeMap<String, TriggerLexicon>,
    pub audit: Vec<AuditEntry>,
}

#[derive(Deserialize)]
struct RawProject {
    name: String,
    #[serde(default)]
    config: ExpansionParams,
    #[serde(default)]
    lexicons: BTreeMap<String, TriggerLexicon>,
    #[serde(default)]
    audit: Vec<AuditEntry>,
}

impl From<RawProject> for Project {
    fn from(raw: RawProject) -> Self {
        let mut lexicons = raw.lexicons;
        for (name, lex) in lexicons.iter_mut() {
            lex.event_type = name.clone();
        }
        Project {
            name: raw.name,
            config: raw.config,
            lexicons,
            audit: raw.audit,
        }
    }
}

impl Project {
    pub fn new(name: &str, config: ExpansionParams) -> Self {
        Project {
            name: name.to_string(),
            config,
            lexicons: BTreeMap::new(),
            audit: Vec::new(),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        io::read_json(path)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        io::write_json(path, self)
    }

    pub fn lexicon(&self, event_type: &str) -> Result<&TriggerLexicon> {
        self.lexicons
            .get(event_type)
            .ok_or_else(|| Error::invalid(format!("unknown event type {event_type:?}")))
    }

    fn lexicon_mut(&mut self, event_type: &str) -> Result<&mut TriggerLexicon> {
        self.lexicons
            .get_mut(event_type)
            .ok_or_else(|| Error::invalid(format!("unknown event type {event_type:?}")))
    }

    pub fn add_type(&mut self, event_type: &str) -> Result<()> {
        let lex = TriggerLexicon::new(event_type)?;
        if self.lexicons.contains_key(&lex.event_type) {
            return Err(Error::invalid(format!("event type {event_type:?} already exists")));
        }
        self.lexicons.insert(lex.event_type.clone(), lex);
        Ok(())
    }

    pub fn remove_type(&mut self, event_type: &str) -> Result<TriggerLexicon> {
        self.lexicons
            .remove(event_type)
            .ok_or_else(|| Error::invalid(format!("unknown event type {event_type:?}")))
    }

    /// Adds seeds, creating the type if needed. Returns how many words were new.
    pub fn seed<S: AsRef<str>>(&mut self, event_type: &str, keywords: &[S]) -> Result<usize> {
        if keywords.iter().all(|k| k.as_ref().trim().is_empty()) {
            return Err(Error::invalid(format!("no keywords given for {event_type:?}")));
        }
        if !self.lexicons.contains_key(event_type) {
            self.add_type(event_type)?;
        }
        Ok(self.lexicon_mut(event_type)?.add_seeds(keywords.iter().map(AsRef::as_ref)))
    }

    pub fn expand_type<T: Scalar>(
        &mut self,
        event_type: &str,
        table: &EmbeddingTable<T>,
        db: &WordNetDb,
        params: Option<ExpansionParams>,
    ) -> Result<ExpansionSummary> {
        let params = params.unwrap_or(self.config);
        let (lex, summary) = expand(self.lexicon(event_type)?, table, db, &params)?;
        self.lexicons.insert(event_type.to_string(), lex);
        Ok(summary)
    }

    pub fn apply_decision(&mut self, event_type: &str, word: &str, decision: Decision) -> Result<()> {
        self.apply_decision_at(event_type, word, decision, Utc::now())
    }

    /// Applies a decision and appends it to the audit log. Last decision wins.
    pub fn apply_decision_at(
        &mut self,
        event_type: &str,
        word: &str,
        decision: Decision,
        ts: DateTime<Utc>,
    ) -> Result<()> {
        let key = normalize_word(word);
        let lex = self.lexicon(event_type)?;
        if !lex.candidates.contains_key(&key) {
            return Err(Error::invalid(format!("{word:?} is not a candidate of {event_type:?}")));
        }
        match &decision {
            Decision::Accept | Decision::Reject => {
                let status = if decision == Decision::Accept {
                    Status::Accepted
                } else {
                    Status::Rejected
                };
                self.lexicon_mut(event_type)?
                    .candidates
                    .get_mut(&key)
                    .expect("checked above")
                    .status = status;
            }
            Decision::Move { target } => {
                if target == event_type {
                    return Err(Error::invalid("move target equals the source type"));
                }
                self.lexicon(target)?;
                let mut moved = self
                    .lexicon_mut(event_type)?
                    .candidates
                    .remove(&key)
                    .expect("checked above");
                moved.status = Status::Accepted;
                let dest = self.lexicon_mut(target)?;
                match dest.candidates.get_mut(&key) {
                    Some(existing) => {
                        existing.merge_from(&moved);
                        existing.status = Status::Accepted;
                    }
                    None => {
                        dest.candidates.insert(key.clone(), moved);
                    }
                }
            }
        }
        self.audit.push(AuditEntry {
            // Stored at millisecond precision so the file round-trips exactly.
            ts: ts.trunc_subsecs(3),
            event_type: event_type.to_string(),
            word: key,
            decision: decision.name().to_string(),
            target: decision.target().map(str::to_string),
        });
        Ok(())
    }

    /// Re-applies `entries` on top of `base`.
    pub fn replay(base: &Project, entries: &[AuditEntry]) -> Result<Project> {
        let mut p = base.clone();
        for e in entries {
            p.apply_decision_at(&e.event_type, &e.word, e.decision()?, e.ts)?;
        }
        Ok(p)
    }

    /// Final trigger sets for every type that has at least one.
    pub fn final_triggers(&self) -> BTreeMap<String, BTreeSet<String>> {
        self.lexicons
            .iter()
            .map(|(t, l)| (t.clone(), final_triggers(l)))
            .filter(|(_, w)| !w.is_empty())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeding_folds_case() {
        let lex = seed_lexicon("Injury", &["wounded", "injured"]).unwrap();
        assert_eq!(lex.count(Status::Accepted), 2);
        let lex = seed_lexicon("Attack", &["blast", "Blast"]).unwrap();
        assert_eq!(lex.candidates.len(), 1);
        assert!(lex.get("BLAST").is_some());
        assert!(seed_lexicon::<&str>("Attack", &[]).is_err());
        assert!(seed_lexicon("", &["x"]).is_err());
    }

    #[test]
    fn final_triggers_only_accepted() {
        let mut lex = seed_lexicon("T", &["a", "b"]).unwrap();
        for (w, s) in [("c", Status::Pending), ("d", Status::Pending), ("e", Status::Pending), ("f", Status::Rejected)] {
            lex.propose(w, Source::Wordnet, None, s);
        }
        assert_eq!(final_triggers(&lex), BTreeSet::from(["a".to_string(), "b".to_string()]));
        for c in lex.candidates.values_mut() {
            c.status = Status::Rejected;
        }
        assert!(final_triggers(&lex).is_empty());
    }

    #[test]
    fn decisions_and_moves() {
        let mut p = Project::new("p", ExpansionParams::default());
        p.seed("Attack", &["attack", "riot"]).unwrap();
        p.seed("Demonstration", &["protest"]).unwrap();
        p.lexicon_mut("Attack").unwrap().propose("ambush", Source::Wordnet, None, Status::Pending);

        p.apply_decision("Attack", "ambush", Decision::Accept).unwrap();
        assert_eq!(p.lexicon("Attack").unwrap().get("ambush").unwrap().status, Status::Accepted);

        p.apply_decision("Attack", "riot", Decision::Move { target: "Demonstration".into() }).unwrap();
        assert!(p.lexicon("Attack").unwrap().get("riot").is_none());
        assert_eq!(p.lexicon("Demonstration").unwrap().get("riot").unwrap().status, Status::Accepted);

        p.apply_decision("Attack", "ambush", Decision::Reject).unwrap();
        p.apply_decision("Attack", "ambush", Decision::Accept).unwrap();
        assert_eq!(p.lexicon("Attack").unwrap().get("ambush").unwrap().status, Status::Accepted);

        assert!(p.apply_decision("Nope", "x", Decision::Accept).is_err());
        assert!(p.apply_decision("Attack", "zzz", Decision::Accept).is_err());
        assert_eq!(p.audit.len(), 4);
    }

    #[test]
    fn rejected_seed_leaves_final_set() {
        let mut p = Project::new("p", ExpansionParams::default());
        p.seed("Injury", &["wounded", "hurt"]).unwrap();
        p.apply_decision("Injury", "hurt", Decision::Reject).unwrap();
        assert_eq!(p.final_triggers()["Injury"], BTreeSet::from(["wounded".to_string()]));
    }

    #[test]
    fn move_onto_existing_word_merges() {
        let mut p = Project::new("p", ExpansionParams::default());
        p.seed("A", &["x"]).unwrap();
        p.seed("B", &["y"]).unwrap();
        p.lexicon_mut("A").unwrap().propose("w", Source::Embedding, Some(0.7), Status::Pending);
        p.lexicon_mut("B").unwrap().propose("w", Source::Wordnet, None, Status::Rejected);
        p.apply_decision("A", "w", Decision::Move { target: "B".into() }).unwrap();
        let w = p.lexicon("B").unwrap().get("w").unwrap();
        assert_eq!(w.status, Status::Accepted);
        assert_eq!(w.sources, BTreeSet::from([Source::Embedding, Source::Wordnet]));
        assert_eq!(w.score, Some(0.7));
    }

    #[test]
    fn project_json_shape() {
        let mut p = Project::new("demo", ExpansionParams::default());
        p.seed("Attack", &["blast"]).unwrap();
        let v = serde_json::to_value(&p).unwrap();
        assert_eq!(v["lexicons"]["Attack"]["candidates"][0]["word"], "blast");
        assert_eq!(v["lexicons"]["Attack"]["candidates"][0]["source"][0], "seed");
        assert_eq!(v["lexicons"]["Attack"]["candidates"][0]["status"], "accepted");
        let back: Project = serde_json::from_value(v).unwrap();
        assert_eq!(back, p);
        assert_eq!(back.lexicons["Attack"].event_type, "Attack");
    }
}
