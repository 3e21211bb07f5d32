//! HTTP+JSON backend for the trigger curation board.
//!
//! Reads are served from an immutable snapshot of the project. Mutations
//! go through a single writer that persists the new project atomically
//! before publishing it, so a failed write leaves the visible state alone.

use std::collections::{BTreeMap, BTreeSet};
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, RwLock};

use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{delete, get, post};
use axum::{Json, Router};
use evcustom::corpus::{Corpus, Sentence};
use evcustom::distsup;
use evcustom::embeddings::{load_embeddings, nearest_neighbors};
use evcustom::expansion::{Decision, ExpansionParams, Project, Status, TriggerCandidate};
use evcustom::wordnet::{load_wordnet, WordNetDb};
use evcustom::{Embeddings, Error};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tokio::net::TcpListener;
use tokio::sync::Mutex;
use tokio::task::JoinHandle;

/// Tokens of context kept on each side of a snippet match.
pub const SNIPPET_CONTEXT: usize = 5;
const SIMILAR_PER_WORD: usize = 10;
const SIMILAR_COLUMN: usize = 25;

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub project: PathBuf,
    pub corpus: PathBuf,
    pub embeddings: PathBuf,
    /// Without a WordNet directory, expansion uses embeddings only.
    pub wordnet: Option<PathBuf>,
    pub host: String,
    pub port: u16,
    /// Where `POST /api/distsup` writes examples. Defaults to
    /// `<project stem>.examples.jsonl` next to the project file.
    pub examples_out: Option<PathBuf>,
}

/// A project as seen by readers, tagged with the revision that produced it.
#[derive(Debug)]
pub struct Snapshot {
    pub project: Project,
    pub revision: u64,
}

/// Shared state behind every handler.
pub struct SessionState {
    snapshot: RwLock<Arc<Snapshot>>,
    writer: Mutex<()>,
    project_path: PathBuf,
    examples_out: PathBuf,
    corpus: Arc<Corpus>,
    table: Arc<Embeddings>,
    wordnet: Arc<WordNetDb>,
}

impl SessionState {
    pub fn new(project_path: PathBuf, project: Project, corpus: Corpus, table: Embeddings, wordnet: WordNetDb) -> Self {
        let stem = project_path
            .file_stem()
            .map_or_else(|| "project".to_string(), |s| s.to_string_lossy().into_owned());
        let examples_out = project_path.with_file_name(format!("{stem}.examples.jsonl"));
        SessionState {
            snapshot: RwLock::new(Arc::new(Snapshot { project, revision: 0 })),
            writer: Mutex::new(()),
            project_path,
            examples_out,
            corpus: Arc::new(corpus),
            table: Arc::new(table),
            wordnet: Arc::new(wordnet),
        }
    }

    /// Loads every input named by `config`. A missing project file starts
    /// an empty project named after it.
    pub fn load(config: &ServiceConfig) -> evcustom::Result<Self> {
        let project = if config.project.exists() {
            Project::load(&config.project)?
        } else {
            let name = config
                .project
                .file_stem()
                .map_or_else(|| "project".to_string(), |s| s.to_string_lossy().into_owned());
            Project::new(&name, ExpansionParams::default())
        };
        let corpus = evcustom::corpus::load_corpus(&config.corpus)?;
        let table = load_embeddings(&config.embeddings)?;
        let wordnet = match &config.wordnet {
            Some(dir) => load_wordnet(dir)?,
            None => WordNetDb::default(),
        };
        let mut state = SessionState::new(config.project.clone(), project, corpus, table, wordnet);
        if let Some(out) = &config.examples_out {
            state.examples_out = out.clone();
        }
        Ok(state)
    }

    pub fn snapshot(&self) -> Arc<Snapshot> {
        self.snapshot.read().expect("snapshot lock poisoned").clone()
    }

    /// Applies `f` to a copy of the project, persists it, then publishes
    /// it under the next revision. Mutations are serialized.
    pub async fn mutate<R, F>(&self, f: F) -> Result<(R, u64), ApiError>
    where
        F: FnOnce(&mut Project) -> evcustom::Result<R>,
    {
        let _writer = self.writer.lock().await;
        let current = self.snapshot();
        let mut project = current.project.clone();
        let out = f(&mut project)?;
        let path = self.project_path.clone();
        let project = tokio::task::spawn_blocking(move || project.save(&path).map(|_| project))
            .await
            .map_err(|e| Error::Runtime(e.to_string()))??;
        let revision = current.revision + 1;
        *self.snapshot.write().expect("snapshot lock poisoned") = Arc::new(Snapshot { project, revision });
        Ok((out, revision))
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn not_found(message: impl Into<String>) -> Self {
        ApiError {
            status: StatusCode::NOT_FOUND,
            message: message.into(),
        }
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let status = if e.is_validation() {
            StatusCode::BAD_REQUEST
        } else {
            StatusCode::INTERNAL_SERVER_ERROR
        };
        ApiError {
            status,
            message: e.to_string(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.message }))).into_response()
    }
}

type ApiResult = Result<Json<Value>, ApiError>;
type Shared = State<Arc<SessionState>>;

pub fn router(state: Arc<SessionState>) -> Router {
    Router::new()
        .route("/api/board", get(board))
        .route("/api/types", post(add_type))
        .route("/api/types/{name}", delete(remove_type))
        .route("/api/types/{name}/seeds", post(add_seeds))
        .route("/api/types/{name}/expand", post(expand))
        .route("/api/decision", post(decision))
        .route("/api/snippets", get(snippets))
        .route("/api/sentence", get(sentence))
        .route("/api/distsup", post(run_distsup))
        .route("/api/similar", get(similar))
        .with_state(state)
}

/// A bound, running service.
pub struct RunningService {
    pub addr: SocketAddr,
    pub handle: JoinHandle<std::io::Result<()>>,
}

/// Binds the configured address and serves in the background. Fails if
/// the port is taken.
pub async fn start(state: Arc<SessionState>, host: &str, port: u16) -> evcustom::Result<RunningService> {
    let listener = TcpListener::bind((host, port))
        .await
        .map_err(|e| Error::Runtime(format!("cannot listen on {host}:{port}: {e}")))?;
    let addr = listener.local_addr().map_err(|e| Error::Runtime(e.to_string()))?;
    log::info!("serving on http://{addr}");
    let app = router(state);
    let handle = tokio::spawn(async move { axum::serve(listener, app).await });
    Ok(RunningService { addr, handle })
}

/// Loads the inputs and serves until the server stops.
pub async fn serve(config: ServiceConfig) -> evcustom::Result<()> {
    let state = Arc::new(SessionState::load(&config)?);
    let running = start(state, &config.host, config.port).await?;
    running
        .handle
        .await
        .map_err(|e| Error::Runtime(e.to_string()))?
        .map_err(|e| Error::Runtime(e.to_string()))
}

#[derive(Serialize)]
struct Column<'a> {
    name: &'a str,
    candidates: Vec<&'a TriggerCandidate>,
    pending: usize,
    accepted: usize,
    rejected: usize,
}

#[derive(Serialize, PartialEq, Debug)]
struct Similar {
    word: String,
    similarity: f64,
    /// Accepted trigger the word is closest to.
    near: String,
}

/// Neighbours of accepted single-word triggers that no column holds yet.
fn similar_column(project: &Project, table: &Embeddings) -> Vec<Similar> {
    let known: BTreeSet<&str> = project
        .lexicons
        .values()
        .flat_map(|l| l.candidates.keys().map(String::as_str))
        .collect();
    let mut best: BTreeMap<String, Similar> = BTreeMap::new();
    for lex in project.lexicons.values() {
        for c in lex.candidates.values().filter(|c| c.status == Status::Accepted && !c.word.contains(' ')) {
            let Ok(neighbors) = nearest_neighbors(table, &c.word, SIMILAR_PER_WORD, project.config.min_sim) else {
                continue;
            };
            for n in neighbors.into_iter().filter(|n| !known.contains(n.word.as_str())) {
                let entry = best.entry(n.word.clone()).or_insert(Similar {
                    word: n.word,
                    similarity: f64::NEG_INFINITY,
                    near: String::new(),
                });
                if n.similarity > entry.similarity {
                    entry.similarity = n.similarity;
                    entry.near = c.word.clone();
                }
            }
        }
    }
    let mut out: Vec<Similar> = best.into_values().collect();
    out.sort_by(|a, b| b.similarity.total_cmp(&a.similarity).then_with(|| a.word.cmp(&b.word)));
    out.truncate(SIMILAR_COLUMN);
    out
}

fn board_json(snap: &Snapshot, table: &Embeddings) -> Value {
    let columns: Vec<Column<'_>> = snap
        .project
        .lexicons
        .iter()
        .map(|(name, lex)| Column {
            name,
            candidates: lex.candidates.values().collect(),
            pending: lex.count(Status::Pending),
            accepted: lex.count(Status::Accepted),
            rejected: lex.count(Status::Rejected),
        })
        .collect();
    json!({
        "revision": snap.revision,
        "name": snap.project.name,
        "config": snap.project.config,
        "types": columns,
        "similar": similar_column(&snap.project, table),
        "audit": snap.project.audit.len(),
    })
}

async fn board(State(state): Shared) -> ApiResult {
    let snap = state.snapshot();
    let table = state.table.clone();
    let body = tokio::task::spawn_blocking(move || board_json(&snap, &table))
        .await
        .map_err(|e| Error::Runtime(e.to_string()))?;
    Ok(Json(body))
}

#[derive(Deserialize)]
struct NewType {
    name: String,
}

async fn add_type(State(state): Shared, Json(body): Json<NewType>) -> ApiResult {
    let name = body.name.trim().to_string();
    let (_, revision) = state.mutate(|p| p.add_type(&name)).await?;
    Ok(Json(json!({ "revision": revision, "name": name })))
}

async fn remove_type(State(state): Shared, Path(name): Path<String>) -> ApiResult {
    let (removed, revision) = state.mutate(|p| p.remove_type(&name)).await?;
    Ok(Json(json!({ "revision": revision, "name": name, "removed": removed.candidates.len() })))
}

#[derive(Deserialize)]
struct Seeds {
    words: Vec<String>,
}

async fn add_seeds(State(state): Shared, Path(name): Path<String>, Json(body): Json<Seeds>) -> ApiResult {
    let (added, revision) = state.mutate(|p| p.seed(&name, &body.words)).await?;
    Ok(Json(json!({ "revision": revision, "name": name, "added": added })))
}

#[derive(Deserialize, Default)]
struct ExpandBody {
    k: Option<usize>,
    min_sim: Option<f64>,
    max_depth: Option<usize>,
}

async fn expand(State(state): Shared, Path(name): Path<String>, body: Option<Json<ExpandBody>>) -> ApiResult {
    let body = body.map(|Json(b)| b).unwrap_or_default();
    let (table, wordnet) = (state.table.clone(), state.wordnet.clone());
    let (summary, revision) = state
        .mutate(|p| {
            let params = ExpansionParams {
                k: body.k.unwrap_or(p.config.k),
                min_sim: body.min_sim.unwrap_or(p.config.min_sim),
                max_depth: body.max_depth.unwrap_or(p.config.max_depth),
            };
            let summary = p.expand_type(&name, &*table, &wordnet, Some(params))?;
            let lex = p.lexicon(&name)?;
            let added: Vec<TriggerCandidate> =
                summary.added.iter().filter_map(|w| lex.get(w)).cloned().collect();
            Ok((summary, added))
        })
        .await?;
    let (summary, added) = summary;
    Ok(Json(json!({
        "revision": revision,
        "name": name,
        "candidates": added,
        "oov_seeds": summary.oov_seeds,
        "skipped_phrases": summary.skipped_phrases,
        "wordnet_misses": summary.wordnet_misses,
    })))
}

#[derive(Deserialize)]
struct DecisionBody {
    #[serde(rename = "type")]
    event_type: String,
    word: String,
    decision: String,
    target: Option<String>,
}

async fn decision(State(state): Shared, Json(body): Json<DecisionBody>) -> ApiResult {
    let decision = Decision::parse(&body.decision, body.target.as_deref())?;
    let ((), revision) = state
        .mutate(|p| p.apply_decision(&body.event_type, &body.word, decision.clone()))
        .await?;
    Ok(Json(json!({
        "revision": revision,
        "type": body.event_type,
        "word": body.word,
        "decision": decision.name(),
        "target": decision.target(),
    })))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snippet {
    pub doc_id: String,
    pub sentence: usize,
    /// Context window text.
    pub text: String,
    /// Char span of the match within `text`.
    pub highlight: (usize, usize),
    /// Char span of the match within the full sentence.
    pub s: usize,
    pub e: usize,
}

/// Occurrences of `word` (one or more tokens, case-insensitive) in corpus
/// order, each with up to [`SNIPPET_CONTEXT`] tokens on either side.
pub fn find_snippets(corpus: &Corpus, word: &str, limit: usize) -> Vec<Snippet> {
    let want: Vec<String> = word.split_whitespace().map(str::to_lowercase).collect();
    let mut out = Vec::new();
    if want.is_empty() || limit == 0 {
        return out;
    }
    for (doc_id, index, s) in corpus.sentences() {
        let toks = &s.tokens;
        if toks.len() < want.len() {
            continue;
        }
        for i in 0..=toks.len() - want.len() {
            if !want.iter().enumerate().all(|(k, w)| toks[i + k].text.to_lowercase() == *w) {
                continue;
            }
            let j = i + want.len();
            let lo = i.saturating_sub(SNIPPET_CONTEXT);
            let hi = (j + SNIPPET_CONTEXT).min(toks.len());
            let (ws, we) = (toks[lo].start, toks[hi - 1].end);
            let (ms, me) = (toks[i].start, toks[j - 1].end);
            out.push(Snippet {
                doc_id: doc_id.to_string(),
                sentence: index,
                text: s.text.chars().skip(ws).take(we - ws).collect(),
                highlight: (ms - ws, me - ws),
                s: ms,
                e: me,
            });
            if out.len() == limit {
                return out;
            }
        }
    }
    out
}

#[derive(Deserialize)]
struct SnippetQuery {
    #[serde(rename = "type")]
    event_type: String,
    word: String,
    limit: Option<usize>,
}

async fn snippets(State(state): Shared, Query(q): Query<SnippetQuery>) -> ApiResult {
    let snap = state.snapshot();
    let lex = snap.project.lexicon(&q.event_type)?;
    if lex.get(&q.word).is_none() {
        return Err(Error::invalid(format!("{:?} is not a candidate of {:?}", q.word, q.event_type)).into());
    }
    let corpus = state.corpus.clone();
    let limit = q.limit.unwrap_or(10);
    let word = q.word.clone();
    let found = tokio::task::spawn_blocking(move || find_snippets(&corpus, &word, limit))
        .await
        .map_err(|e| Error::Runtime(e.to_string()))?;
    Ok(Json(json!({ "type": q.event_type, "word": q.word, "snippets": found })))
}

#[derive(Deserialize)]
struct SentenceQuery {
    doc: String,
    index: usize,
}

async fn sentence(State(state): Shared, Query(q): Query<SentenceQuery>) -> ApiResult {
    let s: &Sentence = state
        .corpus
        .sentence(&q.doc, q.index)
        .ok_or_else(|| ApiError::not_found(format!("no sentence {} in document {:?}", q.index, q.doc)))?;
    Ok(Json(json!({ "doc_id": q.doc, "index": q.index, "text": s.text })))
}

#[derive(Deserialize)]
struct DistsupBody {
    cap: Option<usize>,
    neg_ratio: Option<f64>,
    seed: Option<u64>,
}

async fn run_distsup(State(state): Shared, body: Option<Json<DistsupBody>>) -> ApiResult {
    let body = body.map(|Json(b)| b).unwrap_or(DistsupBody {
        cap: None,
        neg_ratio: None,
        seed: None,
    });
    let snap = state.snapshot();
    let corpus = state.corpus.clone();
    let out = state.examples_out.clone();
    let cap = body.cap.unwrap_or(distsup::DEFAULT_CAP);
    let ratio = body.neg_ratio.unwrap_or(distsup::DEFAULT_NEG_RATIO);
    let seed = body.seed.unwrap_or(1);
    let revision = snap.revision;
    let result = tokio::task::spawn_blocking(move || -> evcustom::Result<Value> {
        let lexicons = snap.project.final_triggers();
        let mut examples = distsup::find_occurrences(&corpus, &lexicons, cap)?;
        let mut counts: BTreeMap<&str, usize> = lexicons.keys().map(|t| (t.as_str(), 0)).collect();
        for e in &examples {
            *counts.entry(e.label.as_str()).or_default() += 1;
        }
        let negatives = distsup::sample_negatives(&corpus, &lexicons, &examples, ratio, seed)?;
        let (n_neg, short) = (negatives.examples.len(), negatives.short);
        let counts = serde_json::to_value(&counts).map_err(|e| Error::Runtime(e.to_string()))?;
        examples.extend(negatives.examples);
        distsup::write_trigger_examples(&out, &examples)?;
        Ok(json!({
            "revision": revision,
            "path": out,
            "counts": counts,
            "negatives": n_neg,
            "negatives_short": short,
        }))
    })
    .await
    .map_err(|e| Error::Runtime(e.to_string()))??;
    Ok(Json(result))
}

#[derive(Deserialize)]
struct SimilarQuery {
    word: String,
    k: Option<usize>,
}

async fn similar(State(state): Shared, Query(q): Query<SimilarQuery>) -> ApiResult {
    let snap = state.snapshot();
    let k = q.k.unwrap_or(SIMILAR_PER_WORD);
    match nearest_neighbors(&*state.table, &q.word, k, snap.project.config.min_sim) {
        Ok(n) => {
            let list: Vec<Value> = n
                .into_iter()
                .map(|n| json!({ "word": n.word, "similarity": n.similarity }))
                .collect();
            Ok(Json(json!({ "word": q.word, "oov": false, "neighbors": list })))
        }
        Err(Error::OutOfVocabulary(_)) => Ok(Json(json!({ "word": q.word, "oov": true, "neighbors": [] }))),
        Err(e) => Err(e.into()),
    }
}
