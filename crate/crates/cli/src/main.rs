//! `evcustom`: file-to-file stages of the event customization pipeline.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use evcustom::corpus::{self, Corpus, DatasetSplit, Part};
use evcustom::distsup::{self, ArgumentCandidate, TriggerExample};
use evcustom::embeddings::{load_embeddings, train_skipgram, SkipgramConfig};
use evcustom::error::StageExt;
use evcustom::eval::{self, ArmSuite, ArgumentSetup, MatchMode};
use evcustom::expansion::{Decision, ExpansionParams, Project};
use evcustom::models::{self, CnnModel, LabeledInstance, Prediction, Task, TrainConfig, Vocabulary};
use evcustom::rolemap::RoleMapping;
use evcustom::wordnet::{load_wordnet, WordNetDb};
use evcustom::{io, Error, Result};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "evcustom", version, about = "Customize event extraction to new event types")]
struct Cli {
    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Create an empty curation project.
    Init {
        #[arg(long)]
        project: PathBuf,
        #[arg(long)]
        name: Option<String>,
    },
    /// Add seed keywords to an event type, creating it if needed.
    Seed {
        #[arg(long)]
        project: PathBuf,
        #[arg(long = "type")]
        event_type: String,
        /// Comma-separated keywords.
        #[arg(long, value_delimiter = ',', required = true)]
        words: Vec<String>,
    },
    /// Propose candidates from embeddings and WordNet for every type.
    Expand(ExpandArgs),
    /// Accept a candidate trigger.
    Accept(DecisionArgs),
    /// Reject a candidate trigger.
    Reject(DecisionArgs),
    /// Move a candidate to another event type.
    Move(DecisionArgs),
    /// Generate distant-supervision trigger examples from accepted triggers.
    Distsup {
        #[arg(long)]
        project: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value_t = distsup::DEFAULT_CAP)]
        cap: usize,
        #[arg(long, default_value_t = distsup::DEFAULT_NEG_RATIO)]
        neg_ratio: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Apply human judgments to distant positives.
    Adjudicate {
        #[arg(long)]
        examples: PathBuf,
        #[arg(long)]
        judgments: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Keep all examples of a random subset of documents.
    Downsample {
        #[arg(long)]
        examples: PathBuf,
        #[arg(long)]
        docs: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Split documents into train/dev/test.
    Split {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "0.6,0.2,0.2")]
        ratios: Vec<f64>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build (trigger, mention) argument candidates.
    Candidates {
        #[arg(long)]
        corpus: PathBuf,
        /// Pair mentions with these predicted triggers (unlabelled);
        /// otherwise gold triggers with gold roles.
        #[arg(long)]
        triggers: Option<PathBuf>,
        #[command(flatten)]
        part: PartArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train and select a trigger classifier.
    TrainTrigger(TrainArgs),
    /// Train and select an argument classifier.
    TrainArgument(TrainArgs),
    /// Rewrite candidate roles to Actor/Place/Time.
    MapRoles {
        #[arg(long)]
        examples: PathBuf,
        #[arg(long)]
        mapping: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a trained model over a corpus.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        /// Trigger predictions to attach arguments to (argument models).
        #[arg(long, conflicts_with = "candidates")]
        triggers: Option<PathBuf>,
        /// Classify exactly these candidates (argument models).
        #[arg(long)]
        candidates: Option<PathBuf>,
        #[command(flatten)]
        part: PartArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score predictions against gold annotation.
    Score {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gold: PathBuf,
        #[arg(long)]
        mode: Task,
        #[arg(long = "match", default_value = "one-to-one")]
        matching: MatchMode,
        /// Score arguments as Actor/Place/Time under the default mapping.
        #[arg(long)]
        map_roles: bool,
        #[arg(long)]
        mapping: Option<PathBuf>,
        #[command(flatten)]
        part: PartArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Leave-one-group-out evaluation of the argument classifier.
    Loo {
        /// Labelled argument candidates, already mapped.
        #[arg(long)]
        examples: PathBuf,
        #[arg(long)]
        grouping: PathBuf,
        #[arg(long)]
        grid: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        embeddings: PathBuf,
        /// Without a split every fold trains, tunes and evaluates on all
        /// candidates outside or inside the held-out group.
        #[arg(long)]
        split: Option<PathBuf>,
        #[arg(long = "match", default_value = "one-to-one")]
        matching: MatchMode,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run experiment arms described by a JSON configuration.
    Arm {
        #[arg(long)]
        config: PathBuf,
    },
    /// Seeded sample of predictions for manual review.
    SampleForAudit {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long, default_value_t = 100)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Per-label quotas as LABEL=N,...; defaults to Actor=78,Place=8,Time=14.
        #[arg(long, value_delimiter = ',', conflicts_with = "uniform")]
        quotas: Vec<String>,
        /// Sample uniformly, ignoring labels.
        #[arg(long)]
        uniform: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train Skip-gram embeddings on corpus tokens.
    TrainEmbeddings {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value_t = 50)]
        dim: usize,
        #[arg(long, default_value_t = 5)]
        window: usize,
        #[arg(long, default_value_t = 10)]
        neg: usize,
        #[arg(long, default_value_t = 5)]
        epochs: usize,
        #[arg(long, default_value_t = 1)]
        min_count: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Serve the curation API.
    Serve {
        #[arg(long)]
        project: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        embeddings: PathBuf,
        #[arg(long)]
        wordnet: Option<PathBuf>,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long, default_value_t = 8080)]
        port: u16,
    },
}

#[derive(Args)]
struct ExpandArgs {
    #[arg(long)]
    project: PathBuf,
    #[arg(long)]
    embeddings: PathBuf,
    #[arg(long)]
    wordnet: Option<PathBuf>,
    /// Expand only this type.
    #[arg(long = "type")]
    event_type: Option<String>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    min_sim: Option<f64>,
    #[arg(long)]
    depth: Option<usize>,
}

#[derive(Args)]
struct DecisionArgs {
    #[arg(long)]
    project: PathBuf,
    #[arg(long = "type")]
    event_type: String,
    #[arg(long)]
    word: String,
    #[arg(long)]
    target: Option<String>,
}

#[derive(Args)]
struct PartArgs {
    /// Restrict to one part of this split.
    #[arg(long, requires = "part")]
    split: Option<PathBuf>,
    #[arg(long, requires = "split")]
    part: Option<Part>,
}

impl PartArgs {
    fn restrict(&self, corpus: Corpus) -> Result<Corpus> {
        match (&self.split, self.part) {
            (Some(path), Some(part)) => {
                let split = DatasetSplit::load(path).stage("load split")?;
                Ok(corpus.restrict(&split.ids(part)))
            }
            _ => Ok(corpus),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
enum DevChoice {
    /// Examples (or candidates) in dev-split documents.
    Examples,
    /// Gold trigger annotation of dev-split documents.
    Gold,
}

#[derive(Args)]
struct TrainArgs {
    /// Trigger examples or argument candidates.
    #[arg(long)]
    examples: PathBuf,
    #[arg(long)]
    split: PathBuf,
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    embeddings: PathBuf,
    #[arg(long)]
    grid: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum, default_value_t = DevChoice::Examples)]
    dev: DevChoice,
    /// Map roles before training (argument models).
    #[arg(long)]
    map_roles: bool,
    #[arg(long)]
    mapping: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    let name = command_name(&cli.command);
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let e = match e {
                staged @ Error::Stage { .. } => staged,
                other => other.in_stage(name),
            };
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 2 } else { 3 })
        }
    }
}

fn command_name(command: &Command) -> &'static str {
    match command {
        Command::Init { .. } => "init",
        Command::Seed { .. } => "seed",
        Command::Expand(_) => "expand",
        Command::Accept(_) => "accept",
        Command::Reject(_) => "reject",
        Command::Move(_) => "move",
        Command::Distsup { .. } => "distsup",
        Command::Adjudicate { .. } => "adjudicate",
        Command::Downsample { .. } => "downsample",
        Command::Split { .. } => "split",
        Command::Candidates { .. } => "candidates",
        Command::TrainTrigger(_) => "train-trigger",
        Command::TrainArgument(_) => "train-argument",
        Command::MapRoles { .. } => "map-roles",
        Command::Predict { .. } => "predict",
        Command::Score { .. } => "score",
        Command::Loo { .. } => "loo",
        Command::Arm { .. } => "arm",
        Command::SampleForAudit { .. } => "sample-for-audit",
        Command::TrainEmbeddings { .. } => "train-embeddings",
        Command::Serve { .. } => "serve",
    }
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Runtime(e.to_string()))?;
    println!("{text}");
    Ok(())
}

fn load_corpus(path: &Path) -> Result<Corpus> {
    corpus::load_corpus(path).stage("load corpus")
}

fn load_project(path: &Path) -> Result<Project> {
    Project::load(path).stage("load project")
}

fn load_mapping(path: Option<&Path>) -> Result<RoleMapping> {
    match path {
        Some(p) => RoleMapping::load(p).stage("load role mapping"),
        None => Ok(RoleMapping::default()),
    }
}

fn load_grid(path: Option<&Path>, seed: Option<u64>) -> Result<TrainConfig> {
    let mut grid = match path {
        Some(p) => TrainConfig::load(p).stage("load grid")?,
        None => TrainConfig::default(),
    };
    if let Some(seed) = seed {
        grid.seed = seed;
    }
    grid.validate().stage("grid")?;
    Ok(grid)
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Init { project, name } => {
            if project.exists() {
                return Err(Error::invalid(format!("{} already exists", project.display())));
            }
            let name = name.unwrap_or_else(|| {
                project
                    .file_stem()
                    .map_or_else(|| "project".to_string(), |s| s.to_string_lossy().into_owned())
            });
            Project::new(&name, ExpansionParams::default()).save(&project)
        }
        Command::Seed {
            project,
            event_type,
            words,
        } => {
            let mut p = load_project(&project)?;
            let added = p.seed(&event_type, &words)?;
            p.save(&project)?;
            log::info!("{event_type}: {added} new seeds");
            Ok(())
        }
        Command::Expand(args) => expand(args),
        Command::Accept(args) => decide(args, "accept"),
        Command::Reject(args) => decide(args, "reject"),
        Command::Move(args) => decide(args, "move"),
        Command::Distsup {
            project,
            corpus,
            cap,
            neg_ratio,
            seed,
            out,
        } => {
            let p = load_project(&project)?;
            let corpus = load_corpus(&corpus)?;
            let lexicons = p.final_triggers();
            let mut examples = distsup::find_occurrences(&corpus, &lexicons, cap).stage("find occurrences")?;
            let mut counts: BTreeMap<String, usize> = lexicons.keys().map(|t| (t.clone(), 0)).collect();
            for e in &examples {
                *counts.entry(e.label.clone()).or_default() += 1;
            }
            let negatives =
                distsup::sample_negatives(&corpus, &lexicons, &examples, neg_ratio, seed).stage("sample negatives")?;
            if negatives.short {
                log::warn!(
                    "only {} negatives available, {} requested",
                    negatives.examples.len(),
                    negatives.requested
                );
            }
            let n_neg = negatives.examples.len();
            examples.extend(negatives.examples);
            distsup::write_trigger_examples(&out, &examples)?;
            print_json(&serde_json::json!({ "positives": counts, "negatives": n_neg }))
        }
        Command::Adjudicate { examples, judgments, out } => {
            let examples = distsup::read_trigger_examples(&examples).stage("load examples")?;
            let judgments = eval::load_judgments(&judgments).stage("load judgments")?;
            let kept = distsup::adjudicate(&examples, &judgments)?;
            log::info!("kept {} of {} examples", kept.len(), examples.len());
            distsup::write_trigger_examples(&out, &kept)
        }
        Command::Downsample { examples, docs, seed, out } => {
            let examples = distsup::read_trigger_examples(&examples).stage("load examples")?;
            let kept = distsup::downsample_documents(&examples, docs, seed)?;
            distsup::write_trigger_examples(&out, &kept)
        }
        Command::Split {
            corpus,
            ratios,
            seed,
            out,
        } => {
            if ratios.len() != 3 {
                return Err(Error::invalid(format!("--ratios needs three values, got {}", ratios.len())));
            }
            let corpus = load_corpus(&corpus)?;
            let split = corpus::split_documents(&corpus, (ratios[0], ratios[1], ratios[2]), seed)?;
            split.save(&out)?;
            let (tr, dv, te) = split.sizes();
            print_json(&serde_json::json!({ "train": tr, "dev": dv, "test": te }))
        }
        Command::Candidates {
            corpus,
            triggers,
            part,
            out,
        } => {
            let corpus = part.restrict(load_corpus(&corpus)?)?;
            let candidates = match triggers {
                None => distsup::gold_argument_candidates(&corpus, None),
                Some(path) => {
                    let preds = models::read_predictions(&path).stage("load triggers")?;
                    predicted_candidates(&corpus, &preds)?
                }
            };
            distsup::write_argument_candidates(&out, &candidates)
        }
        Command::TrainTrigger(args) => train(Task::Trigger, args),
        Command::TrainArgument(args) => train(Task::Argument, args),
        Command::MapRoles { examples, mapping, out } => {
            let candidates = distsup::read_argument_candidates(&examples).stage("load candidates")?;
            let mapping = load_mapping(mapping.as_deref())?;
            let (mapped, summary) = evcustom::rolemap::map_dataset(&candidates, &mapping);
            distsup::write_argument_candidates(&out, &mapped)?;
            print_json(&summary)
        }
        Command::Predict {
            model,
            corpus,
            triggers,
            candidates,
            part,
            out,
        } => {
            let model: CnnModel<f64> = CnnModel::load(&model).stage("load model")?;
            let corpus = part.restrict(load_corpus(&corpus)?)?;
            let preds = match model.task {
                Task::Trigger => {
                    if triggers.is_some() || candidates.is_some() {
                        return Err(Error::invalid("--triggers/--candidates need an argument model"));
                    }
                    models::predict_corpus_triggers(&model, &corpus)?
                }
                Task::Argument => match (triggers, candidates) {
                    (_, Some(path)) => {
                        let cands = distsup::read_argument_candidates(&path).stage("load candidates")?;
                        let docs = corpus.documents.iter().map(|d| d.doc_id.clone()).collect::<std::collections::BTreeSet<_>>();
                        let cands: Vec<ArgumentCandidate> = cands.into_iter().filter(|c| docs.contains(&c.doc_id)).collect();
                        models::predict_argument_candidates(&model, &corpus, &cands)?
                    }
                    (Some(path), None) => {
                        let trig = models::read_predictions(&path).stage("load triggers")?;
                        models::predict_corpus_arguments(&model, &corpus, &trig)?
                    }
                    (None, None) => {
                        let gold = models::gold_trigger_predictions(&corpus);
                        models::predict_corpus_arguments(&model, &corpus, &gold)?
                    }
                },
            };
            log::info!("{} predictions", preds.len());
            models::write_predictions(&out, &preds)
        }
        Command::Score {
            pred,
            gold,
            mode,
            matching,
            map_roles,
            mapping,
            part,
            out,
        } => {
            let gold = part.restrict(load_corpus(&gold)?)?;
            let docs: std::collections::BTreeSet<&str> = gold.documents.iter().map(|d| d.doc_id.as_str()).collect();
            let preds: Vec<Prediction> = models::read_predictions(&pred)
                .stage("load predictions")?
                .into_iter()
                .filter(|p| docs.contains(p.doc_id.as_str()))
                .collect();
            let report = match mode {
                Task::Trigger => eval::score_triggers(&preds, &gold, matching),
                Task::Argument => {
                    let mapping = (map_roles || mapping.is_some())
                        .then(|| load_mapping(mapping.as_deref()))
                        .transpose()?;
                    eval::score_arguments(&preds, &gold, mapping.as_ref(), matching)?
                }
            };
            if let Some(out) = out {
                io::write_json(&out, &report)?;
            }
            print_json(&report)
        }
        Command::Loo {
            examples,
            grouping,
            grid,
            seed,
            corpus,
            embeddings,
            split,
            matching,
            out,
        } => {
            let candidates = distsup::read_argument_candidates(&examples).stage("load candidates")?;
            let grouping = eval::load_grouping(&grouping).stage("load grouping")?;
            let grid = load_grid(grid.as_deref(), seed)?;
            let corpus = load_corpus(&corpus)?;
            let table = load_embeddings::<f64>(&embeddings).stage("load embeddings")?;
            let (vocab, words) = Vocabulary::for_corpus(&table, &corpus);
            let (train, dev, test) = match split {
                Some(path) => {
                    let split = DatasetSplit::load(&path).stage("load split")?;
                    let pick = |part: Part| -> Vec<ArgumentCandidate> {
                        let ids = split.ids(part);
                        candidates.iter().filter(|c| ids.contains(&c.doc_id)).cloned().collect()
                    };
                    (pick(Part::Train), pick(Part::Dev), pick(Part::Test))
                }
                None => (candidates.clone(), candidates.clone(), candidates.clone()),
            };
            let setup = ArgumentSetup {
                corpus: &corpus,
                vocab: &vocab,
                words: &words,
                config: &grid,
                mode: matching,
            };
            let report = eval::leave_one_out(&setup, &train, &dev, &test, &grouping)?;
            let summary = serde_json::json!({
                "folds": report.folds.iter().map(|f| serde_json::json!({
                    "group": f.group,
                    "overall": f.report.overall,
                    "counts": f.report.counts,
                })).collect::<Vec<_>>(),
                "skipped": report.plan.skipped,
                "pooled": report.pooled,
            });
            if let Some(out) = out {
                io::write_json(&out, &summary)?;
            }
            print_json(&summary)
        }
        Command::Arm { config } => {
            let suite = ArmSuite::load(&config).stage("load arm config")?;
            let report = eval::run_suite(suite)?;
            print!("{}", report.render());
            Ok(())
        }
        Command::SampleForAudit {
            pred,
            n,
            seed,
            quotas,
            uniform,
            out,
        } => {
            let preds = models::read_predictions(&pred).stage("load predictions")?;
            let quotas = if uniform {
                BTreeMap::new()
            } else if quotas.is_empty() {
                eval::default_audit_quotas()
            } else {
                parse_quotas(&quotas)?
            };
            let sample = eval::sample_for_audit(&preds, n, &quotas, seed)?;
            models::write_predictions(&out, &sample)
        }
        Command::TrainEmbeddings {
            corpus,
            dim,
            window,
            neg,
            epochs,
            min_count,
            seed,
            out,
        } => {
            let corpus = load_corpus(&corpus)?;
            let config = SkipgramConfig {
                dim,
                window,
                negatives: neg,
                epochs,
                min_count,
                seed,
                ..SkipgramConfig::default()
            };
            let table = train_skipgram::<f64>(&corpus, &config).stage("train skip-gram")?;
            table.save(&out)
        }
        Command::Serve {
            project,
            corpus,
            embeddings,
            wordnet,
            host,
            port,
        } => {
            let config = evcustom_service::ServiceConfig {
                project,
                corpus,
                embeddings,
                wordnet,
                host,
                port,
                examples_out: None,
            };
            let runtime = tokio::runtime::Runtime::new().map_err(|e| Error::Runtime(e.to_string()))?;
            runtime.block_on(evcustom_service::serve(config))
        }
    }
}

fn parse_quotas(raw: &[String]) -> Result<BTreeMap<String, usize>> {
    raw.iter()
        .map(|q| {
            let (label, n) = q
                .split_once('=')
                .ok_or_else(|| Error::invalid(format!("quota {q:?} is not LABEL=N")))?;
            let n = n.parse().map_err(|_| Error::invalid(format!("quota {q:?} is not LABEL=N")))?;
            Ok((label.to_string(), n))
        })
        .collect()
}

fn expand(args: ExpandArgs) -> Result<()> {
    let mut p = load_project(&args.project)?;
    let table = load_embeddings::<f64>(&args.embeddings).stage("load embeddings")?;
    let db = match &args.wordnet {
        Some(dir) => load_wordnet(dir).stage("load wordnet")?,
        None => WordNetDb::default(),
    };
    let params = ExpansionParams {
        k: args.k.unwrap_or(p.config.k),
        min_sim: args.min_sim.unwrap_or(p.config.min_sim),
        max_depth: args.depth.unwrap_or(p.config.max_depth),
    };
    let types: Vec<String> = match args.event_type {
        Some(t) => vec![t],
        None => p.lexicons.keys().cloned().collect(),
    };
    if types.is_empty() {
        return Err(Error::invalid("project has no event types"));
    }
    let mut summaries = BTreeMap::new();
    for t in types {
        let summary = p.expand_type(&t, &table, &db, Some(params)).stage(&format!("expand {t}"))?;
        summaries.insert(t, summary);
    }
    p.save(&args.project)?;
    print_json(&summaries)
}

fn decide(args: DecisionArgs, name: &str) -> Result<()> {
    let decision = Decision::parse(name, args.target.as_deref())?;
    let mut p = load_project(&args.project)?;
    p.apply_decision(&args.event_type, &args.word, decision)?;
    p.save(&args.project)
}

/// Unlabelled candidates pairing every mention with predicted triggers.
fn predicted_candidates(corpus: &Corpus, preds: &[Prediction]) -> Result<Vec<ArgumentCandidate>> {
    let mut by_sentence: BTreeMap<(&str, usize), Vec<distsup::TriggerSpan>> = BTreeMap::new();
    for p in preds.iter().filter(|p| !p.is_argument()) {
        by_sentence.entry((p.doc_id.as_str(), p.sentence)).or_default().push(distsup::TriggerSpan {
            s: p.s,
            e: p.e,
            event_type: p.label.clone(),
        });
    }
    let mut out = Vec::new();
    for (doc_id, index, s) in corpus.sentences() {
        if let Some(triggers) = by_sentence.get(&(doc_id, index)) {
            out.extend(distsup::build_argument_candidates(doc_id, index, s, triggers, None, false));
        }
    }
    Ok(out)
}

fn train(task: Task, args: TrainArgs) -> Result<()> {
    let corpus = load_corpus(&args.corpus)?;
    let split = DatasetSplit::load(&args.split).stage("load split")?;
    let table = load_embeddings::<f64>(&args.embeddings).stage("load embeddings")?;
    let grid = load_grid(args.grid.as_deref(), args.seed)?;
    let (vocab, words) = Vocabulary::for_corpus(&table, &corpus);
    let (train_ids, dev_ids) = (split.ids(Part::Train), split.ids(Part::Dev));
    let (train_x, dev_x): (Vec<LabeledInstance>, Vec<LabeledInstance>) = match task {
        Task::Trigger => {
            let examples = distsup::read_trigger_examples(&args.examples).stage("load examples")?;
            let part = |ids: &std::collections::BTreeSet<String>| -> Vec<TriggerExample> {
                examples.iter().filter(|e| ids.contains(&e.doc_id)).cloned().collect()
            };
            let train_x = models::trigger_instances(&corpus, &part(&train_ids), &vocab).stage("featurize")?;
            let dev_x = match args.dev {
                DevChoice::Examples => models::trigger_instances(&corpus, &part(&dev_ids), &vocab),
                DevChoice::Gold => models::gold_trigger_instances(&corpus.restrict(&dev_ids), &vocab),
            }
            .stage("featurize dev")?;
            (train_x, dev_x)
        }
        Task::Argument => {
            if args.dev == DevChoice::Gold {
                return Err(Error::invalid("--dev gold applies to trigger models"));
            }
            let mut candidates = distsup::read_argument_candidates(&args.examples).stage("load candidates")?;
            if args.map_roles || args.mapping.is_some() {
                let mapping = load_mapping(args.mapping.as_deref())?;
                candidates = evcustom::rolemap::map_dataset(&candidates, &mapping).0;
            }
            let part = |ids: &std::collections::BTreeSet<String>| -> Vec<ArgumentCandidate> {
                candidates.iter().filter(|c| ids.contains(&c.doc_id)).cloned().collect()
            };
            let train_x = models::argument_instances(&corpus, &part(&train_ids), &vocab).stage("featurize")?;
            let dev_x = models::argument_instances(&corpus, &part(&dev_ids), &vocab).stage("featurize dev")?;
            (train_x, dev_x)
        }
    };
    log::info!("{} training and {} dev instances", train_x.len(), dev_x.len());
    let (model, report) = models::train(task, vocab, words, &train_x, &dev_x, &grid).stage("train")?;
    model.save(&args.out)?;
    let report_path = args.out.with_extension("selection.json");
    io::write_json(&report_path, &report)?;
    let best = &report.results[report.selected];
    print_json(&serde_json::json!({ "selected": best.point, "dev": best.dev, "report": report_path }))
}
