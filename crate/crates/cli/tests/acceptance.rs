//! Acceptance gate. Runs without the libtest harness so every criterion
//! prints one line; exits nonzero if any fails.

mod common;

use std::collections::BTreeSet;
use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::Instant;

use evcustom::corpus::{self, Corpus, Document, GoldArgument, GoldTrigger, Sentence};
use evcustom::distsup::{self, Lexicons};
use evcustom::embeddings::{train_skipgram, EmbeddingTable, SkipgramConfig};
use evcustom::eval::{self, argument_items, candidate_items, leave_one_out, plan_folds, score_items, ArgumentSetup, MatchMode, ScoreItem};
use evcustom::models::{self, train, Prediction, Task, TrainConfig, Vocabulary};
use evcustom::neuralnet::{gradient_check, Activation, AdadeltaState, Tensor};
use evcustom::rolemap::{map_role, GenericRole, RoleMapping};
use evcustom::wordnet::{load_wordnet, Pos};
use evcustom_testkit::{self as kit, gradcase, oracle};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn gradients() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for argument in [false, true] {
        for seed in 0..10u64 {
            let (m, x, label) = gradcase::case(argument, Activation::Tanh, seed);
            let r = gradient_check(&m, &x, label, &[1.0, 3.0, 3.0, 3.0], 1e-4).map_err(|e| e.to_string())?;
            worst = worst.max(r.max_relative_error);
        }
    }
    let secs = start.elapsed().as_secs_f64();
    ensure!(worst < 1e-4, "max relative error {worst:.3e}");
    ensure!(secs < 10.0, "took {secs:.1}s");
    Ok(format!("max relative error {worst:.2e} over 20 models in {secs:.2}s"))
}

fn overfit() -> Outcome {
    let grid = TrainConfig {
        epochs: vec![200],
        positive_weights: vec![1.0],
        batch_sizes: vec![10],
        filters: vec![16],
        seed: 11,
        ..TrainConfig::default()
    };
    let mut notes = Vec::new();
    for task in [Task::Trigger, Task::Argument] {
        let start = Instant::now();
        let (vocab, words, data) = match task {
            Task::Trigger => kit::separable_trigger_set(50, 8, 1),
            Task::Argument => kit::separable_argument_set(50, 8, 2),
        };
        let (model, _) = train(task, vocab, words, &data, &data, &grid).map_err(|e| e.to_string())?;
        let acc = model.accuracy(&data).map_err(|e| e.to_string())?;
        let secs = start.elapsed().as_secs_f64();
        ensure!(acc >= 0.98, "{task:?} accuracy {acc}");
        ensure!(secs < 60.0, "{task:?} took {secs:.1}s");
        notes.push(format!("{task:?} acc {acc:.3} in {secs:.1}s"));
    }
    Ok(notes.join(", "))
}

fn adadelta() -> Outcome {
    // E[g²] = 0.05, E[Δx²] = 0, so Δx = -sqrt(1e-6) / sqrt(0.05 + 1e-6).
    let hand = -(1e-6f64).sqrt() / (0.05f64 + 1e-6).sqrt();
    ensure!((hand - -0.0044721).abs() <= 1e-6, "hand value {hand}");
    let mut params = vec![Tensor::<f64>::zeros(&[1])];
    let grads = vec![Tensor::from_vec(&[1], vec![1.0]).unwrap()];
    let mut state = AdadeltaState::new(0.95, 1e-6, &params);
    state.step(&mut params, &grads).map_err(|e| e.to_string())?;
    let dx = params[0].data()[0];
    ensure!((dx - -0.0044721).abs() <= 1e-6, "first step {dx}");
    ensure!((dx - hand).abs() <= 1e-12, "first step {dx} vs hand {hand}");
    Ok(format!("first step {dx:.7}"))
}

fn featurizer() -> Outcome {
    let s = kit::relief_sentence();
    let at = |w: &str| s.tokens.iter().position(|t| t.text == w).unwrap();
    let x = models::featurize_trigger(&Vocabulary::default(), &s, at("relief")).map_err(|e| e.to_string())?;
    let (on, recovery) = (x.pf_trigger[at("on")], x.pf_trigger[at("recovery")]);
    ensure!(on == -1 && recovery == 2, "on {on}, recovery {recovery}");
    Ok("on -1, recovery +2".into())
}

const ACTOR_ROLES: [&str; 15] = [
    "Person", "Agent", "Victim", "Artifact", "Buyer", "Seller", "Giver", "Recipient", "Org", "Attacker", "Target",
    "Entity", "Defendant", "Prosecutor", "Plaintiff",
];

const ALL_ROLES: [&str; 36] = [
    "Person", "Place", "Buyer", "Seller", "Beneficiary", "Price", "Artifact", "Origin", "Destination", "Giver",
    "Recipient", "Money", "Org", "Agent", "Victim", "Instrument", "Entity", "Attacker", "Target", "Defendant",
    "Adjudicator", "Prosecutor", "Plaintiff", "Crime", "Position", "Sentence", "Vehicle", "Time-Within",
    "Time-Starting", "Time-Ending", "Time-Before", "Time-After", "Time-Holds", "Time-At-Beginning", "Time-At-End",
    "Time",
];

const EVENT_TYPES: [&str; 33] = [
    "Be-Born", "Marry", "Divorce", "Injure", "Die", "Transport", "Transfer-Ownership", "Transfer-Money", "Start-Org",
    "Merge-Org", "Declare-Bankruptcy", "End-Org", "Attack", "Demonstrate", "Meet", "Phone-Write", "Start-Position",
    "End-Position", "Nominate", "Elect", "Arrest-Jail", "Release-Parole", "Trial-Hearing", "Charge-Indict", "Sue",
    "Convict", "Sentence", "Fine", "Execute", "Extradite", "Acquit", "Appeal", "Pardon",
];

fn role_mapping() -> Outcome {
    let adjudicated = ["Convict", "Sentence", "Fine", "Acquit", "Pardon"];
    let mut checked = 0;
    for role in ALL_ROLES {
        for ty in EVENT_TYPES {
            let want = if ACTOR_ROLES.contains(&role) || (role == "Adjudicator" && adjudicated.contains(&ty)) {
                Some(GenericRole::Actor)
            } else if role == "Place" {
                Some(GenericRole::Place)
            } else if role == "Time" {
                Some(GenericRole::Time)
            } else {
                None
            };
            let got = map_role(role, ty);
            ensure!(got == want, "{role}/{ty}: got {got:?}, want {want:?}");
            checked += 1;
        }
    }
    ensure!(map_role("Typo", "Attack").is_none(), "unknown role mapped");
    Ok(format!("{checked} role/type pairs"))
}

const SCORE_TYPES: [&str; 3] = ["Attack", "Injury", "Meet"];
const SCORE_ROLES: [&str; 3] = ["Actor", "Place", "Time"];

/// "a b c d e f g h": token i at [2i, 2i+1). Tokens 0..5 carry scored
/// spans; token 5 + k holds the trigger of SCORE_TYPES[k] in argument cases.
fn letters() -> Sentence {
    Sentence::from_text("a b c d e f g h")
}

fn random_span(rng: &mut ChaCha8Rng) -> (usize, usize) {
    let first = rng.gen_range(0..5);
    let last = rng.gen_range(first..(first + 2).min(5));
    (2 * first, 2 * last + 1)
}

fn random_items(rng: &mut ChaCha8Rng, n: usize, argument: bool) -> Vec<ScoreItem> {
    (0..n)
        .map(|_| {
            let (s, e) = random_span(rng);
            ScoreItem {
                doc_id: format!("d{}", rng.gen_range(0..2)),
                sentence: rng.gen_range(0..2),
                s,
                e,
                event_type: SCORE_TYPES[rng.gen_range(0..3)].to_string(),
                role: argument.then(|| SCORE_ROLES[rng.gen_range(0..3)].to_string()),
            }
        })
        .collect()
}

fn trigger_of(ty: &str) -> (usize, usize) {
    let k = SCORE_TYPES.iter().position(|t| *t == ty).unwrap();
    (2 * (5 + k), 2 * (5 + k) + 1)
}

fn gold_corpus(gold: &[ScoreItem], argument: bool) -> Corpus {
    let documents = (0..2)
        .map(|d| Document {
            doc_id: format!("d{d}"),
            sentences: (0..2)
                .map(|i| {
                    let mut s = letters();
                    let here = gold.iter().filter(|g| g.doc_id == format!("d{d}") && g.sentence == i);
                    if argument {
                        for ty in SCORE_TYPES {
                            let (ts, te) = trigger_of(ty);
                            s.gold_triggers.push(GoldTrigger { s: ts, e: te, event_type: ty.into() });
                        }
                        for g in here {
                            let (ts, te) = trigger_of(&g.event_type);
                            s.gold_arguments.push(GoldArgument {
                                trigger_s: ts,
                                trigger_e: te,
                                s: g.s,
                                e: g.e,
                                role: g.role.clone().unwrap(),
                            });
                        }
                    } else {
                        for g in here {
                            s.gold_triggers.push(GoldTrigger { s: g.s, e: g.e, event_type: g.event_type.clone() });
                        }
                    }
                    s
                })
                .collect(),
        })
        .collect();
    Corpus::new(documents).unwrap()
}

fn as_predictions(items: &[ScoreItem]) -> Vec<Prediction> {
    items
        .iter()
        .map(|p| {
            let trigger = p.role.as_ref().map(|_| trigger_of(&p.event_type));
            Prediction {
                doc_id: p.doc_id.clone(),
                sentence: p.sentence,
                s: p.s,
                e: p.e,
                label: p.role.clone().unwrap_or_else(|| p.event_type.clone()),
                conf: 1.0,
                trigger_s: trigger.map(|t| t.0),
                trigger_e: trigger.map(|t| t.1),
                event_type: p.role.as_ref().map(|_| p.event_type.clone()),
            }
        })
        .collect()
}

/// Largest one-to-one matching by brute force. Items only pair with equal
/// items, so the search runs over each group of equal items separately.
fn brute_matching(pred: &[ScoreItem], gold: &[ScoreItem]) -> usize {
    let keys: BTreeSet<&ScoreItem> = pred.iter().chain(gold).collect();
    keys.into_iter()
        .map(|k| {
            let p: Vec<ScoreItem> = pred.iter().filter(|x| *x == k).cloned().collect();
            let g: Vec<ScoreItem> = gold.iter().filter(|x| *x == k).cloned().collect();
            oracle::exhaustive(&p, &g)
        })
        .sum()
}

fn scorer() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for case in 0..1000 {
        let argument = case % 2 == 1;
        let np = rng.gen_range(0..=20);
        let ng = rng.gen_range(0..=20);
        let pred = random_items(&mut rng, np, argument);
        let gold = random_items(&mut rng, ng, argument);
        let corpus = gold_corpus(&gold, argument);
        let preds = as_predictions(&pred);
        for mode in [MatchMode::OneToOne, MatchMode::Any] {
            let report = if argument {
                eval::score_arguments(&preds, &corpus, None, mode).map_err(|e| e.to_string())?
            } else {
                eval::score_triggers(&preds, &corpus, mode)
            };
            let want = match mode {
                MatchMode::OneToOne => {
                    let m = brute_matching(&pred, &gold);
                    oracle::prf(m, np, m, ng)
                }
                MatchMode::Any => {
                    let (mp, mg) = oracle::any_matches(&pred, &gold);
                    oracle::prf(mp, np, mg, ng)
                }
            };
            let got = (report.overall.p, report.overall.r, report.overall.f1);
            ensure!(got == want, "case {case} {mode}: got {got:?}, want {want:?}");
        }
    }
    Ok("1000 cases, one-to-one and any, exact".into())
}

fn distant_supervision() -> Outcome {
    let lex = kit::event_lexicons();
    let mut capped = 0;
    for seed in 0..6u64 {
        let corpus = kit::event_corpus(100 + 80 * seed as usize, 3, seed);
        let all = distsup::find_occurrences(&corpus, &lex, usize::MAX).map_err(|e| e.to_string())?;
        let got = distsup::find_occurrences(&corpus, &lex, 60).map_err(|e| e.to_string())?;
        for ty in lex.keys() {
            let avail = all.iter().filter(|e| &e.label == ty).count();
            let n = got.iter().filter(|e| &e.label == ty).count();
            ensure!(n <= 60, "seed {seed} {ty}: {n} examples");
            ensure!(n == avail.min(60), "seed {seed} {ty}: {n} of {avail}");
            capped += usize::from(avail > 60);
        }
    }
    ensure!(capped > 0, "no type ever reached the cap");

    let s1: Lexicons = [("Injury", "wounded"), ("Attack", "blast")]
        .iter()
        .map(|(t, w)| (t.to_string(), BTreeSet::from([w.to_string()])))
        .collect();
    let examples = distsup::find_occurrences(&kit::s1_corpus(), &s1, 60).map_err(|e| e.to_string())?;
    let got: BTreeSet<(String, String)> = examples.iter().map(|e| (e.text.clone(), e.label.clone())).collect();
    let want = BTreeSet::from([("wounded".to_string(), "Injury".to_string()), ("blast".into(), "Attack".into())]);
    ensure!(examples.len() == 2 && got == want, "S1 examples {got:?}");
    Ok(format!("cap held on 6 corpora ({capped} capped types); S1 exact"))
}

fn split_sizes() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let d = dir.path();
    corpus::write_corpus(&d.join("corpus.jsonl"), &kit::event_corpus(1365, 1, 3)).map_err(|e| e.to_string())?;
    let mut sizes = Vec::new();
    for out in ["a.json", "b.json"] {
        let stdout = common::ok(d, &["split", "--corpus", "corpus.jsonl", "--ratios", "0.6,0.2,0.2", "--seed", "7", "--out", out]);
        let v: serde_json::Value = serde_json::from_str(&stdout).map_err(|e| e.to_string())?;
        sizes.push(["train", "dev", "test"].map(|k| v[k].as_i64().unwrap()));
    }
    let [tr, dv, te] = sizes[0];
    ensure!((tr - 818).abs() <= 1 && (dv - 274).abs() <= 1 && (te - 273).abs() <= 1, "sizes {tr}/{dv}/{te}");
    let same = fs::read(d.join("a.json")).unwrap() == fs::read(d.join("b.json")).unwrap();
    ensure!(same, "split files differ");
    Ok(format!("{tr}/{dv}/{te}, byte-identical rerun"))
}

fn loo_integrity() -> Outcome {
    let grouping = kit::grouping();
    let groups: BTreeSet<&String> = grouping.values().collect();
    ensure!(groups.len() == 8, "{} groups", groups.len());

    let corpus = kit::event_corpus(60, 3, 2);
    let table: EmbeddingTable<f64> = kit::clustered_embeddings(&corpus, &[], 8, 2);
    let (vocab, words) = Vocabulary::for_corpus(&table, &corpus);
    let candidates = distsup::gold_argument_candidates(&corpus, Some(&RoleMapping::default()));
    let (mut train, mut dev, mut test) = (Vec::new(), Vec::new(), Vec::new());
    for c in candidates {
        match c.doc_id.bytes().last().unwrap() % 5 {
            0 => dev.push(c),
            1 => test.push(c),
            _ => train.push(c),
        }
    }
    let plan = plan_folds(&train, &dev, &test, &grouping).map_err(|e| e.to_string())?;
    for fold in &plan.folds {
        let leaked = fold.train.iter().filter(|&&i| grouping[&train[i].event_type] == fold.group).count();
        ensure!(leaked == 0, "fold {} trains on {leaked} held-out examples", fold.group);
    }

    let grid = TrainConfig {
        epochs: vec![3],
        positive_weights: vec![3.0],
        batch_sizes: vec![16],
        filters: vec![6],
        seed: 4,
        ..TrainConfig::default()
    };
    let setup = ArgumentSetup { corpus: &corpus, vocab: &vocab, words: &words, config: &grid, mode: MatchMode::OneToOne };
    let report = leave_one_out(&setup, &train, &dev, &test, &grouping).map_err(|e| e.to_string())?;
    for fold in &report.plan.folds {
        let leaked = fold.train.iter().filter(|&&i| grouping[&train[i].event_type] == fold.group).count();
        ensure!(leaked == 0, "fold {} trains on held-out examples", fold.group);
    }
    let preds: Vec<Prediction> = report.folds.iter().flat_map(|f| f.predictions.clone()).collect();
    let gold: Vec<_> = report.plan.folds.iter().flat_map(|f| f.eval.iter().map(|&i| test[i].clone())).collect();
    let union = score_items(
        &argument_items(&preds, None).map_err(|e| e.to_string())?,
        &candidate_items(&gold),
        MatchMode::OneToOne,
    );
    ensure!(report.pooled.counts == union.counts, "pooled {:?} vs union {:?}", report.pooled.counts, union.counts);
    ensure!(report.pooled.overall == union.overall, "pooled PRF differs from union");
    Ok(format!("{} folds, no leakage, pooled == union", report.folds.len()))
}

fn wordnet() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    kit::write_chain_and_cycle_wordnet(dir.path());
    let db = load_wordnet(dir.path()).map_err(|e| e.to_string())?;
    let set = |w: &[&str]| w.iter().map(|s| s.to_string()).collect::<BTreeSet<_>>();
    let h = |w: &str, d: usize| db.hyponyms(w, Pos::Noun, d).map_err(|e| e.to_string());
    ensure!(h("attack", 1)? == set(&["ambush", "surprise attack"]), "depth 1");
    ensure!(h("attack", 2)? == set(&["ambush", "surprise attack", "bushwhack"]), "depth 2");
    ensure!(h("riot", 1000)? == set(&["uprising"]), "cycle from riot");
    ensure!(h("uprising", usize::MAX)? == set(&["revolt", "riot"]), "cycle from uprising");
    Ok("depths 1 and 2 exact, cycle terminates".into())
}

fn skipgram() -> Outcome {
    let start = Instant::now();
    let corpus = kit::two_cluster_corpus(200, 1);
    let config = SkipgramConfig { dim: 20, window: 3, negatives: 5, epochs: 10, seed: 3, ..SkipgramConfig::default() };
    let table = train_skipgram::<f64>(&corpus, &config).map_err(|e| e.to_string())?;
    let (intra, inter) = kit::cluster_separation(&table);
    let secs = start.elapsed().as_secs_f64();
    ensure!(intra - inter >= 0.2, "intra {intra:.3} inter {inter:.3}");
    ensure!(secs < 30.0, "took {secs:.1}s");
    Ok(format!("intra {intra:.3} inter {inter:.3} in {secs:.1}s"))
}

fn pipeline() -> Outcome {
    let a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let b = tempfile::tempdir().map_err(|e| e.to_string())?;
    common::pipeline_inputs(a.path(), 80, 5);
    common::pipeline_inputs(b.path(), 80, 5);
    let fa = common::run_pipeline(a.path());
    let fb = common::run_pipeline(b.path());
    for (x, y) in fa.iter().zip(&fb) {
        let same = fs::read(x).map_err(|e| e.to_string())? == fs::read(y).map_err(|e| e.to_string())?;
        ensure!(same, "{} differs", x.file_name().unwrap().to_string_lossy());
    }
    Ok(format!("{} files byte-identical", fa.len()))
}

fn table_rows(stdout: &str, title: &str) -> Vec<String> {
    let mut lines = stdout.lines().skip_while(|l| !l.starts_with(title)).skip(1);
    // header, then rows until a blank line
    lines.next();
    lines.take_while(|l| !l.trim().is_empty()).map(|l| l.split_whitespace().next().unwrap_or("").to_string()).collect()
}

fn arm_shape() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let suite = kit::write_arm_fixture(dir.path(), 30, 3);
    let stdout = common::ok(dir.path(), &["arm", "--config", suite.to_str().unwrap()]);
    let triggers = table_rows(&stdout, "Triggers");
    let arguments = table_rows(&stdout, "Arguments");
    ensure!(triggers == ["distant", "adjudicated", "downsampled"], "trigger rows {triggers:?}\n{stdout}");
    ensure!(arguments == ["normal-mapped", "pre-mapped", "leave-one-out"], "argument rows {arguments:?}\n{stdout}");
    Ok("3 trigger rows, 3 argument rows".into())
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 13] = [
        ("gradient correctness", gradients),
        ("overfit oracle", overfit),
        ("adadelta first step", adadelta),
        ("featurizer anchor", featurizer),
        ("role mapping table", role_mapping),
        ("scorer oracle", scorer),
        ("distant supervision cap and S1", distant_supervision),
        ("split sizes", split_sizes),
        ("leave-one-out integrity", loo_integrity),
        ("wordnet fixture", wordnet),
        ("skip-gram separation", skipgram),
        ("pipeline determinism", pipeline),
        ("experiment-arm shape", arm_shape),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let outcome = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail}");
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
