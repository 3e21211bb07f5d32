//! Fixtures shared by the evcustom test suites: hand-annotated sentences,
//! a templated news-like event corpus, clustered embeddings, WNDB files and
//! small separable classification sets.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use evcustom::corpus::{Corpus, Document, GoldArgument, GoldTrigger, Mention, MentionKind, Sentence};
use evcustom::distsup::ArgumentCandidate;
use evcustom::embeddings::EmbeddingTable;
use evcustom::models::{self, LabeledInstance, Vocabulary};
use evcustom::neuralnet::Tensor;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Locates `phrase` as a whole-token sequence and returns its char span.
pub fn span_of(sentence: &Sentence, phrase: &str) -> (usize, usize) {
    let want: Vec<&str> = phrase.split_whitespace().collect();
    let toks: Vec<&str> = sentence.tokens.iter().map(|t| t.text.as_str()).collect();
    let at = (0..=toks.len().saturating_sub(want.len()))
        .find(|&i| toks[i..i + want.len()] == want[..])
        .unwrap_or_else(|| panic!("{phrase:?} not found in {:?}", sentence.text));
    sentence.char_span(at, at + want.len())
}

/// Builds a sentence from raw text and phrase-level annotations.
pub fn annotated(
    text: &str,
    triggers: &[(&str, &str)],
    mentions: &[(&str, MentionKind)],
    args: &[(&str, &str, &str)],
) -> Sentence {
    let mut s = Sentence::from_text(text);
    let mut gold_triggers = Vec::new();
    for (phrase, ty) in triggers {
        let (a, b) = span_of(&s, phrase);
        gold_triggers.push(GoldTrigger { s: a, e: b, event_type: ty.to_string() });
    }
    let mut ms = Vec::new();
    for (phrase, kind) in mentions {
        let (a, b) = span_of(&s, phrase);
        ms.push(Mention { s: a, e: b, kind: *kind, label: String::new() });
    }
    let mut gold_args = Vec::new();
    for (trigger, mention, role) in args {
        let (ts, te) = span_of(&s, trigger);
        let (a, b) = span_of(&s, mention);
        gold_args.push(GoldArgument { trigger_s: ts, trigger_e: te, s: a, e: b, role: role.to_string() });
    }
    s.gold_triggers = gold_triggers;
    s.mentions = ms;
    s.gold_arguments = gold_args;
    s
}

pub const S1: &str = "21 people were wounded in Tuesday's southern Philippines airport blast.";

/// The wounded/blast sentence with gold triggers, mentions and arguments.
pub fn s1_sentence() -> Sentence {
    use MentionKind::*;
    annotated(
        S1,
        &[("wounded", "Injury"), ("blast", "Attack")],
        &[("21 people", Entity), ("Tuesday's", Time), ("southern Philippines", Entity), ("airport", Entity)],
        &[
            ("wounded", "21 people", "Victim"),
            ("wounded", "airport", "Place"),
            ("wounded", "Tuesday's", "Time"),
            ("blast", "21 people", "Target"),
            ("blast", "airport", "Place"),
            ("blast", "Tuesday's", "Time"),
        ],
    )
}

pub fn s1_corpus() -> Corpus {
    Corpus::new(vec![Document { doc_id: "s1".into(), sentences: vec![s1_sentence()] }]).unwrap()
}

pub const RELIEF: &str = "The government spent money on relief and recovery efforts.";

pub fn relief_sentence() -> Sentence {
    Sentence::from_text(RELIEF)
}

/// One event type of the synthetic corpus.
pub struct EventSpec {
    pub event_type: &'static str,
    /// Coarse group used by leave-one-out.
    pub group: &'static str,
    pub triggers: &'static [&'static str],
    /// Whitespace-separated template; `{T}` is the trigger and
    /// `{Role:class}` a filler of that class carrying that role.
    pub template: &'static str,
}

pub const EVENTS: &[EventSpec] = &[
    EventSpec {
        event_type: "Attack",
        group: "Conflict",
        triggers: &["attacked", "bombed", "shelled", "raided", "stormed"],
        template: "{Attacker:actor} {T} {Target:actor} in {Place:place} on {Time:time} .",
    },
    EventSpec {
        event_type: "Demonstrate",
        group: "Conflict",
        triggers: &["protested", "marched", "rallied", "demonstrated"],
        template: "{Entity:actor} {T} in {Place:place} on {Time:time} .",
    },
    EventSpec {
        event_type: "Injure",
        group: "Life",
        triggers: &["wounded", "injured", "hurt", "maimed"],
        template: "{Victim:actor} were {T} in {Place:place} on {Time:time} .",
    },
    EventSpec {
        event_type: "Die",
        group: "Life",
        triggers: &["died", "perished", "drowned"],
        template: "{Victim:actor} {T} in {Place:place} .",
    },
    EventSpec {
        event_type: "Transfer-Ownership",
        group: "Transaction",
        triggers: &["bought", "purchased", "acquired"],
        template: "{Buyer:actor} {T} {Artifact:thing} from {Seller:actor} on {Time:time} .",
    },
    EventSpec {
        event_type: "Convict",
        group: "Justice",
        triggers: &["convicted", "condemned"],
        template: "{Adjudicator:court} {T} {Defendant:actor} on {Time:time} .",
    },
    EventSpec {
        event_type: "Trial-Hearing",
        group: "Justice",
        triggers: &["tried", "arraigned"],
        template: "{Adjudicator:court} {T} {Defendant:actor} in {Place:place} .",
    },
    EventSpec {
        event_type: "Start-Position",
        group: "Personnel",
        triggers: &["appointed", "hired", "named"],
        template: "{Person:actor} was {T} as {Position:position} on {Time:time} .",
    },
    EventSpec {
        event_type: "Meet",
        group: "Contact",
        triggers: &["met", "visited", "hosted"],
        template: "{Entity:actor} {T} {Entity:actor} in {Place:place} on {Time:time} .",
    },
    EventSpec {
        event_type: "Transport",
        group: "Movement",
        triggers: &["shipped", "moved", "transported"],
        template: "{Agent:actor} {T} {Artifact:thing} to {Destination:place} on {Time:time} .",
    },
    EventSpec {
        event_type: "Start-Org",
        group: "Business",
        triggers: &["founded", "launched", "established"],
        template: "{Agent:actor} {T} {Org:org} in {Place:place} .",
    },
];

const NOISE: &[&str] = &[
    "{Speaker:actor} said the weather in {Place:place} was calm on {Time:time} .",
    "{Speaker:actor} said the market in {Place:place} was stable on {Time:time} .",
    "prices in {Place:place} were quiet on {Time:time} according to {Speaker:actor} .",
];

pub fn fillers(class: &str) -> &'static [&'static str] {
    match class {
        "actor" => &["rebels", "militants", "soldiers", "police", "villagers", "students", "the army", "workers", "officials", "farmers"],
        "place" => &["Baghdad", "Kabul", "Manila", "Lagos", "Nairobi", "the capital", "the village", "Mogadishu"],
        "time" => &["Monday", "Tuesday", "Wednesday", "Friday", "Sunday", "yesterday"],
        "thing" => &["weapons", "land", "shares", "the factory", "grain"],
        "court" => &["the court", "a judge", "the tribunal"],
        "position" => &["director", "minister", "chairman"],
        "org" => &["a bank", "a company", "a party"],
        _ => panic!("unknown filler class {class}"),
    }
}

/// Event type → coarse group.
pub fn grouping() -> BTreeMap<String, String> {
    EVENTS.iter().map(|e| (e.event_type.to_string(), e.group.to_string())).collect()
}

fn render(template: &str, trigger: Option<(&str, &str)>, rng: &mut ChaCha8Rng) -> Sentence {
    let mut words: Vec<String> = Vec::new();
    let mut trig: Option<(String, String)> = None;
    let mut slots: Vec<(String, String, String)> = Vec::new();
    for piece in template.split_whitespace() {
        if piece == "{T}" {
            let (word, ty) = trigger.expect("event template");
            words.push(word.to_string());
            trig = Some((word.to_string(), ty.to_string()));
        } else if let Some(inner) = piece.strip_prefix('{').and_then(|p| p.strip_suffix('}')) {
            let (role, class) = inner.split_once(':').expect("role:class");
            let used: Vec<&str> = slots.iter().map(|(_, f, _)| f.as_str()).collect();
            let options: Vec<&str> = fillers(class).iter().copied().filter(|f| !used.contains(f)).collect();
            let filler = options.choose(rng).expect("filler left");
            words.push(filler.to_string());
            slots.push((role.to_string(), filler.to_string(), class.to_string()));
        } else {
            words.push(piece.to_string());
        }
    }
    let text = words.join(" ");
    let triggers: Vec<(&str, &str)> = trig.iter().map(|(w, t)| (w.as_str(), t.as_str())).collect();
    let mentions: Vec<(&str, MentionKind)> = slots
        .iter()
        .map(|(_, f, c)| (f.as_str(), if c == "time" { MentionKind::Time } else { MentionKind::Entity }))
        .collect();
    let args: Vec<(&str, &str, &str)> = match &trig {
        Some((w, _)) => slots.iter().map(|(r, f, _)| (w.as_str(), f.as_str(), r.as_str())).collect(),
        None => Vec::new(),
    };
    annotated(&text, &triggers, &mentions, &args)
}

/// Templated corpus: `docs` documents of `sentences` sentences, about 70%
/// describing an event of one of [`EVENTS`].
pub fn event_corpus(docs: usize, sentences: usize, seed: u64) -> Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let documents = (0..docs)
        .map(|d| {
            let sentences = (0..sentences)
                .map(|_| {
                    if rng.gen_bool(0.7) {
                        let spec = EVENTS.choose(&mut rng).unwrap();
                        let word = *spec.triggers.choose(&mut rng).unwrap();
                        render(spec.template, Some((word, spec.event_type)), &mut rng)
                    } else {
                        let template = *NOISE.choose(&mut rng).unwrap();
                        render(template, None, &mut rng)
                    }
                })
                .collect();
            Document { doc_id: format!("doc{d:04}"), sentences }
        })
        .collect();
    Corpus::new(documents).unwrap()
}

/// Cluster id of a corpus word: its event type for triggers, its filler
/// class for filler heads.
fn category(word: &str) -> Option<String> {
    for e in EVENTS {
        if e.triggers.contains(&word) {
            return Some(format!("trigger:{}", e.event_type));
        }
    }
    for class in ["actor", "place", "time", "thing", "court", "position", "org"] {
        let heads = fillers(class).iter().filter_map(|f| f.split_whitespace().last());
        if heads.into_iter().any(|w| w.eq_ignore_ascii_case(word)) {
            return Some(format!("filler:{class}"));
        }
    }
    None
}

/// Embeddings for every word of `corpus` (plus `extra`): words of one
/// cluster sit around a shared random centre, other words are random.
pub fn clustered_embeddings(corpus: &Corpus, extra: &[&str], dim: usize, seed: u64) -> EmbeddingTable<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut words: Vec<String> = corpus
        .sentences()
        .flat_map(|(_, _, s)| s.tokens.iter().map(|t| t.text.to_lowercase()).collect::<Vec<_>>())
        .chain(extra.iter().map(|w| w.to_lowercase()))
        .chain(EVENTS.iter().flat_map(|e| e.triggers.iter().map(|w| w.to_string())))
        .collect();
    words.sort();
    words.dedup();
    let mut centres: HashMap<String, Vec<f64>> = HashMap::new();
    let mut table = EmbeddingTable::new(dim).unwrap();
    for w in &words {
        let v: Vec<f64> = match category(w) {
            Some(c) => {
                let centre = centres
                    .entry(c)
                    .or_insert_with(|| (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect())
                    .clone();
                centre.iter().map(|x| x + rng.gen_range(-0.15..0.15)).collect()
            }
            None => (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        };
        table.insert(w, v).unwrap();
    }
    table
}

/// A synset for [`write_wndb`]: local id, lemmas and ids of hyponyms.
pub struct SynsetSpec<'a> {
    pub id: &'a str,
    pub lemmas: &'a [&'a str],
    pub hyponyms: &'a [&'a str],
}

const LICENSE: &str = "  1 This software and database is being provided to you, the LICENSEE, by\n  2 Princeton University under the following license.\n";

/// Writes `data.{noun,verb}` and `index.{noun,verb}` with real byte
/// offsets. Hypernym back-pointers are added for every hyponym edge.
pub fn write_wndb(dir: &Path, nouns: &[SynsetSpec<'_>], verbs: &[SynsetSpec<'_>]) {
    for (pos, tag, specs) in [("noun", "n", nouns), ("verb", "v", verbs)] {
        // Fixed-width offsets make line lengths independent of their values.
        let mut parents: HashMap<&str, Vec<&str>> = HashMap::new();
        for s in specs {
            for h in s.hyponyms {
                parents.entry(h).or_default().push(s.id);
            }
        }
        let line = |s: &SynsetSpec<'_>, offsets: &HashMap<&str, usize>| -> String {
            let lemmas: String = s.lemmas.iter().map(|l| format!(" {} 0", l.replace(' ', "_"))).collect();
            let mut ptrs = Vec::new();
            for p in parents.get(s.id).into_iter().flatten() {
                ptrs.push(format!("@ {:08} {tag} 0000", offsets.get(p).copied().unwrap_or(0)));
            }
            for h in s.hyponyms {
                ptrs.push(format!("~ {:08} {tag} 0000", offsets.get(h).copied().unwrap_or(0)));
            }
            let ptrs: String = ptrs.iter().map(|p| format!(" {p}")).collect();
            let frames = if tag == "v" { " 01 + 02 00" } else { "" };
            format!(
                "{:08} 04 {tag} {:02x}{lemmas} {:03}{ptrs}{frames} | gloss for {}  \n",
                offsets.get(s.id).copied().unwrap_or(0),
                s.lemmas.len(),
                parents.get(s.id).map_or(0, Vec::len) + s.hyponyms.len(),
                s.id
            )
        };
        let mut offsets = HashMap::new();
        let mut pos_bytes = LICENSE.len();
        let empty = HashMap::new();
        for s in specs {
            offsets.insert(s.id, pos_bytes);
            pos_bytes += line(s, &empty).len();
        }
        let mut data = LICENSE.to_string();
        for s in specs {
            data.push_str(&line(s, &offsets));
        }
        fs::write(dir.join(format!("data.{pos}")), data).unwrap();

        let mut index: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for s in specs {
            for l in s.lemmas {
                index.entry(l.to_lowercase().replace(' ', "_")).or_default().push(offsets[s.id]);
            }
        }
        let mut text = LICENSE.to_string();
        for (lemma, offs) in index {
            let list: String = offs.iter().map(|o| format!(" {o:08}")).collect();
            text.push_str(&format!("{lemma} {tag} {} 2 @ ~ {} 0{list}  \n", offs.len(), offs.len()));
        }
        fs::write(dir.join(format!("index.{pos}")), text).unwrap();
    }
}

/// Small WNDB with attack/bombing/ambush style hyponyms for pipeline runs.
pub fn write_event_wordnet(dir: &Path) {
    write_wndb(
        dir,
        &[
            SynsetSpec { id: "attack", lemmas: &["attack", "onslaught"], hyponyms: &["raid", "bombing"] },
            SynsetSpec { id: "raid", lemmas: &["raid", "foray"], hyponyms: &[] },
            SynsetSpec { id: "bombing", lemmas: &["bombing"], hyponyms: &["shelling"] },
            SynsetSpec { id: "shelling", lemmas: &["shelling"], hyponyms: &[] },
        ],
        &[
            SynsetSpec { id: "attack", lemmas: &["attack", "assail"], hyponyms: &["bomb", "storm"] },
            SynsetSpec { id: "bomb", lemmas: &["bomb", "bombard"], hyponyms: &["shell"] },
            SynsetSpec { id: "storm", lemmas: &["storm", "raid"], hyponyms: &[] },
            SynsetSpec { id: "shell", lemmas: &["shell"], hyponyms: &[] },
            SynsetSpec { id: "injure", lemmas: &["injure", "wound"], hyponyms: &["maim"] },
            SynsetSpec { id: "maim", lemmas: &["maim"], hyponyms: &[] },
        ],
    );
}

/// Random embeddings for `words` in a frozen vocabulary.
pub fn vocab_for(words: &[&str], dim: usize, seed: u64) -> (Vocabulary, Tensor<f64>) {
    let table = evcustom::embeddings::random_table::<f64>(words, dim, seed).unwrap();
    Vocabulary::build(&table, words.iter().copied())
}

const FILL: &[&str] = &["the", "a", "city", "men", "said", "of", "near", "from", "local", "new", "two", "in"];

/// `n` trigger instances whose label is fixed by the anchor word: "blast"
/// is Attack, "wounded" is Injury, anything else NONE.
pub fn separable_trigger_set(n: usize, dim: usize, seed: u64) -> (Vocabulary, Tensor<f64>, Vec<LabeledInstance>) {
    let anchors = [("blast", "Attack"), ("wounded", "Injury"), ("market", "NONE"), ("river", "NONE")];
    let all: Vec<&str> = FILL.iter().chain(anchors.iter().map(|(w, _)| w)).copied().collect();
    let (vocab, words) = vocab_for(&all, dim, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..n)
        .map(|i| {
            let (anchor, label) = anchors[i % anchors.len()];
            let len = rng.gen_range(4..9);
            let at = rng.gen_range(0..len);
            let text: Vec<&str> = (0..len).map(|j| if j == at { anchor } else { FILL.choose(&mut rng).unwrap() }).collect();
            let s = Sentence::from_text(&text.join(" "));
            LabeledInstance {
                instance: models::featurize_trigger(&vocab, &s, at).unwrap(),
                label: label.to_string(),
                mention_kind: None,
            }
        })
        .collect();
    (vocab, words, data)
}

/// `n` argument instances whose label is fixed by the mention word.
pub fn separable_argument_set(n: usize, dim: usize, seed: u64) -> (Vocabulary, Tensor<f64>, Vec<LabeledInstance>) {
    let mentions = [
        ("rebels", MentionKind::Entity, "Actor"),
        ("Baghdad", MentionKind::Entity, "Place"),
        ("Monday", MentionKind::Time, "Time"),
        ("grain", MentionKind::Entity, "NONE"),
    ];
    let mut all: Vec<&str> = FILL.to_vec();
    all.extend(["attacked", "rebels", "baghdad", "monday", "grain"]);
    let (vocab, words) = vocab_for(&all, dim, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let data = (0..n)
        .map(|i| {
            let (word, kind, label) = mentions[i % mentions.len()];
            let len = rng.gen_range(5..9);
            let t = rng.gen_range(0..len);
            let m = loop {
                let m = rng.gen_range(0..len);
                if m != t {
                    break m;
                }
            };
            let text: Vec<&str> = (0..len)
                .map(|j| match j {
                    j if j == t => "attacked",
                    j if j == m => word,
                    _ => FILL.choose(&mut rng).unwrap(),
                })
                .collect();
            let s = Sentence::from_text(&text.join(" "));
            let tok = &s.tokens[m];
            let mention = Mention { s: tok.start, e: tok.end, kind, label: String::new() };
            LabeledInstance {
                instance: models::featurize_argument(&vocab, &s, t, &mention).unwrap(),
                label: label.to_string(),
                mention_kind: Some(kind),
            }
        })
        .collect();
    (vocab, words, data)
}

/// Labelled argument candidates across event types, one sentence per
/// event type and group, for fold-planning checks.
pub fn grouped_candidates(per_type: usize, seed: u64) -> Vec<ArgumentCandidate> {
    let corpus = event_corpus(EVENTS.len() * per_type, 2, seed);
    evcustom::distsup::gold_argument_candidates(&corpus, Some(&evcustom::rolemap::RoleMapping::default()))
}

/// Two disjoint topics: sentences draw only from {a1,a2,a3} or only from
/// {b1,b2,b3}.
pub fn two_cluster_corpus(sentences: usize, seed: u64) -> Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let topics = [["a1", "a2", "a3"], ["b1", "b2", "b3"]];
    let sentences = (0..sentences)
        .map(|i| {
            let topic = &topics[i % 2];
            let words: Vec<&str> = (0..8).map(|_| *topic.choose(&mut rng).unwrap()).collect();
            Sentence::from_text(&words.join(" "))
        })
        .collect();
    Corpus::new(vec![Document { doc_id: "clusters".into(), sentences }]).unwrap()
}

/// Mean intra-topic and inter-topic cosine over the two-cluster words.
pub fn cluster_separation(table: &EmbeddingTable<f64>) -> (f64, f64) {
    let a = ["a1", "a2", "a3"];
    let b = ["b1", "b2", "b3"];
    let cos = |x: &str, y: &str| evcustom::embeddings::cosine(table.get(x).unwrap(), table.get(y).unwrap()).unwrap();
    let mut intra = Vec::new();
    for group in [a, b] {
        for i in 0..3 {
            for j in i + 1..3 {
                intra.push(cos(group[i], group[j]));
            }
        }
    }
    let inter: Vec<f64> = a.iter().flat_map(|x| b.iter().map(move |y| (x, y))).map(|(x, y)| cos(x, y)).collect();
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    (mean(&intra), mean(&inter))
}

/// X{attack} -> Y{ambush, surprise attack} -> Z{bushwhack}, plus a
/// three-synset hyponym cycle P -> Q -> R -> P.
pub fn write_chain_and_cycle_wordnet(dir: &Path) {
    write_wndb(
        dir,
        &[
            SynsetSpec { id: "x", lemmas: &["attack"], hyponyms: &["y"] },
            SynsetSpec { id: "y", lemmas: &["ambush", "surprise attack"], hyponyms: &["z"] },
            SynsetSpec { id: "z", lemmas: &["bushwhack"], hyponyms: &[] },
            SynsetSpec { id: "p", lemmas: &["riot"], hyponyms: &["q"] },
            SynsetSpec { id: "q", lemmas: &["uprising"], hyponyms: &["r"] },
            SynsetSpec { id: "r", lemmas: &["revolt", "riot"], hyponyms: &["p"] },
        ],
        &[],
    );
}

/// Trigger lexicons for [`EVENTS`]. "said" is a deliberately wrong
/// Demonstrate trigger so that adjudication has something to reject.
pub fn event_lexicons() -> evcustom::distsup::Lexicons {
    let mut lex: evcustom::distsup::Lexicons = EVENTS
        .iter()
        .map(|e| (e.event_type.to_string(), e.triggers.iter().map(|w| w.to_string()).collect()))
        .collect();
    lex.get_mut("Demonstrate").unwrap().insert("said".into());
    lex
}

/// Judges every positive against the gold annotation of `corpus`.
pub fn oracle_judgments(
    corpus: &Corpus,
    examples: &[evcustom::distsup::TriggerExample],
) -> BTreeMap<String, evcustom::distsup::Judgment> {
    use evcustom::distsup::Judgment;
    examples
        .iter()
        .filter(|e| e.is_positive())
        .map(|e| {
            let s = corpus.sentence(&e.doc_id, e.sentence).unwrap();
            let ok = s.gold_trigger_type(e.s, e.e) == Some(e.label.as_str());
            (e.id.clone(), if ok { Judgment::Correct } else { Judgment::Incorrect })
        })
        .collect()
}

/// Writes a complete arm-runner fixture under `dir` and returns the path
/// of its `suite.json`.
pub fn write_arm_fixture(dir: &Path, docs: usize, seed: u64) -> std::path::PathBuf {
    use evcustom::distsup;
    let corpus = event_corpus(docs, 3, seed);
    evcustom::corpus::write_corpus(&dir.join("corpus.jsonl"), &corpus).unwrap();
    evcustom::corpus::split_documents(&corpus, (0.6, 0.2, 0.2), seed)
        .unwrap()
        .save(&dir.join("split.json"))
        .unwrap();
    clustered_embeddings(&corpus, &[], 10, seed).save(&dir.join("embeddings.txt")).unwrap();
    let lex = event_lexicons();
    let mut examples = distsup::find_occurrences(&corpus, &lex, distsup::DEFAULT_CAP).unwrap();
    let negatives = distsup::sample_negatives(&corpus, &lex, &examples, 1.0, seed).unwrap();
    examples.extend(negatives.examples);
    distsup::write_trigger_examples(&dir.join("examples.jsonl"), &examples).unwrap();
    let judgments = oracle_judgments(&corpus, &examples);
    fs::write(dir.join("judgments.json"), serde_json::to_string_pretty(&judgments).unwrap()).unwrap();
    fs::write(dir.join("grouping.json"), serde_json::to_string_pretty(&grouping()).unwrap()).unwrap();
    let suite = serde_json::json!({
        "corpus": "corpus.jsonl",
        "split": "split.json",
        "embeddings": "embeddings.txt",
        "grid": {
            "epochs": [4],
            "positive_weights": [3.0],
            "batch_sizes": [16],
            "filters": [8],
            "seed": seed
        },
        "trigger": { "examples": "examples.jsonl", "judgments": "judgments.json" },
        "argument": { "grouping": "grouping.json" },
        "out": "report"
    });
    let path = dir.join("suite.json");
    fs::write(&path, serde_json::to_string_pretty(&suite).unwrap()).unwrap();
    path
}

/// Independent scoring oracles, written without reference to the scorer.
pub mod oracle {
    use evcustom::eval::ScoreItem;
    use rand::Rng;

    /// Maximum one-to-one matching by augmenting paths.
    pub fn kuhn(pred: &[ScoreItem], gold: &[ScoreItem]) -> usize {
        fn augment(p: usize, pred: &[ScoreItem], gold: &[ScoreItem], seen: &mut [bool], owner: &mut [Option<usize>]) -> bool {
            for g in 0..gold.len() {
                if pred[p] == gold[g] && !seen[g] {
                    seen[g] = true;
                    if owner[g].is_none_or(|q| augment(q, pred, gold, seen, owner)) {
                        owner[g] = Some(p);
                        return true;
                    }
                }
            }
            false
        }
        let mut owner = vec![None; gold.len()];
        (0..pred.len())
            .filter(|&p| augment(p, pred, gold, &mut vec![false; gold.len()], &mut owner))
            .count()
    }

    /// Largest one-to-one matching by trying every assignment.
    pub fn exhaustive(pred: &[ScoreItem], gold: &[ScoreItem]) -> usize {
        fn go(pred: &[ScoreItem], gold: &[ScoreItem], p: usize, used: &mut Vec<bool>) -> usize {
            if p == pred.len() {
                return 0;
            }
            let mut best = go(pred, gold, p + 1, used);
            for g in 0..gold.len() {
                if !used[g] && pred[p] == gold[g] {
                    used[g] = true;
                    best = best.max(1 + go(pred, gold, p + 1, used));
                    used[g] = false;
                }
            }
            best
        }
        go(pred, gold, 0, &mut vec![false; gold.len()])
    }

    /// Matched predictions and matched gold items when any equal item counts.
    pub fn any_matches(pred: &[ScoreItem], gold: &[ScoreItem]) -> (usize, usize) {
        let mut mp = 0;
        for p in pred {
            if gold.iter().any(|g| g == p) {
                mp += 1;
            }
        }
        let mut mg = 0;
        for g in gold {
            if pred.iter().any(|p| p == g) {
                mg += 1;
            }
        }
        (mp, mg)
    }

    pub fn prf(matched_p: usize, np: usize, matched_g: usize, ng: usize) -> (f64, f64, f64) {
        let p = if np == 0 { 0.0 } else { matched_p as f64 / np as f64 };
        let r = if ng == 0 { 0.0 } else { matched_g as f64 / ng as f64 };
        let f = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
        (p, r, f)
    }

    /// Small item drawn from a narrow space so that collisions are common.
    pub fn random_item(rng: &mut impl Rng, argument: bool) -> ScoreItem {
        let s = rng.gen_range(0..4);
        ScoreItem {
            doc_id: format!("d{}", rng.gen_range(0..2)),
            sentence: rng.gen_range(0..2),
            s,
            e: s + rng.gen_range(1..3),
            event_type: ["Attack", "Injury", "Meet"][rng.gen_range(0..3)].to_string(),
            role: argument.then(|| ["Actor", "Place", "Time"][rng.gen_range(0..3)].to_string()),
        }
    }

    /// A random scoring case of at most `max` predicted and gold items.
    pub fn random_case(rng: &mut impl Rng, max: usize) -> (Vec<ScoreItem>, Vec<ScoreItem>) {
        let argument = rng.gen_bool(0.5);
        let np = rng.gen_range(0..=max);
        let ng = rng.gen_range(0..=max);
        let pred = (0..np).map(|_| random_item(rng, argument)).collect();
        let gold = (0..ng).map(|_| random_item(rng, argument)).collect();
        (pred, gold)
    }
}

/// Random small networks and inputs for finite-difference checks.
pub mod gradcase {
    use evcustom::neuralnet::{Activation, Instance, LayerConfig, LayerStack, Tensor, WordRef};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub const VOCAB: usize = 12;
    pub const WORD_DIM: usize = 8;
    pub const FILTERS: usize = 4;
    pub const LABELS: usize = 4;
    pub const MAX_LEN: usize = 10;

    pub fn config(argument: bool, activation: Activation) -> LayerConfig {
        LayerConfig {
            word_dim: WORD_DIM,
            pf_dim: 5,
            pf_clamp: 30,
            arg_features: argument,
            lexical_slots: if argument { 6 } else { 3 },
            filter_width: 3,
            filters: FILTERS,
            labels: LABELS,
            activation,
            dropout: 0.5,
        }
    }

    fn word(rng: &mut ChaCha8Rng) -> WordRef {
        if rng.gen_bool(0.2) {
            WordRef::Unk
        } else {
            WordRef::Known(rng.gen_range(0..VOCAB))
        }
    }

    fn window(words: &[WordRef], at: usize) -> [WordRef; 3] {
        let get = |k: Option<usize>| k.and_then(|k| words.get(k)).copied().unwrap_or(WordRef::Pad);
        [get(at.checked_sub(1)), get(Some(at)), get(Some(at + 1))]
    }

    /// A sentence of 2 to [`MAX_LEN`] random words with random anchors.
    pub fn instance(rng: &mut ChaCha8Rng, argument: bool) -> Instance {
        let n = rng.gen_range(2..=MAX_LEN);
        let words: Vec<WordRef> = (0..n).map(|_| word(rng)).collect();
        let t = rng.gen_range(0..n);
        let a = rng.gen_range(0..n);
        let mut lexical = window(&words, t).to_vec();
        if argument {
            lexical.extend(window(&words, a));
        }
        Instance {
            pf_trigger: (0..n).map(|j| j as i32 - t as i32).collect(),
            pf_arg: argument.then(|| (0..n).map(|j| j as i32 - a as i32).collect()),
            lexical,
            words,
        }
    }

    /// Freshly initialized network with random non-zero biases, so that no
    /// unit sits exactly at a kink.
    pub fn model(argument: bool, activation: Activation, seed: u64) -> LayerStack<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let words = Tensor::uniform(&[VOCAB, WORD_DIM], 1.0, &mut rng);
        let mut m = LayerStack::init(config(argument, activation), words, seed).unwrap();
        for p in m.params.iter_mut() {
            if p.shape().len() == 1 {
                for v in p.data_mut() {
                    *v = rng.gen_range(-0.3..0.3);
                }
            }
        }
        m
    }

    /// Model, input and gold label for case `seed`.
    pub fn case(argument: bool, activation: Activation, seed: u64) -> (LayerStack<f64>, Instance, usize) {
        let m = model(argument, activation, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let x = instance(&mut rng, argument);
        let label = rng.gen_range(0..LABELS);
        (m, x, label)
    }
}
