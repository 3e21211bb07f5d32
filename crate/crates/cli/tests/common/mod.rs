#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use evcustom_testkit as kit;

pub fn evcustom(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_evcustom"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("run evcustom")
}

/// Runs a command that must succeed and returns its stdout.
pub fn ok(dir: &Path, args: &[&str]) -> String {
    let out = evcustom(dir, args);
    assert!(
        out.status.success(),
        "evcustom {} failed ({:?}): {}",
        args.join(" "),
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

/// Corpus, embeddings, WordNet and a small grid for pipeline runs.
pub fn pipeline_inputs(dir: &Path, docs: usize, seed: u64) {
    let corpus = kit::event_corpus(docs, 3, seed);
    evcustom::corpus::write_corpus(&dir.join("corpus.jsonl"), &corpus).unwrap();
    kit::clustered_embeddings(&corpus, &[], 10, seed).save(&dir.join("emb.txt")).unwrap();
    std::fs::create_dir_all(dir.join("wn")).unwrap();
    kit::write_event_wordnet(&dir.join("wn"));
    let grid = serde_json::json!({
        "epochs": [3, 6],
        "positive_weights": [1.0, 3.0],
        "batch_sizes": [16],
        "filters": [8]
    });
    std::fs::write(dir.join("grid.json"), grid.to_string()).unwrap();
}

/// Seeded outputs of one pipeline run. The project file is left out: its
/// audit log carries wall-clock timestamps.
pub const PIPELINE_FILES: &[&str] = &[
    "examples.jsonl",
    "split.json",
    "trigger.model.json",
    "trigger.model.selection.json",
    "pred.jsonl",
    "report.json",
];

/// expand, curate, distsup, split, train, predict and score through the CLI.
pub fn run_pipeline(dir: &Path) -> Vec<PathBuf> {
    ok(dir, &["init", "--project", "project.json"]);
    ok(dir, &["seed", "--project", "project.json", "--type", "Attack", "--words", "attacked,attack"]);
    ok(dir, &["seed", "--project", "project.json", "--type", "Injure", "--words", "wounded"]);
    ok(dir, &["seed", "--project", "project.json", "--type", "Die", "--words", "died"]);
    ok(
        dir,
        &[
            "expand", "--project", "project.json", "--embeddings", "emb.txt", "--wordnet", "wn", "--k", "6",
            "--min-sim", "0.8",
        ],
    );
    for (ty, word) in [("Attack", "bombed"), ("Attack", "shelled"), ("Injure", "injured"), ("Die", "perished")] {
        ok(dir, &["accept", "--project", "project.json", "--type", ty, "--word", word]);
    }
    ok(
        dir,
        &[
            "distsup", "--project", "project.json", "--corpus", "corpus.jsonl", "--cap", "60", "--neg-ratio", "3",
            "--seed", "7", "--out", "examples.jsonl",
        ],
    );
    ok(dir, &["split", "--corpus", "corpus.jsonl", "--ratios", "0.6,0.2,0.2", "--seed", "7", "--out", "split.json"]);
    ok(
        dir,
        &[
            "train-trigger", "--examples", "examples.jsonl", "--split", "split.json", "--corpus", "corpus.jsonl",
            "--embeddings", "emb.txt", "--grid", "grid.json", "--seed", "7", "--out", "trigger.model.json",
        ],
    );
    ok(
        dir,
        &[
            "predict", "--model", "trigger.model.json", "--corpus", "corpus.jsonl", "--split", "split.json", "--part",
            "test", "--out", "pred.jsonl",
        ],
    );
    ok(
        dir,
        &[
            "score", "--pred", "pred.jsonl", "--gold", "corpus.jsonl", "--split", "split.json", "--part", "test",
            "--mode", "trigger", "--out", "report.json",
        ],
    );
    PIPELINE_FILES.iter().map(|f| dir.join(f)).collect()
}
