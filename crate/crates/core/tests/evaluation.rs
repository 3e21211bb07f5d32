use std::collections::BTreeSet;

use evcustom::distsup::{self, ArgumentCandidate};
use evcustom::embeddings::EmbeddingTable;
use evcustom::eval::{
    self, argument_items, candidate_items, leave_one_out, plan_folds, score_items, ArgumentSetup, ArmContext, ArmKind, ArmSuite,
    MatchMode,
};
use evcustom::models::{TrainConfig, Vocabulary};
use evcustom::rolemap::RoleMapping;
use evcustom_testkit as kit;

fn small_grid() -> TrainConfig {
    TrainConfig {
        epochs: vec![3],
        positive_weights: vec![3.0],
        batch_sizes: vec![16],
        filters: vec![6],
        seed: 4,
        ..TrainConfig::default()
    }
}

fn parts(candidates: &[ArgumentCandidate]) -> (Vec<ArgumentCandidate>, Vec<ArgumentCandidate>, Vec<ArgumentCandidate>) {
    let (mut train, mut dev, mut eval) = (Vec::new(), Vec::new(), Vec::new());
    for c in candidates {
        match c.doc_id.bytes().last().unwrap() % 5 {
            0 => dev.push(c.clone()),
            1 => eval.push(c.clone()),
            _ => train.push(c.clone()),
        }
    }
    (train, dev, eval)
}

#[test]
fn folds_never_train_on_the_held_out_group() {
    let grouping = kit::grouping();
    assert_eq!(grouping.values().collect::<BTreeSet<_>>().len(), 8);
    let (train, dev, eval) = parts(&kit::grouped_candidates(6, 1));
    let plan = plan_folds(&train, &dev, &eval, &grouping).unwrap();
    assert_eq!(plan.folds.len() + plan.skipped.len(), 8);
    for fold in &plan.folds {
        for &i in &fold.train {
            assert_ne!(grouping[&train[i].event_type], fold.group);
        }
        for &i in &fold.dev {
            assert_ne!(grouping[&dev[i].event_type], fold.group);
        }
        for &i in &fold.eval {
            assert_eq!(grouping[&eval[i].event_type], fold.group);
        }
        // Everything else is kept.
        let others = train.iter().filter(|c| grouping[&c.event_type] != fold.group).count();
        assert_eq!(fold.train.len(), others);
    }
    let evaluated: usize = plan.folds.iter().map(|f| f.eval.len()).sum();
    assert_eq!(evaluated, eval.len());
}

#[test]
fn pooled_score_equals_union_score() {
    let corpus = kit::event_corpus(40, 3, 2);
    let table: EmbeddingTable<f64> = kit::clustered_embeddings(&corpus, &[], 8, 2);
    let (vocab, words) = Vocabulary::for_corpus(&table, &corpus);
    let candidates = distsup::gold_argument_candidates(&corpus, Some(&RoleMapping::default()));
    let (train, dev, eval) = parts(&candidates);
    let grid = small_grid();
    let setup = ArgumentSetup {
        corpus: &corpus,
        vocab: &vocab,
        words: &words,
        config: &grid,
        mode: MatchMode::OneToOne,
    };
    let report = leave_one_out(&setup, &train, &dev, &eval, &kit::grouping()).unwrap();
    assert!(report.folds.len() >= 2);
    let preds: Vec<_> = report.folds.iter().flat_map(|f| f.predictions.clone()).collect();
    let gold: Vec<_> = report
        .plan
        .folds
        .iter()
        .flat_map(|f| f.eval.iter().map(|&i| eval[i].clone()))
        .collect();
    let union = score_items(&argument_items(&preds, None).unwrap(), &candidate_items(&gold), MatchMode::OneToOne);
    assert_eq!(report.pooled.counts, union.counts);
    assert_eq!(report.pooled.overall, union.overall);
    for fold in &report.folds {
        let ty: BTreeSet<&str> = fold.predictions.iter().filter_map(|p| p.event_type.as_deref()).collect();
        assert!(ty.iter().all(|t| kit::grouping()[*t] == fold.group));
    }
}

#[test]
fn groups_without_evaluation_data_are_skipped() {
    let (train, dev, eval) = parts(&kit::grouped_candidates(4, 3));
    let eval: Vec<_> = eval.into_iter().filter(|c| c.event_type != "Meet").collect();
    let plan = plan_folds(&train, &dev, &eval, &kit::grouping()).unwrap();
    assert!(plan.skipped.contains(&"Contact".to_string()));
    assert!(plan.folds.iter().all(|f| f.group != "Contact"));
}

#[test]
fn grouping_must_cover_every_type_and_have_two_groups() {
    let (train, dev, eval) = parts(&kit::grouped_candidates(2, 4));
    let mut partial = kit::grouping();
    partial.remove("Attack");
    let err = plan_folds(&train, &dev, &eval, &partial).unwrap_err();
    assert!(err.is_validation());
    let one: eval::Grouping = kit::grouping().into_keys().map(|t| (t, "All".to_string())).collect();
    assert!(plan_folds(&train, &dev, &eval, &one).is_err());
}

#[test]
fn arm_runner_produces_both_tables() {
    let dir = tempfile::tempdir().unwrap();
    let path = kit::write_arm_fixture(dir.path(), 30, 5);
    let suite = ArmSuite::load(&path).unwrap();
    let report = eval::run_suite(suite).unwrap();
    let names = |rows: &[eval::ArmReport]| rows.iter().map(|r| r.arm.clone()).collect::<Vec<_>>();
    assert_eq!(names(&report.triggers), ["distant", "adjudicated", "downsampled"]);
    assert_eq!(names(&report.arguments), ["normal-mapped", "pre-mapped", "leave-one-out"]);
    for row in report.arguments.iter() {
        let labels: Vec<&str> = row.per_label.keys().map(String::as_str).collect();
        assert_eq!(labels, ["Actor", "Place", "Time"]);
    }
    for row in report.triggers.iter().chain(&report.arguments) {
        for v in [row.overall.p, row.overall.r, row.overall.f1] {
            assert!((0.0..=1.0).contains(&v));
        }
    }
    let text = report.render();
    assert!(text.starts_with("Triggers\n"));
    assert!(text.contains("\nArguments\n"));
    assert!(dir.path().join("report/triggers.jsonl").exists());
    assert!(dir.path().join("report/arguments.jsonl").exists());
}

#[test]
fn adjudication_keeps_only_confirmed_positives() {
    let dir = tempfile::tempdir().unwrap();
    let path = kit::write_arm_fixture(dir.path(), 30, 6);
    let suite = ArmSuite::load(&path).unwrap();
    let examples = distsup::read_trigger_examples(&suite.trigger.as_ref().unwrap().examples).unwrap();
    let judgments = eval::load_judgments(suite.trigger.as_ref().unwrap().judgments.as_ref().unwrap()).unwrap();
    let kept = distsup::adjudicate(&examples, &judgments).unwrap();
    assert!(kept.len() < examples.len(), "fixture should contain wrong positives");
    assert!(kept.iter().filter(|e| e.is_positive()).all(|e| e.text != "said"));
    let ctx = ArmContext::load(suite).unwrap();
    let row = ctx.run_arm(ArmKind::Adjudicated).unwrap();
    assert_eq!(row.arm, "adjudicated");
}

#[test]
fn audit_sample_follows_quotas() {
    let corpus = kit::event_corpus(60, 3, 7);
    let preds: Vec<_> = distsup::gold_argument_candidates(&corpus, Some(&RoleMapping::default()))
        .into_iter()
        .filter(|c| c.label.as_deref() != Some("NONE"))
        .map(|c| evcustom::models::Prediction {
            doc_id: c.doc_id,
            sentence: c.sentence,
            s: c.s,
            e: c.e,
            label: c.label.unwrap(),
            conf: 1.0,
            trigger_s: Some(c.trigger_s),
            trigger_e: Some(c.trigger_e),
            event_type: Some(c.event_type),
        })
        .collect();
    let quotas = eval::default_audit_quotas();
    let sample = eval::sample_for_audit(&preds, 100, &quotas, 1).unwrap();
    assert_eq!(sample.len(), 100);
    for (label, n) in &quotas {
        assert_eq!(sample.iter().filter(|p| &p.label == label).count(), *n);
    }
    assert_eq!(sample, eval::sample_for_audit(&preds, 100, &quotas, 1).unwrap());
}
