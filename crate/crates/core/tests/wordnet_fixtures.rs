use std::collections::BTreeSet;

use evcustom::wordnet::{load_wordnet, Pos};
use evcustom_testkit as kit;

fn set(words: &[&str]) -> BTreeSet<String> {
    words.iter().map(|w| w.to_string()).collect()
}

#[test]
fn closure_at_depth_one_and_two() {
    let dir = tempfile::tempdir().unwrap();
    kit::write_chain_and_cycle_wordnet(dir.path());
    let db = load_wordnet(dir.path()).unwrap();
    assert_eq!(db.synset_count(Pos::Noun), 6);
    assert_eq!(db.synset_count(Pos::Verb), 0);
    assert_eq!(db.hyponyms("attack", Pos::Noun, 1).unwrap(), set(&["ambush", "surprise attack"]));
    assert_eq!(
        db.hyponyms("attack", Pos::Noun, 2).unwrap(),
        set(&["ambush", "surprise attack", "bushwhack"])
    );
    assert!(db.hyponyms("bushwhack", Pos::Noun, 3).unwrap().is_empty());
    assert!(db.hyponyms("attack", Pos::Verb, 1).unwrap().is_empty());
    assert!(db.hyponyms("zzz", Pos::Noun, 1).unwrap().is_empty());
    assert!(db.hyponyms("attack", Pos::Noun, 0).is_err());
}

#[test]
fn cycle_terminates() {
    let dir = tempfile::tempdir().unwrap();
    kit::write_chain_and_cycle_wordnet(dir.path());
    let db = load_wordnet(dir.path()).unwrap();
    // "riot" names two synsets of the cycle, so both are roots and "revolt"
    // is a synonym rather than a hyponym.
    assert_eq!(db.hyponyms("riot", Pos::Noun, 1).unwrap(), set(&["uprising"]));
    assert_eq!(db.hyponyms("riot", Pos::Noun, 1000).unwrap(), set(&["uprising"]));
    assert_eq!(db.hyponyms("uprising", Pos::Noun, 2).unwrap(), set(&["revolt", "riot"]));
    assert_eq!(db.hyponyms("uprising", Pos::Noun, usize::MAX).unwrap(), set(&["revolt", "riot"]));
}

#[test]
fn depth_is_monotone() {
    let dir = tempfile::tempdir().unwrap();
    kit::write_event_wordnet(dir.path());
    let db = load_wordnet(dir.path()).unwrap();
    for (lemma, pos) in [("attack", Pos::Noun), ("attack", Pos::Verb), ("injure", Pos::Verb)] {
        let mut prev = BTreeSet::new();
        for d in 1..4 {
            let cur = db.hyponyms(lemma, pos, d).unwrap();
            assert!(prev.is_subset(&cur));
            prev = cur;
        }
    }
    assert_eq!(db.hyponyms("attack", Pos::Verb, 1).unwrap(), set(&["bomb", "bombard", "storm", "raid"]));
    assert_eq!(db.hyponyms("wound", Pos::Verb, 1).unwrap(), set(&["maim"]));
}

#[test]
fn bad_pointer_is_a_load_error() {
    let dir = tempfile::tempdir().unwrap();
    kit::write_chain_and_cycle_wordnet(dir.path());
    let path = dir.path().join("data.noun");
    let text = std::fs::read_to_string(&path).unwrap();
    // Same width, so every other offset stays valid.
    let first_tilde = text.find("~ ").unwrap();
    let mut broken = text.clone();
    broken.replace_range(first_tilde + 2..first_tilde + 10, "99999999");
    std::fs::write(&path, broken).unwrap();
    assert!(load_wordnet(dir.path()).is_err());
}
