//! Reader for WordNet 3.x database files (`data.*`, `index.*`) covering
//! nouns and verbs, with breadth-first hyponym enumeration.
//!
//! Only byte offsets, lemmas and pointers are parsed; glosses and verb
//! frames are ignored.

use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pos {
    Noun,
    Verb,
}

impl Pos {
    pub const ALL: [Pos; 2] = [Pos::Noun, Pos::Verb];

    fn file_suffix(self) -> &'static str {
        match self {
            Pos::Noun => "noun",
            Pos::Verb => "verb",
        }
    }

    fn from_tag(tag: &str) -> Option<Pos> {
        match tag {
            "n" => Some(Pos::Noun),
            "v" => Some(Pos::Verb),
            _ => None,
        }
    }
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.file_suffix())
    }
}

impl FromStr for Pos {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "n" | "noun" => Ok(Pos::Noun),
            "v" | "verb" => Ok(Pos::Verb),
            _ => Err(Error::invalid(format!("unsupported part of speech {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pointer {
    pub symbol: String,
    pub offset: u64,
    /// Raw WNDB POS tag of the target (`n`, `v`, `a`, `s`, `r`).
    pub pos_tag: String,
}

impl Pointer {
    pub fn is_hyponym(&self) -> bool {
        self.symbol == "~" || self.symbol == "~i"
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Synset {
    pub offset: u64,
    pub pos: Pos,
    /// Lower-cased, underscores for spaces.
    pub lemmas: Vec<String>,
    pub pointers: Vec<Pointer>,
}

#[derive(Debug, Clone, Default)]
pub struct WordNetDb {
    synsets: HashMap<(Pos, u64), Synset>,
    index: HashMap<(String, Pos), Vec<u64>>,
}

fn is_license_line(line: &str) -> bool {
    line.starts_with("  ")
}

fn parse_data_line(line: &str, pos: Pos, context: &str, line_no: usize) -> Result<Synset> {
    let bad = |msg: &str| Error::parse(context, line_no, msg);
    let body = line.split(" | ").next().unwrap_or(line);
    let mut f = body.split_whitespace();
    let mut next = |what: &str| f.next().ok_or_else(|| bad(&format!("missing {what}")));
    let offset: u64 = next("offset")?.parse().map_err(|_| bad("bad synset offset"))?;
    next("lex_filenum")?;
    next("ss_type")?;
    let w_cnt = usize::from_str_radix(next("w_cnt")?, 16).map_err(|_| bad("bad w_cnt"))?;
    let mut lemmas = Vec::with_capacity(w_cnt);
    for _ in 0..w_cnt {
        let lemma = next("lemma")?;
        next("lex_id")?;
        // Syntactic markers such as "(a)" are not part of the lemma.
        let lemma = lemma.split('(').next().unwrap_or(lemma);
        lemmas.push(lemma.to_lowercase());
    }
    let p_cnt: usize = next("p_cnt")?.parse().map_err(|_| bad("bad p_cnt"))?;
    let mut pointers = Vec::with_capacity(p_cnt);
    for _ in 0..p_cnt {
        let symbol = next("pointer symbol")?.to_string();
        let target: u64 = next("pointer offset")?.parse().map_err(|_| bad("bad pointer offset"))?;
        let pos_tag = next("pointer pos")?.to_string();
        next("pointer source/target")?;
        pointers.push(Pointer {
            symbol,
            offset: target,
            pos_tag,
        });
    }
    Ok(Synset {
        offset,
        pos,
        lemmas,
        pointers,
    })
}

fn read(dir: &Path, name: &str) -> Result<String> {
    let path = dir.join(name);
    fs::read_to_string(&path).map_err(|e| Error::io(&path, e))
}

impl WordNetDb {
    /// Loads `index.{noun,verb}` and `data.{noun,verb}` from `dir`.
    pub fn load(dir: &Path) -> Result<Self> {
        let mut db = WordNetDb::default();
        for pos in Pos::ALL {
            let name = format!("data.{}", pos.file_suffix());
            let context = dir.join(&name).display().to_string();
            for (i, line) in read(dir, &name)?.lines().enumerate() {
                if is_license_line(line) || line.trim().is_empty() {
                    continue;
                }
                let synset = parse_data_line(line, pos, &context, i + 1)?;
                db.synsets.insert((pos, synset.offset), synset);
            }
            let name = format!("index.{}", pos.file_suffix());
            let context = dir.join(&name).display().to_string();
            for (i, line) in read(dir, &name)?.lines().enumerate() {
                if is_license_line(line) || line.trim().is_empty() {
                    continue;
                }
                let (lemma, offsets) = parse_index_line(line, &context, i + 1)?;
                db.index.insert((lemma, pos), offsets);
            }
        }
        db.validate()?;
        Ok(db)
    }

    fn validate(&self) -> Result<()> {
        for s in self.synsets.values() {
            for p in s.pointers.iter().filter(|p| p.is_hyponym()) {
                let Some(pos) = Pos::from_tag(&p.pos_tag) else { continue };
                if !self.synsets.contains_key(&(pos, p.offset)) {
                    return Err(Error::Validation(format!(
                        "{} synset {:08} has a hyponym pointer to missing {} synset {:08}",
                        s.pos, s.offset, pos, p.offset
                    )));
                }
            }
        }
        for ((lemma, pos), offsets) in &self.index {
            if let Some(o) = offsets.iter().find(|o| !self.synsets.contains_key(&(*pos, **o))) {
                return Err(Error::Validation(format!(
                    "index entry {lemma:?} ({pos}) refers to missing synset {o:08}"
                )));
            }
        }
        Ok(())
    }

    pub fn synset_count(&self, pos: Pos) -> usize {
        self.synsets.keys().filter(|(p, _)| *p == pos).count()
    }

    pub fn synset(&self, pos: Pos, offset: u64) -> Option<&Synset> {
        self.synsets.get(&(pos, offset))
    }

    /// Number of hyponym edges between loaded synsets.
    pub fn hyponym_edge_count(&self) -> usize {
        self.synsets
            .values()
            .flat_map(|s| &s.pointers)
            .filter(|p| p.is_hyponym() && Pos::from_tag(&p.pos_tag).is_some())
            .count()
    }

    pub fn contains(&self, lemma: &str, pos: Pos) -> bool {
        self.index.contains_key(&(normalize(lemma), pos))
    }

    /// Lemmas reachable through up to `max_depth` levels of hyponym
    /// pointers from every sense of `lemma`. Underscores become spaces;
    /// the query itself is excluded. Unknown lemmas yield an empty set.
    pub fn hyponyms(&self, lemma: &str, pos: Pos, max_depth: usize) -> Result<BTreeSet<String>> {
        if max_depth == 0 {
            return Err(Error::invalid("hyponym depth must be at least 1"));
        }
        let key = normalize(lemma);
        let Some(roots) = self.index.get(&(key.clone(), pos)) else {
            return Ok(BTreeSet::new());
        };
        let mut visited: HashSet<(Pos, u64)> = roots.iter().map(|&o| (pos, o)).collect();
        let mut queue: VecDeque<((Pos, u64), usize)> = roots.iter().map(|&o| ((pos, o), 0)).collect();
        let mut out = BTreeSet::new();
        while let Some((id, depth)) = queue.pop_front() {
            if depth == max_depth {
                continue;
            }
            let Some(synset) = self.synsets.get(&id) else { continue };
            for p in synset.pointers.iter().filter(|p| p.is_hyponym()) {
                let Some(tpos) = Pos::from_tag(&p.pos_tag) else { continue };
                let target = (tpos, p.offset);
                if !visited.insert(target) {
                    continue;
                }
                if let Some(t) = self.synsets.get(&target) {
                    out.extend(t.lemmas.iter().filter(|l| **l != key).map(|l| l.replace('_', " ")));
                    queue.push_back((target, depth + 1));
                }
            }
        }
        Ok(out)
    }
}

fn normalize(lemma: &str) -> String {
    lemma.trim().to_lowercase().replace(' ', "_")
}

fn parse_index_line(line: &str, context: &str, line_no: usize) -> Result<(String, Vec<u64>)> {
    let bad = |msg: &str| Error::parse(context, line_no, msg);
    let f: Vec<&str> = line.split_whitespace().collect();
    if f.len() < 4 {
        return Err(bad("index record too short"));
    }
    let synset_cnt: usize = f[2].parse().map_err(|_| bad("bad synset_cnt"))?;
    let p_cnt: usize = f[3].parse().map_err(|_| bad("bad p_cnt"))?;
    // lemma pos synset_cnt p_cnt [ptr]*p_cnt sense_cnt tagsense_cnt offsets*synset_cnt
    let first = 4 + p_cnt + 2;
    if f.len() < first + synset_cnt {
        return Err(bad("index record lists fewer offsets than synset_cnt"));
    }
    let offsets = f[first..first + synset_cnt]
        .iter()
        .map(|o| o.parse::<u64>().map_err(|_| bad("bad synset offset")))
        .collect::<Result<Vec<_>>>()?;
    Ok((f[0].to_lowercase(), offsets))
}

pub fn load_wordnet(dir: &Path) -> Result<WordNetDb> {
    WordNetDb::load(dir)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn data_line_fields() {
        let line = "00000100 04 n 02 attack 0 onslaught 1 002 ~ 00000200 n 0000 @ 00000300 n 0000 | an offensive";
        let s = parse_data_line(line, Pos::Noun, "t", 1).unwrap();
        assert_eq!(s.offset, 100);
        assert_eq!(s.lemmas, vec!["attack", "onslaught"]);
        assert_eq!(s.pointers.len(), 2);
        assert!(s.pointers[0].is_hyponym());
        assert!(!s.pointers[1].is_hyponym());
    }

    #[test]
    fn w_cnt_is_hexadecimal() {
        let lemmas: String = (0..10).map(|i| format!(" w{i} 0")).collect();
        let line = format!("00000100 04 n 0a{lemmas} 000 | gloss");
        let s = parse_data_line(&line, Pos::Noun, "t", 1).unwrap();
        assert_eq!(s.lemmas.len(), 10);
    }

    #[test]
    fn index_line_offsets() {
        let (lemma, offs) = parse_index_line("attack n 2 2 ~ @ 2 0 00000100 00000400", "t", 1).unwrap();
        assert_eq!(lemma, "attack");
        assert_eq!(offs, vec![100, 400]);
        assert!(parse_index_line("attack n 3 0 3 0 00000100", "t", 1).is_err());
    }
}
