//! Byte-pair-encoding subwords, used as the unsupervised baseline for affix
//! separation.
//!
//! Words start as characters with an end-of-word marker fused onto the last
//! one (`l o w</w>`). Learning repeatedly merges the most frequent adjacent
//! pair; ties go to the lexicographically smallest pair. Application splits
//! words the same way and emits non-final pieces with a trailing `@@`.

use std::cmp::Reverse;
use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use rayon::prelude::*;

use crate::corpus::{Corpus, Sentence};
use crate::error::{Error, Result};
use crate::io;
use crate::markers::MARKER;

pub const END_OF_WORD: &str = "</w>";
pub const DEFAULT_MERGES: usize = 50_000;
const HEADER: &str = "#version: 0.2";

/// Learned merge rules, in the order they were learned.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MergeList {
    rules: Vec<(String, String)>,
}

impl MergeList {
    pub fn new(rules: Vec<(String, String)>) -> Self {
        MergeList { rules }
    }

    pub fn rules(&self) -> &[(String, String)] {
        &self.rules
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    /// The first `n` rules.
    pub fn truncated(&self, n: usize) -> MergeList {
        MergeList {
            rules: self.rules[..n.min(self.rules.len())].to_vec(),
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from(HEADER);
        out.push('\n');
        for (l, r) in &self.rules {
            out.push_str(l);
            out.push(' ');
            out.push_str(r);
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, h)) if h.starts_with("#version:") => {}
            _ => return Err(Error::format(origin, 1, "missing `#version:` header")),
        }
        let rules = lines
            .map(|(i, line)| {
                let mut parts = line.split(' ');
                match (parts.next(), parts.next(), parts.next()) {
                    (Some(l), Some(r), None) if !l.is_empty() && !r.is_empty() => Ok((l.to_owned(), r.to_owned())),
                    _ => Err(Error::format(origin, i + 1, "expected `left right`")),
                }
            })
            .collect::<Result<_>>()?;
        Ok(MergeList { rules })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        io::write_atomic(path, self.to_text().as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let lines = io::read_lines(path)?;
        Self::parse(&lines.join("\n"), path)
    }
}

/// Character symbols of `word` with the end-of-word marker on the last one.
pub fn initial_symbols(word: &str) -> Vec<String> {
    let mut symbols: Vec<String> = word.chars().map(String::from).collect();
    if let Some(last) = symbols.last_mut() {
        last.push_str(END_OF_WORD);
    }
    symbols
}

/// Merges every non-overlapping occurrence of `(left, right)`, scanning left
/// to right.
fn merge_pair(symbols: &[String], left: &str, right: &str) -> Vec<String> {
    let mut out = Vec::with_capacity(symbols.len());
    let mut i = 0;
    while i < symbols.len() {
        if i + 1 < symbols.len() && symbols[i] == left && symbols[i + 1] == right {
            out.push(format!("{left}{right}"));
            i += 2;
        } else {
            out.push(symbols[i].clone());
            i += 1;
        }
    }
    out
}

fn skip_word(word: &str) -> bool {
    // Words with `@` cannot be split without colliding with the joiner.
    word.contains('@')
}

type PairKey = (Reverse<u64>, String, String);

struct PairStats {
    counts: HashMap<(String, String), u64>,
    ranked: BTreeSet<PairKey>,
    words_with: HashMap<(String, String), BTreeSet<usize>>,
}

impl PairStats {
    fn adjust(&mut self, pair: (String, String), delta: i64, word: usize) {
        let old = self.counts.get(&pair).copied().unwrap_or(0);
        let new = (old as i64 + delta) as u64;
        if old > 0 {
            self.ranked.remove(&(Reverse(old), pair.0.clone(), pair.1.clone()));
        }
        if new > 0 {
            self.ranked.insert((Reverse(new), pair.0.clone(), pair.1.clone()));
            self.counts.insert(pair.clone(), new);
        } else {
            self.counts.remove(&pair);
        }
        if delta > 0 {
            self.words_with.entry(pair).or_default().insert(word);
        }
    }
}

/// Learns up to `num_merges` rules. Stops early once no pair occurs at least
/// twice.
pub fn bpe_learn(corpus: &Corpus, num_merges: usize) -> MergeList {
    let mut word_counts: HashMap<&str, u64> = HashMap::new();
    for tok in corpus.tokens() {
        if !skip_word(tok) {
            *word_counts.entry(tok.as_str()).or_insert(0) += 1;
        }
    }
    let mut types: Vec<(&str, u64)> = word_counts.into_iter().collect();
    types.sort_unstable();
    let mut words: Vec<(Vec<String>, u64)> = types.iter().map(|&(w, c)| (initial_symbols(w), c)).collect();

    let mut stats = PairStats {
        counts: HashMap::new(),
        ranked: BTreeSet::new(),
        words_with: HashMap::new(),
    };
    for (id, (symbols, count)) in words.iter().enumerate() {
        for w in symbols.windows(2) {
            stats.adjust((w[0].clone(), w[1].clone()), *count as i64, id);
        }
    }

    let mut rules = Vec::new();
    while rules.len() < num_merges {
        let Some((Reverse(best), left, right)) = stats.ranked.first().cloned() else {
            break;
        };
        if best < 2 {
            break;
        }
        let affected = stats
            .words_with
            .remove(&(left.clone(), right.clone()))
            .unwrap_or_default();
        for id in affected {
            let (symbols, count) = &words[id];
            let count = *count as i64;
            let merged = merge_pair(symbols, &left, &right);
            if merged.len() == symbols.len() {
                continue;
            }
            let old = std::mem::replace(&mut words[id].0, merged);
            for w in old.windows(2) {
                stats.adjust((w[0].clone(), w[1].clone()), -count, id);
            }
            for w in words[id].0.clone().windows(2) {
                stats.adjust((w[0].clone(), w[1].clone()), count, id);
            }
        }
        rules.push((left, right));
    }
    MergeList { rules }
}

/// Applies learned merges to words, caching results per word type.
pub struct BpeSegmenter<'a> {
    ranks: HashMap<(&'a str, &'a str), usize>,
}

impl<'a> BpeSegmenter<'a> {
    pub fn new(merges: &'a MergeList) -> Self {
        let mut ranks = HashMap::with_capacity(merges.len());
        for (i, (l, r)) in merges.rules.iter().enumerate() {
            ranks.entry((l.as_str(), r.as_str())).or_insert(i);
        }
        BpeSegmenter { ranks }
    }

    /// Subword pieces of `word` without joiners; the last piece keeps no
    /// end-of-word marker.
    pub fn pieces(&self, word: &str) -> Vec<String> {
        if skip_word(word) || word.is_empty() {
            return vec![word.to_owned()];
        }
        let mut symbols = initial_symbols(word);
        loop {
            let best = symbols
                .windows(2)
                .filter_map(|w| self.ranks.get(&(w[0].as_str(), w[1].as_str())).map(|&r| (r, w)))
                .min_by_key(|(r, _)| *r);
            let Some((_, pair)) = best else { break };
            let (left, right) = (pair[0].clone(), pair[1].clone());
            symbols = merge_pair(&symbols, &left, &right);
        }
        let last = symbols.last_mut().expect("non-empty word");
        last.truncate(last.len() - END_OF_WORD.len());
        symbols
    }

    /// Pieces with `@@` on every non-final one.
    pub fn segment(&self, word: &str) -> Vec<String> {
        let mut pieces = self.pieces(word);
        let n = pieces.len();
        for p in &mut pieces[..n - 1] {
            p.push_str(MARKER);
        }
        pieces
    }
}

pub fn bpe_apply(corpus: &Corpus, merges: &MergeList) -> Corpus {
    let segmenter = BpeSegmenter::new(merges);
    let mut types: Vec<&str> = corpus.tokens().map(String::as_str).collect();
    types.sort_unstable();
    types.dedup();
    let cache: HashMap<&str, Vec<String>> = types.par_iter().map(|&w| (w, segmenter.segment(w))).collect();
    let sentences = corpus
        .sentences
        .par_iter()
        .map(|s| {
            Sentence::from_tokens_unchecked(
                s.tokens()
                    .iter()
                    .flat_map(|t| cache[t.as_str()].iter().cloned())
                    .collect(),
            )
        })
        .collect();
    Corpus::new(sentences, corpus.side)
}
