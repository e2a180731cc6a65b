//! Tokenized corpora and frequency-ranked vocabularies.
//!
//! Text is expected to be tokenized already: one sentence per line, tokens
//! separated by whitespace. Empty lines are kept as empty sentences so that
//! the two sides of a parallel corpus stay aligned.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io;

pub const UNK: &str = "<unk>";
pub const BOS: &str = "<s>";
pub const EOS: &str = "</s>";
pub const PAD: &str = "<pad>";

/// Special tokens in id order. They are members of every vocabulary.
pub const SPECIAL_TOKENS: [&str; 4] = [UNK, BOS, EOS, PAD];

/// Default vocabulary size.
pub const DEFAULT_VOCAB_SIZE: usize = 50_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Source,
    Target,
}

/// A whitespace-tokenized sentence. Tokens are never empty and never contain
/// whitespace.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct Sentence {
    tokens: Vec<String>,
}

impl Sentence {
    pub fn new<I, S>(tokens: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let tokens: Vec<String> = tokens.into_iter().map(Into::into).collect();
        for t in &tokens {
            if t.is_empty() || t.chars().any(char::is_whitespace) {
                return Err(Error::invalid(format!("invalid token {t:?}")));
            }
        }
        Ok(Sentence { tokens })
    }

    /// Splits `line` on runs of whitespace.
    pub fn parse(line: &str) -> Self {
        Sentence {
            tokens: line.split_whitespace().map(str::to_owned).collect(),
        }
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn into_tokens(self) -> Vec<String> {
        self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Builds a sentence from tokens already known to satisfy the invariants.
    pub(crate) fn from_tokens_unchecked(tokens: Vec<String>) -> Self {
        debug_assert!(tokens
            .iter()
            .all(|t| !t.is_empty() && !t.chars().any(char::is_whitespace)));
        Sentence { tokens }
    }
}

impl fmt::Display for Sentence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.tokens.join(" "))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    pub sentences: Vec<Sentence>,
    pub side: Side,
}

impl Corpus {
    pub fn new(sentences: Vec<Sentence>, side: Side) -> Self {
        Corpus { sentences, side }
    }

    pub fn from_text(text: &str, side: Side) -> Self {
        let lines = io::split_lines(text.as_bytes()).expect("&str is valid UTF-8");
        Corpus {
            sentences: lines.iter().map(|l| Sentence::parse(l)).collect(),
            side,
        }
    }

    /// Reads one sentence per line. Invalid UTF-8 is reported with the
    /// offending line number.
    pub fn load(path: &Path, side: Side) -> Result<Self> {
        let lines = io::read_lines(path)?;
        Ok(Corpus {
            sentences: lines.iter().map(|l| Sentence::parse(l)).collect(),
            side,
        })
    }

    /// One line per sentence, tokens joined by a single space.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for s in &self.sentences {
            out.push_str(&s.to_string());
            out.push('\n');
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        io::write_atomic(path, self.to_text().as_bytes())
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn tokens(&self) -> impl Iterator<Item = &String> {
        self.sentences.iter().flat_map(|s| s.tokens.iter())
    }

    pub fn token_count(&self) -> usize {
        self.sentences.iter().map(Sentence::len).sum()
    }
}

pub fn load_corpus(path: &Path, side: Side) -> Result<Corpus> {
    Corpus::load(path, side)
}

/// Checks that two corpora can be used as a parallel pair.
pub fn check_parallel(source: &Corpus, target: &Corpus) -> Result<()> {
    if source.len() != target.len() {
        return Err(Error::invalid(format!(
            "parallel corpus has {} source and {} target sentences",
            source.len(),
            target.len()
        )));
    }
    Ok(())
}

/// Exact occurrence counts, computed over `shards` slices of the corpus and
/// merged. The result does not depend on the shard count.
pub fn count_words(corpus: &Corpus, shards: usize) -> HashMap<String, u64> {
    let shards = shards.max(1);
    let chunk = corpus.sentences.len().div_ceil(shards).max(1);
    corpus
        .sentences
        .par_chunks(chunk)
        .map(|part| {
            let mut counts: HashMap<String, u64> = HashMap::new();
            for tok in part.iter().flat_map(|s| s.tokens.iter()) {
                *counts.entry(tok.clone()).or_insert(0) += 1;
            }
            counts
        })
        .reduce(HashMap::new, |mut a, b| {
            for (w, c) in b {
                *a.entry(w).or_insert(0) += c;
            }
            a
        })
}

/// The `capacity` most frequent words of a corpus with their exact counts,
/// plus the four special tokens.
///
/// Entries are ordered by descending count, then by the word's byte order;
/// the same order decides which words survive at the capacity boundary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    capacity: usize,
    entries: Vec<(String, u64)>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    /// Ranks `counts` and keeps the top `capacity` words.
    pub fn from_counts(counts: HashMap<String, u64>, capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::invalid("vocabulary size must be at least 1"));
        }
        let mut ranked: Vec<(String, u64)> = counts.into_iter().filter(|(w, _)| !is_special(w)).collect();
        ranked.sort_unstable_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        ranked.truncate(capacity);
        Ok(Self::from_ranked(ranked, capacity))
    }

    fn from_ranked(entries: Vec<(String, u64)>, capacity: usize) -> Self {
        let index = entries.iter().enumerate().map(|(i, (w, _))| (w.clone(), i)).collect();
        Vocabulary {
            capacity,
            entries,
            index,
        }
    }

    pub fn build(corpus: &Corpus, capacity: usize) -> Result<Self> {
        Self::build_sharded(corpus, capacity, rayon::current_num_threads())
    }

    pub fn build_sharded(corpus: &Corpus, capacity: usize, shards: usize) -> Result<Self> {
        Self::from_counts(count_words(corpus, shards), capacity)
    }

    /// Stored count of `word`; 0 when absent.
    pub fn freq(&self, word: &str) -> u64 {
        self.index.get(word).map_or(0, |&i| self.entries[i].1)
    }

    /// Whether `word` is one of the retained corpus words. Special tokens are
    /// not counted here; see [`Vocabulary::is_member`].
    pub fn contains(&self, word: &str) -> bool {
        self.index.contains_key(word)
    }

    /// Corpus words plus the special tokens.
    pub fn is_member(&self, word: &str) -> bool {
        is_special(word) || self.contains(word)
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Number of retained corpus words (special tokens excluded).
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Rank of a retained word, 0 for the most frequent.
    pub fn rank(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    pub fn entries(&self) -> &[(String, u64)] {
        &self.entries
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, u64)> {
        self.entries.iter().map(|(w, c)| (w.as_str(), *c))
    }

    /// TSV form: a `#capacity<TAB>K` header, then `word<TAB>count` lines in
    /// rank order.
    pub fn to_tsv(&self) -> String {
        let mut out = format!("#capacity\t{}\n", self.capacity);
        for (w, c) in &self.entries {
            out.push_str(w);
            out.push('\t');
            out.push_str(&c.to_string());
            out.push('\n');
        }
        out
    }

    pub fn parse_tsv(text: &str, origin: &Path) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let capacity = match lines.next() {
            Some((_, header)) => header
                .strip_prefix("#capacity\t")
                .and_then(|k| k.parse::<usize>().ok())
                .filter(|&k| k > 0)
                .ok_or_else(|| Error::format(origin, 1, "expected `#capacity<TAB>K` header"))?,
            None => return Err(Error::format(origin, 1, "empty vocabulary file")),
        };
        let mut entries: Vec<(String, u64)> = Vec::new();
        let mut seen = HashMap::new();
        for (i, line) in lines {
            let lineno = i + 1;
            let (word, count) = line
                .split_once('\t')
                .ok_or_else(|| Error::format(origin, lineno, "expected `word<TAB>count`"))?;
            if word.is_empty() || word.chars().any(char::is_whitespace) {
                return Err(Error::format(origin, lineno, format!("invalid word {word:?}")));
            }
            let count: u64 = count
                .parse()
                .map_err(|_| Error::format(origin, lineno, format!("invalid count {count:?}")))?;
            if let Some((pw, pc)) = entries.last() {
                let ordered = *pc > count || (*pc == count && pw.as_str() < word);
                if !ordered {
                    return Err(Error::format(origin, lineno, "entries out of rank order"));
                }
            }
            if seen.insert(word.to_owned(), lineno).is_some() {
                return Err(Error::format(origin, lineno, format!("duplicate word {word:?}")));
            }
            entries.push((word.to_owned(), count));
        }
        if entries.len() > capacity {
            return Err(Error::format(
                origin,
                entries.len() + 1,
                format!("{} entries exceed capacity {capacity}", entries.len()),
            ));
        }
        Ok(Self::from_ranked(entries, capacity))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        io::write_atomic(path, self.to_tsv().as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let lines = io::read_lines(path)?;
        Self::parse_tsv(&lines.join("\n"), path)
    }
}

pub fn build_vocabulary(corpus: &Corpus, capacity: usize) -> Result<Vocabulary> {
    Vocabulary::build(corpus, capacity)
}

pub fn freq(vocab: &Vocabulary, word: &str) -> u64 {
    vocab.freq(word)
}

pub fn is_special(word: &str) -> bool {
    SPECIAL_TOKENS.contains(&word)
}
