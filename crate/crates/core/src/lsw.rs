//! Synonym replacement for out-of-vocabulary words.
//!
//! A flat list of WordNet synonym pairs is closed under symmetry into a
//! [`SynonymStore`]. For every unknown (or rare) word of an input text, the
//! synonyms that are vocabulary members are ranked by training frequency to
//! form a [`SynonymTable`], which is then applied to the text.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::path::Path;

use rayon::prelude::*;

use crate::corpus::{is_special, Corpus, Sentence, Vocabulary};
use crate::error::{Error, Result};
use crate::{io, Parsed};

pub const DEFAULT_THRESHOLD: u64 = 0;

/// Upper bound on the number of variants generated for one sentence.
pub const VARIANT_CAP: usize = 64;

/// Symmetric synonym relation built from word pairs.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SynonymStore {
    synonyms: BTreeMap<String, BTreeSet<String>>,
    raw_pairs: usize,
    unique_pairs: usize,
}

fn valid_word(w: &str) -> bool {
    !w.is_empty() && !w.chars().any(char::is_whitespace)
}

impl SynonymStore {
    /// Adds both directions of every pair. Self-pairs are dropped.
    pub fn from_pairs<I, S>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (S, S)>,
        S: Into<String>,
    {
        let mut store = SynonymStore::default();
        for (a, b) in pairs {
            store.insert(a.into(), b.into());
        }
        store
    }

    /// Returns false for a self-pair, which is not stored.
    fn insert(&mut self, a: String, b: String) -> bool {
        self.raw_pairs += 1;
        if a == b {
            return false;
        }
        let fresh = self.synonyms.entry(a.clone()).or_default().insert(b.clone());
        self.synonyms.entry(b).or_default().insert(a);
        if fresh {
            self.unique_pairs += 1;
        }
        true
    }

    /// Reads `word<TAB>word` lines. Malformed lines and self-pairs are skipped
    /// with a warning.
    pub fn parse(text: &str, origin: &Path) -> Parsed<Self> {
        let mut store = SynonymStore::default();
        let mut warnings = Vec::new();
        let mut warn = |msg: String| {
            log::warn!("{msg}");
            warnings.push(msg);
        };
        for (i, line) in text.lines().enumerate() {
            let lineno = i + 1;
            let line = line.trim_end_matches('\r');
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 2 || !valid_word(fields[0]) || !valid_word(fields[1]) {
                warn(format!(
                    "{}:{lineno}: expected `word<TAB>word`, line skipped",
                    origin.display()
                ));
                continue;
            }
            if !store.insert(fields[0].to_owned(), fields[1].to_owned()) {
                warn(format!(
                    "{}:{lineno}: self-pair {:?} dropped",
                    origin.display(),
                    fields[0]
                ));
            }
        }
        Parsed { value: store, warnings }
    }

    pub fn load(path: &Path) -> Result<Parsed<Self>> {
        let lines = io::read_lines(path)?;
        Ok(Self::parse(&lines.join("\n"), path))
    }

    pub fn synonyms(&self, word: &str) -> impl Iterator<Item = &str> {
        self.synonyms
            .get(word)
            .into_iter()
            .flat_map(|s| s.iter().map(String::as_str))
    }

    pub fn contains(&self, word: &str) -> bool {
        self.synonyms.contains_key(word)
    }

    /// Pairs read, including duplicates and self-pairs.
    pub fn raw_pair_count(&self) -> usize {
        self.raw_pairs
    }

    /// Distinct unordered pairs stored.
    pub fn pair_count(&self) -> usize {
        self.unique_pairs
    }

    pub fn word_count(&self) -> usize {
        self.synonyms.len()
    }
}

pub fn load_synonym_pairs(path: &Path) -> Result<Parsed<SynonymStore>> {
    SynonymStore::load(path)
}

/// Unknown word to in-vocabulary synonyms, most frequent first.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SynonymTable {
    entries: BTreeMap<String, Vec<String>>,
}

impl SynonymTable {
    pub fn get(&self, word: &str) -> Option<&[String]> {
        self.entries.get(word).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[String])> {
        self.entries.iter().map(|(w, s)| (w.as_str(), s.as_slice()))
    }

    /// `word<TAB>syn1,syn2,...` per line, sorted by word. Fails if a word
    /// contains a comma, which the format cannot represent.
    pub fn to_tsv(&self) -> Result<String> {
        let mut out = String::new();
        for (w, syns) in &self.entries {
            if let Some(bad) = std::iter::once(w).chain(syns).find(|s| s.contains(',')) {
                return Err(Error::invalid(format!(
                    "word {bad:?} contains a comma and cannot be written to a synonym table"
                )));
            }
            out.push_str(w);
            out.push('\t');
            out.push_str(&syns.join(","));
            out.push('\n');
        }
        Ok(out)
    }

    pub fn parse_tsv(text: &str, origin: &Path) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let lineno = i + 1;
            if line.is_empty() {
                continue;
            }
            let (word, syns) = line
                .split_once('\t')
                .ok_or_else(|| Error::format(origin, lineno, "expected `word<TAB>syn1,syn2,...`"))?;
            let syns: Vec<String> = syns.split(',').map(str::to_owned).collect();
            if !valid_word(word) || syns.iter().any(|s| !valid_word(s)) {
                return Err(Error::format(origin, lineno, "empty or whitespace-containing word"));
            }
            if entries.insert(word.to_owned(), syns).is_some() {
                return Err(Error::format(origin, lineno, format!("duplicate entry {word:?}")));
            }
        }
        Ok(SynonymTable { entries })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        io::write_atomic(path, self.to_tsv()?.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let lines = io::read_lines(path)?;
        Self::parse_tsv(&lines.join("\n"), path)
    }
}

/// Builds the synonym table for the words of `input` that are unknown to
/// `vocab` or occur at most `threshold` times in training.
///
/// Candidates outside the vocabulary are dropped; survivors are ordered by
/// descending frequency, ties by word. Words left without candidates get no
/// entry.
pub fn learn_synonym_table(vocab: &Vocabulary, input: &Corpus, store: &SynonymStore, threshold: u64) -> SynonymTable {
    let words: BTreeSet<&str> = input
        .tokens()
        .map(String::as_str)
        .filter(|w| !is_special(w) && vocab.freq(w) <= threshold)
        .collect();
    let mut entries = BTreeMap::new();
    for w in words {
        let mut candidates: Vec<&str> = store.synonyms(w).filter(|s| vocab.contains(s)).collect();
        if candidates.is_empty() {
            continue;
        }
        candidates.sort_by(|a, b| vocab.freq(b).cmp(&vocab.freq(a)).then_with(|| a.cmp(b)));
        entries.insert(w.to_owned(), candidates.into_iter().map(str::to_owned).collect());
    }
    SynonymTable { entries }
}

/// Replaces every tabled word by its most frequent synonym.
pub fn replace_one_best(text: &Corpus, table: &SynonymTable) -> Corpus {
    let sentences = text
        .sentences
        .par_iter()
        .map(|s| {
            let tokens = s
                .tokens()
                .iter()
                .map(|t| match table.get(t) {
                    Some(syns) => syns[0].clone(),
                    None => t.clone(),
                })
                .collect();
            Sentence::from_tokens_unchecked(tokens)
        })
        .collect();
    Corpus::new(sentences, text.side)
}

/// Every combination of the top `n_best` synonyms for the tabled words of
/// `sentence`, in odometer order with the last tabled word varying fastest.
/// The first variant is the 1-best replacement. At most [`VARIANT_CAP`]
/// variants are produced.
pub fn expand_variants(sentence: &Sentence, table: &SynonymTable, n_best: usize) -> Vec<Sentence> {
    let slots: Vec<(usize, &[String])> = sentence
        .tokens()
        .iter()
        .enumerate()
        .filter_map(|(i, t)| table.get(t).map(|s| (i, &s[..s.len().min(n_best)])))
        .collect();
    let mut choice = vec![0usize; slots.len()];
    let mut variants = Vec::new();
    loop {
        let mut tokens = sentence.tokens().to_vec();
        for ((pos, syns), &k) in slots.iter().zip(&choice) {
            tokens[*pos] = syns[k].clone();
        }
        variants.push(Sentence::from_tokens_unchecked(tokens));
        if variants.len() == VARIANT_CAP {
            break;
        }
        // advance the odometer
        let mut carry = true;
        for (slot, k) in slots.iter().zip(choice.iter_mut()).rev() {
            *k += 1;
            if *k < slot.1.len() {
                carry = false;
                break;
            }
            *k = 0;
        }
        if carry {
            break;
        }
    }
    variants
}

/// Candidate source sentences, grouped by the input sentence they came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VariantSet {
    pub groups: Vec<Vec<Sentence>>,
}

impl VariantSet {
    /// `index<TAB>sentence` per line, index being the 0-based input line.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (i, group) in self.groups.iter().enumerate() {
            for v in group {
                out.push_str(&format!("{i}\t{v}\n"));
            }
        }
        out
    }

    pub fn parse_tsv(text: &str, origin: &Path) -> Result<Self> {
        let mut groups: Vec<Vec<Sentence>> = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let lineno = i + 1;
            let (idx, sent) = line
                .split_once('\t')
                .ok_or_else(|| Error::format(origin, lineno, "expected `index<TAB>sentence`"))?;
            let idx: usize = idx
                .parse()
                .map_err(|_| Error::format(origin, lineno, format!("bad index {idx:?}")))?;
            if idx == groups.len() {
                groups.push(Vec::new());
            } else if idx + 1 != groups.len() {
                return Err(Error::format(origin, lineno, "variant indices must be contiguous"));
            }
            groups[idx].push(Sentence::parse(sent));
        }
        Ok(VariantSet { groups })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LswOutput {
    Replaced(Corpus),
    Variants(VariantSet),
}

/// With `n_best == 1` the text is rewritten in place; otherwise each sentence
/// expands into its synonym variants.
pub fn apply_lsw(text: &Corpus, table: &SynonymTable, n_best: usize) -> Result<LswOutput> {
    match n_best {
        0 => Err(Error::invalid("n_best must be at least 1")),
        1 => Ok(LswOutput::Replaced(replace_one_best(text, table))),
        n => Ok(LswOutput::Variants(VariantSet {
            groups: text
                .sentences
                .par_iter()
                .map(|s| expand_variants(s, table, n))
                .collect(),
        })),
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ReplacementCounts {
    /// Token occurrences replaced by a synonym.
    pub tokens: usize,
    /// Distinct original words that were replaced.
    pub types: usize,
}

/// Counts positions where `after` holds a tabled synonym of the word in
/// `before`.
pub fn report_replacements(before: &Corpus, after: &Corpus, table: &SynonymTable) -> Result<ReplacementCounts> {
    if before.len() != after.len() {
        return Err(Error::invalid(format!(
            "corpora differ in length: {} vs {} sentences",
            before.len(),
            after.len()
        )));
    }
    let mut tokens = 0;
    let mut types = HashSet::new();
    for (i, (b, a)) in before.sentences.iter().zip(&after.sentences).enumerate() {
        if b.len() != a.len() {
            return Err(Error::invalid(format!(
                "sentence {} differs in length: {} vs {} tokens",
                i + 1,
                b.len(),
                a.len()
            )));
        }
        for (bt, at) in b.tokens().iter().zip(a.tokens()) {
            if bt != at && table.get(bt).is_some_and(|s| s.contains(at)) {
                tokens += 1;
                types.insert(bt.as_str());
            }
        }
    }
    Ok(ReplacementCounts {
        tokens,
        types: types.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Side;

    fn vocab_with(words: &[(&str, usize)]) -> Vocabulary {
        let mut text = String::new();
        for (w, n) in words {
            for _ in 0..*n {
                text.push_str(w);
                text.push(' ');
            }
        }
        Vocabulary::build(&Corpus::from_text(&text, Side::Source), 1000).unwrap()
    }

    fn corpus(text: &str) -> Corpus {
        Corpus::from_text(text, Side::Source)
    }

    #[test]
    fn store_is_symmetric() {
        let s = SynonymStore::from_pairs([("tryout", "test")]);
        assert_eq!(s.synonyms("tryout").collect::<Vec<_>>(), ["test"]);
        assert_eq!(s.synonyms("test").collect::<Vec<_>>(), ["tryout"]);
    }

    #[test]
    fn self_pairs_and_malformed_lines_warn() {
        let parsed = SynonymStore::parse("a\ta\nb\tc\nbroken\nx\ty\tz\nc\tb\n", Path::new("p.tsv"));
        assert_eq!(parsed.warnings.len(), 3);
        assert!(parsed.warnings[0].contains(":1:"));
        assert!(parsed.warnings[1].contains(":3:"));
        assert_eq!(parsed.value.synonyms("a").count(), 0);
        assert_eq!(parsed.value.raw_pair_count(), 3);
        assert_eq!(parsed.value.pair_count(), 1);
    }

    #[test]
    fn table_filters_and_sorts() {
        let v = vocab_with(&[("test", 40), ("exam", 7), ("the", 100)]);
        let store = SynonymStore::from_pairs([("tryout", "test"), ("tryout", "exam"), ("tryout", "quiz")]);
        let t = learn_synonym_table(&v, &corpus("the tryout"), &store, 0);
        assert_eq!(t.get("tryout").unwrap(), ["test", "exam"]);
        assert_eq!(t.len(), 1);
    }

    #[test]
    fn known_words_are_not_tabled() {
        let v = vocab_with(&[("rare", 5), ("common", 50)]);
        let store = SynonymStore::from_pairs([("rare", "common")]);
        assert!(learn_synonym_table(&v, &corpus("rare"), &store, 0).is_empty());
        assert_eq!(
            learn_synonym_table(&v, &corpus("rare"), &store, 5).get("rare").unwrap(),
            ["common"]
        );
    }

    #[test]
    fn words_without_surviving_synonyms_get_no_entry() {
        let v = vocab_with(&[("a", 1)]);
        let store = SynonymStore::from_pairs([("zzz", "qqq")]);
        assert!(learn_synonym_table(&v, &corpus("zzz"), &store, 0).is_empty());
    }

    #[test]
    fn one_best_replacement() {
        let v = vocab_with(&[("test", 3)]);
        let store = SynonymStore::from_pairs([("tryout", "test")]);
        let input = corpus("I started this as a tryout");
        let table = learn_synonym_table(&v, &input, &store, 0);
        let out = apply_lsw(&input, &table, 1).unwrap();
        assert_eq!(out, LswOutput::Replaced(corpus("I started this as a test")));
        assert_eq!(
            apply_lsw(&corpus("nothing here"), &table, 1).unwrap(),
            LswOutput::Replaced(corpus("nothing here"))
        );
        assert!(apply_lsw(&input, &table, 0).is_err());
    }

    fn table(entries: &[(&str, &[&str])]) -> SynonymTable {
        SynonymTable {
            entries: entries
                .iter()
                .map(|(w, s)| (w.to_string(), s.iter().map(|x| x.to_string()).collect()))
                .collect(),
        }
    }

    #[test]
    fn variants_are_the_cartesian_product() {
        let t = table(&[("x", &["a", "b", "c", "d"]), ("y", &["p", "q", "r"])]);
        let s = Sentence::parse("x and y");
        let vs = expand_variants(&s, &t, 3);
        assert_eq!(vs.len(), 9);
        assert_eq!(vs[0].to_string(), "a and p");
        assert_eq!(vs[1].to_string(), "a and q");
        assert_eq!(vs[8].to_string(), "c and r");
        let unique: HashSet<_> = vs.iter().collect();
        assert_eq!(unique.len(), 9);
    }

    #[test]
    fn variants_are_capped() {
        let t = table(&[("x", &["a", "b", "c", "d"])]);
        let s = Sentence::parse("x x x x");
        assert_eq!(expand_variants(&s, &t, 4).len(), VARIANT_CAP);
        assert_eq!(expand_variants(&Sentence::parse("no match"), &t, 4).len(), 1);
    }

    #[test]
    fn variant_file_round_trip() {
        let t = table(&[("x", &["a", "b"])]);
        let out = apply_lsw(&corpus("x y\nz\n"), &t, 2).unwrap();
        let LswOutput::Variants(vs) = out else { panic!() };
        let back = VariantSet::parse_tsv(&vs.to_tsv(), Path::new("v")).unwrap();
        assert_eq!(back, vs);
        assert_eq!(vs.to_tsv(), "0\ta y\n0\tb y\n1\tz\n");
    }

    #[test]
    fn table_file_round_trip() {
        let t = table(&[("tryout", &["test", "exam"]), ("ñandú", &["rhea"])]);
        let text = t.to_tsv().unwrap();
        assert_eq!(SynonymTable::parse_tsv(&text, Path::new("c")).unwrap(), t);
        assert!(table(&[("a,b", &["c"])]).to_tsv().is_err());
    }

    #[test]
    fn replacement_report() {
        let t = table(&[("tryout", &["test"])]);
        let before = corpus("a tryout\ntryout b tryout\n");
        let after = replace_one_best(&before, &t);
        assert_eq!(
            report_replacements(&before, &after, &t).unwrap(),
            ReplacementCounts { tokens: 3, types: 1 }
        );
        assert_eq!(report_replacements(&before, &before, &t).unwrap().tokens, 0);
        assert!(report_replacements(&before, &corpus("a"), &t).is_err());
        assert!(report_replacements(&corpus("a b"), &corpus("a"), &t).is_err());
    }
}
