//! Supervised affix separation.
//!
//! A rare or unknown word is split into at most one prefix, an in-vocabulary
//! stem, and at most one suffix, using a hand-written affix inventory:
//!
//! ```text
//! intercepted -> intercept @@ed
//! overlooks   -> over@@ look @@s
//! ```
//!
//! The prefix is tried first against the whole word; the suffix is then
//! tried against whatever is left. A candidate is accepted only if the
//! remainder is a vocabulary word, so every emitted stem is known to the
//! translation model.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use rayon::prelude::*;

use crate::corpus::{is_special, Corpus, Sentence, Vocabulary};
use crate::error::{Error, Result};
use crate::markers::{self, MARKER};
use crate::{io, Parsed};

const DEFAULT_AFFIXES: &str = include_str!("../data/default_affixes.tsv");

pub const DEFAULT_THRESHOLD: u64 = 1;
pub const DEFAULT_MIN_STEM_LEN: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AffixKind {
    Prefix,
    Suffix,
}

/// Prefix and suffix sets, each kept longest-first with lexicographic ties.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AffixInventory {
    prefixes: Vec<String>,
    suffixes: Vec<String>,
}

fn matching_order(a: &String, b: &String) -> std::cmp::Ordering {
    b.chars().count().cmp(&a.chars().count()).then_with(|| a.cmp(b))
}

fn check_affix(affix: &str) -> std::result::Result<(), String> {
    if affix.is_empty() {
        Err("empty affix".into())
    } else if affix.contains(MARKER) {
        Err(format!("affix {affix:?} contains the `@@` marker"))
    } else if affix.chars().any(char::is_whitespace) {
        Err(format!("affix {affix:?} contains whitespace"))
    } else {
        Ok(())
    }
}

impl AffixInventory {
    /// Builds an inventory, dropping duplicates.
    pub fn new<P, S>(prefixes: P, suffixes: S) -> Result<Self>
    where
        P: IntoIterator,
        P::Item: Into<String>,
        S: IntoIterator,
        S::Item: Into<String>,
    {
        let mut prefixes: Vec<String> = prefixes.into_iter().map(Into::into).collect();
        let mut suffixes: Vec<String> = suffixes.into_iter().map(Into::into).collect();
        for a in prefixes.iter().chain(&suffixes) {
            check_affix(a).map_err(Error::invalid)?;
        }
        for set in [&mut prefixes, &mut suffixes] {
            set.sort_by(matching_order);
            set.dedup();
        }
        Ok(AffixInventory { prefixes, suffixes })
    }

    /// The shipped English inventory (20 prefixes, 32 suffixes).
    pub fn default_english() -> Self {
        Self::parse(DEFAULT_AFFIXES, Path::new("<default affixes>"))
            .expect("default affix inventory is well-formed")
            .value
    }

    /// Parses `prefix<TAB>string` / `suffix<TAB>string` lines. `#` starts a
    /// comment line and blank lines are skipped. Duplicates are dropped with a
    /// warning; empty affixes are rejected.
    pub fn parse(text: &str, origin: &Path) -> Result<Parsed<Self>> {
        let mut seen: BTreeMap<(AffixKind, String), usize> = BTreeMap::new();
        let mut warnings = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let lineno = i + 1;
            let trimmed = line.trim_end_matches('\r');
            if trimmed.trim().is_empty() || trimmed.trim_start().starts_with('#') {
                continue;
            }
            let (kind, affix) = trimmed
                .split_once('\t')
                .ok_or_else(|| Error::format(origin, lineno, "expected `prefix<TAB>affix` or `suffix<TAB>affix`"))?;
            let kind = match kind.trim() {
                "prefix" => AffixKind::Prefix,
                "suffix" => AffixKind::Suffix,
                other => return Err(Error::format(origin, lineno, format!("unknown affix kind {other:?}"))),
            };
            let affix = affix.trim();
            check_affix(affix).map_err(|m| Error::format(origin, lineno, m))?;
            if let Some(first) = seen.get(&(kind, affix.to_owned())) {
                let msg = format!(
                    "{}:{lineno}: duplicate {kind:?} {affix:?} (first on line {first}), ignored",
                    origin.display()
                );
                log::warn!("{msg}");
                warnings.push(msg);
                continue;
            }
            seen.insert((kind, affix.to_owned()), lineno);
        }
        let (mut prefixes, mut suffixes) = (Vec::new(), Vec::new());
        for (kind, affix) in seen.into_keys() {
            match kind {
                AffixKind::Prefix => prefixes.push(affix),
                AffixKind::Suffix => suffixes.push(affix),
            }
        }
        Ok(Parsed {
            value: Self::new(prefixes, suffixes)?,
            warnings,
        })
    }

    pub fn load(path: &Path) -> Result<Parsed<Self>> {
        let lines = io::read_lines(path)?;
        Self::parse(&lines.join("\n"), path)
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for p in &self.prefixes {
            out.push_str(&format!("prefix\t{p}\n"));
        }
        for s in &self.suffixes {
            out.push_str(&format!("suffix\t{s}\n"));
        }
        out
    }

    pub fn prefixes(&self) -> &[String] {
        &self.prefixes
    }

    pub fn suffixes(&self) -> &[String] {
        &self.suffixes
    }

    pub fn len(&self) -> usize {
        self.prefixes.len() + self.suffixes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub fn load_affixes(path: &Path) -> Result<Parsed<AffixInventory>> {
    AffixInventory::load(path)
}

/// A word split as `prefix + stem + suffix`. At least one affix is present
/// and the stem is never empty.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Segmentation {
    pub prefix: Option<String>,
    pub stem: String,
    pub suffix: Option<String>,
}

impl Segmentation {
    /// The original word.
    pub fn word(&self) -> String {
        let mut w = String::new();
        w.push_str(self.prefix.as_deref().unwrap_or(""));
        w.push_str(&self.stem);
        w.push_str(self.suffix.as_deref().unwrap_or(""));
        w
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SaaOptions {
    /// Words with a training frequency at or below this are candidates.
    pub threshold: u64,
    /// Shortest stem (in characters) that may be produced.
    pub min_stem_len: usize,
}

impl Default for SaaOptions {
    fn default() -> Self {
        SaaOptions {
            threshold: DEFAULT_THRESHOLD,
            min_stem_len: DEFAULT_MIN_STEM_LEN,
        }
    }
}

impl SaaOptions {
    fn stem_ok(&self, stem: &str, vocab: &Vocabulary) -> bool {
        !stem.is_empty() && stem.chars().count() >= self.min_stem_len && vocab.contains(stem)
    }
}

/// Splits `word` into affixes and an in-vocabulary stem, or returns `None`
/// when the word is frequent enough or no affix leaves a known stem.
pub fn segment_word(
    word: &str,
    vocab: &Vocabulary,
    inventory: &AffixInventory,
    opts: &SaaOptions,
) -> Option<Segmentation> {
    if word.is_empty() || word.contains(MARKER) || is_special(word) {
        return None;
    }
    if vocab.freq(word) > opts.threshold {
        return None;
    }

    let prefix = inventory.prefixes.iter().find(|p| {
        word.strip_prefix(p.as_str())
            .is_some_and(|rest| opts.stem_ok(rest, vocab))
    });
    let current = match prefix {
        Some(p) => &word[p.len()..],
        None => word,
    };
    let suffix = inventory.suffixes.iter().find(|s| {
        current
            .strip_suffix(s.as_str())
            .is_some_and(|rest| opts.stem_ok(rest, vocab))
    });
    let stem = match suffix {
        Some(s) => &current[..current.len() - s.len()],
        None => current,
    };

    if prefix.is_none() && suffix.is_none() {
        return None;
    }
    Some(Segmentation {
        prefix: prefix.cloned(),
        stem: stem.to_owned(),
        suffix: suffix.cloned(),
    })
}

/// `[p@@] stem [@@s]`.
pub fn render_segmentation(seg: &Segmentation) -> Vec<String> {
    let mut out = Vec::with_capacity(3);
    if let Some(p) = &seg.prefix {
        out.push(format!("{p}{MARKER}"));
    }
    out.push(seg.stem.clone());
    if let Some(s) = &seg.suffix {
        out.push(format!("{MARKER}{s}"));
    }
    out
}

/// How many words an affix-separation pass changed.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SegmentationReport {
    /// Distinct word types that were split.
    pub types: usize,
    /// Token occurrences that were replaced.
    pub tokens: usize,
}

/// Runs [`segment_word`] over every token of `text`.
pub fn apply_saa(
    text: &Corpus,
    vocab: &Vocabulary,
    inventory: &AffixInventory,
    opts: &SaaOptions,
) -> (Corpus, SegmentationReport) {
    let mut types: Vec<&str> = text.tokens().map(String::as_str).collect();
    types.sort_unstable();
    types.dedup();
    let table: HashMap<&str, Vec<String>> = types
        .par_iter()
        .filter_map(|&w| segment_word(w, vocab, inventory, opts).map(|s| (w, render_segmentation(&s))))
        .collect();

    let sentences: Vec<(Sentence, usize)> = text
        .sentences
        .par_iter()
        .map(|s| {
            let mut replaced = 0;
            let mut out = Vec::with_capacity(s.len());
            for tok in s.tokens() {
                match table.get(tok.as_str()) {
                    Some(pieces) => {
                        replaced += 1;
                        out.extend(pieces.iter().cloned());
                    }
                    None => out.push(tok.clone()),
                }
            }
            (Sentence::from_tokens_unchecked(out), replaced)
        })
        .collect();

    let tokens = sentences.iter().map(|(_, n)| n).sum();
    let report = SegmentationReport {
        types: table.len(),
        tokens,
    };
    let corpus = Corpus::new(sentences.into_iter().map(|(s, _)| s).collect(), text.side);
    (corpus, report)
}

/// Rejoins `p@@ stem @@s` runs into words.
pub fn undo_saa(text: &Corpus) -> Result<Corpus> {
    markers::strip_subword_markers(text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Side;

    fn vocab(words: &[&str]) -> Vocabulary {
        let text = words.join(" ");
        let c = Corpus::from_text(&text, Side::Source);
        Vocabulary::build(&c, words.len().max(1)).unwrap()
    }

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

    fn seg(word: &str, v: &Vocabulary) -> Option<Vec<String>> {
        segment_word(word, v, &AffixInventory::default_english(), &SaaOptions::default())
            .map(|s| render_segmentation(&s))
    }

    #[test]
    fn default_inventory_has_52_affixes() {
        let inv = AffixInventory::default_english();
        assert_eq!(inv.len(), 52);
        assert_eq!(inv.prefixes().len(), 20);
        assert_eq!(inv.suffixes().len(), 32);
    }

    #[test]
    fn inventory_orders_longest_first() {
        let inv = AffixInventory::new(["un", "under", "re"], ["s", "ness", "es"]).unwrap();
        assert_eq!(inv.prefixes(), ["under", "re", "un"]);
        assert_eq!(inv.suffixes(), ["ness", "es", "s"]);
    }

    #[test]
    fn parse_inventory_file() {
        let text = "# comment\nprefix\tdis\nsuffix\ted\nsuffix\tly\n";
        let parsed = AffixInventory::parse(text, Path::new("a.tsv")).unwrap();
        assert_eq!(parsed.value.prefixes(), ["dis"]);
        assert_eq!(parsed.value.suffixes(), ["ed", "ly"]);
        assert!(parsed.warnings.is_empty());
    }

    #[test]
    fn duplicate_affix_warns_and_dedupes() {
        let text = "suffix\ted\nsuffix\ted\n";
        let parsed = AffixInventory::parse(text, Path::new("a.tsv")).unwrap();
        assert_eq!(parsed.value.suffixes(), ["ed"]);
        assert_eq!(parsed.warnings.len(), 1);
        assert!(parsed.warnings[0].contains(":2:"));
    }

    #[test]
    fn empty_affix_is_rejected_with_line() {
        let err = AffixInventory::parse("prefix\tre\nsuffix\t\n", Path::new("a.tsv")).unwrap_err();
        assert!(matches!(err, Error::Format { line: 2, .. }), "{err}");
        let err = AffixInventory::parse("infix\tx\n", Path::new("a.tsv")).unwrap_err();
        assert!(matches!(err, Error::Format { line: 1, .. }));
        assert!(AffixInventory::new(["re@@"], Vec::<String>::new()).is_err());
    }

    #[test]
    fn worked_examples() {
        let v = vocab(&["intercept", "impulsive", "looks", "look", "owned", "own"]);
        assert_eq!(seg("intercepted", &v).unwrap(), ["intercept", "@@ed"]);
        assert_eq!(seg("impulsively", &v).unwrap(), ["impulsive", "@@ly"]);
        assert_eq!(seg("overlooks", &v).unwrap(), ["over@@", "look", "@@s"]);
        assert_eq!(seg("disowned", &v).unwrap(), ["dis@@", "own", "@@ed"]);
    }

    #[test]
    fn frequent_words_are_untouched() {
        let v = vocab_with(&[("looked", 100), ("look", 50)]);
        assert_eq!(seg("looked", &v), None);
        // At the threshold the word is still a candidate.
        let v = vocab_with(&[("looked", 1), ("look", 50)]);
        assert_eq!(seg("looked", &v).unwrap(), ["look", "@@ed"]);
    }

    #[test]
    fn no_split_without_known_stem() {
        let v = vocab(&["cat"]);
        assert_eq!(seg("dogs", &v), None);
        assert_eq!(seg("cat", &v), None);
    }

    #[test]
    fn short_stems_are_rejected() {
        let v = vocab(&["a", "in"]);
        assert_eq!(seg("as", &v), None);
        let lax = SaaOptions {
            min_stem_len: 1,
            ..SaaOptions::default()
        };
        let s = segment_word("as", &v, &AffixInventory::default_english(), &lax).unwrap();
        assert_eq!(render_segmentation(&s), ["a", "@@s"]);
    }

    #[test]
    fn one_prefix_and_one_suffix_at_most() {
        // "unrelated" could also lose "re", but stripping stops after one prefix.
        let v = vocab(&["lated", "related"]);
        let s = segment_word(
            "unrelated",
            &v,
            &AffixInventory::default_english(),
            &SaaOptions::default(),
        )
        .unwrap();
        assert_eq!(render_segmentation(&s), ["un@@", "related"]);
        assert_eq!(s.word(), "unrelated");
    }

    #[test]
    fn apply_and_undo_sentence() {
        let v = vocab(&["he", "own", "owned", "it"]);
        let inv = AffixInventory::new(["dis"], ["ed"]).unwrap();
        let c = Corpus::from_text("he disowned it\n", Side::Source);
        let (out, report) = apply_saa(&c, &v, &inv, &SaaOptions::default());
        assert_eq!(out.to_text(), "he dis@@ own @@ed it\n");
        assert_eq!(report, SegmentationReport { types: 1, tokens: 1 });
        assert_eq!(undo_saa(&out).unwrap(), c);
    }

    #[test]
    fn no_oov_is_a_no_op() {
        let c = Corpus::from_text("a b\nb a\n", Side::Source);
        let v = Vocabulary::build(&c, 10).unwrap();
        let (out, report) = apply_saa(
            &c,
            &v,
            &AffixInventory::default_english(),
            &SaaOptions {
                threshold: 0,
                ..SaaOptions::default()
            },
        );
        assert_eq!(out.to_text(), c.to_text());
        assert_eq!(report, SegmentationReport::default());
    }

    #[test]
    fn undo_reports_dangling_marker() {
        let c = Corpus::from_text("dis@@\n", Side::Source);
        assert!(undo_saa(&c).is_err());
    }
}
