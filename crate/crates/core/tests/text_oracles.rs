mod common;

use std::collections::BTreeMap;
use std::path::Path;

use rand::Rng;
use rareword::bpe::{bpe_apply, bpe_learn};
use rareword::corpus::{Corpus, Side, Vocabulary};
use rareword::lsw::{apply_lsw, learn_synonym_table, replace_one_best, report_replacements, LswOutput, SynonymStore};
use rareword::markers::strip_subword_markers;
use rareword::saa::{apply_saa, segment_word, undo_saa, AffixInventory, SaaOptions};

use common::{brute_bpe, brute_synonym_table, brute_vocab, random_corpus, random_word, rng};

fn saa_fixture() -> Corpus {
    Corpus::load(Path::new("tests/data/saa/corpus.txt"), Side::Source).unwrap()
}

// ---------------------------------------------------------------- vocabulary

pub fn vocabulary_matches_brute_force_counts() {
    let mut r = rng(1);
    for round in 0..200 {
        let words: Vec<String> = (0..30).map(|_| random_word(&mut r, b"abcde", 1, 3)).collect();
        let corpus = random_corpus(&mut r, &words, 20, 8);
        let cap = r.gen_range(1..40);
        let want = brute_vocab(&corpus, cap);
        for shards in [1, 3, 8] {
            let v = Vocabulary::build_sharded(&corpus, cap, shards).unwrap();
            assert_eq!(v.entries(), &want[..], "round {round} shards {shards}");
        }
    }
}

// ---------------------------------------------------------------- saa

/// Affix separation written out independently: longest prefix whose
/// remainder is known, then longest suffix of what is left with a known
/// remainder; stems shorter than two characters are never produced.
fn oracle_segment(
    word: &str,
    v: &Vocabulary,
    prefixes: &[&str],
    suffixes: &[&str],
) -> Option<(Option<String>, String, Option<String>)> {
    if v.freq(word) > 1 {
        return None;
    }
    let known = |s: &str| s.chars().count() >= 2 && v.contains(s);
    let mut ps: Vec<&str> = prefixes.to_vec();
    ps.sort_by(|a, b| b.len().cmp(&a.len()).then(a.cmp(b)));
    let mut ss: Vec<&str> = suffixes.to_vec();
    ss.sort_by(|a, b| b.len().cmp(&a.len()).then(a.cmp(b)));
    let mut prefix = None;
    let mut rest = word.to_string();
    for p in ps {
        if word.len() > p.len() && word.starts_with(p) && known(&word[p.len()..]) {
            prefix = Some(p.to_string());
            rest = word[p.len()..].to_string();
            break;
        }
    }
    let mut suffix = None;
    let mut stem = rest.clone();
    for s in ss {
        if rest.len() > s.len() && rest.ends_with(s) && known(&rest[..rest.len() - s.len()]) {
            suffix = Some(s.to_string());
            stem = rest[..rest.len() - s.len()].to_string();
            break;
        }
    }
    (prefix.is_some() || suffix.is_some()).then_some((prefix, stem, suffix))
}

pub fn saa_fixture_matches_oracle_and_round_trips() {
    let corpus = saa_fixture();
    assert_eq!(corpus.token_count(), 1000);
    let inv = AffixInventory::default_english();
    assert_eq!(inv.prefixes().len(), 20);
    assert_eq!(inv.suffixes().len(), 32);
    let v = Vocabulary::build(&corpus, 50_000).unwrap();
    let opts = SaaOptions::default();
    let prefixes: Vec<&str> = inv.prefixes().iter().map(String::as_str).collect();
    let suffixes: Vec<&str> = inv.suffixes().iter().map(String::as_str).collect();

    let mut split = 0;
    for (w, _) in v.entries() {
        let got = segment_word(w, &v, &inv, &opts).map(|s| (s.prefix.clone(), s.stem.clone(), s.suffix.clone()));
        let want = oracle_segment(w, &v, &prefixes, &suffixes);
        assert_eq!(got, want, "{w}");
        if let Some((_, stem, _)) = &got {
            assert!(v.contains(stem));
            split += 1;
        }
    }
    assert!(split > 100, "fixture should exercise many splits, got {split}");

    let (out, report) = apply_saa(&corpus, &v, &inv, &opts);
    assert_eq!(report.types, split);
    assert_eq!(undo_saa(&out).unwrap(), corpus);
}

pub fn saa_worked_examples() {
    let corpus = saa_fixture();
    let v = Vocabulary::build(&corpus, 50_000).unwrap();
    let inv = AffixInventory::default_english();
    let text = Corpus::from_text("intercepted impulsively overlooks disowned\n", Side::Source);
    let (out, _) = apply_saa(&text, &v, &inv, &SaaOptions::default());
    assert_eq!(
        out.to_text(),
        "intercept @@ed impulsive @@ly over@@ look @@s dis@@ own @@ed\n"
    );
}

// ---------------------------------------------------------------- lsw

fn lsw_fixture() -> (Corpus, Vec<(String, String)>) {
    let mut r = rng(500);
    let words: Vec<String> = (0..400).map(|_| random_word(&mut r, b"abcdefgh", 2, 5)).collect();
    let corpus = random_corpus(&mut r, &words, 300, 12);
    let mut pairs = Vec::new();
    while pairs.len() < 500 {
        let a = words[r.gen_range(0..words.len())].clone();
        let b = if r.gen_bool(0.2) {
            random_word(&mut r, b"abcdefgh", 2, 5)
        } else {
            words[r.gen_range(0..words.len())].clone()
        };
        pairs.push((a, b));
    }
    (corpus, pairs)
}

pub fn synonym_table_matches_brute_force() {
    let (corpus, pairs) = lsw_fixture();
    let store = SynonymStore::from_pairs(pairs.iter().map(|(a, b)| (a.as_str(), b.as_str())));
    assert_eq!(store.raw_pair_count(), 500);
    let mut entries = 0;
    for cap in [50, 150, 400] {
        let v = Vocabulary::build(&corpus, cap).unwrap();
        for threshold in [0, 1, 3] {
            let table = learn_synonym_table(&v, &corpus, &store, threshold);
            let got: BTreeMap<String, Vec<String>> = table.iter().map(|(w, s)| (w.to_owned(), s.to_vec())).collect();
            let want = brute_synonym_table(v.entries(), &corpus, &pairs, threshold);
            entries += want.len();
            assert_eq!(got, want, "cap {cap} threshold {threshold}");
        }
    }
    assert!(entries > 100, "{entries}");
}

pub fn replacement_invariants_under_fuzzing() {
    let mut r = rng(10_000);
    let alphabet = b"abcd";
    for round in 0..10_000 {
        let words: Vec<String> = (0..12).map(|_| random_word(&mut r, alphabet, 1, 2)).collect();
        let corpus = random_corpus(&mut r, &words, 4, 6);
        let cap = r.gen_range(1..8);
        let threshold = r.gen_range(0..3);
        let v = Vocabulary::build_sharded(&corpus, cap, 1).unwrap();
        let pairs: Vec<(String, String)> = (0..8)
            .map(|_| (random_word(&mut r, alphabet, 1, 2), random_word(&mut r, alphabet, 1, 2)))
            .collect();
        let store = SynonymStore::from_pairs(pairs.iter().map(|(a, b)| (a.as_str(), b.as_str())));
        let table = learn_synonym_table(&v, &corpus, &store, threshold);
        let out = replace_one_best(&corpus, &table);
        for (before, after) in corpus.sentences.iter().zip(&out.sentences) {
            assert_eq!(before.len(), after.len());
            for (b, a) in before.tokens().iter().zip(after.tokens()) {
                if v.freq(b) > threshold {
                    assert_eq!(a, b, "round {round}: frequent word replaced");
                } else if a != b {
                    assert!(v.contains(a), "round {round}: replacement outside V");
                }
            }
        }
        let counts = report_replacements(&corpus, &out, &table).unwrap();
        assert!(counts.types <= table.len());
        if let LswOutput::Variants(set) = apply_lsw(&corpus, &table, 2).unwrap() {
            for (group, s) in set.groups.iter().zip(&out.sentences) {
                assert_eq!(&group[0], s);
            }
        }
    }
}

// ---------------------------------------------------------------- bpe

pub fn bpe_merges_match_brute_force() {
    let mut r = rng(3);
    for round in 0..40 {
        let distinct = r.gen_range(5..=200);
        let words: Vec<String> = (0..distinct).map(|_| random_word(&mut r, b"abcdef", 1, 7)).collect();
        let corpus = random_corpus(&mut r, &words, 60, 10);
        let merges = bpe_learn(&corpus, 100);
        let want = brute_bpe(&corpus, 100);
        assert_eq!(merges.rules(), &want[..], "round {round}");

        let applied = bpe_apply(&corpus, &merges);
        assert_eq!(strip_subword_markers(&applied).unwrap(), corpus);
    }
}

pub fn bpe_training_words_become_single_pieces_with_enough_merges() {
    let corpus = Corpus::from_text("lower lower newest newest widest widest low low\n", Side::Source);
    let merges = bpe_learn(&corpus, 1000);
    let out = bpe_apply(&corpus, &merges);
    assert_eq!(out, corpus);
}

// The checks are plain functions so the acceptance binary can call them.
mod tests {
    #[test]
    fn vocabulary_matches_brute_force_counts() {
        super::vocabulary_matches_brute_force_counts()
    }
    #[test]
    fn saa_fixture_matches_oracle_and_round_trips() {
        super::saa_fixture_matches_oracle_and_round_trips()
    }
    #[test]
    fn saa_worked_examples() {
        super::saa_worked_examples()
    }
    #[test]
    fn synonym_table_matches_brute_force() {
        super::synonym_table_matches_brute_force()
    }
    #[test]
    fn replacement_invariants_under_fuzzing() {
        super::replacement_invariants_under_fuzzing()
    }
    #[test]
    fn bpe_merges_match_brute_force() {
        super::bpe_merges_match_brute_force()
    }
    #[test]
    fn bpe_training_words_become_single_pieces_with_enough_merges() {
        super::bpe_training_words_become_single_pieces_with_enough_merges()
    }
}
