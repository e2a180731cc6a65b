use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::corpus::{Sentence, Vocabulary, BOS, EOS, SPECIAL_TOKENS, UNK};

pub const UNK_ID: usize = 0;
pub const BOS_ID: usize = 1;
pub const EOS_ID: usize = 2;
pub const PAD_ID: usize = 3;

/// Word/id mapping for one side of the model: the special tokens take ids
/// 0..4, vocabulary words follow in rank order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct Lexicon {
    words: Vec<String>,
    ids: HashMap<String, usize>,
}

impl From<Vec<String>> for Lexicon {
    fn from(words: Vec<String>) -> Self {
        let ids = words.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
        Lexicon { words, ids }
    }
}

impl From<Lexicon> for Vec<String> {
    fn from(l: Lexicon) -> Self {
        l.words
    }
}

impl Lexicon {
    pub fn from_vocabulary(vocab: &Vocabulary) -> Self {
        let words: Vec<String> = SPECIAL_TOKENS
            .iter()
            .map(|s| s.to_string())
            .chain(vocab.iter().map(|(w, _)| w.to_owned()))
            .collect();
        Lexicon::from(words)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn id(&self, word: &str) -> usize {
        self.ids.get(word).copied().unwrap_or(UNK_ID)
    }

    pub fn word(&self, id: usize) -> &str {
        self.words.get(id).map_or(UNK, String::as_str)
    }

    /// Token ids; unknown words map to `<unk>`.
    pub fn encode(&self, sentence: &Sentence) -> Vec<usize> {
        sentence.tokens().iter().map(|t| self.id(t)).collect()
    }

    /// Words for `ids`, dropping sentence boundary tokens.
    pub fn decode(&self, ids: &[usize]) -> Sentence {
        let words: Vec<String> = ids
            .iter()
            .map(|&i| self.word(i))
            .filter(|w| *w != BOS && *w != EOS)
            .map(str::to_owned)
            .collect();
        Sentence::from_tokens_unchecked(words)
    }
}
