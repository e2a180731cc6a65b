//! Rare-word handling for attentional neural machine translation.
//!
//! * [`corpus`]: tokenized text and frequency-ranked vocabularies.
//! * [`saa`]: supervised affix separation (`overlooks -> over@@ look @@s`).
//! * [`lsw`]: WordNet synonym replacement for out-of-vocabulary words.
//! * [`bpe`]: byte-pair-encoding baseline.
//! * [`nmt`]: a small attentional encoder-decoder with three output heads,
//!   including source-embedding shortcuts into the output softmax.
//! * [`eval`]: multi-BLEU compatible corpus BLEU.
//! * [`pipeline`]: declarative experiment runner and count reports.

pub mod bpe;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod io;
pub mod lsw;
pub mod markers;
pub mod nmt;
pub mod pipeline;
pub mod report;
pub mod saa;

pub use error::{Error, Result};

/// A parsed value together with the non-fatal problems found while reading it.
#[derive(Debug, Clone)]
pub struct Parsed<T> {
    pub value: T,
    pub warnings: Vec<String>,
}
