//! Attentional encoder-decoder with source-embedding output heads.
//!
//! The model is small and dense, written with `ndarray` and trained with a
//! hand-written backward pass (see [`gradcheck`] for its validation). Three
//! output heads are available; see [`OutputHead`].

pub mod checkpoint;
pub mod config;
pub mod decode;
pub mod gradcheck;
pub mod lexicon;
pub mod lstm;
mod math;
pub mod model;
pub mod params;
pub mod train;

pub use config::{ModelConfig, OutputHead, TrainingConfig};
pub use decode::{
    select_best_variant, translate, translate_corpus, translate_ids, translate_variants, Hypothesis, VariantChoice,
};
pub use gradcheck::{gradient_check, GradCheckReport};
pub use lexicon::Lexicon;
pub use model::{attention, decode_step, encode, output_logits, DecodeStep, DecoderState, EncoderStates};
pub use params::{Augmentation, ModelParams};
pub use train::{train, train_params, Example, Model, TrainingLog};
