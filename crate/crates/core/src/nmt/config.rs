use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How the output distribution is computed from the attentional state `z`
/// and the attention-weighted source embedding average `l`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputHead {
    /// `softmax(W z + b)`
    Baseline,
    /// `softmax(W z + b + W_t t + b_t)` with `t = tanh(W_l l) + l`
    FfnnResidual,
    /// `softmax(W (z + l) + b)`; needs embedding size == hidden size.
    Simplified,
}

impl OutputHead {
    pub const ALL: [OutputHead; 3] = [OutputHead::Baseline, OutputHead::FfnnResidual, OutputHead::Simplified];

    pub fn name(self) -> &'static str {
        match self {
            OutputHead::Baseline => "baseline",
            OutputHead::FfnnResidual => "ffnn_residual",
            OutputHead::Simplified => "simplified",
        }
    }
}

impl fmt::Display for OutputHead {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for OutputHead {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "baseline" => Ok(OutputHead::Baseline),
            "ffnn_residual" | "ffnn" => Ok(OutputHead::FfnnResidual),
            "simplified" => Ok(OutputHead::Simplified),
            other => Err(Error::Config(format!(
                "unknown output head {other:?} (expected baseline, ffnn_residual or simplified)"
            ))),
        }
    }
}

/// Shapes of a model. Vocabulary sizes include the special tokens.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub src_vocab: usize,
    pub tgt_vocab: usize,
    pub embedding: usize,
    pub hidden: usize,
    pub layers: usize,
    pub head: OutputHead,
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let sizes = [
            ("source vocabulary", self.src_vocab),
            ("target vocabulary", self.tgt_vocab),
            ("embedding size", self.embedding),
            ("hidden size", self.hidden),
            ("layer count", self.layers),
        ];
        if let Some((name, _)) = sizes.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("{name} must be positive")));
        }
        if self.head == OutputHead::Simplified && self.embedding != self.hidden {
            return Err(Error::Config(format!(
                "the simplified head adds source embeddings to decoder states and needs \
                 embedding size ({}) == hidden size ({})",
                self.embedding, self.hidden
            )));
        }
        Ok(())
    }
}

/// Training hyperparameters. `Default` is a small CPU-friendly setting;
/// [`TrainingConfig::large`] gives 512-unit layers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    pub layers: usize,
    pub hidden: usize,
    pub embedding: usize,
    pub head: OutputHead,
    pub learning_rate: f64,
    /// Annealing never lowers the learning rate below this.
    pub min_learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Global gradient-norm clip; 0 disables clipping.
    pub clip_norm: f64,
    /// Parameters start uniform in `[-init_scale, init_scale]`.
    pub init_scale: f64,
    pub src_vocab_size: usize,
    pub tgt_vocab_size: usize,
    pub seed: u64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            layers: 2,
            hidden: 64,
            embedding: 64,
            head: OutputHead::Baseline,
            learning_rate: 0.001,
            min_learning_rate: 1e-5,
            epochs: 16,
            batch_size: 32,
            clip_norm: 5.0,
            init_scale: 0.1,
            src_vocab_size: crate::corpus::DEFAULT_VOCAB_SIZE,
            tgt_vocab_size: crate::corpus::DEFAULT_VOCAB_SIZE,
            seed: 1,
        }
    }
}

impl TrainingConfig {
    pub fn large() -> Self {
        TrainingConfig {
            hidden: 512,
            embedding: 512,
            ..TrainingConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be positive".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("learning rate must be positive".into()));
        }
        if self.min_learning_rate < 0.0 || self.clip_norm < 0.0 || self.init_scale < 0.0 {
            return Err(Error::Config(
                "min learning rate, clip norm and init scale must be non-negative".into(),
            ));
        }
        if self.src_vocab_size == 0 || self.tgt_vocab_size == 0 {
            return Err(Error::Config("vocabulary sizes must be positive".into()));
        }
        Ok(())
    }
}
