use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::config::{ModelConfig, TrainingConfig};
use super::lexicon::Lexicon;
use super::model::{sentence_gradient, sentence_loss};
use super::params::ModelParams;
use crate::corpus::{check_parallel, Corpus, Vocabulary};
use crate::error::{Error, Result};
use crate::io;

/// A sentence pair as token ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Example {
    pub src: Vec<usize>,
    pub tgt: Vec<usize>,
}

/// Converts a parallel corpus to ids. Pairs with an empty source side are
/// dropped since there is nothing to attend to.
pub fn examples(src: &Corpus, tgt: &Corpus, src_lex: &Lexicon, tgt_lex: &Lexicon) -> Result<Vec<Example>> {
    check_parallel(src, tgt)?;
    let mut out = Vec::with_capacity(src.len());
    for (s, t) in src.sentences.iter().zip(&tgt.sentences) {
        if s.is_empty() {
            log::warn!("skipping sentence pair with an empty source side");
            continue;
        }
        out.push(Example {
            src: src_lex.encode(s),
            tgt: tgt_lex.encode(t),
        });
    }
    Ok(out)
}

/// Adam with bias correction.
#[derive(Debug, Clone)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: i32,
    m: ModelParams,
    v: ModelParams,
}

impl Adam {
    pub fn new(params: &ModelParams) -> Self {
        Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: params.zeros_like(),
            v: params.zeros_like(),
        }
    }

    pub fn update(&mut self, params: &mut ModelParams, grad: &ModelParams, lr: f64) -> Result<()> {
        self.step += 1;
        let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);
        self.m.zip_mut(grad, |m, g| {
            for (m, g) in m.iter_mut().zip(g) {
                *m = b1 * *m + (1.0 - b1) * g;
            }
        })?;
        self.v.zip_mut(grad, |v, g| {
            for (v, g) in v.iter_mut().zip(g) {
                *v = b2 * *v + (1.0 - b2) * g * g;
            }
        })?;
        let c1 = 1.0 - b1.powi(self.step);
        let c2 = 1.0 - b2.powi(self.step);
        let m = self.m.tensors();
        let v = self.v.tensors();
        for ((_, p), ((_, m), (_, v))) in params.tensors_mut().into_iter().zip(m.iter().zip(&v)) {
            for ((p, m), v) in p.iter_mut().zip(m.iter()).zip(v.iter()) {
                *p -= lr * (m / c1) / ((v / c2).sqrt() + eps);
            }
        }
        Ok(())
    }
}

/// Loss and gradient summed over `batch`. Sentences are processed in
/// parallel windows but always summed in batch order, so the result does
/// not depend on the thread count.
pub fn batch_gradient(params: &ModelParams, batch: &[Example]) -> Result<(f64, ModelParams)> {
    let window = rayon::current_num_threads().max(1);
    let mut total = params.zeros_like();
    let mut loss = 0.0;
    for chunk in batch.chunks(window) {
        let parts: Vec<(f64, ModelParams)> = chunk
            .par_iter()
            .map(|ex| {
                let mut g = params.zeros_like();
                sentence_gradient(params, &ex.src, &ex.tgt, &mut g).map(|l| (l, g))
            })
            .collect::<Result<_>>()?;
        for (l, g) in parts {
            loss += l;
            total.add_scaled(1.0, &g)?;
        }
    }
    Ok((loss, total))
}

/// Output tokens (target words plus `</s>`) in `batch`.
pub fn token_count(batch: &[Example]) -> usize {
    batch.iter().map(|e| e.tgt.len() + 1).sum()
}

/// Mean per-token cross-entropy.
pub fn mean_loss(params: &ModelParams, data: &[Example]) -> Result<f64> {
    if data.is_empty() {
        return Ok(0.0);
    }
    let losses: Vec<f64> = data
        .par_iter()
        .map(|ex| sentence_loss(params, &ex.src, &ex.tgt))
        .collect::<Result<_>>()?;
    Ok(losses.iter().sum::<f64>() / token_count(data) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean per-token training loss over the epoch's updates.
    pub train_loss: f64,
    /// Mean per-token loss on the held-out set after the epoch (training set
    /// when none is given).
    pub heldout_loss: f64,
    /// Rate used during the epoch.
    pub learning_rate: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingLog {
    pub epochs: Vec<EpochRecord>,
}

impl TrainingLog {
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("epoch\ttrain_loss\theldout_loss\tlearning_rate\n");
        for r in &self.epochs {
            out.push_str(&format!(
                "{}\t{:.6}\t{:.6}\t{}\n",
                r.epoch, r.train_loss, r.heldout_loss, r.learning_rate
            ));
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        io::write_atomic(path, self.to_tsv().as_bytes())
    }
}

/// Source and target lexicons together with the model that uses them.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub params: ModelParams,
    pub src_lex: Lexicon,
    pub tgt_lex: Lexicon,
}

/// Builds vocabularies from the training corpus and initialises a model.
pub fn init_model(src: &Corpus, tgt: &Corpus, config: &TrainingConfig) -> Result<Model> {
    config.validate()?;
    let src_lex = Lexicon::from_vocabulary(&Vocabulary::build(src, config.src_vocab_size)?);
    let tgt_lex = Lexicon::from_vocabulary(&Vocabulary::build(tgt, config.tgt_vocab_size)?);
    let model_config = ModelConfig {
        src_vocab: src_lex.len(),
        tgt_vocab: tgt_lex.len(),
        embedding: config.embedding,
        hidden: config.hidden,
        layers: config.layers,
        head: config.head,
    };
    let params = ModelParams::seeded(model_config, config.init_scale, config.seed)?;
    Ok(Model {
        params,
        src_lex,
        tgt_lex,
    })
}

/// Trains `params` in place with Adam on mini-batches.
///
/// Each epoch shuffles the data with a seed derived from `config.seed`.
/// After an epoch whose held-out loss does not improve on the best so far,
/// the learning rate is halved (never below `min_learning_rate`).
pub fn train_params(
    params: &mut ModelParams,
    train: &[Example],
    heldout: Option<&[Example]>,
    config: &TrainingConfig,
) -> Result<TrainingLog> {
    config.validate()?;
    if train.is_empty() && config.epochs > 0 {
        return Err(Error::invalid("training corpus is empty"));
    }
    let mut adam = Adam::new(params);
    let mut lr = config.learning_rate;
    let mut best = f64::INFINITY;
    let mut log = TrainingLog::default();
    let mut order: Vec<usize> = (0..train.len()).collect();

    for epoch in 1..=config.epochs {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(epoch as u64));
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut epoch_tokens = 0;
        for idx in order.chunks(config.batch_size) {
            let batch: Vec<Example> = idx.iter().map(|&i| train[i].clone()).collect();
            let (loss, mut grad) = batch_gradient(params, &batch)?;
            let tokens = token_count(&batch);
            if !loss.is_finite() {
                return Err(Error::Numeric(format!(
                    "loss became {loss} in epoch {epoch} (learning rate {lr})"
                )));
            }
            grad.scale(1.0 / tokens as f64);
            if config.clip_norm > 0.0 {
                let norm = grad.sum_squares().sqrt();
                if norm > config.clip_norm {
                    grad.scale(config.clip_norm / norm);
                }
            }
            adam.update(params, &grad, lr)?;
            if !params.is_finite() {
                return Err(Error::Numeric(format!("parameters diverged in epoch {epoch}")));
            }
            epoch_loss += loss;
            epoch_tokens += tokens;
        }
        let train_loss = epoch_loss / epoch_tokens as f64;
        let heldout_loss = mean_loss(params, heldout.unwrap_or(train))?;
        log.epochs.push(EpochRecord {
            epoch,
            train_loss,
            heldout_loss,
            learning_rate: lr,
        });
        log::info!("epoch {epoch}: train {train_loss:.4} held-out {heldout_loss:.4} lr {lr}");
        if heldout_loss < best {
            best = heldout_loss;
        } else {
            lr = (lr / 2.0).max(config.min_learning_rate);
        }
    }
    Ok(log)
}

/// Builds vocabularies, initialises, and trains a model on a parallel
/// corpus.
pub fn train(
    src: &Corpus,
    tgt: &Corpus,
    heldout: Option<(&Corpus, &Corpus)>,
    config: &TrainingConfig,
) -> Result<(Model, TrainingLog)> {
    check_parallel(src, tgt)?;
    let mut model = init_model(src, tgt, config)?;
    let train_set = examples(src, tgt, &model.src_lex, &model.tgt_lex)?;
    if train_set.is_empty() {
        return Err(Error::invalid("training corpus has no usable sentence pairs"));
    }
    let held = match heldout {
        Some((s, t)) => Some(examples(s, t, &model.src_lex, &model.tgt_lex)?),
        None => None,
    };
    let log = train_params(&mut model.params, &train_set, held.as_deref(), config)?;
    Ok((model, log))
}
