use std::cmp::Ordering;

use rayon::prelude::*;

use super::lexicon::{BOS_ID, EOS_ID};
use super::model::{decode_step, encode, DecoderState, EncoderStates};
use super::params::ModelParams;
use super::train::Model;
use crate::corpus::{Corpus, Sentence, Side};
use crate::error::{Error, Result};
use crate::lsw::VariantSet;

pub const MAX_BEAM: usize = 10;

/// A decoded hypothesis.
#[derive(Debug, Clone, PartialEq)]
pub struct Hypothesis {
    /// Target ids, without `</s>`.
    pub ids: Vec<usize>,
    /// Total log-probability, including `</s>` when it was generated.
    pub score: f64,
    /// Whether decoding ended with `</s>` rather than the length limit.
    pub finished: bool,
}

impl Hypothesis {
    /// Score per generated token (`</s>` included).
    pub fn normalized_score(&self) -> f64 {
        let len = self.ids.len() + usize::from(self.finished);
        if len == 0 {
            0.0
        } else {
            self.score / len as f64
        }
    }
}

/// Default length limit: three times the source length.
pub fn default_max_len(src_len: usize) -> usize {
    3 * src_len
}

fn argmax(v: &ndarray::Array1<f64>) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

fn greedy(params: &ModelParams, enc: &EncoderStates, max_len: usize) -> Result<Hypothesis> {
    let head = params.config.head;
    let mut state = DecoderState::initial(params);
    let mut prev = BOS_ID;
    let mut ids = Vec::new();
    let mut score = 0.0;
    for _ in 0..max_len {
        let (step, next) = decode_step(params, head, prev, &state, enc)?;
        let y = argmax(&step.log_probs);
        score += step.log_probs[y];
        if y == EOS_ID {
            return Ok(Hypothesis {
                ids,
                score,
                finished: true,
            });
        }
        ids.push(y);
        prev = y;
        state = next;
    }
    Ok(Hypothesis {
        ids,
        score,
        finished: false,
    })
}

struct Live {
    ids: Vec<usize>,
    score: f64,
    state: DecoderState,
}

fn by_score_desc(a: f64, b: f64) -> Ordering {
    b.partial_cmp(&a).unwrap_or(Ordering::Equal)
}

fn beam_search(params: &ModelParams, enc: &EncoderStates, beam: usize, max_len: usize) -> Result<Hypothesis> {
    let head = params.config.head;
    let mut live = vec![Live {
        ids: Vec::new(),
        score: 0.0,
        state: DecoderState::initial(params),
    }];
    let mut finished: Vec<Hypothesis> = Vec::new();

    for _ in 0..max_len {
        // (score, parent, token)
        let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
        let mut next_states = Vec::with_capacity(live.len());
        for (p, hyp) in live.iter().enumerate() {
            let prev = hyp.ids.last().copied().unwrap_or(BOS_ID);
            let (step, next) = decode_step(params, head, prev, &hyp.state, enc)?;
            candidates.extend(step.log_probs.iter().enumerate().map(|(y, lp)| (hyp.score + lp, p, y)));
            next_states.push(next);
        }
        candidates.sort_by(|a, b| by_score_desc(a.0, b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

        let mut new_live = Vec::with_capacity(beam);
        for &(score, p, y) in candidates.iter().take(beam) {
            if y == EOS_ID {
                finished.push(Hypothesis {
                    ids: live[p].ids.clone(),
                    score,
                    finished: true,
                });
            } else {
                let mut ids = live[p].ids.clone();
                ids.push(y);
                new_live.push(Live {
                    ids,
                    score,
                    state: next_states[p].clone(),
                });
            }
        }
        live = new_live;

        // Scores only decrease, so no live hypothesis can overtake the best
        // finished one.
        let best_finished = finished.iter().map(|h| h.score).fold(f64::NEG_INFINITY, f64::max);
        let best_live = live.iter().map(|h| h.score).fold(f64::NEG_INFINITY, f64::max);
        if live.is_empty() || best_finished >= best_live {
            break;
        }
    }
    finished.extend(live.into_iter().map(|h| Hypothesis {
        ids: h.ids,
        score: h.score,
        finished: false,
    }));
    finished.sort_by(|a, b| by_score_desc(a.score, b.score));
    Ok(finished.into_iter().next().expect("beam keeps at least one hypothesis"))
}

/// Greedy decoding for `beam == 1`, beam search otherwise. Beam search also
/// considers the greedy hypothesis, so its result never scores below
/// greedy decoding.
pub fn translate_ids(params: &ModelParams, src: &[usize], beam: usize, max_len: Option<usize>) -> Result<Hypothesis> {
    if src.is_empty() {
        return Err(Error::invalid("cannot translate an empty sentence"));
    }
    if beam == 0 || beam > MAX_BEAM {
        return Err(Error::invalid(format!("beam size must be in 1..={MAX_BEAM}")));
    }
    let enc = encode(params, src)?;
    let max_len = max_len.unwrap_or_else(|| default_max_len(src.len()));
    let greedy_hyp = greedy(params, &enc, max_len)?;
    if beam == 1 {
        return Ok(greedy_hyp);
    }
    let beam_hyp = beam_search(params, &enc, beam, max_len)?;
    Ok(if beam_hyp.score >= greedy_hyp.score {
        beam_hyp
    } else {
        greedy_hyp
    })
}

/// Translates a sentence; returns the output words and the total
/// log-probability.
pub fn translate(model: &Model, sentence: &Sentence, beam: usize) -> Result<(Sentence, f64)> {
    let hyp = translate_ids(&model.params, &model.src_lex.encode(sentence), beam, None)?;
    Ok((model.tgt_lex.decode(&hyp.ids), hyp.score))
}

/// The outcome of rescoring synonym variants.
#[derive(Debug, Clone, PartialEq)]
pub struct VariantChoice {
    pub index: usize,
    pub translation: Sentence,
    pub normalized_score: f64,
}

/// Translates every variant and keeps the one whose translation has the
/// highest length-normalised log-probability; ties go to the earliest.
pub fn select_best_variant(model: &Model, variants: &[Sentence], beam: usize) -> Result<VariantChoice> {
    let mut best: Option<VariantChoice> = None;
    for (index, v) in variants.iter().enumerate() {
        let hyp = translate_ids(&model.params, &model.src_lex.encode(v), beam, None)?;
        let score = hyp.normalized_score();
        if best.as_ref().is_none_or(|b| score > b.normalized_score) {
            best = Some(VariantChoice {
                index,
                translation: model.tgt_lex.decode(&hyp.ids),
                normalized_score: score,
            });
        }
    }
    best.ok_or_else(|| Error::invalid("no variants to choose from"))
}

/// Translates every sentence of `text` (in parallel, output in input order).
/// Empty lines stay empty.
pub fn translate_corpus(model: &Model, text: &Corpus, beam: usize) -> Result<Corpus> {
    let sentences = text
        .sentences
        .par_iter()
        .map(|s| {
            if s.is_empty() {
                Ok(Sentence::default())
            } else {
                translate(model, s, beam).map(|(t, _)| t)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Corpus::new(sentences, Side::Target))
}

/// Picks the best-scoring translation from every group of `variants`.
pub fn translate_variants(model: &Model, variants: &VariantSet, beam: usize) -> Result<Corpus> {
    let sentences = variants
        .groups
        .par_iter()
        .map(|group| {
            if group.iter().all(Sentence::is_empty) {
                return Ok(Sentence::default());
            }
            let usable: Vec<Sentence> = group.iter().filter(|s| !s.is_empty()).cloned().collect();
            select_best_variant(model, &usable, beam).map(|c| c.translation)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Corpus::new(sentences, Side::Target))
}
