//! Corpus BLEU in the style of Moses' `multi-bleu.perl`.
//!
//! Scores are computed on tokens exactly as given. N-gram matches are
//! clipped per sentence and summed over the corpus before precisions are
//! formed; a zero precision at any order makes the score zero unless
//! smoothing is requested.

use std::collections::HashMap;
use std::fmt;

use crate::corpus::{Corpus, Sentence};
use crate::error::{Error, Result};

pub use crate::markers::strip_subword_markers;

pub const MAX_ORDER: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BleuResult {
    /// Score in percent.
    pub bleu: f64,
    /// Modified n-gram precisions for n = 1..4, as fractions.
    pub precisions: [f64; MAX_ORDER],
    pub brevity_penalty: f64,
    pub hyp_len: usize,
    pub ref_len: usize,
}

impl BleuResult {
    pub fn ratio(&self) -> f64 {
        if self.ref_len == 0 {
            0.0
        } else {
            self.hyp_len as f64 / self.ref_len as f64
        }
    }
}

impl fmt::Display for BleuResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p = self.precisions.map(|p| 100.0 * p);
        write!(
            f,
            "BLEU = {:.2}, {:.1}/{:.1}/{:.1}/{:.1} (BP={:.3}, ratio={:.3}, hyp_len={}, ref_len={})",
            self.bleu,
            p[0],
            p[1],
            p[2],
            p[3],
            self.brevity_penalty,
            self.ratio(),
            self.hyp_len,
            self.ref_len
        )
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BleuOptions {
    /// Add one to matches and totals for orders 2..4.
    pub add_one_smoothing: bool,
}

#[derive(Debug, Clone, Copy, Default)]
struct Stats {
    matches: [u64; MAX_ORDER],
    totals: [u64; MAX_ORDER],
    hyp_len: usize,
    ref_len: usize,
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], u64> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for gram in tokens.windows(n) {
            *counts.entry(gram).or_insert(0) += 1;
        }
    }
    counts
}

fn sentence_stats(hyp: &Sentence, reference: &Sentence) -> Stats {
    let mut s = Stats {
        hyp_len: hyp.len(),
        ref_len: reference.len(),
        ..Stats::default()
    };
    for n in 1..=MAX_ORDER {
        let ref_counts = ngram_counts(reference.tokens(), n);
        for (gram, count) in ngram_counts(hyp.tokens(), n) {
            let clip = ref_counts.get(gram).copied().unwrap_or(0);
            s.matches[n - 1] += count.min(clip);
        }
        s.totals[n - 1] += hyp.len().saturating_sub(n - 1) as u64;
    }
    s
}

pub fn bleu(hypotheses: &Corpus, references: &Corpus) -> Result<BleuResult> {
    bleu_with(hypotheses, references, BleuOptions::default())
}

pub fn bleu_with(hypotheses: &Corpus, references: &Corpus, opts: BleuOptions) -> Result<BleuResult> {
    if hypotheses.len() != references.len() {
        return Err(Error::invalid(format!(
            "{} hypotheses but {} references",
            hypotheses.len(),
            references.len()
        )));
    }
    if hypotheses.is_empty() {
        return Err(Error::invalid("cannot score an empty corpus"));
    }
    let mut total = Stats::default();
    for (h, r) in hypotheses.sentences.iter().zip(&references.sentences) {
        let s = sentence_stats(h, r);
        for n in 0..MAX_ORDER {
            total.matches[n] += s.matches[n];
            total.totals[n] += s.totals[n];
        }
        total.hyp_len += s.hyp_len;
        total.ref_len += s.ref_len;
    }
    Ok(score(&total, opts))
}

fn score(stats: &Stats, opts: BleuOptions) -> BleuResult {
    let precisions: [f64; MAX_ORDER] = std::array::from_fn(|n| {
        let (mut m, mut t) = (stats.matches[n] as f64, stats.totals[n] as f64);
        if opts.add_one_smoothing && n > 0 {
            m += 1.0;
            t += 1.0;
        }
        if t > 0.0 {
            m / t
        } else {
            0.0
        }
    });
    let brevity_penalty = if stats.hyp_len == 0 {
        0.0
    } else if stats.hyp_len < stats.ref_len {
        (1.0 - stats.ref_len as f64 / stats.hyp_len as f64).exp()
    } else {
        1.0
    };
    let bleu = if precisions.contains(&0.0) || stats.hyp_len == 0 {
        0.0
    } else {
        let mean_log = precisions.iter().map(|p| p.ln()).sum::<f64>() / MAX_ORDER as f64;
        100.0 * brevity_penalty * mean_log.exp()
    };
    BleuResult {
        bleu,
        precisions,
        brevity_penalty,
        hyp_len: stats.hyp_len,
        ref_len: stats.ref_len,
    }
}
