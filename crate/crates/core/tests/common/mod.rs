//! Independent reference implementations used by the integration tests.
//! Everything here is written with plain loops over `Vec<f64>` / strings
//! and shares no code with the library beyond reading its parameters.

#![allow(dead_code)]

use std::collections::{BTreeMap, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rareword::corpus::{Corpus, Side};
use rareword::nmt::{ModelParams, OutputHead};

// ---------------------------------------------------------------- nmt

fn matvec(m: &ndarray::Array2<f64>, x: &[f64]) -> Vec<f64> {
    let (rows, cols) = m.dim();
    assert_eq!(cols, x.len());
    (0..rows).map(|r| (0..cols).map(|c| m[[r, c]] * x[c]).sum()).collect()
}

fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

fn sig(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn lstm(p: &rareword::nmt::lstm::LstmParams, x: &[f64], h: &[f64], c: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = h.len();
    let b: Vec<f64> = p.b.to_vec();
    let a = add(&add(&matvec(&p.w, x), &matvec(&p.u, h)), &b);
    let mut h2 = vec![0.0; n];
    let mut c2 = vec![0.0; n];
    for k in 0..n {
        let i = sig(a[k]);
        let f = sig(a[n + k]);
        let g = a[2 * n + k].tanh();
        let o = sig(a[3 * n + k]);
        c2[k] = f * c[k] + i * g;
        h2[k] = o * c2[k].tanh();
    }
    (h2, c2)
}

fn row(m: &ndarray::Array2<f64>, i: usize) -> Vec<f64> {
    (0..m.ncols()).map(|c| m[[i, c]]).collect()
}

fn log_softmax(x: &[f64]) -> Vec<f64> {
    let max = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let z: f64 = x.iter().map(|v| (v - max).exp()).sum();
    x.iter().map(|v| v - max - z.ln()).collect()
}

/// Scalar re-derivation of the whole model: returns, for each teacher-forced
/// step (targets followed by `</s>`), the alignment and the log-probabilities.
pub fn scalar_decode(p: &ModelParams, src: &[usize], prev_tokens: &[usize]) -> Vec<(Vec<f64>, Vec<f64>)> {
    let cfg = p.config;
    let hd = cfg.hidden;
    let n = src.len();
    let emb: Vec<Vec<f64>> = src.iter().map(|&i| row(&p.src_embed, i)).collect();
    let mut inputs = emb.clone();
    for layer in 0..cfg.layers {
        let mut fwd = vec![vec![0.0; hd]; n];
        let (mut h, mut c) = (vec![0.0; hd], vec![0.0; hd]);
        for i in 0..n {
            let r = lstm(&p.enc_fwd[layer], &inputs[i], &h, &c);
            h = r.0;
            c = r.1;
            fwd[i] = h.clone();
        }
        let mut bwd = vec![vec![0.0; hd]; n];
        let (mut h, mut c) = (vec![0.0; hd], vec![0.0; hd]);
        for i in (0..n).rev() {
            let r = lstm(&p.enc_bwd[layer], &inputs[i], &h, &c);
            h = r.0;
            c = r.1;
            bwd[i] = h.clone();
        }
        inputs = (0..n).map(|i| [fwd[i].clone(), bwd[i].clone()].concat()).collect();
    }
    let annot = inputs;

    let mut hs = vec![vec![0.0; hd]; cfg.layers];
    let mut cs = vec![vec![0.0; hd]; cfg.layers];
    let mut z = vec![0.0; hd];
    let mut out = Vec::new();
    for &y_prev in prev_tokens {
        // attention on the previous top state
        let q = matvec(&p.att_query, &hs[cfg.layers - 1]);
        let scores: Vec<f64> = annot
            .iter()
            .map(|a| {
                let k = matvec(&p.att_key, a);
                (0..hd).map(|j| p.att_v[j] * (q[j] + k[j] + p.att_bias[j]).tanh()).sum()
            })
            .collect();
        let alpha: Vec<f64> = log_softmax(&scores).iter().map(|v| v.exp()).collect();
        let mut ctx = vec![0.0; 2 * hd];
        let mut l = vec![0.0; cfg.embedding];
        for i in 0..n {
            for (c, a) in ctx.iter_mut().zip(&annot[i]) {
                *c += alpha[i] * a;
            }
            for (s, e) in l.iter_mut().zip(&emb[i]) {
                *s += alpha[i] * e;
            }
        }
        let l: Vec<f64> = l.iter().map(|v| v.tanh()).collect();

        let mut x = [row(&p.tgt_embed, y_prev), z.clone()].concat();
        for layer in 0..cfg.layers {
            let (h2, c2) = lstm(&p.dec[layer], &x, &hs[layer], &cs[layer]);
            hs[layer] = h2.clone();
            cs[layer] = c2;
            x = h2;
        }
        let comb = matvec(&p.comb_w, &[x, ctx].concat());
        z = (0..hd).map(|j| (comb[j] + p.comb_b[j]).tanh()).collect();
        let logits = match cfg.head {
            OutputHead::Baseline => add(&matvec(&p.out_w, &z), &p.out_b.to_vec()),
            OutputHead::Simplified => add(&matvec(&p.out_w, &add(&z, &l)), &p.out_b.to_vec()),
            OutputHead::FfnnResidual => {
                let a = p.aug.as_ref().unwrap();
                let r = matvec(&a.w_l, &l);
                let t: Vec<f64> = r.iter().zip(&l).map(|(r, l)| r.tanh() + l).collect();
                let base = add(&matvec(&p.out_w, &z), &p.out_b.to_vec());
                add(&add(&base, &matvec(&a.w_t, &t)), &a.b_t.to_vec())
            }
        };
        out.push((alpha, log_softmax(&logits)));
    }
    out
}

pub fn tiny_config(head: OutputHead, layers: usize) -> rareword::nmt::ModelConfig {
    rareword::nmt::ModelConfig {
        src_vocab: 8,
        tgt_vocab: 7,
        embedding: 5,
        hidden: 5,
        layers,
        head,
    }
}

// ---------------------------------------------------------------- vocabulary

/// Counts by linear scan over a sorted list, then sorts by (-count, word).
pub fn brute_vocab(corpus: &Corpus, capacity: usize) -> Vec<(String, u64)> {
    let mut counts: Vec<(String, u64)> = Vec::new();
    for tok in corpus.tokens() {
        match counts.iter_mut().find(|(w, _)| w == tok) {
            Some((_, c)) => *c += 1,
            None => counts.push((tok.clone(), 1)),
        }
    }
    counts.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    counts.truncate(capacity);
    counts
}

// ---------------------------------------------------------------- lsw

/// Synonym table straight from the definition: for every corpus word that is
/// not frequent (`freq <= threshold`, OOV counts as 0), collect all words that
/// appear on the other side of an input pair, keep those in the vocabulary,
/// and rank by (frequency desc, word asc).
pub fn brute_synonym_table(
    vocab: &[(String, u64)],
    corpus: &Corpus,
    pairs: &[(String, String)],
    threshold: u64,
) -> BTreeMap<String, Vec<String>> {
    let freq = |w: &str| vocab.iter().find(|(v, _)| v == w).map(|(_, c)| *c);
    let mut out = BTreeMap::new();
    for w in corpus.tokens() {
        if freq(w).unwrap_or(0) > threshold || out.contains_key(w) {
            continue;
        }
        let mut syns: Vec<String> = Vec::new();
        for (a, b) in pairs {
            if a == b {
                continue;
            }
            let other = if a == w {
                b
            } else if b == w {
                a
            } else {
                continue;
            };
            if freq(other).is_some() && !syns.contains(other) {
                syns.push(other.clone());
            }
        }
        if syns.is_empty() {
            continue;
        }
        syns.sort_by(|a, b| freq(b).cmp(&freq(a)).then_with(|| a.cmp(b)));
        out.insert(w.clone(), syns);
    }
    out
}

// ---------------------------------------------------------------- bpe

/// Learns merges by recounting every adjacent pair from scratch after each
/// merge. Ties go to the lexicographically smallest `(left, right)`.
pub fn brute_bpe(corpus: &Corpus, n: usize) -> Vec<(String, String)> {
    let mut words: HashMap<Vec<String>, u64> = HashMap::new();
    for tok in corpus.tokens() {
        let mut syms: Vec<String> = tok.chars().map(|c| c.to_string()).collect();
        let last = syms.pop().unwrap();
        syms.push(format!("{last}</w>"));
        *words.entry(syms).or_default() += 1;
    }
    let mut merges = Vec::new();
    for _ in 0..n {
        let mut pairs: BTreeMap<(String, String), u64> = BTreeMap::new();
        for (w, c) in &words {
            for k in 1..w.len() {
                *pairs.entry((w[k - 1].clone(), w[k].clone())).or_default() += c;
            }
        }
        let mut best: Option<((String, String), u64)> = None;
        for (p, c) in pairs {
            if best.as_ref().is_none_or(|(_, bc)| c > *bc) {
                best = Some((p, c));
            }
        }
        let Some(((l, r), c)) = best else { break };
        if c < 2 {
            break;
        }
        let joined = format!("{l}{r}");
        let mut next = HashMap::new();
        for (w, cnt) in words {
            let mut out: Vec<String> = Vec::new();
            let mut k = 0;
            while k < w.len() {
                if k + 1 < w.len() && w[k] == l && w[k + 1] == r {
                    out.push(joined.clone());
                    k += 2;
                } else {
                    out.push(w[k].clone());
                    k += 1;
                }
            }
            *next.entry(out).or_insert(0) += cnt;
        }
        words = next;
        merges.push((l, r));
    }
    merges
}

// ---------------------------------------------------------------- fixtures

/// Random corpus over a Zipf-ish word list.
pub fn random_corpus(rng: &mut ChaCha8Rng, words: &[String], sentences: usize, max_len: usize) -> Corpus {
    let mut text = String::new();
    for _ in 0..sentences {
        let len = rng.gen_range(1..=max_len);
        let toks: Vec<&str> = (0..len)
            .map(|_| {
                // squaring skews draws toward the front of the list
                let u: f64 = rng.gen();
                words[((u * u) * words.len() as f64) as usize % words.len()].as_str()
            })
            .collect();
        text.push_str(&toks.join(" "));
        text.push('\n');
    }
    Corpus::from_text(&text, Side::Source)
}

pub fn random_word(rng: &mut ChaCha8Rng, alphabet: &[u8], min: usize, max: usize) -> String {
    let len = rng.gen_range(min..=max);
    (0..len)
        .map(|_| alphabet[rng.gen_range(0..alphabet.len())] as char)
        .collect()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Copy-task data: `count` distinct sentences over words `w0..w{vocab-1}`.
pub fn copy_task(count: usize, vocab: usize, seed: u64) -> Corpus {
    let mut r = rng(seed);
    let mut seen = std::collections::BTreeSet::new();
    let mut text = String::new();
    // make sure every word occurs at least once
    let mut pending: Vec<usize> = (0..vocab).collect();
    while seen.len() < count {
        let len = r.gen_range(3..=6);
        let s: Vec<String> = (0..len)
            .map(|_| {
                let id = pending.pop().unwrap_or_else(|| r.gen_range(0..vocab));
                format!("w{id}")
            })
            .collect();
        let line = s.join(" ");
        if seen.insert(line.clone()) {
            text.push_str(&line);
            text.push('\n');
        }
    }
    Corpus::from_text(&text, Side::Source)
}
