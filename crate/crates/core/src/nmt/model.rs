//! Forward and backward passes of the attentional encoder-decoder.
//!
//! Encoder: stacked bidirectional LSTMs over source embeddings; the top
//! layer's forward and backward states are concatenated into annotations
//! `h_i` of size `2H`.
//!
//! Decoder step `j`:
//!
//! ```text
//! q       = s_{j-1}                       (top decoder layer, previous step)
//! alpha   = softmax_i(v · tanh(A q + K h_i + b_a))
//! c_j     = Σ alpha_i h_i
//! l_j     = tanh(Σ alpha_i E_s(x_i))
//! s_j     = LSTM([E_t(y_{j-1}); z_{j-1}], s_{j-1})
//! z_j     = tanh(C [s_j; c_j] + b_c)
//! p(y_j)  = softmax(head(z_j, l_j))
//! ```
//!
//! All decoder layers start from zero state and `z_0 = 0`.

use ndarray::{s, Array1, Zip};

use super::config::OutputHead;
use super::lexicon::{BOS_ID, EOS_ID};
use super::lstm::{LstmCache, LstmState};
use super::math::{add_outer, concat, log_softmax, softmax};
use super::params::{Augmentation, ModelParams};
use crate::error::{Error, Result};

/// Annotations and retained source embeddings of one source sentence.
#[derive(Debug, Clone)]
pub struct EncoderStates {
    /// `h_i = [fwd_i; bwd_i]`, each of size `2H`.
    pub annotations: Vec<Array1<f64>>,
    /// `f_i = E_s(x_i)`.
    pub embeddings: Vec<Array1<f64>>,
    /// `K h_i + b_a`, precomputed for attention.
    keys: Vec<Array1<f64>>,
}

impl EncoderStates {
    pub fn len(&self) -> usize {
        self.annotations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.annotations.is_empty()
    }
}

struct EncoderCache {
    ids: Vec<usize>,
    /// Per layer, per position.
    fwd: Vec<Vec<LstmCache>>,
    bwd: Vec<Vec<LstmCache>>,
}

fn encode_inner(params: &ModelParams, ids: &[usize]) -> Result<(EncoderStates, EncoderCache)> {
    if ids.is_empty() {
        return Err(Error::invalid("cannot encode an empty sentence"));
    }
    let cfg = &params.config;
    if let Some(&bad) = ids.iter().find(|&&i| i >= cfg.src_vocab) {
        return Err(Error::invalid(format!("source id {bad} out of range")));
    }
    let h = cfg.hidden;
    let n = ids.len();
    let embeddings: Vec<Array1<f64>> = ids.iter().map(|&i| params.src_embed.row(i).to_owned()).collect();

    let mut inputs = embeddings.clone();
    let mut fwd_caches = Vec::with_capacity(cfg.layers);
    let mut bwd_caches = Vec::with_capacity(cfg.layers);
    for layer in 0..cfg.layers {
        let (fwd, bwd) = (&params.enc_fwd[layer], &params.enc_bwd[layer]);
        let mut fwd_out = Vec::with_capacity(n);
        let mut fwd_cache = Vec::with_capacity(n);
        let mut state = LstmState::zeros(h);
        for x in &inputs {
            let (next, cache) = fwd.step(x, &state);
            fwd_out.push(next.h.clone());
            fwd_cache.push(cache);
            state = next;
        }
        let mut bwd_out = vec![Array1::zeros(h); n];
        let mut bwd_cache: Vec<Option<LstmCache>> = vec![None; n];
        let mut state = LstmState::zeros(h);
        for i in (0..n).rev() {
            let (next, cache) = bwd.step(&inputs[i], &state);
            bwd_out[i] = next.h.clone();
            bwd_cache[i] = Some(cache);
            state = next;
        }
        inputs = fwd_out.iter().zip(&bwd_out).map(|(f, b)| concat(f, b)).collect();
        fwd_caches.push(fwd_cache);
        bwd_caches.push(bwd_cache.into_iter().map(|c| c.expect("filled")).collect());
    }
    let keys = inputs
        .iter()
        .map(|a| params.att_key.dot(a) + &params.att_bias)
        .collect();
    Ok((
        EncoderStates {
            annotations: inputs,
            embeddings,
            keys,
        },
        EncoderCache {
            ids: ids.to_vec(),
            fwd: fwd_caches,
            bwd: bwd_caches,
        },
    ))
}

/// Runs the bidirectional encoder over source token ids.
pub fn encode(params: &ModelParams, ids: &[usize]) -> Result<EncoderStates> {
    encode_inner(params, ids).map(|(states, _)| states)
}

/// Alignment weights, context, and source-embedding average for one step.
#[derive(Debug, Clone)]
pub struct Attention {
    pub alpha: Array1<f64>,
    pub context: Array1<f64>,
    /// `l = tanh(Σ alpha_i f_i)`
    pub source_avg: Array1<f64>,
    /// `tanh(A q + K h_i + b_a)` per position.
    hidden: Vec<Array1<f64>>,
}

pub fn attention(params: &ModelParams, query: &Array1<f64>, enc: &EncoderStates) -> Attention {
    let projected = params.att_query.dot(query);
    let hidden: Vec<Array1<f64>> = enc.keys.iter().map(|k| (&projected + k).mapv(f64::tanh)).collect();
    let scores = Array1::from_iter(hidden.iter().map(|a| params.att_v.dot(a)));
    let alpha = softmax(&scores);
    let mut context = Array1::zeros(enc.annotations[0].len());
    let mut avg = Array1::zeros(enc.embeddings[0].len());
    for ((a, h), f) in alpha.iter().zip(&enc.annotations).zip(&enc.embeddings) {
        context.scaled_add(*a, h);
        avg.scaled_add(*a, f);
    }
    Attention {
        alpha,
        context,
        source_avg: avg.mapv(f64::tanh),
        hidden,
    }
}

/// Recurrent decoder state carried between steps.
#[derive(Debug, Clone, PartialEq)]
pub struct DecoderState {
    pub layers: Vec<LstmState>,
    /// Previous attentional state `z_{j-1}`, fed into the next input.
    pub attentional: Array1<f64>,
}

impl DecoderState {
    pub fn initial(params: &ModelParams) -> Self {
        let h = params.config.hidden;
        DecoderState {
            layers: vec![LstmState::zeros(h); params.config.layers],
            attentional: Array1::zeros(h),
        }
    }

    fn query(&self) -> &Array1<f64> {
        &self.layers.last().expect("at least one layer").h
    }
}

/// Everything computed at one target position.
#[derive(Debug, Clone)]
pub struct DecodeStep {
    pub alpha: Array1<f64>,
    pub context: Array1<f64>,
    pub source_avg: Array1<f64>,
    pub attentional: Array1<f64>,
    pub log_probs: Array1<f64>,
}

impl DecodeStep {
    pub fn probs(&self) -> Array1<f64> {
        self.log_probs.mapv(f64::exp)
    }
}

fn check_head(params: &ModelParams, head: OutputHead) -> Result<()> {
    match head {
        OutputHead::FfnnResidual if params.aug.is_none() => Err(Error::Config(
            "the ffnn_residual head needs W_l, W_t and b_t; build the parameters with that head".into(),
        )),
        OutputHead::Simplified if params.config.embedding != params.config.hidden => Err(Error::Config(format!(
            "the simplified head needs embedding size ({}) == hidden size ({})",
            params.config.embedding, params.config.hidden
        ))),
        _ => Ok(()),
    }
}

struct HeadCache {
    /// Input to `out_w`: `z` or `z + l`.
    proj_in: Array1<f64>,
    /// FFNN head: `r = tanh(W_l l)` and `t = r + l`.
    ffnn: Option<(Array1<f64>, Array1<f64>)>,
}

fn head_forward(params: &ModelParams, head: OutputHead, z: &Array1<f64>, l: &Array1<f64>) -> (Array1<f64>, HeadCache) {
    match head {
        OutputHead::Baseline => (
            params.out_w.dot(z) + &params.out_b,
            HeadCache {
                proj_in: z.clone(),
                ffnn: None,
            },
        ),
        OutputHead::Simplified => {
            let y = z + l;
            (
                params.out_w.dot(&y) + &params.out_b,
                HeadCache { proj_in: y, ffnn: None },
            )
        }
        OutputHead::FfnnResidual => {
            let Augmentation { w_l, w_t, b_t } = params.aug.as_ref().expect("checked by check_head");
            let r = w_l.dot(l).mapv(f64::tanh);
            let t = &r + l;
            let logits = params.out_w.dot(z) + &params.out_b + w_t.dot(&t) + b_t;
            (
                logits,
                HeadCache {
                    proj_in: z.clone(),
                    ffnn: Some((r, t)),
                },
            )
        }
    }
}

/// Output logits of `head` for attentional state `z` and source average `l`.
pub fn output_logits(params: &ModelParams, head: OutputHead, z: &Array1<f64>, l: &Array1<f64>) -> Result<Array1<f64>> {
    check_head(params, head)?;
    Ok(head_forward(params, head, z, l).0)
}

/// Returns `(dz, dl)`.
fn head_backward(
    params: &ModelParams,
    l: &Array1<f64>,
    cache: &HeadCache,
    dlogits: &Array1<f64>,
    grad: &mut ModelParams,
    head: OutputHead,
) -> (Array1<f64>, Array1<f64>) {
    add_outer(&mut grad.out_w, dlogits, &cache.proj_in);
    grad.out_b += dlogits;
    let dproj = params.out_w.t().dot(dlogits);
    match head {
        OutputHead::Baseline => (dproj, Array1::zeros(l.len())),
        OutputHead::Simplified => (dproj.clone(), dproj),
        OutputHead::FfnnResidual => {
            let (r, t) = cache.ffnn.as_ref().expect("ffnn cache");
            let aug = params.aug.as_ref().expect("ffnn params");
            let gaug = grad.aug.as_mut().expect("ffnn gradient");
            add_outer(&mut gaug.w_t, dlogits, t);
            gaug.b_t += dlogits;
            let dt = aug.w_t.t().dot(dlogits);
            let dr_pre = Zip::from(&dt).and(r).map_collect(|&d, &r| d * (1.0 - r * r));
            add_outer(&mut gaug.w_l, &dr_pre, l);
            let dl = aug.w_l.t().dot(&dr_pre) + &dt;
            (dproj, dl)
        }
    }
}

struct StepCache {
    y_prev: usize,
    query: Array1<f64>,
    att: Attention,
    lstm: Vec<LstmCache>,
    comb_in: Array1<f64>,
    z: Array1<f64>,
    head: HeadCache,
    log_probs: Array1<f64>,
}

fn step_inner(
    params: &ModelParams,
    head: OutputHead,
    y_prev: usize,
    state: &DecoderState,
    enc: &EncoderStates,
) -> (StepCache, DecoderState) {
    let query = state.query().clone();
    let att = attention(params, &query, enc);
    let mut x = concat(&params.tgt_embed.row(y_prev).to_owned(), &state.attentional);
    let mut layers = Vec::with_capacity(state.layers.len());
    let mut lstm = Vec::with_capacity(state.layers.len());
    for (cell, prev) in params.dec.iter().zip(&state.layers) {
        let (next, cache) = cell.step(&x, prev);
        x = next.h.clone();
        layers.push(next);
        lstm.push(cache);
    }
    let comb_in = concat(&x, &att.context);
    let z = (params.comb_w.dot(&comb_in) + &params.comb_b).mapv(f64::tanh);
    let (logits, head_cache) = head_forward(params, head, &z, &att.source_avg);
    let log_probs = log_softmax(&logits);
    let next = DecoderState {
        layers,
        attentional: z.clone(),
    };
    (
        StepCache {
            y_prev,
            query,
            att,
            lstm,
            comb_in,
            z,
            head: head_cache,
            log_probs,
        },
        next,
    )
}

/// One decoder step from previous token `y_prev`.
pub fn decode_step(
    params: &ModelParams,
    head: OutputHead,
    y_prev: usize,
    state: &DecoderState,
    enc: &EncoderStates,
) -> Result<(DecodeStep, DecoderState)> {
    check_head(params, head)?;
    if y_prev >= params.config.tgt_vocab {
        return Err(Error::invalid(format!("target id {y_prev} out of range")));
    }
    let (cache, next) = step_inner(params, head, y_prev, state, enc);
    Ok((
        DecodeStep {
            alpha: cache.att.alpha,
            context: cache.att.context,
            source_avg: cache.att.source_avg,
            attentional: cache.z,
            log_probs: cache.log_probs,
        },
        next,
    ))
}

fn check_target(params: &ModelParams, tgt: &[usize]) -> Result<()> {
    match tgt.iter().find(|&&i| i >= params.config.tgt_vocab) {
        Some(bad) => Err(Error::invalid(format!("target id {bad} out of range"))),
        None => Ok(()),
    }
}

/// Summed cross-entropy of `tgt` followed by `</s>`, with teacher forcing.
pub fn sentence_loss(params: &ModelParams, src: &[usize], tgt: &[usize]) -> Result<f64> {
    let head = params.config.head;
    check_head(params, head)?;
    check_target(params, tgt)?;
    let enc = encode(params, src)?;
    let mut state = DecoderState::initial(params);
    let mut prev = BOS_ID;
    let mut loss = 0.0;
    for &y in tgt.iter().chain(std::iter::once(&EOS_ID)) {
        let (cache, next) = step_inner(params, head, prev, &state, &enc);
        loss -= cache.log_probs[y];
        state = next;
        prev = y;
    }
    Ok(loss)
}

/// Adds the gradient of [`sentence_loss`] to `grad` and returns the loss.
pub fn sentence_gradient(params: &ModelParams, src: &[usize], tgt: &[usize], grad: &mut ModelParams) -> Result<f64> {
    let head = params.config.head;
    check_head(params, head)?;
    check_target(params, tgt)?;
    let cfg = params.config;
    let (enc, enc_cache) = encode_inner(params, src)?;

    // forward
    let mut state = DecoderState::initial(params);
    let mut prev = BOS_ID;
    let mut steps = Vec::with_capacity(tgt.len() + 1);
    let mut loss = 0.0;
    let outputs: Vec<usize> = tgt.iter().copied().chain(std::iter::once(EOS_ID)).collect();
    for &y in &outputs {
        let (cache, next) = step_inner(params, head, prev, &state, &enc);
        loss -= cache.log_probs[y];
        steps.push(cache);
        state = next;
        prev = y;
    }

    // backward through the decoder
    let h = cfg.hidden;
    let e = cfg.embedding;
    let n = enc.len();
    let mut d_annot = vec![Array1::<f64>::zeros(2 * h); n];
    let mut d_embed = vec![Array1::<f64>::zeros(e); n];
    let mut d_keys = vec![Array1::<f64>::zeros(h); n];
    let mut carry_h = vec![Array1::<f64>::zeros(h); cfg.layers];
    let mut carry_c = vec![Array1::<f64>::zeros(h); cfg.layers];
    let mut dz_carry = Array1::<f64>::zeros(h);
    let mut dq_carry = Array1::<f64>::zeros(h);

    for (step, &y) in steps.iter().zip(&outputs).rev() {
        let mut dlogits = step.log_probs.mapv(f64::exp);
        dlogits[y] -= 1.0;
        let (dz_head, dl) = head_backward(params, &step.att.source_avg, &step.head, &dlogits, grad, head);

        let dz = dz_head + &dz_carry;
        let dpre = Zip::from(&dz).and(&step.z).map_collect(|&d, &z| d * (1.0 - z * z));
        add_outer(&mut grad.comb_w, &dpre, &step.comb_in);
        grad.comb_b += &dpre;
        let dcomb = params.comb_w.t().dot(&dpre);
        let ds_top = dcomb.slice(s![..h]).to_owned();
        let dctx = dcomb.slice(s![h..]).to_owned();

        let mut dx_above = ds_top + &dq_carry;
        for layer in (0..cfg.layers).rev() {
            let dh = &dx_above + &carry_h[layer];
            let (dx, dh_prev, dc_prev) =
                params.dec[layer].backward(&step.lstm[layer], &dh, &carry_c[layer], &mut grad.dec[layer]);
            carry_h[layer] = dh_prev;
            carry_c[layer] = dc_prev;
            dx_above = dx;
        }
        grad.tgt_embed
            .row_mut(step.y_prev)
            .scaled_add(1.0, &dx_above.slice(s![..e]));
        dz_carry = dx_above.slice(s![e..]).to_owned();

        dq_carry = attention_backward(
            params,
            step,
            &enc,
            &dctx,
            &dl,
            &mut d_annot,
            &mut d_embed,
            &mut d_keys,
            grad,
        );
    }

    for (i, dk) in d_keys.iter().enumerate() {
        grad.att_bias += dk;
        add_outer(&mut grad.att_key, dk, &enc.annotations[i]);
        d_annot[i] += &params.att_key.t().dot(dk);
    }

    encoder_backward(params, &enc_cache, d_annot, d_embed, grad);
    Ok(loss)
}

/// Backpropagates the context and source-average gradients of one step.
/// Returns the gradient w.r.t. the attention query.
#[allow(clippy::too_many_arguments)]
fn attention_backward(
    params: &ModelParams,
    step: &StepCache,
    enc: &EncoderStates,
    dctx: &Array1<f64>,
    dl: &Array1<f64>,
    d_annot: &mut [Array1<f64>],
    d_embed: &mut [Array1<f64>],
    d_keys: &mut [Array1<f64>],
    grad: &mut ModelParams,
) -> Array1<f64> {
    let att = &step.att;
    let du = Zip::from(dl)
        .and(&att.source_avg)
        .map_collect(|&d, &l| d * (1.0 - l * l));
    let dalpha: Vec<f64> = enc
        .annotations
        .iter()
        .zip(&enc.embeddings)
        .map(|(h, f)| h.dot(dctx) + f.dot(&du))
        .collect();
    for (i, &a) in att.alpha.iter().enumerate() {
        d_annot[i].scaled_add(a, dctx);
        d_embed[i].scaled_add(a, &du);
    }
    let weighted: f64 = att.alpha.iter().zip(&dalpha).map(|(a, d)| a * d).sum();
    let mut dpre_sum = Array1::<f64>::zeros(params.att_v.len());
    for (i, hidden) in att.hidden.iter().enumerate() {
        let dscore = att.alpha[i] * (dalpha[i] - weighted);
        grad.att_v.scaled_add(dscore, hidden);
        let dpre = Zip::from(&params.att_v)
            .and(hidden)
            .map_collect(|&v, &a| dscore * v * (1.0 - a * a));
        d_keys[i] += &dpre;
        dpre_sum += &dpre;
    }
    add_outer(&mut grad.att_query, &dpre_sum, &step.query);
    params.att_query.t().dot(&dpre_sum)
}

fn encoder_backward(
    params: &ModelParams,
    cache: &EncoderCache,
    mut d_out: Vec<Array1<f64>>,
    d_embed: Vec<Array1<f64>>,
    grad: &mut ModelParams,
) {
    let h = params.config.hidden;
    let n = d_out.len();
    for layer in (0..params.config.layers).rev() {
        let input_dim = params.enc_fwd[layer].input();
        let mut d_in = vec![Array1::<f64>::zeros(input_dim); n];

        let (mut dh, mut dc) = (Array1::zeros(h), Array1::zeros(h));
        for i in (0..n).rev() {
            let dh_total = d_out[i].slice(s![..h]).to_owned() + &dh;
            let (dx, dh_prev, dc_prev) =
                params.enc_fwd[layer].backward(&cache.fwd[layer][i], &dh_total, &dc, &mut grad.enc_fwd[layer]);
            d_in[i] += &dx;
            dh = dh_prev;
            dc = dc_prev;
        }

        let (mut dh, mut dc) = (Array1::zeros(h), Array1::zeros(h));
        for i in 0..n {
            let dh_total = d_out[i].slice(s![h..]).to_owned() + &dh;
            let (dx, dh_prev, dc_prev) =
                params.enc_bwd[layer].backward(&cache.bwd[layer][i], &dh_total, &dc, &mut grad.enc_bwd[layer]);
            d_in[i] += &dx;
            dh = dh_prev;
            dc = dc_prev;
        }
        d_out = d_in;
    }
    for ((&id, dx), df) in cache.ids.iter().zip(&d_out).zip(&d_embed) {
        let mut row = grad.src_embed.row_mut(id);
        row += dx;
        row += df;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nmt::config::ModelConfig;

    fn params(head: OutputHead) -> ModelParams {
        let cfg = ModelConfig {
            src_vocab: 9,
            tgt_vocab: 8,
            embedding: 4,
            hidden: 4,
            layers: 2,
            head,
        };
        ModelParams::seeded(cfg, 0.3, 5).unwrap()
    }

    #[test]
    fn empty_source_is_an_error() {
        assert!(encode(&params(OutputHead::Baseline), &[]).is_err());
        assert!(encode(&params(OutputHead::Baseline), &[99]).is_err());
    }

    #[test]
    fn annotation_shapes() {
        let p = params(OutputHead::Baseline);
        let enc = encode(&p, &[4, 5, 6]).unwrap();
        assert_eq!(enc.len(), 3);
        assert!(enc.annotations.iter().all(|h| h.len() == 8));
        assert!(enc.embeddings.iter().all(|f| f.len() == 4));
    }

    #[test]
    fn single_position_attention() {
        let p = params(OutputHead::Baseline);
        let enc = encode(&p, &[7]).unwrap();
        let att = attention(&p, &Array1::from_elem(4, 0.3), &enc);
        assert_eq!(att.alpha.to_vec(), [1.0]);
        assert_eq!(att.context, enc.annotations[0]);
        assert_eq!(att.source_avg, enc.embeddings[0].mapv(f64::tanh));
    }

    #[test]
    fn distributions_are_normalised() {
        for head in OutputHead::ALL {
            let p = params(head);
            let enc = encode(&p, &[4, 5, 6, 4]).unwrap();
            let mut state = DecoderState::initial(&p);
            let mut prev = BOS_ID;
            for _ in 0..5 {
                let (step, next) = decode_step(&p, head, prev, &state, &enc).unwrap();
                let probs = step.probs();
                assert!((probs.sum() - 1.0).abs() < 1e-6);
                assert!(probs.iter().all(|&x| x > 0.0));
                assert!((step.alpha.sum() - 1.0).abs() < 1e-6);
                assert!(step.alpha.iter().all(|&a| a >= 0.0));
                prev = 4;
                state = next;
            }
        }
    }

    #[test]
    fn ffnn_head_needs_its_parameters() {
        let p = params(OutputHead::Baseline);
        let enc = encode(&p, &[4]).unwrap();
        let state = DecoderState::initial(&p);
        assert!(decode_step(&p, OutputHead::FfnnResidual, BOS_ID, &state, &enc).is_err());
    }

    #[test]
    fn loss_matches_gradient_pass() {
        let p = params(OutputHead::FfnnResidual);
        let mut g = p.zeros_like();
        let a = sentence_loss(&p, &[4, 5], &[6, 7, 4]).unwrap();
        let b = sentence_gradient(&p, &[4, 5], &[6, 7, 4], &mut g).unwrap();
        assert_eq!(a, b);
        assert!(g.sum_squares() > 0.0);
    }
}
