use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{ModelConfig, OutputHead};
use super::lstm::LstmParams;
use super::math::{uniform_matrix, uniform_vector};
use crate::error::{Error, Result};

/// Extra tensors of the FFNN-residual head.
#[derive(Debug, Clone, PartialEq)]
pub struct Augmentation {
    /// `E x E`
    pub w_l: Array2<f64>,
    /// `V_tgt x E`
    pub w_t: Array2<f64>,
    pub b_t: Array1<f64>,
}

/// Every trainable tensor of the encoder-decoder. Gradients and optimizer
/// moments reuse this type.
///
/// Dimensions: `E` embedding, `H` hidden size (per encoder direction, and
/// of the decoder), attention size `H`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub config: ModelConfig,
    /// `V_src x E`
    pub src_embed: Array2<f64>,
    /// `V_tgt x E`
    pub tgt_embed: Array2<f64>,
    pub enc_fwd: Vec<LstmParams>,
    pub enc_bwd: Vec<LstmParams>,
    /// Layer 0 reads `[E_t(y_prev); z_prev]` (input feeding).
    pub dec: Vec<LstmParams>,
    /// Attention: `score_i = v · tanh(att_query q + att_key h_i + att_bias)`.
    pub att_query: Array2<f64>,
    pub att_key: Array2<f64>,
    pub att_bias: Array1<f64>,
    pub att_v: Array1<f64>,
    /// `z = tanh(comb_w [s; c] + comb_b)`, `H x 3H`.
    pub comb_w: Array2<f64>,
    pub comb_b: Array1<f64>,
    /// `V_tgt x H`
    pub out_w: Array2<f64>,
    pub out_b: Array1<f64>,
    pub aug: Option<Augmentation>,
}

impl ModelParams {
    /// Uniform initialisation in `[-scale, scale]`.
    pub fn init<R: Rng>(config: ModelConfig, scale: f64, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let ModelConfig {
            src_vocab,
            tgt_vocab,
            embedding: e,
            hidden: h,
            layers,
            head,
        } = config;
        let enc_input = |layer: usize| if layer == 0 { e } else { 2 * h };
        let dec_input = |layer: usize| if layer == 0 { e + h } else { h };

        let src_embed = uniform_matrix(src_vocab, e, scale, rng);
        let tgt_embed = uniform_matrix(tgt_vocab, e, scale, rng);
        let mut enc_fwd = Vec::with_capacity(layers);
        let mut enc_bwd = Vec::with_capacity(layers);
        for l in 0..layers {
            enc_fwd.push(LstmParams::new(enc_input(l), h, scale, rng));
            enc_bwd.push(LstmParams::new(enc_input(l), h, scale, rng));
        }
        let dec = (0..layers)
            .map(|l| LstmParams::new(dec_input(l), h, scale, rng))
            .collect();
        let att_query = uniform_matrix(h, h, scale, rng);
        let att_key = uniform_matrix(h, 2 * h, scale, rng);
        let att_bias = uniform_vector(h, scale, rng);
        let att_v = uniform_vector(h, scale, rng);
        let comb_w = uniform_matrix(h, 3 * h, scale, rng);
        let comb_b = uniform_vector(h, scale, rng);
        let out_w = uniform_matrix(tgt_vocab, h, scale, rng);
        let out_b = uniform_vector(tgt_vocab, scale, rng);
        let aug = (head == OutputHead::FfnnResidual).then(|| Augmentation {
            w_l: uniform_matrix(e, e, scale, rng),
            w_t: uniform_matrix(tgt_vocab, e, scale, rng),
            b_t: uniform_vector(tgt_vocab, scale, rng),
        });
        Ok(ModelParams {
            config,
            src_embed,
            tgt_embed,
            enc_fwd,
            enc_bwd,
            dec,
            att_query,
            att_key,
            att_bias,
            att_v,
            comb_w,
            comb_b,
            out_w,
            out_b,
            aug,
        })
    }

    pub fn seeded(config: ModelConfig, scale: f64, seed: u64) -> Result<Self> {
        Self::init(config, scale, &mut ChaCha8Rng::seed_from_u64(seed))
    }

    /// All-zero tensors with the same shapes.
    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for (_, t) in z.tensors_mut() {
            t.fill(0.0);
        }
        z
    }

    /// Same weights under another head. Switching to the FFNN head adds
    /// zero-initialised augmentation tensors, which leaves the output
    /// distribution unchanged; switching away drops them.
    pub fn with_head(&self, head: OutputHead) -> Result<Self> {
        let config = ModelConfig { head, ..self.config };
        config.validate()?;
        let mut p = self.clone();
        p.config = config;
        p.aug = match head {
            OutputHead::FfnnResidual => Some(self.aug.clone().unwrap_or_else(|| {
                let (e, v) = (config.embedding, config.tgt_vocab);
                Augmentation {
                    w_l: Array2::zeros((e, e)),
                    w_t: Array2::zeros((v, e)),
                    b_t: Array1::zeros(v),
                }
            })),
            _ => None,
        };
        Ok(p)
    }

    /// Every tensor as a named flat slice, in a fixed order.
    pub fn tensors(&self) -> Vec<(String, &[f64])> {
        let mut out: Vec<(String, &[f64])> = Vec::new();
        fn push<'a>(out: &mut Vec<(String, &'a [f64])>, name: String, data: Option<&'a [f64]>) {
            out.push((name, data.expect("standard layout")));
        }
        push(&mut out, "src_embed".into(), self.src_embed.as_slice());
        push(&mut out, "tgt_embed".into(), self.tgt_embed.as_slice());
        for (dir, layers) in [
            ("enc_fwd", &self.enc_fwd),
            ("enc_bwd", &self.enc_bwd),
            ("dec", &self.dec),
        ] {
            for (i, l) in layers.iter().enumerate() {
                push(&mut out, format!("{dir}.{i}.w"), l.w.as_slice());
                push(&mut out, format!("{dir}.{i}.u"), l.u.as_slice());
                push(&mut out, format!("{dir}.{i}.b"), l.b.as_slice());
            }
        }
        push(&mut out, "att_query".into(), self.att_query.as_slice());
        push(&mut out, "att_key".into(), self.att_key.as_slice());
        push(&mut out, "att_bias".into(), self.att_bias.as_slice());
        push(&mut out, "att_v".into(), self.att_v.as_slice());
        push(&mut out, "comb_w".into(), self.comb_w.as_slice());
        push(&mut out, "comb_b".into(), self.comb_b.as_slice());
        push(&mut out, "out_w".into(), self.out_w.as_slice());
        push(&mut out, "out_b".into(), self.out_b.as_slice());
        if let Some(a) = &self.aug {
            push(&mut out, "aug.w_l".into(), a.w_l.as_slice());
            push(&mut out, "aug.w_t".into(), a.w_t.as_slice());
            push(&mut out, "aug.b_t".into(), a.b_t.as_slice());
        }
        out
    }

    /// Mutable counterpart of [`ModelParams::tensors`], same order.
    pub fn tensors_mut(&mut self) -> Vec<(String, &mut [f64])> {
        let mut out: Vec<(String, &mut [f64])> = Vec::new();
        fn push<'a>(out: &mut Vec<(String, &'a mut [f64])>, name: String, data: Option<&'a mut [f64]>) {
            out.push((name, data.expect("standard layout")));
        }
        push(&mut out, "src_embed".into(), self.src_embed.as_slice_mut());
        push(&mut out, "tgt_embed".into(), self.tgt_embed.as_slice_mut());
        for (dir, layers) in [
            ("enc_fwd", &mut self.enc_fwd),
            ("enc_bwd", &mut self.enc_bwd),
            ("dec", &mut self.dec),
        ] {
            for (i, l) in layers.iter_mut().enumerate() {
                push(&mut out, format!("{dir}.{i}.w"), l.w.as_slice_mut());
                push(&mut out, format!("{dir}.{i}.u"), l.u.as_slice_mut());
                push(&mut out, format!("{dir}.{i}.b"), l.b.as_slice_mut());
            }
        }
        push(&mut out, "att_query".into(), self.att_query.as_slice_mut());
        push(&mut out, "att_key".into(), self.att_key.as_slice_mut());
        push(&mut out, "att_bias".into(), self.att_bias.as_slice_mut());
        push(&mut out, "att_v".into(), self.att_v.as_slice_mut());
        push(&mut out, "comb_w".into(), self.comb_w.as_slice_mut());
        push(&mut out, "comb_b".into(), self.comb_b.as_slice_mut());
        push(&mut out, "out_w".into(), self.out_w.as_slice_mut());
        push(&mut out, "out_b".into(), self.out_b.as_slice_mut());
        if let Some(a) = &mut self.aug {
            push(&mut out, "aug.w_l".into(), a.w_l.as_slice_mut());
            push(&mut out, "aug.w_t".into(), a.w_t.as_slice_mut());
            push(&mut out, "aug.b_t".into(), a.b_t.as_slice_mut());
        }
        out
    }

    /// Applies `f` to matching tensors of `self` and `other`.
    pub fn zip_mut(&mut self, other: &ModelParams, mut f: impl FnMut(&mut [f64], &[f64])) -> Result<()> {
        let theirs = other.tensors();
        let mut ours = self.tensors_mut();
        if ours.len() != theirs.len() || ours.iter().zip(&theirs).any(|((_, a), (_, b))| a.len() != b.len()) {
            return Err(Error::invalid("parameter shapes differ"));
        }
        for ((_, a), (_, b)) in ours.iter_mut().zip(theirs) {
            f(a, b);
        }
        Ok(())
    }

    /// Names and element counts of every tensor.
    pub fn tensor_sizes(&self) -> Vec<(String, usize)> {
        self.tensors().into_iter().map(|(n, t)| (n, t.len())).collect()
    }

    pub fn param_count(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|(_, t)| t.iter().all(|x| x.is_finite()))
    }

    pub fn sum_squares(&self) -> f64 {
        self.tensors()
            .iter()
            .map(|(_, t)| t.iter().map(|x| x * x).sum::<f64>())
            .sum()
    }

    /// `self += scale * other`, tensor by tensor.
    pub fn add_scaled(&mut self, scale: f64, other: &ModelParams) -> Result<()> {
        self.zip_mut(other, |a, b| {
            for (x, y) in a.iter_mut().zip(b) {
                *x += scale * y;
            }
        })
    }

    pub fn scale(&mut self, factor: f64) {
        for (_, t) in self.tensors_mut() {
            t.iter_mut().for_each(|x| *x *= factor);
        }
    }
}
