mod common;

use ndarray::Array1;
use rareword::nmt::lexicon::BOS_ID;
use rareword::nmt::train::Example;
use rareword::nmt::{
    attention, decode_step, encode, gradient_check, output_logits, DecoderState, ModelParams, OutputHead,
};

use common::{scalar_decode, tiny_config};

fn batch() -> Vec<Example> {
    vec![
        Example {
            src: vec![4, 5, 6],
            tgt: vec![4, 6],
        },
        Example {
            src: vec![7, 4],
            tgt: vec![5, 5, 6],
        },
    ]
}

fn params(head: OutputHead, layers: usize, seed: u64) -> ModelParams {
    ModelParams::seeded(tiny_config(head, layers), 0.5, seed).unwrap()
}

pub fn gradients_match_finite_differences_for_every_head() {
    for head in OutputHead::ALL {
        for layers in [1, 2] {
            let p = params(head, layers, 3);
            let report = gradient_check(&p, &batch()).unwrap();
            assert!(
                report.max_rel_error < 1e-4,
                "{head} layers={layers}: {:e} at {:?}",
                report.max_rel_error,
                report.worst
            );
            assert_eq!(report.checked, p.param_count());
        }
    }
}

pub fn source_embedding_gradient_includes_the_average_path() {
    // The simplified and FFNN heads route l_j into the softmax, so the source
    // embedding gradient must differ from the baseline head's with the same
    // shared weights.
    let base = params(OutputHead::Baseline, 1, 5);
    let ex = batch();
    let grad_of = |p: &ModelParams| {
        let mut g = p.zeros_like();
        for e in &ex {
            rareword::nmt::model::sentence_gradient(p, &e.src, &e.tgt, &mut g).unwrap();
        }
        g.src_embed
    };
    let g_base = grad_of(&base);
    let simplified = base.with_head(OutputHead::Simplified).unwrap();
    let mut ffnn = base.with_head(OutputHead::FfnnResidual).unwrap();
    for (k, w) in ffnn.aug.as_mut().unwrap().w_t.iter_mut().enumerate() {
        *w = ((k * 7 % 11) as f64 - 5.0) * 0.1;
    }
    for p in [simplified, ffnn] {
        let diff = (&grad_of(&p) - &g_base).mapv(f64::abs).sum();
        assert!(diff > 1e-6, "{}", p.config.head);
        let report = gradient_check(&p, &ex).unwrap();
        let src = report.per_tensor.iter().find(|(n, _)| n == "src_embed").unwrap();
        assert!(src.1 < 1e-4, "{}: {:e}", p.config.head, src.1);
    }
}

pub fn decode_steps_match_scalar_recomputation() {
    for head in OutputHead::ALL {
        for layers in [1, 2] {
            let p = params(head, layers, 11);
            let src = [4, 6, 7, 5];
            let prev = [BOS_ID, 4, 6, 5];
            let oracle = scalar_decode(&p, &src, &prev);
            let enc = encode(&p, &src).unwrap();
            let mut state = DecoderState::initial(&p);
            for (k, &y) in prev.iter().enumerate() {
                let (step, next) = decode_step(&p, head, y, &state, &enc).unwrap();
                for (a, b) in step.log_probs.iter().zip(&oracle[k].1) {
                    assert!((a - b).abs() < 1e-10, "{head} step {k}: {a} vs {b}");
                }
                for (a, b) in step.alpha.iter().zip(&oracle[k].0) {
                    assert!((a - b).abs() < 1e-10);
                }
                state = next;
            }
        }
    }
}

pub fn distributions_and_alignments_are_normalised() {
    for head in OutputHead::ALL {
        let p = params(head, 2, 17);
        let enc = encode(&p, &[4, 5, 6, 7, 4]).unwrap();
        let mut state = DecoderState::initial(&p);
        let mut y = BOS_ID;
        for _ in 0..6 {
            let (step, next) = decode_step(&p, head, y, &state, &enc).unwrap();
            let probs = step.probs();
            assert!((probs.sum() - 1.0).abs() < 1e-6);
            assert!(probs.iter().all(|&x| x > 0.0));
            assert!((step.alpha.sum() - 1.0).abs() < 1e-6);
            y = 4 + (y % 3);
            state = next;
        }
    }
}

pub fn head_identities_hold_elementwise() {
    let base = params(OutputHead::Baseline, 2, 23);
    let z = Array1::from_vec(vec![0.3, -0.2, 0.9, 0.1, -0.7]);
    let zero = Array1::zeros(5);
    let want = output_logits(&base, OutputHead::Baseline, &z, &zero).unwrap();

    let simplified = base.with_head(OutputHead::Simplified).unwrap();
    let got = output_logits(&simplified, OutputHead::Simplified, &z, &zero).unwrap();
    let diff = (&got - &want).mapv(f64::abs).fold(0.0_f64, |m, &x| m.max(x));
    assert!(diff < 1e-10);

    // zeroed augmentation with a nonzero source average
    let ffnn = base.with_head(OutputHead::FfnnResidual).unwrap();
    let l = Array1::from_vec(vec![0.5, 0.4, -0.3, 0.2, 0.1]);
    let got = output_logits(&ffnn, OutputHead::FfnnResidual, &z, &l).unwrap();
    let diff = (&got - &want).mapv(f64::abs).fold(0.0_f64, |m, &x| m.max(x));
    assert!(diff < 1e-10);

    // full decode steps agree too
    let enc = encode(&ffnn, &[4, 5]).unwrap();
    let s = DecoderState::initial(&base);
    let a = decode_step(&base, OutputHead::Baseline, BOS_ID, &s, &enc).unwrap().0;
    let b = decode_step(&ffnn, OutputHead::FfnnResidual, BOS_ID, &s, &enc)
        .unwrap()
        .0;
    for (x, y) in a.log_probs.iter().zip(&b.log_probs) {
        assert!((x - y).abs() < 1e-10);
    }
    let att = attention(&base, &Array1::zeros(5), &enc);
    assert_eq!(att.alpha.len(), 2);
}

pub fn parameter_accounting() {
    let cfg = tiny_config(OutputHead::Baseline, 2);
    let base = ModelParams::seeded(cfg, 0.1, 1).unwrap().param_count();
    let simplified = ModelParams::seeded(tiny_config(OutputHead::Simplified, 2), 0.1, 1)
        .unwrap()
        .param_count();
    let ffnn = ModelParams::seeded(tiny_config(OutputHead::FfnnResidual, 2), 0.1, 1)
        .unwrap()
        .param_count();
    let (e, v) = (cfg.embedding, cfg.tgt_vocab);
    assert_eq!(simplified, base);
    assert_eq!(ffnn - base, e * e + v * e + v);
}

// The checks are plain functions so the acceptance binary can call them.
mod tests {
    #[test]
    fn gradients_match_finite_differences_for_every_head() {
        super::gradients_match_finite_differences_for_every_head()
    }
    #[test]
    fn source_embedding_gradient_includes_the_average_path() {
        super::source_embedding_gradient_includes_the_average_path()
    }
    #[test]
    fn decode_steps_match_scalar_recomputation() {
        super::decode_steps_match_scalar_recomputation()
    }
    #[test]
    fn distributions_and_alignments_are_normalised() {
        super::distributions_and_alignments_are_normalised()
    }
    #[test]
    fn head_identities_hold_elementwise() {
        super::head_identities_hold_elementwise()
    }
    #[test]
    fn parameter_accounting() {
        super::parameter_accounting()
    }
}
