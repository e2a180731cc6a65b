//! Central-difference validation of the hand-written backward pass.

use super::model::{sentence_gradient, sentence_loss};
use super::params::ModelParams;
use super::train::{token_count, Example};
use crate::error::{Error, Result};

pub const STEP: f64 = 1e-4;

/// Denominator floor: gradients smaller than this in magnitude are compared
/// in absolute rather than relative terms.
pub const FLOOR: f64 = 1e-6;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(FLOOR)
}

/// `(f(x + h e_i) - f(x - h e_i)) / 2h` for every coordinate, compared with
/// `analytic`. Returns the worst relative error and its coordinate.
pub fn check_function(f: impl Fn(&[f64]) -> f64, x: &[f64], analytic: &[f64], step: f64) -> (f64, usize) {
    assert_eq!(x.len(), analytic.len());
    let mut probe = x.to_vec();
    let mut worst = (0.0, 0);
    for i in 0..x.len() {
        probe[i] = x[i] + step;
        let up = f(&probe);
        probe[i] = x[i] - step;
        let down = f(&probe);
        probe[i] = x[i];
        let err = relative_error(analytic[i], (up - down) / (2.0 * step));
        if err > worst.0 {
            worst = (err, i);
        }
    }
    worst
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Tensor and flat index of the worst entry.
    pub worst: (String, usize),
    /// Worst relative error per tensor.
    pub per_tensor: Vec<(String, f64)>,
    pub checked: usize,
}

/// Mean per-token cross-entropy of `batch`.
pub fn batch_loss(params: &ModelParams, batch: &[Example]) -> Result<f64> {
    let mut total = 0.0;
    for ex in batch {
        total += sentence_loss(params, &ex.src, &ex.tgt)?;
    }
    Ok(total / token_count(batch) as f64)
}

/// Compares the analytic gradient of [`batch_loss`] with central differences
/// for every entry of every tensor. Meant for small models (sizes up to 8).
pub fn gradient_check(params: &ModelParams, batch: &[Example]) -> Result<GradCheckReport> {
    if batch.is_empty() {
        return Err(Error::invalid("gradient check needs at least one example"));
    }
    let mut grad = params.zeros_like();
    for ex in batch {
        sentence_gradient(params, &ex.src, &ex.tgt, &mut grad)?;
    }
    grad.scale(1.0 / token_count(batch) as f64);

    let analytic: Vec<(String, Vec<f64>)> = grad.tensors().into_iter().map(|(n, t)| (n, t.to_vec())).collect();
    let mut probe = params.clone();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: (String::new(), 0),
        per_tensor: Vec::new(),
        checked: 0,
    };
    for (t, (name, g)) in analytic.iter().enumerate() {
        let mut tensor_worst: f64 = 0.0;
        for (k, &a) in g.iter().enumerate() {
            let orig = probe.tensors()[t].1[k];
            probe.tensors_mut()[t].1[k] = orig + STEP;
            let up = batch_loss(&probe, batch)?;
            probe.tensors_mut()[t].1[k] = orig - STEP;
            let down = batch_loss(&probe, batch)?;
            probe.tensors_mut()[t].1[k] = orig;
            let err = relative_error(a, (up - down) / (2.0 * STEP));
            tensor_worst = tensor_worst.max(err);
            if err > report.max_rel_error {
                report.max_rel_error = err;
                report.worst = (name.clone(), k);
            }
            report.checked += 1;
        }
        report.per_tensor.push((name.clone(), tensor_worst));
    }
    Ok(report)
}
