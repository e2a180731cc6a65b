use ndarray::{concatenate, Array1, Array2, Axis};
use rand::Rng;

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `m += a ⊗ b`
pub fn add_outer(m: &mut Array2<f64>, a: &Array1<f64>, b: &Array1<f64>) {
    for (mut row, &ai) in m.rows_mut().into_iter().zip(a) {
        if ai != 0.0 {
            row.scaled_add(ai, b);
        }
    }
}

pub fn uniform_matrix<R: Rng>(rows: usize, cols: usize, scale: f64, rng: &mut R) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || sample(scale, rng))
}

pub fn uniform_vector<R: Rng>(len: usize, scale: f64, rng: &mut R) -> Array1<f64> {
    Array1::from_shape_simple_fn(len, || sample(scale, rng))
}

fn sample<R: Rng>(scale: f64, rng: &mut R) -> f64 {
    if scale == 0.0 {
        0.0
    } else {
        rng.gen_range(-scale..=scale)
    }
}

pub fn log_softmax(logits: &Array1<f64>) -> Array1<f64> {
    let max = logits.fold(f64::NEG_INFINITY, |m, &x| m.max(x));
    let log_z = max + logits.mapv(|x| (x - max).exp()).sum().ln();
    logits.mapv(|x| x - log_z)
}

pub fn concat(a: &Array1<f64>, b: &Array1<f64>) -> Array1<f64> {
    concatenate(Axis(0), &[a.view(), b.view()]).expect("1-d concatenation")
}

pub fn softmax(logits: &Array1<f64>) -> Array1<f64> {
    log_softmax(logits).mapv(f64::exp)
}
