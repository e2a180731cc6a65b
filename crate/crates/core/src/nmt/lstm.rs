use ndarray::{s, Array1, Array2, Zip};
use rand::Rng;

use super::math::{add_outer, sigmoid, uniform_matrix, uniform_vector};

/// Weights of one LSTM layer. Gate blocks are stacked in the order
/// input, forget, candidate, output.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    /// `4H x input`
    pub w: Array2<f64>,
    /// `4H x H`
    pub u: Array2<f64>,
    pub b: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmState {
    pub h: Array1<f64>,
    pub c: Array1<f64>,
}

impl LstmState {
    pub fn zeros(hidden: usize) -> Self {
        LstmState {
            h: Array1::zeros(hidden),
            c: Array1::zeros(hidden),
        }
    }
}

/// Values saved by [`LstmParams::step`] for the backward pass.
#[derive(Debug, Clone)]
pub struct LstmCache {
    x: Array1<f64>,
    h_prev: Array1<f64>,
    c_prev: Array1<f64>,
    i: Array1<f64>,
    f: Array1<f64>,
    g: Array1<f64>,
    o: Array1<f64>,
    tanh_c: Array1<f64>,
}

impl LstmParams {
    pub fn new<R: Rng>(input: usize, hidden: usize, scale: f64, rng: &mut R) -> Self {
        LstmParams {
            w: uniform_matrix(4 * hidden, input, scale, rng),
            u: uniform_matrix(4 * hidden, hidden, scale, rng),
            b: uniform_vector(4 * hidden, scale, rng),
        }
    }

    pub fn zeros(input: usize, hidden: usize) -> Self {
        LstmParams {
            w: Array2::zeros((4 * hidden, input)),
            u: Array2::zeros((4 * hidden, hidden)),
            b: Array1::zeros(4 * hidden),
        }
    }

    pub fn hidden(&self) -> usize {
        self.u.ncols()
    }

    pub fn input(&self) -> usize {
        self.w.ncols()
    }

    pub fn step(&self, x: &Array1<f64>, prev: &LstmState) -> (LstmState, LstmCache) {
        let h = self.hidden();
        let a = self.w.dot(x) + self.u.dot(&prev.h) + &self.b;
        let i = a.slice(s![0..h]).mapv(sigmoid);
        let f = a.slice(s![h..2 * h]).mapv(sigmoid);
        let g = a.slice(s![2 * h..3 * h]).mapv(f64::tanh);
        let o = a.slice(s![3 * h..4 * h]).mapv(sigmoid);
        let c = &f * &prev.c + &i * &g;
        let tanh_c = c.mapv(f64::tanh);
        let h_new = &o * &tanh_c;
        let cache = LstmCache {
            x: x.clone(),
            h_prev: prev.h.clone(),
            c_prev: prev.c.clone(),
            i,
            f,
            g,
            o,
            tanh_c,
        };
        (LstmState { h: h_new, c }, cache)
    }

    /// Backpropagates `dh`, `dc` (gradients w.r.t. the step's outputs) into
    /// `grad` and returns the gradients for `x`, `h_prev` and `c_prev`.
    pub fn backward(
        &self,
        cache: &LstmCache,
        dh: &Array1<f64>,
        dc: &Array1<f64>,
        grad: &mut LstmParams,
    ) -> (Array1<f64>, Array1<f64>, Array1<f64>) {
        let h = self.hidden();
        let mut dc_total = dc.clone();
        Zip::from(&mut dc_total)
            .and(dh)
            .and(&cache.o)
            .and(&cache.tanh_c)
            .for_each(|d, &dh, &o, &t| *d += dh * o * (1.0 - t * t));

        let mut da = Array1::zeros(4 * h);
        for k in 0..h {
            let (i, f, g, o) = (cache.i[k], cache.f[k], cache.g[k], cache.o[k]);
            let dct = dc_total[k];
            da[k] = dct * g * i * (1.0 - i);
            da[h + k] = dct * cache.c_prev[k] * f * (1.0 - f);
            da[2 * h + k] = dct * i * (1.0 - g * g);
            da[3 * h + k] = dh[k] * cache.tanh_c[k] * o * (1.0 - o);
        }
        add_outer(&mut grad.w, &da, &cache.x);
        add_outer(&mut grad.u, &da, &cache.h_prev);
        grad.b += &da;
        let dx = self.w.t().dot(&da);
        let dh_prev = self.u.t().dot(&da);
        let dc_prev = &dc_total * &cache.f;
        (dx, dh_prev, dc_prev)
    }
}
