//! Fully connected ReLU networks with hand-written backpropagation and Adam.

use ndarray::{Array1, Array2, Axis};
use rand::Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    /// in × out
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

impl Linear {
    /// Uniform(±1/√fan_in) for weights and biases.
    pub fn new<R: Rng>(n_in: usize, n_out: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (n_in as f64).sqrt();
        Self {
            w: Array2::from_shape_fn((n_in, n_out), |_| rng.random_range(-bound..bound)),
            b: Array1::from_shape_fn(n_out, |_| rng.random_range(-bound..bound)),
        }
    }
}

/// ReLU between layers, linear output.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Linear>,
}

/// Layer inputs saved by [`Mlp::forward_cached`] for the backward pass.
#[derive(Debug, Clone)]
pub struct Cache {
    inputs: Vec<Array2<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grads {
    pub w: Vec<Array2<f64>>,
    pub b: Vec<Array1<f64>>,
}

impl Grads {
    pub fn zeros_like(net: &Mlp) -> Self {
        Self {
            w: net.layers.iter().map(|l| Array2::zeros(l.w.raw_dim())).collect(),
            b: net.layers.iter().map(|l| Array1::zeros(l.b.raw_dim())).collect(),
        }
    }

    pub fn flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in self.w.iter().zip(&self.b) {
            out.extend(w.iter());
            out.extend(b.iter());
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.w.iter().all(|w| w.iter().all(|v| v.is_finite())) && self.b.iter().all(|b| b.iter().all(|v| v.is_finite()))
    }
}

impl Mlp {
    /// `sizes = [input, hidden..., output]`.
    pub fn new<R: Rng>(sizes: &[usize], rng: &mut R) -> Self {
        assert!(sizes.len() >= 2, "an MLP needs input and output sizes");
        Self {
            layers: sizes.windows(2).map(|s| Linear::new(s[0], s[1], rng)).collect(),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].w.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().w.ncols()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![self.input_dim()];
        s.extend(self.layers.iter().map(|l| l.w.ncols()));
        s
    }

    pub fn forward(&self, x: &Array2<f64>) -> Array2<f64> {
        let mut h = x.clone();
        let last = self.layers.len() - 1;
        for (i, l) in self.layers.iter().enumerate() {
            h = h.dot(&l.w) + &l.b;
            if i < last {
                h.mapv_inplace(|v| v.max(0.0));
            }
        }
        h
    }

    pub fn forward_cached(&self, x: &Array2<f64>) -> (Array2<f64>, Cache) {
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut h = x.clone();
        let last = self.layers.len() - 1;
        for (i, l) in self.layers.iter().enumerate() {
            let z = h.dot(&l.w) + &l.b;
            inputs.push(h);
            h = z;
            if i < last {
                h.mapv_inplace(|v| v.max(0.0));
            }
        }
        (h, Cache { inputs })
    }

    /// Parameter gradients and the gradient with respect to the input, given
    /// the gradient of the loss with respect to the output.
    pub fn backward(&self, cache: &Cache, grad_out: &Array2<f64>) -> (Grads, Array2<f64>) {
        let n = self.layers.len();
        let mut gw = Vec::with_capacity(n);
        let mut gb = Vec::with_capacity(n);
        let mut g = grad_out.clone();
        for i in (0..n).rev() {
            let input = &cache.inputs[i];
            gw.push(input.t().dot(&g));
            gb.push(g.sum_axis(Axis(0)));
            let mut gi = g.dot(&self.layers[i].w.t());
            if i > 0 {
                // ReLU derivative: the cached input of layer i is the post-activation of layer i-1.
                ndarray::Zip::from(&mut gi).and(input).for_each(|d, &a| {
                    if a <= 0.0 {
                        *d = 0.0;
                    }
                });
            }
            g = gi;
        }
        gw.reverse();
        gb.reverse();
        (Grads { w: gw, b: gb }, g)
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    pub fn flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        for l in &self.layers {
            out.extend(l.w.iter());
            out.extend(l.b.iter());
        }
        out
    }

    pub fn set_flat(&mut self, v: &[f64]) {
        assert_eq!(v.len(), self.n_params());
        let mut it = v.iter();
        for l in &mut self.layers {
            for x in l.w.iter_mut().chain(l.b.iter_mut()) {
                *x = *it.next().unwrap();
            }
        }
    }

    /// `self ← (1 − tau)·self + tau·other`.
    pub fn soft_update(&mut self, other: &Mlp, tau: f64) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.w.zip_mut_with(&b.w, |x, &y| *x += tau * (y - *x));
            a.b.zip_mut_with(&b.b, |x, &y| *x += tau * (y - *x));
        }
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.w.iter().chain(l.b.iter()).all(|v| v.is_finite()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub t: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl Adam {
    pub fn new(n_params: usize) -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
        }
    }

    fn step_slice<'a>(&mut self, params: impl Iterator<Item = &'a mut f64>, grads: impl Iterator<Item = f64>, lr: f64) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for (((p, g), m), v) in params.zip(grads).zip(&mut self.m).zip(&mut self.v) {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            *p -= lr * (*m / bc1) / ((*v / bc2).sqrt() + self.eps);
        }
    }

    pub fn step(&mut self, net: &mut Mlp, grads: &Grads, lr: f64) {
        let params = net.layers.iter_mut().flat_map(|l| l.w.iter_mut().chain(l.b.iter_mut()));
        let g = grads
            .w
            .iter()
            .zip(&grads.b)
            .flat_map(|(w, b)| w.iter().chain(b.iter()).copied());
        self.step_slice(params, g, lr);
    }

    pub fn step_scalar(&mut self, param: &mut f64, grad: f64, lr: f64) {
        self.step_slice(std::iter::once(param), std::iter::once(grad), lr);
    }
}
