//! Soft actor-critic with a tanh-squashed Gaussian policy, twin critics and
//! automatic entropy temperature.

use ndarray::{concatenate, s, Array1, Array2, Axis};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::buffer::Batch;
use super::nn::{Adam, Grads, Mlp};
use super::TrainError;

pub const LOG_STD_MIN: f64 = -5.0;
pub const LOG_STD_MAX: f64 = 2.0;
const HALF_LN_2PI: f64 = 0.918_938_533_204_672_7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SacParams {
    pub gamma: f64,
    pub tau: f64,
    pub init_alpha: f64,
    /// Defaults to −(action dimension).
    pub target_entropy: Option<f64>,
}

impl Default for SacParams {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            tau: 0.005,
            init_alpha: 0.2,
            target_entropy: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct UpdateStats {
    pub q_loss: f64,
    pub actor_loss: f64,
    pub alpha: f64,
    pub entropy: f64,
}

/// Squashed-Gaussian sample and the intermediates needed for its gradient.
struct Squashed {
    a: Array2<f64>,
    logp: Array1<f64>,
    std: Array2<f64>,
    eps: Array2<f64>,
    /// tanh of the raw log-std head.
    t_raw: Array2<f64>,
}

fn log1m_tanh2(u: f64) -> f64 {
    // log(1 − tanh²u) = 2(ln 2 − u − softplus(−2u))
    let x = -2.0 * u;
    let softplus = if x > 0.0 { x + (-x).exp().ln_1p() } else { x.exp().ln_1p() };
    2.0 * (std::f64::consts::LN_2 - u - softplus)
}

fn squash(out: &Array2<f64>, eps: &Array2<f64>) -> Squashed {
    let d = eps.ncols();
    let mu = out.slice(s![.., ..d]);
    let t_raw = out.slice(s![.., d..]).mapv(f64::tanh);
    let log_std = t_raw.mapv(|t| LOG_STD_MIN + 0.5 * (LOG_STD_MAX - LOG_STD_MIN) * (t + 1.0));
    let std = log_std.mapv(f64::exp);
    let u = &mu + &(&std * eps);
    let a = u.mapv(f64::tanh);
    let mut logp = Array1::zeros(out.nrows());
    for b in 0..out.nrows() {
        let mut lp = 0.0;
        for j in 0..d {
            lp += -0.5 * eps[(b, j)] * eps[(b, j)] - log_std[(b, j)] - HALF_LN_2PI - log1m_tanh2(u[(b, j)]);
        }
        logp[b] = lp;
    }
    Squashed {
        a,
        logp,
        std,
        eps: eps.clone(),
        t_raw,
    }
}

/// Gradient with respect to the actor head given dL/da and dL/dlogp.
fn squash_backward(sq: &Squashed, d_a: &Array2<f64>, d_logp: &Array1<f64>) -> Array2<f64> {
    let (n, d) = sq.a.dim();
    let mut g = Array2::zeros((n, 2 * d));
    let k = 0.5 * (LOG_STD_MAX - LOG_STD_MIN);
    for b in 0..n {
        for j in 0..d {
            let a = sq.a[(b, j)];
            let du = d_a[(b, j)] * (1.0 - a * a) + d_logp[b] * 2.0 * a;
            let se = sq.std[(b, j)] * sq.eps[(b, j)];
            let dlog_std = du * se - d_logp[b];
            let t = sq.t_raw[(b, j)];
            g[(b, j)] = du;
            g[(b, d + j)] = dlog_std * k * (1.0 - t * t);
        }
    }
    g
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sac {
    pub actor: Mlp,
    pub q1: Mlp,
    pub q2: Mlp,
    pub q1_target: Mlp,
    pub q2_target: Mlp,
    pub log_alpha: f64,
    pub target_entropy: f64,
    pub gamma: f64,
    pub tau: f64,
    pub opt_actor: Adam,
    pub opt_q1: Adam,
    pub opt_q2: Adam,
    pub opt_alpha: Adam,
}

impl Sac {
    pub fn new<R: Rng>(
        obs_dim: usize,
        act_dim: usize,
        policy_hidden: &[usize],
        q_hidden: &[usize],
        params: &SacParams,
        rng: &mut R,
    ) -> Self {
        let sizes = |input: usize, hidden: &[usize], output: usize| {
            let mut v = vec![input];
            v.extend_from_slice(hidden);
            v.push(output);
            v
        };
        let actor = Mlp::new(&sizes(obs_dim, policy_hidden, 2 * act_dim), rng);
        let q1 = Mlp::new(&sizes(obs_dim + act_dim, q_hidden, 1), rng);
        let q2 = Mlp::new(&sizes(obs_dim + act_dim, q_hidden, 1), rng);
        Self {
            opt_actor: Adam::new(actor.n_params()),
            opt_q1: Adam::new(q1.n_params()),
            opt_q2: Adam::new(q2.n_params()),
            opt_alpha: Adam::new(1),
            q1_target: q1.clone(),
            q2_target: q2.clone(),
            actor,
            q1,
            q2,
            log_alpha: params.init_alpha.ln(),
            target_entropy: params.target_entropy.unwrap_or(-(act_dim as f64)),
            gamma: params.gamma,
            tau: params.tau,
        }
    }

    pub fn obs_dim(&self) -> usize {
        self.actor.input_dim()
    }

    pub fn act_dim(&self) -> usize {
        self.actor.output_dim() / 2
    }

    pub fn alpha(&self) -> f64 {
        self.log_alpha.exp()
    }

    /// Mean action tanh(μ) for a normalized observation.
    pub fn act_deterministic(&self, obs: &[f64]) -> Vec<f64> {
        let x = Array2::from_shape_vec((1, obs.len()), obs.to_vec()).expect("row vector");
        let out = self.actor.forward(&x);
        (0..self.act_dim()).map(|j| out[(0, j)].tanh()).collect()
    }

    pub fn act_stochastic<R: Rng>(&self, obs: &[f64], rng: &mut R) -> Vec<f64> {
        let x = Array2::from_shape_vec((1, obs.len()), obs.to_vec()).expect("row vector");
        let out = self.actor.forward(&x);
        let eps = Array2::from_shape_fn((1, self.act_dim()), |_| rng.sample::<f64, _>(StandardNormal));
        squash(&out, &eps).a.row(0).to_vec()
    }

    pub fn sample_noise<R: Rng>(&self, n: usize, rng: &mut R) -> Array2<f64> {
        Array2::from_shape_fn((n, self.act_dim()), |_| rng.sample(StandardNormal))
    }

    /// Soft Bellman targets using the target critics.
    pub fn critic_targets(&self, batch: &Batch, eps_next: &Array2<f64>) -> Array1<f64> {
        let sq = squash(&self.actor.forward(&batch.next_obs), eps_next);
        let x = concatenate(Axis(1), &[batch.next_obs.view(), sq.a.view()]).expect("same rows");
        let q1 = self.q1_target.forward(&x);
        let q2 = self.q2_target.forward(&x);
        let alpha = self.alpha();
        Array1::from_shape_fn(batch.reward.len(), |b| {
            let v = q1[(b, 0)].min(q2[(b, 0)]) - alpha * sq.logp[b];
            batch.reward[b] + self.gamma * (1.0 - batch.done[b]) * v
        })
    }

    /// 0.5·mean((Q − y)²) and its parameter gradient.
    pub fn critic_loss_grad(q: &Mlp, batch: &Batch, y: &Array1<f64>) -> (f64, Grads) {
        let x = concatenate(Axis(1), &[batch.obs.view(), batch.action.view()]).expect("same rows");
        let (out, cache) = q.forward_cached(&x);
        let n = y.len() as f64;
        let mut loss = 0.0;
        let mut g = Array2::zeros((y.len(), 1));
        for b in 0..y.len() {
            let d = out[(b, 0)] - y[b];
            loss += 0.5 * d * d / n;
            g[(b, 0)] = d / n;
        }
        (loss, q.backward(&cache, &g).0)
    }

    /// mean(α·logπ − min(Q1, Q2)) at reparameterized actions, its actor
    /// gradient and the mean log-probability.
    pub fn actor_loss_grad(&self, actor: &Mlp, obs: &Array2<f64>, eps: &Array2<f64>) -> (f64, Grads, f64) {
        let n = obs.nrows();
        let d = self.act_dim();
        let (out, cache) = actor.forward_cached(obs);
        let sq = squash(&out, eps);
        let x = concatenate(Axis(1), &[obs.view(), sq.a.view()]).expect("same rows");
        let (o1, c1) = self.q1.forward_cached(&x);
        let (o2, c2) = self.q2.forward_cached(&x);
        let alpha = self.alpha();
        let nf = n as f64;
        let mut loss = 0.0;
        let mut g1 = Array2::zeros((n, 1));
        let mut g2 = Array2::zeros((n, 1));
        for b in 0..n {
            let (v1, v2) = (o1[(b, 0)], o2[(b, 0)]);
            loss += (alpha * sq.logp[b] - v1.min(v2)) / nf;
            if v1 <= v2 {
                g1[(b, 0)] = -1.0 / nf;
            } else {
                g2[(b, 0)] = -1.0 / nf;
            }
        }
        let obs_dim = obs.ncols();
        let (_, gx1) = self.q1.backward(&c1, &g1);
        let (_, gx2) = self.q2.backward(&c2, &g2);
        let d_a = &gx1.slice(s![.., obs_dim..obs_dim + d]) + &gx2.slice(s![.., obs_dim..obs_dim + d]);
        let d_logp = Array1::from_elem(n, alpha / nf);
        let g_out = squash_backward(&sq, &d_a, &d_logp);
        let (grads, _) = actor.backward(&cache, &g_out);
        (loss, grads, sq.logp.mean().unwrap_or(0.0))
    }

    /// One gradient step on both critics, the actor and the temperature.
    pub fn update<R: Rng>(&mut self, batch: &Batch, lr: f64, rng: &mut R) -> Result<UpdateStats, TrainError> {
        let n = batch.reward.len();
        let eps_next = self.sample_noise(n, rng);
        let y = self.critic_targets(batch, &eps_next);
        let (l1, g1) = Self::critic_loss_grad(&self.q1, batch, &y);
        let (l2, g2) = Self::critic_loss_grad(&self.q2, batch, &y);
        if !(l1.is_finite() && l2.is_finite() && g1.is_finite() && g2.is_finite()) {
            return Err(TrainError::NonFinite(format!("critic loss {l1}, {l2}")));
        }
        self.opt_q1.step(&mut self.q1, &g1, lr);
        self.opt_q2.step(&mut self.q2, &g2, lr);

        let eps = self.sample_noise(n, rng);
        let (la, ga, mean_logp) = self.actor_loss_grad(&self.actor, &batch.obs, &eps);
        if !(la.is_finite() && ga.is_finite()) {
            return Err(TrainError::NonFinite(format!("actor loss {la}")));
        }
        self.opt_actor.step(&mut self.actor, &ga, lr);

        // L(α) = −log α · (logπ + H_target)
        let g_alpha = -(mean_logp + self.target_entropy);
        self.opt_alpha.step_scalar(&mut self.log_alpha, g_alpha, lr);

        self.q1_target.soft_update(&self.q1, self.tau);
        self.q2_target.soft_update(&self.q2, self.tau);
        Ok(UpdateStats {
            q_loss: 0.5 * (l1 + l2),
            actor_loss: la,
            alpha: self.alpha(),
            entropy: -mean_logp,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn setup() -> (Sac, Batch, ChaCha8Rng) {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let (od, ad, n) = (6, 3, 8);
        let sac = Sac::new(od, ad, &[16, 12], &[16, 12], &SacParams::default(), &mut rng);
        let mut u = |r: usize, c: usize| Array2::from_shape_fn((r, c), |_| rng.random_range(-1.0..1.0));
        let batch = Batch {
            obs: u(n, od),
            action: u(n, ad),
            reward: u(n, 1).column(0).to_owned(),
            next_obs: u(n, od),
            done: Array1::from_shape_fn(n, |b| (b % 3 == 0) as u8 as f64),
        };
        (sac, batch, rng)
    }

    fn relative_error(a: &[f64], b: &[f64]) -> f64 {
        let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        let norm: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt().max(b.iter().map(|x| x * x).sum::<f64>().sqrt());
        diff / norm.max(1e-12)
    }

    fn central_difference(net: &Mlp, f: impl Fn(&Mlp) -> f64, h: f64) -> Vec<f64> {
        let p = net.flat();
        (0..p.len())
            .map(|i| {
                let mut q = p.clone();
                q[i] = p[i] + h;
                let mut np = net.clone();
                np.set_flat(&q);
                q[i] = p[i] - h;
                let mut nm = net.clone();
                nm.set_flat(&q);
                (f(&np) - f(&nm)) / (2.0 * h)
            })
            .collect()
    }

    #[test]
    fn critic_gradient_matches_finite_differences() {
        let (sac, batch, mut rng) = setup();
        let y = sac.critic_targets(&batch, &sac.sample_noise(8, &mut rng));
        let (_, g) = Sac::critic_loss_grad(&sac.q1, &batch, &y);
        let fd = central_difference(&sac.q1, |q| Sac::critic_loss_grad(q, &batch, &y).0, 1e-4);
        let err = relative_error(&g.flat(), &fd);
        assert!(err < 1e-3, "critic relative error {err}");
    }

    #[test]
    fn actor_gradient_matches_finite_differences() {
        let (sac, batch, mut rng) = setup();
        let eps = sac.sample_noise(8, &mut rng);
        let (_, g, _) = sac.actor_loss_grad(&sac.actor, &batch.obs, &eps);
        let fd = central_difference(&sac.actor, |a| sac.actor_loss_grad(a, &batch.obs, &eps).0, 1e-4);
        let err = relative_error(&g.flat(), &fd);
        assert!(err < 1e-3, "actor relative error {err}");
    }

    #[test]
    fn log_prob_matches_direct_density() {
        let out = Array2::from_shape_vec((1, 4), vec![0.3, -0.2, 0.5, -1.0]).unwrap();
        let eps = Array2::from_shape_vec((1, 2), vec![0.7, -1.1]).unwrap();
        let sq = squash(&out, &eps);
        let mut expect = 0.0;
        for j in 0..2 {
            let log_std = LOG_STD_MIN + 0.5 * (LOG_STD_MAX - LOG_STD_MIN) * (out[(0, 2 + j)].tanh() + 1.0);
            let std = log_std.exp();
            let u = out[(0, j)] + std * eps[(0, j)];
            let gauss = (-0.5 * eps[(0, j)].powi(2)).exp() / (std * (2.0 * std::f64::consts::PI).sqrt());
            expect += (gauss / (1.0 - u.tanh().powi(2))).ln();
        }
        assert!((sq.logp[0] - expect).abs() < 1e-12);
    }

    #[test]
    fn actions_stay_in_bounds_and_update_is_finite() {
        let (mut sac, batch, mut rng) = setup();
        for _ in 0..20 {
            let a = sac.act_stochastic(batch.obs.row(0).as_slice().unwrap(), &mut rng);
            assert!(a.iter().all(|v| (-1.0..=1.0).contains(v)));
            let s = sac.update(&batch, 1e-3, &mut rng).unwrap();
            assert!(s.q_loss.is_finite() && s.alpha > 0.0);
        }
        assert_eq!(sac.act_dim(), 3);
        assert_eq!(sac.actor.output_dim(), 6);
    }
}
