use ndarray::{Array1, Array2};
use rand::Rng;

use super::TrainError;

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub obs: Vec<f64>,
    /// Policy-space action in [-1, 1].
    pub action: Vec<f64>,
    pub reward: f64,
    pub next_obs: Vec<f64>,
    /// True only for terminal (fall) transitions, not time-limit truncation.
    pub done: bool,
}

#[derive(Debug, Clone)]
pub struct Batch {
    pub obs: Array2<f64>,
    pub action: Array2<f64>,
    pub reward: Array1<f64>,
    pub next_obs: Array2<f64>,
    pub done: Array1<f64>,
}

/// Fixed-capacity ring of transitions stored as flat rows.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    obs_dim: usize,
    act_dim: usize,
    obs: Vec<f64>,
    next_obs: Vec<f64>,
    action: Vec<f64>,
    reward: Vec<f64>,
    done: Vec<bool>,
    /// Slot of the next write.
    head: usize,
    len: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize, obs_dim: usize, act_dim: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self {
            capacity,
            obs_dim,
            act_dim,
            obs: Vec::new(),
            next_obs: Vec::new(),
            action: Vec::new(),
            reward: Vec::new(),
            done: Vec::new(),
            head: 0,
            len: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Append, overwriting the oldest transition once full.
    pub fn push(&mut self, t: Transition) {
        assert_eq!(t.obs.len(), self.obs_dim);
        assert_eq!(t.next_obs.len(), self.obs_dim);
        assert_eq!(t.action.len(), self.act_dim);
        if self.len < self.capacity {
            self.obs.extend(&t.obs);
            self.next_obs.extend(&t.next_obs);
            self.action.extend(&t.action);
            self.reward.push(t.reward);
            self.done.push(t.done);
            self.len += 1;
        } else {
            let h = self.head;
            self.obs[h * self.obs_dim..(h + 1) * self.obs_dim].copy_from_slice(&t.obs);
            self.next_obs[h * self.obs_dim..(h + 1) * self.obs_dim].copy_from_slice(&t.next_obs);
            self.action[h * self.act_dim..(h + 1) * self.act_dim].copy_from_slice(&t.action);
            self.reward[h] = t.reward;
            self.done[h] = t.done;
        }
        self.head = (self.head + 1) % self.capacity;
    }

    /// Stored transitions from oldest to newest.
    pub fn iter(&self) -> impl Iterator<Item = Transition> + '_ {
        let start = if self.len < self.capacity { 0 } else { self.head };
        (0..self.len).map(move |i| self.get((start + i) % self.capacity))
    }

    fn get(&self, i: usize) -> Transition {
        Transition {
            obs: self.obs[i * self.obs_dim..(i + 1) * self.obs_dim].to_vec(),
            action: self.action[i * self.act_dim..(i + 1) * self.act_dim].to_vec(),
            reward: self.reward[i],
            next_obs: self.next_obs[i * self.obs_dim..(i + 1) * self.obs_dim].to_vec(),
            done: self.done[i],
        }
    }

    /// Slot indices drawn uniformly with replacement.
    pub fn sample_indices<R: Rng>(&self, batch_size: usize, rng: &mut R) -> Result<Vec<usize>, TrainError> {
        if self.len == 0 {
            return Err(TrainError::EmptyBuffer);
        }
        Ok((0..batch_size).map(|_| rng.random_range(0..self.len)).collect())
    }

    /// Uniform sample with replacement; `normalize` is applied to both
    /// observation rows.
    pub fn sample<R: Rng>(
        &self,
        batch_size: usize,
        rng: &mut R,
        normalize: impl Fn(&[f64], &mut [f64]),
    ) -> Result<Batch, TrainError> {
        let idx = self.sample_indices(batch_size, rng)?;
        let (od, ad) = (self.obs_dim, self.act_dim);
        let mut obs = Array2::zeros((batch_size, od));
        let mut next_obs = Array2::zeros((batch_size, od));
        let mut action = Array2::zeros((batch_size, ad));
        let mut reward = Array1::zeros(batch_size);
        let mut done = Array1::zeros(batch_size);
        for (r, &i) in idx.iter().enumerate() {
            normalize(
                &self.obs[i * od..(i + 1) * od],
                obs.row_mut(r).as_slice_mut().expect("standard layout"),
            );
            normalize(
                &self.next_obs[i * od..(i + 1) * od],
                next_obs.row_mut(r).as_slice_mut().expect("standard layout"),
            );
            action
                .row_mut(r)
                .as_slice_mut()
                .expect("standard layout")
                .copy_from_slice(&self.action[i * ad..(i + 1) * ad]);
            reward[r] = self.reward[i];
            done[r] = if self.done[i] { 1.0 } else { 0.0 };
        }
        Ok(Batch {
            obs,
            action,
            reward,
            next_obs,
            done,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tr(x: f64) -> Transition {
        Transition {
            obs: vec![x],
            action: vec![x],
            reward: x,
            next_obs: vec![x + 1.0],
            done: false,
        }
    }

    fn copy(src: &[f64], dst: &mut [f64]) {
        dst.copy_from_slice(src);
    }

    #[test]
    fn ring_semantics() {
        let mut b = ReplayBuffer::new(3, 1, 1);
        for i in 1..=4 {
            b.push(tr(i as f64));
        }
        assert_eq!(b.len(), 3);
        let rewards: Vec<f64> = b.iter().map(|t| t.reward).collect();
        assert_eq!(rewards, vec![2.0, 3.0, 4.0]);
    }

    #[test]
    fn seeded_sampling_is_reproducible() {
        let mut b = ReplayBuffer::new(100, 1, 1);
        for i in 0..50 {
            b.push(tr(i as f64));
        }
        let s1 = b.sample(16, &mut ChaCha8Rng::seed_from_u64(5), copy).unwrap();
        let s2 = b.sample(16, &mut ChaCha8Rng::seed_from_u64(5), copy).unwrap();
        assert_eq!(s1.reward, s2.reward);
        assert_eq!(s1.next_obs, s2.next_obs);
    }

    #[test]
    fn empty_buffer_errors() {
        let b = ReplayBuffer::new(4, 1, 1);
        assert!(matches!(
            b.sample(1, &mut ChaCha8Rng::seed_from_u64(0), copy),
            Err(TrainError::EmptyBuffer)
        ));
    }

    #[test]
    fn sampling_is_uniform() {
        let mut b = ReplayBuffer::new(10, 1, 1);
        for i in 0..10 {
            b.push(tr(i as f64));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 100_000;
        let mut counts = [0usize; 10];
        for i in b.sample_indices(n, &mut rng).unwrap() {
            counts[i] += 1;
        }
        let p = 0.1;
        let mean = n as f64 * p;
        let sd = (n as f64 * p * (1.0 - p)).sqrt();
        for c in counts {
            assert!((c as f64 - mean).abs() <= 3.0 * sd, "count {c} vs {mean} ± {}", 3.0 * sd);
        }
    }

    proptest::proptest! {
        #[test]
        fn never_exceeds_capacity(cap in 1usize..20, n in 0usize..60) {
            let mut b = ReplayBuffer::new(cap, 1, 1);
            for i in 0..n {
                b.push(tr(i as f64));
            }
            proptest::prop_assert_eq!(b.len(), n.min(cap));
            let kept: Vec<f64> = b.iter().map(|t| t.reward).collect();
            let expect: Vec<f64> = (n.saturating_sub(cap)..n).map(|i| i as f64).collect();
            proptest::prop_assert_eq!(kept, expect);
        }
    }
}
