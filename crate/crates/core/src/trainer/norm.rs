use serde::{Deserialize, Serialize};

const CLIP: f64 = 10.0;

/// Per-dimension running mean and variance (Welford); normalized values are
/// clipped to ±10.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunningNorm {
    pub count: u64,
    pub mean: Vec<f64>,
    pub m2: Vec<f64>,
}

impl RunningNorm {
    pub fn new(dim: usize) -> Self {
        Self {
            count: 0,
            mean: vec![0.0; dim],
            m2: vec![0.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn update(&mut self, x: &[f64]) {
        self.count += 1;
        let n = self.count as f64;
        for ((m, s), &v) in self.mean.iter_mut().zip(&mut self.m2).zip(x) {
            let d = v - *m;
            *m += d / n;
            *s += d * (v - *m);
        }
    }

    pub fn variance(&self, i: usize) -> f64 {
        if self.count < 2 {
            1.0
        } else {
            self.m2[i] / (self.count - 1) as f64
        }
    }

    pub fn normalize_into(&self, x: &[f64], out: &mut [f64]) {
        for (i, (o, &v)) in out.iter_mut().zip(x).enumerate() {
            *o = ((v - self.mean[i]) / (self.variance(i) + 1e-8).sqrt()).clamp(-CLIP, CLIP);
        }
    }

    pub fn normalize(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        self.normalize_into(x, &mut out);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_batch_statistics() {
        let data = [[1.0, 5.0], [2.0, 5.0], [4.0, 5.0], [9.0, 5.0]];
        let mut n = RunningNorm::new(2);
        for row in &data {
            n.update(row);
        }
        let mean = 4.0;
        let var = data.iter().map(|r| (r[0] - mean).powi(2)).sum::<f64>() / 3.0;
        assert!((n.mean[0] - mean).abs() < 1e-12);
        assert!((n.variance(0) - var).abs() < 1e-12);
        let z = n.normalize(&[4.0 + var.sqrt(), 5.0]);
        assert!((z[0] - 1.0).abs() < 1e-6);
        assert_eq!(z[1], 0.0);
    }
}
