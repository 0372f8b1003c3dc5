use std::f64::consts::PI;

use super::{GaitError, TimeSeries};

#[derive(Debug, Clone, Copy)]
struct Biquad {
    b0: f64,
    b1: f64,
    b2: f64,
    a1: f64,
    a2: f64,
}

impl Biquad {
    /// Direct form II transposed, starting from the steady state for a constant
    /// input equal to `x0` (every section has unit DC gain).
    fn run(&self, input: &mut [f64], x0: f64) {
        let mut z2 = (self.b2 - self.a2) * x0;
        let mut z1 = (self.b1 - self.a1) * x0 + z2;
        for x in input.iter_mut() {
            let y = self.b0 * *x + z1;
            z1 = self.b1 * *x - self.a1 * y + z2;
            z2 = self.b2 * *x - self.a2 * y;
            *x = y;
        }
    }
}

/// Even-order Butterworth low-pass as a cascade of bilinear-transformed
/// second-order sections, with the cutoff pre-warped so the digital response
/// is exactly -3 dB at `cutoff`.
#[derive(Debug, Clone)]
pub struct ButterworthLowpass {
    sections: Vec<Biquad>,
    order: usize,
    cutoff: f64,
    sample_rate: f64,
}

impl ButterworthLowpass {
    pub fn new(order: usize, cutoff: f64, sample_rate: f64) -> Result<Self, GaitError> {
        if order < 2 || !order.is_multiple_of(2) {
            return Err(GaitError::BadOrder(order));
        }
        let nyquist = sample_rate / 2.0;
        if !(cutoff > 0.0 && cutoff < nyquist) {
            return Err(GaitError::CutoffOutOfRange { cutoff, nyquist });
        }
        let k = (PI * cutoff / sample_rate).tan();
        let k2 = k * k;
        let sections = (0..order / 2)
            .map(|i| {
                // Conjugate pole pair of the analog prototype: s^2 + s/q + 1.
                let q = 1.0 / (2.0 * ((2 * i + 1) as f64 * PI / (2 * order) as f64).sin());
                let norm = 1.0 / (1.0 + k / q + k2);
                let b0 = k2 * norm;
                Biquad {
                    b0,
                    b1: 2.0 * b0,
                    b2: b0,
                    a1: 2.0 * (k2 - 1.0) * norm,
                    a2: (1.0 - k / q + k2) * norm,
                }
            })
            .collect();
        Ok(Self {
            sections,
            order,
            cutoff,
            sample_rate,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn cutoff(&self) -> f64 {
        self.cutoff
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    /// Single causal pass.
    pub fn forward(&self, input: &[f64]) -> Vec<f64> {
        let mut out = input.to_vec();
        let x0 = input.first().copied().unwrap_or(0.0);
        for s in &self.sections {
            s.run(&mut out, x0);
        }
        out
    }

    /// Zero-phase forward-backward pass with odd-reflection edge padding.
    pub fn filtfilt(&self, input: &[f64]) -> Vec<f64> {
        let n = input.len();
        if n < 2 {
            return input.to_vec();
        }
        let pad = (3 * (self.order + 1)).min(n - 1);
        let first = input[0];
        let last = input[n - 1];
        let mut ext = Vec::with_capacity(n + 2 * pad);
        ext.extend((1..=pad).rev().map(|i| 2.0 * first - input[i]));
        ext.extend_from_slice(input);
        ext.extend((1..=pad).map(|i| 2.0 * last - input[n - 1 - i]));

        let mut y = self.forward(&ext);
        y.reverse();
        let mut y = self.forward(&y);
        y.reverse();
        y[pad..pad + n].to_vec()
    }
}

/// Zero-phase Butterworth low-pass of a series. `order` is the per-pass
/// order, so the magnitude response of the combined filter is squared.
pub fn lowpass_filter(series: &TimeSeries, cutoff: f64, order: usize) -> Result<TimeSeries, GaitError> {
    let filter = ButterworthLowpass::new(order, cutoff, series.sample_rate)?;
    Ok(series.with_values(filter.filtfilt(&series.values)))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Least-squares amplitude of a sinusoid of known frequency.
    fn fitted_amplitude(x: &[f64], freq: f64, fs: f64) -> f64 {
        let (mut ss, mut cc, mut sc, mut xs, mut xc) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (i, &v) in x.iter().enumerate() {
            let ph = 2.0 * PI * freq * i as f64 / fs;
            let (s, c) = ph.sin_cos();
            ss += s * s;
            cc += c * c;
            sc += s * c;
            xs += v * s;
            xc += v * c;
        }
        let det = ss * cc - sc * sc;
        let a = (xs * cc - xc * sc) / det;
        let b = (xc * ss - xs * sc) / det;
        a.hypot(b)
    }

    fn sine(freq: f64, fs: f64, n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| (2.0 * PI * freq * i as f64 / fs).sin())
            .collect()
    }

    #[test]
    fn constant_is_preserved() {
        let s = TimeSeries::new("c", "N", 1000.0, vec![4.5; 500]).unwrap();
        let out = lowpass_filter(&s, 12.0, 4).unwrap();
        assert_eq!(out.len(), 500);
        for v in &out.values {
            assert!((v - 4.5).abs() < 1e-9);
        }
    }

    #[test]
    fn forward_gain_at_cutoff_is_half_power() {
        let (fs, fc) = (1000.0, 12.0);
        let f = ButterworthLowpass::new(4, fc, fs).unwrap();
        let y = f.forward(&sine(fc, fs, 6000));
        let gain = fitted_amplitude(&y[2000..], fc, fs);
        let expected = 2f64.powf(-0.5);
        assert!((gain - expected).abs() / expected < 0.02, "gain {gain}");
    }

    #[test]
    fn forward_gain_four_octaves_up() {
        let (fs, fc) = (1000.0, 12.0);
        let f = ButterworthLowpass::new(4, fc, fs).unwrap();
        let y = f.forward(&sine(4.0 * fc, fs, 6000));
        let gain = fitted_amplitude(&y[2000..], 4.0 * fc, fs);
        let analog = (1.0 + 4f64.powi(8)).powf(-0.5);
        assert!(gain <= 0.01, "gain {gain} (analog {analog})");
    }

    #[test]
    fn combined_impulse_response_is_symmetric() {
        let f = ButterworthLowpass::new(4, 12.0, 1000.0).unwrap();
        let n = 2001;
        let mut x = vec![0.0; n];
        x[n / 2] = 1.0;
        let y = f.filtfilt(&x);
        let peak = y
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        assert_eq!(peak, n / 2);
        for k in 1..300 {
            assert!((y[n / 2 - k] - y[n / 2 + k]).abs() < 1e-10, "lag {k}");
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(matches!(
            ButterworthLowpass::new(4, 500.0, 1000.0),
            Err(GaitError::CutoffOutOfRange { .. })
        ));
        assert!(matches!(
            ButterworthLowpass::new(3, 12.0, 1000.0),
            Err(GaitError::BadOrder(3))
        ));
        assert!(ButterworthLowpass::new(0, 12.0, 1000.0).is_err());
    }

    #[test]
    fn refiltering_only_removes_high_frequency_content() {
        let fs = 1000.0;
        let x: Vec<f64> = (0..4000)
            .map(|i| {
                let t = i as f64 / fs;
                (2.0 * PI * 1.0 * t).sin() + 0.3 * (2.0 * PI * 80.0 * t).sin()
            })
            .collect();
        let f = ButterworthLowpass::new(4, 12.0, fs).unwrap();
        let once = f.filtfilt(&x);
        let twice = f.filtfilt(&once);
        let diff: f64 = once[500..3500]
            .iter()
            .zip(&twice[500..3500])
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        // The 1 Hz component sits far inside the passband.
        assert!(diff < 1e-3, "diff {diff}");
    }
}
