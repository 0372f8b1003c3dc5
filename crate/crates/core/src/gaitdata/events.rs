use super::TimeSeries;

/// Minimum spacing between two heel strikes, in seconds.
pub const DEFAULT_REFRACTORY_S: f64 = 0.4;

/// Upward threshold crossings of the vertical GRF, with a refractory window of
/// [`DEFAULT_REFRACTORY_S`] to suppress chatter around the threshold.
pub fn detect_heel_strikes(vgrf: &TimeSeries, threshold: f64) -> Vec<usize> {
    let refractory = (DEFAULT_REFRACTORY_S * vgrf.sample_rate).round() as usize;
    detect_heel_strikes_with(&vgrf.values, threshold, refractory)
}

/// Every `i` with `v[i] > threshold` and `v[i-1] <= threshold`, skipping
/// crossings closer than `refractory` samples to the previous accepted one.
pub fn detect_heel_strikes_with(values: &[f64], threshold: f64, refractory: usize) -> Vec<usize> {
    let mut events: Vec<usize> = Vec::new();
    for i in 1..values.len() {
        if values[i] > threshold && values[i - 1] <= threshold {
            if let Some(&prev) = events.last() {
                if i - prev < refractory {
                    continue;
                }
            }
            events.push(i);
        }
    }
    events
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_crossing() {
        let s = TimeSeries::new("v", "N", 100.0, vec![0.0, 10.0, 14.0, 16.0, 20.0]).unwrap();
        assert_eq!(detect_heel_strikes(&s, 15.0), vec![3]);
    }

    #[test]
    fn flat_zero_has_no_events() {
        let s = TimeSeries::new("v", "N", 1000.0, vec![0.0; 3000]).unwrap();
        assert!(detect_heel_strikes(&s, 15.0).is_empty());
    }

    #[test]
    fn chatter_is_suppressed() {
        let mut v = vec![0.0; 1000];
        // Bounces around the threshold right after contact.
        for (i, x) in v.iter_mut().enumerate().skip(100).take(400) {
            *x = if i % 7 < 3 { 14.0 } else { 200.0 };
        }
        let events = detect_heel_strikes_with(&v, 15.0, 400);
        assert_eq!(events.len(), 1);
        assert_eq!(events[0], 101);
    }

    #[test]
    fn value_equal_to_threshold_does_not_fire() {
        assert!(detect_heel_strikes_with(&[0.0, 15.0, 15.0], 15.0, 0).is_empty());
        assert_eq!(detect_heel_strikes_with(&[15.0, 15.0 + 1e-12], 15.0, 0), vec![1]);
    }
}
