//! Gait recordings: ingest, low-pass filtering, heel-strike detection and
//! cycle segmentation/normalization.

mod events;
mod filter;
mod io;

use std::collections::BTreeMap;

use thiserror::Error;

use crate::synergy::ActivationMatrix;

pub use events::{detect_heel_strikes, detect_heel_strikes_with, DEFAULT_REFRACTORY_S};
pub use filter::{lowpass_filter, ButterworthLowpass};
pub use io::{load_trial, write_cycles_csv, ChannelRole, ColumnSpec, TrialSchema};

/// Number of samples in a normalized gait cycle (0, 1, ..., 100 %).
pub const DEFAULT_CYCLE_POINTS: usize = 101;

#[derive(Debug, Error)]
pub enum GaitError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("no samples")]
    NoSamples,
    #[error("missing required column `{0}`")]
    MissingColumn(String),
    #[error("non-numeric value {value:?} at line {line}, column `{column}`")]
    NonNumeric {
        line: usize,
        column: String,
        value: String,
    },
    #[error("invalid time series `{name}`: {reason}")]
    InvalidSeries { name: String, reason: String },
    #[error("cutoff {cutoff} Hz must lie in (0, {nyquist}) Hz")]
    CutoffOutOfRange { cutoff: f64, nyquist: f64 },
    #[error("filter order must be even and >= 2, got {0}")]
    BadOrder(usize),
    #[error("need at least 2 events to segment cycles, got {0}")]
    TooFewEvents(usize),
    #[error("event index {index} outside trial of {len} samples")]
    EventOutOfRange { index: usize, len: usize },
    #[error("events must be strictly increasing")]
    UnorderedEvents,
    #[error("n_points must be >= 2, got {0}")]
    TooFewPoints(usize),
}

/// A uniformly sampled, single-channel signal.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    pub sample_rate: f64,
    pub values: Vec<f64>,
    pub channel_name: String,
    pub units: String,
}

impl TimeSeries {
    pub fn new(
        channel_name: impl Into<String>,
        units: impl Into<String>,
        sample_rate: f64,
        values: Vec<f64>,
    ) -> Result<Self, GaitError> {
        let series = Self {
            sample_rate,
            values,
            channel_name: channel_name.into(),
            units: units.into(),
        };
        series.validate()?;
        Ok(series)
    }

    pub fn validate(&self) -> Result<(), GaitError> {
        let fail = |reason: &str| {
            Err(GaitError::InvalidSeries {
                name: self.channel_name.clone(),
                reason: reason.to_string(),
            })
        };
        if !(self.sample_rate > 0.0 && self.sample_rate.is_finite()) {
            return fail("sample_rate must be positive");
        }
        if self.values.len() < 2 {
            return fail("need at least 2 samples");
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return fail("values must be finite");
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn duration(&self) -> f64 {
        (self.values.len() - 1) as f64 / self.sample_rate
    }

    pub(crate) fn with_values(&self, values: Vec<f64>) -> Self {
        Self {
            sample_rate: self.sample_rate,
            values,
            channel_name: self.channel_name.clone(),
            units: self.units.clone(),
        }
    }
}

/// Ground reaction force components.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GrfAxis {
    AnteriorPosterior,
    Vertical,
    MedioLateral,
}

impl GrfAxis {
    pub fn label(self) -> &'static str {
        match self {
            GrfAxis::AnteriorPosterior => "grf_ap",
            GrfAxis::Vertical => "grf_vertical",
            GrfAxis::MedioLateral => "grf_ml",
        }
    }
}

/// One walking trial on a common time base.
#[derive(Debug, Clone)]
pub struct GaitTrial {
    pub sample_rate: f64,
    /// Joint angles in degrees.
    pub kinematics: BTreeMap<String, TimeSeries>,
    /// Joint moments in N·m/kg.
    pub kinetics: BTreeMap<String, TimeSeries>,
    pub grf: BTreeMap<GrfAxis, TimeSeries>,
    pub activations: Option<ActivationMatrix>,
    pub subject_mass: f64,
}

impl GaitTrial {
    pub fn len(&self) -> usize {
        self.channels().map(|(_, s)| s.len()).next().unwrap_or_else(|| {
            self.activations.as_ref().map_or(0, |a| a.data.nrows())
        })
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn channel_count(&self) -> usize {
        self.kinematics.len() + self.kinetics.len() + self.grf.len()
    }

    /// All scalar channels, keyed by their name. GRF channels use the axis label.
    pub fn channels(&self) -> impl Iterator<Item = (String, &TimeSeries)> {
        self.kinematics
            .iter()
            .chain(self.kinetics.iter())
            .map(|(k, v)| (k.clone(), v))
            .chain(self.grf.iter().map(|(k, v)| (k.label().to_string(), v)))
    }

    /// Applies the same low-pass filter to every kinematic, kinetic and GRF channel.
    pub fn filtered(&self, cutoff: f64, order: usize) -> Result<Self, GaitError> {
        let map = |m: &BTreeMap<String, TimeSeries>| -> Result<BTreeMap<String, TimeSeries>, GaitError> {
            m.iter()
                .map(|(k, s)| Ok((k.clone(), lowpass_filter(s, cutoff, order)?)))
                .collect()
        };
        let grf = self
            .grf
            .iter()
            .map(|(k, s)| Ok((*k, lowpass_filter(s, cutoff, order)?)))
            .collect::<Result<_, GaitError>>()?;
        Ok(Self {
            sample_rate: self.sample_rate,
            kinematics: map(&self.kinematics)?,
            kinetics: map(&self.kinetics)?,
            grf,
            activations: self.activations.clone(),
            subject_mass: self.subject_mass,
        })
    }
}

/// A single stride, either raw (samples `start_index..=end_index`) or
/// resampled onto `n_points` equally spaced fractions of the cycle.
#[derive(Debug, Clone, PartialEq)]
pub struct GaitCycle {
    pub start_index: usize,
    pub end_index: usize,
    pub channels: BTreeMap<String, Vec<f64>>,
    pub n_points: Option<usize>,
}

impl GaitCycle {
    pub fn duration_samples(&self) -> usize {
        self.end_index - self.start_index
    }

    pub fn is_normalized(&self) -> bool {
        self.n_points.is_some()
    }
}

/// Splits a trial into strides between consecutive events.
pub fn segment_cycles(trial: &GaitTrial, events: &[usize]) -> Result<Vec<GaitCycle>, GaitError> {
    if events.len() < 2 {
        return Err(GaitError::TooFewEvents(events.len()));
    }
    if events.windows(2).any(|w| w[1] <= w[0]) {
        return Err(GaitError::UnorderedEvents);
    }
    let len = trial.len();
    if let Some(&last) = events.last() {
        if last >= len {
            return Err(GaitError::EventOutOfRange { index: last, len });
        }
    }

    let mut columns: Vec<(String, &[f64])> = trial
        .channels()
        .map(|(name, s)| (name, s.values.as_slice()))
        .collect();
    let activation_cols: Vec<(String, Vec<f64>)> = trial
        .activations
        .as_ref()
        .map(|a| {
            a.muscle_names
                .iter()
                .enumerate()
                .map(|(j, name)| (format!("act_{name}"), a.data.column(j).to_vec()))
                .collect()
        })
        .unwrap_or_default();
    columns.extend(activation_cols.iter().map(|(n, v)| (n.clone(), v.as_slice())));

    Ok(events
        .windows(2)
        .map(|w| GaitCycle {
            start_index: w[0],
            end_index: w[1],
            channels: columns
                .iter()
                .map(|(name, values)| (name.clone(), values[w[0]..=w[1]].to_vec()))
                .collect(),
            n_points: None,
        })
        .collect())
}

/// Linearly resamples one channel onto `n_points` equally spaced fractions.
/// The first and last samples are copied exactly.
pub fn resample_linear(values: &[f64], n_points: usize) -> Vec<f64> {
    let last = values.len() - 1;
    (0..n_points)
        .map(|k| {
            if k == 0 {
                return values[0];
            }
            if k == n_points - 1 {
                return values[last];
            }
            let pos = k as f64 * last as f64 / (n_points - 1) as f64;
            let i = (pos.floor() as usize).min(last - 1);
            let frac = pos - i as f64;
            values[i] + frac * (values[i + 1] - values[i])
        })
        .collect()
}

/// Resamples every channel of a cycle to `n_points` samples spanning 0–100 %.
pub fn time_normalize(cycle: &GaitCycle, n_points: usize) -> Result<GaitCycle, GaitError> {
    if n_points < 2 {
        return Err(GaitError::TooFewPoints(n_points));
    }
    let channels = cycle
        .channels
        .iter()
        .map(|(name, values)| {
            if values.len() < 2 {
                return Err(GaitError::InvalidSeries {
                    name: name.clone(),
                    reason: "cycle channel has fewer than 2 samples".into(),
                });
            }
            Ok((name.clone(), resample_linear(values, n_points)))
        })
        .collect::<Result<_, _>>()?;
    Ok(GaitCycle {
        start_index: cycle.start_index,
        end_index: cycle.end_index,
        channels,
        n_points: Some(n_points),
    })
}

/// Percent-of-cycle axis for `n_points` samples.
pub fn percent_axis(n_points: usize) -> Vec<f64> {
    (0..n_points)
        .map(|k| 100.0 * k as f64 / (n_points - 1) as f64)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trial_with(values: Vec<f64>) -> GaitTrial {
        let mut kinematics = BTreeMap::new();
        kinematics.insert(
            "knee_angle".to_string(),
            TimeSeries::new("knee_angle", "deg", 100.0, values).unwrap(),
        );
        GaitTrial {
            sample_rate: 100.0,
            kinematics,
            kinetics: BTreeMap::new(),
            grf: BTreeMap::new(),
            activations: None,
            subject_mass: 70.0,
        }
    }

    #[test]
    fn segments_between_events() {
        let trial = trial_with((0..400).map(f64::from).collect());
        let cycles = segment_cycles(&trial, &[100, 200, 310]).unwrap();
        assert_eq!(cycles.len(), 2);
        assert_eq!((cycles[0].start_index, cycles[0].end_index), (100, 200));
        assert_eq!((cycles[1].start_index, cycles[1].end_index), (200, 310));
        assert_eq!(cycles[0].channels["knee_angle"].len(), 101);
        assert_eq!(cycles[0].channels["knee_angle"][0], 100.0);
    }

    #[test]
    fn single_event_is_an_error() {
        let trial = trial_with(vec![0.0; 20]);
        assert!(matches!(
            segment_cycles(&trial, &[5]),
            Err(GaitError::TooFewEvents(1))
        ));
    }

    #[test]
    fn event_past_end_is_rejected() {
        let trial = trial_with(vec![0.0; 20]);
        assert!(segment_cycles(&trial, &[5, 20]).is_err());
    }

    #[test]
    fn ramp_normalizes_to_percent() {
        for len in [2usize, 7, 33, 250] {
            let ramp: Vec<f64> = (0..len).map(|i| i as f64 / (len - 1) as f64).collect();
            let out = resample_linear(&ramp, 101);
            for (k, v) in out.iter().enumerate() {
                assert!((v - k as f64 / 100.0).abs() < 1e-12, "len {len} k {k}");
            }
        }
    }

    #[test]
    fn constant_channel_stays_constant() {
        let out = resample_linear(&[3.25; 17], 101);
        assert!(out.iter().all(|&v| v == 3.25));
    }

    #[test]
    fn sine_interpolation_error_is_bounded() {
        // One full period sampled with spacing fraction `delta` of the cycle.
        let n_src = 64usize;
        let delta = 1.0 / (n_src - 1) as f64;
        let src: Vec<f64> = (0..n_src)
            .map(|i| (2.0 * std::f64::consts::PI * i as f64 * delta).sin())
            .collect();
        let out = resample_linear(&src, 101);
        let bound = (std::f64::consts::PI * delta).powi(2) / 2.0;
        for (k, v) in out.iter().enumerate() {
            let exact = (2.0 * std::f64::consts::PI * k as f64 / 100.0).sin();
            assert!((v - exact).abs() <= bound, "k {k}: {} > {bound}", (v - exact).abs());
        }
    }

    #[test]
    fn normalization_rejects_too_few_points() {
        let trial = trial_with((0..50).map(f64::from).collect());
        let cycles = segment_cycles(&trial, &[0, 40]).unwrap();
        assert!(matches!(
            time_normalize(&cycles[0], 1),
            Err(GaitError::TooFewPoints(1))
        ));
        let norm = time_normalize(&cycles[0], 101).unwrap();
        assert_eq!(norm.channels["knee_angle"][0], 0.0);
        assert_eq!(norm.channels["knee_angle"][100], 40.0);
    }

    #[test]
    fn time_series_validation() {
        assert!(TimeSeries::new("x", "", 0.0, vec![1.0, 2.0]).is_err());
        assert!(TimeSeries::new("x", "", 10.0, vec![1.0]).is_err());
        assert!(TimeSeries::new("x", "", 10.0, vec![1.0, f64::NAN]).is_err());
        assert!(TimeSeries::new("x", "", 10.0, vec![1.0, 2.0]).is_ok());
    }
}
