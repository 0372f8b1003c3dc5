//! Simulated-versus-human gait comparison: RMSE, RMSE ratio against the
//! cross-human baseline, Pearson correlation and phase-resolved reports.

pub mod io;
pub mod report;

use std::collections::{BTreeMap, BTreeSet};
use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gaitdata::{percent_axis, GaitCycle};

pub use io::{load_dataset, save_dataset, DatasetManifest};
pub use report::{emit_report, read_report_csv, ReportFormat};

#[derive(Debug, Error, PartialEq)]
pub enum BenchError {
    #[error("length mismatch: {0} vs {1}")]
    Length(usize, usize),
    #[error("need at least {needed} samples, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("zero variance input")]
    ZeroVariance,
    #[error("need at least two subjects for `{variable}` / `{condition}`, found {found}")]
    TooFewSubjects {
        variable: String,
        condition: String,
        found: usize,
    },
    #[error("cross-human baseline is zero for `{variable}` / `{condition}`")]
    ZeroBaseline { variable: String, condition: String },
    #[error("invalid phase boundaries: {0}")]
    Phases(String),
    #[error("dataset: {0}")]
    Dataset(String),
    #[error("report i/o: {0}")]
    Io(String),
}

pub fn rmse(a: &[f64], b: &[f64]) -> Result<f64, BenchError> {
    if a.len() != b.len() {
        return Err(BenchError::Length(a.len(), b.len()));
    }
    if a.is_empty() {
        return Err(BenchError::TooShort { needed: 1, got: 0 });
    }
    let ss: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok((ss / a.len() as f64).sqrt())
}

/// Sample Pearson correlation.
pub fn pearson_r(a: &[f64], b: &[f64]) -> Result<f64, BenchError> {
    if a.len() != b.len() {
        return Err(BenchError::Length(a.len(), b.len()));
    }
    if a.len() < 3 {
        return Err(BenchError::TooShort { needed: 3, got: a.len() });
    }
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa <= 0.0 || sbb <= 0.0 {
        return Err(BenchError::ZeroVariance);
    }
    Ok((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

/// Pointwise mean of equal-length cycles.
pub fn mean_cycle(cycles: &[Vec<f64>]) -> Option<Vec<f64>> {
    let first = cycles.first()?;
    let mut out = vec![0.0; first.len()];
    for c in cycles {
        for (o, v) in out.iter_mut().zip(c) {
            *o += v;
        }
    }
    let n = cycles.len() as f64;
    Some(out.into_iter().map(|v| v / n).collect())
}

/// Whether a variable is a muscle activation or EMG envelope channel.
pub fn is_activation(variable: &str) -> bool {
    variable.starts_with("act_") || variable.starts_with("emg_")
}

/// Normalized cycles per subject, condition and variable.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BenchmarkDataset {
    pub n_points: usize,
    /// (subject, condition, variable) → cycles
    pub cycles: BTreeMap<(String, String, String), Vec<Vec<f64>>>,
}

impl BenchmarkDataset {
    pub fn new(n_points: usize) -> Self {
        Self {
            n_points,
            cycles: BTreeMap::new(),
        }
    }

    pub fn add_cycle(&mut self, subject: &str, condition: &str, variable: &str, values: Vec<f64>) -> Result<(), BenchError> {
        if values.len() != self.n_points {
            return Err(BenchError::Dataset(format!(
                "{subject}/{condition}/{variable}: cycle has {} points, dataset uses {}",
                values.len(),
                self.n_points
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(BenchError::Dataset(format!("{subject}/{condition}/{variable}: non-finite sample")));
        }
        self.cycles
            .entry((subject.into(), condition.into(), variable.into()))
            .or_default()
            .push(values);
        Ok(())
    }

    pub fn subjects(&self) -> Vec<String> {
        self.cycles.keys().map(|k| k.0.clone()).collect::<BTreeSet<_>>().into_iter().collect()
    }

    pub fn conditions(&self) -> Vec<String> {
        self.cycles.keys().map(|k| k.1.clone()).collect::<BTreeSet<_>>().into_iter().collect()
    }

    pub fn variables(&self) -> Vec<String> {
        self.cycles.keys().map(|k| k.2.clone()).collect::<BTreeSet<_>>().into_iter().collect()
    }

    /// Subject-mean cycles for one variable and condition, in subject order.
    pub fn subject_means(&self, variable: &str, condition: &str) -> Vec<(String, Vec<f64>)> {
        self.cycles
            .iter()
            .filter(|((_, c, v), _)| c == condition && v == variable)
            .filter_map(|((s, _, _), cy)| mean_cycle(cy).map(|m| (s.clone(), m)))
            .collect()
    }

    /// Scales every activation channel of each subject by that subject's
    /// maximum over all its cycles and conditions.
    pub fn normalize_activations(&mut self) {
        let mut peaks: BTreeMap<(String, String), f64> = BTreeMap::new();
        for ((s, _, v), cy) in &self.cycles {
            if is_activation(v) {
                let m = cy.iter().flatten().fold(0.0_f64, |a, &b| a.max(b));
                let e = peaks.entry((s.clone(), v.clone())).or_insert(0.0);
                *e = e.max(m);
            }
        }
        for ((s, _, v), cy) in self.cycles.iter_mut() {
            if let Some(&p) = peaks.get(&(s.clone(), v.clone())) {
                if p > 0.0 {
                    cy.iter_mut().flatten().for_each(|x| *x /= p);
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Baseline {
    pub mean_rmse: f64,
    pub pairs: usize,
}

fn subject_means_checked(ds: &BenchmarkDataset, variable: &str, condition: &str) -> Result<Vec<Vec<f64>>, BenchError> {
    let means: Vec<Vec<f64>> = ds.subject_means(variable, condition).into_iter().map(|(_, m)| m).collect();
    if means.len() < 2 {
        return Err(BenchError::TooFewSubjects {
            variable: variable.into(),
            condition: condition.into(),
            found: means.len(),
        });
    }
    Ok(means)
}

fn pairwise_baseline(means: &[Vec<f64>], range: Range<usize>) -> Result<Baseline, BenchError> {
    let mut total = 0.0;
    let mut pairs = 0;
    for i in 0..means.len() {
        for j in i + 1..means.len() {
            total += rmse(&means[i][range.clone()], &means[j][range.clone()])?;
            pairs += 1;
        }
    }
    Ok(Baseline {
        mean_rmse: total / pairs as f64,
        pairs,
    })
}

/// Mean RMSE over all unordered pairs of subject-mean cycles.
pub fn cross_human_baseline(ds: &BenchmarkDataset, variable: &str, condition: &str) -> Result<Baseline, BenchError> {
    let means = subject_means_checked(ds, variable, condition)?;
    pairwise_baseline(&means, 0..ds.n_points)
}

/// How the simulated cycle is compared against the subjects.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Numerator {
    /// Mean over subjects of RMSE(sim, subject mean).
    #[default]
    PerSubject,
    /// RMSE(sim, mean of subject means).
    GrandMean,
}

fn numerator(sim: &[f64], means: &[Vec<f64>], range: Range<usize>, mode: Numerator) -> Result<f64, BenchError> {
    match mode {
        Numerator::PerSubject => {
            let mut s = 0.0;
            for m in means {
                s += rmse(&sim[range.clone()], &m[range.clone()])?;
            }
            Ok(s / means.len() as f64)
        }
        Numerator::GrandMean => {
            let grand = mean_cycle(means).expect("at least two subjects");
            rmse(&sim[range.clone()], &grand[range])
        }
    }
}

pub fn rmse_ratio(
    sim_mean_cycle: &[f64],
    ds: &BenchmarkDataset,
    variable: &str,
    condition: &str,
    mode: Numerator,
) -> Result<f64, BenchError> {
    if sim_mean_cycle.len() != ds.n_points {
        return Err(BenchError::Length(sim_mean_cycle.len(), ds.n_points));
    }
    let means = subject_means_checked(ds, variable, condition)?;
    let range = 0..ds.n_points;
    let base = pairwise_baseline(&means, range.clone())?;
    if base.mean_rmse <= 0.0 {
        return Err(BenchError::ZeroBaseline {
            variable: variable.into(),
            condition: condition.into(),
        });
    }
    Ok(numerator(sim_mean_cycle, &means, range, mode)? / base.mean_rmse)
}

pub const PHASE_NAMES: [&str; 4] = ["loading_response", "mid_stance", "pre_swing", "swing"];

/// Percent-of-cycle boundaries of the four phases; the last phase is closed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseBoundaries(pub [f64; 5]);

impl Default for PhaseBoundaries {
    fn default() -> Self {
        Self([0.0, 10.0, 50.0, 60.0, 100.0])
    }
}

impl PhaseBoundaries {
    pub fn validate(&self) -> Result<(), BenchError> {
        let b = self.0;
        if b[0] != 0.0 || b[4] != 100.0 {
            return Err(BenchError::Phases(format!("must start at 0 and end at 100, got {b:?}")));
        }
        if b.windows(2).any(|w| w[1] <= w[0]) {
            return Err(BenchError::Phases(format!("must be strictly increasing, got {b:?}")));
        }
        Ok(())
    }
}

/// Index ranges of the four phases over a 0–100 % axis: `[b0, b1)`, …,
/// `[b3, b4]`.
pub fn phase_partition(axis: &[f64], bounds: &PhaseBoundaries) -> Result<[Range<usize>; 4], BenchError> {
    bounds.validate()?;
    if axis.windows(2).any(|w| w[1] <= w[0]) {
        return Err(BenchError::Phases("percent axis must be increasing".into()));
    }
    let b = bounds.0;
    let first_at_or_above = |x: f64| axis.iter().position(|&p| p >= x).unwrap_or(axis.len());
    let cuts = [0, first_at_or_above(b[1]), first_at_or_above(b[2]), first_at_or_above(b[3]), axis.len()];
    Ok([cuts[0]..cuts[1], cuts[1]..cuts[2], cuts[2]..cuts[3], cuts[3]..cuts[4]])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricEntry {
    pub variable: String,
    pub condition: String,
    pub phase: String,
    /// Numerator RMSE (see [`MetricReport::numerator`]); `None` when the
    /// simulation produced no strides for the condition.
    pub rmse: Option<f64>,
    pub rmse_ratio: Option<f64>,
    pub baseline_rmse: f64,
    /// Mean over subjects of r(sim, subject mean); zero-variance pairs excluded.
    pub pearson_r: Option<f64>,
    pub n_subjects: usize,
}

pub const THRESHOLDS: [f64; 3] = [2.0, 3.0, 5.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub numerator: Numerator,
    pub boundaries: PhaseBoundaries,
    pub entries: Vec<MetricEntry>,
    /// (threshold, number of ratios strictly above it)
    pub threshold_counts: Vec<(f64, usize)>,
}

pub fn count_above(entries: &[MetricEntry], thresholds: &[f64]) -> Vec<(f64, usize)> {
    thresholds
        .iter()
        .map(|&t| (t, entries.iter().filter(|e| e.rmse_ratio.is_some_and(|r| r > t)).count()))
        .collect()
}

impl MetricReport {
    pub fn empty() -> Self {
        Self {
            numerator: Numerator::PerSubject,
            boundaries: PhaseBoundaries::default(),
            entries: Vec::new(),
            threshold_counts: count_above(&[], &THRESHOLDS),
        }
    }
}

/// Simulated mean cycles keyed by (condition, variable); `None` marks a
/// condition without usable strides.
pub type SimCycles = BTreeMap<(String, String), Option<Vec<f64>>>;

/// Mean simulated cycle per channel of a set of normalized strides.
/// Activation channels are scaled to their own peak.
pub fn sim_mean_cycles(strides: &[GaitCycle]) -> BTreeMap<String, Vec<f64>> {
    let mut by_var: BTreeMap<String, Vec<Vec<f64>>> = BTreeMap::new();
    for s in strides {
        for (k, v) in &s.channels {
            by_var.entry(k.clone()).or_default().push(v.clone());
        }
    }
    by_var
        .into_iter()
        .filter_map(|(k, cy)| {
            let mut m = mean_cycle(&cy)?;
            if is_activation(&k) {
                let peak = m.iter().fold(0.0_f64, |a, &b| a.max(b));
                if peak > 0.0 {
                    m.iter_mut().for_each(|x| *x /= peak);
                }
            }
            Some((k, m))
        })
        .collect()
}

/// One entry per (variable, condition, phase) for every pair present in
/// both the simulation and the reference dataset.
pub fn build_report(
    sim: &SimCycles,
    ds: &BenchmarkDataset,
    bounds: &PhaseBoundaries,
    mode: Numerator,
) -> Result<MetricReport, BenchError> {
    let ranges = phase_partition(&percent_axis(ds.n_points), bounds)?;
    let mut entries = Vec::new();
    for ((condition, variable), cycle) in sim {
        let means = match subject_means_checked(ds, variable, condition) {
            Ok(m) => m,
            Err(BenchError::TooFewSubjects { .. }) => continue,
            Err(e) => return Err(e),
        };
        if let Some(c) = cycle {
            if c.len() != ds.n_points {
                return Err(BenchError::Length(c.len(), ds.n_points));
            }
        }
        for (phase, range) in PHASE_NAMES.iter().zip(ranges.iter()) {
            let base = pairwise_baseline(&means, range.clone())?;
            let (rmse_v, ratio, r) = match cycle {
                None => (None, None, None),
                Some(c) => {
                    let num = numerator(c, &means, range.clone(), mode)?;
                    let ratio = (base.mean_rmse > 0.0).then(|| num / base.mean_rmse);
                    let rs: Vec<f64> = means
                        .iter()
                        .filter_map(|m| pearson_r(&c[range.clone()], &m[range.clone()]).ok())
                        .collect();
                    let r = (!rs.is_empty()).then(|| rs.iter().sum::<f64>() / rs.len() as f64);
                    (Some(num), ratio, r)
                }
            };
            entries.push(MetricEntry {
                variable: variable.clone(),
                condition: condition.clone(),
                phase: phase.to_string(),
                rmse: rmse_v,
                rmse_ratio: ratio,
                baseline_rmse: base.mean_rmse,
                pearson_r: r,
                n_subjects: means.len(),
            });
        }
    }
    Ok(MetricReport {
        numerator: mode,
        boundaries: *bounds,
        threshold_counts: count_above(&entries, &THRESHOLDS),
        entries,
    })
}
