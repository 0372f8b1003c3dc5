use std::collections::BTreeMap;
use std::fs::File;
use std::io::Write;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{percent_axis, GaitCycle, GaitError, GaitTrial, GrfAxis, TimeSeries};
use crate::synergy::ActivationMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelRole {
    Kinematics,
    Kinetics,
    Grf,
    Activation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub role: ChannelRole,
    /// Channel name inside the trial; defaults to the column name. For GRF
    /// columns this must be one of `ap`, `vertical`, `ml`.
    #[serde(default)]
    pub channel: Option<String>,
    #[serde(default)]
    pub units: String,
}

/// Column map for a trial CSV (stored as JSON next to the data).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSchema {
    #[serde(default = "default_time_column")]
    pub time_column: String,
    pub subject_mass: f64,
    pub columns: BTreeMap<String, ColumnSpec>,
}

fn default_time_column() -> String {
    "time".to_string()
}

impl TrialSchema {
    pub fn from_json_file(path: &Path) -> Result<Self, GaitError> {
        let text = std::fs::read_to_string(path).map_err(|source| GaitError::Io {
            path: path.display().to_string(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|e| GaitError::Schema(e.to_string()))
    }
}

fn parse_grf_axis(name: &str) -> Result<GrfAxis, GaitError> {
    match name {
        "ap" | "anterior_posterior" => Ok(GrfAxis::AnteriorPosterior),
        "vertical" | "v" => Ok(GrfAxis::Vertical),
        "ml" | "medio_lateral" => Ok(GrfAxis::MedioLateral),
        other => Err(GaitError::Schema(format!("unknown GRF axis `{other}`"))),
    }
}

/// Reads a header-row CSV trial. Columns absent from the schema are ignored.
pub fn load_trial(path: &Path, schema: &TrialSchema) -> Result<GaitTrial, GaitError> {
    let file = File::open(path).map_err(|source| GaitError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let headers = reader.headers()?.clone();
    if headers.is_empty() {
        return Err(GaitError::NoSamples);
    }
    let index_of = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| GaitError::MissingColumn(name.to_string()))
    };

    let time_idx = index_of(&schema.time_column)?;
    let wanted: Vec<(usize, &String)> = schema
        .columns
        .keys()
        .map(|name| Ok((index_of(name)?, name)))
        .collect::<Result<_, GaitError>>()?;

    let mut time = Vec::new();
    let mut data: Vec<Vec<f64>> = vec![Vec::new(); wanted.len()];
    for (row_no, record) in reader.records().enumerate() {
        let record = record?;
        // Header is line 1.
        let line = row_no + 2;
        let parse = |idx: usize, column: &str| -> Result<f64, GaitError> {
            let raw = record.get(idx).unwrap_or("");
            match raw.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(GaitError::NonNumeric {
                    line,
                    column: column.to_string(),
                    value: raw.to_string(),
                }),
            }
        };
        time.push(parse(time_idx, &schema.time_column)?);
        for (slot, (idx, name)) in data.iter_mut().zip(&wanted) {
            slot.push(parse(*idx, name)?);
        }
    }
    if time.is_empty() {
        return Err(GaitError::NoSamples);
    }
    if time.len() < 2 {
        return Err(GaitError::InvalidSeries {
            name: schema.time_column.clone(),
            reason: "need at least 2 samples".into(),
        });
    }
    let span = time[time.len() - 1] - time[0];
    if !(span > 0.0) {
        return Err(GaitError::InvalidSeries {
            name: schema.time_column.clone(),
            reason: "time column must increase".into(),
        });
    }
    let sample_rate = (time.len() - 1) as f64 / span;

    let mut trial = GaitTrial {
        sample_rate,
        kinematics: BTreeMap::new(),
        kinetics: BTreeMap::new(),
        grf: BTreeMap::new(),
        activations: None,
        subject_mass: schema.subject_mass,
    };
    let mut act_names = Vec::new();
    let mut act_cols: Vec<Vec<f64>> = Vec::new();
    for ((_, col), values) in wanted.iter().zip(data) {
        let spec = &schema.columns[*col];
        let channel = spec.channel.clone().unwrap_or_else(|| (*col).clone());
        match spec.role {
            ChannelRole::Kinematics => {
                let s = TimeSeries::new(channel.clone(), spec.units.clone(), sample_rate, values)?;
                trial.kinematics.insert(channel, s);
            }
            ChannelRole::Kinetics => {
                let s = TimeSeries::new(channel.clone(), spec.units.clone(), sample_rate, values)?;
                trial.kinetics.insert(channel, s);
            }
            ChannelRole::Grf => {
                let axis = parse_grf_axis(&channel)?;
                let s = TimeSeries::new(axis.label(), spec.units.clone(), sample_rate, values)?;
                trial.grf.insert(axis, s);
            }
            ChannelRole::Activation => {
                act_names.push(channel);
                act_cols.push(values);
            }
        }
    }
    if !act_cols.is_empty() {
        let t = act_cols[0].len();
        let m = act_cols.len();
        let data = Array2::from_shape_fn((t, m), |(i, j)| act_cols[j][i]);
        let matrix = ActivationMatrix::new(data, act_names)
            .map_err(|e| GaitError::Schema(e.to_string()))?;
        if matrix.data.iter().any(|&v| v > 1.0) {
            return Err(GaitError::Schema("activations must lie in [0, 1]".into()));
        }
        trial.activations = Some(matrix);
    }
    Ok(trial)
}

/// Writes normalized cycles as CSV: `cycle,percent_gait,<channels...>`.
pub fn write_cycles_csv(cycles: &[GaitCycle], path: &Path) -> Result<(), GaitError> {
    let io_err = |source| GaitError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut out = std::io::BufWriter::new(File::create(path).map_err(io_err)?);
    let names: Vec<&String> = cycles
        .first()
        .map(|c| c.channels.keys().collect())
        .unwrap_or_default();
    let mut header = String::from("cycle,percent_gait");
    for n in &names {
        header.push(',');
        header.push_str(n);
    }
    writeln!(out, "{header}").map_err(io_err)?;
    for (ci, cycle) in cycles.iter().enumerate() {
        let n_points = cycle.n_points.ok_or_else(|| {
            GaitError::Schema("only normalized cycles can be written".into())
        })?;
        for (k, pct) in percent_axis(n_points).into_iter().enumerate() {
            let mut line = format!("{ci},{pct}");
            for n in &names {
                line.push(',');
                line.push_str(&cycle.channels[*n][k].to_string());
            }
            writeln!(out, "{line}").map_err(io_err)?;
        }
    }
    out.flush().map_err(io_err)
}
