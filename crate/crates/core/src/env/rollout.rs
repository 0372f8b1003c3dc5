use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::gaitdata::{GaitTrial, GrfAxis, TimeSeries};
use crate::reward::RewardBreakdown;
use crate::synergy::ActivationMatrix;

use super::dynamics::{ANKLE_R, HIP_R, KNEE_R, LUMBAR, NQ};
use super::{Env, EnvError, StepResult};

/// One control step of a rollout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub time: f64,
    pub target_speed: f64,
    pub action: Vec<f64>,
    pub reward: RewardBreakdown,
    /// Generalized coordinates (m, rad).
    pub q: [f64; NQ],
    pub qd: [f64; NQ],
    /// Muscle moment about each coordinate over body mass, N·m/kg.
    pub moments: [f64; NQ],
    /// Per-foot (right, left) ground reaction force over body weight, (x, y).
    pub grf: [[f64; 2]; 2],
    pub activations: Vec<f64>,
    pub heel_strike: [bool; 2],
    pub mirror_phase: bool,
    pub fell: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutHeader {
    pub control_rate: f64,
    pub body_mass: f64,
    pub muscle_names: Vec<String>,
    pub condition: String,
}

/// Per-step log of one episode; stored as JSON lines (header first).
#[derive(Debug, Clone, PartialEq)]
pub struct RolloutLog {
    pub header: RolloutHeader,
    pub records: Vec<StepRecord>,
}

/// Right-leg joints reported in rollout trials: (coordinate, channel stem).
const TRIAL_JOINTS: [(usize, &str); 4] = [(HIP_R, "hip"), (KNEE_R, "knee"), (ANKLE_R, "ankle"), (LUMBAR, "lumbar")];

impl RolloutLog {
    pub fn new(env: &Env, condition: impl Into<String>) -> Self {
        Self {
            header: RolloutHeader {
                control_rate: env.config().control_rate,
                body_mass: env.config().total_mass(),
                muscle_names: env.config().muscle_names(),
                condition: condition.into(),
            },
            records: Vec::new(),
        }
    }

    pub fn record(&mut self, env: &Env, action: &[f64], result: &StepResult) {
        let st = env.state();
        let bw = env.body_weight().max(f64::MIN_POSITIVE);
        let mass = env.config().total_mass();
        self.records.push(StepRecord {
            step: st.step,
            time: st.time,
            target_speed: st.target_speed,
            action: action.to_vec(),
            reward: result.reward,
            q: st.q,
            qd: st.qd,
            moments: st.muscle_moments.map(|m| m / mass),
            grf: st.grf.map(|f| [f[0] / bw, f[1] / bw]),
            activations: st.muscles.iter().map(|m| m.activation).collect(),
            heel_strike: result.info.heel_strike,
            mirror_phase: st.mirror_phase,
            fell: result.terminated,
        });
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn total_reward(&self) -> f64 {
        self.records.iter().map(|r| r.reward.total).sum()
    }

    pub fn fell(&self) -> bool {
        self.records.last().is_some_and(|r| r.fell)
    }

    /// Control-step indices of right heel strikes.
    pub fn right_heel_strikes(&self) -> Vec<usize> {
        self.records
            .iter()
            .enumerate()
            .filter(|(_, r)| r.heel_strike[0])
            .map(|(i, _)| i)
            .collect()
    }

    pub fn write_jsonl(&self, path: &Path) -> Result<(), EnvError> {
        let err = |e: &dyn std::fmt::Display| EnvError::Log(format!("{}: {e}", path.display()));
        let mut w = BufWriter::new(File::create(path).map_err(|e| err(&e))?);
        let line = serde_json::to_string(&self.header).map_err(|e| err(&e))?;
        writeln!(w, "{line}").map_err(|e| err(&e))?;
        for r in &self.records {
            let line = serde_json::to_string(r).map_err(|e| err(&e))?;
            writeln!(w, "{line}").map_err(|e| err(&e))?;
        }
        w.flush().map_err(|e| err(&e))
    }

    pub fn read_jsonl(path: &Path) -> Result<Self, EnvError> {
        let err = |e: &dyn std::fmt::Display| EnvError::Log(format!("{}: {e}", path.display()));
        let mut lines = BufReader::new(File::open(path).map_err(|e| err(&e))?).lines();
        let first = lines.next().ok_or_else(|| err(&"empty file"))?.map_err(|e| err(&e))?;
        let header: RolloutHeader = serde_json::from_str(&first).map_err(|e| err(&e))?;
        let mut records = Vec::new();
        for (i, line) in lines.enumerate() {
            let line = line.map_err(|e| err(&e))?;
            if line.trim().is_empty() {
                continue;
            }
            records.push(serde_json::from_str(&line).map_err(|e| err(&format!("line {}: {e}", i + 2)))?);
        }
        Ok(Self { header, records })
    }

    /// Right-leg gait channels at the control rate: joint angles (deg),
    /// muscle moments (N·m/kg), right-foot GRF (body weights) and the
    /// right-leg activations under their planar muscle names.
    pub fn to_trial(&self) -> Result<GaitTrial, EnvError> {
        let rate = self.header.control_rate;
        let series = |name: String, units: &str, v: Vec<f64>| {
            TimeSeries::new(name, units, rate, v).map_err(|e| EnvError::Log(e.to_string()))
        };
        let mut kinematics = BTreeMap::new();
        let mut kinetics = BTreeMap::new();
        for (d, stem) in TRIAL_JOINTS {
            let angle = self.records.iter().map(|r| r.q[d].to_degrees()).collect();
            kinematics.insert(format!("{stem}_angle"), series(format!("{stem}_angle"), "deg", angle)?);
            let moment = self.records.iter().map(|r| r.moments[d]).collect();
            kinetics.insert(format!("{stem}_moment"), series(format!("{stem}_moment"), "N*m/kg", moment)?);
        }
        let mut grf = BTreeMap::new();
        for (axis, k) in [(GrfAxis::AnteriorPosterior, 0), (GrfAxis::Vertical, 1)] {
            let v = self.records.iter().map(|r| r.grf[0][k]).collect();
            grf.insert(axis, series(axis.label().to_string(), "BW", v)?);
        }
        let names: Vec<String> = self
            .header
            .muscle_names
            .iter()
            .filter_map(|n| n.strip_suffix("_r").map(str::to_string))
            .collect();
        let m = names.len();
        let data = Array2::from_shape_fn((self.records.len(), m), |(t, j)| self.records[t].activations[j]);
        let activations = ActivationMatrix::new(data, names).map_err(|e| EnvError::Log(e.to_string()))?;
        Ok(GaitTrial {
            sample_rate: rate,
            kinematics,
            kinetics,
            grf,
            activations: Some(activations),
            subject_mass: self.header.body_mass,
        })
    }
}
