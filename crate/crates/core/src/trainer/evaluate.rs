use log::warn;
use serde::{Deserialize, Serialize};

use crate::env::{EnvError, RolloutLog, TerrainSpec};
use crate::gaitdata::{segment_cycles, time_normalize, GaitCycle, DEFAULT_CYCLE_POINTS};

use super::checkpoint::Checkpoint;
use super::{run_deterministic_episode, EnvSetup, TrainError};

/// A locomotor condition: target speed on flat ground or a constant slope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub label: String,
    pub speed: f64,
    pub slope_deg: f64,
}

impl Condition {
    pub fn speed(v: f64) -> Self {
        Self {
            label: format!("speed_{v:.1}"),
            speed: v,
            slope_deg: 0.0,
        }
    }

    pub fn slope(deg: f64, v: f64) -> Self {
        Self {
            label: format!("slope_{deg:+.0}"),
            speed: v,
            slope_deg: deg,
        }
    }

    /// Speeds 0.7–1.8 m/s on flat ground, then −5°, 0° and +5° at 1.2 m/s.
    pub fn standard_grid() -> Vec<Self> {
        let mut v: Vec<Self> = (7..=18).map(|t| Self::speed(t as f64 / 10.0)).collect();
        v.extend([-5.0, 0.0, 5.0].map(|d| Self::slope(d, 1.2)));
        v
    }

    pub fn terrain(&self, n_tiles: usize) -> TerrainSpec {
        if self.slope_deg == 0.0 {
            TerrainSpec::flat(n_tiles)
        } else {
            TerrainSpec::constant_slope(n_tiles, self.slope_deg)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalOptions {
    pub n_rollouts: usize,
    pub strides_per_rollout: usize,
    pub n_points: usize,
    pub terrain_tiles: usize,
    pub seed: u64,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            n_rollouts: 10,
            strides_per_rollout: 10,
            n_points: DEFAULT_CYCLE_POINTS,
            terrain_tiles: 50,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ConditionResult {
    pub condition: Condition,
    pub rollouts: Vec<RolloutLog>,
    /// Normalized strides from the non-fallen rollouts.
    pub strides: Vec<GaitCycle>,
    pub fallen: usize,
    /// Strides missing relative to `strides_per_rollout` per stable rollout.
    pub shortfall: usize,
    /// Every rollout fell.
    pub failed: bool,
}

#[derive(Debug, Clone, Default)]
pub struct RolloutDataset {
    pub results: Vec<ConditionResult>,
}

impl RolloutDataset {
    pub fn failed_conditions(&self) -> Vec<&str> {
        self.results
            .iter()
            .filter(|r| r.failed)
            .map(|r| r.condition.label.as_str())
            .collect()
    }
}

/// The last `n` right-leg strides of a rollout, time-normalized. Returns
/// the strides and how many fewer than `n` were available.
pub fn final_strides(log: &RolloutLog, n: usize, n_points: usize) -> Result<(Vec<GaitCycle>, usize), TrainError> {
    let strikes = log.right_heel_strikes();
    if strikes.len() < 2 {
        return Ok((Vec::new(), n));
    }
    let trial = log.to_trial()?;
    let cycles = segment_cycles(&trial, &strikes).map_err(|e| TrainError::Env(EnvError::Log(e.to_string())))?;
    let skip = cycles.len().saturating_sub(n);
    let strides = cycles[skip..]
        .iter()
        .map(|c| time_normalize(c, n_points))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| TrainError::Env(EnvError::Log(e.to_string())))?;
    let shortfall = n - strides.len();
    Ok((strides, shortfall))
}

/// Deterministic (mean-action) rollouts of a checkpoint per condition.
pub fn evaluate_policy(
    ck: &Checkpoint,
    setup: &EnvSetup,
    conditions: &[Condition],
    opts: &EvalOptions,
) -> Result<RolloutDataset, TrainError> {
    let mut env = setup.build()?;
    if ck.agent.obs_dim() != env.obs_dim() || ck.agent.act_dim() != env.action_dim() {
        return Err(TrainError::Checkpoint(format!(
            "policy {}→{} does not fit environment {}→{}",
            ck.agent.obs_dim(),
            ck.agent.act_dim(),
            env.obs_dim(),
            env.action_dim()
        )));
    }
    let mut results = Vec::with_capacity(conditions.len());
    for cond in conditions {
        let mut rollouts = Vec::with_capacity(opts.n_rollouts);
        let mut strides = Vec::new();
        let (mut fallen, mut shortfall) = (0, 0);
        for i in 0..opts.n_rollouts {
            let mut log = RolloutLog::new(&env, cond.label.clone());
            let seed = opts.seed.wrapping_add(i as u64);
            let outcome = run_deterministic_episode(
                &mut env,
                &ck.agent,
                &ck.norm,
                cond.terrain(opts.terrain_tiles),
                cond.speed,
                seed,
                |e, a, r| log.record(e, a, r),
            );
            let fell = match outcome {
                Ok((_, _, fell)) => fell,
                Err(TrainError::Env(EnvError::Diverged { .. })) => {
                    warn!("{}: rollout {i} diverged; counted as a fall", cond.label);
                    true
                }
                Err(e) => return Err(e),
            };
            if fell {
                fallen += 1;
            } else {
                let (s, short) = final_strides(&log, opts.strides_per_rollout, opts.n_points)?;
                if short > 0 {
                    warn!(
                        "{}: rollout {i} yielded {} of {} strides",
                        cond.label,
                        s.len(),
                        opts.strides_per_rollout
                    );
                }
                shortfall += short;
                strides.extend(s);
            }
            rollouts.push(log);
        }
        let failed = opts.n_rollouts > 0 && fallen == opts.n_rollouts;
        if failed {
            warn!("{}: the policy fell in all {} rollouts; condition failed", cond.label, opts.n_rollouts);
        }
        results.push(ConditionResult {
            condition: cond.clone(),
            rollouts,
            strides,
            fallen,
            shortfall,
            failed,
        });
    }
    Ok(RolloutDataset { results })
}
