//! Four-component locomotion reward: velocity tracking (forward plateau ×
//! mediolateral × head stability), quadratic effort, range-of-motion
//! violations and a fall indicator, combined as a weighted sum.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardWeights {
    pub w_vel: f64,
    pub w_effort: f64,
    pub w_rom: f64,
    pub w_fall: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        Self {
            w_vel: 1.0,
            w_effort: -0.01,
            w_rom: -0.1,
            w_fall: -100.0,
        }
    }
}

impl RewardWeights {
    pub fn validate(&self) -> Result<(), String> {
        if self.w_vel < 0.0 {
            return Err("w_vel must be >= 0".into());
        }
        if self.w_effort > 0.0 || self.w_rom > 0.0 || self.w_fall > 0.0 {
            return Err("penalty weights (effort, rom, fall) must be <= 0".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardParams {
    pub c: f64,
    /// Forward-speed plateau half-width, m/s.
    pub delta: f64,
    pub sigma_vx: f64,
    pub sigma_vz: f64,
    /// Head angular-velocity scales about x, y, z, rad/s.
    pub sigma_omega: [f64; 3],
    /// Knee upper bound, degrees (hyperextension positive).
    pub knee_upper_deg: f64,
    /// Lumbar admissible box, degrees (extension positive).
    pub lumbar_lower_deg: f64,
    pub lumbar_upper_deg: f64,
}

impl Default for RewardParams {
    fn default() -> Self {
        Self {
            c: 0.06,
            delta: 0.05,
            sigma_vx: 0.07,
            sigma_vz: 0.10,
            sigma_omega: [0.60, 0.65, 1.40],
            knee_upper_deg: 0.0,
            lumbar_lower_deg: -20.0,
            lumbar_upper_deg: 10.0,
        }
    }
}

impl RewardParams {
    pub fn validate(&self) -> Result<(), String> {
        let sigmas = [self.sigma_vx, self.sigma_vz]
            .into_iter()
            .chain(self.sigma_omega);
        for s in sigmas {
            if !(s > 0.0) {
                return Err("all sigma values must be positive".into());
            }
        }
        if self.lumbar_lower_deg >= self.lumbar_upper_deg {
            return Err("lumbar box lower bound must be below upper bound".into());
        }
        Ok(())
    }
}

/// Complete reward configuration as stored in config files.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RewardConfig {
    #[serde(default)]
    pub weights: RewardWeights,
    #[serde(default)]
    pub params: RewardParams,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub r_ap: f64,
    pub r_ml: f64,
    pub r_head: f64,
    pub r_vel: f64,
    pub r_effort: f64,
    pub r_rom: f64,
    pub r_fall: f64,
    pub total: f64,
}

/// Plateaued Gaussian on the forward COM speed.
pub fn r_ap(v_x: f64, v_target: f64, p: &RewardParams) -> f64 {
    let err = (v_x - v_target).abs();
    if err <= p.delta {
        1.0
    } else {
        let e = err - p.delta;
        (-p.c * e * e / (p.sigma_vx * p.sigma_vx)).exp()
    }
}

pub fn r_ml(v_z: f64, p: &RewardParams) -> f64 {
    (-p.c * v_z * v_z / (p.sigma_vz * p.sigma_vz)).exp()
}

pub fn r_head(omega: [f64; 3], p: &RewardParams) -> f64 {
    omega
        .iter()
        .zip(p.sigma_omega)
        .map(|(w, s)| (-p.c * w * w / (s * s)).exp())
        .product()
}

pub fn r_effort(activations: &[f64]) -> f64 {
    activations.iter().map(|a| a * a).sum()
}

fn p_up(x: f64, upper: f64) -> f64 {
    (x - upper).max(0.0)
}

fn p_box(x: f64, lower: f64, upper: f64) -> f64 {
    (x - upper).max(0.0) + (lower - x).max(0.0)
}

/// Range-of-motion violation in degrees.
pub fn r_rom(knee_r_deg: f64, knee_l_deg: f64, lumbar_deg: f64, p: &RewardParams) -> f64 {
    p_up(knee_r_deg, p.knee_upper_deg)
        + p_up(knee_l_deg, p.knee_upper_deg)
        + p_box(lumbar_deg, p.lumbar_lower_deg, p.lumbar_upper_deg)
}

/// Quantities the reward is computed from at one control step.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardInputs<'a> {
    pub v_x: f64,
    pub v_z: f64,
    pub v_target: f64,
    pub head_omega: [f64; 3],
    pub activations: &'a [f64],
    pub knee_r_deg: f64,
    pub knee_l_deg: f64,
    pub lumbar_deg: f64,
    pub fell: bool,
}

pub fn total_reward(inputs: &RewardInputs<'_>, weights: &RewardWeights, params: &RewardParams) -> RewardBreakdown {
    let r_ap = r_ap(inputs.v_x, inputs.v_target, params);
    let r_ml = r_ml(inputs.v_z, params);
    let r_head = r_head(inputs.head_omega, params);
    let r_vel = r_ap * r_ml * r_head;
    let r_effort = r_effort(inputs.activations);
    let r_rom = r_rom(inputs.knee_r_deg, inputs.knee_l_deg, inputs.lumbar_deg, params);
    let r_fall = if inputs.fell { 1.0 } else { 0.0 };
    let total = weights.w_vel * r_vel
        + weights.w_effort * r_effort
        + weights.w_rom * r_rom
        + weights.w_fall * r_fall;
    RewardBreakdown {
        r_ap,
        r_ml,
        r_head,
        r_vel,
        r_effort,
        r_rom,
        r_fall,
        total,
    }
}
