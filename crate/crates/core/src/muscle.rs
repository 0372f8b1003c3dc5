//! Rigid-tendon Hill-type muscles with constant moment arms.
//!
//! Fiber length and velocity follow directly from joint kinematics:
//! `l̃ = l̃₀ − Σ r_j θ_j / l_opt` and the shortening velocity
//! `ṽ = Σ r_j θ̇_j / (l_opt · v_max)`, so a positive moment arm means tension
//! drives the joint in its positive direction.

use serde::{Deserialize, Serialize};

/// Width of the Gaussian active force–length curve.
const FL_WIDTH: f64 = 0.45;
/// Curvature of the concentric force–velocity hyperbola.
const FV_CURVATURE: f64 = 0.25;
/// Asymptotic eccentric force enhancement (f_V → 1 + FV_ECC_GAIN).
const FV_ECC_GAIN: f64 = 0.8;
/// Eccentric half-saturation velocity, chosen so the slope matches the
/// concentric side at ṽ = 0.
const FV_ECC_HALF: f64 = FV_ECC_GAIN / (1.0 + 1.0 / FV_CURVATURE);
const PE_SHAPE: f64 = 4.0;
const PE_STRAIN_AT_ONE: f64 = 0.6;
const MIN_LENGTH_NORM: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MuscleParams {
    pub name: String,
    /// N
    pub max_isometric_force: f64,
    /// m
    pub optimal_fiber_length: f64,
    /// optimal fiber lengths per second
    pub max_contraction_velocity: f64,
    /// s
    pub tau_act: f64,
    /// s
    pub tau_deact: f64,
    /// Signed constant moment arms (m), keyed by joint name.
    pub moment_arms: Vec<(String, f64)>,
    /// Normalized fiber length with every spanned joint at zero.
    pub neutral_length_norm: f64,
    /// Names of basis muscles whose excitations are averaged to drive this
    /// actuator when the synergy basis is defined over a finer muscle set.
    #[serde(default)]
    pub synergy_sources: Vec<String>,
}

impl MuscleParams {
    pub fn validate(&self) -> Result<(), String> {
        let positive = [
            ("max_isometric_force", self.max_isometric_force),
            ("optimal_fiber_length", self.optimal_fiber_length),
            ("max_contraction_velocity", self.max_contraction_velocity),
            ("tau_act", self.tau_act),
            ("tau_deact", self.tau_deact),
            ("neutral_length_norm", self.neutral_length_norm),
        ];
        for (field, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(format!("muscle {}: {field} must be positive", self.name));
            }
        }
        if self.moment_arms.iter().any(|(_, r)| *r == 0.0 || !r.is_finite()) {
            return Err(format!("muscle {}: moment arms must be nonzero", self.name));
        }
        Ok(())
    }

    pub fn arm(&self, joint: &str) -> f64 {
        self.moment_arms
            .iter()
            .find(|(j, _)| j == joint)
            .map_or(0.0, |(_, r)| *r)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MuscleState {
    pub activation: f64,
    pub fiber_length_norm: f64,
    /// Positive when shortening, in units of the maximum contraction velocity.
    pub fiber_velocity_norm: f64,
}

impl MuscleState {
    /// Fiber state from the angles/velocities (rad, rad/s) of the spanned
    /// joints, given in the same order as `arms`.
    pub fn from_kinematics(params: &MuscleParams, arms: &[f64], angles: &[f64], velocities: &[f64], activation: f64) -> Self {
        let lopt = params.optimal_fiber_length;
        let mut dl = 0.0;
        let mut v = 0.0;
        for ((r, q), qd) in arms.iter().zip(angles).zip(velocities) {
            dl += r * q;
            v += r * qd;
        }
        Self {
            activation,
            fiber_length_norm: (params.neutral_length_norm - dl / lopt).max(MIN_LENGTH_NORM),
            fiber_velocity_norm: v / (lopt * params.max_contraction_velocity),
        }
    }
}

/// One explicit Euler step of first-order activation dynamics.
pub fn activation_step(excitation: f64, activation: f64, dt: f64, params: &MuscleParams) -> f64 {
    let tau = if excitation > activation {
        params.tau_act
    } else {
        params.tau_deact
    };
    (activation + dt * (excitation - activation) / tau).clamp(0.0, 1.0)
}

pub fn force_length(l: f64) -> f64 {
    (-((l - 1.0) / FL_WIDTH).powi(2)).exp()
}

/// Hill hyperbola for shortening, saturating enhancement for lengthening.
pub fn force_velocity(v: f64) -> f64 {
    if v >= 0.0 {
        ((1.0 - v) / (1.0 + v / FV_CURVATURE)).max(0.0)
    } else {
        let u = -v;
        1.0 + FV_ECC_GAIN * u / (u + FV_ECC_HALF)
    }
}

/// d f_V / d ṽ; never positive.
pub fn force_velocity_slope(v: f64) -> f64 {
    if v >= 0.0 {
        if v >= 1.0 {
            return 0.0;
        }
        let d = 1.0 + v / FV_CURVATURE;
        -(1.0 + 1.0 / FV_CURVATURE) / (d * d)
    } else {
        let u = -v;
        -FV_ECC_GAIN * FV_ECC_HALF / ((u + FV_ECC_HALF) * (u + FV_ECC_HALF))
    }
}

pub fn passive_force_length(l: f64) -> f64 {
    if l <= 1.0 {
        0.0
    } else {
        ((PE_SHAPE * (l - 1.0) / PE_STRAIN_AT_ONE).exp() - 1.0) / (PE_SHAPE.exp() - 1.0)
    }
}

/// Elastic energy stored in the passive element, J.
pub fn passive_energy(l: f64, params: &MuscleParams) -> f64 {
    if l <= 1.0 {
        return 0.0;
    }
    let s = PE_STRAIN_AT_ONE / PE_SHAPE;
    let integral = (s * ((l - 1.0) / s).exp_m1() - (l - 1.0)) / PE_SHAPE.exp_m1();
    params.max_isometric_force * params.optimal_fiber_length * integral
}

/// Fiber force in newtons.
pub fn muscle_force(state: &MuscleState, activation: f64, params: &MuscleParams) -> f64 {
    let l = state.fiber_length_norm;
    let active = activation.clamp(0.0, 1.0) * force_length(l) * force_velocity(state.fiber_velocity_norm);
    (params.max_isometric_force * (active + passive_force_length(l))).max(0.0)
}

/// `moment_j = Σ_i arms[i][j] · forces[i]`.
pub fn joint_moments(forces: &[f64], arms: &[Vec<f64>], n_joints: usize) -> Vec<f64> {
    let mut out = vec![0.0; n_joints];
    for (f, row) in forces.iter().zip(arms) {
        for (o, r) in out.iter_mut().zip(row) {
            *o += r * f;
        }
    }
    out
}

fn leg(name: &str, f: f64, lopt: f64, l0: f64, arms: &[(&str, f64)], sources: &[&str]) -> MuscleParams {
    MuscleParams {
        name: name.to_string(),
        max_isometric_force: f,
        optimal_fiber_length: lopt,
        max_contraction_velocity: 10.0,
        tau_act: 0.01,
        tau_deact: 0.04,
        moment_arms: arms.iter().map(|(j, r)| (j.to_string(), *r)).collect(),
        neutral_length_norm: l0,
        synergy_sources: sources.iter().map(|s| s.to_string()).collect(),
    }
}

/// Eight lumped muscles per leg. Joint names are side-free (`hip`, `knee`,
/// `ankle`); hip flexion, knee hyperextension and ankle dorsiflexion are positive.
/// These are generic adult-scale values, not fitted to any subject.
pub fn default_leg_muscles() -> Vec<MuscleParams> {
    vec![
        leg("iliopsoas", 1800.0, 0.10, 1.0, &[("hip", 0.05)], &["iliacus", "psoas"]),
        leg(
            "glutei",
            2000.0,
            0.12,
            0.95,
            &[("hip", -0.06)],
            &["glmax1", "glmax2", "glmax3", "glmed1", "glmed2", "glmed3"],
        ),
        leg(
            "hamstrings",
            2500.0,
            0.10,
            0.9,
            &[("hip", -0.07), ("knee", -0.03)],
            &["semimem", "semiten", "bflh"],
        ),
        leg(
            "rectus_femoris",
            1200.0,
            0.08,
            0.9,
            &[("hip", 0.035), ("knee", 0.04)],
            &["recfem"],
        ),
        leg("vasti", 5000.0, 0.09, 0.8, &[("knee", 0.045)], &["vasmed", "vasint", "vaslat"]),
        leg(
            "gastrocnemius",
            1600.0,
            0.06,
            0.95,
            &[("knee", -0.02), ("ankle", -0.05)],
            &["gasmed", "gaslat"],
        ),
        leg("soleus", 4000.0, 0.05, 0.95, &[("ankle", -0.05)], &["soleus"]),
        leg("tibialis_anterior", 1200.0, 0.09, 1.0, &[("ankle", 0.04)], &["tibant"]),
    ]
}

/// Trunk actuators spanning the lumbar joint (extension positive).
pub fn default_trunk_muscles() -> Vec<MuscleParams> {
    vec![
        leg("erector_spinae", 2500.0, 0.12, 1.0, &[("lumbar", 0.05)], &[]),
        leg("rectus_abdominis", 1500.0, 0.15, 1.0, &[("lumbar", -0.06)], &[]),
    ]
}
