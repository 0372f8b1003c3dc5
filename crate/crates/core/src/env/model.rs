use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::muscle::{default_leg_muscles, default_trunk_muscles, MuscleParams};

use super::EnvError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentParams {
    /// kg
    pub mass: f64,
    /// Moment of inertia about the COM, kg·m².
    pub inertia: f64,
    /// Distance from the proximal joint to the distal joint, m (0 for end segments).
    pub length: f64,
    /// COM in the segment frame (x forward, y up at the neutral pose), m.
    pub com: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segments {
    pub pelvis: SegmentParams,
    /// Torso including head and arms.
    pub torso: SegmentParams,
    pub thigh: SegmentParams,
    pub shank: SegmentParams,
    pub foot: SegmentParams,
    /// Lumbar joint above the hip centre, m.
    pub lumbar_height: f64,
    /// Head point above the lumbar joint, m.
    pub head_height: f64,
    /// Heel and toe contact points relative to the ankle, m.
    pub heel: [f64; 2],
    pub toe: [f64; 2],
}

impl Default for Segments {
    fn default() -> Self {
        Self {
            pelvis: SegmentParams {
                mass: 11.0,
                inertia: 0.10,
                length: 0.0,
                com: [0.0, 0.05],
            },
            torso: SegmentParams {
                mass: 37.0,
                inertia: 2.0,
                length: 0.0,
                com: [0.0, 0.30],
            },
            thigh: SegmentParams {
                mass: 7.0,
                inertia: 0.12,
                length: 0.43,
                com: [0.0, -0.18],
            },
            shank: SegmentParams {
                mass: 3.0,
                inertia: 0.05,
                length: 0.43,
                com: [0.0, -0.18],
            },
            foot: SegmentParams {
                mass: 1.0,
                inertia: 0.004,
                length: 0.0,
                com: [0.05, -0.04],
            },
            lumbar_height: 0.10,
            head_height: 0.65,
            heel: [-0.05, -0.08],
            toe: [0.15, -0.08],
        }
    }
}

/// Joint ranges in degrees; exceeding them engages a stiff penalty spring.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointLimits {
    pub lumbar: [f64; 2],
    pub hip: [f64; 2],
    pub knee: [f64; 2],
    pub ankle: [f64; 2],
    /// N·m/rad
    pub stiffness: f64,
    /// N·m·s/rad, only while outside the range.
    pub damping: f64,
}

impl Default for JointLimits {
    fn default() -> Self {
        Self {
            lumbar: [-35.0, 30.0],
            hip: [-30.0, 120.0],
            knee: [-140.0, 5.0],
            ankle: [-45.0, 30.0],
            stiffness: 300.0,
            damping: 5.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContactParams {
    /// N/m
    pub stiffness: f64,
    /// N·s/m
    pub damping: f64,
    /// Tangential (stiction) spring, N/m.
    pub tangential_stiffness: f64,
    pub tangential_damping: f64,
    pub friction: f64,
}

impl Default for ContactParams {
    fn default() -> Self {
        Self {
            stiffness: 50_000.0,
            damping: 1_500.0,
            tangential_stiffness: 20_000.0,
            tangential_damping: 300.0,
            friction: 0.9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FallCriteria {
    /// Fall when the pelvis is below this fraction of its standing height.
    pub pelvis_height_fraction: f64,
    /// Fall when |head pitch| exceeds this angle, degrees.
    pub head_pitch_deg: f64,
}

impl Default for FallCriteria {
    fn default() -> Self {
        Self {
            pelvis_height_fraction: 0.6,
            head_pitch_deg: 60.0,
        }
    }
}

/// Standing pose at reset, degrees, plus the seeded perturbation amplitude.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitialPose {
    pub lumbar: f64,
    pub hip: f64,
    pub knee: f64,
    pub ankle: f64,
    /// Uniform joint-angle perturbation half-width, degrees.
    pub angle_noise_deg: f64,
    /// Uniform joint-velocity perturbation half-width, deg/s.
    pub velocity_noise_deg: f64,
}

impl Default for InitialPose {
    fn default() -> Self {
        Self {
            lumbar: 0.0,
            hip: 0.0,
            knee: 0.0,
            ankle: 0.0,
            angle_noise_deg: 1.0,
            velocity_noise_deg: 2.0,
        }
    }
}

/// Everything needed to build the planar biped. Loaded from a JSON model file;
/// the defaults are a generic 70 kg adult.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub segments: Segments,
    /// Muscles of one leg; instantiated for both sides. Moment-arm keys are
    /// `hip`, `knee`, `ankle`.
    pub leg_muscles: Vec<MuscleParams>,
    /// Muscles spanning the lumbar joint (key `lumbar`).
    pub trunk_muscles: Vec<MuscleParams>,
    pub joint_limits: JointLimits,
    /// Viscous damping on every rotational joint, N·m·s/rad.
    pub joint_damping: f64,
    pub contact: ContactParams,
    pub gravity: f64,
    /// Hz
    pub control_rate: f64,
    pub physics_substeps: usize,
    pub episode_length: usize,
    /// N
    pub heel_strike_threshold: f64,
    /// s
    pub heel_strike_refractory: f64,
    pub fall: FallCriteria,
    pub initial_pose: InitialPose,
    /// Passive settling time after posing, s.
    pub settle_time: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            segments: Segments::default(),
            leg_muscles: default_leg_muscles(),
            trunk_muscles: default_trunk_muscles(),
            joint_limits: JointLimits::default(),
            joint_damping: 1.0,
            contact: ContactParams::default(),
            gravity: 9.81,
            control_rate: 40.0,
            physics_substeps: 25,
            episode_length: 1000,
            heel_strike_threshold: 15.0,
            heel_strike_refractory: 0.4,
            fall: FallCriteria::default(),
            initial_pose: InitialPose::default(),
            settle_time: 0.3,
        }
    }
}

impl ModelConfig {
    pub fn from_json_file(path: &Path) -> Result<Self, EnvError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| EnvError::Config(format!("{}: {e}", path.display())))?;
        let cfg: Self = serde_json::from_str(&text)
            .map_err(|e| EnvError::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("model config serializes")
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        let bad = |m: String| Err(EnvError::Config(m));
        if !(self.control_rate > 0.0) || self.physics_substeps == 0 || self.episode_length == 0 {
            return bad("control_rate, physics_substeps and episode_length must be positive".into());
        }
        if self.leg_muscles.is_empty() {
            return bad("at least one leg muscle is required".into());
        }
        for m in self.leg_muscles.iter().chain(&self.trunk_muscles) {
            m.validate().map_err(EnvError::Config)?;
        }
        for m in &self.leg_muscles {
            if m.moment_arms.iter().any(|(j, _)| !matches!(j.as_str(), "hip" | "knee" | "ankle")) {
                return bad(format!("leg muscle {} spans an unknown joint", m.name));
            }
        }
        for m in &self.trunk_muscles {
            if m.moment_arms.iter().any(|(j, _)| j != "lumbar") {
                return bad(format!("trunk muscle {} must span only `lumbar`", m.name));
            }
        }
        let segs = [
            self.segments.pelvis,
            self.segments.torso,
            self.segments.thigh,
            self.segments.shank,
            self.segments.foot,
        ];
        if segs.iter().any(|s| !(s.mass > 0.0 && s.inertia > 0.0)) {
            return bad("segment masses and inertias must be positive".into());
        }
        let f = &self.fall;
        if !(f.pelvis_height_fraction > 0.0 && f.pelvis_height_fraction < 1.0) {
            return bad("fall pelvis_height_fraction must be in (0, 1)".into());
        }
        Ok(())
    }

    pub fn control_dt(&self) -> f64 {
        1.0 / self.control_rate
    }

    pub fn physics_dt(&self) -> f64 {
        1.0 / (self.control_rate * self.physics_substeps as f64)
    }

    pub fn episode_duration(&self) -> f64 {
        self.episode_length as f64 / self.control_rate
    }

    pub fn total_mass(&self) -> f64 {
        let s = &self.segments;
        s.pelvis.mass + s.torso.mass + 2.0 * (s.thigh.mass + s.shank.mass + s.foot.mass)
    }

    pub fn n_leg_muscles(&self) -> usize {
        self.leg_muscles.len()
    }

    pub fn n_muscles(&self) -> usize {
        2 * self.leg_muscles.len() + self.trunk_muscles.len()
    }

    /// Muscle names in actuator order: right leg, left leg, trunk.
    pub fn muscle_names(&self) -> Vec<String> {
        let mut names = Vec::with_capacity(self.n_muscles());
        for side in ["r", "l"] {
            names.extend(self.leg_muscles.iter().map(|m| format!("{}_{side}", m.name)));
        }
        names.extend(self.trunk_muscles.iter().map(|m| m.name.clone()));
        names
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_round_trip() {
        let cfg = ModelConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.episode_duration(), 25.0);
        assert!((cfg.total_mass() - 70.0).abs() < 1e-12);
        let back: ModelConfig = serde_json::from_str(&cfg.to_json_string()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(cfg.muscle_names().len(), 18);
    }

    #[test]
    fn partial_file_uses_defaults() {
        let cfg: ModelConfig = serde_json::from_str(r#"{"physics_substeps": 50}"#).unwrap();
        assert_eq!(cfg.physics_substeps, 50);
        assert_eq!(cfg.control_rate, 40.0);
    }

    #[test]
    fn rejects_trunk_muscle_on_leg_joint() {
        let mut cfg = ModelConfig::default();
        cfg.trunk_muscles[0].moment_arms = vec![("hip".into(), 0.05)];
        assert!(cfg.validate().is_err());
    }
}
