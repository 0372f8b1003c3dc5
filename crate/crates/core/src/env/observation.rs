use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::dynamics::NQ;

/// Offsets of the observation blocks for a model with `n` muscles
/// (`n_leg` per leg followed by the trunk muscles).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObsLayout {
    pub n_leg: usize,
    pub n_trunk: usize,
}

impl ObsLayout {
    pub fn new(n_leg: usize, n_trunk: usize) -> Self {
        Self { n_leg, n_trunk }
    }

    pub fn n_muscles(&self) -> usize {
        2 * self.n_leg + self.n_trunk
    }

    pub fn dim(&self) -> usize {
        self.target_speed() + 1
    }

    fn muscle_block(&self, i: usize) -> Range<usize> {
        let n = self.n_muscles();
        i * n..(i + 1) * n
    }

    pub fn fiber_length(&self) -> Range<usize> {
        self.muscle_block(0)
    }

    pub fn fiber_velocity(&self) -> Range<usize> {
        self.muscle_block(1)
    }

    /// Muscle force over maximum isometric force.
    pub fn force(&self) -> Range<usize> {
        self.muscle_block(2)
    }

    pub fn excitation(&self) -> Range<usize> {
        self.muscle_block(3)
    }

    /// Head orientation as a unit quaternion (w, x, y, z).
    pub fn head_quat(&self) -> Range<usize> {
        let s = 4 * self.n_muscles();
        s..s + 4
    }

    pub fn head_omega(&self) -> Range<usize> {
        let s = self.head_quat().end;
        s..s + 3
    }

    /// Right then left foot position relative to the pelvis, (x, y, z) each.
    pub fn feet(&self) -> Range<usize> {
        let s = self.head_omega().end;
        s..s + 6
    }

    /// Generalized coordinates; the two base translations are always zero.
    pub fn joint_angles(&self) -> Range<usize> {
        let s = self.feet().end;
        s..s + NQ
    }

    pub fn joint_velocities(&self) -> Range<usize> {
        let s = self.joint_angles().end;
        s..s + NQ
    }

    pub fn activation(&self) -> Range<usize> {
        let s = self.joint_velocities().end;
        s..s + self.n_muscles()
    }

    /// Right then left foot ground reaction force over body weight.
    pub fn grf(&self) -> Range<usize> {
        let s = self.activation().end;
        s..s + 6
    }

    pub fn com_velocity(&self) -> Range<usize> {
        let s = self.grf().end;
        s..s + 3
    }

    pub fn target_speed(&self) -> usize {
        self.com_velocity().end
    }

    /// Indices of the base translation entries (angle and velocity blocks).
    pub fn base_translation(&self) -> [usize; 4] {
        let a = self.joint_angles().start;
        let v = self.joint_velocities().start;
        [a, a + 1, v, v + 1]
    }

    /// Pairs of equal-length ranges that exchange under left/right mirroring.
    fn swaps(&self) -> Vec<(usize, usize, usize)> {
        let mut out = Vec::new();
        for block in [
            self.fiber_length(),
            self.fiber_velocity(),
            self.force(),
            self.excitation(),
            self.activation(),
        ] {
            out.push((block.start, block.start + self.n_leg, self.n_leg));
        }
        for block in [self.feet(), self.grf()] {
            out.push((block.start, block.start + 3, 3));
        }
        for block in [self.joint_angles(), self.joint_velocities()] {
            // hip, knee, ankle of each side
            out.push((block.start + 4, block.start + 7, 3));
        }
        out
    }

    /// Exchange the right and left entries of every sided block in place.
    pub fn mirror(&self, values: &mut [f64]) {
        for (a, b, len) in self.swaps() {
            for i in 0..len {
                values.swap(a + i, b + i);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub values: Vec<f64>,
    pub layout: ObsLayout,
    /// True when the sided blocks were mirrored for the policy.
    pub mirrored: bool,
}

impl Observation {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn target_speed(&self) -> f64 {
        self.values[self.layout.target_speed()]
    }

    pub fn block(&self, r: Range<usize>) -> &[f64] {
        &self.values[r]
    }
}
