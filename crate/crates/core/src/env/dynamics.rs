//! Planar tree of eight rigid bodies in generalized coordinates.
//!
//! `q = [x, y, pelvis, lumbar, hip_r, knee_r, ankle_r, hip_l, knee_l, ankle_l]`:
//! the hip centre position, the absolute pelvis pitch and seven relative joint
//! angles. Every angle is counter-clockwise positive with x forward and y up.

use nalgebra::{SMatrix, SVector};

use super::model::Segments;

pub const NQ: usize = 10;
pub type VecQ = SVector<f64, NQ>;
pub type MatQ = SMatrix<f64, NQ, NQ>;
pub type Jac = SMatrix<f64, 2, NQ>;

pub const X: usize = 0;
pub const Y: usize = 1;
pub const PELVIS: usize = 2;
pub const LUMBAR: usize = 3;
pub const HIP_R: usize = 4;
pub const KNEE_R: usize = 5;
pub const ANKLE_R: usize = 6;
pub const HIP_L: usize = 7;
pub const KNEE_L: usize = 8;
pub const ANKLE_L: usize = 9;

pub const PELVIS_BODY: usize = 0;
pub const TORSO_BODY: usize = 1;
/// Foot body index per side (right, left).
pub const FOOT_BODY: [usize; 2] = [4, 7];
pub const N_BODIES: usize = 8;

/// Coordinate names in `q` order.
pub const COORD_NAMES: [&str; NQ] = [
    "pelvis_tx",
    "pelvis_ty",
    "pelvis_tilt",
    "lumbar",
    "hip_r",
    "knee_r",
    "ankle_r",
    "hip_l",
    "knee_l",
    "ankle_l",
];

#[derive(Debug, Clone, Copy)]
struct Body {
    parent: Option<usize>,
    /// Joint location in the parent frame.
    joint: [f64; 2],
    dof: usize,
    mass: f64,
    inertia: f64,
    com: [f64; 2],
}

#[derive(Debug, Clone)]
pub struct Skeleton {
    bodies: [Body; N_BODIES],
    /// Bodies from the root down to each body, inclusive.
    chains: [Vec<usize>; N_BODIES],
    total_mass: f64,
}

/// Absolute pose of every body for one configuration.
#[derive(Debug, Clone, Copy)]
pub struct Pose {
    pub angle: [f64; N_BODIES],
    pub omega: [f64; N_BODIES],
    /// World position of each body's proximal joint (the hip centre for the pelvis).
    pub origin: [[f64; 2]; N_BODIES],
}

fn rot(a: f64, v: [f64; 2]) -> [f64; 2] {
    let (s, c) = a.sin_cos();
    [c * v[0] - s * v[1], s * v[0] + c * v[1]]
}

fn add(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [a[0] + b[0], a[1] + b[1]]
}

fn sub(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [a[0] - b[0], a[1] - b[1]]
}

impl Skeleton {
    pub fn new(s: &Segments) -> Self {
        let seg = |parent, joint, dof, p: &super::model::SegmentParams| Body {
            parent,
            joint,
            dof,
            mass: p.mass,
            inertia: p.inertia,
            com: p.com,
        };
        let leg = |hip, knee, ankle, offset: usize| {
            [
                seg(Some(PELVIS_BODY), [0.0, 0.0], hip, &s.thigh),
                seg(Some(offset), [0.0, -s.thigh.length], knee, &s.shank),
                seg(Some(offset + 1), [0.0, -s.shank.length], ankle, &s.foot),
            ]
        };
        let [tr, sr, fr] = leg(HIP_R, KNEE_R, ANKLE_R, 2);
        let [tl, sl, fl] = leg(HIP_L, KNEE_L, ANKLE_L, 5);
        let bodies = [
            seg(None, [0.0, 0.0], PELVIS, &s.pelvis),
            seg(Some(PELVIS_BODY), [0.0, s.lumbar_height], LUMBAR, &s.torso),
            tr,
            sr,
            fr,
            tl,
            sl,
            fl,
        ];
        let chains = std::array::from_fn(|b| {
            let mut chain = vec![b];
            let mut cur = b;
            while let Some(p) = bodies[cur].parent {
                chain.push(p);
                cur = p;
            }
            chain.reverse();
            chain
        });
        let total_mass = bodies.iter().map(|b| b.mass).sum();
        Self {
            bodies,
            chains,
            total_mass,
        }
    }

    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    pub fn pose(&self, q: &VecQ, qd: &VecQ) -> Pose {
        let mut angle = [0.0; N_BODIES];
        let mut omega = [0.0; N_BODIES];
        let mut origin = [[0.0; 2]; N_BODIES];
        for (i, b) in self.bodies.iter().enumerate() {
            match b.parent {
                None => {
                    angle[i] = q[b.dof];
                    omega[i] = qd[b.dof];
                    origin[i] = [q[X], q[Y]];
                }
                Some(p) => {
                    angle[i] = angle[p] + q[b.dof];
                    omega[i] = omega[p] + qd[b.dof];
                    origin[i] = add(origin[p], rot(angle[p], b.joint));
                }
            }
        }
        Pose { angle, omega, origin }
    }

    /// World position of a point given in the frame of `body`.
    pub fn point(&self, pose: &Pose, body: usize, local: [f64; 2]) -> [f64; 2] {
        add(pose.origin[body], rot(pose.angle[body], local))
    }

    /// Linear Jacobian of a world point rigidly attached to `body`.
    pub fn jacobian(&self, pose: &Pose, body: usize, p: [f64; 2]) -> Jac {
        let mut j = Jac::zeros();
        j[(0, X)] = 1.0;
        j[(1, Y)] = 1.0;
        for &c in &self.chains[body] {
            let r = sub(p, pose.origin[c]);
            let d = self.bodies[c].dof;
            j[(0, d)] = -r[1];
            j[(1, d)] = r[0];
        }
        j
    }

    /// Velocity-product acceleration of a point attached to `body`.
    fn bias_acc(&self, pose: &Pose, body: usize, p: [f64; 2]) -> [f64; 2] {
        let chain = &self.chains[body];
        let mut acc = [0.0; 2];
        for (n, &c) in chain.iter().enumerate() {
            let next = chain.get(n + 1).map_or(p, |&k| pose.origin[k]);
            let r = sub(next, pose.origin[c]);
            let w2 = pose.omega[c] * pose.omega[c];
            acc[0] -= w2 * r[0];
            acc[1] -= w2 * r[1];
        }
        acc
    }

    pub fn com_of(&self, pose: &Pose, body: usize) -> [f64; 2] {
        self.point(pose, body, self.bodies[body].com)
    }

    /// Mass matrix and the generalized gravity plus velocity-product forces,
    /// so that `M q̈ = h + Q_applied`.
    pub fn dynamics(&self, pose: &Pose, gravity: f64) -> (MatQ, VecQ) {
        let mut m = MatQ::zeros();
        let mut h = VecQ::zeros();
        for (i, b) in self.bodies.iter().enumerate() {
            let c = self.com_of(pose, i);
            let j = self.jacobian(pose, i, c);
            m += b.mass * j.transpose() * j;
            let chain = &self.chains[i];
            for &u in chain {
                for &v in chain {
                    m[(self.bodies[u].dof, self.bodies[v].dof)] += b.inertia;
                }
            }
            let bias = self.bias_acc(pose, i, c);
            let f = SVector::<f64, 2>::new(-b.mass * bias[0], b.mass * (-gravity - bias[1]));
            h += j.transpose() * f;
        }
        (m, h)
    }

    pub fn com(&self, pose: &Pose) -> [f64; 2] {
        let mut c = [0.0; 2];
        for (i, b) in self.bodies.iter().enumerate() {
            let p = self.com_of(pose, i);
            c[0] += b.mass * p[0];
            c[1] += b.mass * p[1];
        }
        [c[0] / self.total_mass, c[1] / self.total_mass]
    }

    pub fn com_velocity(&self, pose: &Pose, qd: &VecQ) -> [f64; 2] {
        let mut v = SVector::<f64, 2>::zeros();
        for (i, b) in self.bodies.iter().enumerate() {
            let j = self.jacobian(pose, i, self.com_of(pose, i));
            v += b.mass * (j * qd);
        }
        [v[0] / self.total_mass, v[1] / self.total_mass]
    }

    pub fn kinetic_energy(&self, pose: &Pose, qd: &VecQ, gravity: f64) -> f64 {
        let (m, _) = self.dynamics(pose, gravity);
        0.5 * qd.dot(&(m * qd))
    }

    pub fn potential_energy(&self, pose: &Pose, gravity: f64) -> f64 {
        self.total_mass * gravity * self.com(pose)[1]
    }
}
