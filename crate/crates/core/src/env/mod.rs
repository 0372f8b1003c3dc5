//! Planar muscle-driven biped: eight segments (pelvis, torso, and thigh, shank
//! and foot per leg), penalty contacts at heel and toe, a tiled terrain, and
//! the episode contract of a 40 Hz policy over 1000-step episodes.

pub mod controller;
pub mod dynamics;
pub mod model;
pub mod observation;
pub mod rollout;
pub mod terrain;

use nalgebra::SVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::muscle::{
    activation_step, force_length, force_velocity_slope, muscle_force, passive_energy, MuscleParams, MuscleState,
};
use crate::reward::{total_reward, RewardBreakdown, RewardConfig, RewardInputs};

pub use controller::{Action, Controller, ControllerMode};
pub use dynamics::{MatQ, Skeleton, VecQ, NQ};
pub use model::{ContactParams, FallCriteria, InitialPose, JointLimits, ModelConfig, SegmentParams, Segments};
pub use observation::{ObsLayout, Observation};
pub use rollout::{RolloutLog, StepRecord};
pub use terrain::{generate_terrain, TerrainSpec, Tile};

use dynamics::{ANKLE_L, ANKLE_R, FOOT_BODY, HIP_L, HIP_R, KNEE_L, KNEE_R, LUMBAR, PELVIS, TORSO_BODY, X, Y};

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("invalid model configuration: {0}")]
    Config(String),
    #[error("invalid terrain: {0}")]
    Terrain(String),
    #[error("action has {got} entries, controller expects {expected}")]
    ActionDim { expected: usize, got: usize },
    #[error("synergy basis: {0}")]
    Basis(String),
    #[error("initial pose penetrates the terrain: {0}")]
    Penetration(String),
    #[error("step called on a finished episode; call reset first")]
    EpisodeOver,
    #[error("simulation diverged at step {step} (t = {time:.3} s)")]
    Diverged { step: usize, time: f64 },
    #[error("rollout log: {0}")]
    Log(String),
}

/// Strict-inequality fall test: pelvis below a fraction of its standing
/// height above the local terrain, or the head pitched past the limit.
pub fn detect_fall(pelvis_height: f64, head_pitch_deg: f64, standing_height: f64, criteria: &FallCriteria) -> bool {
    pelvis_height < criteria.pelvis_height_fraction * standing_height || head_pitch_deg.abs() > criteria.head_pitch_deg
}

#[derive(Debug, Clone)]
struct Actuator {
    params: MuscleParams,
    dofs: Vec<usize>,
    arms: Vec<f64>,
}

const CONTACT_POINTS: usize = 4;
/// Joint servo used only while the model settles at reset.
const SETTLE_KP: f64 = 1000.0;
const SETTLE_KD: f64 = 30.0;

#[derive(Debug, Clone, PartialEq)]
pub struct EnvState {
    pub q: [f64; NQ],
    pub qd: [f64; NQ],
    pub muscles: Vec<MuscleState>,
    pub excitations: Vec<f64>,
    /// Muscle forces, N.
    pub forces: Vec<f64>,
    /// Net muscle moment about each coordinate, N·m.
    pub muscle_moments: [f64; NQ],
    pub mirror_phase: bool,
    pub step: usize,
    pub time: f64,
    pub target_speed: f64,
    /// Index of the tile under the pelvis, if any.
    pub terrain_cursor: Option<usize>,
    /// Ground reaction force per foot (right, left), world x and y, N.
    pub grf: [[f64; 2]; 2],
    /// Vertical force under each heel, N.
    pub heel_force: [f64; 2],
    last_strike: [f64; 2],
    anchors: [Option<[f64; 2]>; CONTACT_POINTS],
    /// Physics substeps since the episode started.
    substeps: u64,
    pub rng: ChaCha8Rng,
    pub done: bool,
}

impl EnvState {
    fn initial(q: [f64; NQ], n_muscles: usize, target_speed: f64, rng: ChaCha8Rng) -> Self {
        let rest = MuscleState {
            activation: 0.0,
            fiber_length_norm: 1.0,
            fiber_velocity_norm: 0.0,
        };
        Self {
            q,
            qd: [0.0; NQ],
            muscles: vec![rest; n_muscles],
            excitations: vec![0.0; n_muscles],
            forces: vec![0.0; n_muscles],
            muscle_moments: [0.0; NQ],
            mirror_phase: false,
            step: 0,
            time: 0.0,
            target_speed,
            terrain_cursor: None,
            grf: [[0.0; 2]; 2],
            heel_force: [0.0; 2],
            last_strike: [f64::NEG_INFINITY; 2],
            anchors: [None; CONTACT_POINTS],
            substeps: 0,
            rng,
            done: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepInfo {
    /// Heel strikes detected during the step (right, left).
    pub heel_strike: [bool; 2],
    pub com_velocity: [f64; 2],
    pub time: f64,
    pub mirror_phase: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub observation: Observation,
    pub reward: RewardBreakdown,
    pub terminated: bool,
    pub truncated: bool,
    pub info: StepInfo,
}

#[derive(Debug, Clone)]
pub struct Env {
    cfg: ModelConfig,
    controller: Controller,
    reward: RewardConfig,
    terrain: TerrainSpec,
    skeleton: Skeleton,
    actuators: Vec<Actuator>,
    layout: ObsLayout,
    limits: [[f64; 2]; NQ],
    standing_height: f64,
    state: EnvState,
}

impl Env {
    pub fn new(cfg: ModelConfig, controller: Controller, reward: RewardConfig) -> Result<Self, EnvError> {
        cfg.validate()?;
        reward.weights.validate().map_err(EnvError::Config)?;
        reward.params.validate().map_err(EnvError::Config)?;
        if controller.n_muscles() != cfg.n_muscles() {
            return Err(EnvError::Config(format!(
                "controller drives {} muscles, model has {}",
                controller.n_muscles(),
                cfg.n_muscles()
            )));
        }
        let mut actuators = Vec::with_capacity(cfg.n_muscles());
        for side in [[HIP_R, KNEE_R, ANKLE_R], [HIP_L, KNEE_L, ANKLE_L]] {
            for m in &cfg.leg_muscles {
                let dof = |j: &str| match j {
                    "hip" => side[0],
                    "knee" => side[1],
                    _ => side[2],
                };
                actuators.push(Actuator {
                    params: m.clone(),
                    dofs: m.moment_arms.iter().map(|(j, _)| dof(j)).collect(),
                    arms: m.moment_arms.iter().map(|(_, r)| *r).collect(),
                });
            }
        }
        for m in &cfg.trunk_muscles {
            actuators.push(Actuator {
                params: m.clone(),
                dofs: vec![LUMBAR; m.moment_arms.len()],
                arms: m.moment_arms.iter().map(|(_, r)| *r).collect(),
            });
        }
        let jl = &cfg.joint_limits;
        let mut limits = [[f64::NEG_INFINITY, f64::INFINITY]; NQ];
        limits[LUMBAR] = jl.lumbar;
        for side in [[HIP_R, KNEE_R, ANKLE_R], [HIP_L, KNEE_L, ANKLE_L]] {
            limits[side[0]] = jl.hip;
            limits[side[1]] = jl.knee;
            limits[side[2]] = jl.ankle;
        }
        for l in limits.iter_mut().skip(LUMBAR) {
            *l = [l[0].to_radians(), l[1].to_radians()];
        }
        let s = &cfg.segments;
        let standing_height = s.thigh.length + s.shank.length - s.heel[1].min(s.toe[1]);
        let layout = ObsLayout::new(cfg.n_leg_muscles(), cfg.trunk_muscles.len());
        let n = cfg.n_muscles();
        let mut state = EnvState::initial([0.0; NQ], n, 0.0, ChaCha8Rng::seed_from_u64(0));
        state.done = true;
        Ok(Self {
            skeleton: Skeleton::new(&cfg.segments),
            cfg,
            controller,
            reward,
            terrain: TerrainSpec::flat(1),
            actuators,
            layout,
            limits,
            standing_height,
            state,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.cfg
    }

    pub fn controller(&self) -> &Controller {
        &self.controller
    }

    pub fn reward_config(&self) -> &RewardConfig {
        &self.reward
    }

    pub fn terrain(&self) -> &TerrainSpec {
        &self.terrain
    }

    pub fn state(&self) -> &EnvState {
        &self.state
    }

    pub fn layout(&self) -> ObsLayout {
        self.layout
    }

    pub fn obs_dim(&self) -> usize {
        self.layout.dim()
    }

    pub fn action_dim(&self) -> usize {
        self.controller.action_dim()
    }

    pub fn body_weight(&self) -> f64 {
        self.skeleton.total_mass() * self.cfg.gravity
    }

    pub fn standing_height(&self) -> f64 {
        self.standing_height
    }

    pub fn skeleton(&self) -> &Skeleton {
        &self.skeleton
    }

    /// Pose the model standing at the terrain origin with a seeded
    /// perturbation, let it settle with its joints servoed, and start a new
    /// episode. The returned observation is the policy view (mirror phase 0).
    pub fn reset(&mut self, terrain: TerrainSpec, target_speed: f64, seed: u64) -> Result<Observation, EnvError> {
        self.terrain = terrain;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = self.cfg.initial_pose;
        let noise = |rng: &mut ChaCha8Rng, half: f64| {
            if half > 0.0 {
                rng.random_range(-half..=half).to_radians()
            } else {
                0.0
            }
        };
        let mut q = [0.0; NQ];
        let base = [
            (PELVIS, 0.0),
            (LUMBAR, p.lumbar),
            (HIP_R, p.hip),
            (KNEE_R, p.knee),
            (ANKLE_R, p.ankle),
            (HIP_L, p.hip),
            (KNEE_L, p.knee),
            (ANKLE_L, p.ankle),
        ];
        for (d, deg) in base {
            q[d] = deg.to_radians() + noise(&mut rng, p.angle_noise_deg);
        }
        let mut qd = [0.0; NQ];
        for (d, _) in base.iter().skip(1) {
            qd[*d] = noise(&mut rng, p.velocity_noise_deg);
        }

        // Lift the model so its lowest contact point rests on the surface.
        let pose = self.skeleton.pose(&VecQ::from(q), &VecQ::zeros());
        let gap = self
            .contact_points(&pose)
            .map(|(_, _, _, w)| w[1] - self.terrain.height(w[0]))
            .fold(f64::INFINITY, f64::min);
        q[Y] = -gap;
        let pose = self.skeleton.pose(&VecQ::from(q), &VecQ::zeros());
        let pelvis_clearance = pose.origin[0][1] - self.terrain.height(pose.origin[0][0]);
        let torso_top = self.skeleton.point(&pose, TORSO_BODY, [0.0, self.cfg.segments.head_height]);
        if pelvis_clearance <= 0.0 || torso_top[1] <= self.terrain.height(torso_top[0]) {
            return Err(EnvError::Penetration(format!(
                "pelvis {pelvis_clearance:.3} m above ground with the initial pose"
            )));
        }

        let n = self.cfg.n_muscles();
        self.state = EnvState::initial(q, n, target_speed, rng);
        let settle = (self.cfg.settle_time / self.cfg.physics_dt()).round() as usize;
        let zeros = vec![0.0; n];
        for _ in 0..settle {
            self.substep(&zeros, Some(&q));
        }
        for d in LUMBAR..NQ {
            self.state.qd[d] += qd[d];
        }
        self.state.substeps = 0;
        if !self.is_finite() {
            self.state.done = true;
            return Err(EnvError::Diverged { step: 0, time: 0.0 });
        }
        self.refresh_fibers();
        self.state.terrain_cursor = self.terrain.tile_index(self.state.q[X]);
        Ok(self.observation())
    }

    /// Advance one control interval with the given action.
    pub fn step(&mut self, action: &[f64]) -> Result<StepResult, EnvError> {
        if self.state.done {
            return Err(EnvError::EpisodeOver);
        }
        let excitations = self.controller.apply_action(action, self.state.mirror_phase)?;
        let mut strikes = [false; 2];
        for _ in 0..self.cfg.physics_substeps {
            let before = self.state.heel_force;
            self.substep(&excitations, None);
            for (side, hit) in strikes.iter_mut().enumerate() {
                if self.heel_strike(side, before[side]) {
                    *hit = true;
                    self.state.mirror_phase = !self.state.mirror_phase;
                }
            }
            if !self.is_finite() {
                break;
            }
        }
        self.state.step += 1;
        self.state.time = self.state.step as f64 / self.cfg.control_rate;
        if !self.is_finite() {
            self.state.done = true;
            return Err(EnvError::Diverged {
                step: self.state.step,
                time: self.state.time,
            });
        }
        self.state.excitations = excitations;
        self.state.terrain_cursor = self.terrain.tile_index(self.state.q[X]);

        let fell = self.is_fallen();
        let truncated = !fell && self.state.step >= self.cfg.episode_length;
        self.state.done = fell || truncated;
        let pose = self.pose();
        let com_v = self.skeleton.com_velocity(&pose, &VecQ::from(self.state.qd));
        let activations: Vec<f64> = self.state.muscles.iter().map(|m| m.activation).collect();
        let reward = total_reward(
            &RewardInputs {
                v_x: com_v[0],
                v_z: 0.0,
                v_target: self.state.target_speed,
                head_omega: [0.0, 0.0, pose.omega[TORSO_BODY]],
                activations: &activations,
                knee_r_deg: self.state.q[KNEE_R].to_degrees(),
                knee_l_deg: self.state.q[KNEE_L].to_degrees(),
                lumbar_deg: self.state.q[LUMBAR].to_degrees(),
                fell,
            },
            &self.reward.weights,
            &self.reward.params,
        );
        Ok(StepResult {
            observation: self.observation(),
            reward,
            terminated: fell,
            truncated,
            info: StepInfo {
                heel_strike: strikes,
                com_velocity: com_v,
                time: self.state.time,
                mirror_phase: self.state.mirror_phase,
            },
        })
    }

    fn heel_strike(&mut self, side: usize, before: f64) -> bool {
        let now = self.state.heel_force[side];
        let th = self.cfg.heel_strike_threshold;
        let t = self.state.substeps as f64 * self.cfg.physics_dt();
        if now > th && before <= th && t - self.state.last_strike[side] >= self.cfg.heel_strike_refractory {
            self.state.last_strike[side] = t;
            return true;
        }
        false
    }

    pub fn pelvis_height(&self) -> f64 {
        self.state.q[Y] - self.terrain.height(self.state.q[X])
    }

    /// Absolute torso pitch, degrees.
    pub fn head_pitch_deg(&self) -> f64 {
        (self.state.q[PELVIS] + self.state.q[LUMBAR]).to_degrees()
    }

    pub fn is_fallen(&self) -> bool {
        detect_fall(
            self.pelvis_height(),
            self.head_pitch_deg(),
            self.standing_height,
            &self.cfg.fall,
        )
    }

    fn is_finite(&self) -> bool {
        self.state.q.iter().chain(&self.state.qd).all(|v| v.is_finite())
    }

    fn pose(&self) -> dynamics::Pose {
        self.skeleton.pose(&VecQ::from(self.state.q), &VecQ::from(self.state.qd))
    }

    /// (slot, side, body, world position) of the heel and toe of each foot.
    fn contact_points<'a>(&'a self, pose: &'a dynamics::Pose) -> impl Iterator<Item = (usize, usize, [f64; 2], [f64; 2])> + 'a {
        let s = &self.cfg.segments;
        (0..CONTACT_POINTS).map(move |slot| {
            let side = slot / 2;
            let local = if slot % 2 == 0 { s.heel } else { s.toe };
            (slot, side, local, self.skeleton.point(pose, FOOT_BODY[side], local))
        })
    }

    fn refresh_fibers(&mut self) {
        let q = self.state.q;
        let qd = self.state.qd;
        for (i, act) in self.actuators.iter().enumerate() {
            let angles: Vec<f64> = act.dofs.iter().map(|&d| q[d]).collect();
            let vels: Vec<f64> = act.dofs.iter().map(|&d| qd[d]).collect();
            let a = self.state.muscles[i].activation;
            self.state.muscles[i] = MuscleState::from_kinematics(&act.params, &act.arms, &angles, &vels, a);
        }
    }

    /// One physics step: activation dynamics, muscle and passive joint
    /// torques, contact forces, then a semi-implicit Euler update in which all
    /// velocity-dependent forces are treated implicitly (linearized).
    fn substep(&mut self, excitations: &[f64], hold: Option<&[f64; NQ]>) {
        let dt = self.cfg.physics_dt();
        let st = &mut self.state;
        for ((m, &u), act) in st.muscles.iter_mut().zip(excitations).zip(&self.actuators) {
            m.activation = activation_step(u, m.activation, dt, &act.params);
        }
        let q = VecQ::from(st.q);
        let qd = VecQ::from(st.qd);
        let pose = self.skeleton.pose(&q, &qd);
        let (mass, mut tau) = self.skeleton.dynamics(&pose, self.cfg.gravity);
        let mut damp = MatQ::zeros();

        let mut moments = [0.0; NQ];
        for (i, act) in self.actuators.iter().enumerate() {
            let angles: Vec<f64> = act.dofs.iter().map(|&d| q[d]).collect();
            let vels: Vec<f64> = act.dofs.iter().map(|&d| qd[d]).collect();
            let a = st.muscles[i].activation;
            let ms = MuscleState::from_kinematics(&act.params, &act.arms, &angles, &vels, a);
            let f = muscle_force(&ms, a, &act.params);
            st.muscles[i] = ms;
            st.forces[i] = f;
            let p = &act.params;
            let c = p.max_isometric_force * a * force_length(ms.fiber_length_norm)
                * -force_velocity_slope(ms.fiber_velocity_norm)
                / (p.optimal_fiber_length * p.max_contraction_velocity);
            for (&d1, &r1) in act.dofs.iter().zip(&act.arms) {
                moments[d1] += r1 * f;
                for (&d2, &r2) in act.dofs.iter().zip(&act.arms) {
                    damp[(d1, d2)] += c * r1 * r2;
                }
            }
        }
        st.muscle_moments = moments;
        for d in LUMBAR..NQ {
            tau[d] += moments[d];
        }

        let jl = &self.cfg.joint_limits;
        for d in LUMBAR..NQ {
            let mut t = -self.cfg.joint_damping * qd[d];
            let mut c = self.cfg.joint_damping;
            let [lo, hi] = self.limits[d];
            let excess = if q[d] < lo {
                lo - q[d]
            } else if q[d] > hi {
                hi - q[d]
            } else {
                0.0
            };
            if excess != 0.0 {
                t += jl.stiffness * excess - jl.damping * qd[d];
                c += jl.damping;
            }
            if let Some(target) = hold {
                t += SETTLE_KP * (target[d] - q[d]) - SETTLE_KD * qd[d];
                c += SETTLE_KD;
            }
            tau[d] += t;
            damp[(d, d)] += c;
        }

        let cp = self.cfg.contact;
        let mut grf = [[0.0; 2]; 2];
        let mut heel = [0.0; 2];
        let s = &self.cfg.segments;
        for slot in 0..CONTACT_POINTS {
            let side = slot / 2;
            let local = if slot % 2 == 0 { s.heel } else { s.toe };
            let w = self.skeleton.point(&pose, FOOT_BODY[side], local);
            let slope = self.terrain.slope(w[0]);
            let (sn, cs) = slope.sin_cos();
            let n = SVector::<f64, 2>::new(-sn, cs);
            let tdir = SVector::<f64, 2>::new(cs, sn);
            let depth = (self.terrain.height(w[0]) - w[1]) * cs;
            if depth <= 0.0 {
                st.anchors[slot] = None;
                continue;
            }
            let j = self.skeleton.jacobian(&pose, FOOT_BODY[side], w);
            let v = j * qd;
            let fn_ = cp.stiffness * depth - cp.damping * v.dot(&n);
            if fn_ <= 0.0 {
                st.anchors[slot] = None;
                continue;
            }
            let jn = j.transpose() * n;
            damp += cp.damping * jn * jn.transpose();
            let anchor = *st.anchors[slot].get_or_insert(w);
            let slip = (w[0] - anchor[0]) * tdir[0] + (w[1] - anchor[1]) * tdir[1];
            let mut ft = -cp.tangential_stiffness * slip - cp.tangential_damping * v.dot(&tdir);
            let cap = cp.friction * fn_;
            if ft.abs() > cap {
                ft = cap * ft.signum();
                // Drag the anchor so the spring alone carries the friction limit.
                let s_new = -ft / cp.tangential_stiffness;
                st.anchors[slot] = Some([w[0] - s_new * tdir[0], w[1] - s_new * tdir[1]]);
            } else {
                let jt = j.transpose() * tdir;
                damp += cp.tangential_damping * jt * jt.transpose();
            }
            let force = n * fn_ + tdir * ft;
            tau += j.transpose() * force;
            grf[side][0] += force[0];
            grf[side][1] += force[1];
            if slot % 2 == 0 {
                heel[side] = force[1];
            }
        }
        st.grf = grf;
        st.heel_force = heel;

        let a = mass + damp * dt;
        let dqd = match a.cholesky() {
            Some(ch) => ch.solve(&(tau * dt)),
            None => VecQ::repeat(f64::NAN),
        };
        let qd_new = qd + dqd;
        let q_new = q + qd_new * dt;
        st.qd = qd_new.into();
        st.q = q_new.into();
        st.substeps += 1;
    }

    /// Observation as stored in the state, before any mirroring.
    pub fn raw_observation(&self) -> Observation {
        let st = &self.state;
        let l = self.layout;
        let mut v = vec![0.0; l.dim()];
        for (i, (m, act)) in st.muscles.iter().zip(&self.actuators).enumerate() {
            v[l.fiber_length().start + i] = m.fiber_length_norm;
            v[l.fiber_velocity().start + i] = m.fiber_velocity_norm;
            v[l.force().start + i] = st.forces[i] / act.params.max_isometric_force;
            v[l.excitation().start + i] = st.excitations[i];
            v[l.activation().start + i] = m.activation;
        }
        let pose = self.pose();
        let pitch = pose.angle[TORSO_BODY];
        let hq = l.head_quat().start;
        v[hq] = (pitch / 2.0).cos();
        v[hq + 3] = (pitch / 2.0).sin();
        v[l.head_omega().start + 2] = pose.omega[TORSO_BODY];
        for side in 0..2 {
            let f = pose.origin[FOOT_BODY[side]];
            let o = l.feet().start + 3 * side;
            v[o] = f[0] - st.q[X];
            v[o + 1] = f[1] - st.q[Y];
            let g = l.grf().start + 3 * side;
            v[g] = st.grf[side][0] / self.body_weight().max(f64::MIN_POSITIVE);
            v[g + 1] = st.grf[side][1] / self.body_weight().max(f64::MIN_POSITIVE);
        }
        let qa = l.joint_angles().start;
        let qv = l.joint_velocities().start;
        for d in PELVIS..NQ {
            v[qa + d] = st.q[d];
            v[qv + d] = st.qd[d];
        }
        let cv = self.skeleton.com_velocity(&pose, &VecQ::from(st.qd));
        v[l.com_velocity().start] = cv[0];
        v[l.com_velocity().start + 1] = cv[1];
        v[l.target_speed()] = st.target_speed;
        Observation {
            values: v,
            layout: l,
            mirrored: false,
        }
    }

    /// Observation as seen by the policy: sided blocks are swapped while the
    /// mirror phase is active, matching the swap applied to actions.
    pub fn observation(&self) -> Observation {
        let mut o = self.raw_observation();
        if self.state.mirror_phase {
            self.layout.mirror(&mut o.values);
            o.mirrored = true;
        }
        o
    }

    /// Kinetic, gravitational and stored elastic energy (muscle passive
    /// elements and joint-limit springs), J.
    pub fn mechanical_energy(&self) -> f64 {
        let q = VecQ::from(self.state.q);
        let qd = VecQ::from(self.state.qd);
        let pose = self.skeleton.pose(&q, &qd);
        let g = self.cfg.gravity;
        let mut e = self.skeleton.kinetic_energy(&pose, &qd, g) + self.skeleton.potential_energy(&pose, g);
        for act in &self.actuators {
            let angles: Vec<f64> = act.dofs.iter().map(|&d| q[d]).collect();
            let ms = MuscleState::from_kinematics(&act.params, &act.arms, &angles, &angles, 0.0);
            e += passive_energy(ms.fiber_length_norm, &act.params);
        }
        for d in LUMBAR..NQ {
            let [lo, hi] = self.limits[d];
            let excess = (lo - q[d]).max(0.0) + (q[d] - hi).max(0.0);
            e += 0.5 * self.cfg.joint_limits.stiffness * excess * excess;
        }
        e
    }

    /// Overwrite the generalized state (testing and replay tools).
    pub fn set_generalized_state(&mut self, q: [f64; NQ], qd: [f64; NQ]) {
        self.state.q = q;
        self.state.qd = qd;
        self.state.anchors = [None; CONTACT_POINTS];
        self.refresh_fibers();
    }

    /// Joint angles in degrees keyed by coordinate name (rotational only).
    pub fn joint_angles_deg(&self) -> Vec<(&'static str, f64)> {
        (PELVIS..NQ)
            .map(|d| (dynamics::COORD_NAMES[d], self.state.q[d].to_degrees()))
            .collect()
    }
}

#[cfg(test)]
mod tests;
