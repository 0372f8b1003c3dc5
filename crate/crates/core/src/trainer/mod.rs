//! Speed curriculum, replay buffer and a soft actor-critic training loop.

pub mod buffer;
pub mod checkpoint;
pub mod evaluate;
pub mod nn;
pub mod norm;
pub mod sac;

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use log::{info, warn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::controller::{Controller, ControllerMode};
use crate::env::model::ModelConfig;
use crate::env::{generate_terrain, Env, EnvError, TerrainSpec};
use crate::reward::RewardConfig;
use crate::synergy::SynergyBasis;

pub use buffer::{Batch, ReplayBuffer, Transition};
pub use checkpoint::Checkpoint;
pub use evaluate::{evaluate_policy, final_strides, Condition, ConditionResult, EvalOptions, RolloutDataset};
pub use norm::RunningNorm;
pub use sac::{Sac, SacParams, UpdateStats};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error("cannot sample from an empty replay buffer")]
    EmptyBuffer,
    #[error("non-finite loss: {0}")]
    NonFinite(String),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("i/o: {0}")]
    Io(String),
}

/// Target speeds (m/s) of the curriculum: 0.7 up to 1.6, then back down.
pub const CURRICULUM_LEN: usize = 20;

/// Entry `episode_index mod 20` of [0.7, 0.8, …, 1.6, 1.6, …, 0.7].
pub fn curriculum_velocity(episode_index: u64) -> f64 {
    let k = (episode_index % CURRICULUM_LEN as u64) as usize;
    let tenths = if k < 10 { 7 + k } else { 7 + (19 - k) };
    tenths as f64 / 10.0
}

/// lr(t) = lr0·(1 − t/T), clamped at zero past the horizon.
pub fn learning_rate(lr_initial: f64, step: u64, total_steps: u64) -> f64 {
    lr_initial * (1.0 - step as f64 / total_steps as f64).max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    Desk,
    Paper,
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Desk => "desk",
            Self::Paper => "paper",
        })
    }
}

impl FromStr for Profile {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "desk" => Ok(Self::Desk),
            "paper" => Ok(Self::Paper),
            other => Err(format!("unknown profile `{other}` (expected desk or paper)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TerrainMode {
    Flat,
    /// One of `pool` pre-seeded random terrains per episode.
    Random { pool: u64, min_deg: f64, max_deg: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub profile: Profile,
    pub total_steps: u64,
    pub buffer_capacity: usize,
    pub warmup_steps: u64,
    pub batch_size: usize,
    pub lr_initial: f64,
    pub policy_hidden: Vec<usize>,
    pub q_hidden: Vec<usize>,
    pub seeds: Vec<u64>,
    pub controller_mode: ControllerMode,
    pub sac: SacParams,
    /// Environment steps between gradient phases.
    pub update_every: u64,
    /// Gradient steps per phase.
    pub gradient_steps: usize,
    /// Fixed target speed; `None` runs the curriculum.
    pub target_speed: Option<f64>,
    pub terrain: TerrainMode,
    pub terrain_tiles: usize,
    /// Steps per learning-curve window.
    pub log_interval: u64,
    pub eval_interval: u64,
    pub eval_episodes: usize,
    pub checkpoint_interval: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self::desk()
    }
}

impl TrainConfig {
    /// Small networks and a short budget on flat ground at 0.9 m/s.
    pub fn desk() -> Self {
        Self {
            profile: Profile::Desk,
            total_steps: 200_000,
            buffer_capacity: 100_000,
            warmup_steps: 5_000,
            batch_size: 64,
            lr_initial: 1e-3,
            policy_hidden: vec![64, 64],
            q_hidden: vec![64, 64],
            seeds: vec![0, 1, 2, 3, 4],
            controller_mode: ControllerMode::Synergy,
            sac: SacParams::default(),
            update_every: 4,
            gradient_steps: 1,
            target_speed: Some(0.9),
            terrain: TerrainMode::Flat,
            terrain_tiles: 50,
            log_interval: 5_000,
            eval_interval: 20_000,
            eval_episodes: 2,
            checkpoint_interval: 50_000,
        }
    }

    /// The published hyperparameters: 75M steps, 3M buffer, batch 256,
    /// three hidden layers (512, 512, 256), curriculum on random terrain.
    pub fn paper() -> Self {
        Self {
            profile: Profile::Paper,
            total_steps: 75_000_000,
            buffer_capacity: 3_000_000,
            warmup_steps: 10_000,
            batch_size: 256,
            lr_initial: 1e-3,
            policy_hidden: vec![512, 512, 256],
            q_hidden: vec![512, 512, 256],
            seeds: vec![0],
            controller_mode: ControllerMode::Synergy,
            sac: SacParams::default(),
            update_every: 1,
            gradient_steps: 1,
            target_speed: None,
            terrain: TerrainMode::Random {
                pool: 10_000,
                min_deg: -6.0,
                max_deg: 6.0,
            },
            terrain_tiles: 50,
            log_interval: 100_000,
            eval_interval: 1_000_000,
            eval_episodes: 10,
            checkpoint_interval: 5_000_000,
        }
    }

    pub fn for_profile(p: Profile) -> Self {
        match p {
            Profile::Desk => Self::desk(),
            Profile::Paper => Self::paper(),
        }
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: String| Err(TrainError::Config(m));
        if self.total_steps == 0 {
            return bad("total_steps must be positive".into());
        }
        if self.warmup_steps >= self.total_steps {
            return bad(format!(
                "warmup_steps ({}) must be below total_steps ({})",
                self.warmup_steps, self.total_steps
            ));
        }
        if self.batch_size == 0 || self.batch_size > self.buffer_capacity {
            return bad(format!(
                "batch_size ({}) must be in 1..=buffer_capacity ({})",
                self.batch_size, self.buffer_capacity
            ));
        }
        if !(self.lr_initial > 0.0 && self.lr_initial.is_finite()) {
            return bad(format!("lr_initial must be positive, got {}", self.lr_initial));
        }
        if self.policy_hidden.contains(&0) || self.q_hidden.contains(&0) {
            return bad("hidden layer widths must be positive".into());
        }
        if self.seeds.is_empty() {
            return bad("at least one seed is required".into());
        }
        if !(0.0..1.0).contains(&self.sac.gamma) || !(self.sac.tau > 0.0 && self.sac.tau <= 1.0) {
            return bad("gamma must be in [0, 1) and tau in (0, 1]".into());
        }
        if self.sac.init_alpha <= 0.0 {
            return bad("init_alpha must be positive".into());
        }
        if self.update_every == 0 || self.log_interval == 0 || self.eval_interval == 0 || self.checkpoint_interval == 0 {
            return bad("intervals must be positive".into());
        }
        if self.terrain_tiles == 0 {
            return bad("terrain_tiles must be positive".into());
        }
        if let Some(v) = self.target_speed {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("target_speed must be positive, got {v}"));
            }
        }
        if let TerrainMode::Random { pool, min_deg, max_deg } = self.terrain {
            if pool == 0 || min_deg > max_deg || min_deg < -6.0 || max_deg > 6.0 {
                return bad("random terrain needs pool > 0 and a pitch range within ±6°".into());
            }
        }
        Ok(())
    }

    pub fn from_toml_str(s: &str) -> Result<Self, TrainError> {
        let c: Self = toml::from_str(s).map_err(|e| TrainError::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn target_for_episode(&self, episode: u64) -> f64 {
        self.target_speed.unwrap_or_else(|| curriculum_velocity(episode))
    }

    fn terrain_for<R: Rng>(&self, seed: u64, rng: &mut R) -> Result<TerrainSpec, TrainError> {
        Ok(match self.terrain {
            TerrainMode::Flat => TerrainSpec::flat(self.terrain_tiles),
            TerrainMode::Random { pool, min_deg, max_deg } => {
                let index = rng.random_range(0..pool);
                generate_terrain(seed.wrapping_mul(1_000_003).wrapping_add(index), self.terrain_tiles, (min_deg, max_deg))?
            }
        })
    }
}

/// Everything needed to construct an environment instance.
#[derive(Debug, Clone)]
pub struct EnvSetup {
    pub model: ModelConfig,
    pub controller: Controller,
    pub reward: RewardConfig,
}

impl EnvSetup {
    pub fn independent(model: ModelConfig) -> Self {
        Self {
            controller: Controller::independent(&model),
            model,
            reward: RewardConfig::default(),
        }
    }

    pub fn synergy(model: ModelConfig, basis: &SynergyBasis) -> Result<Self, TrainError> {
        Ok(Self {
            controller: Controller::synergy(basis, &model)?,
            model,
            reward: RewardConfig::default(),
        })
    }

    pub fn build(&self) -> Result<Env, TrainError> {
        Ok(Env::new(self.model.clone(), self.controller.clone(), self.reward)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub step: u64,
    pub mean_return: f64,
    pub std_return: f64,
    pub episodes: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeStat {
    pub index: u64,
    /// Global step at which the episode ended.
    pub end_step: u64,
    pub length: usize,
    pub ret: f64,
    pub target_speed: f64,
    pub fell: bool,
}

#[derive(Debug, Clone)]
pub struct TrainRun {
    pub seed: u64,
    pub curve: Vec<CurvePoint>,
    pub episodes: Vec<EpisodeStat>,
    /// (step, mean deterministic return) of each evaluation.
    pub evaluations: Vec<(u64, f64)>,
    pub best: Checkpoint,
    pub last: Checkpoint,
    pub diverged_episodes: usize,
    pub out_dir: Option<PathBuf>,
}

impl TrainRun {
    /// Mean training return of episodes ending in the first and last tenth
    /// of the step budget, counted from `start_step`.
    pub fn decile_means(&self, start_step: u64, total_steps: u64) -> (Option<f64>, Option<f64>) {
        let span = total_steps.saturating_sub(start_step) as f64;
        let mean = |lo: f64, hi: f64| {
            let r: Vec<f64> = self
                .episodes
                .iter()
                .filter(|e| {
                    let f = (e.end_step - start_step) as f64 / span;
                    f > lo && f <= hi
                })
                .map(|e| e.ret)
                .collect();
            (!r.is_empty()).then(|| r.iter().sum::<f64>() / r.len() as f64)
        };
        (mean(0.0, 0.1), mean(0.9, 1.0))
    }
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
    (m, var.sqrt())
}

/// Maps a policy action in [-1, 1] to excitations in [0, 1].
pub fn to_env_action(a: &[f64]) -> Vec<f64> {
    a.iter().map(|v| 0.5 * (v + 1.0)).collect()
}

/// Deterministic episode return with the mean action.
pub fn run_deterministic_episode(
    env: &mut Env,
    agent: &Sac,
    norm: &RunningNorm,
    terrain: TerrainSpec,
    target: f64,
    seed: u64,
    mut on_step: impl FnMut(&Env, &[f64], &crate::env::StepResult),
) -> Result<(f64, usize, bool), TrainError> {
    let mut obs = env.reset(terrain, target, seed)?;
    let (mut ret, mut len) = (0.0, 0);
    loop {
        let a = to_env_action(&agent.act_deterministic(&norm.normalize(&obs.values)));
        let r = env.step(&a)?;
        on_step(env, &a, &r);
        ret += r.reward.total;
        len += 1;
        if r.terminated || r.truncated {
            return Ok((ret, len, r.terminated));
        }
        obs = r.observation;
    }
}

/// RNG stream for one purpose, derived from the run seed and start step.
fn stream(seed: u64, start: u64, purpose: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed ^ start.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    r.set_stream(purpose);
    r
}

struct Outputs {
    dir: PathBuf,
}

impl Outputs {
    fn new(dir: &Path) -> Result<Self, TrainError> {
        fs::create_dir_all(dir.join("checkpoints")).map_err(|e| TrainError::Io(format!("{}: {e}", dir.display())))?;
        Ok(Self { dir: dir.to_path_buf() })
    }

    fn checkpoint(&self, name: &str, ck: &Checkpoint) -> Result<(), TrainError> {
        ck.save(&self.dir.join("checkpoints").join(name))
    }
}

pub fn write_curve_csv(path: &Path, curve: &[CurvePoint]) -> Result<(), TrainError> {
    let io = |e: &dyn fmt::Display| TrainError::Io(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(|e| io(&e))?;
    w.write_record(["step", "mean_return", "std_return", "episodes"]).map_err(|e| io(&e))?;
    for p in curve {
        w.write_record([
            p.step.to_string(),
            p.mean_return.to_string(),
            p.std_return.to_string(),
            p.episodes.to_string(),
        ])
        .map_err(|e| io(&e))?;
    }
    w.flush().map_err(|e| io(&e))
}

pub fn read_curve_csv(path: &Path) -> Result<Vec<CurvePoint>, TrainError> {
    let io = |e: &dyn fmt::Display| TrainError::Io(format!("{}: {e}", path.display()));
    let mut r = csv::Reader::from_path(path).map_err(|e| io(&e))?;
    r.deserialize().map(|row| row.map_err(|e| io(&e))).collect()
}

pub fn write_episodes_csv(path: &Path, episodes: &[EpisodeStat]) -> Result<(), TrainError> {
    let io = |e: &dyn fmt::Display| TrainError::Io(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(|e| io(&e))?;
    for e in episodes {
        w.serialize(e).map_err(|e| io(&e))?;
    }
    w.flush().map_err(|e| io(&e))
}

/// Trains one seed. With `resume`, the agent, normalizer and step count
/// continue from the checkpoint; the replay buffer starts empty.
pub fn train(
    cfg: &TrainConfig,
    setup: &EnvSetup,
    seed: u64,
    out_dir: Option<&Path>,
    resume: Option<Checkpoint>,
) -> Result<TrainRun, TrainError> {
    cfg.validate()?;
    let mut env = setup.build()?;
    let mut eval_env = setup.build()?;
    let (obs_dim, act_dim) = (env.obs_dim(), env.action_dim());
    let outputs = out_dir.map(Outputs::new).transpose()?;

    let (mut agent, mut norm, mut step, mut episode) = match resume {
        Some(ck) => {
            if ck.agent.obs_dim() != obs_dim || ck.agent.act_dim() != act_dim {
                return Err(TrainError::Checkpoint(format!(
                    "checkpoint dimensions {}→{} do not match environment {obs_dim}→{act_dim}",
                    ck.agent.obs_dim(),
                    ck.agent.act_dim()
                )));
            }
            (ck.agent, ck.norm, ck.step, ck.episode)
        }
        None => {
            let mut init = stream(seed, 0, 0);
            let agent = Sac::new(obs_dim, act_dim, &cfg.policy_hidden, &cfg.q_hidden, &cfg.sac, &mut init);
            (agent, RunningNorm::new(obs_dim), 0, 0)
        }
    };
    let start_step = step;
    let mut act_rng = stream(seed, start_step, 1);
    let mut sample_rng = stream(seed, start_step, 2);
    let mut reset_rng = stream(seed, start_step, 3);
    let mut terrain_rng = stream(seed, start_step, 4);

    let mut buffer = ReplayBuffer::new(cfg.buffer_capacity, obs_dim, act_dim);
    let mut curve = Vec::new();
    let mut episodes = Vec::new();
    let mut evaluations = Vec::new();
    let mut window: Vec<f64> = Vec::new();
    let mut diverged = 0;
    let snapshot = |agent: &Sac, norm: &RunningNorm, step: u64, episode: u64, eval: Option<f64>| Checkpoint {
        agent: agent.clone(),
        norm: norm.clone(),
        step,
        episode,
        seed,
        mode: setup.controller.mode,
        eval_return: eval,
    };
    let mut best: Option<Checkpoint> = None;
    let mut pending: Vec<Transition> = Vec::new();
    let mut normalized = vec![0.0; obs_dim];

    while step < cfg.total_steps {
        let target = cfg.target_for_episode(episode);
        let terrain = cfg.terrain_for(seed, &mut terrain_rng)?;
        let mut obs = env.reset(terrain, target, reset_rng.random())?.values;
        pending.clear();
        let mut ret = 0.0;
        let mut finished = None;
        while step < cfg.total_steps {
            norm.update(&obs);
            let a = if step < cfg.warmup_steps {
                (0..act_dim).map(|_| act_rng.random_range(-1.0..=1.0)).collect::<Vec<f64>>()
            } else {
                norm.normalize_into(&obs, &mut normalized);
                agent.act_stochastic(&normalized, &mut act_rng)
            };
            let result = env.step(&to_env_action(&a));
            step += 1;
            match result {
                Ok(r) => {
                    ret += r.reward.total;
                    let next = r.observation.values;
                    pending.push(Transition {
                        obs: std::mem::take(&mut obs),
                        action: a,
                        reward: r.reward.total,
                        next_obs: next.clone(),
                        done: r.terminated,
                    });
                    obs = next;
                    if r.terminated || r.truncated {
                        finished = Some(r.terminated);
                    }
                }
                Err(EnvError::Diverged { step: s, time }) => {
                    warn!("seed {seed}: episode {episode} diverged at step {s} (t = {time:.3} s); discarded");
                    diverged += 1;
                    pending.clear();
                    break;
                }
                Err(e) => return Err(e.into()),
            }

            if step >= cfg.warmup_steps && buffer.len() >= cfg.batch_size && step % cfg.update_every == 0 {
                let lr = learning_rate(cfg.lr_initial, step, cfg.total_steps);
                for _ in 0..cfg.gradient_steps {
                    let batch = buffer.sample(cfg.batch_size, &mut sample_rng, |x, o| norm.normalize_into(x, o))?;
                    agent.update(&batch, lr, &mut sample_rng).map_err(|e| match e {
                        TrainError::NonFinite(m) => TrainError::NonFinite(format!("seed {seed}, step {step}: {m}")),
                        other => other,
                    })?;
                }
            }
            if step % cfg.log_interval == 0 && !window.is_empty() {
                let (m, s) = mean_std(&window);
                curve.push(CurvePoint {
                    step,
                    mean_return: m,
                    std_return: s,
                    episodes: window.len(),
                });
                info!("seed {seed}: step {step} mean return {m:.2} over {} episodes", window.len());
                window.clear();
            }
            if step % cfg.eval_interval == 0 && step > cfg.warmup_steps {
                let mut rets = Vec::with_capacity(cfg.eval_episodes);
                for i in 0..cfg.eval_episodes {
                    let target = cfg.target_for_episode(i as u64 * 7);
                    let terrain = cfg.terrain_for(seed, &mut stream(seed, i as u64, 5))?;
                    match run_deterministic_episode(&mut eval_env, &agent, &norm, terrain, target, 10_000 + i as u64, |_, _, _| {}) {
                        Ok((r, _, _)) => rets.push(r),
                        Err(TrainError::Env(EnvError::Diverged { .. })) => warn!("seed {seed}: evaluation episode {i} diverged"),
                        Err(e) => return Err(e),
                    }
                }
                if !rets.is_empty() {
                    let (m, _) = mean_std(&rets);
                    evaluations.push((step, m));
                    if best.as_ref().and_then(|b| b.eval_return).is_none_or(|b| m > b) {
                        let ck = snapshot(&agent, &norm, step, episode, Some(m));
                        if let Some(o) = &outputs {
                            o.checkpoint("best.ckpt", &ck)?;
                        }
                        best = Some(ck);
                    }
                }
            }
            if step % cfg.checkpoint_interval == 0 {
                if let Some(o) = &outputs {
                    o.checkpoint(&format!("step_{step:010}.ckpt"), &snapshot(&agent, &norm, step, episode, None))?;
                }
            }
            if finished.is_some() {
                break;
            }
        }
        if let Some(fell) = finished {
            for t in pending.drain(..) {
                buffer.push(t);
            }
            episodes.push(EpisodeStat {
                index: episode,
                end_step: step,
                length: env.state().step,
                ret,
                target_speed: target,
                fell,
            });
            window.push(ret);
        }
        episode += 1;
    }

    let last = snapshot(&agent, &norm, step, episode, evaluations.last().map(|e| e.1));
    let best = best.unwrap_or_else(|| last.clone());
    if let Some(o) = &outputs {
        o.checkpoint("final.ckpt", &last)?;
        if !o.dir.join("checkpoints/best.ckpt").exists() {
            o.checkpoint("best.ckpt", &best)?;
        }
        write_curve_csv(&o.dir.join("learning_curve.csv"), &curve)?;
        write_episodes_csv(&o.dir.join("episodes.csv"), &episodes)?;
    }
    Ok(TrainRun {
        seed,
        curve,
        episodes,
        evaluations,
        best,
        last,
        diverged_episodes: diverged,
        out_dir: outputs.map(|o| o.dir),
    })
}

/// Worker threads for multi-seed runs: `SYNWALK_THREADS`, else the number
/// of available cores.
pub fn thread_count() -> usize {
    std::env::var("SYNWALK_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Trains every configured seed, up to `threads` at a time. Results are in
/// seed order and do not depend on scheduling.
pub fn train_seeds(
    cfg: &TrainConfig,
    setup: &EnvSetup,
    out_dir: Option<&Path>,
    threads: usize,
) -> Vec<Result<TrainRun, TrainError>> {
    let seeds = &cfg.seeds;
    let mut results: Vec<Option<Result<TrainRun, TrainError>>> = (0..seeds.len()).map(|_| None).collect();
    for (chunk_seeds, chunk_out) in seeds.chunks(threads.max(1)).zip(results.chunks_mut(threads.max(1))) {
        std::thread::scope(|s| {
            let handles: Vec<_> = chunk_seeds
                .iter()
                .map(|&seed| {
                    let dir = out_dir.map(|d| d.join(format!("seed_{seed}")));
                    s.spawn(move || train(cfg, setup, seed, dir.as_deref(), None))
                })
                .collect();
            for (slot, h) in chunk_out.iter_mut().zip(handles) {
                *slot = Some(h.join().unwrap_or_else(|_| Err(TrainError::Config("training thread panicked".into()))));
            }
        });
    }
    results.into_iter().map(|r| r.expect("every seed ran")).collect()
}
