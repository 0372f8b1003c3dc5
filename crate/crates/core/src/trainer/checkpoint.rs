//! Versioned binary checkpoints: magic, format version, a JSON header with
//! layer shapes and scalars, then every array as little-endian f64.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use serde::{Deserialize, Serialize};

use crate::env::controller::ControllerMode;

use super::nn::{Adam, Mlp};
use super::norm::RunningNorm;
use super::sac::Sac;
use super::TrainError;

pub const MAGIC: &[u8; 4] = b"SWCK";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub agent: Sac,
    pub norm: RunningNorm,
    pub step: u64,
    pub episode: u64,
    pub seed: u64,
    pub mode: ControllerMode,
    /// Mean deterministic evaluation return when the checkpoint was taken.
    pub eval_return: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Header {
    actor_sizes: Vec<usize>,
    q_sizes: Vec<usize>,
    log_alpha: f64,
    target_entropy: f64,
    gamma: f64,
    tau: f64,
    adam_t: [u64; 4],
    norm_count: u64,
    step: u64,
    episode: u64,
    seed: u64,
    mode: ControllerMode,
    eval_return: Option<f64>,
}

fn zero_net(sizes: &[usize]) -> Mlp {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
    Mlp::new(sizes, &mut rng)
}

impl Checkpoint {
    fn optimizers(&self) -> [&Adam; 4] {
        let a = &self.agent;
        [&a.opt_actor, &a.opt_q1, &a.opt_q2, &a.opt_alpha]
    }

    pub fn save(&self, path: &Path) -> Result<(), TrainError> {
        let io = |e: std::io::Error| TrainError::Checkpoint(format!("{}: {e}", path.display()));
        let a = &self.agent;
        let header = Header {
            actor_sizes: a.actor.sizes(),
            q_sizes: a.q1.sizes(),
            log_alpha: a.log_alpha,
            target_entropy: a.target_entropy,
            gamma: a.gamma,
            tau: a.tau,
            adam_t: self.optimizers().map(|o| o.t),
            norm_count: self.norm.count,
            step: self.step,
            episode: self.episode,
            seed: self.seed,
            mode: self.mode,
            eval_return: self.eval_return,
        };
        let json = serde_json::to_vec(&header).map_err(|e| TrainError::Checkpoint(e.to_string()))?;
        let mut w = BufWriter::new(File::create(path).map_err(io)?);
        w.write_all(MAGIC).map_err(io)?;
        w.write_u32::<LittleEndian>(VERSION).map_err(io)?;
        w.write_u64::<LittleEndian>(json.len() as u64).map_err(io)?;
        w.write_all(&json).map_err(io)?;
        let mut put = |v: &[f64]| -> Result<(), TrainError> {
            for &x in v {
                w.write_f64::<LittleEndian>(x).map_err(io)?;
            }
            Ok(())
        };
        for net in [&a.actor, &a.q1, &a.q2, &a.q1_target, &a.q2_target] {
            put(&net.flat())?;
        }
        for o in self.optimizers() {
            put(&o.m)?;
            put(&o.v)?;
        }
        put(&self.norm.mean)?;
        put(&self.norm.m2)?;
        w.flush().map_err(io)
    }

    pub fn load(path: &Path) -> Result<Self, TrainError> {
        let err = |m: String| TrainError::Checkpoint(format!("{}: {m}", path.display()));
        let io = |e: std::io::Error| err(e.to_string());
        let mut r = BufReader::new(File::open(path).map_err(io)?);
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(io)?;
        if &magic != MAGIC {
            return Err(err("not a checkpoint file".into()));
        }
        let version = r.read_u32::<LittleEndian>().map_err(io)?;
        if version != VERSION {
            return Err(err(format!("unsupported checkpoint version {version}")));
        }
        let len = r.read_u64::<LittleEndian>().map_err(io)? as usize;
        let mut json = vec![0u8; len];
        r.read_exact(&mut json).map_err(io)?;
        let h: Header = serde_json::from_slice(&json).map_err(|e| err(e.to_string()))?;
        if h.actor_sizes.len() < 2 || h.q_sizes.len() < 2 {
            return Err(err("bad layer shapes".into()));
        }
        let mut take = |n: usize| -> Result<Vec<f64>, TrainError> {
            let mut v = vec![0.0; n];
            r.read_f64_into::<LittleEndian>(&mut v).map_err(io)?;
            Ok(v)
        };
        let net = |sizes: &[usize], take: &mut dyn FnMut(usize) -> Result<Vec<f64>, TrainError>| {
            let mut m = zero_net(sizes);
            m.set_flat(&take(m.n_params())?);
            Ok::<_, TrainError>(m)
        };
        let actor = net(&h.actor_sizes, &mut take)?;
        let q1 = net(&h.q_sizes, &mut take)?;
        let q2 = net(&h.q_sizes, &mut take)?;
        let q1_target = net(&h.q_sizes, &mut take)?;
        let q2_target = net(&h.q_sizes, &mut take)?;
        let mut opts = Vec::with_capacity(4);
        for (n, t) in [actor.n_params(), q1.n_params(), q2.n_params(), 1].into_iter().zip(h.adam_t) {
            let mut o = Adam::new(n);
            o.m = take(n)?;
            o.v = take(n)?;
            o.t = t;
            opts.push(o);
        }
        let obs_dim = h.actor_sizes[0];
        let norm = RunningNorm {
            count: h.norm_count,
            mean: take(obs_dim)?,
            m2: take(obs_dim)?,
        };
        let mut rest = Vec::new();
        r.read_to_end(&mut rest).map_err(io)?;
        if !rest.is_empty() {
            return Err(err(format!("{} trailing bytes", rest.len())));
        }
        let mut opts = opts.into_iter();
        let agent = Sac {
            actor,
            q1,
            q2,
            q1_target,
            q2_target,
            log_alpha: h.log_alpha,
            target_entropy: h.target_entropy,
            gamma: h.gamma,
            tau: h.tau,
            opt_actor: opts.next().unwrap(),
            opt_q1: opts.next().unwrap(),
            opt_q2: opts.next().unwrap(),
            opt_alpha: opts.next().unwrap(),
        };
        Ok(Self {
            agent,
            norm,
            step: h.step,
            episode: h.episode,
            seed: h.seed,
            mode: h.mode,
            eval_return: h.eval_return,
        })
    }
}
