//! Synergy-constrained reinforcement learning for a muscle-driven planar biped.
//!
//! The crate is organised as a pipeline:
//!
//! - [`gaitdata`]: ingest, filter and segment gait recordings into normalized cycles.
//! - [`synergy`]: non-negative matrix factorization of activation matrices and
//!   expansion of synergy activations back into muscle excitations.
//! - [`muscle`]: rigid-tendon Hill-type muscle dynamics.
//! - [`env`]: the planar biped walking environment (terrain, contact, mirroring,
//!   observations).
//! - [`reward`]: the four-component locomotion reward.
//! - [`trainer`]: speed curriculum, replay buffer and a soft actor-critic learner.
//! - [`evalbench`]: RMSE-ratio and correlation benchmarking against reference gait data.
//! - [`synth`]: deterministic generators for the bundled demonstration datasets.

pub mod env;
pub mod evalbench;
pub mod gaitdata;
pub mod muscle;
pub mod reward;
pub mod synergy;
pub mod synth;
pub mod trainer;
