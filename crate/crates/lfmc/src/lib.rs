//! Planar legged locomotion: simulator, PPO trainer and evaluation harness
//! for studying how motion-control frequency affects learned locomotion.
//!
//! The crate simulates a sagittal-plane quadruped analog (floating base plus
//! two 2-joint legs, 7 generalized DoF) on procedurally generated heightfield
//! terrain, trains joint-position policies with PPO at control frequencies
//! from 5 to 200 Hz under frequency-consistent hyperparameter scaling, and
//! ships the analysis battery used to compare those policies: success rates,
//! actuation-latency tolerance, gait phase extraction, policy Jacobian
//! saliency, a PD setpoint toy study and velocity-tracking reports.
//!
//! Module map:
//! - [`sim`]: rigid-body dynamics, penalty contacts, terrain generation.
//! - [`actuation`]: PD impedance tracker, command latency, actuator lag.
//! - [`env`]: the MDP wrapper (observations, rewards, termination).
//! - [`policy`]: MLP networks with hand-rolled reverse-mode gradients.
//! - [`train`]: PPO, GAE, frequency-consistent hyperparameter derivation.
//! - [`eval`]: the evaluation battery.
//! - [`config`]: plain-text run configuration files.
//! - [`checkpoint`]: the `LFMC-POLICY v1` network serialization format.

// `!(v > 0.0)` style checks are load-bearing: they reject NaN where the
// suggested rewrite would wave it through. Index loops over the fixed-size
// joint and link arrays stay as-is for symmetry with the math they mirror.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

pub mod actuation;
pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod csvio;
pub mod env;
pub mod error;
pub mod eval;
pub mod policy;
pub mod seed;
pub mod sim;
pub mod train;

pub use error::{Error, Result};
