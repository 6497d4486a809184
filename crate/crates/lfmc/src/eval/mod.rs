//! Evaluation battery: success rates, latency tolerance sweeps, gait
//! structure, policy input saliency, a PD setpoint toy study, velocity
//! tracking reports and ablation tables.
//!
//! Every analysis is a deterministic function of (policy, config, seed).
//! Rollout RNG streams and generated terrain surfaces derive from the
//! analysis seed alone, so reruns reproduce reports bit for bit and the
//! same seed can be replayed against different policies for a fair
//! comparison.

pub mod ablation;
pub mod gait;
pub mod latency;
pub mod pd_study;
pub mod saliency;
pub mod success;
pub mod tracking;

pub use ablation::{ablation_table, AblationCell, AblationTable, GridPolicy};
pub use gait::{gait_sequence, intervals_from_flags, FootGait, GaitReport};
pub use latency::{latency_limit, LatencyLevel, LatencyOptions, LatencyReport};
pub use pd_study::{pd_toy_study, PdStudyConfig, PdStudyReport};
pub use saliency::{jacobian_saliency, observation_blocks, Aggregation, SaliencyReport};
pub use success::{success_rate, SuccessReport};
pub use tracking::{velocity_tracking, TrackingReport};

use crate::env::{EnvConfig, Environment, TerminationReason, TerrainSource};
use crate::policy::{ForwardCache, PolicyNetwork};
use crate::{seed, Error, Result};

/// Rollout horizon used by success-rate style analyses (s).
pub const DEFAULT_HORIZON_SECONDS: f64 = 10.0;

/// Config for rollout `index`: generated terrain draws a fresh surface per
/// rollout so statistics cover terrain variation, a fixed terrain is shared.
pub fn rollout_config(base: &EnvConfig, seed_root: u64, index: u64) -> EnvConfig {
    let mut cfg = base.clone();
    if let TerrainSource::Generate { kind, .. } = cfg.terrain {
        cfg.terrain = TerrainSource::Generate {
            kind,
            seed: seed::derive(seed_root, "terrain", index),
        };
    }
    cfg
}

/// What one deterministic evaluation rollout did.
#[derive(Debug, Clone)]
pub struct RolloutOutcome {
    pub termination: Option<TerminationReason>,
    pub steps: u64,
    pub total_reward: f64,
}

impl RolloutOutcome {
    pub fn failed(&self) -> bool {
        self.termination.is_some()
    }
}

/// Runs the policy's mean action for up to `horizon_seconds` on a freshly
/// reset environment; stops at early termination. `command`, when given,
/// overrides the episode's sampled heading command for the whole rollout.
pub fn run_policy(
    env: &mut Environment,
    policy: &PolicyNetwork,
    horizon_seconds: f64,
    command: Option<f64>,
) -> Result<RolloutOutcome> {
    if policy.obs_dim() != env.obs_dim() {
        return Err(Error::Config(format!(
            "policy expects {} observation dims, environment produces {}",
            policy.obs_dim(),
            env.obs_dim()
        )));
    }
    if let Some(c) = command {
        env.set_command(c);
    }
    let steps = (horizon_seconds * env.config().control_freq).round() as u64;
    let mut obs = env.observation();
    let mut cache = ForwardCache::default();
    let mut out = RolloutOutcome {
        termination: None,
        steps: 0,
        total_reward: 0.0,
    };
    for _ in 0..steps {
        let action = policy.mean(&obs, &mut cache);
        let step = env.step(&action)?;
        out.steps += 1;
        out.total_reward += step.reward;
        obs = step.observation;
        if step.done {
            out.termination = step.reason;
            break;
        }
    }
    Ok(out)
}

#[cfg(test)]
pub(crate) mod test_support {
    use super::*;
    use crate::env::RewardConfig;
    use crate::sim::TerrainKind;

    /// Flat, randomization-free environment at the given control frequency.
    pub fn quiet_config(control_freq: f64) -> EnvConfig {
        EnvConfig {
            control_freq,
            terrain: TerrainSource::Generate {
                kind: TerrainKind::Flat,
                seed: 0,
            },
            domain_rand: None,
            init_joint_jitter: 0.0,
            init_height_jitter: 0.0,
            command_range: [0.0, 0.0],
            reward: RewardConfig::default(),
            ..EnvConfig::default()
        }
    }

    /// Policy that stands still: fresh network, output pinned to the
    /// nominal pose.
    pub fn standing_policy(cfg: &EnvConfig) -> PolicyNetwork {
        let mut rng = crate::seed::rng(77, "eval-test", 0);
        let mut p =
            PolicyNetwork::init(cfg.obs.dim(), cfg.model.nominal_pose, 0.2, &mut rng).unwrap();
        p.net.params_mut().fill(0.0);
        p
    }
}

#[cfg(test)]
mod tests {
    use super::test_support::*;
    use super::*;

    #[test]
    fn standing_policy_survives_the_horizon() {
        let cfg = quiet_config(10.0);
        let policy = standing_policy(&cfg);
        let mut env = Environment::new(cfg, 5, 0).unwrap();
        let out = run_policy(&mut env, &policy, 2.0, Some(0.0)).unwrap();
        assert!(!out.failed(), "terminated: {:?}", out.termination);
        assert_eq!(out.steps, 20);
    }

    #[test]
    fn observation_dimension_mismatch_is_rejected() {
        let cfg = quiet_config(10.0);
        let mut env = Environment::new(cfg.clone(), 5, 0).unwrap();
        let mut rng = crate::seed::rng(1, "eval-test", 1);
        let wrong =
            PolicyNetwork::init(cfg.obs.dim() + 3, cfg.model.nominal_pose, 0.2, &mut rng).unwrap();
        assert!(run_policy(&mut env, &wrong, 1.0, None).is_err());
    }

    #[test]
    fn generated_terrain_differs_per_rollout_index() {
        let mut cfg = quiet_config(10.0);
        cfg.terrain = TerrainSource::Generate {
            kind: crate::sim::TerrainKind::Perlin,
            seed: 3,
        };
        let a = rollout_config(&cfg, 9, 0);
        let b = rollout_config(&cfg, 9, 1);
        let (TerrainSource::Generate { seed: sa, .. }, TerrainSource::Generate { seed: sb, .. }) =
            (&a.terrain, &b.terrain)
        else {
            panic!("generate source expected");
        };
        assert_ne!(sa, sb);
    }
}
