//! PPO training with frequency-consistent hyperparameter derivation.
//!
//! Two quantities are derived, never set directly: the discount factor
//! follows from holding the reward half-life fixed in wall-clock seconds
//! (`gamma^(f_t * n_half) = 0.5`), and the environment count follows from
//! holding the batch size fixed in control steps (`n_env = b_s / (f_t * N)`).
//! Together they make runs at different control frequencies comparable.

pub mod gae;
pub mod ppo;
pub mod rollout;

use crate::env::EnvConfig;
use crate::policy::{PolicyNetwork, ValueNetwork};
use crate::{seed, Error, Result};

pub use gae::{gae, normalize_advantages};
pub use ppo::{ppo_update, Adam, Batch, PpoDiagnostics, PpoSettings};
pub use rollout::{Fleet, RolloutStats, Trajectory};

/// Discount factor giving reward weight a half-life of `n_half` seconds at
/// control frequency `f_t`.
pub fn discount_for(f_t: f64, n_half: f64) -> Result<f64> {
    if !(f_t > 0.0) || !(n_half > 0.0) {
        return Err(Error::Config(
            "discount derivation needs f_t > 0 and n_half > 0".into(),
        ));
    }
    Ok((0.5f64.ln() / (f_t * n_half)).exp())
}

/// Control steps over which `gamma` halves the reward weight.
pub fn half_life_steps(gamma: f64) -> f64 {
    0.5f64.ln() / gamma.ln()
}

/// Environment count that fills `batch_steps` control steps when every
/// environment contributes one `episode_seconds` episode at `f_t`.
pub fn n_envs_for(batch_steps: usize, f_t: f64, episode_seconds: f64) -> Result<usize> {
    if !(f_t > 0.0) || !(episode_seconds > 0.0) {
        return Err(Error::Config(
            "n_env derivation needs f_t > 0 and episode length > 0".into(),
        ));
    }
    let steps = f_t * episode_seconds;
    if (steps - steps.round()).abs() > 1e-9 || steps.round() < 1.0 {
        return Err(Error::Config(format!(
            "episode length {episode_seconds} s at {f_t} Hz is {steps} control steps; must be a whole number"
        )));
    }
    let per_episode = steps.round() as usize;
    if batch_steps == 0 || !batch_steps.is_multiple_of(per_episode) {
        let lower = (batch_steps / per_episode) * per_episode;
        let upper = lower + per_episode;
        let nearest = if lower >= per_episode && batch_steps - lower <= upper - batch_steps {
            lower
        } else {
            upper
        };
        return Err(Error::Config(format!(
            "batch_steps {batch_steps} is not a multiple of f_t*N = {per_episode}; nearest valid value is {nearest}"
        )));
    }
    Ok(batch_steps / per_episode)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub env: EnvConfig,
    /// Reward half-life in seconds; gamma is derived from it.
    pub half_life: f64,
    /// Episode length N in seconds.
    pub episode_seconds: f64,
    /// Batch size in control steps per iteration; n_env is derived from it.
    pub batch_steps: usize,
    pub gae_lambda: f64,
    pub clip_epsilon: f64,
    pub epochs: usize,
    pub minibatches: usize,
    pub learning_rate: f64,
    pub entropy_coef: f64,
    pub max_grad_norm: f64,
    pub iterations: usize,
    /// Initial action standard deviation (rad).
    pub init_std: f64,
    pub seed: u64,
    pub workers: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            env: EnvConfig::default(),
            half_life: 3.0,
            episode_seconds: 1.0,
            batch_steps: 4800,
            gae_lambda: 0.95,
            clip_epsilon: 0.2,
            epochs: 4,
            minibatches: 4,
            learning_rate: 3e-4,
            entropy_coef: 0.005,
            max_grad_norm: 1.0,
            iterations: 300,
            init_std: 0.25,
            seed: 0,
            workers: 1,
        }
    }
}

impl TrainConfig {
    pub fn gamma(&self) -> Result<f64> {
        discount_for(self.env.control_freq, self.half_life)
    }

    pub fn n_envs(&self) -> Result<usize> {
        n_envs_for(
            self.batch_steps,
            self.env.control_freq,
            self.episode_seconds,
        )
    }

    /// Control steps per environment per iteration (= one episode horizon).
    pub fn steps_per_env(&self) -> usize {
        (self.env.control_freq * self.episode_seconds).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        self.env.validate()?;
        self.gamma()?;
        self.n_envs()?;
        if !(0.0..=1.0).contains(&self.gae_lambda) {
            return Err(Error::Config("gae_lambda must lie in [0, 1]".into()));
        }
        if !(self.clip_epsilon > 0.0) || self.clip_epsilon >= 1.0 {
            return Err(Error::Config("clip_epsilon must lie in (0, 1)".into()));
        }
        if self.epochs == 0 || self.minibatches == 0 || self.iterations == 0 {
            return Err(Error::Config(
                "epochs, minibatches and iterations must be >= 1".into(),
            ));
        }
        if !(self.learning_rate > 0.0) || !(self.max_grad_norm > 0.0) || !(self.init_std > 0.0) {
            return Err(Error::Config(
                "learning_rate, max_grad_norm and init_std must be > 0".into(),
            ));
        }
        if !(self.entropy_coef >= 0.0) {
            return Err(Error::Config("entropy_coef must be >= 0".into()));
        }
        if self.workers == 0 {
            return Err(Error::Config("workers must be >= 1".into()));
        }
        Ok(())
    }
}

/// Per-iteration summary row of the returns curve.
#[derive(Debug, Clone)]
pub struct IterationLog {
    pub iteration: usize,
    /// Mean return over episodes that ended this iteration.
    pub mean_return: f64,
    pub mean_episode_length: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub approx_kl: f64,
    pub clip_fraction: f64,
    /// Early terminations this iteration, `TerminationReason` order.
    pub terminations: [usize; 4],
    pub truncations: usize,
}

pub struct TrainOutput {
    pub policy: PolicyNetwork,
    pub value: ValueNetwork,
    pub curve: Vec<IterationLog>,
    /// Runtime fault that halted the run, if any. The networks above hold
    /// the last consistent state so callers can still checkpoint them.
    pub fault: Option<Error>,
}

/// Full training run with default (run-to-completion) progress handling.
pub fn train(cfg: &TrainConfig) -> Result<TrainOutput> {
    train_with(cfg, |_, _, _| true)
}

/// Training run invoking `on_iteration` after every update; return `false`
/// to stop early (the output still carries everything up to that point).
///
/// `Err` means the configuration was unusable and nothing ran. Faults during
/// the run (environment failure, non-finite loss) halt it but come back in
/// [`TrainOutput::fault`] alongside the surviving networks.
pub fn train_with(
    cfg: &TrainConfig,
    mut on_iteration: impl FnMut(&IterationLog, &PolicyNetwork, &ValueNetwork) -> bool,
) -> Result<TrainOutput> {
    cfg.validate()?;
    let gamma = cfg.gamma()?;
    let n_env = cfg.n_envs()?;
    let steps_per_env = cfg.steps_per_env();

    let mut init_rng = seed::rng(cfg.seed, "init", 0);
    let obs_dim = cfg.env.obs.dim();
    let mut policy = PolicyNetwork::init(
        obs_dim,
        cfg.env.model.nominal_pose,
        cfg.init_std,
        &mut init_rng,
    )?;
    let mut value = ValueNetwork::init(obs_dim, &mut init_rng)?;
    let mut opt_policy = Adam::new(cfg.learning_rate, policy.net.params().len());
    let mut opt_log_std = Adam::new(cfg.learning_rate, policy.log_std.len());
    let mut opt_value = Adam::new(cfg.learning_rate, value.net.params().len());
    let settings = PpoSettings {
        clip_epsilon: cfg.clip_epsilon,
        epochs: cfg.epochs,
        minibatches: cfg.minibatches,
        entropy_coef: cfg.entropy_coef,
        max_grad_norm: cfg.max_grad_norm,
    };

    let mut fleet = Fleet::new(&cfg.env, n_env, steps_per_env, cfg.seed)?;
    let pool = if cfg.workers > 1 {
        Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(cfg.workers)
                .build()
                .map_err(|e| Error::Config(format!("worker pool: {e}")))?,
        )
    } else {
        None
    };

    let mut curve = Vec::with_capacity(cfg.iterations);
    let mut fault = None;
    for iteration in 0..cfg.iterations {
        let collected = fleet.collect(&policy, &value, steps_per_env, pool.as_ref());
        let (trajectories, stats) = match collected {
            Ok(c) => c,
            Err(e) => {
                fault = Some(e);
                break;
            }
        };

        let mut batch = Batch::default();
        for traj in trajectories {
            let (adv, ret) = gae(
                &traj.rewards,
                &traj.values,
                &traj.v_next,
                &traj.dones,
                &traj.truncs,
                gamma,
                cfg.gae_lambda,
            );
            batch.advantages.extend(adv);
            batch.returns.extend(ret);
            batch.obs.extend(traj.obs);
            batch.actions.extend(traj.actions);
            batch.log_probs.extend(traj.log_probs);
        }
        debug_assert_eq!(batch.len(), cfg.batch_steps);
        normalize_advantages(&mut batch.advantages);

        let diag = match ppo_update(
            &mut policy,
            &mut value,
            &mut opt_policy,
            &mut opt_log_std,
            &mut opt_value,
            &batch,
            &settings,
            &mut seed::rng(cfg.seed, "shuffle", iteration as u64),
        ) {
            Ok(d) => d,
            Err(e) => {
                fault = Some(e);
                break;
            }
        };

        // Statistics refresh after the update keeps collection and update
        // consistent within the iteration.
        for obs in &batch.obs {
            policy.normalizer.update(obs);
        }

        let log = IterationLog {
            iteration,
            mean_return: stats.mean_return(),
            mean_episode_length: stats.mean_length(),
            policy_loss: diag.policy_loss,
            value_loss: diag.value_loss,
            entropy: diag.entropy,
            approx_kl: diag.approx_kl,
            clip_fraction: diag.clip_fraction,
            terminations: stats.terminations,
            truncations: stats.truncations,
        };
        let go_on = on_iteration(&log, &policy, &value);
        curve.push(log);
        if !go_on {
            break;
        }
    }
    Ok(TrainOutput {
        policy,
        value,
        curve,
        fault,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gamma_reproduces_reference_values() {
        assert_relative_eq!(discount_for(5.0, 3.0).unwrap(), 0.954841, epsilon = 1e-6);
        assert_relative_eq!(discount_for(10.0, 3.0).unwrap(), 0.977159, epsilon = 1e-6);
        assert_relative_eq!(discount_for(200.0, 3.0).unwrap(), 0.998845, epsilon = 1e-6);
    }

    #[test]
    fn gamma_halves_after_the_half_life_exactly() {
        for f in [5.0, 8.0, 10.0, 25.0, 50.0, 100.0, 200.0] {
            let g = discount_for(f, 3.0).unwrap();
            assert_relative_eq!(g.powf(f * 3.0), 0.5, epsilon = 1e-12);
        }
    }

    #[test]
    fn half_life_of_098_is_34_steps() {
        let steps = half_life_steps(0.98);
        assert!((steps - 34.0).abs() < 0.5, "got {steps}");
    }

    #[test]
    fn env_counts_reproduce_reference_pairs() {
        assert_eq!(n_envs_for(48_000, 200.0, 1.0).unwrap(), 240);
        assert_eq!(n_envs_for(48_000, 5.0, 1.0).unwrap(), 9600);
        assert_eq!(n_envs_for(48_000, 10.0, 1.0).unwrap(), 4800);
        for f in [5.0, 8.0, 10.0, 25.0, 50.0, 100.0, 200.0] {
            let n = n_envs_for(48_000, f, 1.0).unwrap();
            assert_eq!(n as f64 * f * 1.0, 48_000.0);
        }
    }

    #[test]
    fn indivisible_batch_suggests_nearest_valid() {
        let err = n_envs_for(48_500, 200.0, 1.0).unwrap_err().to_string();
        assert!(err.contains("48400"), "suggestion missing: {err}");
        let err = n_envs_for(130, 200.0, 1.0).unwrap_err().to_string();
        assert!(err.contains("200"), "round-up suggestion missing: {err}");
        assert!(discount_for(0.0, 3.0).is_err());
        assert!(n_envs_for(4800, 10.0, 0.0).is_err());
    }

    fn smoke_config() -> TrainConfig {
        TrainConfig {
            env: EnvConfig {
                control_freq: 50.0,
                ..EnvConfig::default()
            },
            batch_steps: 100,
            iterations: 2,
            minibatches: 2,
            epochs: 2,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn short_run_trains_and_is_reproducible() {
        let cfg = smoke_config();
        assert_eq!(cfg.n_envs().unwrap(), 2);
        let a = train(&cfg).unwrap();
        assert!(a.fault.is_none());
        assert_eq!(a.curve.len(), 2);
        for log in &a.curve {
            assert!(log.policy_loss.is_finite());
            assert!(log.value_loss.is_finite());
            assert!(log.entropy.is_finite());
        }
        let b = train(&cfg).unwrap();
        assert_eq!(a.policy.net.params(), b.policy.net.params());
        assert_eq!(a.value.net.params(), b.value.net.params());
        assert_eq!(a.policy.log_std, b.policy.log_std);
        let ra: Vec<f64> = a.curve.iter().map(|l| l.mean_return).collect();
        let rb: Vec<f64> = b.curve.iter().map(|l| l.mean_return).collect();
        assert_eq!(ra, rb);
    }

    #[test]
    fn early_stop_callback_truncates_the_run() {
        let cfg = TrainConfig {
            iterations: 10,
            ..smoke_config()
        };
        let out = train_with(&cfg, |log, _, _| log.iteration < 1).unwrap();
        assert_eq!(out.curve.len(), 2);
    }
}
