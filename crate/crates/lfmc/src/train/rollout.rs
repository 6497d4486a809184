//! Rollout collection across a fleet of environments.
//!
//! Each fleet slot owns one environment plus its action-sampling rng, so a
//! slot's trajectory depends only on the root seed and the slot index. Slots
//! can therefore be collected in parallel and concatenated in slot order
//! without changing any number.

use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::actuation::Setpoint;
use crate::env::{EnvConfig, Environment, TerminationReason};
use crate::policy::{gaussian, ForwardCache, PolicyNetwork, ValueNetwork};
use crate::sim::N_JOINTS;
use crate::{seed, Result};

/// One environment's transitions from one collection pass.
#[derive(Debug, Clone, Default)]
pub struct Trajectory {
    pub obs: Vec<Vec<f64>>,
    pub actions: Vec<Setpoint>,
    pub log_probs: Vec<f64>,
    pub values: Vec<f64>,
    /// Value closing each transition: 0 at terminals, critic bootstrap at
    /// truncations and at the pass end, `values[t+1]` otherwise.
    pub v_next: Vec<f64>,
    pub rewards: Vec<f64>,
    pub dones: Vec<bool>,
    pub truncs: Vec<bool>,
    pub reasons: Vec<Option<TerminationReason>>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.obs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.obs.is_empty()
    }
}

/// Episode-level numbers for the returns curve.
#[derive(Debug, Clone, Default)]
pub struct RolloutStats {
    /// Return and length of every episode that ended during the pass.
    pub episode_returns: Vec<f64>,
    pub episode_lengths: Vec<usize>,
    /// Early terminations by reason, in `TerminationReason` declaration order.
    pub terminations: [usize; 4],
    pub truncations: usize,
}

impl RolloutStats {
    fn absorb(&mut self, other: RolloutStats) {
        self.episode_returns.extend(other.episode_returns);
        self.episode_lengths.extend(other.episode_lengths);
        for i in 0..4 {
            self.terminations[i] += other.terminations[i];
        }
        self.truncations += other.truncations;
    }

    pub fn mean_return(&self) -> f64 {
        if self.episode_returns.is_empty() {
            0.0
        } else {
            self.episode_returns.iter().sum::<f64>() / self.episode_returns.len() as f64
        }
    }

    pub fn mean_length(&self) -> f64 {
        if self.episode_lengths.is_empty() {
            0.0
        } else {
            self.episode_lengths.iter().sum::<usize>() as f64 / self.episode_lengths.len() as f64
        }
    }
}

struct Slot {
    env: Environment,
    action_rng: ChaCha8Rng,
    cur_obs: Vec<f64>,
    steps_in_episode: usize,
    episode_return: f64,
}

/// A fixed set of training environments that persists across iterations;
/// episodes truncate at the horizon rather than aligning with passes.
pub struct Fleet {
    slots: Vec<Slot>,
    horizon_steps: usize,
}

impl Fleet {
    pub fn new(
        cfg: &EnvConfig,
        n_env: usize,
        horizon_steps: usize,
        root_seed: u64,
    ) -> Result<Self> {
        let mut slots = Vec::with_capacity(n_env);
        for i in 0..n_env {
            let mut env = Environment::new(cfg.clone(), root_seed, i as u64)?;
            let cur_obs = env.reset();
            slots.push(Slot {
                env,
                action_rng: seed::rng(root_seed, "action", i as u64),
                cur_obs,
                steps_in_episode: 0,
                episode_return: 0.0,
            });
        }
        Ok(Self {
            slots,
            horizon_steps,
        })
    }

    pub fn n_env(&self) -> usize {
        self.slots.len()
    }

    /// Runs every slot for `steps_per_env` control steps under the frozen
    /// policy and critic. With `pool` the slots are partitioned across
    /// threads; outputs are identical either way.
    pub fn collect(
        &mut self,
        policy: &PolicyNetwork,
        value: &ValueNetwork,
        steps_per_env: usize,
        pool: Option<&rayon::ThreadPool>,
    ) -> Result<(Vec<Trajectory>, RolloutStats)> {
        let horizon = self.horizon_steps;
        let run = |slot: &mut Slot| collect_slot(slot, policy, value, steps_per_env, horizon);
        let results: Vec<Result<(Trajectory, RolloutStats)>> = match pool {
            Some(p) => p.install(|| self.slots.par_iter_mut().map(run).collect()),
            None => self.slots.iter_mut().map(run).collect(),
        };
        let mut trajectories = Vec::with_capacity(self.slots.len());
        let mut stats = RolloutStats::default();
        for r in results {
            let (t, s) = r?;
            trajectories.push(t);
            stats.absorb(s);
        }
        Ok((trajectories, stats))
    }
}

fn collect_slot(
    slot: &mut Slot,
    policy: &PolicyNetwork,
    value: &ValueNetwork,
    steps: usize,
    horizon: usize,
) -> Result<(Trajectory, RolloutStats)> {
    let mut traj = Trajectory::default();
    let mut stats = RolloutStats::default();
    let mut cache = ForwardCache::default();
    let mut vcache = ForwardCache::default();
    let critic = |obs: &[f64], vc: &mut ForwardCache| {
        let normed = policy.normalizer.normalize(obs);
        value.value(&normed, vc)
    };
    for _ in 0..steps {
        let obs = std::mem::take(&mut slot.cur_obs);
        let normed = policy.normalizer.normalize(&obs);
        let out = policy.net.forward(&normed, &mut cache);
        let mut mean = policy.action_bias;
        for j in 0..N_JOINTS {
            mean[j] += out[j];
        }
        let a = gaussian::sample(&mean, &policy.log_std, &mut slot.action_rng);
        let action = [a[0], a[1], a[2], a[3]];
        let lp = gaussian::log_prob(&mean, &policy.log_std, &action);
        let v = value.value(&normed, &mut vcache);

        let step = slot.env.step(&action)?;
        slot.steps_in_episode += 1;
        slot.episode_return += step.reward;

        traj.obs.push(obs);
        traj.actions.push(action);
        traj.log_probs.push(lp);
        traj.values.push(v);
        traj.rewards.push(step.reward);
        traj.reasons.push(step.reason);

        if step.done {
            traj.dones.push(true);
            traj.truncs.push(false);
            traj.v_next.push(0.0);
            if let Some(reason) = step.reason {
                stats.terminations[reason as usize] += 1;
            }
            stats.episode_returns.push(slot.episode_return);
            stats.episode_lengths.push(slot.steps_in_episode);
            slot.cur_obs = slot.env.reset();
            slot.steps_in_episode = 0;
            slot.episode_return = 0.0;
        } else if slot.steps_in_episode >= horizon {
            traj.dones.push(false);
            traj.truncs.push(true);
            traj.v_next.push(critic(&step.observation, &mut vcache));
            stats.truncations += 1;
            stats.episode_returns.push(slot.episode_return);
            stats.episode_lengths.push(slot.steps_in_episode);
            slot.cur_obs = slot.env.reset();
            slot.steps_in_episode = 0;
            slot.episode_return = 0.0;
        } else {
            traj.dones.push(false);
            traj.truncs.push(false);
            traj.v_next.push(f64::NAN); // patched below
            slot.cur_obs = step.observation;
        }
    }
    // Interior closure values are the next step's critic estimate; the pass
    // end bootstraps from the live state.
    for t in 0..traj.len() {
        if traj.v_next[t].is_nan() {
            traj.v_next[t] = if t + 1 < traj.len() {
                traj.values[t + 1]
            } else {
                critic(&slot.cur_obs, &mut vcache)
            };
        }
    }
    Ok((traj, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;

    fn tiny_policy(obs_dim: usize) -> (PolicyNetwork, ValueNetwork) {
        let mut rng = seed::rng(11, "rollout-test", 0);
        let p = PolicyNetwork::init(obs_dim, [0.4, -0.8, -0.4, 0.8], 0.1, &mut rng).unwrap();
        let v = ValueNetwork::init(obs_dim, &mut rng).unwrap();
        (p, v)
    }

    #[test]
    fn collects_exact_step_counts_and_consistent_lengths() {
        let cfg = EnvConfig::default();
        let (policy, value) = tiny_policy(cfg.obs.dim());
        let mut fleet = Fleet::new(&cfg, 3, 10, 21).unwrap();
        let (trajs, stats) = fleet.collect(&policy, &value, 10, None).unwrap();
        assert_eq!(trajs.len(), 3);
        for t in &trajs {
            assert_eq!(t.len(), 10);
            assert_eq!(t.actions.len(), 10);
            assert_eq!(t.v_next.len(), 10);
            assert!(t.v_next.iter().all(|v| v.is_finite()));
        }
        // 10-step horizon over a 10-step pass: each env closes one episode
        // per pass, by truncation unless it fell.
        assert_eq!(stats.episode_returns.len(), 3);
    }

    #[test]
    fn truncation_is_flagged_not_terminal() {
        let cfg = EnvConfig {
            command_range: [0.0, 0.0],
            init_joint_jitter: 0.0,
            init_height_jitter: 0.0,
            ..EnvConfig::default()
        };
        let (policy, value) = tiny_policy(cfg.obs.dim());
        let mut fleet = Fleet::new(&cfg, 1, 5, 22).unwrap();
        let (trajs, stats) = fleet.collect(&policy, &value, 5, None).unwrap();
        let t = &trajs[0];
        // A near-nominal policy standing still should survive the horizon.
        assert!(!t.dones.iter().any(|d| *d), "terminated: {:?}", t.reasons);
        assert_eq!(t.truncs, vec![false, false, false, false, true]);
        assert_eq!(stats.truncations, 1);
        assert!(t.v_next[4].is_finite());
    }

    #[test]
    fn collection_is_deterministic_and_pool_invariant() {
        let cfg = EnvConfig::default();
        let (policy, value) = tiny_policy(cfg.obs.dim());
        let run = |pool: Option<&rayon::ThreadPool>| {
            let mut fleet = Fleet::new(&cfg, 4, 10, 33).unwrap();
            let (t, _) = fleet.collect(&policy, &value, 10, pool).unwrap();
            t.iter()
                .flat_map(|t| t.rewards.iter().copied())
                .collect::<Vec<f64>>()
        };
        let serial = run(None);
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(2)
            .build()
            .unwrap();
        let parallel = run(Some(&pool));
        assert_eq!(serial, parallel);
        assert_eq!(serial, run(None));
    }
}
