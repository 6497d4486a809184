//! Policy and value networks.
//!
//! The actor is an MLP producing 4 joint-position setpoint means around a
//! fixed bias (the nominal pose), plus a learned state-independent log
//! standard deviation per action dimension. The critic is a separate MLP of
//! the same hidden shape. Both consume observations normalized by shared
//! running statistics owned by the policy.

pub mod gaussian;
pub mod mlp;
pub mod normalizer;

use rand_chacha::ChaCha8Rng;

use crate::actuation::Setpoint;
use crate::sim::N_JOINTS;
use crate::{Error, Result};

pub use mlp::{ForwardCache, Mlp};
pub use normalizer::Normalizer;

/// Hidden layer widths shared by actor and critic.
pub const HIDDEN: [usize; 2] = [128, 128];
/// Output-layer init scale: the actor starts as a near-constant nominal pose.
const FINAL_SCALE: f64 = 0.01;

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyNetwork {
    pub net: Mlp,
    /// Added to the network output to form the action mean.
    pub action_bias: Setpoint,
    pub log_std: Vec<f64>,
    pub normalizer: Normalizer,
}

impl PolicyNetwork {
    pub fn init(
        obs_dim: usize,
        action_bias: Setpoint,
        init_std: f64,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        if !(init_std > 0.0) {
            return Err(Error::Config("init_std must be > 0".into()));
        }
        let dims = [obs_dim, HIDDEN[0], HIDDEN[1], N_JOINTS];
        Ok(Self {
            net: Mlp::init(&dims, FINAL_SCALE, rng)?,
            action_bias,
            log_std: vec![init_std.ln(); N_JOINTS],
            normalizer: Normalizer::new(obs_dim),
        })
    }

    pub fn obs_dim(&self) -> usize {
        self.net.input_dim()
    }

    /// Action mean for a raw observation; cache is reusable scratch.
    pub fn mean(&self, obs: &[f64], cache: &mut ForwardCache) -> Setpoint {
        let normed = self.normalizer.normalize(obs);
        let out = self.net.forward(&normed, cache);
        let mut a = self.action_bias;
        for j in 0..N_JOINTS {
            a[j] += out[j];
        }
        a
    }

    /// Stochastic action and its log probability.
    pub fn sample(&self, obs: &[f64], rng: &mut ChaCha8Rng) -> (Setpoint, f64) {
        let mut cache = ForwardCache::default();
        let mean = self.mean(obs, &mut cache);
        let a = gaussian::sample(&mean, &self.log_std, rng);
        let lp = gaussian::log_prob(&mean, &self.log_std, &a);
        ([a[0], a[1], a[2], a[3]], lp)
    }

    /// Log probability of `action` under the current parameters.
    pub fn log_prob(&self, obs: &[f64], action: &Setpoint) -> f64 {
        let mut cache = ForwardCache::default();
        let mean = self.mean(obs, &mut cache);
        gaussian::log_prob(&mean, &self.log_std, action)
    }

    /// Jacobian of the action mean with respect to the RAW observation,
    /// normalization chain included: rows are action dimensions. This is the
    /// quantity behind input-saliency analysis.
    pub fn input_jacobian(&self, obs: &[f64]) -> Vec<Vec<f64>> {
        let normed = self.normalizer.normalize(obs);
        let scale = self.normalizer.input_scale(obs);
        let mut cache = ForwardCache::default();
        self.net.forward(&normed, &mut cache);
        let mut scratch = vec![0.0; self.net.params().len()];
        let mut rows = Vec::with_capacity(N_JOINTS);
        for a in 0..N_JOINTS {
            let mut onehot = vec![0.0; N_JOINTS];
            onehot[a] = 1.0;
            let mut gi = vec![0.0; self.obs_dim()];
            scratch.fill(0.0);
            self.net
                .backward(&cache, &onehot, &mut scratch, Some(&mut gi));
            for (g, s) in gi.iter_mut().zip(&scale) {
                *g *= s;
            }
            rows.push(gi);
        }
        rows
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValueNetwork {
    pub net: Mlp,
}

impl ValueNetwork {
    pub fn init(obs_dim: usize, rng: &mut ChaCha8Rng) -> Result<Self> {
        let dims = [obs_dim, HIDDEN[0], HIDDEN[1], 1];
        Ok(Self {
            net: Mlp::init(&dims, 1.0, rng)?,
        })
    }

    /// State value for an already-normalized observation.
    pub fn value(&self, normed_obs: &[f64], cache: &mut ForwardCache) -> f64 {
        self.net.forward(normed_obs, cache)[0]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;

    const NOMINAL: Setpoint = [0.4, -0.8, -0.4, 0.8];

    #[test]
    fn fresh_policy_outputs_near_the_bias() {
        let mut rng = seed::rng(1, "policy", 0);
        let p = PolicyNetwork::init(18, NOMINAL, 0.25, &mut rng).unwrap();
        let obs = vec![0.3; 18];
        let mut cache = ForwardCache::default();
        let mean = p.mean(&obs, &mut cache);
        for j in 0..N_JOINTS {
            assert!(
                (mean[j] - NOMINAL[j]).abs() < 0.05,
                "joint {j} mean {} far from bias",
                mean[j]
            );
        }
    }

    #[test]
    fn sample_log_prob_consistent_with_log_prob() {
        let mut rng = seed::rng(2, "policy", 0);
        let p = PolicyNetwork::init(10, NOMINAL, 0.25, &mut rng).unwrap();
        let obs: Vec<f64> = (0..10).map(|i| 0.1 * i as f64).collect();
        let (a, lp) = p.sample(&obs, &mut rng);
        let lp2 = p.log_prob(&obs, &a);
        assert!((lp - lp2).abs() < 1e-12);
    }

    #[test]
    fn input_jacobian_matches_finite_differences() {
        let mut rng = seed::rng(3, "policy", 0);
        let mut p = PolicyNetwork::init(12, NOMINAL, 0.25, &mut rng).unwrap();
        // Make the normalization non-trivial before differencing.
        use rand::Rng as _;
        for _ in 0..300 {
            let x: Vec<f64> = (0..12).map(|_| rng.random_range(-2.0..2.0)).collect();
            p.normalizer.update(&x);
        }
        let obs: Vec<f64> = (0..12).map(|_| rng.random_range(-1.0..1.0)).collect();
        let jac = p.input_jacobian(&obs);
        let h = 1e-5;
        let mut cache = ForwardCache::default();
        for i in 0..12 {
            let mut up = obs.clone();
            up[i] += h;
            let yu = p.mean(&up, &mut cache);
            up[i] -= 2.0 * h;
            let yd = p.mean(&up, &mut cache);
            for a in 0..N_JOINTS {
                let fd = (yu[a] - yd[a]) / (2.0 * h);
                let err = (jac[a][i] - fd).abs() / jac[a][i].abs().max(fd.abs()).max(1e-8);
                assert!(err < 1e-4, "d mean[{a}]/d obs[{i}]: {} vs {fd}", jac[a][i]);
            }
        }
    }

    #[test]
    fn zero_weights_give_zero_jacobian() {
        let mut rng = seed::rng(4, "policy", 0);
        let mut p = PolicyNetwork::init(8, NOMINAL, 0.25, &mut rng).unwrap();
        p.net.params_mut().fill(0.0);
        let jac = p.input_jacobian(&[0.5; 8]);
        for row in jac {
            assert!(row.iter().all(|g| *g == 0.0));
        }
    }

    #[test]
    fn value_net_shape() {
        let mut rng = seed::rng(5, "value", 0);
        let v = ValueNetwork::init(18, &mut rng).unwrap();
        let mut cache = ForwardCache::default();
        let val = v.value(&[0.1; 18], &mut cache);
        assert!(val.is_finite());
        assert_eq!(v.net.dims(), &[18, 128, 128, 1]);
    }
}
