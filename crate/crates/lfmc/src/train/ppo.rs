//! Clipped-surrogate PPO update with Adam.
//!
//! Minibatch gradients are accumulated sequentially in sample order, so an
//! update is a deterministic function of (parameters, batch, shuffle rng).

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;

use crate::policy::{gaussian, ForwardCache, PolicyNetwork, ValueNetwork};
use crate::sim::N_JOINTS;
use crate::{Error, Result};

/// Adam with the usual defaults; `lr` is the only tuned knob.
#[derive(Debug, Clone)]
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: i32,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    pub fn new(lr: f64, dim: usize) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: vec![0.0; dim],
            v: vec![0.0; dim],
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        assert_eq!(params.len(), self.m.len());
        assert_eq!(grad.len(), self.m.len());
        self.t += 1;
        let b1c = 1.0 - self.beta1.powi(self.t);
        let b2c = 1.0 - self.beta2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            let mhat = self.m[i] / b1c;
            let vhat = self.v[i] / b2c;
            params[i] -= self.lr * mhat / (vhat.sqrt() + self.eps);
        }
    }
}

/// One iteration's worth of transitions, flattened across environments.
/// Observations are raw; normalization happens inside the update with the
/// statistics frozen at collection time.
#[derive(Debug, Clone, Default)]
pub struct Batch {
    pub obs: Vec<Vec<f64>>,
    pub actions: Vec<[f64; N_JOINTS]>,
    pub log_probs: Vec<f64>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.obs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.obs.is_empty()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct PpoSettings {
    pub clip_epsilon: f64,
    pub epochs: usize,
    pub minibatches: usize,
    pub entropy_coef: f64,
    pub max_grad_norm: f64,
}

/// Mean loss terms over the final epoch, for the returns curve.
#[derive(Debug, Clone, Copy, Default)]
pub struct PpoDiagnostics {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub approx_kl: f64,
    pub clip_fraction: f64,
}

/// Scratch buffers reused across minibatches.
struct Grads {
    policy: Vec<f64>,
    log_std: Vec<f64>,
    value: Vec<f64>,
}

/// Joint norm over the policy parameter groups.
fn norm2(a: &[f64], b: &[f64]) -> f64 {
    (a.iter().map(|g| g * g).sum::<f64>() + b.iter().map(|g| g * g).sum::<f64>()).sqrt()
}

fn scale_to_norm(grads: &mut [f64], factor: f64) {
    for g in grads {
        *g *= factor;
    }
}

#[allow(clippy::too_many_arguments)]
pub fn ppo_update(
    policy: &mut PolicyNetwork,
    value: &mut ValueNetwork,
    opt_policy: &mut Adam,
    opt_log_std: &mut Adam,
    opt_value: &mut Adam,
    batch: &Batch,
    settings: &PpoSettings,
    shuffle_rng: &mut ChaCha8Rng,
) -> Result<PpoDiagnostics> {
    let n = batch.len();
    if n == 0 {
        return Err(Error::Contract("empty PPO batch".into()));
    }
    let mb_count = settings.minibatches.clamp(1, n);
    let mut order: Vec<usize> = (0..n).collect();
    let mut grads = Grads {
        policy: vec![0.0; policy.net.params().len()],
        log_std: vec![0.0; N_JOINTS],
        value: vec![0.0; value.net.params().len()],
    };
    let mut diag = PpoDiagnostics::default();
    let mut cache = ForwardCache::default();
    let mut vcache = ForwardCache::default();

    for _epoch in 0..settings.epochs {
        order.shuffle(shuffle_rng);
        diag = PpoDiagnostics::default();
        for mb in 0..mb_count {
            // Contiguous slices of the shuffled order; sizes differ by at
            // most one when n is not divisible.
            let lo = mb * n / mb_count;
            let hi = (mb + 1) * n / mb_count;
            let idxs = &order[lo..hi];
            let scale = 1.0 / idxs.len() as f64;
            grads.policy.fill(0.0);
            grads.log_std.fill(0.0);
            grads.value.fill(0.0);
            let mut mb_policy_loss = 0.0;
            let mut mb_value_loss = 0.0;
            let mut mb_kl = 0.0;
            let mut mb_clipped = 0usize;

            for &i in idxs {
                let normed = policy.normalizer.normalize(&batch.obs[i]);
                let out = policy.net.forward(&normed, &mut cache);
                let mut mean = policy.action_bias;
                for j in 0..N_JOINTS {
                    mean[j] += out[j];
                }
                let lp = gaussian::log_prob(&mean, &policy.log_std, &batch.actions[i]);
                let adv = batch.advantages[i];
                let ratio = (lp - batch.log_probs[i]).exp();
                if !ratio.is_finite() {
                    return Err(Error::TrainFault(format!(
                        "non-finite probability ratio at sample {i}"
                    )));
                }
                let lo_r = 1.0 - settings.clip_epsilon;
                let hi_r = 1.0 + settings.clip_epsilon;
                let unclipped = ratio * adv;
                let clipped = ratio.clamp(lo_r, hi_r) * adv;
                // Objective is the min. When the clipped branch is strictly
                // smaller the ratio sits outside the band on the advantage
                // side, and the objective is flat in it: no policy gradient.
                let (objective, dobj_dlp) = if unclipped <= clipped {
                    (unclipped, unclipped)
                } else {
                    mb_clipped += 1;
                    (clipped, 0.0)
                };
                mb_policy_loss -= objective;
                mb_kl += batch.log_probs[i] - lp;

                let coeff = -dobj_dlp * scale;
                if coeff != 0.0 {
                    let mut dmean = [0.0; N_JOINTS];
                    let mut dls = [0.0; N_JOINTS];
                    gaussian::dlogp_dmean(&mean, &policy.log_std, &batch.actions[i], &mut dmean);
                    gaussian::dlogp_dlogstd(&mean, &policy.log_std, &batch.actions[i], &mut dls);
                    for j in 0..N_JOINTS {
                        dmean[j] *= coeff;
                        grads.log_std[j] += coeff * dls[j];
                    }
                    policy.net.backward(&cache, &dmean, &mut grads.policy, None);
                }

                let v = value.net.forward(&normed, &mut vcache)[0];
                let verr = v - batch.returns[i];
                mb_value_loss += verr * verr;
                value
                    .net
                    .backward(&vcache, &[2.0 * verr * scale], &mut grads.value, None);
            }

            // Entropy bonus pushes log-std up uniformly.
            for g in grads.log_std.iter_mut() {
                *g -= settings.entropy_coef;
            }

            let pnorm = norm2(&grads.policy, &grads.log_std);
            if !pnorm.is_finite() {
                return Err(Error::TrainFault("non-finite policy gradient".into()));
            }
            if pnorm > settings.max_grad_norm {
                let f = settings.max_grad_norm / pnorm;
                scale_to_norm(&mut grads.policy, f);
                scale_to_norm(&mut grads.log_std, f);
            }
            let vnorm = norm2(&grads.value, &[]);
            if !vnorm.is_finite() {
                return Err(Error::TrainFault("non-finite value gradient".into()));
            }
            if vnorm > settings.max_grad_norm {
                scale_to_norm(&mut grads.value, settings.max_grad_norm / vnorm);
            }

            opt_policy.step(policy.net.params_mut(), &grads.policy);
            opt_log_std.step(&mut policy.log_std, &grads.log_std);
            opt_value.step(value.net.params_mut(), &grads.value);

            let m = idxs.len() as f64;
            diag.policy_loss += mb_policy_loss / m;
            diag.value_loss += mb_value_loss / m;
            diag.approx_kl += mb_kl / m;
            diag.clip_fraction += mb_clipped as f64 / m;
        }
        diag.policy_loss /= mb_count as f64;
        diag.value_loss /= mb_count as f64;
        diag.approx_kl /= mb_count as f64;
        diag.clip_fraction /= mb_count as f64;
        diag.entropy = gaussian::entropy(&policy.log_std);
    }
    Ok(diag)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;
    use rand::Rng;

    fn synthetic_batch(policy: &PolicyNetwork, n: usize, rng: &mut ChaCha8Rng) -> Batch {
        let dim = policy.obs_dim();
        let mut batch = Batch::default();
        for _ in 0..n {
            let obs: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
            let (a, lp) = policy.sample(&obs, rng);
            batch.obs.push(obs);
            batch.actions.push(a);
            batch.log_probs.push(lp);
            batch.advantages.push(rng.random_range(-1.0..1.0));
            batch.returns.push(rng.random_range(-1.0..1.0));
        }
        batch
    }

    fn setup() -> (PolicyNetwork, ValueNetwork, Adam, Adam, Adam) {
        let mut rng = seed::rng(3, "ppo-test", 0);
        let policy = PolicyNetwork::init(6, [0.4, -0.8, -0.4, 0.8], 0.25, &mut rng).unwrap();
        let value = ValueNetwork::init(6, &mut rng).unwrap();
        let np = policy.net.params().len();
        let nv = value.net.params().len();
        (
            policy,
            value,
            Adam::new(3e-4, np),
            Adam::new(3e-4, N_JOINTS),
            Adam::new(3e-4, nv),
        )
    }

    fn settings() -> PpoSettings {
        PpoSettings {
            clip_epsilon: 0.2,
            epochs: 1,
            minibatches: 2,
            entropy_coef: 0.0,
            max_grad_norm: 1.0,
        }
    }

    #[test]
    fn zero_advantages_leave_policy_untouched() {
        let (mut policy, mut value, mut op, mut ols, mut ov) = setup();
        let mut rng = seed::rng(4, "ppo-test", 1);
        let mut batch = synthetic_batch(&policy, 32, &mut rng);
        batch.advantages.iter_mut().for_each(|a| *a = 0.0);
        let before = policy.net.params().to_vec();
        let ls_before = policy.log_std.clone();
        let vbefore = value.net.params().to_vec();
        ppo_update(
            &mut policy,
            &mut value,
            &mut op,
            &mut ols,
            &mut ov,
            &batch,
            &settings(),
            &mut seed::rng(5, "shuffle", 0),
        )
        .unwrap();
        assert_eq!(policy.net.params(), &before[..]);
        assert_eq!(policy.log_std, ls_before);
        assert_ne!(
            value.net.params(),
            &vbefore[..],
            "critic still fits returns"
        );
    }

    #[test]
    fn update_descends_on_a_fixed_batch() {
        let (mut policy, mut value, mut op, mut ols, mut ov) = setup();
        let mut rng = seed::rng(6, "ppo-test", 2);
        let batch = synthetic_batch(&policy, 64, &mut rng);
        let s = PpoSettings {
            epochs: 1,
            ..settings()
        };
        let first = ppo_update(
            &mut policy,
            &mut value,
            &mut op,
            &mut ols,
            &mut ov,
            &batch,
            &s,
            &mut seed::rng(7, "shuffle", 0),
        )
        .unwrap();
        let mut last = first;
        for k in 1..12 {
            last = ppo_update(
                &mut policy,
                &mut value,
                &mut op,
                &mut ols,
                &mut ov,
                &batch,
                &s,
                &mut seed::rng(7, "shuffle", k),
            )
            .unwrap();
        }
        assert!(
            last.value_loss < first.value_loss,
            "value loss should drop: {} -> {}",
            first.value_loss,
            last.value_loss
        );
        assert!(
            last.policy_loss < first.policy_loss,
            "surrogate should improve: {} -> {}",
            first.policy_loss,
            last.policy_loss
        );
    }

    #[test]
    fn update_is_deterministic() {
        let run = || {
            let (mut policy, mut value, mut op, mut ols, mut ov) = setup();
            let mut rng = seed::rng(8, "ppo-test", 3);
            let batch = synthetic_batch(&policy, 48, &mut rng);
            ppo_update(
                &mut policy,
                &mut value,
                &mut op,
                &mut ols,
                &mut ov,
                &batch,
                &PpoSettings {
                    epochs: 3,
                    ..settings()
                },
                &mut seed::rng(9, "shuffle", 0),
            )
            .unwrap();
            (policy.net.params().to_vec(), value.net.params().to_vec())
        };
        let (p1, v1) = run();
        let (p2, v2) = run();
        assert_eq!(p1, p2);
        assert_eq!(v1, v2);
    }

    #[test]
    fn adam_matches_hand_computed_first_step() {
        let mut adam = Adam::new(0.1, 2);
        let mut params = vec![1.0, -1.0];
        adam.step(&mut params, &[0.5, -0.25]);
        // First step: mhat = g, vhat = g^2, so update is lr * sign(g) up to eps.
        let expect = 0.1 * 0.5 / (0.5 + 1e-8);
        assert!((params[0] - (1.0 - expect)).abs() < 1e-12);
        let expect = 0.1 * 0.25 / (0.25 + 1e-8);
        assert!((params[1] - (-1.0 + expect)).abs() < 1e-12);
    }

    #[test]
    fn empty_batch_rejected() {
        let (mut policy, mut value, mut op, mut ols, mut ov) = setup();
        let err = ppo_update(
            &mut policy,
            &mut value,
            &mut op,
            &mut ols,
            &mut ov,
            &Batch::default(),
            &settings(),
            &mut seed::rng(1, "shuffle", 0),
        );
        assert!(err.is_err());
    }
}
