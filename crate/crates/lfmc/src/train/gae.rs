//! Generalized advantage estimation over one environment's step sequence.

/// Per-step closure value: what follows the transition.
///
/// `v_next[t]` must be 0 where `dones[t]` (terminal, no future), the frozen
/// critic's bootstrap where `truncs[t]` or at the sequence end, and otherwise
/// `values[t + 1]`.
pub fn gae(
    rewards: &[f64],
    values: &[f64],
    v_next: &[f64],
    dones: &[bool],
    truncs: &[bool],
    gamma: f64,
    lambda: f64,
) -> (Vec<f64>, Vec<f64>) {
    let n = rewards.len();
    assert!(
        values.len() == n && v_next.len() == n && dones.len() == n && truncs.len() == n,
        "gae input lengths disagree"
    );
    let mut advantages = vec![0.0; n];
    let mut acc = 0.0;
    for t in (0..n).rev() {
        let delta = rewards[t] + gamma * v_next[t] - values[t];
        // The chain restarts across any episode boundary, terminal or not.
        let boundary = dones[t] || truncs[t] || t + 1 == n;
        acc = delta + if boundary { 0.0 } else { gamma * lambda * acc };
        advantages[t] = acc;
    }
    let returns = advantages.iter().zip(values).map(|(a, v)| a + v).collect();
    (advantages, returns)
}

/// In-place normalization to zero mean, unit variance across the batch.
pub fn normalize_advantages(adv: &mut [f64]) {
    if adv.len() < 2 {
        return;
    }
    let n = adv.len() as f64;
    let mean = adv.iter().sum::<f64>() / n;
    let var = adv.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n;
    let std = var.sqrt() + 1e-8;
    for a in adv.iter_mut() {
        *a = (*a - mean) / std;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn discounted_sum_hand_oracle() {
        // gamma 0.9, lambda 1, zero critic, terminal end:
        // returns are plain discounted reward sums.
        let r = [1.0, 1.0, 1.0];
        let z = [0.0; 3];
        let dones = [false, false, true];
        let truncs = [false; 3];
        let (adv, ret) = gae(&r, &z, &z, &dones, &truncs, 0.9, 1.0);
        assert_relative_eq!(ret[0], 2.71, epsilon = 1e-12);
        assert_relative_eq!(ret[1], 1.9, epsilon = 1e-12);
        assert_relative_eq!(ret[2], 1.0, epsilon = 1e-12);
        assert_eq!(adv, ret, "zero critic makes advantage equal return");
    }

    #[test]
    fn lambda_zero_is_the_td_residual() {
        let r = [0.5, 1.5];
        let v = [2.0, 1.0];
        let vn = [1.0, 3.0];
        let dones = [false, false];
        let truncs = [false, true];
        let (adv, _) = gae(&r, &v, &vn, &dones, &truncs, 0.9, 0.0);
        assert_relative_eq!(adv[0], 0.5 + 0.9 * 1.0 - 2.0, epsilon = 1e-12);
        assert_relative_eq!(adv[1], 1.5 + 0.9 * 3.0 - 1.0, epsilon = 1e-12);
    }

    #[test]
    fn zero_rewards_zero_values_give_zero_advantages() {
        let z = [0.0; 5];
        let f = [false; 5];
        let (adv, ret) = gae(&z, &z, &z, &f, &f, 0.99, 0.95);
        assert!(adv.iter().all(|a| *a == 0.0));
        assert!(ret.iter().all(|r| *r == 0.0));
    }

    #[test]
    fn terminal_blocks_credit_flow() {
        // Large reward after a terminal must not leak backwards.
        let r = [0.0, 100.0];
        let z = [0.0; 2];
        let dones = [true, true];
        let truncs = [false; 2];
        let (adv, _) = gae(&r, &z, &z, &dones, &truncs, 0.99, 0.95);
        assert_eq!(adv[0], 0.0);
        assert_eq!(adv[1], 100.0);
    }

    #[test]
    fn truncation_bootstraps_without_chaining() {
        // Truncated at t=1 with bootstrap 10: delta includes it, but the
        // recursion does not extend past the boundary from t=0's view.
        let r = [1.0, 1.0, 1.0];
        let v = [0.0; 3];
        let vn = [0.0, 10.0, 0.0];
        let dones = [false, false, true];
        let truncs = [false, true, false];
        let g = 0.5;
        let (adv, _) = gae(&r, &v, &vn, &dones, &truncs, g, 1.0);
        assert_relative_eq!(adv[1], 1.0 + g * 10.0, epsilon = 1e-12);
        assert_relative_eq!(adv[0], 1.0 + g * adv[1], epsilon = 1e-12);
        assert_relative_eq!(adv[2], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn normalization_centers_and_scales() {
        let mut a = vec![1.0, 2.0, 3.0, 4.0];
        normalize_advantages(&mut a);
        let mean: f64 = a.iter().sum::<f64>() / 4.0;
        let var: f64 = a.iter().map(|x| x * x).sum::<f64>() / 4.0;
        assert!(mean.abs() < 1e-12);
        assert_relative_eq!(var, 1.0, epsilon = 1e-4);
    }
}
