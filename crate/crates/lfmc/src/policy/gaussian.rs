//! Diagonal Gaussian action head with state-independent log standard
//! deviations and closed-form log-density gradients.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

const LN_2PI: f64 = 1.8378770664093453;

/// Draws `a = mean + exp(log_std) * eps`, one standard normal per dimension.
pub fn sample(mean: &[f64], log_std: &[f64], rng: &mut ChaCha8Rng) -> Vec<f64> {
    mean.iter()
        .zip(log_std)
        .map(|(m, ls)| {
            let eps: f64 = rng.sample(StandardNormal);
            m + ls.exp() * eps
        })
        .collect()
}

/// Joint log density of `action` under the diagonal Gaussian.
pub fn log_prob(mean: &[f64], log_std: &[f64], action: &[f64]) -> f64 {
    debug_assert_eq!(mean.len(), action.len());
    mean.iter()
        .zip(log_std)
        .zip(action)
        .map(|((m, ls), a)| {
            let z = (a - m) / ls.exp();
            -0.5 * z * z - ls - 0.5 * LN_2PI
        })
        .sum()
}

/// Differential entropy: `sum(log_std) + dim/2 * ln(2 pi e)`.
pub fn entropy(log_std: &[f64]) -> f64 {
    log_std.iter().sum::<f64>() + 0.5 * (LN_2PI + 1.0) * log_std.len() as f64
}

/// d log p / d mean, elementwise `(a - m) / sigma^2`.
pub fn dlogp_dmean(mean: &[f64], log_std: &[f64], action: &[f64], out: &mut [f64]) {
    for i in 0..mean.len() {
        let var = (2.0 * log_std[i]).exp();
        out[i] = (action[i] - mean[i]) / var;
    }
}

/// d log p / d log_std, elementwise `z^2 - 1`.
pub fn dlogp_dlogstd(mean: &[f64], log_std: &[f64], action: &[f64], out: &mut [f64]) {
    for i in 0..mean.len() {
        let z = (action[i] - mean[i]) / log_std[i].exp();
        out[i] = z * z - 1.0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn log_prob_hand_value() {
        // Standard normal at the mean: density (2 pi)^(-1/2) per dimension.
        let lp = log_prob(&[0.0, 0.0], &[0.0, 0.0], &[0.0, 0.0]);
        assert_relative_eq!(lp, -LN_2PI, epsilon = 1e-12);
        // One dimension, sigma = 2, one sigma off the mean.
        let lp = log_prob(&[1.0], &[2.0f64.ln()], &[3.0]);
        assert_relative_eq!(lp, -0.5 - 2.0f64.ln() - 0.5 * LN_2PI, epsilon = 1e-12);
    }

    #[test]
    fn entropy_hand_value() {
        // Unit Gaussian: 0.5 ln(2 pi e) = 1.418938... per dimension.
        assert_relative_eq!(entropy(&[0.0]), 1.4189385332046727, epsilon = 1e-12);
        assert_relative_eq!(
            entropy(&[0.5, -0.25]),
            0.25 + 2.0 * 1.4189385332046727,
            epsilon = 1e-12
        );
    }

    #[test]
    fn density_gradients_match_finite_differences() {
        let mean = [0.3, -0.8, 0.1];
        let log_std = [-1.2, 0.2, -0.5];
        let action = [0.5, -1.0, 0.3];
        let mut gm = [0.0; 3];
        let mut gs = [0.0; 3];
        dlogp_dmean(&mean, &log_std, &action, &mut gm);
        dlogp_dlogstd(&mean, &log_std, &action, &mut gs);
        let h = 1e-6;
        for i in 0..3 {
            let mut m = mean;
            m[i] += h;
            let up = log_prob(&m, &log_std, &action);
            m[i] -= 2.0 * h;
            let dn = log_prob(&m, &log_std, &action);
            assert_relative_eq!(gm[i], (up - dn) / (2.0 * h), epsilon = 1e-6);

            let mut ls = log_std;
            ls[i] += h;
            let up = log_prob(&mean, &ls, &action);
            ls[i] -= 2.0 * h;
            let dn = log_prob(&mean, &ls, &action);
            assert_relative_eq!(gs[i], (up - dn) / (2.0 * h), epsilon = 1e-6);
        }
    }

    #[test]
    fn sample_statistics_match_parameters() {
        let mut rng = crate::seed::rng(5, "gauss", 0);
        let mean = [1.0, -2.0];
        let log_std = [0.5f64.ln(), 0.1f64.ln()];
        let n = 20000;
        let mut sums = [0.0; 2];
        let mut sq = [0.0; 2];
        for _ in 0..n {
            let a = sample(&mean, &log_std, &mut rng);
            for d in 0..2 {
                sums[d] += a[d];
                sq[d] += a[d] * a[d];
            }
        }
        for d in 0..2 {
            let m = sums[d] / n as f64;
            let v = sq[d] / n as f64 - m * m;
            assert!((m - mean[d]).abs() < 0.02, "mean[{d}] off: {m}");
            let sigma = log_std[d].exp();
            assert!(
                (v.sqrt() - sigma).abs() < 0.02,
                "std[{d}] off: {}",
                v.sqrt()
            );
        }
    }
}
