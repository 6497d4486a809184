//! Success rate over seeded rollouts: SR = 1 - N_e / N_T, where N_e counts
//! episodes terminated early by an invalid state.

use rayon::prelude::*;

use super::{rollout_config, run_policy, RolloutOutcome};
use crate::env::{EnvConfig, Environment};
use crate::policy::PolicyNetwork;
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct SuccessReport {
    pub rollouts: usize,
    pub failures: usize,
    pub success_rate: f64,
    pub mean_reward: f64,
    pub mean_steps: f64,
    /// Early terminations by cause, `TerminationReason` order.
    pub failure_reasons: [usize; 4],
    pub horizon_seconds: f64,
    pub seed: u64,
}

impl SuccessReport {
    pub fn csv(&self) -> String {
        let mut table = crate::csvio::CsvTable::new(&[
            "rollouts",
            "failures",
            "success_rate",
            "mean_reward",
            "mean_steps",
            "orientation",
            "base_contact",
            "knee_contact",
            "joint_limit",
        ]);
        table.row_f64(&[
            self.rollouts as f64,
            self.failures as f64,
            self.success_rate,
            self.mean_reward,
            self.mean_steps,
            self.failure_reasons[0] as f64,
            self.failure_reasons[1] as f64,
            self.failure_reasons[2] as f64,
            self.failure_reasons[3] as f64,
        ]);
        table.contents().to_string()
    }

    pub fn summary(&self) -> String {
        format!(
            "success rate {:.3} over {} rollouts ({} failures: {} orientation, {} base, {} knee, {} joint), mean reward {:.3}",
            self.success_rate,
            self.rollouts,
            self.failures,
            self.failure_reasons[0],
            self.failure_reasons[1],
            self.failure_reasons[2],
            self.failure_reasons[3],
            self.mean_reward,
        )
    }
}

pub(crate) fn report_from_outcomes(
    outcomes: &[RolloutOutcome],
    horizon_seconds: f64,
    seed: u64,
) -> SuccessReport {
    let n = outcomes.len();
    let mut failures = 0;
    let mut failure_reasons = [0usize; 4];
    let mut reward_sum = 0.0;
    let mut step_sum = 0.0;
    for out in outcomes {
        if let Some(reason) = out.termination {
            failures += 1;
            failure_reasons[reason as usize] += 1;
        }
        reward_sum += out.total_reward;
        step_sum += out.steps as f64;
    }
    SuccessReport {
        rollouts: n,
        failures,
        success_rate: 1.0 - failures as f64 / n as f64,
        mean_reward: reward_sum / n as f64,
        mean_steps: step_sum / n as f64,
        failure_reasons,
        horizon_seconds,
        seed,
    }
}

/// `rollouts` seeded mean-action rollouts of `horizon_seconds` each; the
/// command is drawn per episode from the configured range. Results do not
/// depend on whether a worker pool is supplied.
pub fn success_rate(
    policy: &PolicyNetwork,
    cfg: &EnvConfig,
    rollouts: usize,
    horizon_seconds: f64,
    seed: u64,
    pool: Option<&rayon::ThreadPool>,
) -> Result<SuccessReport> {
    if rollouts == 0 {
        return Err(Error::Contract(
            "success rate needs at least one rollout".into(),
        ));
    }
    let run_one = |i: u64| -> Result<RolloutOutcome> {
        let mut env = Environment::new(rollout_config(cfg, seed, i), seed, i)?;
        run_policy(&mut env, policy, horizon_seconds, None)
    };
    let outcomes: Result<Vec<_>> = match pool {
        Some(p) => p.install(|| (0..rollouts as u64).into_par_iter().map(run_one).collect()),
        None => (0..rollouts as u64).map(run_one).collect(),
    };
    Ok(report_from_outcomes(&outcomes?, horizon_seconds, seed))
}

#[cfg(test)]
mod tests {
    use super::super::test_support::*;
    use super::*;

    #[test]
    fn ratio_arithmetic_matches_the_definition() {
        let mut outcomes = vec![
            RolloutOutcome {
                termination: None,
                steps: 100,
                total_reward: 1.0,
            };
            100
        ];
        for out in outcomes.iter_mut().take(13) {
            out.termination = Some(crate::env::TerminationReason::Orientation);
            out.steps = 40;
        }
        let report = report_from_outcomes(&outcomes, 10.0, 0);
        assert_eq!(report.success_rate, 0.87);
        assert_eq!(report.failures, 13);
        assert_eq!(report.failure_reasons, [13, 0, 0, 0]);
    }

    #[test]
    fn standing_policy_scores_a_perfect_rate() {
        let cfg = quiet_config(10.0);
        let policy = standing_policy(&cfg);
        let report = success_rate(&policy, &cfg, 5, 1.0, 42, None).unwrap();
        assert_eq!(report.success_rate, 1.0);
        assert_eq!(report.failures, 0);
        assert_eq!(report.mean_steps, 10.0);
    }

    #[test]
    fn collapsing_policy_records_failures_and_reasons() {
        let cfg = quiet_config(10.0);
        // Fully folded knees drop the base through the clearance floor.
        let mut policy = standing_policy(&cfg);
        policy.action_bias = [0.0, -2.6, 0.0, 2.6];
        let report = success_rate(&policy, &cfg, 4, 2.0, 7, None).unwrap();
        assert!(report.success_rate < 1.0);
        assert_eq!(
            report.failure_reasons.iter().sum::<usize>(),
            report.failures
        );
    }

    #[test]
    fn rate_is_pool_invariant_and_reproducible() {
        let mut cfg = quiet_config(10.0);
        cfg.command_range = [-0.5, 1.0];
        cfg.init_joint_jitter = 0.1;
        let policy = standing_policy(&cfg);
        let serial = success_rate(&policy, &cfg, 6, 1.0, 11, None).unwrap();
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(2)
            .build()
            .unwrap();
        let parallel = success_rate(&policy, &cfg, 6, 1.0, 11, Some(&pool)).unwrap();
        assert_eq!(serial.success_rate, parallel.success_rate);
        assert_eq!(serial.mean_reward, parallel.mean_reward);
        let again = success_rate(&policy, &cfg, 6, 1.0, 11, None).unwrap();
        assert_eq!(serial.mean_reward, again.mean_reward);
    }
}
