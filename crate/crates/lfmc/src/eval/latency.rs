//! Maximum actuation latency a policy tolerates.
//!
//! The sweep raises injected latency from zero in fixed-resolution steps and
//! stops at the first level whose success rate drops below the threshold, so
//! a policy that fails at some latency is never reported robust at a larger
//! one. The threshold and rollout count are part of the report.

use crate::csvio::{fmt_f64, CsvTable};
use crate::env::EnvConfig;
use crate::policy::PolicyNetwork;
use crate::{Error, Result};

use super::success::success_rate;

#[derive(Debug, Clone)]
pub struct LatencyOptions {
    /// Sweep resolution (s); reported limits are multiples of it.
    pub resolution: f64,
    /// Success rate at or above this keeps a level "robust".
    pub threshold: f64,
    pub rollouts_per_level: usize,
    pub horizon_seconds: f64,
    /// Hard stop for the sweep (s).
    pub max_latency: f64,
}

impl Default for LatencyOptions {
    fn default() -> Self {
        Self {
            resolution: 0.005,
            threshold: 0.9,
            rollouts_per_level: 20,
            horizon_seconds: super::DEFAULT_HORIZON_SECONDS,
            max_latency: 0.2,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LatencyLevel {
    pub latency: f64,
    pub success_rate: f64,
}

#[derive(Debug, Clone)]
pub struct LatencyReport {
    /// Largest injected latency (s) at which the policy stayed robust.
    pub limit: f64,
    /// The policy missed the threshold with no injected latency at all.
    pub failed_at_zero: bool,
    /// Levels visited, in sweep order; all but the last met the threshold.
    pub levels: Vec<LatencyLevel>,
    pub threshold: f64,
    pub resolution: f64,
    pub rollouts_per_level: usize,
    pub seed: u64,
}

impl LatencyReport {
    pub fn csv(&self) -> String {
        let mut table = CsvTable::new(&["latency_ms", "success_rate"]);
        for level in &self.levels {
            table.row(&[fmt_f64(level.latency * 1e3), fmt_f64(level.success_rate)]);
        }
        table.contents().to_string()
    }

    pub fn summary(&self) -> String {
        let mut s = format!(
            "latency limit: {} ms (SR >= {} over {} rollouts per level, {} ms resolution, seed {})\n",
            fmt_f64(self.limit * 1e3),
            fmt_f64(self.threshold),
            self.rollouts_per_level,
            fmt_f64(self.resolution * 1e3),
            self.seed
        );
        if self.failed_at_zero {
            s.push_str("policy failed the threshold with zero injected latency\n");
        }
        s
    }
}

/// Sweeps injected latency and returns the last robust level. The same
/// rollout seeds are replayed at every level so levels differ only in the
/// injected latency.
pub fn latency_limit(
    policy: &PolicyNetwork,
    base: &EnvConfig,
    opts: &LatencyOptions,
    seed: u64,
    pool: Option<&rayon::ThreadPool>,
) -> Result<LatencyReport> {
    if !(opts.resolution > 0.0) {
        return Err(Error::Config("latency sweep resolution must be > 0".into()));
    }
    if !(0.0..=1.0).contains(&opts.threshold) {
        return Err(Error::Config("latency threshold must lie in [0, 1]".into()));
    }
    let mut levels = Vec::new();
    let mut limit = 0.0;
    let mut failed_at_zero = false;
    for k in 0.. {
        let latency = k as f64 * opts.resolution;
        if latency > opts.max_latency + 1e-12 {
            break;
        }
        let mut cfg = base.clone();
        cfg.actuation.latency = latency;
        if let Some(dr) = &mut cfg.domain_rand {
            dr.latency = [latency, latency];
        }
        let sr = success_rate(
            policy,
            &cfg,
            opts.rollouts_per_level,
            opts.horizon_seconds,
            seed,
            pool,
        )?;
        levels.push(LatencyLevel {
            latency,
            success_rate: sr.success_rate,
        });
        if sr.success_rate < opts.threshold {
            failed_at_zero = k == 0;
            break;
        }
        limit = latency;
    }
    Ok(LatencyReport {
        limit,
        failed_at_zero,
        levels,
        threshold: opts.threshold,
        resolution: opts.resolution,
        rollouts_per_level: opts.rollouts_per_level,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::super::test_support::*;
    use super::*;

    fn quick_opts() -> LatencyOptions {
        LatencyOptions {
            rollouts_per_level: 3,
            horizon_seconds: 1.0,
            max_latency: 0.015,
            ..LatencyOptions::default()
        }
    }

    #[test]
    fn constant_setpoint_policy_tolerates_the_whole_sweep() {
        // A standing policy repeats one setpoint, so delaying it is a no-op.
        let cfg = quiet_config(10.0);
        let policy = standing_policy(&cfg);
        let report = latency_limit(&policy, &cfg, &quick_opts(), 3, None).unwrap();
        assert!(!report.failed_at_zero);
        assert_eq!(report.limit, 0.015);
        assert_eq!(report.levels.len(), 4);
        for level in &report.levels {
            assert_eq!(level.success_rate, 1.0);
        }
    }

    #[test]
    fn collapse_at_zero_sets_the_flag() {
        let cfg = quiet_config(10.0);
        let mut policy = standing_policy(&cfg);
        policy.action_bias = [0.0, -2.6, 0.0, 2.6];
        let report = latency_limit(&policy, &cfg, &quick_opts(), 3, None).unwrap();
        assert!(report.failed_at_zero);
        assert_eq!(report.limit, 0.0);
        assert_eq!(report.levels.len(), 1);
    }

    #[test]
    fn limit_is_a_multiple_of_the_resolution() {
        let cfg = quiet_config(10.0);
        let policy = standing_policy(&cfg);
        let opts = quick_opts();
        let report = latency_limit(&policy, &cfg, &opts, 5, None).unwrap();
        let ratio = report.limit / opts.resolution;
        assert!((ratio - ratio.round()).abs() < 1e-9);
        // Every level before the stop met the threshold.
        for level in &report.levels[..report.levels.len() - 1] {
            assert!(level.success_rate >= report.threshold);
        }
    }

    #[test]
    fn sweep_is_reproducible() {
        let mut cfg = quiet_config(10.0);
        cfg.init_joint_jitter = 0.1;
        let policy = standing_policy(&cfg);
        let a = latency_limit(&policy, &cfg, &quick_opts(), 9, None).unwrap();
        let b = latency_limit(&policy, &cfg, &quick_opts(), 9, None).unwrap();
        assert_eq!(a.limit, b.limit);
        assert_eq!(a.csv(), b.csv());
    }
}
