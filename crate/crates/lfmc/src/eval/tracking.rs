//! Velocity tracking report: how well a policy follows a heading command.

use crate::csvio::{fmt_f64, CsvTable};
use crate::env::{EnvConfig, Environment};
use crate::policy::PolicyNetwork;
use crate::Result;

use super::{rollout_config, run_policy};

/// One substep of the distance-vs-time record.
#[derive(Debug, Clone)]
pub struct TrackingRow {
    pub time: f64,
    pub velocity: f64,
    /// Integrated distance up to and including this substep (m).
    pub distance: f64,
}

#[derive(Debug, Clone)]
pub struct TrackingReport {
    pub command: f64,
    /// Recorded rollout length (s); shorter than requested on a fall.
    pub duration: f64,
    pub mean_velocity: f64,
    pub max_velocity: f64,
    /// Root mean square of (velocity - command) over substeps.
    pub rmse: f64,
    /// Base displacement over the rollout (m).
    pub distance: f64,
    /// Trapezoid-free integral of recorded velocities (m); matches
    /// `distance` because the integrator is semi-implicit.
    pub integral: f64,
    pub terminated_early: bool,
    pub seed: u64,
    pub rows: Vec<TrackingRow>,
}

impl TrackingReport {
    pub fn csv(&self) -> String {
        let mut table = CsvTable::new(&["time", "velocity", "command", "distance"]);
        for row in &self.rows {
            table.row(&[
                fmt_f64(row.time),
                fmt_f64(row.velocity),
                fmt_f64(self.command),
                fmt_f64(row.distance),
            ]);
        }
        table.contents().to_string()
    }

    pub fn summary(&self) -> String {
        format!(
            "tracking {} m/s over {} s (seed {}){}\nmean velocity {} m/s, max {} m/s, rmse {} m/s, distance {} m\n",
            fmt_f64(self.command),
            fmt_f64(self.duration),
            self.seed,
            if self.terminated_early {
                ", terminated early"
            } else {
                ""
            },
            fmt_f64(self.mean_velocity),
            fmt_f64(self.max_velocity),
            fmt_f64(self.rmse),
            fmt_f64(self.distance)
        )
    }
}

/// One traced rollout at a fixed command with per-substep velocity records.
pub fn velocity_tracking(
    policy: &PolicyNetwork,
    cfg: &EnvConfig,
    command: f64,
    duration: f64,
    seed: u64,
) -> Result<TrackingReport> {
    let mut env = Environment::new(rollout_config(cfg, seed, 0), seed, 0)?;
    env.enable_trace();
    env.reset();
    let x0 = env.state().q[0];
    let out = run_policy(&mut env, policy, duration, Some(command))?;
    let dt = 1.0 / cfg.actuation.rate;

    let mut rows = Vec::with_capacity(env.trace().len());
    let mut integral = 0.0;
    let mut vel_sum = 0.0;
    let mut max_velocity = f64::NEG_INFINITY;
    let mut sq_err = 0.0;
    for r in env.trace() {
        let v = r.state.v[0];
        integral += v * dt;
        vel_sum += v;
        max_velocity = max_velocity.max(v);
        sq_err += (v - command) * (v - command);
        rows.push(TrackingRow {
            time: r.state.time,
            velocity: v,
            distance: integral,
        });
    }
    let n = rows.len().max(1) as f64;
    Ok(TrackingReport {
        command,
        duration: rows.len() as f64 * dt,
        mean_velocity: vel_sum / n,
        max_velocity: if rows.is_empty() { 0.0 } else { max_velocity },
        rmse: (sq_err / n).sqrt(),
        distance: env.state().q[0] - x0,
        integral,
        terminated_early: out.failed(),
        seed,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::super::test_support::*;
    use super::*;

    #[test]
    fn standing_policy_stays_put_under_zero_command() {
        let cfg = quiet_config(10.0);
        let policy = standing_policy(&cfg);
        let report = velocity_tracking(&policy, &cfg, 0.0, 2.0, 6).unwrap();
        assert!(!report.terminated_early);
        assert!(
            report.mean_velocity.abs() < 0.05,
            "{}",
            report.mean_velocity
        );
        assert!(report.distance.abs() < 0.1, "{}", report.distance);
        assert_eq!(report.rows.len(), 800);
    }

    #[test]
    fn distance_equals_the_velocity_integral() {
        let cfg = quiet_config(10.0);
        // A wobbling policy makes the base move; the identity must still hold.
        let mut rng = crate::seed::rng(14, "tracking-test", 0);
        let policy = crate::policy::PolicyNetwork::init(
            cfg.obs.dim(),
            cfg.model.nominal_pose,
            0.2,
            &mut rng,
        )
        .unwrap();
        let report = velocity_tracking(&policy, &cfg, 0.5, 3.0, 2).unwrap();
        assert!(
            (report.distance - report.integral).abs() < 1e-6,
            "distance {} vs integral {}",
            report.distance,
            report.integral
        );
    }

    #[test]
    fn report_is_reproducible() {
        let mut cfg = quiet_config(10.0);
        cfg.init_joint_jitter = 0.05;
        let policy = standing_policy(&cfg);
        let a = velocity_tracking(&policy, &cfg, 0.3, 1.0, 8).unwrap();
        let b = velocity_tracking(&policy, &cfg, 0.3, 1.0, 8).unwrap();
        assert_eq!(a.csv(), b.csv());
    }
}
