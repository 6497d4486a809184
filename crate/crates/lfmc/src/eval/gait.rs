//! Stance and swing phase extraction from per-substep contact flags.
//!
//! Contiguous contact runs become half-open intervals `[start, end)` in
//! seconds. Stance and swing intervals alternate and together tile the
//! recorded timeline exactly; partial runs at the rollout boundaries count
//! toward the duration means.

use crate::csvio::{fmt_f64, CsvTable};
use crate::env::{EnvConfig, Environment};
use crate::policy::PolicyNetwork;
use crate::Result;

use super::{rollout_config, run_policy};

/// Stance/swing structure for one foot.
#[derive(Debug, Clone)]
pub struct FootGait {
    pub stance: Vec<[f64; 2]>,
    pub swing: Vec<[f64; 2]>,
    pub mean_stance: f64,
    pub mean_swing: f64,
    /// Fraction of recorded time spent in contact.
    pub stance_fraction: f64,
}

/// Splits a contact signal sampled every `dt` seconds into stance and swing
/// intervals.
pub fn intervals_from_flags(flags: &[bool], dt: f64) -> (Vec<[f64; 2]>, Vec<[f64; 2]>) {
    let mut stance = Vec::new();
    let mut swing = Vec::new();
    if flags.is_empty() {
        return (stance, swing);
    }
    let mut run_start = 0usize;
    for i in 1..=flags.len() {
        if i == flags.len() || flags[i] != flags[i - 1] {
            let interval = [run_start as f64 * dt, i as f64 * dt];
            if flags[run_start] {
                stance.push(interval);
            } else {
                swing.push(interval);
            }
            run_start = i;
        }
    }
    (stance, swing)
}

fn mean_interval(intervals: &[[f64; 2]]) -> f64 {
    if intervals.is_empty() {
        return 0.0;
    }
    intervals.iter().map(|[s, e]| e - s).sum::<f64>() / intervals.len() as f64
}

fn foot_gait(flags: &[bool], dt: f64) -> FootGait {
    let (stance, swing) = intervals_from_flags(flags, dt);
    let contact_time: f64 = stance.iter().map(|[s, e]| e - s).sum();
    let total = flags.len() as f64 * dt;
    FootGait {
        mean_stance: mean_interval(&stance),
        mean_swing: mean_interval(&swing),
        stance_fraction: if total > 0.0 {
            contact_time / total
        } else {
            0.0
        },
        stance,
        swing,
    }
}

#[derive(Debug, Clone)]
pub struct GaitReport {
    /// Front foot, then hind foot.
    pub feet: [FootGait; 2],
    /// Recorded timeline length (s); shorter than requested on a fall.
    pub duration: f64,
    pub terminated_early: bool,
    pub command: f64,
    pub seed: u64,
}

impl GaitReport {
    pub fn csv(&self) -> String {
        let mut table = CsvTable::new(&["foot", "phase", "start", "end"]);
        for (foot, gait) in self.feet.iter().enumerate() {
            let name = if foot == 0 { "front" } else { "hind" };
            for [s, e] in &gait.stance {
                table.row(&[name.into(), "stance".into(), fmt_f64(*s), fmt_f64(*e)]);
            }
            for [s, e] in &gait.swing {
                table.row(&[name.into(), "swing".into(), fmt_f64(*s), fmt_f64(*e)]);
            }
        }
        table.contents().to_string()
    }

    pub fn summary(&self) -> String {
        let mut s = format!(
            "gait over {} s at command {} m/s (seed {}){}\n",
            fmt_f64(self.duration),
            fmt_f64(self.command),
            self.seed,
            if self.terminated_early {
                ", terminated early"
            } else {
                ""
            }
        );
        for (foot, gait) in self.feet.iter().enumerate() {
            let name = if foot == 0 { "front" } else { "hind" };
            s.push_str(&format!(
                "{name}: mean stance {} s, mean swing {} s, stance fraction {}\n",
                fmt_f64(gait.mean_stance),
                fmt_f64(gait.mean_swing),
                fmt_f64(gait.stance_fraction)
            ));
        }
        s
    }
}

/// One traced rollout at a fixed command, contact flags sampled every
/// simulation substep.
pub fn gait_sequence(
    policy: &PolicyNetwork,
    cfg: &EnvConfig,
    duration: f64,
    command: f64,
    seed: u64,
) -> Result<GaitReport> {
    let mut env = Environment::new(rollout_config(cfg, seed, 0), seed, 0)?;
    env.enable_trace();
    env.reset();
    let out = run_policy(&mut env, policy, duration, Some(command))?;
    let dt = 1.0 / cfg.actuation.rate;
    let front: Vec<bool> = env.trace().iter().map(|r| r.contacts[0]).collect();
    let hind: Vec<bool> = env.trace().iter().map(|r| r.contacts[1]).collect();
    Ok(GaitReport {
        duration: front.len() as f64 * dt,
        feet: [foot_gait(&front, dt), foot_gait(&hind, dt)],
        terminated_early: out.failed(),
        command,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::super::test_support::*;
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn square_wave_gives_equal_stance_and_swing() {
        // 1 Hz, 50% duty, 4 s at the simulation step: mean 0.5 s each.
        let dt = 0.0025;
        let n = (4.0 / dt) as usize;
        let flags: Vec<bool> = (0..n).map(|i| (i as f64 * dt) % 1.0 < 0.5).collect();
        let gait = foot_gait(&flags, dt);
        assert!(
            (gait.mean_stance - 0.5).abs() < 1e-9,
            "{}",
            gait.mean_stance
        );
        assert!((gait.mean_swing - 0.5).abs() < 1e-9, "{}", gait.mean_swing);
        assert!((gait.stance_fraction - 0.5).abs() < 1e-9);
        assert_eq!(gait.stance.len(), 4);
        assert_eq!(gait.swing.len(), 4);
    }

    #[test]
    fn empty_signal_gives_empty_gait() {
        let gait = foot_gait(&[], 0.0025);
        assert!(gait.stance.is_empty() && gait.swing.is_empty());
        assert_eq!(gait.mean_stance, 0.0);
        assert_eq!(gait.stance_fraction, 0.0);
    }

    #[test]
    fn standing_policy_reports_full_stance() {
        let cfg = quiet_config(10.0);
        let policy = standing_policy(&cfg);
        let report = gait_sequence(&policy, &cfg, 2.0, 0.0, 4).unwrap();
        assert!(!report.terminated_early);
        for gait in &report.feet {
            assert!(
                gait.stance_fraction > 0.98,
                "stance fraction {}",
                gait.stance_fraction
            );
        }
        assert!((report.duration - 2.0).abs() < 1e-9);
    }

    proptest! {
        /// Stance and swing intervals tile [0, n*dt) with no overlap.
        #[test]
        fn intervals_partition_the_timeline(flags in prop::collection::vec(any::<bool>(), 0..200)) {
            let dt = 0.0025;
            let (stance, swing) = intervals_from_flags(&flags, dt);
            let mut all: Vec<[f64; 2]> = stance.iter().chain(swing.iter()).copied().collect();
            all.sort_by(|a, b| a[0].partial_cmp(&b[0]).unwrap());
            let mut cursor = 0.0;
            for [s, e] in &all {
                prop_assert!((s - cursor).abs() < 1e-12, "gap or overlap at {s}");
                prop_assert!(e > s);
                cursor = *e;
            }
            prop_assert!((cursor - flags.len() as f64 * dt).abs() < 1e-12);
            // Runs alternate, so adjacent intervals never share a phase.
            for pair in all.windows(2) {
                let in_stance = |iv: &[f64; 2]| stance.contains(iv);
                prop_assert!(in_stance(&pair[0]) != in_stance(&pair[1]));
            }
        }
    }
}
