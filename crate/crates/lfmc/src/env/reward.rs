//! Reward accumulated at simulation rate.
//!
//! Continuous terms are scaled by the substep duration t_s, so their episode
//! totals depend only on the physical trajectory. The action-smoothness term
//! compares the setpoint signal between consecutive substeps: it is nonzero
//! only on substeps where the signal actually changes, which makes the
//! cumulative reward of a fixed trajectory independent of how many substeps
//! each control step spans.

use crate::sim::{RobotModel, RobotState, N_JOINTS};
use crate::{Error, Result};

/// User-facing weights. `smoothness_weight` is referenced to 10 Hz control
/// and scales linearly with control frequency unless overridden: higher-rate
/// policies emit proportionally more, smaller action changes, and the linear
/// ramp keeps the aggregate smoothing pressure comparable across rates.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardConfig {
    pub tracking_weight: f64,
    /// Width of the tracking kernel exp(-width * err^2).
    pub tracking_width: f64,
    pub pitch_rate_weight: f64,
    pub torque_weight: f64,
    /// Smoothness weight at the 10 Hz reference frequency.
    pub smoothness_weight: f64,
    /// Fixed smoothness weight, bypassing the frequency ramp.
    pub smoothness_override: Option<f64>,
    pub nominal_weight: f64,
    pub nominal_override: Option<f64>,
    pub base_height_weight: f64,
    /// Target base height (m); `None` means the statically settled stand of
    /// the model (geometric standing height less contact and servo sag).
    pub base_height_target: Option<f64>,
    /// Added once on the terminating substep.
    pub termination_penalty: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            tracking_weight: 1.0,
            tracking_width: 4.0,
            pitch_rate_weight: 0.01,
            torque_weight: 2.0e-4,
            smoothness_weight: 0.02,
            smoothness_override: None,
            nominal_weight: 0.05,
            nominal_override: None,
            base_height_weight: 2.0,
            base_height_target: None,
            termination_penalty: -10.0,
        }
    }
}

impl RewardConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tracking_weight > 0.0) || !(self.tracking_width > 0.0) {
            return Err(Error::Config(
                "tracking weight and width must be > 0".into(),
            ));
        }
        for (name, v) in [
            ("pitch_rate_weight", self.pitch_rate_weight),
            ("torque_weight", self.torque_weight),
            ("smoothness_weight", self.smoothness_weight),
            ("nominal_weight", self.nominal_weight),
            ("base_height_weight", self.base_height_weight),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("{name} must be finite and >= 0")));
            }
        }
        Ok(())
    }

    /// Resolves overrides and the frequency ramp into flat weights.
    pub fn resolve(&self, control_freq: f64, model: &RobotModel) -> RewardTerms {
        // Observed static sag of the default setup: contact springs plus
        // PD joint deflection under gravity. Close enough across the DR
        // ranges that standing still is effectively penalty-free.
        const STATIC_SAG: f64 = 0.04;
        RewardTerms {
            tracking_weight: self.tracking_weight,
            tracking_width: self.tracking_width,
            pitch_rate_weight: self.pitch_rate_weight,
            torque_weight: self.torque_weight,
            smoothness_weight: self
                .smoothness_override
                .unwrap_or(self.smoothness_weight * control_freq / 10.0),
            nominal_weight: self.nominal_override.unwrap_or(self.nominal_weight),
            base_height_weight: self.base_height_weight,
            base_height_target: self
                .base_height_target
                .unwrap_or(model.standing_height() - STATIC_SAG),
            termination_penalty: self.termination_penalty,
        }
    }
}

/// Flat weights actually applied each substep.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardTerms {
    pub tracking_weight: f64,
    pub tracking_width: f64,
    pub pitch_rate_weight: f64,
    pub torque_weight: f64,
    pub smoothness_weight: f64,
    pub nominal_weight: f64,
    pub base_height_weight: f64,
    pub base_height_target: f64,
    pub termination_penalty: f64,
}

/// Instantaneous reward for one simulation substep.
///
/// `action` and `prev_action` are the setpoint signal at this and the
/// previous substep; within a control step they are equal and the smoothness
/// term vanishes.
#[allow(clippy::too_many_arguments)]
pub fn reward_step(
    terms: &RewardTerms,
    model: &RobotModel,
    state: &RobotState,
    torques: &[f64; N_JOINTS],
    action: &[f64; N_JOINTS],
    prev_action: &[f64; N_JOINTS],
    command: f64,
    t_s: f64,
) -> f64 {
    let vel_err = command - state.v[0];
    let tracking = terms.tracking_weight * (-terms.tracking_width * vel_err * vel_err).exp();

    let pitch_rate = terms.pitch_rate_weight * state.v[2] * state.v[2];
    let torque: f64 = terms.torque_weight * torques.iter().map(|t| t * t).sum::<f64>();
    let q = state.joint_positions();
    let nominal: f64 = terms.nominal_weight
        * q.iter()
            .zip(model.nominal_pose.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>();
    let dz = state.q[1] - terms.base_height_target;
    let height = terms.base_height_weight * dz * dz;

    let smooth: f64 = terms.smoothness_weight
        * action
            .iter()
            .zip(prev_action.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>();

    (tracking - pitch_rate - torque - nominal - height) * t_s - smooth
}
