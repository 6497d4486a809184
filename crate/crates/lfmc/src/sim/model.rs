//! Physical parameters of the planar robot.

use crate::sim::dynamics::ContactParams;
use crate::sim::kinematics::N_JOINTS;
use crate::{Error, Result};

/// Mass, geometry and limit parameters of the planar quadruped analog.
///
/// Joint order everywhere in the crate is
/// `[front hip, front knee, hind hip, hind knee]`. At the zero pose both
/// legs hang straight down; positive joint angles swing the distal link
/// toward +x (the heading direction).
#[derive(Debug, Clone, PartialEq)]
pub struct RobotModel {
    /// Base link mass (kg).
    pub base_mass: f64,
    /// Base link length (m); hips attach at the two ends.
    pub base_length: f64,
    /// Base link rotational inertia about its COM (kg m^2).
    pub base_inertia: f64,
    /// Upper-leg link mass (kg), per link.
    pub upper_mass: f64,
    /// Upper-leg link length, hip to knee (m).
    pub upper_length: f64,
    /// Upper-leg inertia about its COM (kg m^2).
    pub upper_inertia: f64,
    /// Lower-leg link mass (kg), per link.
    pub lower_mass: f64,
    /// Lower-leg link length, knee to foot point (m).
    pub lower_length: f64,
    /// Lower-leg inertia about its COM (kg m^2).
    pub lower_inertia: f64,
    /// Foot contact sphere radius (m).
    pub foot_radius: f64,
    /// Torque limit applied to every actuated joint (N m).
    pub torque_limit: f64,
    /// Per-joint position limits (rad), `[lo, hi]` each.
    pub joint_limits: [[f64; 2]; N_JOINTS],
    /// Gravitational acceleration magnitude (m/s^2), acting along -z.
    pub gravity: f64,
    /// Nominal (standing) joint configuration (rad).
    pub nominal_pose: [f64; N_JOINTS],
    /// Foot-ground contact parameters.
    pub contact: ContactParams,
}

impl Default for RobotModel {
    /// Loosely ANYmal-proportioned planar analog: 20 kg total, 0.6 m base,
    /// 0.25 m leg links, 40 N m joints, X-configured standing pose.
    fn default() -> Self {
        Self {
            base_mass: 16.0,
            base_length: 0.6,
            base_inertia: 16.0 * 0.6 * 0.6 / 12.0,
            upper_mass: 1.0,
            upper_length: 0.25,
            upper_inertia: 1.0 * 0.25 * 0.25 / 12.0,
            lower_mass: 1.0,
            lower_length: 0.25,
            lower_inertia: 1.0 * 0.25 * 0.25 / 12.0,
            foot_radius: 0.02,
            torque_limit: 40.0,
            joint_limits: [[-1.6, 1.6], [-2.6, 2.6], [-1.6, 1.6], [-2.6, 2.6]],
            gravity: 9.81,
            nominal_pose: [0.4, -0.8, -0.4, 0.8],
            contact: ContactParams::default(),
        }
    }
}

impl RobotModel {
    /// Total robot mass (kg).
    pub fn total_mass(&self) -> f64 {
        self.base_mass + 2.0 * (self.upper_mass + self.lower_mass)
    }

    /// Per-link masses in `LinkIndex` order.
    pub fn link_masses(&self) -> [f64; 5] {
        [
            self.base_mass,
            self.upper_mass,
            self.lower_mass,
            self.upper_mass,
            self.lower_mass,
        ]
    }

    /// Per-link COM inertias in `LinkIndex` order.
    pub fn link_inertias(&self) -> [f64; 5] {
        [
            self.base_inertia,
            self.upper_inertia,
            self.lower_inertia,
            self.upper_inertia,
            self.lower_inertia,
        ]
    }

    /// Base height above the feet in the nominal pose, foot radius included.
    /// This is the standing base height on flat ground.
    pub fn standing_height(&self) -> f64 {
        // Both legs of the X-pose place the foot directly under the hip.
        let hip = self.nominal_pose[0];
        let knee = self.nominal_pose[1];
        self.upper_length * hip.cos() + self.lower_length * (hip + knee).cos() + self.foot_radius
    }

    /// Validates the physical invariants.
    pub fn validate(&self) -> Result<()> {
        let positives = [
            ("base_mass", self.base_mass),
            ("base_length", self.base_length),
            ("base_inertia", self.base_inertia),
            ("upper_mass", self.upper_mass),
            ("upper_length", self.upper_length),
            ("upper_inertia", self.upper_inertia),
            ("lower_mass", self.lower_mass),
            ("lower_length", self.lower_length),
            ("lower_inertia", self.lower_inertia),
            ("foot_radius", self.foot_radius),
            ("torque_limit", self.torque_limit),
            ("gravity", self.gravity),
        ];
        for (name, v) in positives {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("{name} must be strictly positive")));
            }
        }
        for (i, lim) in self.joint_limits.iter().enumerate() {
            if !(lim[0] < lim[1]) {
                return Err(Error::Config(format!(
                    "joint_limits[{i}] must form a non-empty interval"
                )));
            }
        }
        self.contact.validate()?;
        Ok(())
    }
}
