//! Generalized state of the planar robot.

use nalgebra::SVector;

use crate::sim::kinematics::{N_DOF, N_JOINTS};
use crate::sim::RobotModel;

pub type GenVec = SVector<f64, N_DOF>;

/// Generalized positions, velocities and simulation time.
///
/// Coordinate order: `[base_x, base_z, pitch, front_hip, front_knee,
/// hind_hip, hind_knee]`. Pitch is the CCW rotation of the base in the
/// x-z plane (positive pitch tips the front of the base upward).
#[derive(Debug, Clone, PartialEq)]
pub struct RobotState {
    /// Generalized positions (m, m, rad, rad x4).
    pub q: GenVec,
    /// Generalized velocities (m/s, m/s, rad/s, rad/s x4).
    pub v: GenVec,
    /// Simulation time (s).
    pub time: f64,
}

impl RobotState {
    /// State with the base COM at `(base_x, base_z)`, zero pitch, the given
    /// joint pose and zero velocity.
    pub fn at_pose(base_x: f64, base_z: f64, joints: &[f64; N_JOINTS]) -> Self {
        let mut q = GenVec::zeros();
        q[0] = base_x;
        q[1] = base_z;
        for (i, &j) in joints.iter().enumerate() {
            q[3 + i] = j;
        }
        Self {
            q,
            v: GenVec::zeros(),
            time: 0.0,
        }
    }

    /// Nominal standing state on flat ground at `base_x`.
    ///
    /// The height carries a picometer-scale downward bias so the feet read
    /// as grounded under the exact boundary rule of the contact flags;
    /// summation-order rounding would otherwise leave them an ulp airborne.
    pub fn standing(model: &RobotModel, base_x: f64) -> Self {
        Self::at_pose(
            base_x,
            model.standing_height() - 1.0e-12,
            &model.nominal_pose,
        )
    }

    /// Joint positions in actuation order.
    pub fn joint_positions(&self) -> [f64; N_JOINTS] {
        [self.q[3], self.q[4], self.q[5], self.q[6]]
    }

    /// Joint velocities in actuation order.
    pub fn joint_velocities(&self) -> [f64; N_JOINTS] {
        [self.v[3], self.v[4], self.v[5], self.v[6]]
    }

    pub fn is_finite(&self) -> bool {
        self.q.iter().all(|x| x.is_finite())
            && self.v.iter().all(|x| x.is_finite())
            && self.time.is_finite()
    }
}
