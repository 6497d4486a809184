//! Forward kinematics and Jacobians for the planar robot.
//!
//! Generalized coordinates, in order:
//! `[base_x, base_z, pitch, front_hip, front_knee, hind_hip, hind_knee]`.
//! Joint angles are zero with both legs pointing straight down; positive
//! angles swing the distal link toward +x. A leg segment with absolute
//! angle `phi` (pitch plus the joint angles above it) points along
//! `u(phi) = (sin phi, -cos phi)`.

use nalgebra::{Matrix2, SMatrix, SVector, Vector2};

use super::model::RobotModel;
use super::state::GenVec;

/// Generalized coordinate count: planar base pose plus four joints.
pub const N_DOF: usize = 7;
/// Actuated joints: `[front_hip, front_knee, hind_hip, hind_knee]`.
pub const N_JOINTS: usize = 4;
/// Rigid bodies: base, two upper legs, two lower legs.
pub const N_LINKS: usize = 5;

/// 2 x 7 point Jacobian.
pub type PointJac = SMatrix<f64, 2, N_DOF>;

/// Body identifiers, used to index per-link arrays.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinkIndex {
    Base = 0,
    FrontUpper = 1,
    FrontLower = 2,
    HindUpper = 3,
    HindLower = 4,
}

/// Foot point state for one leg.
#[derive(Debug, Clone, Copy)]
pub struct FootState {
    pub pos: Vector2<f64>,
    pub vel: Vector2<f64>,
    pub jac: PointJac,
}

/// Everything the dynamics and observation code needs from one FK pass.
#[derive(Debug, Clone)]
pub struct Kinematics {
    /// World COM position per link.
    pub com: [Vector2<f64>; N_LINKS],
    /// COM Jacobian per link.
    pub com_jac: [PointJac; N_LINKS],
    /// Velocity-product COM acceleration per link (the `Jdot qdot` term).
    pub com_vp: [Vector2<f64>; N_LINKS],
    /// Angular Jacobian per link; constant rows of ones over contributing DoF.
    pub ang_jac: [SVector<f64, N_DOF>; N_LINKS],
    /// Hip pivot positions, `[front, hind]`.
    pub hips: [Vector2<f64>; 2],
    /// Knee pivot positions, `[front, hind]`.
    pub knees: [Vector2<f64>; 2],
    /// Foot point states, `[front, hind]`.
    pub feet: [FootState; 2],
}

fn unit(phi: f64) -> Vector2<f64> {
    Vector2::new(phi.sin(), -phi.cos())
}

fn unit_deriv(phi: f64) -> Vector2<f64> {
    Vector2::new(phi.cos(), phi.sin())
}

fn rot(theta: f64) -> Matrix2<f64> {
    let (s, c) = theta.sin_cos();
    Matrix2::new(c, -s, s, c)
}

fn rot_deriv(theta: f64) -> Matrix2<f64> {
    let (s, c) = theta.sin_cos();
    Matrix2::new(-s, -c, c, -s)
}

impl Kinematics {
    /// One full FK pass for the given configuration and velocity.
    pub fn compute(model: &RobotModel, q: &GenVec, v: &GenVec) -> Self {
        let base = Vector2::new(q[0], q[1]);
        let theta = q[2];
        let theta_dot = v[2];
        let r = rot(theta);
        let dr = rot_deriv(theta);

        let mut com = [Vector2::zeros(); N_LINKS];
        let mut com_jac = [PointJac::zeros(); N_LINKS];
        let mut com_vp = [Vector2::zeros(); N_LINKS];
        let mut ang_jac = [SVector::<f64, N_DOF>::zeros(); N_LINKS];

        com[0] = base;
        com_jac[0][(0, 0)] = 1.0;
        com_jac[0][(1, 1)] = 1.0;
        ang_jac[0][2] = 1.0;

        let mut hips = [Vector2::zeros(); 2];
        let mut knees = [Vector2::zeros(); 2];
        let mut feet = [FootState {
            pos: Vector2::zeros(),
            vel: Vector2::zeros(),
            jac: PointJac::zeros(),
        }; 2];

        for leg in 0..2 {
            // Column indices of this leg's hip and knee DoF.
            let hip_col = 3 + 2 * leg;
            let knee_col = hip_col + 1;
            let sign = if leg == 0 { 1.0 } else { -1.0 };
            let offset = Vector2::new(sign * model.base_length / 2.0, 0.0);

            let hip = base + r * offset;
            let phi_u = theta + q[hip_col];
            let phi_l = phi_u + q[knee_col];
            let phi_u_dot = theta_dot + v[hip_col];
            let phi_l_dot = phi_u_dot + v[knee_col];
            let u_u = unit(phi_u);
            let u_l = unit(phi_l);
            let du_u = unit_deriv(phi_u);
            let du_l = unit_deriv(phi_l);
            let lu = model.upper_length;
            let ll = model.lower_length;

            hips[leg] = hip;
            knees[leg] = hip + lu * u_u;

            // Shared pivot terms: d(hip)/dtheta and the ballistic part of vp.
            let hip_dtheta = dr * offset;
            let hip_vp = -(r * offset) * theta_dot * theta_dot;

            // Upper leg COM at half length along u_u.
            let li = 1 + 2 * leg;
            com[li] = hip + (lu / 2.0) * u_u;
            let j = &mut com_jac[li];
            j[(0, 0)] = 1.0;
            j[(1, 1)] = 1.0;
            let dtheta = hip_dtheta + (lu / 2.0) * du_u;
            j.set_column(2, &dtheta);
            j.set_column(hip_col, &((lu / 2.0) * du_u));
            com_vp[li] = hip_vp - (lu / 2.0) * u_u * phi_u_dot * phi_u_dot;
            ang_jac[li][2] = 1.0;
            ang_jac[li][hip_col] = 1.0;

            // Lower leg COM: full upper segment plus half the lower.
            let li = 2 + 2 * leg;
            com[li] = hip + lu * u_u + (ll / 2.0) * u_l;
            let j = &mut com_jac[li];
            j[(0, 0)] = 1.0;
            j[(1, 1)] = 1.0;
            let dtheta = hip_dtheta + lu * du_u + (ll / 2.0) * du_l;
            j.set_column(2, &dtheta);
            j.set_column(hip_col, &(lu * du_u + (ll / 2.0) * du_l));
            j.set_column(knee_col, &((ll / 2.0) * du_l));
            com_vp[li] = hip_vp
                - lu * u_u * phi_u_dot * phi_u_dot
                - (ll / 2.0) * u_l * phi_l_dot * phi_l_dot;
            ang_jac[li][2] = 1.0;
            ang_jac[li][hip_col] = 1.0;
            ang_jac[li][knee_col] = 1.0;

            // Foot point: both segments at full length.
            let mut jac = PointJac::zeros();
            jac[(0, 0)] = 1.0;
            jac[(1, 1)] = 1.0;
            let dtheta = hip_dtheta + lu * du_u + ll * du_l;
            jac.set_column(2, &dtheta);
            jac.set_column(hip_col, &(lu * du_u + ll * du_l));
            jac.set_column(knee_col, &(ll * du_l));
            let pos = hip + lu * u_u + ll * u_l;
            feet[leg] = FootState {
                pos,
                vel: jac * v,
                jac,
            };
        }

        Self {
            com,
            com_jac,
            com_vp,
            ang_jac,
            hips,
            knees,
            feet,
        }
    }
}
