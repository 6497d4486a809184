//! Articulated rigid-body dynamics in minimal coordinates.
//!
//! The mass matrix is assembled from per-link COM Jacobians,
//! `M = sum_i m_i J_i^T J_i + I_i w_i w_i^T`, the bias force from the
//! velocity-product accelerations, and contacts enter as external forces at
//! the foot points. Integration is semi-implicit Euler: velocities update
//! first, then positions use the new velocities.

use nalgebra::{Cholesky, SMatrix, SVector, Vector2};

use super::kinematics::{FootState, Kinematics, N_DOF, N_JOINTS, N_LINKS};
use super::model::RobotModel;
use super::state::{GenVec, RobotState};
use super::terrain::Terrain;
use crate::{Error, Result};

type MassMat = SMatrix<f64, N_DOF, N_DOF>;

/// Spring-damper ground contact with a friction cone.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContactParams {
    /// Normal spring stiffness (N/m).
    pub stiffness: f64,
    /// Normal damping (N s/m).
    pub damping: f64,
    /// Friction coefficient.
    pub friction: f64,
}

impl Default for ContactParams {
    fn default() -> Self {
        Self {
            stiffness: 1.0e4,
            damping: 200.0,
            friction: 0.7,
        }
    }
}

impl ContactParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.stiffness > 0.0) {
            return Err(Error::Config("contact stiffness must be > 0".into()));
        }
        if !(self.damping >= 0.0) {
            return Err(Error::Config("contact damping must be >= 0".into()));
        }
        if !(self.friction >= 0.0) {
            return Err(Error::Config("friction coefficient must be >= 0".into()));
        }
        Ok(())
    }
}

/// Stiction viscosity as a multiple of the deadbeat gain `m_eff / dt`;
/// folded through the implicit form it removes this fraction of the slip
/// velocity per step: 4 -> 80%.
const STICTION_GAIN: f64 = 4.0;

/// Per-foot force from the penalty contact model, in world axes.
///
/// `penetration` is `terrain + foot_radius - foot_z`; non-positive values
/// mean no contact and produce zero force. Viscous terms use the implicit
/// one-step form `c / (1 + c dt / m_eff)`: the raw coefficients can exceed
/// the explicit stability bound when the foot's apparent mass dips below
/// ~0.5 kg in stretched configurations, and the implicit gain contracts the
/// relative velocity monotonically for any coefficient. At rest the normal
/// force reduces to the plain spring value. The tangential force is clamped
/// to the friction cone.
pub fn contact_force(
    params: &ContactParams,
    penetration: f64,
    penetration_rate: f64,
    slip_vel: f64,
    m_eff_x: f64,
    m_eff_z: f64,
    dt: f64,
) -> Vector2<f64> {
    if penetration <= 0.0 {
        return Vector2::zeros();
    }
    let damping = params.damping / (1.0 + params.damping * dt / m_eff_z);
    let normal = (params.stiffness * penetration + damping * penetration_rate).max(0.0);
    let bound = params.friction * normal;
    let stiction = STICTION_GAIN * m_eff_x / dt;
    let c_t = stiction / (1.0 + STICTION_GAIN);
    let tangential = (-c_t * slip_vel).clamp(-bound, bound);
    Vector2::new(tangential, normal)
}

/// True when the foot sphere touches or penetrates the ground. The boundary
/// case counts as contact.
pub fn contact_flags(model: &RobotModel, state: &RobotState, terrain: &Terrain) -> [bool; 2] {
    let kin = Kinematics::compute(model, &state.q, &state.v);
    let mut flags = [false; 2];
    for leg in 0..2 {
        let foot = &kin.feet[leg];
        flags[leg] = foot.pos.y - terrain.height(foot.pos.x) <= model.foot_radius;
    }
    flags
}

/// Advances the state by one `dt` under the given joint torques.
///
/// Faults if the state leaves the finite range, which points at a blown-up
/// contact or torque input rather than a recoverable condition.
pub fn dynamics_step(
    model: &RobotModel,
    state: &mut RobotState,
    terrain: &Terrain,
    tau: &[f64; N_JOINTS],
    dt: f64,
) -> Result<()> {
    let kin = Kinematics::compute(model, &state.q, &state.v);
    let masses = model.link_masses();
    let inertias = model.link_inertias();

    let mut m = MassMat::zeros();
    let mut rhs = GenVec::zeros();
    for li in 0..N_LINKS {
        let j = &kin.com_jac[li];
        let w = &kin.ang_jac[li];
        m += masses[li] * j.transpose() * j + inertias[li] * w * w.transpose();
        // Gravity minus the velocity-product bias, both through the same Jacobian.
        let lin = Vector2::new(0.0, -model.gravity * masses[li]) - masses[li] * kin.com_vp[li];
        rhs += j.transpose() * lin;
    }
    for (k, t) in tau.iter().enumerate() {
        rhs[3 + k] += t;
    }

    let chol = Cholesky::new(m)
        .ok_or_else(|| Error::EnvFault("mass matrix lost positive definiteness".into()))?;

    for leg in 0..2 {
        let foot = &kin.feet[leg];
        let penetration = terrain.height(foot.pos.x) + model.foot_radius - foot.pos.y;
        if penetration <= 0.0 {
            continue;
        }
        let m_eff_x = foot_effective_mass(&chol, foot, 0);
        let m_eff_z = foot_effective_mass(&chol, foot, 1);
        let force = contact_force(
            &model.contact,
            penetration,
            -foot.vel.y,
            foot.vel.x,
            m_eff_x,
            m_eff_z,
            dt,
        );
        rhs += foot.jac.transpose() * force;
    }

    let qdd = chol.solve(&rhs);
    state.v += qdd * dt;
    state.q += state.v * dt;
    state.time += dt;
    if !state.is_finite() {
        return Err(Error::EnvFault(format!(
            "non-finite state at t={:.4}",
            state.time
        )));
    }
    Ok(())
}

/// Apparent mass seen by a unit force along `axis` at the foot point:
/// `1 / (J_a M^-1 J_a^T)`.
fn foot_effective_mass(
    chol: &Cholesky<f64, nalgebra::Const<N_DOF>>,
    foot: &FootState,
    axis: usize,
) -> f64 {
    let ja: SVector<f64, N_DOF> = foot.jac.row(axis).transpose();
    let y = chol.solve(&ja);
    1.0 / ja.dot(&y).max(1e-9)
}

/// Kinetic plus gravitational potential energy of the full mechanism.
pub fn mechanical_energy(model: &RobotModel, state: &RobotState) -> f64 {
    let kin = Kinematics::compute(model, &state.q, &state.v);
    let masses = model.link_masses();
    let inertias = model.link_inertias();
    let mut e = 0.0;
    for li in 0..N_LINKS {
        let vel = kin.com_jac[li] * state.v;
        let omega = kin.ang_jac[li].dot(&state.v);
        e += 0.5 * masses[li] * vel.norm_squared();
        e += 0.5 * inertias[li] * omega * omega;
        e += masses[li] * model.gravity * kin.com[li].y;
    }
    e
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// State with zero pitch and joint rates so gravity is the only
    /// generalized force and the base accelerates at exactly -g.
    fn ballistic_state(z0: f64, vx: f64, vz: f64) -> RobotState {
        let model = RobotModel::default();
        let mut s = RobotState::at_pose(0.0, z0, &model.nominal_pose);
        s.v[0] = vx;
        s.v[1] = vz;
        s
    }

    #[test]
    fn ballistic_flight_matches_discrete_closed_form() {
        // Semi-implicit Euler under constant acceleration -g gives exactly
        // z_n = z0 + n dt v0 - g dt^2 n (n + 1) / 2.
        let model = RobotModel::default();
        let terrain = Terrain::flat();
        let dt = 0.0025;
        let (z0, vx, vz) = (5.0, 0.3, 1.0);
        let mut s = ballistic_state(z0, vx, vz);
        let tau = [0.0; N_JOINTS];
        for n in 1..=100u32 {
            dynamics_step(&model, &mut s, &terrain, &tau, dt).unwrap();
            let nf = f64::from(n);
            let z_expect = z0 + nf * dt * vz - model.gravity * dt * dt * nf * (nf + 1.0) / 2.0;
            let x_expect = nf * dt * vx;
            assert_relative_eq!(s.q[1], z_expect, epsilon = 1e-9);
            assert_relative_eq!(s.q[0], x_expect, epsilon = 1e-9);
            assert!(s.v[2].abs() < 1e-12, "no pitch excitation in free fall");
        }
    }

    #[test]
    fn free_flight_energy_drift_under_tenth_percent_per_second() {
        // Semi-implicit Euler staggers position and velocity by half a step:
        // under constant gravity the discrete height is z(t_n) - g dt^2 n / 2,
        // so naive E(q_n, v_n) reads low by exactly M g^2 dt^2 / 2 per step
        // for ANY trajectory. That sampling offset is removed here; what
        // remains measures real integration error of the articulated motion.
        let model = RobotModel::default();
        let terrain = Terrain::flat();
        let dt = 0.0025;
        let mut s = ballistic_state(6.0, 0.5, 2.0);
        // Excite rotation and all joints so every inertia term participates.
        s.v[2] = 0.8;
        for j in 3..7 {
            s.v[j] = if j % 2 == 0 { -0.6 } else { 0.6 };
        }
        let e0 = mechanical_energy(&model, &s);
        let sampling_offset = 0.5 * model.total_mass() * model.gravity * model.gravity * dt * dt;
        let tau = [0.0; N_JOINTS];
        let mut max_residual: f64 = 0.0;
        for n in 1..=400u32 {
            dynamics_step(&model, &mut s, &terrain, &tau, dt).unwrap();
            let e = mechanical_energy(&model, &s) + f64::from(n) * sampling_offset;
            max_residual = max_residual.max((e - e0).abs() / e0.abs());
        }
        let kin = Kinematics::compute(&model, &s.q, &s.v);
        assert!(
            kin.feet[0].pos.y > 0.5 && kin.feet[1].pos.y > 0.5,
            "stayed airborne for the whole second"
        );
        assert!(
            max_residual < 1e-3,
            "energy drift {max_residual:.2e} over 1 s"
        );
    }

    #[test]
    fn contact_force_hand_values() {
        let p = ContactParams::default();
        let dt = 0.0025;
        // Pure spring: 1 mm penetration, at rest. The rate terms vanish, so
        // this is the raw stiffness value.
        let f = contact_force(&p, 1.0e-3, 0.0, 0.0, 1.0, 1.0, dt);
        assert_relative_eq!(f.y, 10.0, epsilon = 1e-12);
        assert_eq!(f.x, 0.0);
        // Damping adds to the normal on approach, through the implicit gain.
        let d_imp = 200.0 / (1.0 + 200.0 * dt / 1.0);
        let f = contact_force(&p, 1.0e-3, 0.05, 0.0, 1.0, 1.0, dt);
        assert_relative_eq!(f.y, 10.0 + d_imp * 0.05, epsilon = 1e-12);
        // Separation faster than the spring can hold: clamped at zero.
        let f = contact_force(&p, 1.0e-3, -1.0, 0.0, 1.0, 1.0, dt);
        assert_eq!(f.y, 0.0);
        // No penetration, no force.
        let f = contact_force(&p, -1.0e-3, 0.0, 1.0, 1.0, 1.0, dt);
        assert_eq!(f, Vector2::zeros());
        // Slip clamped to the friction cone.
        let f = contact_force(&p, 1.0e-2, 0.0, 2.0, 1.0, 1.0, dt);
        let n = 1.0e4 * 1.0e-2;
        assert_relative_eq!(f.y, n, epsilon = 1e-12);
        assert_relative_eq!(f.x, -p.friction * n, epsilon = 1e-12);
        // Slow slip inside the cone: 80% of the deadbeat gain.
        let f = contact_force(&p, 1.0e-2, 0.0, 1.0e-4, 1.5, 1.5, dt);
        assert_relative_eq!(f.x, -0.8 * 1.5 / dt * 1.0e-4, epsilon = 1e-12);
        // Light apparent mass pulls the damping gain down hard.
        let d_small = 200.0 / (1.0 + 200.0 * dt / 0.2);
        let f = contact_force(&p, 1.0e-3, 0.05, 0.0, 0.2, 0.2, dt);
        assert_relative_eq!(f.y, 10.0 + d_small * 0.05, epsilon = 1e-12);
    }

    #[test]
    fn contact_flags_at_standing_pose() {
        let model = RobotModel::default();
        let terrain = Terrain::flat();
        let s = RobotState::standing(&model, 0.0);
        assert_eq!(contact_flags(&model, &s, &terrain), [true, true]);
        let mut s2 = s.clone();
        s2.q[1] += 1.0e-3;
        assert_eq!(contact_flags(&model, &s2, &terrain), [false, false]);
    }

    #[test]
    fn contact_flag_boundary_counts_as_contact() {
        // Straight-down legs and dyadic heights keep the FK exact in binary
        // floating point, so the boundary case is hit bit-exactly.
        let model = RobotModel {
            foot_radius: 0.0625,
            ..RobotModel::default()
        };
        let terrain = Terrain::flat();
        let s = RobotState::at_pose(0.0, 0.5625, &[0.0; N_JOINTS]);
        let kin = Kinematics::compute(&model, &s.q, &s.v);
        assert_eq!(kin.feet[0].pos.y, 0.0625, "construction is exact");
        assert_eq!(contact_flags(&model, &s, &terrain), [true, true]);
        let mut above = s.clone();
        above.q[1] = 0.5625 + 2.0_f64.powi(-20);
        assert_eq!(contact_flags(&model, &above, &terrain), [false, false]);
    }

    #[test]
    fn standing_with_joint_pd_settles_near_static_height() {
        let model = RobotModel::default();
        let terrain = Terrain::flat();
        let dt = 0.0025;
        let mut s = RobotState::standing(&model, 0.0);
        for _ in 0..1600 {
            let mut tau = [0.0; N_JOINTS];
            for j in 0..N_JOINTS {
                let err = model.nominal_pose[j] - s.q[3 + j];
                tau[j] = (80.0 * err - 2.0 * s.v[3 + j]).clamp(-40.0, 40.0);
            }
            dynamics_step(&model, &mut s, &terrain, &tau, dt).unwrap();
        }
        // Below the geometric height: contact springs take ~10 mm and the
        // PD joints sag under the gravity torque at the knees (kp = 80 holds
        // roughly 0.1 rad of error against ~9.5 N m).
        let geo = model.standing_height();
        assert!(
            s.q[1] < geo && s.q[1] > geo - 0.07,
            "settled at {:.4}, geometric height {:.4}",
            s.q[1],
            geo
        );
        assert!(s.v.norm() < 0.05, "residual motion {:.3}", s.v.norm());
        assert!(s.q[2].abs() < 0.05, "pitch stays level, got {:.3}", s.q[2]);
    }
}
