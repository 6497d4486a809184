//! Planar rigid-body simulation of a simplified quadruped analog.
//!
//! The robot is a floating base (x, z, pitch) with a front and a hind leg,
//! each leg two actuated rotational joints (hip, knee): 7 generalized DoF,
//! 4 of them actuated. Feet make penalty (spring-damper) contact with a 1D
//! heightfield terrain. Dynamics are minimal-coordinate: the mass matrix and
//! bias forces are assembled from per-link center-of-mass Jacobians each
//! step and integrated with semi-implicit Euler.

mod dynamics;
mod kinematics;
mod model;
mod state;
mod terrain;

pub use dynamics::{contact_flags, dynamics_step, mechanical_energy, ContactParams};
pub use kinematics::{FootState, Kinematics, LinkIndex, N_DOF, N_JOINTS, N_LINKS};
pub use model::RobotModel;
pub use state::RobotState;
pub use terrain::{generate_terrain, terrain_height, Terrain, TerrainKind, TerrainParams};
