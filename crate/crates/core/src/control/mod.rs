//! Low-level actuation: Stanley steering and the longitudinal error-state MPC.

mod bicycle;
mod mpc;
mod stanley;

pub use bicycle::KinematicBicycle;
pub use mpc::{
    discretize, mpc_command, mpc_solve, CondensedQp, MpcCommand, MpcError, MpcParams, MpcSetup,
    MpcSolution,
};
pub use stanley::{stanley_law, stanley_steer, LateralState, StanleyOutput, StanleyParams};
