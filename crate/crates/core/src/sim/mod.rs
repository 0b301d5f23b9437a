//! Fixed-timestep kinematic simulation of car-like bodies.

mod collision;
mod vehicle;
mod world;

pub use collision::{check_collision, ObstacleSet};
pub use vehicle::{
    apply_control, step_kinematics, AccelCmd, ControlInput, SteerCmd, VehicleParams, VehicleState,
};
pub use world::{
    observation_from, step_world, Environment, Terminal, TickConfig, TickOutcome, World, DEFAULT_DT,
};
