//! Kinematic 2D driving simulator with ray sensing, procedurally generated
//! tracks with traffic, and two learning agents (neuroevolution and DQN).

pub mod dqn;
pub mod episode;
pub mod error;
pub mod eval;
pub mod evo;
pub mod formats;
pub mod geometry;
pub mod neuro;
pub mod pipeline;
pub mod rng;
pub mod scenarios;
pub mod sensing;
pub mod session;
pub mod sim;

pub use error::{Result, SimError};
