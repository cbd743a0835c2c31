//! Simulation and deep Q-learning for a Src → LEO satellite → HAP → Dst
//! decode-and-forward relay chain, with fixed-relay and direct baselines.

pub mod agent;
pub mod baselines;
pub mod channel;
pub mod cli;
pub mod config;
pub mod env;
pub mod error;
pub mod io;
pub mod kinematics;
pub mod neural;
pub mod scenario;
pub mod trace;
pub mod vector;

pub use error::{Error, Result};
pub use scenario::{RelayArea, RewardParams, ScenarioConfig};
pub use vector::Vec3;
