//! Synthetic indoor scenarios: structured world, spline trajectory, IMU and
//! feature measurements, and trajectory error metrics.

pub mod dump;
mod error;
pub mod eval;
pub mod imu;
pub mod measure;
pub mod scenario;
pub mod trajectory;
pub mod world;

pub use error::{Result, SimError};
pub use eval::{evaluate_rmse, evaluate_rmse_with, Rmse};
pub use scenario::{simulate, Scenario, Simulation};
pub use world::{generate_world, World, WorldSpec};
