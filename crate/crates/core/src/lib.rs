//! Sliding-window inertial estimation over point, line and plane features,
//! with optional structure-prior factors chosen by information gain.

pub mod error;
pub mod estimator;
pub mod factors;
pub mod geometry;
pub mod priors;
pub mod selection;
pub mod so3;
pub mod solver;
pub mod state;

pub use error::{Error, Result};
