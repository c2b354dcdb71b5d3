//! Measurement factors: residuals with analytic Jacobians.

mod features;
mod imu;
mod prior;

pub use features::{
    line_factor, plane_factor, point_factor, LineEvaluation, LineMeasurement, PlaneEvaluation,
    PlaneMeasurement, PointEvaluation, PointMeasurement,
};
pub use imu::{
    imu_factor, preintegrate, ImuEvaluation, ImuNoise, ImuSample, PreintegratedImu, GRAVITY,
};
pub use prior::{prior_factor, LinearPrior, PriorLinearization};

use nalgebra::{DMatrix, DVector};

use crate::state::VarKey;

/// Residual and per-variable Jacobian blocks of one factor. Each block has
/// `residual.len()` rows and the tangent dimension of its variable as columns.
#[derive(Clone, Debug)]
pub struct FactorEvaluation {
    pub residual: DVector<f64>,
    pub jacobians: Vec<(VarKey, DMatrix<f64>)>,
}

impl FactorEvaluation {
    pub fn dim(&self) -> usize {
        self.residual.len()
    }

    pub fn jacobian(&self, key: &VarKey) -> Option<&DMatrix<f64>> {
        self.jacobians.iter().find(|(k, _)| k == key).map(|(_, j)| j)
    }
}
