use nalgebra::{DMatrix, Matrix3, Matrix6, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::factors::{
    imu_factor, line_factor, plane_factor, point_factor, FactorEvaluation, LineMeasurement,
    LinearPrior, PlaneMeasurement, PointMeasurement, PreintegratedImu,
};
use crate::priors::{evaluate_structure_factor, AssociatedPriorFactor};
use crate::state::{SlidingWindowState, VarKey};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FactorFamily {
    Prior,
    Imu,
    Point,
    Line,
    Plane,
    Structure,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub enum Factor {
    Prior(LinearPrior),
    Imu {
        from: u64,
        to: u64,
        pre: PreintegratedImu,
        gravity: Vector3<f64>,
        info: DMatrix<f64>,
    },
    Point {
        frame: u64,
        id: u32,
        m: PointMeasurement,
        info: Matrix3<f64>,
    },
    Line {
        frame: u64,
        id: u32,
        m: LineMeasurement,
        info: Matrix6<f64>,
    },
    Plane {
        frame: u64,
        id: u32,
        m: PlaneMeasurement,
        info: Matrix3<f64>,
    },
    Structure {
        factor: AssociatedPriorFactor,
        info: DMatrix<f64>,
    },
}

fn invert_spd<const N: usize>(m: &nalgebra::SMatrix<f64, N, N>) -> nalgebra::SMatrix<f64, N, N> {
    let inv = m
        .cholesky()
        .expect("measurement covariance must be positive definite")
        .inverse();
    (inv + inv.transpose()) * 0.5
}

/// Spread a 6-column pose Jacobian into the 15-column IMU-state tangent.
fn pose_block(rows: usize, j: &[f64]) -> DMatrix<f64> {
    let pose = DMatrix::from_column_slice(rows, 6, j);
    let mut out = DMatrix::zeros(rows, 15);
    out.columns_mut(0, 6).copy_from(&pose);
    out
}

impl Factor {
    pub fn imu(from: u64, to: u64, pre: PreintegratedImu, gravity: Vector3<f64>) -> Self {
        let info = invert_spd(&pre.cov);
        Factor::Imu {
            from,
            to,
            pre,
            gravity,
            info: DMatrix::from_column_slice(15, 15, info.as_slice()),
        }
    }

    pub fn point(frame: u64, id: u32, m: PointMeasurement) -> Self {
        Factor::Point {
            frame,
            id,
            info: invert_spd(&m.sigma),
            m,
        }
    }

    pub fn line(frame: u64, id: u32, m: LineMeasurement) -> Self {
        Factor::Line {
            frame,
            id,
            info: invert_spd(&m.sigma),
            m,
        }
    }

    pub fn plane(frame: u64, id: u32, m: PlaneMeasurement) -> Self {
        Factor::Plane {
            frame,
            id,
            info: invert_spd(&m.sigma),
            m,
        }
    }

    pub fn structure(factor: AssociatedPriorFactor) -> Self {
        let info = factor.information();
        Factor::Structure { factor, info }
    }

    pub fn family(&self) -> FactorFamily {
        match self {
            Factor::Prior(_) => FactorFamily::Prior,
            Factor::Imu { .. } => FactorFamily::Imu,
            Factor::Point { .. } => FactorFamily::Point,
            Factor::Line { .. } => FactorFamily::Line,
            Factor::Plane { .. } => FactorFamily::Plane,
            Factor::Structure { .. } => FactorFamily::Structure,
        }
    }

    /// Feature and structure factors are wrapped in the Huber loss.
    pub fn is_robust(&self) -> bool {
        !matches!(self, Factor::Prior(_) | Factor::Imu { .. })
    }

    pub fn keys(&self) -> Vec<VarKey> {
        match self {
            Factor::Prior(p) => p.keys.clone(),
            Factor::Imu { from, to, .. } => vec![VarKey::Imu(*from), VarKey::Imu(*to)],
            Factor::Point { frame, id, .. } => vec![VarKey::Imu(*frame), VarKey::Point(*id)],
            Factor::Line { frame, id, .. } => vec![VarKey::Imu(*frame), VarKey::Line(*id)],
            Factor::Plane { frame, id, .. } => vec![VarKey::Imu(*frame), VarKey::Plane(*id)],
            Factor::Structure { factor, .. } => vec![factor.a, factor.b],
        }
    }

    pub fn touches(&self, key: &VarKey) -> bool {
        match self {
            Factor::Prior(p) => p.keys.contains(key),
            Factor::Imu { from, to, .. } => {
                *key == VarKey::Imu(*from) || *key == VarKey::Imu(*to)
            }
            Factor::Point { frame, id, .. } => {
                *key == VarKey::Imu(*frame) || *key == VarKey::Point(*id)
            }
            Factor::Line { frame, id, .. } => {
                *key == VarKey::Imu(*frame) || *key == VarKey::Line(*id)
            }
            Factor::Plane { frame, id, .. } => {
                *key == VarKey::Imu(*frame) || *key == VarKey::Plane(*id)
            }
            Factor::Structure { factor, .. } => *key == factor.a || *key == factor.b,
        }
    }

    /// Residual, Jacobians and information matrix. Priors are handled through
    /// [`LinearPrior::linearize`] instead, but still evaluate to `x ⊟ mean`.
    pub fn evaluate(&self, state: &SlidingWindowState) -> Result<(FactorEvaluation, DMatrix<f64>)> {
        Ok(match self {
            Factor::Prior(p) => (p.evaluate(state), p.info.clone()),
            Factor::Imu {
                from,
                to,
                pre,
                gravity,
                info,
            } => {
                let si = &state.imu[from];
                let sj = &state.imu[to];
                let e = imu_factor(si, sj, pre, gravity);
                (
                    FactorEvaluation {
                        residual: DMatrix::from_column_slice(15, 1, e.residual.as_slice())
                            .column(0)
                            .into_owned(),
                        jacobians: vec![
                            (VarKey::Imu(*from), DMatrix::from_column_slice(15, 15, e.j_i.as_slice())),
                            (VarKey::Imu(*to), DMatrix::from_column_slice(15, 15, e.j_j.as_slice())),
                        ],
                    },
                    info.clone(),
                )
            }
            Factor::Point { frame, id, m, info } => {
                let e = point_factor(&state.imu[frame].pose, &state.points[id], m);
                (
                    FactorEvaluation {
                        residual: nalgebra::DVector::from_column_slice(e.residual.as_slice()),
                        jacobians: vec![
                            (VarKey::Imu(*frame), pose_block(3, e.j_pose.as_slice())),
                            (VarKey::Point(*id), DMatrix::from_column_slice(3, 3, e.j_point.as_slice())),
                        ],
                    },
                    DMatrix::from_column_slice(3, 3, info.as_slice()),
                )
            }
            Factor::Line { frame, id, m, info } => {
                let e = line_factor(&state.imu[frame].pose, &state.lines[id], m)?;
                (
                    FactorEvaluation {
                        residual: nalgebra::DVector::from_column_slice(e.residual.as_slice()),
                        jacobians: vec![
                            (VarKey::Imu(*frame), pose_block(6, e.j_pose.as_slice())),
                            (VarKey::Line(*id), DMatrix::from_column_slice(6, 4, e.j_line.as_slice())),
                        ],
                    },
                    DMatrix::from_column_slice(6, 6, info.as_slice()),
                )
            }
            Factor::Plane { frame, id, m, info } => {
                let e = plane_factor(&state.imu[frame].pose, &state.planes[id], m)?;
                (
                    FactorEvaluation {
                        residual: nalgebra::DVector::from_column_slice(e.residual.as_slice()),
                        jacobians: vec![
                            (VarKey::Imu(*frame), pose_block(3, e.j_pose.as_slice())),
                            (VarKey::Plane(*id), DMatrix::from_column_slice(3, 3, e.j_plane.as_slice())),
                        ],
                    },
                    DMatrix::from_column_slice(3, 3, info.as_slice()),
                )
            }
            Factor::Structure { factor, info } => {
                (evaluate_structure_factor(factor, state)?, info.clone())
            }
        })
    }
}

/// Factors of one window. Variables live in the [`SlidingWindowState`] the
/// graph is evaluated against.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct FactorGraph {
    pub factors: Vec<Factor>,
}

impl FactorGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, f: Factor) {
        self.factors.push(f);
    }

    pub fn len(&self) -> usize {
        self.factors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.factors.is_empty()
    }

    pub fn count(&self, family: FactorFamily) -> usize {
        self.factors.iter().filter(|f| f.family() == family).count()
    }

    /// Every factor references only variables present in `state`.
    pub fn is_consistent_with(&self, state: &SlidingWindowState) -> bool {
        self.factors
            .iter()
            .all(|f| f.keys().iter().all(|k| state.contains(k)))
    }
}
