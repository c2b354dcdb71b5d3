//! Online association of database priors to window features.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{key_type, measure, measure_kind, PriorKind, StructurePrior, StructurePriorDB, Thresholds};
use crate::error::Result;
use crate::factors::FactorEvaluation;
use crate::state::{SlidingWindowState, VarKey};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssociationConfig {
    pub thresholds: Thresholds,
    pub tau_parallel: f64,
    pub kinds: Vec<PriorKind>,
}

impl Default for AssociationConfig {
    fn default() -> Self {
        Self {
            thresholds: Thresholds::default(),
            tau_parallel: measure::TAU_PARALLEL,
            kinds: PriorKind::ALL
                .into_iter()
                .filter(|k| !matches!(k, PriorKind::PointPointDist | PriorKind::LineLineSkewDist))
                .collect(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriorComponent {
    pub kind: PriorKind,
    pub prior: StructurePrior,
}

/// Structure-prior factor between two window features. Angle and distance
/// priors of the same pair are stacked into one factor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssociatedPriorFactor {
    pub a: VarKey,
    pub b: VarKey,
    pub components: Vec<PriorComponent>,
}

impl AssociatedPriorFactor {
    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn information(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_iterator(
            self.components.len(),
            self.components.iter().map(|c| 1.0 / (c.prior.sigma * c.prior.sigma)),
        ))
    }
}

/// Residuals `h_s(x_a, x_b) - z_s` for every stacked component. Distance
/// components are evaluated without the parallel gate once associated.
pub fn evaluate_structure_factor(
    f: &AssociatedPriorFactor,
    state: &SlidingWindowState,
) -> Result<FactorEvaluation> {
    let xa = state.get(&f.a).expect("prior feature missing");
    let xb = state.get(&f.b).expect("prior feature missing");
    let m = f.components.len();
    let mut residual = DVector::zeros(m);
    let mut ja = DMatrix::zeros(m, f.a.dim());
    let mut jb = DMatrix::zeros(m, f.b.dim());
    for (i, c) in f.components.iter().enumerate() {
        let (v, j1, j2) = measure_kind(c.kind, &xa, &xb, 0.0, false)?
            .expect("ungated measurement always yields a value");
        residual[i] = v - c.prior.value;
        ja.row_mut(i).copy_from(&j1.row(0));
        jb.row_mut(i).copy_from(&j2.row(0));
    }
    Ok(FactorEvaluation {
        residual,
        jacobians: vec![(f.a, ja), (f.b, jb)],
    })
}

/// Attach every database prior whose value lies within `tau_s` of the
/// estimated quantity for a pair of confident features. The result is sorted
/// by feature keys and does not depend on the window's insertion order.
pub fn associate(
    state: &SlidingWindowState,
    confident: impl Fn(&VarKey) -> bool,
    db: &StructurePriorDB,
    cfg: &AssociationConfig,
) -> Vec<AssociatedPriorFactor> {
    let mut keys: Vec<VarKey> = state
        .keys()
        .into_iter()
        .filter(|k| !k.is_imu() && confident(k))
        .collect();
    keys.sort();

    let mut out = Vec::new();
    for (i, a) in keys.iter().enumerate() {
        for b in &keys[i + 1..] {
            let (ta, tb) = (key_type(a).unwrap(), key_type(b).unwrap());
            let xa = state.get(a).unwrap();
            let xb = state.get(b).unwrap();
            let mut components = Vec::new();
            for &kind in &cfg.kinds {
                if kind.endpoints() != (ta, tb) {
                    continue;
                }
                let Ok(Some((value, _, _))) = measure_kind(kind, &xa, &xb, cfg.tau_parallel, true)
                else {
                    continue;
                };
                if let Some(p) = db.nearest(kind, value) {
                    if (value - p.value).abs() <= cfg.thresholds.for_kind(kind) {
                        components.push(PriorComponent { kind, prior: *p });
                    }
                }
            }
            if !components.is_empty() {
                out.push(AssociatedPriorFactor {
                    a: *a,
                    b: *b,
                    components,
                });
            }
        }
    }
    out
}
