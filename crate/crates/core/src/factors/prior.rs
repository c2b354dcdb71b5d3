//! Gaussian / linearized prior over a subset of window variables.
//!
//! The cost is the quadratic model `c0 + 2 b^T d + d^T H d` in the anchored
//! chart `d = x ⊟ anchor`. A plain Gaussian prior is the special case
//! `b = 0, c0 = 0, H = P^-1`; marginalization produces the general form.

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::FactorEvaluation;
use crate::so3::right_jacobian_inv;
use crate::state::{SlidingWindowState, VarKey, VarValue};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LinearPrior {
    pub keys: Vec<VarKey>,
    pub anchor: Vec<VarValue>,
    pub info: DMatrix<f64>,
    pub grad: DVector<f64>,
    pub cost0: f64,
}

/// Quadratic contribution of a prior at the current estimate, in the prior's
/// own key order.
#[derive(Clone, Debug)]
pub struct PriorLinearization {
    pub h: DMatrix<f64>,
    pub b: DVector<f64>,
    pub cost: f64,
}

impl LinearPrior {
    pub fn gaussian(keys: Vec<VarKey>, mean: Vec<VarValue>, info: DMatrix<f64>) -> Self {
        let n = info.nrows();
        assert_eq!(n, keys.iter().map(|k| k.dim()).sum::<usize>());
        Self {
            keys,
            anchor: mean,
            info,
            grad: DVector::zeros(n),
            cost0: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.info.nrows()
    }

    /// Chart coordinates of the current estimate and their derivative w.r.t.
    /// the window tangent.
    pub fn delta(&self, state: &SlidingWindowState) -> (DVector<f64>, DMatrix<f64>) {
        let n = self.dim();
        let mut d = DVector::zeros(n);
        let mut j = DMatrix::identity(n, n);
        let mut off = 0;
        for (key, anchor) in self.keys.iter().zip(&self.anchor) {
            let x = state.get(key).expect("prior variable missing from window");
            let dk = x.boxminus(anchor);
            d.rows_mut(off, dk.len()).copy_from(&dk);
            if key.is_imu() {
                let th = Vector3::new(dk[0], dk[1], dk[2]);
                let jr: Matrix3<f64> = right_jacobian_inv(&th);
                j.view_mut((off, off), (3, 3)).copy_from(&jr);
            }
            off += dk.len();
        }
        (d, j)
    }

    pub fn linearize(&self, state: &SlidingWindowState) -> PriorLinearization {
        let (d, j) = self.delta(state);
        let hd = &self.info * &d;
        let cost = self.cost0 + 2.0 * self.grad.dot(&d) + d.dot(&hd);
        // J is the identity apart from 3x3 rotation blocks; apply those only.
        let mut h = self.info.clone();
        let mut b = &self.grad + hd;
        let n = self.dim();
        for o in self.rotation_offsets() {
            let jr = j.view((o, o), (3, 3)).into_owned();
            let cols = h.columns(o, 3) * &jr;
            h.columns_mut(o, 3).copy_from(&cols);
            let rows = jr.transpose() * h.rows(o, 3);
            h.rows_mut(o, 3).copy_from(&rows);
            let bo = jr.transpose() * b.rows(o, 3);
            b.rows_mut(o, 3).copy_from(&bo);
        }
        debug_assert_eq!(h.nrows(), n);
        PriorLinearization { h, b, cost }
    }

    /// Quadratic-model cost only.
    pub fn cost(&self, state: &SlidingWindowState) -> f64 {
        let d = self.chart(state);
        self.cost0 + 2.0 * self.grad.dot(&d) + d.dot(&(&self.info * &d))
    }

    fn rotation_offsets(&self) -> Vec<usize> {
        let mut out = Vec::new();
        let mut off = 0;
        for key in &self.keys {
            if key.is_imu() {
                out.push(off);
            }
            off += key.dim();
        }
        out
    }

    fn chart(&self, state: &SlidingWindowState) -> DVector<f64> {
        let mut d = DVector::zeros(self.dim());
        let mut off = 0;
        for (key, anchor) in self.keys.iter().zip(&self.anchor) {
            let x = state.get(key).expect("prior variable missing from window");
            let dk = x.boxminus(anchor);
            d.rows_mut(off, dk.len()).copy_from(&dk);
            off += dk.len();
        }
        d
    }

    /// Residual `x ⊟ mean` with its Jacobian blocks.
    pub fn evaluate(&self, state: &SlidingWindowState) -> FactorEvaluation {
        let (d, j) = self.delta(state);
        let mut jacobians = Vec::with_capacity(self.keys.len());
        let mut off = 0;
        for key in &self.keys {
            let k = key.dim();
            jacobians.push((*key, j.columns(off, k).into_owned()));
            off += k;
        }
        FactorEvaluation {
            residual: d,
            jacobians,
        }
    }
}

/// Gaussian prior tying every variable of `mean` to its current value.
pub fn prior_factor(mean: &SlidingWindowState, info: DMatrix<f64>) -> LinearPrior {
    let keys = mean.keys();
    let anchor = keys.iter().map(|k| mean.get(k).unwrap()).collect();
    LinearPrior::gaussian(keys, anchor, info)
}
