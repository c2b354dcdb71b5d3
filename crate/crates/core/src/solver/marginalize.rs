use nalgebra::{DMatrix, DVector};

use super::graph::{Factor, FactorGraph};
use super::normal::build_over;
use crate::error::{Error, Result};
use crate::factors::LinearPrior;
use crate::state::{Layout, SlidingWindowState, VarKey};

/// Outcome of removing variables from a window.
#[derive(Clone, Debug)]
pub struct Marginalized {
    pub graph: FactorGraph,
    pub state: SlidingWindowState,
    /// Variables the new prior ties together.
    pub blanket: Vec<VarKey>,
    /// Factors folded into the prior.
    pub absorbed: usize,
}

/// Inverse of a symmetric PSD block, falling back to an eigen pseudo-inverse
/// when the block is rank deficient (e.g. an unobserved direction).
fn spd_inverse(m: &DMatrix<f64>) -> DMatrix<f64> {
    if let Some(ch) = m.clone().cholesky() {
        let inv = ch.inverse();
        return (&inv + inv.transpose()) * 0.5;
    }
    let eig = m.clone().symmetric_eigen();
    let max = eig.eigenvalues.iter().cloned().fold(0.0_f64, f64::max);
    let tol = max * 1e-12;
    let inv_vals = eig
        .eigenvalues
        .map(|l| if l > tol { 1.0 / l } else { 0.0 });
    &eig.eigenvectors * DMatrix::from_diagonal(&inv_vals) * eig.eigenvectors.transpose()
}

/// Remove `keys` from the window. Every factor touching them is linearized at
/// the current estimate and replaced by one [`LinearPrior`] on the remaining
/// variables, obtained by the Schur complement. The prior stays anchored at
/// this linearization point.
pub fn marginalize(
    graph: &FactorGraph,
    state: &SlidingWindowState,
    keys: &[VarKey],
    huber_delta: f64,
) -> Result<Marginalized> {
    for k in keys {
        if !state.contains(k) {
            return Err(Error::InvalidConfig(format!("cannot marginalize unknown {k:?}")));
        }
    }
    let (touching, kept): (Vec<&Factor>, Vec<&Factor>) = graph
        .factors
        .iter()
        .partition(|f| keys.iter().any(|k| f.touches(k)));

    // Blanket in window order for a deterministic prior layout.
    let mut blanket: Vec<VarKey> = Vec::new();
    for k in state.keys() {
        if keys.contains(&k) {
            continue;
        }
        if touching.iter().any(|f| f.touches(&k)) {
            blanket.push(k);
        }
    }
    let layout = Layout::from_keys(keys.iter().copied().chain(blanket.iter().copied()));
    let m: usize = keys.iter().map(|k| k.dim()).sum();
    let r = layout.dim() - m;
    let ne = build_over(touching.iter().copied(), state, layout, huber_delta);

    let hmm = ne.h.view((0, 0), (m, m)).into_owned();
    let hrm = ne.h.view((m, 0), (r, m)).into_owned();
    let hrr = ne.h.view((m, m), (r, r)).into_owned();
    let bm = ne.b.rows(0, m).into_owned();
    let br = ne.b.rows(m, r).into_owned();
    let inv = spd_inverse(&hmm);
    let k_gain = &hrm * &inv;
    let mut info = hrr - &k_gain * hrm.transpose();
    info = (&info + info.transpose()) * 0.5;
    let grad: DVector<f64> = br - &k_gain * &bm;
    let cost0 = ne.cost - bm.dot(&(&inv * &bm));

    let mut out = FactorGraph {
        factors: kept.into_iter().cloned().collect(),
    };
    if !blanket.is_empty() {
        let anchor = blanket.iter().map(|k| state.get(k).unwrap()).collect();
        out.push(Factor::Prior(LinearPrior {
            keys: blanket.clone(),
            anchor,
            info,
            grad,
            cost0,
        }));
    }
    let mut next = state.clone();
    for k in keys {
        next.remove(k);
    }
    Ok(Marginalized {
        graph: out,
        state: next,
        blanket,
        absorbed: touching.len(),
    })
}

/// Features that would be left without any factor once `frame` is removed.
pub fn orphaned_by(graph: &FactorGraph, state: &SlidingWindowState, frame: u64) -> Vec<VarKey> {
    let imu = VarKey::Imu(frame);
    state
        .keys()
        .into_iter()
        .filter(|k| !k.is_imu())
        .filter(|k| {
            graph
                .factors
                .iter()
                .filter(|f| f.touches(k))
                .all(|f| f.touches(&imu) || matches!(f, Factor::Prior(_) | Factor::Structure { .. }))
        })
        .filter(|k| {
            // Only features that were actually observed from the leaving frame.
            graph.factors.iter().any(|f| f.touches(k) && f.touches(&imu))
        })
        .collect()
}

/// Drop the oldest IMU state together with features observed only from it.
pub fn marginalize_oldest(
    graph: &FactorGraph,
    state: &SlidingWindowState,
    huber_delta: f64,
) -> Result<Marginalized> {
    let Some((&oldest, _)) = state.imu.first() else {
        return Err(Error::InvalidConfig("window holds no IMU state".into()));
    };
    let mut keys = vec![VarKey::Imu(oldest)];
    keys.extend(orphaned_by(graph, state, oldest));
    marginalize(graph, state, &keys, huber_delta)
}
