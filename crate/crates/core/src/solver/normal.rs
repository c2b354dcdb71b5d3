use nalgebra::{DMatrix, DVector};

use super::graph::{Factor, FactorGraph};
use crate::error::{Error, Result};
use crate::state::{Layout, SlidingWindowState};

/// IRLS weight of the Huber loss on a squared Mahalanobis norm.
pub fn huber_weight(r2: f64, delta: f64) -> f64 {
    if r2 <= delta * delta {
        1.0
    } else {
        delta / r2.sqrt()
    }
}

/// Huber loss `rho(s)` on a squared norm, continuous with slope 1 at zero.
pub fn huber_cost(r2: f64, delta: f64) -> f64 {
    if r2 <= delta * delta {
        r2
    } else {
        2.0 * delta * r2.sqrt() - delta * delta
    }
}

/// Gauss-Newton system `H = sum w J^T W J`, `b = sum w J^T W r` over the
/// window tangent, and the robustified cost.
#[derive(Clone, Debug)]
pub struct NormalEquations {
    pub h: DMatrix<f64>,
    pub b: DVector<f64>,
    pub cost: f64,
    pub layout: Layout,
    /// Factors skipped because their geometry was degenerate.
    pub skipped: usize,
}

/// Accumulate one whitened factor into `(h, b)` at the given offsets. Only the
/// upper triangle is meaningful until [`mirror_upper`] runs.
pub(crate) fn accumulate(
    h: &mut DMatrix<f64>,
    b: &mut DVector<f64>,
    blocks: &[(usize, &DMatrix<f64>)],
    r: &DVector<f64>,
    info: &DMatrix<f64>,
    w: f64,
) {
    let wj: Vec<DMatrix<f64>> = blocks.iter().map(|(_, j)| info * *j * w).collect();
    for (oa, ja) in blocks.iter() {
        let ga = ja.transpose() * (info * r) * w;
        let mut seg = b.rows_mut(*oa, ga.len());
        seg += &ga;
        for (bi, (ob, _)) in blocks.iter().enumerate() {
            let blk = ja.transpose() * &wj[bi];
            let mut view = h.view_mut((*oa, *ob), (blk.nrows(), blk.ncols()));
            view += &blk;
        }
    }
}

/// Copy the upper triangle onto the lower one so `h` is bitwise symmetric.
pub(crate) fn mirror_upper(h: &mut DMatrix<f64>) {
    let n = h.nrows();
    for j in 0..n {
        for i in (j + 1)..n {
            h[(i, j)] = h[(j, i)];
        }
    }
}

pub fn build_normal_equations(
    graph: &FactorGraph,
    state: &SlidingWindowState,
    huber_delta: f64,
) -> NormalEquations {
    build_over(graph.factors.iter(), state, state.layout(), huber_delta)
}

pub(crate) fn build_over<'a>(
    factors: impl Iterator<Item = &'a Factor>,
    state: &SlidingWindowState,
    layout: Layout,
    huber_delta: f64,
) -> NormalEquations {
    let n = layout.dim();
    let mut h = DMatrix::zeros(n, n);
    let mut b = DVector::zeros(n);
    let mut cost = 0.0;
    let mut skipped = 0;
    for f in factors {
        if let Factor::Prior(p) = f {
            let lin = p.linearize(state);
            let offs: Vec<(usize, usize)> = p
                .keys
                .iter()
                .scan(0, |local, k| {
                    let o = (*local, layout.offset(k).expect("prior key outside layout"));
                    *local += k.dim();
                    Some((o, k.dim()))
                })
                .map(|((l, g), _)| (l, g))
                .collect();
            for (ka, &(la, ga)) in p.keys.iter().zip(&offs) {
                let da = ka.dim();
                let mut seg = b.rows_mut(ga, da);
                seg += lin.b.rows(la, da);
                for (kb, &(lb, gb)) in p.keys.iter().zip(&offs) {
                    let db = kb.dim();
                    let mut view = h.view_mut((ga, gb), (da, db));
                    view += lin.h.view((la, lb), (da, db));
                }
            }
            cost += lin.cost;
            continue;
        }
        let (ev, info) = match f.evaluate(state) {
            Ok(x) => x,
            Err(e) => {
                log::trace!("skipping factor: {e}");
                skipped += 1;
                continue;
            }
        };
        let r2 = ev.residual.dot(&(&info * &ev.residual));
        let (w, c) = if f.is_robust() {
            (huber_weight(r2, huber_delta), huber_cost(r2, huber_delta))
        } else {
            (1.0, r2)
        };
        cost += c;
        let blocks: Vec<(usize, &DMatrix<f64>)> = ev
            .jacobians
            .iter()
            .map(|(k, j)| (layout.offset(k).expect("factor key outside layout"), j))
            .collect();
        accumulate(&mut h, &mut b, &blocks, &ev.residual, &info, w);
    }
    mirror_upper(&mut h);
    NormalEquations {
        h,
        b,
        cost,
        layout,
        skipped,
    }
}

/// Robustified cost only.
pub fn evaluate_cost(graph: &FactorGraph, state: &SlidingWindowState, huber_delta: f64) -> f64 {
    let mut cost = 0.0;
    for f in &graph.factors {
        if let Factor::Prior(p) = f {
            cost += p.cost(state);
            continue;
        }
        let Ok((ev, info)) = f.evaluate(state) else {
            continue;
        };
        let r2 = ev.residual.dot(&(&info * &ev.residual));
        cost += if f.is_robust() {
            huber_cost(r2, huber_delta)
        } else {
            r2
        };
    }
    cost
}

/// Solve `(H + lambda I) delta = -b` by Cholesky.
pub fn lm_step(ne: &NormalEquations, lambda: f64) -> Result<DVector<f64>> {
    let mut a = ne.h.clone();
    for i in 0..a.nrows() {
        a[(i, i)] += lambda;
    }
    let chol = a.cholesky().ok_or(Error::RetryWithLargerLambda)?;
    let step = chol.solve(&(-&ne.b));
    if step.iter().any(|x| !x.is_finite()) {
        return Err(Error::RetryWithLargerLambda);
    }
    Ok(step)
}
