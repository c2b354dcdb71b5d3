//! Information-theoretic selection of structure priors.
//!
//! Each candidate contributes a low-rank Fisher information `I_s = J^T S^-1 J`.
//! Candidates are ranked by the gain in log-determinant of the pose-marginal
//! information, and a budget of them is picked greedily.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use nalgebra::{DMatrix, DVector};

use crate::error::Result;
use crate::priors::{evaluate_structure_factor, AssociatedPriorFactor};
use crate::state::{Layout, SlidingWindowState};

/// Damping added to the eliminated block before inversion.
pub const MARGINAL_DAMPING: f64 = 1e-9;

/// Gains below this count as zero.
pub const MIN_GAIN: f64 = 1e-12;

/// Sparse Fisher information `I_s = P U U^T P^T`, where `P` scatters the rows
/// of `u` onto the window tangent positions in `indices`.
#[derive(Clone, Debug)]
pub struct CandidateInfo {
    pub id: usize,
    pub indices: Vec<usize>,
    pub u: DMatrix<f64>,
}

impl CandidateInfo {
    /// From a stacked Jacobian over `indices` and the measurement information.
    pub fn from_jacobian(id: usize, indices: Vec<usize>, j: &DMatrix<f64>, info: &DMatrix<f64>) -> Self {
        assert_eq!(j.ncols(), indices.len());
        let l = info
            .clone()
            .cholesky()
            .expect("measurement information must be positive definite")
            .l();
        Self {
            id,
            indices,
            u: j.transpose() * l,
        }
    }

    pub fn rank(&self) -> usize {
        self.u.ncols()
    }

    pub fn dense(&self, dim: usize) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(dim, dim);
        self.add_to(&mut out);
        out
    }

    pub fn add_to(&self, h: &mut DMatrix<f64>) {
        let uu = &self.u * self.u.transpose();
        for (a, &ia) in self.indices.iter().enumerate() {
            for (b, &ib) in self.indices.iter().enumerate() {
                h[(ia, ib)] += uu[(a, b)];
            }
        }
    }
}

/// Fisher information of a structure-prior factor at `linearization`.
pub fn candidate_fim(
    id: usize,
    factor: &AssociatedPriorFactor,
    linearization: &SlidingWindowState,
    layout: &Layout,
) -> Result<CandidateInfo> {
    let ev = evaluate_structure_factor(factor, linearization)?;
    let mut indices = Vec::new();
    let mut cols = Vec::new();
    for (key, j) in &ev.jacobians {
        let off = layout.offset(key).expect("candidate variable outside window");
        indices.extend(off..off + key.dim());
        cols.push(j.clone());
    }
    let m = ev.dim();
    let mut j = DMatrix::zeros(m, indices.len());
    let mut c = 0;
    for block in cols {
        j.columns_mut(c, block.ncols()).copy_from(&block);
        c += block.ncols();
    }
    Ok(CandidateInfo::from_jacobian(id, indices, &j, &factor.information()))
}

fn complement(dim: usize, keep: &[usize]) -> Vec<usize> {
    let mut mask = vec![false; dim];
    for &i in keep {
        mask[i] = true;
    }
    (0..dim).filter(|&i| !mask[i]).collect()
}

fn select(h: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| h[(rows[i], cols[j])])
}

/// Schur complement of `h` onto `pose`: `H_pp - H_pf (H_ff + eps I)^-1 H_fp`.
pub fn pose_marginal_information(h: &DMatrix<f64>, pose: &[usize]) -> DMatrix<f64> {
    let rest = complement(h.nrows(), pose);
    let hpp = select(h, pose, pose);
    if rest.is_empty() {
        return hpp;
    }
    let mut hff = select(h, &rest, &rest);
    for i in 0..rest.len() {
        hff[(i, i)] += MARGINAL_DAMPING;
    }
    let hpf = select(h, pose, &rest);
    let solved = match hff.clone().cholesky() {
        Some(c) => c.solve(&hpf.transpose()),
        None => hff.lu().solve(&hpf.transpose()).expect("damped block is singular"),
    };
    let m = hpp - &hpf * solved;
    (&m + m.transpose()) * 0.5
}

/// `log det` of a symmetric positive semidefinite matrix; eigenvalues are
/// floored at `1e-300` when the Cholesky factorization fails.
pub fn logdet(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    if let Some(c) = m.clone().cholesky() {
        return 2.0 * c.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    }
    m.clone()
        .symmetric_eigenvalues()
        .iter()
        .map(|e| e.max(1e-300).ln())
        .sum()
}

/// Increase of the pose-marginal log-determinant from adding `cand` to `base`.
pub fn logdet_gain(base: &DMatrix<f64>, cand: &CandidateInfo, pose: &[usize]) -> f64 {
    let mut with = base.clone();
    cand.add_to(&mut with);
    logdet(&pose_marginal_information(&with, pose)) - logdet(&pose_marginal_information(base, pose))
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SelectionResult {
    /// Candidate ids in the order they were picked.
    pub chosen: Vec<usize>,
    pub gains: Vec<f64>,
    pub total_gain: f64,
    /// Number of gain evaluations performed.
    pub evaluations: usize,
    /// False if some step's gain exceeded the previous one beyond 1e-9.
    pub diminishing: bool,
}

/// Incrementally updated inverses for fast rank-r log-det gains. Uses
/// `logdet(marg_P(H)) = logdet(H~) - logdet(H~_FF)` with the damped `H~`.
struct GainState {
    /// Inverse of the damped full matrix.
    s_full: DMatrix<f64>,
    /// Inverse of the damped non-pose block.
    s_feat: DMatrix<f64>,
    /// Position of each window index inside the non-pose block.
    feat_pos: Vec<Option<usize>>,
}

fn spd_inverse(m: DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    match m.clone().cholesky() {
        Some(c) => c.inverse(),
        None => {
            let mut damped = m;
            for i in 0..n {
                damped[(i, i)] += 1e-9;
            }
            damped.try_inverse().expect("information matrix is singular")
        }
    }
}

impl GainState {
    fn new(base: &DMatrix<f64>, pose: &[usize]) -> Self {
        let n = base.nrows();
        let rest = complement(n, pose);
        let mut damped = base.clone();
        for &i in &rest {
            damped[(i, i)] += MARGINAL_DAMPING;
        }
        let hff = select(&damped, &rest, &rest);
        let mut feat_pos = vec![None; n];
        for (k, &i) in rest.iter().enumerate() {
            feat_pos[i] = Some(k);
        }
        Self {
            s_full: spd_inverse(damped),
            s_feat: spd_inverse(hff),
            feat_pos,
        }
    }

    /// `(I + U^T S U)` restricted to the candidate rows for both inverses.
    fn capacitances(&self, c: &CandidateInfo) -> (DMatrix<f64>, DMatrix<f64>) {
        let r = c.rank();
        let sf = select(&self.s_full, &c.indices, &c.indices);
        let full = DMatrix::identity(r, r) + c.u.transpose() * sf * &c.u;
        let rows: Vec<(usize, usize)> = c
            .indices
            .iter()
            .enumerate()
            .filter_map(|(a, &i)| self.feat_pos[i].map(|p| (a, p)))
            .collect();
        let uf = DMatrix::from_fn(rows.len(), r, |i, j| c.u[(rows[i].0, j)]);
        let pos: Vec<usize> = rows.iter().map(|x| x.1).collect();
        let ss = select(&self.s_feat, &pos, &pos);
        let feat = DMatrix::identity(r, r) + uf.transpose() * ss * uf;
        (full, feat)
    }

    fn gain(&self, c: &CandidateInfo) -> f64 {
        let (full, feat) = self.capacitances(c);
        logdet(&full) - logdet(&feat)
    }

    fn commit(&mut self, c: &CandidateInfo) {
        let n = self.s_full.nrows();
        // S <- S - S U (I + U^T S U)^-1 U^T S
        let mut su = DMatrix::<f64>::zeros(n, c.rank());
        for (a, &i) in c.indices.iter().enumerate() {
            for col in 0..n {
                for j in 0..c.rank() {
                    su[(col, j)] += self.s_full[(col, i)] * c.u[(a, j)];
                }
            }
        }
        let (full, feat) = self.capacitances(c);
        let full_inv = spd_inverse(full);
        self.s_full -= &su * full_inv * su.transpose();

        let nf = self.s_feat.nrows();
        let mut sfu = DMatrix::<f64>::zeros(nf, c.rank());
        for (a, &i) in c.indices.iter().enumerate() {
            if let Some(p) = self.feat_pos[i] {
                for col in 0..nf {
                    for j in 0..c.rank() {
                        sfu[(col, j)] += self.s_feat[(col, p)] * c.u[(a, j)];
                    }
                }
            }
        }
        let feat_inv = spd_inverse(feat);
        self.s_feat -= &sfu * feat_inv * sfu.transpose();
    }
}

#[derive(PartialEq)]
struct HeapEntry {
    gain: f64,
    id: usize,
    idx: usize,
    step: usize,
}

impl Eq for HeapEntry {}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        self.gain
            .total_cmp(&other.gain)
            .then_with(|| other.id.cmp(&self.id))
    }
}

/// Above this many candidates the lazy variant is used.
pub const LAZY_THRESHOLD: usize = 50;

/// Greedy budgeted selection maximizing the pose-marginal log-det gain.
pub fn greedy_select(
    candidates: &[CandidateInfo],
    base: &DMatrix<f64>,
    pose: &[usize],
    k: usize,
) -> SelectionResult {
    if candidates.len() > LAZY_THRESHOLD {
        greedy_lazy(candidates, base, pose, k)
    } else {
        greedy_plain(candidates, base, pose, k)
    }
}

fn sorted_by_id(candidates: &[CandidateInfo]) -> Vec<&CandidateInfo> {
    let mut c: Vec<&CandidateInfo> = candidates.iter().collect();
    c.sort_by_key(|c| c.id);
    c
}

fn record(result: &mut SelectionResult, id: usize, gain: f64) {
    if let Some(&last) = result.gains.last() {
        if gain > last + 1e-9 {
            result.diminishing = false;
        }
    }
    result.chosen.push(id);
    result.gains.push(gain);
    result.total_gain += gain;
}

pub fn greedy_plain(
    candidates: &[CandidateInfo],
    base: &DMatrix<f64>,
    pose: &[usize],
    k: usize,
) -> SelectionResult {
    let cands = sorted_by_id(candidates);
    let mut result = SelectionResult {
        diminishing: true,
        ..Default::default()
    };
    if k == 0 || cands.is_empty() {
        return result;
    }
    let mut state = GainState::new(base, pose);
    let mut remaining: Vec<usize> = (0..cands.len()).collect();
    for _ in 0..k {
        let mut best: Option<(usize, f64)> = None;
        for (pos, &ci) in remaining.iter().enumerate() {
            let g = state.gain(cands[ci]);
            result.evaluations += 1;
            if best.is_none_or(|(_, bg)| g > bg) {
                best = Some((pos, g));
            }
        }
        let Some((pos, g)) = best else { break };
        if g < MIN_GAIN {
            break;
        }
        let ci = remaining.remove(pos);
        state.commit(cands[ci]);
        record(&mut result, cands[ci].id, g);
    }
    result
}

/// Lazy greedy: stale gains are upper bounds under diminishing returns, so
/// only the heap top needs re-evaluation.
pub fn greedy_lazy(
    candidates: &[CandidateInfo],
    base: &DMatrix<f64>,
    pose: &[usize],
    k: usize,
) -> SelectionResult {
    let cands = sorted_by_id(candidates);
    let mut result = SelectionResult {
        diminishing: true,
        ..Default::default()
    };
    if k == 0 || cands.is_empty() {
        return result;
    }
    let mut state = GainState::new(base, pose);
    let mut heap: BinaryHeap<HeapEntry> = cands
        .iter()
        .enumerate()
        .map(|(idx, c)| {
            result.evaluations += 1;
            HeapEntry {
                gain: state.gain(c),
                id: c.id,
                idx,
                step: 0,
            }
        })
        .collect();
    let mut step = 0;
    while result.chosen.len() < k {
        let Some(top) = heap.pop() else { break };
        if top.step == step {
            if top.gain < MIN_GAIN {
                break;
            }
            state.commit(cands[top.idx]);
            record(&mut result, top.id, top.gain);
            step += 1;
        } else {
            result.evaluations += 1;
            heap.push(HeapEntry {
                gain: state.gain(cands[top.idx]),
                step,
                ..top
            });
        }
    }
    result
}

/// Exhaustive search over all subsets of size `min(k, n)`. Test oracle and
/// small-scale baseline only; refuses `n > 15` or `k > 4`.
pub fn exhaustive_select(
    candidates: &[CandidateInfo],
    base: &DMatrix<f64>,
    pose: &[usize],
    k: usize,
) -> Option<SelectionResult> {
    let n = candidates.len();
    if n > 15 || k > 4 {
        return None;
    }
    let cands = sorted_by_id(candidates);
    let k = k.min(n);
    let base_logdet = logdet(&pose_marginal_information(base, pose));
    let mut best = SelectionResult {
        diminishing: true,
        total_gain: f64::NEG_INFINITY,
        ..Default::default()
    };
    let mut evaluations = 0;
    let mut subset: Vec<usize> = (0..k).collect();
    loop {
        let mut h = base.clone();
        for &i in &subset {
            cands[i].add_to(&mut h);
        }
        evaluations += 1;
        let g = logdet(&pose_marginal_information(&h, pose)) - base_logdet;
        if g > best.total_gain {
            best.total_gain = g;
            best.chosen = subset.iter().map(|&i| cands[i].id).collect();
        }
        // next combination in lexicographic order
        let mut i = k;
        loop {
            if i == 0 {
                best.evaluations = evaluations;
                if k == 0 {
                    best.total_gain = 0.0;
                }
                return Some(best);
            }
            i -= 1;
            if subset[i] < n - k + i {
                subset[i] += 1;
                for j in i + 1..k {
                    subset[j] = subset[j - 1] + 1;
                }
                break;
            }
        }
    }
}

/// Sum of candidate informations added to `base`.
pub fn accumulate(base: &DMatrix<f64>, candidates: &[CandidateInfo]) -> DMatrix<f64> {
    let mut h = base.clone();
    for c in candidates {
        c.add_to(&mut h);
    }
    h
}

/// Unit vector helper used by callers assembling scalar candidates.
pub fn unit_row(dim: usize, i: usize) -> DMatrix<f64> {
    let mut v = DVector::zeros(dim);
    v[i] = 1.0;
    DMatrix::from_row_slice(1, dim, v.as_slice())
}
