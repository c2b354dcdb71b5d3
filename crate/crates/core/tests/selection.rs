mod common;

use std::time::Instant;

use approx::assert_relative_eq;
use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use common::*;
use spins_core::geometry::{PlaneCp, PointFeature};
use spins_core::priors::{AssociatedPriorFactor, PriorComponent, PriorKind, StructurePrior};
use spins_core::selection::*;
use spins_core::solver::{build_normal_equations, Factor, FactorGraph};
use spins_core::state::{SlidingWindowState, VarKey};

const DIM: usize = 36;
const POSE: usize = 18;

fn psd(r: &mut ChaCha8Rng, n: usize, scale: f64) -> DMatrix<f64> {
    let a = DMatrix::from_fn(n, n + 2, |_, _| r.random_range(-1.0..1.0));
    &a * a.transpose() * scale + DMatrix::identity(n, n) * 0.1
}

fn candidate(r: &mut ChaCha8Rng, id: usize) -> CandidateInfo {
    // one pose-coupled and one feature block, like a prior between features
    // whose information reaches the poses through the base matrix
    let width = r.random_range(3..7);
    let mut indices: Vec<usize> = Vec::new();
    while indices.len() < width {
        let i = r.random_range(0..DIM);
        if !indices.contains(&i) {
            indices.push(i);
        }
    }
    let rank = r.random_range(1..3);
    let j = DMatrix::from_fn(rank, width, |_, _| r.random_range(-1.0..1.0));
    let info = DMatrix::identity(rank, rank) * r.random_range(0.5..4.0);
    CandidateInfo::from_jacobian(id, indices, &j, &info)
}

fn pose() -> Vec<usize> {
    (0..POSE).collect()
}

fn problem(seed: u64, n: usize) -> (DMatrix<f64>, Vec<CandidateInfo>) {
    let r = &mut rng(seed);
    let base = psd(r, DIM, 0.5);
    let cands = (0..n).map(|i| candidate(r, i)).collect();
    (base, cands)
}

#[test]
fn unit_candidate_information() {
    let c = CandidateInfo::from_jacobian(0, vec![0], &DMatrix::from_element(1, 1, 1.0), &DMatrix::identity(1, 1));
    assert_eq!(c.dense(3), unit_row(3, 0).transpose() * unit_row(3, 0));
    let j = DMatrix::from_row_slice(1, 2, &[0.3, -1.2]);
    let a = CandidateInfo::from_jacobian(0, vec![1, 2], &j, &DMatrix::from_element(1, 1, 1.0));
    // doubling sigma quarters the information
    let b = CandidateInfo::from_jacobian(0, vec![1, 2], &j, &DMatrix::from_element(1, 1, 0.25));
    assert_relative_eq!(b.dense(4), a.dense(4) * 0.25, epsilon = 1e-15);
}

#[test]
fn candidate_information_is_psd() {
    for seed in 0..50 {
        let r = &mut rng(seed);
        let e = candidate(r, 0).dense(DIM).symmetric_eigenvalues();
        assert!(e.min() >= -1e-12);
    }
}

#[test]
fn schur_hand_values() {
    let h = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 1.0]);
    assert_relative_eq!(pose_marginal_information(&h, &[0])[(0, 0)], 1.0, epsilon = 1e-8);
    let block = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![3.0, 4.0, 5.0]));
    assert_relative_eq!(pose_marginal_information(&block, &[0, 1]), block.view((0, 0), (2, 2)).into_owned());
    for seed in 0..20 {
        let m = pose_marginal_information(&psd(&mut rng(seed), 12, 1.0), &[0, 1, 2, 3, 4]);
        assert!(m.symmetric_eigenvalues().min() >= -1e-9);
        assert_relative_eq!(m, m.transpose(), epsilon = 1e-12);
    }
}

#[test]
fn gain_hand_values() {
    let base = DMatrix::identity(6, 6);
    let pose: Vec<usize> = (0..6).collect();
    let e1 = CandidateInfo::from_jacobian(0, vec![0], &DMatrix::from_element(1, 1, 1.0), &DMatrix::identity(1, 1));
    assert_relative_eq!(logdet_gain(&base, &e1, &pose), 2f64.ln(), epsilon = 1e-12);
    let zero = CandidateInfo::from_jacobian(1, vec![0], &DMatrix::zeros(1, 1), &DMatrix::identity(1, 1));
    assert_eq!(logdet_gain(&base, &zero, &pose), 0.0);
}

#[test]
fn gains_are_monotone() {
    for seed in 0..50 {
        let r = &mut rng(seed);
        let base = psd(r, DIM, 0.5);
        let s = candidate(r, 0);
        let t = candidate(r, 1);
        assert!(logdet_gain(&base, &s, &pose()) >= -1e-12);
        assert!(logdet_gain(&accumulate(&base, &[t]), &s, &pose()) >= -1e-12);
    }
}

#[test]
fn greedy_dominance_and_empty_budget() {
    let base = DMatrix::identity(2, 2);
    let pose = [0, 1];
    let unit = |id, i, w: f64| CandidateInfo::from_jacobian(id, vec![i], &DMatrix::from_element(1, 1, w.sqrt()), &DMatrix::identity(1, 1));
    // gains log 3 and log 2
    let cands = [unit(0, 0, 2.0), unit(1, 1, 1.0)];
    let r = greedy_select(&cands, &base, &pose, 1);
    assert_eq!(r.chosen, vec![0]);
    assert_relative_eq!(r.total_gain, 3f64.ln(), epsilon = 1e-9);
    let r = greedy_select(&cands, &base, &pose, 0);
    assert!(r.chosen.is_empty());
    assert_eq!(r.total_gain, 0.0);
    assert_eq!(greedy_select(&cands, &base, &pose, 5).chosen.len(), 2);
}

#[test]
fn greedy_within_bound_of_exhaustive() {
    let bound = 1.0 - (-1.0f64).exp();
    for seed in 0..40 {
        let n = 4 + (seed as usize % 9); // 4..=12 candidates
        let (base, cands) = problem(seed, n);
        let g = greedy_select(&cands, &base, &pose(), 3);
        let opt = exhaustive_select(&cands, &base, &pose(), 3).unwrap();
        assert_eq!(opt.evaluations, binomial(n, 3));
        assert!(g.total_gain >= bound * opt.total_gain, "seed {seed}: {} vs {}", g.total_gain, opt.total_gain);
        assert!(g.total_gain <= opt.total_gain + 1e-9);
    }
}

fn binomial(n: usize, k: usize) -> usize {
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

#[test]
fn greedy_is_permutation_invariant() {
    let (base, mut cands) = problem(7, 30);
    let a = greedy_select(&cands, &base, &pose(), 6);
    cands.reverse();
    cands.swap(3, 17);
    let b = greedy_select(&cands, &base, &pose(), 6);
    assert_eq!(a.chosen, b.chosen);
}

#[test]
fn plain_greedy_evaluation_count() {
    let (base, cands) = problem(8, 20);
    let r = greedy_plain(&cands, &base, &pose(), 4);
    assert_eq!(r.chosen.len(), 4);
    assert_eq!(r.evaluations, 20 + 19 + 18 + 17);
}

#[test]
fn lazy_matches_plain() {
    for seed in 0..10 {
        let (base, cands) = problem(100 + seed, 80);
        let plain = greedy_plain(&cands, &base, &pose(), 8);
        let lazy = greedy_lazy(&cands, &base, &pose(), 8);
        if plain.diminishing {
            let sorted = |v: &[usize]| {
                let mut v = v.to_vec();
                v.sort();
                v
            };
            assert_eq!(sorted(&plain.chosen), sorted(&lazy.chosen), "seed {seed}");
            assert_relative_eq!(plain.total_gain, lazy.total_gain, epsilon = 1e-9);
        }
        assert!(lazy.evaluations <= plain.evaluations);
    }
}

#[test]
fn greedy_is_faster_than_exhaustive() {
    let (base, many) = problem(11, 100);
    let few = &many[..15];
    let time = |f: &dyn Fn()| {
        (0..3)
            .map(|_| {
                let t = Instant::now();
                f();
                t.elapsed().as_secs_f64()
            })
            .fold(f64::INFINITY, f64::min)
    };
    let greedy = time(&|| {
        greedy_select(&many, &base, &pose(), 3);
    });
    let exhaustive = time(&|| {
        exhaustive_select(few, &base, &pose(), 3).unwrap();
    });
    eprintln!("greedy(100) {greedy:.2e}s, exhaustive(15) {exhaustive:.2e}s");
    assert!(exhaustive >= 5.0 * greedy);
}

#[test]
fn summed_information_matches_graph_hessian() {
    let r = &mut rng(21);
    let mut s = SlidingWindowState::new();
    s.imu.insert(0, imu_state(r));
    for i in 0..3 {
        s.points.insert(i, PointFeature::new(vec3(r, 3.0)));
        s.planes.insert(i, PlaneCp { cp: unit(r) * (1.0 + i as f64) });
    }
    let prior = |kind, value, sigma| PriorComponent {
        kind,
        prior: StructurePrior { kind, value, sigma, support: 2 },
    };
    let factors = vec![
        AssociatedPriorFactor {
            a: VarKey::Point(0),
            b: VarKey::Plane(1),
            components: vec![prior(PriorKind::PointPlaneDist, 0.3, 0.01)],
        },
        AssociatedPriorFactor {
            a: VarKey::Plane(0),
            b: VarKey::Plane(2),
            components: vec![prior(PriorKind::PlanePlaneAngle, 0.2, 0.02), prior(PriorKind::PlanePlaneDist, 1.0, 0.05)],
        },
    ];
    let layout = s.layout();
    let infos: Vec<CandidateInfo> = factors
        .iter()
        .enumerate()
        .map(|(i, f)| candidate_fim(i, f, &s, &layout).unwrap())
        .collect();
    let mut g = FactorGraph::new();
    for f in &factors {
        g.push(Factor::structure(f.clone()));
    }
    // delta large enough that Huber never downweights
    let ne = build_normal_equations(&g, &s, 1e9);
    let sum = accumulate(&DMatrix::zeros(s.tangent_dim(), s.tangent_dim()), &infos);
    assert_relative_eq!(ne.h, sum, epsilon = 1e-9, max_relative = 1e-9);
}
