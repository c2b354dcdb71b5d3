//! Sliding-window driver: frame ingestion, feature initialization, structure
//! prior association and selection, optimization and marginalization.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use nalgebra::{DMatrix, DVector, Vector3};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::factors::{
    preintegrate, ImuNoise, ImuSample, LineMeasurement, LinearPrior, PlaneMeasurement,
    PointMeasurement, GRAVITY,
};
use crate::geometry::{
    pluecker_to_cp, ImuState, LineCp, Plane, PlaneCp, PlueckerLine, PointFeature, Pose,
};
use crate::priors::{associate, AssociatedPriorFactor, AssociationConfig, StructurePriorDB};
use crate::selection::{candidate_fim, exhaustive_select, greedy_select, CandidateInfo};
use crate::solver::{
    build_normal_equations, marginalize_oldest, optimize, Factor, FactorFamily, FactorGraph,
    SolverConfig, SolverStatus,
};
use crate::state::{SlidingWindowState, VarKey, VarValue};

/// Feature observations of one frame, expressed in the IMU frame.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MeasurementFrame {
    pub index: u64,
    pub t: f64,
    pub points: Vec<(u32, PointMeasurement)>,
    pub lines: Vec<(u32, LineMeasurement)>,
    pub planes: Vec<(u32, PlaneMeasurement)>,
}

/// Which measurement families enter the graph.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Families {
    pub points: bool,
    pub lines: bool,
    pub planes: bool,
}

impl Families {
    pub const ALL: Families = Families {
        points: true,
        lines: true,
        planes: true,
    };
}

/// How associated structure priors are admitted into the window.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum PriorPolicy {
    None,
    /// Uniform draw without replacement, seeded per run.
    Random { budget: usize, seed: u64 },
    /// Greedy log-det maximization.
    Greedy { budget: usize },
    /// Exhaustive log-det maximization over small candidate sets.
    Exhaustive { budget: usize },
    All,
}

impl PriorPolicy {
    pub fn budget(&self) -> Option<usize> {
        match *self {
            PriorPolicy::Random { budget, .. }
            | PriorPolicy::Greedy { budget }
            | PriorPolicy::Exhaustive { budget } => Some(budget),
            PriorPolicy::None | PriorPolicy::All => None,
        }
    }
}

/// Largest budget and candidate count accepted by [`PriorPolicy::Exhaustive`].
pub const EXHAUSTIVE_MAX_BUDGET: usize = 4;
pub const EXHAUSTIVE_MAX_CANDIDATES: usize = 15;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    pub solver: SolverConfig,
    pub families: Families,
    pub priors: PriorPolicy,
    pub association: AssociationConfig,
    /// Observations a feature needs before it takes part in association.
    pub min_observations: usize,
    pub imu_noise: ImuNoise,
    pub gravity: Vector3<f64>,
    /// Standard deviations of the first-state prior: rotation, position,
    /// velocity, gyro bias, accel bias.
    pub initial_sigma: [f64; 5],
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            solver: SolverConfig::default(),
            families: Families::ALL,
            priors: PriorPolicy::None,
            association: AssociationConfig::default(),
            min_observations: 3,
            imu_noise: ImuNoise::default(),
            gravity: GRAVITY,
            initial_sigma: [1e-3, 1e-3, 1e-2, 1e-3, 1e-2],
        }
    }
}

impl EstimatorConfig {
    pub fn validate(&self) -> Result<()> {
        self.solver.validate()?;
        if let PriorPolicy::Exhaustive { budget } = self.priors {
            if budget > EXHAUSTIVE_MAX_BUDGET {
                return Err(Error::InvalidConfig(format!(
                    "exhaustive selection supports a budget of at most {EXHAUSTIVE_MAX_BUDGET}, got {budget}"
                )));
            }
        }
        if self.initial_sigma.iter().any(|s| !(*s > 0.0)) {
            return Err(Error::InvalidConfig("initial sigmas must be positive".into()));
        }
        Ok(())
    }
}

/// Per-frame diagnostics.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StepReport {
    pub frame: u64,
    pub status: SolverStatus,
    pub iterations: usize,
    pub iteration_times: Vec<f64>,
    pub final_cost: f64,
    /// Factor counts per family after optimization, before marginalization.
    pub factor_counts: BTreeMap<FactorFamily, usize>,
    pub candidates: usize,
    pub admitted: usize,
    /// False when a greedy selection saw an increasing gain.
    pub diminishing: bool,
}

pub struct Estimator {
    cfg: EstimatorConfig,
    db: Option<StructurePriorDB>,
    graph: FactorGraph,
    state: SlidingWindowState,
    observations: HashMap<VarKey, usize>,
    /// Feature pairs that ever received a structure factor.
    used_pairs: BTreeSet<(VarKey, VarKey)>,
    rng: ChaCha8Rng,
    last_frame: u64,
    estimates: BTreeMap<u64, ImuState>,
}

impl Estimator {
    /// Start a window at `initial` (frame `frame`), anchored by a Gaussian
    /// prior with the configured standard deviations.
    pub fn new(
        cfg: EstimatorConfig,
        db: Option<StructurePriorDB>,
        frame: u64,
        initial: ImuState,
    ) -> Result<Self> {
        cfg.validate()?;
        if !matches!(cfg.priors, PriorPolicy::None) && db.is_none() {
            return Err(Error::InvalidConfig(
                "structure-prior strategies need a prior database".into(),
            ));
        }
        let mut state = SlidingWindowState::new();
        state.imu.insert(frame, initial);
        let sig = cfg.initial_sigma;
        let info = DVector::from_fn(15, |i, _| 1.0 / (sig[i / 3] * sig[i / 3]));
        let mut graph = FactorGraph::new();
        graph.push(Factor::Prior(LinearPrior::gaussian(
            vec![VarKey::Imu(frame)],
            vec![VarValue::Imu(initial)],
            DMatrix::from_diagonal(&info),
        )));
        let seed = match cfg.priors {
            PriorPolicy::Random { seed, .. } => seed,
            _ => 0,
        };
        Ok(Self {
            cfg,
            db,
            graph,
            state,
            observations: HashMap::new(),
            used_pairs: BTreeSet::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
            last_frame: frame,
            estimates: BTreeMap::new(),
        })
    }

    pub fn state(&self) -> &SlidingWindowState {
        &self.state
    }

    pub fn graph(&self) -> &FactorGraph {
        &self.graph
    }

    /// Ingest one frame. `imu` must cover the interval from the previous frame
    /// to this one, endpoints included.
    pub fn step(&mut self, imu: &[ImuSample], frame: &MeasurementFrame) -> Result<StepReport> {
        if frame.index <= self.last_frame {
            return Err(Error::InvalidConfig(format!(
                "frame {} does not follow frame {}",
                frame.index, self.last_frame
            )));
        }
        let prev = self.state.imu[&self.last_frame];
        let pre = preintegrate(imu, &prev.bg, &prev.ba, &self.cfg.imu_noise);
        let current = pre.predict(&prev, &self.cfg.gravity);
        self.state.imu.insert(frame.index, current);
        self.graph
            .push(Factor::imu(self.last_frame, frame.index, pre, self.cfg.gravity));
        self.last_frame = frame.index;

        self.add_measurements(frame, &current.pose);

        let (candidates, admitted, diminishing) = self.admit_priors()?;

        let (x, rep) = optimize(&self.graph, &self.state, &self.cfg.solver);
        self.state = x;
        let mut factor_counts = BTreeMap::new();
        for f in &self.graph.factors {
            *factor_counts.entry(f.family()).or_insert(0) += 1;
        }

        while self.state.imu.len() > self.cfg.solver.window {
            let (&oldest, s) = self.state.imu.first().unwrap();
            self.estimates.insert(oldest, *s);
            let m = marginalize_oldest(&self.graph, &self.state, self.cfg.solver.huber_delta)?;
            self.graph = m.graph;
            self.state = m.state;
        }

        Ok(StepReport {
            frame: frame.index,
            status: rep.status,
            iterations: rep.iterations,
            final_cost: rep.final_cost(),
            iteration_times: rep.iteration_times,
            factor_counts,
            candidates,
            admitted,
            diminishing,
        })
    }

    /// Estimates of every frame seen so far: frames that left the window at
    /// their exit value, the rest at their current value.
    pub fn trajectory(&self) -> Vec<(u64, ImuState)> {
        let mut out = self.estimates.clone();
        for (&k, s) in &self.state.imu {
            out.insert(k, *s);
        }
        out.into_iter().collect()
    }

    fn observe(&mut self, key: VarKey) {
        *self.observations.entry(key).or_insert(0) += 1;
    }

    fn add_measurements(&mut self, frame: &MeasurementFrame, pose: &Pose) {
        let k = frame.index;
        if self.cfg.families.points {
            for (id, m) in &frame.points {
                if !self.state.points.contains_key(id) {
                    self.state
                        .points
                        .insert(*id, PointFeature::new(pose.to_global(&m.z)));
                }
                self.graph.push(Factor::point(k, *id, *m));
                self.observe(VarKey::Point(*id));
            }
        }
        if self.cfg.families.lines {
            for (id, m) in &frame.lines {
                if !self.state.lines.contains_key(id) {
                    let Some(l) = init_line(pose, m) else { continue };
                    self.state.lines.insert(*id, l);
                }
                self.graph.push(Factor::line(k, *id, *m));
                self.observe(VarKey::Line(*id));
            }
        }
        if self.cfg.families.planes {
            for (id, m) in &frame.planes {
                if !self.state.planes.contains_key(id) {
                    let Some(p) = init_plane(pose, m) else { continue };
                    self.state.planes.insert(*id, p);
                }
                self.graph.push(Factor::plane(k, *id, *m));
                self.observe(VarKey::Plane(*id));
            }
        }
    }

    /// Associate confident features with the database and admit new structure
    /// factors according to the policy. Returns (candidates, admitted,
    /// diminishing).
    fn admit_priors(&mut self) -> Result<(usize, usize, bool)> {
        let policy = self.cfg.priors;
        if matches!(policy, PriorPolicy::None) {
            return Ok((0, 0, true));
        }
        let db = self.db.as_ref().unwrap();
        let min_obs = self.cfg.min_observations;
        let obs = &self.observations;
        let used = &self.used_pairs;
        let candidates: Vec<AssociatedPriorFactor> = associate(
            &self.state,
            |k| obs.get(k).copied().unwrap_or(0) >= min_obs,
            db,
            &self.cfg.association,
        )
        .into_iter()
        .filter(|f| !used.contains(&(f.a, f.b)))
        .collect();
        let n = candidates.len();
        let active = self.graph.count(FactorFamily::Structure);
        let room = policy.budget().map(|b| b.saturating_sub(active));

        let mut diminishing = true;
        let chosen: Vec<usize> = match (policy, room) {
            (_, Some(0)) => Vec::new(),
            (PriorPolicy::All, _) => (0..n).collect(),
            (PriorPolicy::Random { .. }, Some(r)) => {
                let mut idx = sample(&mut self.rng, n, r.min(n)).into_vec();
                idx.sort_unstable();
                idx
            }
            (PriorPolicy::Greedy { .. }, Some(r)) => {
                let (infos, base, pose) = self.candidate_information(&candidates)?;
                let res = greedy_select(&infos, &base, &pose, r);
                diminishing = res.diminishing;
                if !res.diminishing {
                    log::debug!("greedy selection saw increasing gains at frame {}", self.last_frame);
                }
                res.chosen
            }
            (PriorPolicy::Exhaustive { .. }, Some(r)) => {
                if n > EXHAUSTIVE_MAX_CANDIDATES {
                    return Err(Error::InvalidConfig(format!(
                        "exhaustive selection refused: {n} candidates in window at frame {} (limit {EXHAUSTIVE_MAX_CANDIDATES})",
                        self.last_frame
                    )));
                }
                let (infos, base, pose) = self.candidate_information(&candidates)?;
                exhaustive_select(&infos, &base, &pose, r)
                    .expect("limits checked above")
                    .chosen
            }
            (PriorPolicy::None, _) | (_, None) => unreachable!(),
        };
        let admitted = chosen.len();
        for i in chosen {
            let f = candidates[i].clone();
            self.used_pairs.insert((f.a, f.b));
            self.graph.push(Factor::structure(f));
        }
        Ok((n, admitted, diminishing))
    }

    /// Candidate FIMs, window information and pose indices at the current
    /// linearization point. Candidates that cannot be linearized get an empty
    /// information contribution.
    fn candidate_information(
        &self,
        candidates: &[AssociatedPriorFactor],
    ) -> Result<(Vec<CandidateInfo>, DMatrix<f64>, Vec<usize>)> {
        let ne = build_normal_equations(&self.graph, &self.state, self.cfg.solver.huber_delta);
        let layout = &ne.layout;
        let mut infos = Vec::with_capacity(candidates.len());
        for (i, c) in candidates.iter().enumerate() {
            match candidate_fim(i, c, &self.state, layout) {
                Ok(info) => infos.push(info),
                Err(_) => infos.push(CandidateInfo {
                    id: i,
                    indices: Vec::new(),
                    u: DMatrix::zeros(0, 0),
                }),
            }
        }
        let pose: Vec<usize> = self
            .state
            .imu
            .keys()
            .flat_map(|k| {
                let o = layout.offset(&VarKey::Imu(*k)).unwrap();
                o..o + 6
            })
            .collect();
        Ok((infos, ne.h, pose))
    }
}

/// Global line from its first local observation.
pub fn init_line(pose: &Pose, m: &LineMeasurement) -> Option<LineCp> {
    let n_i = Vector3::new(m.z[0], m.z[1], m.z[2]);
    let v_i = Vector3::new(m.z[3], m.z[4], m.z[5]);
    let w = pose.rot.inverse();
    let v = w * v_i;
    let n = w * n_i + pose.pos.cross(&v);
    pluecker_to_cp(&PlueckerLine { n, v }).ok()
}

/// Global plane from its first local closest-point observation.
pub fn init_plane(pose: &Pose, m: &PlaneMeasurement) -> Option<PlaneCp> {
    let d_i = m.z.norm();
    if d_i < crate::geometry::EPS_PLANE {
        return None;
    }
    let n = pose.rot.inverse() * (m.z / d_i);
    let d = d_i + pose.pos.dot(&n);
    PlaneCp::from_plane(&Plane { n, d }).ok()
}
