//! Offline extraction: evaluate every pairwise quantity over a primitive
//! list, cluster per kind, and keep the salient clusters.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::{measure, measure_kind, PriorKind, StructurePrior, StructurePriorDB, Thresholds};
use crate::error::{Error, Result};
use crate::geometry::{pluecker_to_cp, Plane, PlaneCp, PlueckerLine, PointFeature};
use crate::state::VarValue;

/// Global-frame primitives with their ids.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct Primitives {
    pub points: Vec<(u32, Vector3<f64>)>,
    pub lines: Vec<(u32, PlueckerLine)>,
    pub planes: Vec<(u32, Plane)>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SigmaPolicy {
    /// Lower bound on a stored standard deviation (m or cosine).
    pub floor: f64,
    /// Clusters wider than this are not a single structural quantity.
    pub salience_tol: f64,
}

impl Default for SigmaPolicy {
    fn default() -> Self {
        Self {
            floor: 1e-3,
            salience_tol: 1e-6,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtractionConfig {
    pub thresholds: Thresholds,
    pub tau_parallel: f64,
    pub sigma: SigmaPolicy,
    /// Fail on a non-salient cluster instead of dropping it.
    pub strict: bool,
    /// Kinds to extract. Point-point and skew-line distances are off by
    /// default: salient point pairs are rare in practice.
    pub kinds: Vec<PriorKind>,
}

impl Default for ExtractionConfig {
    fn default() -> Self {
        Self {
            thresholds: Thresholds::default(),
            tau_parallel: measure::TAU_PARALLEL,
            sigma: SigmaPolicy::default(),
            strict: false,
            kinds: PriorKind::ALL
                .into_iter()
                .filter(|k| !matches!(k, PriorKind::LineLineSkewDist | PriorKind::PointPointDist))
                .collect(),
        }
    }
}

/// Result of an extraction run.
#[derive(Clone, Debug, Default)]
pub struct Extraction {
    pub db: StructurePriorDB,
    /// Non-salient clusters that were discarded: kind, min, max, member count.
    pub dropped: Vec<(PriorKind, f64, f64, usize)>,
}

pub fn extract_priors(prims: &Primitives, cfg: &ExtractionConfig) -> Result<Extraction> {
    let points: Vec<VarValue> = prims
        .points
        .iter()
        .map(|(_, p)| VarValue::Point(PointFeature::new(*p)))
        .collect();
    let lines = prims
        .lines
        .iter()
        .map(|(_, l)| pluecker_to_cp(l).map(VarValue::Line))
        .collect::<Result<Vec<_>>>()?;
    let planes = prims
        .planes
        .iter()
        .map(|(_, p)| PlaneCp::from_plane(p).map(VarValue::Plane))
        .collect::<Result<Vec<_>>>()?;

    let mut out = Extraction::default();
    let mut priors = Vec::new();
    for &kind in &cfg.kinds {
        let (ta, tb) = kind.endpoints();
        let pick = |t| match t {
            super::FeatureType::Point => &points,
            super::FeatureType::Line => &lines,
            super::FeatureType::Plane => &planes,
        };
        let (la, lb) = (pick(ta), pick(tb));
        let mut values = Vec::new();
        for (i, a) in la.iter().enumerate() {
            let start = if ta == tb { i + 1 } else { 0 };
            for b in &lb[start..] {
                match measure_kind(kind, a, b, cfg.tau_parallel, true) {
                    Ok(Some((v, _, _))) => values.push(v),
                    Ok(None) | Err(Error::DegeneratePair(_)) => {}
                    Err(e) => return Err(e),
                }
            }
        }
        let gap = 2.0 * cfg.thresholds.for_kind(kind);
        for cluster in single_linkage(values, gap) {
            let lo = cluster[0];
            let hi = *cluster.last().unwrap();
            if hi - lo > cfg.sigma.salience_tol {
                if cfg.strict {
                    return Err(Error::ExtractionRejected {
                        kind,
                        clusters: vec![(lo, hi)],
                    });
                }
                log::debug!("{kind:?}: dropping non-salient cluster [{lo}, {hi}] ({} pairs)", cluster.len());
                out.dropped.push((kind, lo, hi, cluster.len()));
                continue;
            }
            let n = cluster.len() as f64;
            let mean = cluster.iter().sum::<f64>() / n;
            let var = cluster.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            let mut value = mean;
            if kind.is_angle() {
                value = value.clamp(-1.0, 1.0);
            }
            priors.push(StructurePrior {
                kind,
                value,
                sigma: var.sqrt().max(cfg.sigma.floor),
                support: cluster.len(),
            });
        }
    }
    out.db = StructurePriorDB::new(priors, &cfg.thresholds)?;
    Ok(out)
}

/// Sort and split wherever consecutive values differ by more than `gap`.
fn single_linkage(mut values: Vec<f64>, gap: f64) -> Vec<Vec<f64>> {
    values.sort_by(f64::total_cmp);
    let mut clusters: Vec<Vec<f64>> = Vec::new();
    for v in values {
        match clusters.last_mut() {
            Some(c) if v - *c.last().unwrap() <= gap => c.push(v),
            _ => clusters.push(vec![v]),
        }
    }
    clusters
}
