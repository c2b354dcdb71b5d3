//! Structure priors: scalar distances and cosines between features that are
//! known ahead of time, stored in a sparse database and attached to window
//! features by nearest-value association.

mod associate;
mod extract;
pub mod measure;

pub use associate::{
    associate, evaluate_structure_factor, AssociatedPriorFactor, AssociationConfig, PriorComponent,
};
pub use extract::{extract_priors, Extraction, ExtractionConfig, Primitives, SigmaPolicy};

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::state::{VarKey, VarValue};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PriorKind {
    PointPointDist,
    PointLineDist,
    PointPlaneDist,
    LineLineAngle,
    /// Separation of parallel lines.
    LineLineDist,
    /// Common-perpendicular distance of non-parallel lines; off by default.
    LineLineSkewDist,
    LinePlaneAngle,
    /// Offset of a line parallel to a plane.
    LinePlaneDist,
    PlanePlaneAngle,
    /// Separation of parallel planes.
    PlanePlaneDist,
}

/// Feature type of a prior endpoint.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum FeatureType {
    Point,
    Line,
    Plane,
}

impl PriorKind {
    pub const ALL: [PriorKind; 10] = [
        PriorKind::PointPointDist,
        PriorKind::PointLineDist,
        PriorKind::PointPlaneDist,
        PriorKind::LineLineAngle,
        PriorKind::LineLineDist,
        PriorKind::LineLineSkewDist,
        PriorKind::LinePlaneAngle,
        PriorKind::LinePlaneDist,
        PriorKind::PlanePlaneAngle,
        PriorKind::PlanePlaneDist,
    ];

    pub fn is_angle(&self) -> bool {
        matches!(
            self,
            PriorKind::LineLineAngle | PriorKind::LinePlaneAngle | PriorKind::PlanePlaneAngle
        )
    }

    pub fn endpoints(&self) -> (FeatureType, FeatureType) {
        use FeatureType::*;
        match self {
            PriorKind::PointPointDist => (Point, Point),
            PriorKind::PointLineDist => (Point, Line),
            PriorKind::PointPlaneDist => (Point, Plane),
            PriorKind::LineLineAngle | PriorKind::LineLineDist | PriorKind::LineLineSkewDist => {
                (Line, Line)
            }
            PriorKind::LinePlaneAngle | PriorKind::LinePlaneDist => (Line, Plane),
            PriorKind::PlanePlaneAngle | PriorKind::PlanePlaneDist => (Plane, Plane),
        }
    }

    /// Distance kinds that are only defined in the parallel configuration.
    pub fn is_parallel_gated(&self) -> bool {
        matches!(
            self,
            PriorKind::LineLineDist | PriorKind::LinePlaneDist | PriorKind::PlanePlaneDist
        )
    }
}

/// Association thresholds `tau_s` for distance and cosine kinds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub distance: f64,
    pub cosine: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            distance: 0.05,
            cosine: 0.02,
        }
    }
}

impl Thresholds {
    pub fn for_kind(&self, kind: PriorKind) -> f64 {
        if kind.is_angle() {
            self.cosine
        } else {
            self.distance
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StructurePrior {
    pub kind: PriorKind,
    /// Metres for distance kinds, cosine for angle kinds.
    pub value: f64,
    /// Standard deviation, same unit as `value`.
    pub sigma: f64,
    /// Number of primitive pairs the value was extracted from.
    pub support: usize,
}

/// Per-kind ascending lists of prior values. Within a kind consecutive values
/// are more than `2 * tau_s` apart, so the nearest entry is unambiguous.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StructurePriorDB {
    entries: BTreeMap<PriorKind, Vec<StructurePrior>>,
}

impl StructurePriorDB {
    /// Build a database, sorting each kind and checking sparseness.
    pub fn new(priors: impl IntoIterator<Item = StructurePrior>, tau: &Thresholds) -> Result<Self> {
        let mut entries: BTreeMap<PriorKind, Vec<StructurePrior>> = BTreeMap::new();
        for p in priors {
            if !(p.sigma > 0.0) {
                return Err(Error::InvalidConfig(format!("non-positive sigma for {:?}", p.kind)));
            }
            if p.kind.is_angle() && !(-1.0..=1.0).contains(&p.value) {
                return Err(Error::InvalidConfig(format!("cosine {} outside [-1, 1]", p.value)));
            }
            entries.entry(p.kind).or_default().push(p);
        }
        for (kind, list) in entries.iter_mut() {
            list.sort_by(|a, b| a.value.total_cmp(&b.value));
            let gap = 2.0 * tau.for_kind(*kind);
            if let Some(w) = list.windows(2).find(|w| w[1].value - w[0].value <= gap) {
                return Err(Error::SparsenessViolated {
                    kind: *kind,
                    value: w[1].value,
                });
            }
        }
        Ok(Self { entries })
    }

    pub fn is_empty(&self) -> bool {
        self.entries.values().all(|v| v.is_empty())
    }

    pub fn len(&self) -> usize {
        self.entries.values().map(|v| v.len()).sum()
    }

    pub fn kind(&self, kind: PriorKind) -> &[StructurePrior] {
        self.entries.get(&kind).map(|v| v.as_slice()).unwrap_or(&[])
    }

    pub fn iter(&self) -> impl Iterator<Item = &StructurePrior> {
        self.entries.values().flatten()
    }

    /// Entry of `kind` closest to `value` (binary search).
    pub fn nearest(&self, kind: PriorKind, value: f64) -> Option<&StructurePrior> {
        let list = self.kind(kind);
        let idx = list.partition_point(|p| p.value < value);
        let below = idx.checked_sub(1).map(|i| &list[i]);
        let above = list.get(idx);
        match (below, above) {
            (Some(a), Some(b)) => {
                if (value - a.value).abs() <= (b.value - value).abs() {
                    Some(a)
                } else {
                    Some(b)
                }
            }
            (a, b) => a.or(b),
        }
    }

    /// One JSON object per line: `{"kind", "value", "sigma", "support"}`.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        for p in self.iter() {
            serde_json::to_writer(&mut w, p)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(r: R, tau: &Thresholds) -> Result<Self> {
        let mut priors = Vec::new();
        for line in r.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            priors.push(serde_json::from_str(&line)?);
        }
        Self::new(priors, tau)
    }
}

/// Evaluate a prior kind on two variables. With `gated`, parallel-gated
/// distance kinds return `None` outside the parallel configuration.
#[allow(clippy::type_complexity)]
pub fn measure_kind(
    kind: PriorKind,
    a: &VarValue,
    b: &VarValue,
    tau_parallel: f64,
    gated: bool,
) -> Result<Option<(f64, DMatrix<f64>, DMatrix<f64>)>> {
    use measure::*;
    fn pack<const A: usize, const B: usize>(
        m: ScalarMeasure<A, B>,
    ) -> Option<(f64, DMatrix<f64>, DMatrix<f64>)> {
        Some((
            m.value,
            DMatrix::from_row_slice(1, A, m.j_a.as_slice()),
            DMatrix::from_row_slice(1, B, m.j_b.as_slice()),
        ))
    }
    let tau = if gated { tau_parallel } else { 2.0 };
    let out = match (kind, a, b) {
        (PriorKind::PointPointDist, VarValue::Point(x), VarValue::Point(y)) => {
            pack(point_point(x, y)?)
        }
        (PriorKind::PointLineDist, VarValue::Point(x), VarValue::Line(l)) => {
            pack(point_line(x, l)?)
        }
        (PriorKind::PointPlaneDist, VarValue::Point(x), VarValue::Plane(p)) => {
            pack(point_plane(x, p)?)
        }
        (PriorKind::LineLineAngle, VarValue::Line(x), VarValue::Line(y)) => {
            pack(line_line_with(x, y, tau)?.cosine)
        }
        (PriorKind::LineLineDist, VarValue::Line(x), VarValue::Line(y)) => {
            line_line_with(x, y, tau)?.distance.and_then(pack)
        }
        (PriorKind::LineLineSkewDist, VarValue::Line(x), VarValue::Line(y)) => {
            if gated && line_line_with(x, y, tau)?.distance.is_some() {
                None
            } else {
                pack(line_line_skew(x, y)?)
            }
        }
        (PriorKind::LinePlaneAngle, VarValue::Line(x), VarValue::Plane(p)) => {
            pack(line_plane_with(x, p, tau)?.cosine)
        }
        (PriorKind::LinePlaneDist, VarValue::Line(x), VarValue::Plane(p)) => {
            line_plane_with(x, p, tau)?.distance.and_then(pack)
        }
        (PriorKind::PlanePlaneAngle, VarValue::Plane(x), VarValue::Plane(y)) => {
            pack(plane_plane_with(x, y, tau)?.cosine)
        }
        (PriorKind::PlanePlaneDist, VarValue::Plane(x), VarValue::Plane(y)) => {
            plane_plane_with(x, y, tau)?.distance.and_then(pack)
        }
        _ => panic!("variables do not match prior kind {kind:?}"),
    };
    Ok(out)
}

/// Canonical ordering of a feature pair for a prior kind.
pub(crate) fn key_type(k: &VarKey) -> Option<FeatureType> {
    match k {
        VarKey::Point(_) => Some(FeatureType::Point),
        VarKey::Line(_) => Some(FeatureType::Line),
        VarKey::Plane(_) => Some(FeatureType::Plane),
        VarKey::Imu(_) => None,
    }
}
