//! Sliding-window variable container and its tangent-space layout.

use indexmap::IndexMap;
use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::geometry::{ImuState, LineCp, Manifold, PlaneCp, PointFeature};

/// Identifier of a window variable. IMU states are keyed by frame index,
/// features by their map id.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum VarKey {
    Imu(u64),
    Point(u32),
    Line(u32),
    Plane(u32),
}

impl VarKey {
    pub fn dim(&self) -> usize {
        match self {
            VarKey::Imu(_) => ImuState::DIM,
            VarKey::Point(_) => PointFeature::DIM,
            VarKey::Line(_) => LineCp::DIM,
            VarKey::Plane(_) => PlaneCp::DIM,
        }
    }

    pub fn is_imu(&self) -> bool {
        matches!(self, VarKey::Imu(_))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum VarValue {
    Imu(ImuState),
    Point(PointFeature),
    Line(LineCp),
    Plane(PlaneCp),
}

impl VarValue {
    pub fn boxplus(&self, delta: &[f64]) -> Self {
        match self {
            VarValue::Imu(x) => VarValue::Imu(x.boxplus(delta)),
            VarValue::Point(x) => VarValue::Point(x.boxplus(delta)),
            VarValue::Line(x) => VarValue::Line(x.boxplus(delta)),
            VarValue::Plane(x) => VarValue::Plane(x.boxplus(delta)),
        }
    }

    /// `self ⊟ base`; panics when the variants differ.
    pub fn boxminus(&self, base: &Self) -> DVector<f64> {
        match (self, base) {
            (VarValue::Imu(a), VarValue::Imu(b)) => a.boxminus(b),
            (VarValue::Point(a), VarValue::Point(b)) => a.boxminus(b),
            (VarValue::Line(a), VarValue::Line(b)) => a.boxminus(b),
            (VarValue::Plane(a), VarValue::Plane(b)) => a.boxminus(b),
            _ => panic!("boxminus between different variable types"),
        }
    }
}

/// Offsets of every variable inside the stacked window tangent vector.
#[derive(Clone, Debug, Default)]
pub struct Layout {
    offsets: IndexMap<VarKey, usize>,
    dim: usize,
}

impl Layout {
    pub fn from_keys(keys: impl IntoIterator<Item = VarKey>) -> Self {
        let mut offsets = IndexMap::new();
        let mut dim = 0;
        for k in keys {
            offsets.insert(k, dim);
            dim += k.dim();
        }
        Self { offsets, dim }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn offset(&self, key: &VarKey) -> Option<usize> {
        self.offsets.get(key).copied()
    }

    pub fn keys(&self) -> impl Iterator<Item = &VarKey> {
        self.offsets.keys()
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }
}

/// IMU states and point/line/plane features of one window. Iteration order
/// is insertion order: IMU states first, then points, lines, planes.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SlidingWindowState {
    pub imu: IndexMap<u64, ImuState>,
    pub points: IndexMap<u32, PointFeature>,
    pub lines: IndexMap<u32, LineCp>,
    pub planes: IndexMap<u32, PlaneCp>,
}

impl SlidingWindowState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn keys(&self) -> Vec<VarKey> {
        self.imu
            .keys()
            .map(|&k| VarKey::Imu(k))
            .chain(self.points.keys().map(|&k| VarKey::Point(k)))
            .chain(self.lines.keys().map(|&k| VarKey::Line(k)))
            .chain(self.planes.keys().map(|&k| VarKey::Plane(k)))
            .collect()
    }

    pub fn layout(&self) -> Layout {
        Layout::from_keys(self.keys())
    }

    pub fn tangent_dim(&self) -> usize {
        15 * self.imu.len() + 3 * self.points.len() + 4 * self.lines.len() + 3 * self.planes.len()
    }

    pub fn contains(&self, key: &VarKey) -> bool {
        match key {
            VarKey::Imu(k) => self.imu.contains_key(k),
            VarKey::Point(k) => self.points.contains_key(k),
            VarKey::Line(k) => self.lines.contains_key(k),
            VarKey::Plane(k) => self.planes.contains_key(k),
        }
    }

    pub fn get(&self, key: &VarKey) -> Option<VarValue> {
        match key {
            VarKey::Imu(k) => self.imu.get(k).map(|x| VarValue::Imu(*x)),
            VarKey::Point(k) => self.points.get(k).map(|x| VarValue::Point(*x)),
            VarKey::Line(k) => self.lines.get(k).map(|x| VarValue::Line(*x)),
            VarKey::Plane(k) => self.planes.get(k).map(|x| VarValue::Plane(*x)),
        }
    }

    /// Overwrite an existing variable. Panics if the key/value types differ.
    pub fn set(&mut self, key: &VarKey, value: VarValue) {
        match (key, value) {
            (VarKey::Imu(k), VarValue::Imu(x)) => {
                self.imu.insert(*k, x);
            }
            (VarKey::Point(k), VarValue::Point(x)) => {
                self.points.insert(*k, x);
            }
            (VarKey::Line(k), VarValue::Line(x)) => {
                self.lines.insert(*k, x);
            }
            (VarKey::Plane(k), VarValue::Plane(x)) => {
                self.planes.insert(*k, x);
            }
            _ => panic!("variable type mismatch for {key:?}"),
        }
    }

    pub fn remove(&mut self, key: &VarKey) -> Option<VarValue> {
        match key {
            VarKey::Imu(k) => self.imu.shift_remove(k).map(VarValue::Imu),
            VarKey::Point(k) => self.points.shift_remove(k).map(VarValue::Point),
            VarKey::Line(k) => self.lines.shift_remove(k).map(VarValue::Line),
            VarKey::Plane(k) => self.planes.shift_remove(k).map(VarValue::Plane),
        }
    }

    /// Perturb a single variable in place.
    pub fn boxplus_var(&mut self, key: &VarKey, delta: &[f64]) {
        let v = self.get(key).expect("unknown variable").boxplus(delta);
        self.set(key, v);
    }

    /// Retract every variable by its block of `delta` (window layout order).
    pub fn boxplus(&self, delta: &DVector<f64>) -> Self {
        assert_eq!(delta.len(), self.tangent_dim(), "tangent dimension mismatch");
        let mut out = self.clone();
        let mut off = 0;
        for (_, x) in out.imu.iter_mut() {
            *x = x.boxplus(&delta.as_slice()[off..off + 15]);
            off += 15;
        }
        for (_, x) in out.points.iter_mut() {
            *x = x.boxplus(&delta.as_slice()[off..off + 3]);
            off += 3;
        }
        for (_, x) in out.lines.iter_mut() {
            *x = x.boxplus(&delta.as_slice()[off..off + 4]);
            off += 4;
        }
        for (_, x) in out.planes.iter_mut() {
            *x = x.boxplus(&delta.as_slice()[off..off + 3]);
            off += 3;
        }
        out
    }

    /// Stacked `self ⊟ base`; both states must hold the same keys.
    pub fn boxminus(&self, base: &Self) -> DVector<f64> {
        let keys = self.keys();
        assert_eq!(keys, base.keys(), "states hold different variables");
        let mut out = DVector::zeros(self.tangent_dim());
        let mut off = 0;
        for k in &keys {
            let d = self.get(k).unwrap().boxminus(&base.get(k).unwrap());
            out.rows_mut(off, d.len()).copy_from(&d);
            off += d.len();
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Pose;
    use nalgebra::{Vector3, Vector4};

    fn sample() -> SlidingWindowState {
        let mut s = SlidingWindowState::new();
        s.imu.insert(0, ImuState::default());
        s.imu.insert(1, ImuState::default());
        s.points.insert(7, PointFeature::new(Vector3::new(1.0, 2.0, 3.0)));
        s.lines.insert(2, LineCp { x: Vector4::new(1.0, 0.0, 0.0, 0.0) });
        s.planes.insert(4, PlaneCp { cp: Vector3::new(0.0, 0.0, 2.0) });
        s
    }

    #[test]
    fn tangent_dim_counts_every_block() {
        let s = sample();
        assert_eq!(s.tangent_dim(), 15 * 2 + 3 + 4 + 3);
        assert_eq!(s.layout().dim(), s.tangent_dim());
        assert_eq!(s.layout().offset(&VarKey::Line(2)), Some(33));
    }

    #[test]
    fn zero_step_is_identity() {
        let s = sample();
        assert_eq!(s.boxplus(&DVector::zeros(s.tangent_dim())), s);
    }

    #[test]
    fn boxminus_inverts_boxplus() {
        let mut s = sample();
        s.imu[0].pose = Pose::new(crate::so3::exp(&Vector3::new(0.3, 0.1, -0.2)), Vector3::zeros());
        let delta = DVector::from_fn(s.tangent_dim(), |i, _| 1e-3 * (i as f64 + 1.0).sin());
        let moved = s.boxplus(&delta);
        assert!((moved.boxminus(&s) - delta).norm() < 1e-12);
    }
}
