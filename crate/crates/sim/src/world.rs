//! Manhattan-style 2.5D world: walls, floor, ceiling and axis-aligned
//! partitions on a half-metre grid, wall edges as lines, and points scattered
//! over the plane patches.

use nalgebra::Vector3;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use spins_core::geometry::{Plane, PlueckerLine, EPS_LINE, EPS_PLANE};
use spins_core::priors::{extract_priors, ExtractionConfig, Primitives, StructurePriorDB};

use crate::error::{Result, SimError};

/// Minimum distance of a point's in-plane coordinates from the half-metre
/// grid. Keeps incidental point distances well clear of the structural ones.
pub const GRID_CLEARANCE: f64 = 0.15;

const MAX_POINT_RETRIES: usize = 10_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WorldSpec {
    pub n_points: usize,
    pub n_lines: usize,
    pub n_planes: usize,
    /// Room size along x, y, z in metres; each must be an odd integer so the
    /// walls sit on the half-metre grid around the origin.
    pub room: [f64; 3],
    pub seed: u64,
}

impl Default for WorldSpec {
    fn default() -> Self {
        Self {
            n_points: 40,
            n_lines: 15,
            n_planes: 15,
            room: [11.0, 9.0, 3.0],
            seed: 1,
        }
    }
}

impl WorldSpec {
    pub fn half_extents(&self) -> Vector3<f64> {
        Vector3::from(self.room) / 2.0
    }

    pub fn validate(&self) -> Result<()> {
        for r in self.room {
            if !(r >= 3.0) || r.fract() != 0.0 || (r as i64) % 2 != 1 {
                return Err(SimError::InvalidScenario(format!(
                    "room extents must be odd integers >= 3, got {:?}",
                    self.room
                )));
            }
        }
        Ok(())
    }

    /// Whether `p` lies inside the room (boundary included).
    pub fn contains(&self, p: &Vector3<f64>) -> bool {
        let h = self.half_extents();
        (0..3).all(|i| p[i].abs() <= h[i])
    }
}

/// Finite rectangle on a plane used for visibility: `center ± s*u ± t*v`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Patch {
    pub center: Vector3<f64>,
    pub u: Vector3<f64>,
    pub v: Vector3<f64>,
}

impl Patch {
    pub fn area(&self) -> f64 {
        4.0 * self.u.norm() * self.v.norm()
    }

    /// `n x n` grid of sample points covering the patch.
    pub fn samples(&self, n: usize) -> Vec<Vector3<f64>> {
        let mut out = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let s = -1.0 + 2.0 * i as f64 / (n - 1) as f64;
                let t = -1.0 + 2.0 * j as f64 / (n - 1) as f64;
                out.push(self.center + s * self.u + t * self.v);
            }
        }
        out
    }

    fn range(&self, axis: usize) -> (f64, f64) {
        let e = self.u[axis].abs() + self.v[axis].abs();
        (self.center[axis] - e, self.center[axis] + e)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorldPlane {
    pub plane: Plane,
    pub axis: usize,
    pub offset: f64,
    pub patch: Patch,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorldLine {
    pub line: PlueckerLine,
    /// Visible segment.
    pub a: Vector3<f64>,
    pub b: Vector3<f64>,
}

impl WorldLine {
    pub fn samples(&self, n: usize) -> Vec<Vector3<f64>> {
        (0..n)
            .map(|i| self.a + (self.b - self.a) * (i as f64 / (n - 1) as f64))
            .collect()
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct World {
    pub spec: WorldSpec,
    pub points: Vec<Vector3<f64>>,
    pub lines: Vec<WorldLine>,
    pub planes: Vec<WorldPlane>,
    /// Priors extracted from the exact primitives.
    pub priors: StructurePriorDB,
}

impl World {
    pub fn primitives(&self) -> Primitives {
        Primitives {
            points: self.points.iter().enumerate().map(|(i, p)| (i as u32, *p)).collect(),
            lines: self.lines.iter().enumerate().map(|(i, l)| (i as u32, l.line)).collect(),
            planes: self.planes.iter().enumerate().map(|(i, p)| (i as u32, p.plane)).collect(),
        }
    }
}

fn axis(i: usize) -> Vector3<f64> {
    let mut e = Vector3::zeros();
    e[i] = 1.0;
    e
}

/// Half-integers strictly inside `(-h, h)`.
fn interior_offsets(h: f64) -> Vec<f64> {
    let n = (h - 0.5).round() as i64;
    (-n..n).map(|k| k as f64 + 0.5).collect()
}

fn grid_distance(x: f64) -> f64 {
    let r = (2.0 * x).rem_euclid(1.0) / 2.0;
    r.min(0.5 - r)
}

fn make_plane(ax: usize, offset: f64, patch: Patch) -> WorldPlane {
    WorldPlane {
        plane: Plane::new(axis(ax), offset),
        axis: ax,
        offset,
        patch,
    }
}

fn boundary_planes(h: &Vector3<f64>) -> Vec<WorldPlane> {
    let mut out = Vec::new();
    for ax in 0..3 {
        let (o1, o2) = ((ax + 1) % 3, (ax + 2) % 3);
        for sign in [-1.0, 1.0] {
            let patch = Patch {
                center: axis(ax) * sign * h[ax],
                u: axis(o1) * h[o1],
                v: axis(o2) * h[o2],
            };
            out.push(make_plane(ax, sign * h[ax], patch));
        }
    }
    out
}

fn partition(rng: &mut ChaCha8Rng, h: &Vector3<f64>, ax: usize, offset: f64) -> WorldPlane {
    let (o1, o2) = ((ax + 1) % 3, (ax + 2) % 3);
    let mut half = Vector3::zeros();
    let mut center = axis(ax) * offset;
    for o in [o1, o2] {
        if o == 2 && ax != 2 {
            // walls span floor to ceiling
            half[o] = h[o];
            center[o] = 0.0;
        } else {
            let s: f64 = rng.random_range(0.75..2.0_f64).min(h[o]);
            let c: f64 = rng.random_range(-(h[o] - s)..=(h[o] - s));
            half[o] = s;
            center[o] = c;
        }
    }
    let patch = Patch {
        center,
        u: axis(o1) * half[o1],
        v: axis(o2) * half[o2],
    };
    make_plane(ax, offset, patch)
}

/// Deterministic world for `spec`, including its ground-truth prior database.
pub fn generate_world(spec: &WorldSpec) -> Result<World> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let h = spec.half_extents();

    // Planes: boundaries first, then shuffled interior partitions.
    let mut planes = boundary_planes(&h);
    planes.shuffle(&mut rng);
    let mut slots: Vec<(usize, f64)> = Vec::new();
    for ax in 0..3 {
        for c in interior_offsets(h[ax]) {
            slots.push((ax, c));
        }
    }
    slots.shuffle(&mut rng);
    if spec.n_planes > planes.len() + slots.len() {
        return Err(SimError::GenerationFailed(format!(
            "room holds at most {} grid planes, {} requested",
            planes.len() + slots.len(),
            spec.n_planes
        )));
    }
    for &(ax, c) in &slots {
        if planes.len() >= spec.n_planes {
            break;
        }
        planes.push(partition(&mut rng, &h, ax, c));
    }
    planes.truncate(spec.n_planes);

    // Lines: intersections of perpendicular planes, real edges first.
    let mut edges = Vec::new();
    let mut virtual_edges = Vec::new();
    for i in 0..planes.len() {
        for j in i + 1..planes.len() {
            let (pi, pj) = (&planes[i], &planes[j]);
            if pi.axis == pj.axis {
                continue;
            }
            let k = 3 - pi.axis - pj.axis;
            let (ilo, ihi) = pi.patch.range(pj.axis);
            let (jlo, jhi) = pj.patch.range(pi.axis);
            let touching = (ilo..=ihi).contains(&pj.offset) && (jlo..=jhi).contains(&pi.offset);
            let (a_lo, a_hi) = pi.patch.range(k);
            let (b_lo, b_hi) = pj.patch.range(k);
            let (lo, hi) = if a_lo.max(b_lo) < a_hi.min(b_hi) {
                (a_lo.max(b_lo), a_hi.min(b_hi))
            } else {
                (a_lo, a_hi)
            };
            let mut p = Vector3::zeros();
            p[pi.axis] = pi.offset;
            p[pj.axis] = pj.offset;
            let (mut a, mut b) = (p, p);
            a[k] = lo;
            b[k] = hi;
            let line = WorldLine {
                line: PlueckerLine::from_point_dir(&p, &axis(k)),
                a,
                b,
            };
            if touching {
                edges.push(line);
            } else {
                virtual_edges.push(line);
            }
        }
    }
    edges.shuffle(&mut rng);
    virtual_edges.shuffle(&mut rng);
    edges.extend(virtual_edges);
    if spec.n_lines > edges.len() {
        return Err(SimError::GenerationFailed(format!(
            "{} planes give only {} edge lines, {} requested",
            planes.len(),
            edges.len(),
            spec.n_lines
        )));
    }
    edges.truncate(spec.n_lines);

    // Points on plane patches, area weighted, off the grid.
    let mut points = Vec::with_capacity(spec.n_points);
    if spec.n_points > 0 && planes.is_empty() {
        return Err(SimError::GenerationFailed("points need at least one plane".into()));
    }
    let total: f64 = planes.iter().map(|p| p.patch.area()).sum();
    for _ in 0..spec.n_points {
        let mut pick = rng.random_range(0.0..total);
        let mut idx = 0;
        while idx + 1 < planes.len() && pick >= planes[idx].patch.area() {
            pick -= planes[idx].patch.area();
            idx += 1;
        }
        let pl = planes[idx];
        let mut placed = None;
        for _ in 0..MAX_POINT_RETRIES {
            let s: f64 = rng.random_range(-1.0..=1.0);
            let t: f64 = rng.random_range(-1.0..=1.0);
            let mut p = pl.patch.center + s * pl.patch.u + t * pl.patch.v;
            p[pl.axis] = pl.offset;
            let clear = (0..3)
                .filter(|&i| i != pl.axis)
                .all(|i| grid_distance(p[i]) >= GRID_CLEARANCE);
            if clear {
                placed = Some(p);
                break;
            }
        }
        points.push(placed.ok_or_else(|| {
            SimError::GenerationFailed("could not place a point off the grid".into())
        })?);
    }

    for l in &edges {
        if l.line.distance() < EPS_LINE {
            return Err(SimError::GenerationFailed("line through the origin".into()));
        }
    }
    for p in &planes {
        if p.plane.d.abs() < EPS_PLANE {
            return Err(SimError::GenerationFailed("plane through the origin".into()));
        }
    }

    let mut world = World {
        spec: spec.clone(),
        points,
        lines: edges,
        planes,
        priors: StructurePriorDB::default(),
    };
    world.priors = extract_priors(&world.primitives(), &ExtractionConfig::default())?.db;
    Ok(world)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_distance_is_periodic() {
        assert_eq!(grid_distance(0.5), 0.0);
        assert_eq!(grid_distance(-1.0), 0.0);
        assert!((grid_distance(0.2) - 0.2).abs() < 1e-12);
        assert!((grid_distance(-0.7) - 0.2).abs() < 1e-12);
    }

    #[test]
    fn interior_offsets_are_half_integers() {
        assert_eq!(interior_offsets(1.5), vec![-0.5, 0.5]);
        assert_eq!(interior_offsets(2.5).len(), 4);
    }

    #[test]
    fn even_room_is_rejected() {
        let spec = WorldSpec {
            room: [10.0, 9.0, 3.0],
            ..Default::default()
        };
        assert!(generate_world(&spec).is_err());
    }
}
