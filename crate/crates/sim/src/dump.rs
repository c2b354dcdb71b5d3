//! CSV dumps for plotting.

use std::io::Write;

use spins_core::geometry::Pose;

use crate::error::Result;
use crate::world::World;

/// Columns `t,x,y,z,qw,qx,qy,qz`; the quaternion rotates global into body.
pub fn write_trajectory_csv<W: Write>(w: W, rows: &[(f64, Pose)]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["t", "x", "y", "z", "qw", "qx", "qy", "qz"])?;
    for (t, p) in rows {
        let q = p.rot.quaternion();
        out.write_record(
            [*t, p.pos.x, p.pos.y, p.pos.z, q.w, q.i, q.j, q.k].map(|v| v.to_string()),
        )?;
    }
    out.flush()?;
    Ok(())
}

/// Columns `kind,id,a0..a5`: points `(x,y,z)`, lines `(n, v)`, planes `(n, d)`.
pub fn write_world_csv<W: Write>(w: W, world: &World) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["kind", "id", "a0", "a1", "a2", "a3", "a4", "a5"])?;
    let row = |kind: &str, id: usize, vals: &[f64]| {
        let mut r = vec![kind.to_string(), id.to_string()];
        r.extend(vals.iter().map(|v| v.to_string()));
        r.resize(8, String::new());
        r
    };
    for (i, p) in world.points.iter().enumerate() {
        out.write_record(row("point", i, p.as_slice()))?;
    }
    for (i, l) in world.lines.iter().enumerate() {
        let (n, v) = (l.line.n, l.line.v);
        out.write_record(row("line", i, &[n.x, n.y, n.z, v.x, v.y, v.z]))?;
    }
    for (i, p) in world.planes.iter().enumerate() {
        let n = p.plane.n;
        out.write_record(row("plane", i, &[n.x, n.y, n.z, p.plane.d]))?;
    }
    out.flush()?;
    Ok(())
}
