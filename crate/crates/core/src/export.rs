//! CSV and run-length text formats for rasters, boundaries and trajectories.
//!
//! Floats are written in Rust's shortest round-trip form.

use std::io::Write;

use crate::error::{Error, Result};
use crate::kernel_grid::{GridSpec, KernelGrid};
use crate::model::State;
use crate::viable_control::Trajectory;

const RLE_MAGIC: &str = "viability-raster-rle 1";

fn bit(b: bool) -> &'static str {
    if b {
        "1"
    } else {
        "0"
    }
}

/// `y,z,member`, one row per cell center, `y` outer and `z` inner.
pub fn write_raster_csv<W: Write>(grid: &KernelGrid, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["y", "z", "member"])?;
    for (c, m) in grid.cells() {
        w.write_record([c.y.to_string(), c.z.to_string(), bit(m).to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// `y,z`, one boundary sample per row.
pub fn write_boundary_csv<W: Write>(points: &[State], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["y", "z"])?;
    for p in points {
        w.write_record([p.y.to_string(), p.z.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// `t,y,z,v,w,acceptable`; the final state's row has empty control fields.
pub fn write_trajectory_csv<W: Write>(traj: &Trajectory, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "y", "z", "v", "w", "acceptable"])?;
    for (t, s) in traj.states.iter().enumerate() {
        let (v, wv, a) = match traj.controls.get(t) {
            Some(u) => (
                u.v.to_string(),
                u.w.to_string(),
                bit(traj.acceptable[t]).to_string(),
            ),
            None => (String::new(), String::new(), String::new()),
        };
        w.write_record([t.to_string(), s.y.to_string(), s.z.to_string(), v, wv, a])?;
    }
    w.flush()?;
    Ok(())
}

/// Compact text form of a raster for regression fixtures:
///
/// ```text
/// viability-raster-rle 1
/// <ny> <nz> <y_lo> <y_hi> <z_lo> <z_hi>
/// <iterations> <converged>
/// <run lengths, alternating 0-runs and 1-runs, starting with a 0-run>
/// ```
///
/// Effort sampling fields of the grid spec are not stored.
pub fn encode_rle(grid: &KernelGrid) -> String {
    let s = &grid.spec;
    let mut runs = Vec::new();
    let mut current = false;
    let mut len = 0usize;
    for &m in &grid.member {
        if m == current {
            len += 1;
        } else {
            runs.push(len);
            current = m;
            len = 1;
        }
    }
    runs.push(len);
    let runs: Vec<String> = runs.iter().map(|r| r.to_string()).collect();
    format!(
        "{RLE_MAGIC}\n{} {} {} {} {} {}\n{} {}\n{}\n",
        s.ny,
        s.nz,
        s.y_lo,
        s.y_hi,
        s.z_lo,
        s.z_hi,
        grid.iterations,
        bit(grid.converged),
        runs.join(" ")
    )
}

/// Inverse of [`encode_rle`]. Effort sampling fields are taken from
/// `sampling`.
pub fn decode_rle(text: &str, sampling: &GridSpec) -> Result<KernelGrid> {
    let bad = |m: &str| Error::InvalidGrid(format!("malformed raster text: {m}"));
    let mut lines = text.lines();
    if lines.next() != Some(RLE_MAGIC) {
        return Err(bad("missing header"));
    }
    let dims: Vec<&str> = lines
        .next()
        .ok_or_else(|| bad("missing dimensions"))?
        .split_whitespace()
        .collect();
    if dims.len() != 6 {
        return Err(bad("dimension line needs 6 fields"));
    }
    let int = |s: &str| {
        s.parse::<usize>()
            .map_err(|_| bad(&format!("`{s}` is not a count")))
    };
    let num = |s: &str| {
        s.parse::<f64>()
            .map_err(|_| bad(&format!("`{s}` is not a number")))
    };
    let spec = GridSpec {
        ny: int(dims[0])?,
        nz: int(dims[1])?,
        y_lo: num(dims[2])?,
        y_hi: num(dims[3])?,
        z_lo: num(dims[4])?,
        z_hi: num(dims[5])?,
        ..*sampling
    };
    spec.validate()?;
    let status: Vec<&str> = lines
        .next()
        .ok_or_else(|| bad("missing status"))?
        .split_whitespace()
        .collect();
    if status.len() != 2 {
        return Err(bad("status line needs 2 fields"));
    }
    let iterations = int(status[0])?;
    let converged = match status[1] {
        "1" => true,
        "0" => false,
        other => return Err(bad(&format!("converged flag `{other}`"))),
    };
    let mut member = Vec::with_capacity(spec.cell_count());
    let mut value = false;
    for tok in lines.next().unwrap_or("").split_whitespace() {
        member.extend(std::iter::repeat_n(value, int(tok)?));
        value = !value;
    }
    if member.len() != spec.cell_count() {
        return Err(bad(&format!(
            "runs cover {} cells, expected {}",
            member.len(),
            spec.cell_count()
        )));
    }
    Ok(KernelGrid {
        spec,
        member,
        iterations,
        converged,
    })
}
