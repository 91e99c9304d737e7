//! Raster approximation of the viability kernel.
//!
//! The state box is split into `ny x nz` cells, each represented by its
//! center. Starting from the biomass-floor raster, each iteration keeps a
//! cell iff some sampled effort pair is acceptable at the center and sends
//! the center into a cell that was a member of the previous raster. The
//! update is synchronous: the new raster only reads the frozen old one.
//! Iteration stops when the raster stops changing.
//!
//! The raster is an approximation of the kernel with no guaranteed inclusion
//! direction. Successors are mapped to the cell containing them; successors
//! outside the box are non-members.
//!
//! Efforts are sampled geometrically on `[floor, cap]`, with `floor` the
//! catch floor divided by the biomass at the cell center. A zero floor is
//! sampled as `0` plus a geometric ladder on `[cap * 1e-3, cap]`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{Control, GrowthModel, State, Thresholds};

pub const DEFAULT_MAX_ITER: usize = 100;

/// Lower end of the effort ladder, relative to the cap, when the catch
/// floor is zero.
const ZERO_FLOOR_LADDER_START: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub y_lo: f64,
    pub y_hi: f64,
    pub z_lo: f64,
    pub z_hi: f64,
    pub ny: usize,
    pub nz: usize,
    pub control_samples_v: usize,
    pub control_samples_w: usize,
    pub v_max: f64,
    pub w_max: f64,
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        let finite = [
            self.y_lo, self.y_hi, self.z_lo, self.z_hi, self.v_max, self.w_max,
        ]
        .iter()
        .all(|x| x.is_finite());
        if !finite {
            bad.push("bounds and caps must be finite".to_string());
        }
        if !(self.y_lo < self.y_hi) {
            bad.push(format!(
                "need y_lo < y_hi, got [{}, {}]",
                self.y_lo, self.y_hi
            ));
        }
        if !(self.z_lo < self.z_hi) {
            bad.push(format!(
                "need z_lo < z_hi, got [{}, {}]",
                self.z_lo, self.z_hi
            ));
        }
        if self.ny < 2 || self.nz < 2 {
            bad.push(format!(
                "need at least 2 cells per axis, got {}x{}",
                self.ny, self.nz
            ));
        }
        if self.control_samples_v < 2 || self.control_samples_w < 2 {
            bad.push(format!(
                "need at least 2 effort samples per axis, got {}x{}",
                self.control_samples_v, self.control_samples_w
            ));
        }
        if !(self.v_max > 0.0 && self.w_max > 0.0) {
            bad.push(format!(
                "effort caps must be > 0, got ({}, {})",
                self.v_max, self.w_max
            ));
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidGrid(bad.join("; ")))
        }
    }

    pub fn cell_count(&self) -> usize {
        self.ny * self.nz
    }

    pub fn dy(&self) -> f64 {
        (self.y_hi - self.y_lo) / self.ny as f64
    }

    pub fn dz(&self) -> f64 {
        (self.z_hi - self.z_lo) / self.nz as f64
    }

    /// Row-major index, `y` outer and `z` inner.
    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.nz + j
    }

    #[inline]
    pub fn cell_of_index(&self, k: usize) -> (usize, usize) {
        (k / self.nz, k % self.nz)
    }

    pub fn center(&self, i: usize, j: usize) -> State {
        State::new(
            self.y_lo + (i as f64 + 0.5) * self.dy(),
            self.z_lo + (j as f64 + 0.5) * self.dz(),
        )
    }

    /// Cell containing `s`, if inside the box. The upper faces belong to the
    /// last cells.
    pub fn locate(&self, s: State) -> Option<(usize, usize)> {
        Some((
            axis_cell(s.y, self.y_lo, self.y_hi, self.ny)?,
            axis_cell(s.z, self.z_lo, self.z_hi, self.nz)?,
        ))
    }
}

fn axis_cell(x: f64, lo: f64, hi: f64, n: usize) -> Option<usize> {
    if !(x >= lo && x <= hi) {
        return None;
    }
    let k = ((x - lo) / (hi - lo) * n as f64).floor() as usize;
    Some(k.min(n - 1))
}

/// Effort samples on `[floor, cap]`. Empty when `floor > cap` or the floor
/// is not finite.
pub fn effort_samples(floor: f64, cap: f64, n: usize) -> Vec<f64> {
    if !floor.is_finite() || floor > cap || n == 0 {
        return Vec::new();
    }
    if floor <= 0.0 {
        let mut out = Vec::with_capacity(n + 1);
        out.push(0.0);
        out.extend(geometric(cap * ZERO_FLOOR_LADDER_START, cap, n));
        return out;
    }
    if floor == cap {
        return vec![floor];
    }
    geometric(floor, cap, n)
}

fn geometric(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let ratio = hi / lo;
    (0..n)
        .map(|k| match k {
            0 => lo,
            _ if k == n - 1 => hi,
            _ => lo * ratio.powf(k as f64 / (n - 1) as f64),
        })
        .collect()
}

/// A membership raster over a [`GridSpec`].
#[derive(Debug, Clone, PartialEq)]
pub struct KernelGrid {
    pub spec: GridSpec,
    /// Cell-center membership, indexed by [`GridSpec::index`].
    pub member: Vec<bool>,
    pub iterations: usize,
    pub converged: bool,
}

impl KernelGrid {
    pub fn member_count(&self) -> usize {
        self.member.iter().filter(|&&m| m).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.member.iter().any(|&m| m)
    }

    pub fn is_member(&self, i: usize, j: usize) -> bool {
        self.member[self.spec.index(i, j)]
    }

    /// Membership of the cell containing `s`; `false` outside the box.
    pub fn contains(&self, s: State) -> bool {
        self.spec
            .locate(s)
            .is_some_and(|(i, j)| self.member[self.spec.index(i, j)])
    }

    /// Cell centers with their membership, in raster order.
    pub fn cells(&self) -> impl Iterator<Item = (State, bool)> + '_ {
        self.member.iter().enumerate().map(|(k, &m)| {
            let (i, j) = self.spec.cell_of_index(k);
            (self.spec.center(i, j), m)
        })
    }
}

/// Biomass-floor raster. Cells with zero biomass at the center are excluded
/// when the matching catch floor is positive.
pub fn compute_v0_grid(spec: &GridSpec, th: &Thresholds) -> Result<KernelGrid> {
    spec.validate()?;
    let member = (0..spec.cell_count())
        .map(|k| {
            let (i, j) = spec.cell_of_index(k);
            in_v0(th, spec.center(i, j))
        })
        .collect();
    Ok(KernelGrid {
        spec: *spec,
        member,
        iterations: 0,
        converged: false,
    })
}

fn in_v0(th: &Thresholds, s: State) -> bool {
    s.y >= th.y_min
        && s.z >= th.z_min
        && (th.catch1_min == 0.0 || s.y > 0.0)
        && (th.catch2_min == 0.0 || s.z > 0.0)
}

/// Whether some sampled acceptable control sends the center of cell `k` into
/// a member of `raster`.
fn has_viable_sample(
    spec: &GridSpec,
    model: &GrowthModel,
    th: &Thresholds,
    raster: &[bool],
    k: usize,
) -> Result<bool> {
    let (i, j) = spec.cell_of_index(k);
    let s = spec.center(i, j);
    let vs = effort_samples(
        th.prey_effort_floor(s.y),
        spec.v_max,
        spec.control_samples_v,
    );
    let ws = effort_samples(
        th.predator_effort_floor(s.z),
        spec.w_max,
        spec.control_samples_w,
    );

    // The prey successor depends on v only and the predator successor on w
    // only, so each axis is resolved once and the pairs are combined.
    let mut prey_cells = Vec::with_capacity(vs.len());
    for &v in &vs {
        let next = s.y * model.r1(s.y, s.z, v);
        if !next.is_finite() {
            return Err(Error::Evaluation {
                state: s,
                control: Control::new(v, 0.0),
            });
        }
        if v * s.y >= th.catch1_min {
            if let Some(ci) = axis_cell(next, spec.y_lo, spec.y_hi, spec.ny) {
                prey_cells.push(ci);
            }
        }
    }
    let mut predator_cells = Vec::with_capacity(ws.len());
    for &w in &ws {
        let next = s.z * model.r2(s.y, s.z, w);
        if !next.is_finite() {
            return Err(Error::Evaluation {
                state: s,
                control: Control::new(0.0, w),
            });
        }
        if w * s.z >= th.catch2_min {
            if let Some(cj) = axis_cell(next, spec.z_lo, spec.z_hi, spec.nz) {
                predator_cells.push(cj);
            }
        }
    }
    prey_cells.dedup();
    predator_cells.dedup();
    Ok(prey_cells
        .iter()
        .any(|&ci| predator_cells.iter().any(|&cj| raster[spec.index(ci, cj)])))
}

/// One synchronous refinement of `raster`.
fn refine(
    spec: &GridSpec,
    model: &GrowthModel,
    th: &Thresholds,
    raster: &[bool],
) -> Result<Vec<bool>> {
    raster
        .par_iter()
        .enumerate()
        .map(|(k, &m)| {
            if m {
                has_viable_sample(spec, model, th, raster, k)
            } else {
                Ok(false)
            }
        })
        .collect()
}

/// Decreasing set iteration from the biomass-floor raster, stopping at the
/// first raster equal to its predecessor or after `max_iter` refinements.
pub fn iterate_kernel(
    spec: &GridSpec,
    model: &GrowthModel,
    th: &Thresholds,
    max_iter: usize,
) -> Result<KernelGrid> {
    iterate_kernel_traced(spec, model, th, max_iter).map(|(grid, _)| grid)
}

/// Like [`iterate_kernel`], also returning every raster produced, starting
/// with the biomass-floor raster at index 0.
pub fn iterate_kernel_traced(
    spec: &GridSpec,
    model: &GrowthModel,
    th: &Thresholds,
    max_iter: usize,
) -> Result<(KernelGrid, Vec<Vec<bool>>)> {
    if max_iter == 0 {
        return Err(Error::InvalidGrid("max_iter must be >= 1".into()));
    }
    let mut grid = compute_v0_grid(spec, th)?;
    let mut trace = vec![grid.member.clone()];
    if grid.is_empty() {
        grid.converged = true;
        return Ok((grid, trace));
    }
    while grid.iterations < max_iter {
        let next = refine(spec, model, th, &grid.member)?;
        debug_assert!(
            next.iter().zip(&grid.member).all(|(&n, &o)| !n || o),
            "raster grew at iteration {}",
            grid.iterations + 1
        );
        grid.iterations += 1;
        let stationary = next == grid.member;
        trace.push(next.clone());
        grid.member = next;
        if stationary {
            grid.converged = true;
            break;
        }
    }
    Ok((grid, trace))
}

/// Whether every member cell has a sampled acceptable control sending its
/// center into a member cell.
pub fn is_viability_domain(
    grid: &KernelGrid,
    model: &GrowthModel,
    th: &Thresholds,
) -> Result<bool> {
    let next = refine(&grid.spec, model, th, &grid.member)?;
    Ok(next == grid.member)
}

/// Cell-wise comparison of two rasters on the same grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RasterComparison {
    pub cells: usize,
    pub disagreements: usize,
    /// `disagreements / cells`.
    pub fraction: f64,
    /// Largest Chebyshev distance, in cells, from a disagreeing cell to the
    /// nearest cell where the reference raster changes value; 0 without
    /// disagreements.
    pub max_boundary_distance: usize,
}

/// Compares `grid` with `reference`, which must share its box and shape.
pub fn compare_rasters(grid: &KernelGrid, reference: &KernelGrid) -> Result<RasterComparison> {
    let (a, b) = (&grid.spec, &reference.spec);
    if (a.ny, a.nz, a.y_lo, a.y_hi, a.z_lo, a.z_hi) != (b.ny, b.nz, b.y_lo, b.y_hi, b.z_lo, b.z_hi)
    {
        return Err(Error::InvalidGrid("rasters cover different grids".into()));
    }
    let (mut disagreements, mut max_boundary_distance) = (0, 0);
    for k in 0..a.cell_count() {
        if grid.member[k] != reference.member[k] {
            disagreements += 1;
            let (i, j) = a.cell_of_index(k);
            max_boundary_distance = max_boundary_distance.max(boundary_distance(reference, i, j));
        }
    }
    Ok(RasterComparison {
        cells: a.cell_count(),
        disagreements,
        fraction: disagreements as f64 / a.cell_count() as f64,
        max_boundary_distance,
    })
}

/// Smallest ring radius around `(i, j)` holding a cell whose membership
/// differs from that of `(i, j)`; `max(ny, nz)` if there is none.
fn boundary_distance(raster: &KernelGrid, i: usize, j: usize) -> usize {
    let s = &raster.spec;
    let own = raster.is_member(i, j);
    let limit = s.ny.max(s.nz);
    for r in 1..limit {
        let (i0, i1) = (i.saturating_sub(r), (i + r).min(s.ny - 1));
        let (j0, j1) = (j.saturating_sub(r), (j + r).min(s.nz - 1));
        for ii in i0..=i1 {
            for jj in j0..=j1 {
                let on_ring = ii.abs_diff(i) == r || jj.abs_diff(j) == r;
                if on_ring && raster.is_member(ii, jj) != own {
                    return r;
                }
            }
        }
    }
    limit
}
