//! Closed-form viability kernels.
//!
//! For growth coefficients that decrease in the efforts and become
//! non-positive for large efforts, the kernel is the set where one period of
//! floor-effort harvesting keeps both biomasses above their floors, provided
//! the floor point `(y_min, z_min)` itself grows under floor efforts. When
//! the predator has no density dependence and feeds on the prey, the
//! predator inequality is implied by the others. For the discrete
//! Lotka–Volterra model the remaining inequality is an explicit upper bound
//! on predator biomass.
//!
//! All inequalities are non-strict. Each membership test first re-checks
//! the hypotheses under which its formula is the kernel and fails otherwise.

use std::fmt;

use crate::error::{Error, Result};
use crate::kernel_grid::{GridSpec, KernelGrid};
use crate::model::{GrowthModel, LotkaVolterraParams, State, Thresholds};

/// Absolute tolerance, in tonnes, on the right end of the boundary curve.
pub const BOUNDARY_TOLERANCE: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Proposition {
    Generic,
    NoDensityDependence,
    LotkaVolterra,
}

impl fmt::Display for Proposition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Proposition::Generic => "generic",
            Proposition::NoDensityDependence => "no_density_dependence",
            Proposition::LotkaVolterra => "lotka_volterra",
        })
    }
}

/// Growth coefficients at the floor point under floor efforts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionReport {
    pub r1_at_floor: f64,
    pub r2_at_floor: f64,
    pub satisfied: bool,
    pub which_proposition: Proposition,
}

impl ConditionReport {
    fn new(r1_at_floor: f64, r2_at_floor: f64, which_proposition: Proposition) -> Self {
        Self {
            r1_at_floor,
            r2_at_floor,
            satisfied: r1_at_floor >= 1.0 && r2_at_floor >= 1.0,
            which_proposition,
        }
    }
}

impl fmt::Display for ConditionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "proposition = {}", self.which_proposition)?;
        writeln!(f, "r1_at_floor = {:.6}", self.r1_at_floor)?;
        writeln!(f, "r2_at_floor = {:.6}", self.r2_at_floor)?;
        write!(f, "satisfied = {}", self.satisfied)
    }
}

/// Largest catch floors compatible with growth at the floor point. May be
/// negative, meaning even zero catches break the growth conditions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaxCatchThresholds {
    pub c1_star: f64,
    pub c2_star: f64,
}

fn floor_efforts(th: &Thresholds) -> Result<(f64, f64)> {
    let mut bad = Vec::new();
    if th.y_min <= 0.0 && th.catch1_min > 0.0 {
        bad.push("y_min = 0 with a positive prey catch floor");
    }
    if th.z_min <= 0.0 && th.catch2_min > 0.0 {
        bad.push("z_min = 0 with a positive predator catch floor");
    }
    if !bad.is_empty() {
        return Err(Error::Domain(bad.join("; ")));
    }
    Ok((
        th.prey_effort_floor(th.y_min),
        th.predator_effort_floor(th.z_min),
    ))
}

/// Evaluates `r1(y_min, z_min, c1/y_min)` and `r2(y_min, z_min, c2/z_min)`.
pub fn check_conditions_generic(model: &GrowthModel, th: &Thresholds) -> Result<ConditionReport> {
    let (v, w) = floor_efforts(th)?;
    Ok(ConditionReport::new(
        model.r1(th.y_min, th.z_min, v),
        model.r2(th.y_min, th.z_min, w),
        Proposition::Generic,
    ))
}

/// Same evaluation for a predator without density dependence; the model's
/// flags must declare it.
pub fn check_conditions_no_dd(model: &GrowthModel, th: &Thresholds) -> Result<ConditionReport> {
    require_no_dd_shape(model)?;
    let mut report = check_conditions_generic(model, th)?;
    report.which_proposition = Proposition::NoDensityDependence;
    Ok(report)
}

/// Floor-point coefficients evaluated directly from the Lotka–Volterra
/// parameters.
pub fn check_conditions_lv(p: &LotkaVolterraParams, th: &Thresholds) -> Result<ConditionReport> {
    let (v, w) = floor_efforts(th)?;
    Ok(ConditionReport::new(
        p.r1(th.y_min, th.z_min, v),
        p.r2(th.y_min, w),
        Proposition::LotkaVolterra,
    ))
}

fn require_shape(model: &GrowthModel) -> Result<()> {
    let s = model.shape();
    if !(s.r1_decreasing_in_v && s.r2_decreasing_in_w) {
        return Err(Error::Misuse(
            "closed-form kernel needs coefficients decreasing in the efforts".into(),
        ));
    }
    Ok(())
}

fn require_no_dd_shape(model: &GrowthModel) -> Result<()> {
    require_shape(model)?;
    let s = model.shape();
    if s.r2_depends_on_z || !s.r2_increasing_in_y {
        return Err(Error::Misuse(
            "model does not declare r2 independent of z and increasing in y".into(),
        ));
    }
    Ok(())
}

fn require_satisfied(report: ConditionReport) -> Result<()> {
    if report.satisfied {
        Ok(())
    } else {
        Err(Error::Precondition(format!(
            "growth coefficients at the floor point must be >= 1 (r1 = {}, r2 = {})",
            report.r1_at_floor, report.r2_at_floor
        )))
    }
}

/// Prey part of the kernel: `y r1(y, z, c1/y) >= y_min`. No finite effort
/// meets a positive catch floor at zero biomass.
fn prey_sustained(model: &GrowthModel, th: &Thresholds, s: State) -> bool {
    let v = th.prey_effort_floor(s.y);
    v.is_finite() && s.y * model.r1(s.y, s.z, v) >= th.y_min
}

fn predator_sustained(model: &GrowthModel, th: &Thresholds, s: State) -> bool {
    let w = th.predator_effort_floor(s.z);
    w.is_finite() && s.z * model.r2(s.y, s.z, w) >= th.z_min
}

/// Kernel membership for a generic monotone growth model.
pub fn kernel_member_generic(model: &GrowthModel, th: &Thresholds, s: State) -> Result<bool> {
    require_shape(model)?;
    require_satisfied(check_conditions_generic(model, th)?)?;
    Ok(member_generic_unchecked(model, th, s))
}

pub(crate) fn member_generic_unchecked(model: &GrowthModel, th: &Thresholds, s: State) -> bool {
    s.y >= th.y_min
        && s.z >= th.z_min
        && prey_sustained(model, th, s)
        && predator_sustained(model, th, s)
}

/// Kernel membership when the predator coefficient ignores `z` and grows
/// with `y`: the predator inequality is dropped.
pub fn kernel_member_no_dd(model: &GrowthModel, th: &Thresholds, s: State) -> Result<bool> {
    require_satisfied(check_conditions_no_dd(model, th)?)?;
    Ok(s.y >= th.y_min && s.z >= th.z_min && prey_sustained(model, th, s))
}

/// Whether the biomass floors allow the Lotka–Volterra closed form:
/// `y_min >= (1 - L)/beta` and
/// `z_min <= (R - 1)/alpha - R (1 - L)/(alpha beta kappa)`.
pub fn lv_threshold_conditions(p: &LotkaVolterraParams, y_min: f64, z_min: f64) -> bool {
    y_min >= lv_min_prey_floor(p) && z_min <= lv_max_predator_floor(p)
}

/// `(1 - L) / beta`: the prey biomass at which the unharvested predator
/// exactly replaces itself.
pub fn lv_min_prey_floor(p: &LotkaVolterraParams) -> f64 {
    (1.0 - p.l()) / p.beta()
}

pub fn lv_max_predator_floor(p: &LotkaVolterraParams) -> f64 {
    (p.r() - 1.0) / p.alpha() - p.r() * (1.0 - p.l()) / (p.alpha() * p.beta() * p.kappa())
}

pub fn lv_max_catch_thresholds(
    p: &LotkaVolterraParams,
    y_min: f64,
    z_min: f64,
) -> MaxCatchThresholds {
    MaxCatchThresholds {
        c1_star: y_min * (p.r() - p.r() / p.kappa() * y_min - p.alpha() * z_min - 1.0),
        c2_star: z_min * (p.l() + p.beta() * y_min - 1.0),
    }
}

fn require_lv_preconditions(p: &LotkaVolterraParams, th: &Thresholds) -> Result<()> {
    let mut bad = Vec::new();
    if !lv_threshold_conditions(p, th.y_min, th.z_min) {
        bad.push(format!(
            "biomass floors outside the admissible range (need y_min >= {}, z_min <= {})",
            lv_min_prey_floor(p),
            lv_max_predator_floor(p)
        ));
    }
    let star = lv_max_catch_thresholds(p, th.y_min, th.z_min);
    if th.catch1_min > star.c1_star {
        bad.push(format!(
            "catch1_min {} exceeds c1_star {}",
            th.catch1_min, star.c1_star
        ));
    }
    if th.catch2_min > star.c2_star {
        bad.push(format!(
            "catch2_min {} exceeds c2_star {}",
            th.catch2_min, star.c2_star
        ));
    }
    if bad.is_empty() {
        Ok(())
    } else {
        Err(Error::Precondition(bad.join("; ")))
    }
}

/// Upper predator bound of the Lotka–Volterra kernel at prey biomass `y`:
/// `(R (kappa - y)/kappa - (c1 + y_min)/y) / alpha`.
pub fn lv_predator_bound(p: &LotkaVolterraParams, th: &Thresholds, y: f64) -> f64 {
    (p.r() * (p.kappa() - y) / p.kappa() - (th.catch1_min + th.y_min) / y) / p.alpha()
}

/// Kernel membership for the discrete Lotka–Volterra system.
pub fn lv_kernel_member(p: &LotkaVolterraParams, th: &Thresholds, s: State) -> Result<bool> {
    require_lv_preconditions(p, th)?;
    Ok(lv_member_unchecked(p, th, s))
}

pub(crate) fn lv_member_unchecked(p: &LotkaVolterraParams, th: &Thresholds, s: State) -> bool {
    s.y >= th.y_min && s.y > 0.0 && s.z >= th.z_min && s.z <= lv_predator_bound(p, th, s.y)
}

/// Prey catch that can be sustained from `s` while respecting the biomass
/// floors: `min(c1_star, y (R - R y/kappa - alpha z) - y_min)`, floored at 0.
pub fn lv_sustainable_catch_bound(p: &LotkaVolterraParams, th: &Thresholds, s: State) -> f64 {
    let star = lv_max_catch_thresholds(p, th.y_min, th.z_min).c1_star;
    let reachable = s.y * (p.r() - p.r() * s.y / p.kappa() - p.alpha() * s.z) - th.y_min;
    star.min(reachable).max(0.0)
}

/// Closed-form membership at every cell center of `spec`.
pub fn lv_kernel_raster(
    p: &LotkaVolterraParams,
    th: &Thresholds,
    spec: &GridSpec,
) -> Result<KernelGrid> {
    spec.validate()?;
    require_lv_preconditions(p, th)?;
    let member = (0..spec.cell_count())
        .map(|k| {
            let (i, j) = spec.cell_of_index(k);
            lv_member_unchecked(p, th, spec.center(i, j))
        })
        .collect();
    Ok(KernelGrid {
        spec: *spec,
        member,
        iterations: 0,
        converged: true,
    })
}

/// Samples of the kernel's upper boundary, ordered by increasing `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelBoundary {
    pub points: Vec<State>,
    /// Set when the kernel is empty and `points` is therefore empty.
    pub note: Option<String>,
}

/// Samples the upper curve of the Lotka–Volterra kernel at `n` evenly spaced
/// prey biomasses from `y_min` to the right end, where the bound meets
/// `z_min`.
pub fn lv_kernel_boundary(
    p: &LotkaVolterraParams,
    th: &Thresholds,
    n: usize,
) -> Result<KernelBoundary> {
    if n < 2 {
        return Err(Error::Precondition(format!(
            "need at least 2 boundary samples, got {n}"
        )));
    }
    if th.y_min <= 0.0 {
        return Err(Error::Domain("boundary needs y_min > 0".into()));
    }
    let bound = |y: f64| lv_predator_bound(p, th, y);
    if bound(th.y_min) < th.z_min {
        return Ok(KernelBoundary {
            points: Vec::new(),
            note: Some(format!(
                "empty kernel: predator bound {} at y_min is below z_min {}",
                bound(th.y_min),
                th.z_min
            )),
        });
    }
    // The bound is concave in y, so {bound >= z_min} is an interval starting
    // at y_min; it is negative at y = kappa.
    let (mut lo, mut hi) = (th.y_min, p.kappa().max(th.y_min * 2.0));
    while bound(hi) >= th.z_min {
        lo = hi;
        hi *= 2.0;
    }
    while hi - lo > BOUNDARY_TOLERANCE {
        let mid = 0.5 * (lo + hi);
        if bound(mid) >= th.z_min {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let y_right = lo;
    let points = (0..n)
        .map(|i| {
            let y = if i == n - 1 {
                y_right
            } else {
                th.y_min + (y_right - th.y_min) * i as f64 / (n - 1) as f64
            };
            State::new(y, bound(y).max(th.z_min))
        })
        .collect();
    Ok(KernelBoundary { points, note: None })
}
