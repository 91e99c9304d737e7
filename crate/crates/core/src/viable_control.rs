//! Viable efforts, feedback policies and trajectory simulation.
//!
//! At a kernel state `(y, z)` the viable efforts form the box
//! `[c1/y, v_hat] x [c2/z, w_hat]`, cut by the requirement that the successor
//! is still in the kernel. `v_hat` is the largest prey effort sending the
//! prey exactly to its floor in one period; `w_hat` is its predator
//! counterpart. `(v_hat, w_hat)` is always viable because it lands on the
//! floor point. The floor efforts `(c1/y, c2/z)` are not always viable: they
//! can leave the predator too abundant for the next period's prey floor.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::kernel_analytic::{check_conditions_generic, member_generic_unchecked};
use crate::model::{config_acceptable, Control, GrowthModel, State, Thresholds};

/// Relative tolerance on efforts for the root searches.
pub const BISECTION_REL_TOL: f64 = 1e-10;
pub const BISECTION_MAX_ITER: usize = 200;
/// Halvings allowed when pulling a candidate control back into the viable set.
pub const MAX_PROJECTION_HALVINGS: usize = 60;
/// Fraction of the floor-to-maximum segment added to the smallest viable
/// step of the min-effort policy.
pub const MIN_EFFORT_MARGIN: f64 = 1e-6;

/// Effort bounds at a state. The box is necessary but not sufficient for
/// viability: the successor must also lie in the kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlBox {
    pub v_lo: f64,
    pub v_hi: f64,
    pub w_lo: f64,
    pub w_hi: f64,
}

impl ControlBox {
    pub fn contains(&self, u: Control) -> bool {
        u.v >= self.v_lo && u.v <= self.v_hi && u.w >= self.w_lo && u.w <= self.w_hi
    }

    pub fn floor(&self) -> Control {
        Control::new(self.v_lo, self.w_lo)
    }

    pub fn hat(&self) -> Control {
        Control::new(self.v_hi, self.w_hi)
    }

    pub fn midpoint(&self) -> Control {
        Control::new(0.5 * (self.v_lo + self.v_hi), 0.5 * (self.w_lo + self.w_hi))
    }
}

/// Checks the growth conditions and the kernel membership of `s`.
fn require_member(model: &GrowthModel, th: &Thresholds, s: State) -> Result<()> {
    let report = check_conditions_generic(model, th)?;
    if !report.satisfied {
        return Err(Error::Precondition(format!(
            "growth coefficients at the floor point must be >= 1 (r1 = {}, r2 = {})",
            report.r1_at_floor, report.r2_at_floor
        )));
    }
    if member_generic_unchecked(model, th, s) {
        Ok(())
    } else {
        Err(Error::NoSolution(s))
    }
}

/// Largest effort `e >= lo` with `biomass * coef(e) >= target`, the coefficient
/// being non-increasing in the effort. `biomass * coef(lo) >= target` must hold.
fn largest_root<F: Fn(f64) -> f64>(
    coef: F,
    biomass: f64,
    target: f64,
    lo: f64,
    hi: f64,
) -> Result<f64> {
    let g = |e: f64| biomass * coef(e) - target;
    let g_hi = g(hi);
    if g_hi >= 0.0 {
        if g_hi == 0.0 {
            return Ok(hi);
        }
        return Err(Error::ModelContract(format!(
            "coefficient still positive at the upper effort hint {hi}"
        )));
    }
    let (mut lo, mut hi) = (lo, hi);
    for _ in 0..BISECTION_MAX_ITER {
        if hi - lo <= BISECTION_REL_TOL * hi.abs().max(1.0) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if g(mid) >= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// `(v_hat, w_hat)` by bisection on `[floor, control_upper_hint]`.
pub fn hat_controls_by_bisection(
    model: &GrowthModel,
    th: &Thresholds,
    s: State,
) -> Result<(f64, f64)> {
    require_member(model, th, s)?;
    hat_bisect_unchecked(model, th, s)
}

fn hat_bisect_unchecked(model: &GrowthModel, th: &Thresholds, s: State) -> Result<(f64, f64)> {
    let hint = model.control_upper_hint();
    let (v_lo, w_lo) = (th.prey_effort_floor(s.y), th.predator_effort_floor(s.z));
    let v = largest_root(
        |v| model.r1(s.y, s.z, v),
        s.y,
        th.y_min,
        v_lo,
        hint.max(v_lo),
    )?;
    let w = largest_root(
        |w| model.r2(s.y, s.z, w),
        s.z,
        th.z_min,
        w_lo,
        hint.max(w_lo),
    )?;
    Ok((v, w))
}

/// Largest efforts sending each biomass exactly to its floor in one period.
///
/// Closed form for unit-slope affine control dependence
/// (`v_hat = r1(y, z, 0) - y_min / y`), bisection otherwise.
pub fn hat_controls(model: &GrowthModel, th: &Thresholds, s: State) -> Result<(f64, f64)> {
    require_member(model, th, s)?;
    hat_unchecked(model, th, s)
}

fn hat_unchecked(model: &GrowthModel, th: &Thresholds, s: State) -> Result<(f64, f64)> {
    if model.shape().unit_affine_controls {
        let v_lo = th.prey_effort_floor(s.y);
        let w_lo = th.predator_effort_floor(s.z);
        let v = (model.r1(s.y, s.z, 0.0) - th.y_min / s.y).max(v_lo);
        let w = (model.r2(s.y, s.z, 0.0) - th.z_min / s.z).max(w_lo);
        Ok((
            settle_above(|v| s.y * model.r1(s.y, s.z, v), th.y_min, v, v_lo),
            settle_above(|w| s.z * model.r2(s.y, s.z, w), th.z_min, w, w_lo),
        ))
    } else {
        hat_bisect_unchecked(model, th, s)
    }
}

/// Steps a closed-form root down by ulps until the rounded successor is not
/// below its floor.
fn settle_above<F: Fn(f64) -> f64>(successor: F, target: f64, mut e: f64, lo: f64) -> f64 {
    for _ in 0..64 {
        if e <= lo || successor(e) >= target {
            break;
        }
        e = e.next_down();
    }
    e.max(lo)
}

pub fn control_box(model: &GrowthModel, th: &Thresholds, s: State) -> Result<ControlBox> {
    require_member(model, th, s)?;
    box_unchecked(model, th, s)
}

fn box_unchecked(model: &GrowthModel, th: &Thresholds, s: State) -> Result<ControlBox> {
    let (v_hi, w_hi) = hat_unchecked(model, th, s)?;
    Ok(ControlBox {
        v_lo: th.prey_effort_floor(s.y),
        v_hi,
        w_lo: th.predator_effort_floor(s.z),
        w_hi,
    })
}

/// Whether `u` is a viable control at kernel state `s`: inside the effort
/// box, with a successor that is again a kernel member.
pub fn viable_control_member(
    model: &GrowthModel,
    th: &Thresholds,
    s: State,
    u: Control,
) -> Result<bool> {
    require_member(model, th, s)?;
    let b = box_unchecked(model, th, s)?;
    viable_in_box(model, th, s, &b, u)
}

fn viable_in_box(
    model: &GrowthModel,
    th: &Thresholds,
    s: State,
    b: &ControlBox,
    u: Control,
) -> Result<bool> {
    if !b.contains(u) {
        return Ok(false);
    }
    let next = model.step(s, u)?;
    Ok(member_generic_unchecked(model, th, next))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolicyKind {
    /// Smallest viable efforts: the floor efforts when viable, otherwise the
    /// first viable point found bisecting from the floor toward `(v_hat, w_hat)`.
    MinEffort,
    /// `(v_hat, w_hat)`.
    MaxEffort,
    /// Box midpoint, pulled toward `(v_hat, w_hat)` until viable.
    Midpoint,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 3] = [
        PolicyKind::MinEffort,
        PolicyKind::MaxEffort,
        PolicyKind::Midpoint,
    ];
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PolicyKind::MinEffort => "min_effort",
            PolicyKind::MaxEffort => "max_effort",
            PolicyKind::Midpoint => "midpoint",
        })
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "min_effort" => Ok(PolicyKind::MinEffort),
            "max_effort" => Ok(PolicyKind::MaxEffort),
            "midpoint" => Ok(PolicyKind::Midpoint),
            other => Err(Error::Policy(format!(
                "unknown policy `{other}` (expected min_effort, max_effort or midpoint)"
            ))),
        }
    }
}

/// A feedback selection over the kernel of a generic monotone growth model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeedbackPolicy {
    pub kind: PolicyKind,
}

impl FeedbackPolicy {
    pub const fn new(kind: PolicyKind) -> Self {
        Self { kind }
    }
}

/// The policy's control at kernel state `s`. Always viable.
pub fn feedback(
    policy: &FeedbackPolicy,
    model: &GrowthModel,
    th: &Thresholds,
    s: State,
) -> Result<Control> {
    match require_member(model, th, s) {
        Err(Error::NoSolution(_)) => {
            return Err(Error::Policy(format!(
                "state ({}, {}) is not a kernel member",
                s.y, s.z
            )))
        }
        other => other?,
    }
    let b = box_unchecked(model, th, s)?;
    let viable = |u: Control| viable_in_box(model, th, s, &b, u);
    let hat = b.hat();
    match policy.kind {
        PolicyKind::MaxEffort => Ok(hat),
        PolicyKind::MinEffort => {
            let floor = b.floor();
            if viable(floor)? {
                return Ok(floor);
            }
            // viable at t = 1, not at t = 0
            let at = |t: f64| {
                Control::new(
                    floor.v + t * (hat.v - floor.v),
                    floor.w + t * (hat.w - floor.w),
                )
            };
            let (mut lo, mut hi) = (0.0, 1.0);
            for _ in 0..MAX_PROJECTION_HALVINGS {
                let mid = 0.5 * (lo + hi);
                if viable(at(mid))? {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            // The smallest viable step puts the successor on the kernel
            // boundary, where membership tests written differently disagree
            // in the last bit; step slightly further inside when possible.
            let inside = (hi + MIN_EFFORT_MARGIN).min(1.0);
            if inside < 1.0 && viable(at(inside))? {
                return Ok(at(inside));
            }
            Ok(if hi == 1.0 { hat } else { at(hi) })
        }
        PolicyKind::Midpoint => {
            let mut u = b.midpoint();
            for _ in 0..MAX_PROJECTION_HALVINGS {
                if viable(u)? {
                    return Ok(u);
                }
                u = Control::new(0.5 * (u.v + hat.v), 0.5 * (u.w + hat.w));
            }
            Ok(hat)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// `horizon + 1` states.
    pub states: Vec<State>,
    /// `horizon` controls.
    pub controls: Vec<Control>,
    /// Whether `(states[t], controls[t])` is acceptable.
    pub acceptable: Vec<bool>,
}

impl Trajectory {
    pub fn first_violation(&self) -> Option<usize> {
        self.acceptable.iter().position(|&a| !a)
    }

    pub fn horizon(&self) -> usize {
        self.controls.len()
    }
}

/// Runs the feedback policy for `horizon` periods from `s0`.
///
/// Outside the kernel the floor efforts are applied instead (zero effort
/// where a biomass is not positive). Violations are recorded, not raised.
pub fn simulate(
    model: &GrowthModel,
    th: &Thresholds,
    policy: &FeedbackPolicy,
    s0: State,
    horizon: usize,
) -> Result<Trajectory> {
    if horizon == 0 {
        return Err(Error::Precondition(
            "simulation horizon must be >= 1".into(),
        ));
    }
    let conditions_hold = check_conditions_generic(model, th)
        .map(|r| r.satisfied)
        .unwrap_or(false);
    let mut states = Vec::with_capacity(horizon + 1);
    let mut controls = Vec::with_capacity(horizon);
    let mut acceptable = Vec::with_capacity(horizon);
    let mut s = s0;
    states.push(s);
    for _ in 0..horizon {
        let u = if conditions_hold && member_generic_unchecked(model, th, s) {
            feedback(policy, model, th, s)?
        } else {
            fallback_control(th, s)
        };
        acceptable.push(config_acceptable(th, s, u));
        s = model.step(s, u)?;
        controls.push(u);
        states.push(s);
    }
    Ok(Trajectory {
        states,
        controls,
        acceptable,
    })
}

fn fallback_control(th: &Thresholds, s: State) -> Control {
    let finite_or_zero = |e: f64| if e.is_finite() { e } else { 0.0 };
    Control::new(
        finite_or_zero(th.prey_effort_floor(s.y)),
        finite_or_zero(th.predator_effort_floor(s.z)),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel_analytic::{lv_max_catch_thresholds, lv_predator_bound};
    use crate::model::{lv_model, LotkaVolterraParams, ModelShape};

    fn peru() -> (LotkaVolterraParams, Thresholds, GrowthModel) {
        let p = LotkaVolterraParams::peru();
        (p, Thresholds::peru(), lv_model(&p, 6e7).unwrap())
    }

    #[test]
    fn hat_controls_at_floor_point() {
        let (p, th, m) = peru();
        let s = State::new(th.y_min, th.z_min);
        let (v, w) = hat_controls(&m, &th, s).unwrap();
        assert!((v - 0.771321).abs() < 1e-6, "{v}");
        assert!((w - 0.284150).abs() < 1e-9, "{w}");
        let star = lv_max_catch_thresholds(&p, th.y_min, th.z_min);
        assert!((v * th.y_min - star.c1_star).abs() < 1e-6);
        assert!((w * th.z_min - 56_830.0).abs() < 1e-6);
    }

    #[test]
    fn box_degenerates_on_the_upper_boundary() {
        let (p, th, m) = peru();
        let y = 1e7;
        let s = State::new(y, lv_predator_bound(&p, &th, y));
        let b = control_box(&m, &th, s).unwrap();
        assert!((b.v_hi - b.v_lo).abs() < 1e-9, "{b:?}");
    }

    #[test]
    fn bisection_matches_closed_form() {
        let (_, th, m) = peru();
        for s in [
            State::new(7e6, 2e5),
            State::new(1e7, 3e5),
            State::new(2.5e7, 8e5),
        ] {
            let a = hat_controls(&m, &th, s).unwrap();
            let b = hat_controls_by_bisection(&m, &th, s).unwrap();
            assert!(
                (a.0 - b.0).abs() < 1e-8 && (a.1 - b.1).abs() < 1e-8,
                "{a:?} {b:?}"
            );
        }
    }

    #[test]
    fn outside_the_kernel_has_no_hat() {
        let (_, th, m) = peru();
        assert!(matches!(
            hat_controls(&m, &th, State::new(7e6, 6.5e5)),
            Err(Error::NoSolution(_))
        ));
    }

    #[test]
    fn broken_limit_hypothesis_is_a_contract_error() {
        // r1 never drops below 1.5 however hard the prey is fished
        let m = GrowthModel::new(
            |_, _, v| 1.5 + (-v).exp(),
            |_, _, w| 2.0 - w,
            ModelShape::GENERIC,
            3.0,
        )
        .unwrap();
        let th = Thresholds::new(1.0, 1.0, 0.0, 0.0).unwrap();
        assert!(matches!(
            hat_controls(&m, &th, State::new(10.0, 10.0)),
            Err(Error::ModelContract(_))
        ));
    }

    #[test]
    fn floor_and_hat_controls() {
        let (_, th, m) = peru();
        let s = State::new(1e7, 3e5);
        assert!(viable_control_member(&m, &th, s, th.floor_control(s)).unwrap());
        let (v, w) = hat_controls(&m, &th, s).unwrap();
        assert!(viable_control_member(&m, &th, s, Control::new(v, w)).unwrap());
        let low = Control::new(0.9 * th.prey_effort_floor(s.y), w);
        assert!(!viable_control_member(&m, &th, s, low).unwrap());
    }

    #[test]
    fn floor_control_can_leave_the_kernel() {
        let (p, th, m) = peru();
        let s = State::new(7e6, lv_predator_bound(&p, &th, 7e6) - 1.0);
        assert!(!viable_control_member(&m, &th, s, th.floor_control(s)).unwrap());
        let u = feedback(&FeedbackPolicy::new(PolicyKind::MinEffort), &m, &th, s).unwrap();
        assert!(viable_control_member(&m, &th, s, u).unwrap());
    }

    #[test]
    fn policies() {
        let (_, th, m) = peru();
        let s = State::new(1e7, 3e5);
        let min = feedback(&FeedbackPolicy::new(PolicyKind::MinEffort), &m, &th, s).unwrap();
        assert!((min.v - 0.2).abs() < 1e-15);
        assert!((min.w - 5e3 / 3e5).abs() < 1e-15);
        let corner = State::new(th.y_min, th.z_min);
        let max = feedback(&FeedbackPolicy::new(PolicyKind::MaxEffort), &m, &th, corner).unwrap();
        assert!((max.v - 0.771321).abs() < 1e-6 && (max.w - 0.284150).abs() < 1e-9);
        for kind in PolicyKind::ALL {
            let u = feedback(&FeedbackPolicy::new(kind), &m, &th, s).unwrap();
            assert!(viable_control_member(&m, &th, s, u).unwrap(), "{kind}");
        }
        assert!(matches!(
            feedback(
                &FeedbackPolicy::new(PolicyKind::Midpoint),
                &m,
                &th,
                State::new(1.0, 1.0)
            ),
            Err(Error::Policy(_))
        ));
    }

    #[test]
    fn policy_names_round_trip() {
        for kind in PolicyKind::ALL {
            assert_eq!(kind.to_string().parse::<PolicyKind>().unwrap(), kind);
        }
        assert!("greedy".parse::<PolicyKind>().is_err());
    }

    #[test]
    fn simulation_from_floor_point_stays_viable() {
        let (_, th, m) = peru();
        let t = simulate(
            &m,
            &th,
            &FeedbackPolicy::new(PolicyKind::MinEffort),
            State::new(th.y_min, th.z_min),
            100,
        )
        .unwrap();
        assert_eq!(t.states.len(), 101);
        assert_eq!(t.first_violation(), None);
        for (k, (s, u)) in t.states.iter().zip(&t.controls).enumerate() {
            assert_eq!(m.step(*s, *u).unwrap(), t.states[k + 1]);
        }
    }

    #[test]
    fn simulation_outside_v0_fails_immediately() {
        let (_, th, m) = peru();
        for kind in PolicyKind::ALL {
            let t = simulate(
                &m,
                &th,
                &FeedbackPolicy::new(kind),
                State::new(th.y_min - 1.0, th.z_min),
                5,
            )
            .unwrap();
            assert_eq!(t.first_violation(), Some(0));
            assert_eq!(t.horizon(), 5);
        }
    }

    #[test]
    fn max_effort_lands_on_the_floor_point() {
        let (_, th, m) = peru();
        let t = simulate(
            &m,
            &th,
            &FeedbackPolicy::new(PolicyKind::MaxEffort),
            State::new(1.2e7, 4e5),
            10,
        )
        .unwrap();
        for s in &t.states[1..] {
            assert!((s.y - th.y_min).abs() <= 1e-9 * th.y_min, "{s:?}");
            assert!((s.z - th.z_min).abs() <= 1e-9 * th.z_min, "{s:?}");
        }
        assert_eq!(t.first_violation(), None);
    }

    #[test]
    fn zero_horizon_is_rejected() {
        let (_, th, m) = peru();
        assert!(simulate(
            &m,
            &th,
            &FeedbackPolicy::new(PolicyKind::MinEffort),
            State::new(1e7, 3e5),
            0
        )
        .is_err());
    }
}
