//! Controlled two-species dynamics and the acceptable set.
//!
//! The state is a pair of biomasses `(y, z)` (prey, predator) in tonnes and
//! the control a pair of harvesting efforts `(v, w)` per period. Dynamics are
//! multiplicative: each biomass is scaled by its growth coefficient,
//!
//! ```text
//! y' = y * r1(y, z, v)
//! z' = z * r2(y, z, w)
//! ```
//!
//! and catches are `v * y` and `w * z`.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Biomasses of prey (`y`) and predator (`z`), in tonnes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct State {
    pub y: f64,
    pub z: f64,
}

impl State {
    pub const fn new(y: f64, z: f64) -> Self {
        Self { y, z }
    }

    pub fn is_finite(&self) -> bool {
        self.y.is_finite() && self.z.is_finite()
    }
}

/// Harvesting efforts on prey (`v`) and predator (`w`), per period.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Control {
    pub v: f64,
    pub w: f64,
}

impl Control {
    pub const fn new(v: f64, w: f64) -> Self {
        Self { v, w }
    }
}

type Coefficient = Arc<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>;

/// Declared structural properties of a [`GrowthModel`].
///
/// The closed-form kernels are theorems only under some of these; the
/// analytic operations check the flags before answering.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelShape {
    pub r1_decreasing_in_v: bool,
    pub r2_decreasing_in_w: bool,
    pub r2_depends_on_z: bool,
    pub r2_increasing_in_y: bool,
    /// `r1 = a(y, z) - v` and `r2 = b(y, z) - w`: unit-slope affine control
    /// dependence, which gives the maximal efforts in closed form.
    pub unit_affine_controls: bool,
}

impl ModelShape {
    /// Only the hypotheses every model in this crate must satisfy.
    pub const GENERIC: ModelShape = ModelShape {
        r1_decreasing_in_v: true,
        r2_decreasing_in_w: true,
        r2_depends_on_z: true,
        r2_increasing_in_y: false,
        unit_affine_controls: false,
    };
}

/// The pair of growth coefficients driving the ecosystem.
#[derive(Clone)]
pub struct GrowthModel {
    r1: Coefficient,
    r2: Coefficient,
    shape: ModelShape,
    control_upper_hint: f64,
}

impl fmt::Debug for GrowthModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GrowthModel")
            .field("shape", &self.shape)
            .field("control_upper_hint", &self.control_upper_hint)
            .finish_non_exhaustive()
    }
}

impl GrowthModel {
    /// Builds a model from two coefficient functions `r1(y, z, v)` and
    /// `r2(y, z, w)`.
    ///
    /// `control_upper_hint` is an effort at which both coefficients are
    /// non-positive on the state box the model is used on; it brackets the
    /// root searches for the maximal efforts.
    pub fn new<F1, F2>(r1: F1, r2: F2, shape: ModelShape, control_upper_hint: f64) -> Result<Self>
    where
        F1: Fn(f64, f64, f64) -> f64 + Send + Sync + 'static,
        F2: Fn(f64, f64, f64) -> f64 + Send + Sync + 'static,
    {
        if !(control_upper_hint.is_finite() && control_upper_hint > 0.0) {
            return Err(Error::InvalidParameters(vec![format!(
                "control_upper_hint must be finite and > 0, got {control_upper_hint}"
            )]));
        }
        Ok(Self {
            r1: Arc::new(r1),
            r2: Arc::new(r2),
            shape,
            control_upper_hint,
        })
    }

    /// Identity dynamics: both coefficients are 1 whatever the control.
    pub fn identity() -> Self {
        Self {
            r1: Arc::new(|_, _, _| 1.0),
            r2: Arc::new(|_, _, _| 1.0),
            shape: ModelShape {
                r1_decreasing_in_v: true,
                r2_decreasing_in_w: true,
                r2_depends_on_z: false,
                r2_increasing_in_y: true,
                unit_affine_controls: false,
            },
            control_upper_hint: 1.0,
        }
    }

    #[inline]
    pub fn r1(&self, y: f64, z: f64, v: f64) -> f64 {
        (self.r1)(y, z, v)
    }

    #[inline]
    pub fn r2(&self, y: f64, z: f64, w: f64) -> f64 {
        (self.r2)(y, z, w)
    }

    pub fn shape(&self) -> ModelShape {
        self.shape
    }

    pub fn control_upper_hint(&self) -> f64 {
        self.control_upper_hint
    }

    /// Successor state. Negative biomasses are returned as-is so that the
    /// constraint checks see them.
    pub fn step(&self, s: State, u: Control) -> Result<State> {
        if !s.is_finite() {
            return Err(Error::Evaluation {
                state: s,
                control: u,
            });
        }
        let next = State::new(s.y * self.r1(s.y, s.z, u.v), s.z * self.r2(s.y, s.z, u.w));
        if next.is_finite() {
            Ok(next)
        } else {
            Err(Error::Evaluation {
                state: s,
                control: u,
            })
        }
    }
}

/// Free-function form of [`GrowthModel::step`].
pub fn step(model: &GrowthModel, s: State, u: Control) -> Result<State> {
    model.step(s, u)
}

/// Discrete Lotka–Volterra parameters with density dependence in the prey.
///
/// The carrying capacity `K` is stored; `kappa = R K / (R - 1)` is always
/// recomputed from it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LotkaVolterraParams {
    r: f64,
    l: f64,
    alpha: f64,
    beta: f64,
    k: f64,
}

impl LotkaVolterraParams {
    /// From the prey carrying capacity `K`.
    pub fn new(r: f64, l: f64, alpha: f64, beta: f64, k: f64) -> Result<Self> {
        let p = Self {
            r,
            l,
            alpha,
            beta,
            k,
        };
        p.validate()?;
        Ok(p)
    }

    /// From `kappa = R K / (R - 1)`, the form in which fits are reported.
    pub fn from_kappa(r: f64, l: f64, alpha: f64, beta: f64, kappa: f64) -> Result<Self> {
        let kappa_ok = kappa.is_finite() && kappa > 0.0;
        let k = if kappa_ok && r > 1.0 {
            kappa * (r - 1.0) / r
        } else {
            1.0
        };
        let mut violations = match Self::new(r, l, alpha, beta, k) {
            Ok(p) if kappa_ok => return Ok(p),
            Ok(_) => Vec::new(),
            Err(Error::InvalidParameters(v)) => v,
            Err(e) => return Err(e),
        };
        if !kappa_ok {
            violations.push(format!("kappa must be > 0, got {kappa}"));
        }
        Err(Error::InvalidParameters(violations))
    }

    /// Fitted parameters for the Peruvian anchovy (prey) and hake (predator)
    /// couple, 1971–1981. Units: tonnes and years.
    pub fn peru() -> Self {
        Self::from_kappa(2.25, 0.945, 1.220e-6, 4.845e-8, 67_113e3).expect("valid constants")
    }

    fn validate(&self) -> Result<()> {
        let mut v = Vec::new();
        if !(self.r.is_finite() && self.r > 1.0) {
            v.push(format!("R must be > 1, got {}", self.r));
        }
        if !(self.l.is_finite() && self.l > 0.0 && self.l < 1.0) {
            v.push(format!("L must be in (0, 1), got {}", self.l));
        }
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            v.push(format!("alpha must be > 0, got {}", self.alpha));
        }
        if !(self.beta.is_finite() && self.beta > 0.0) {
            v.push(format!("beta must be > 0, got {}", self.beta));
        }
        if !(self.k.is_finite() && self.k > 0.0) {
            v.push(format!("K must be > 0, got {}", self.k));
        }
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidParameters(v))
        }
    }

    pub fn r(&self) -> f64 {
        self.r
    }
    pub fn l(&self) -> f64 {
        self.l
    }
    pub fn alpha(&self) -> f64 {
        self.alpha
    }
    pub fn beta(&self) -> f64 {
        self.beta
    }
    /// Prey carrying capacity `K`.
    pub fn carrying_capacity(&self) -> f64 {
        self.k
    }
    pub fn kappa(&self) -> f64 {
        self.r * self.k / (self.r - 1.0)
    }

    /// `[R, L, alpha, beta, kappa]`, the order used by the estimator.
    pub fn to_array(&self) -> [f64; 5] {
        [self.r, self.l, self.alpha, self.beta, self.kappa()]
    }

    pub fn from_array(a: [f64; 5]) -> Result<Self> {
        Self::from_kappa(a[0], a[1], a[2], a[3], a[4])
    }

    /// Prey coefficient `R - (R/kappa) y - alpha z - v`.
    #[inline]
    pub fn r1(&self, y: f64, z: f64, v: f64) -> f64 {
        self.r - self.r / self.kappa() * y - self.alpha * z - v
    }

    /// Predator coefficient `L + beta y - w`; no dependence on `z`.
    #[inline]
    pub fn r2(&self, y: f64, w: f64) -> f64 {
        self.l + self.beta * y - w
    }
}

/// Wraps Lotka–Volterra parameters as a [`GrowthModel`] for use on states
/// with prey biomass up to `y_max`.
pub fn lv_model(p: &LotkaVolterraParams, y_max: f64) -> Result<GrowthModel> {
    p.validate()?;
    if !(y_max.is_finite() && y_max >= 0.0) {
        return Err(Error::InvalidParameters(vec![format!(
            "y_max must be finite and >= 0, got {y_max}"
        )]));
    }
    let hint = p.r.max(p.l + p.beta * y_max) + 1.0;
    let (p1, p2) = (*p, *p);
    GrowthModel::new(
        move |y, z, v| p1.r1(y, z, v),
        move |y, _z, w| p2.r2(y, w),
        ModelShape {
            r1_decreasing_in_v: true,
            r2_decreasing_in_w: true,
            r2_depends_on_z: false,
            r2_increasing_in_y: true,
            unit_affine_controls: true,
        },
        hint,
    )
}

/// Biomass and catch floors defining the acceptable set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds {
    pub y_min: f64,
    pub z_min: f64,
    pub catch1_min: f64,
    pub catch2_min: f64,
}

impl Thresholds {
    pub fn new(y_min: f64, z_min: f64, catch1_min: f64, catch2_min: f64) -> Result<Self> {
        let th = Self {
            y_min,
            z_min,
            catch1_min,
            catch2_min,
        };
        let v: Vec<String> = [
            ("y_min", y_min),
            ("z_min", z_min),
            ("catch1_min", catch1_min),
            ("catch2_min", catch2_min),
        ]
        .iter()
        .filter(|(_, x)| !(x.is_finite() && *x >= 0.0))
        .map(|(n, x)| format!("{n} must be finite and >= 0, got {x}"))
        .collect();
        if v.is_empty() {
            Ok(th)
        } else {
            Err(Error::InvalidParameters(v))
        }
    }

    /// Anchovy and hake floors: 7 000 000 t, 200 000 t, 2 000 000 t, 5 000 t.
    pub fn peru() -> Self {
        Self {
            y_min: 7e6,
            z_min: 2e5,
            catch1_min: 2e6,
            catch2_min: 5e3,
        }
    }

    /// Smallest prey effort meeting the prey catch floor at biomass `y`.
    pub fn prey_effort_floor(&self, y: f64) -> f64 {
        effort_floor(self.catch1_min, y)
    }

    /// Smallest predator effort meeting the predator catch floor at biomass `z`.
    pub fn predator_effort_floor(&self, z: f64) -> f64 {
        effort_floor(self.catch2_min, z)
    }

    pub fn floor_control(&self, s: State) -> Control {
        Control::new(self.prey_effort_floor(s.y), self.predator_effort_floor(s.z))
    }
}

/// `catch / biomass`, rounded up so that `effort * biomass >= catch` holds in
/// floating point. A zero catch needs zero effort at any biomass; a positive
/// catch from a non-positive biomass needs infinite effort.
pub fn effort_floor(catch: f64, biomass: f64) -> f64 {
    if catch <= 0.0 {
        return 0.0;
    }
    if biomass <= 0.0 {
        return f64::INFINITY;
    }
    let mut e = catch / biomass;
    while e * biomass < catch {
        e = e.next_up();
    }
    e
}

/// Whether the state/control pair lies in the acceptable set.
pub fn config_acceptable(th: &Thresholds, s: State, u: Control) -> bool {
    s.y >= th.y_min && s.z >= th.z_min && u.v * s.y >= th.catch1_min && u.w * s.z >= th.catch2_min
}

/// Biomass-floor part of the acceptable set. Effort feasibility at zero
/// biomass is not checked here; the kernel code handles it.
pub fn state_in_v0(th: &Thresholds, s: State) -> bool {
    s.y >= th.y_min && s.z >= th.z_min
}
