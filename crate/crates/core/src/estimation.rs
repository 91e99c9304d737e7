//! Lotka–Volterra parameter estimation from biomass and catch series.
//!
//! The objective is a weighted sum of squared one-step-ahead residuals: each
//! observed state is pushed one period through the model with the effort
//! implied by that year's catches, and compared with the next observation.
//! It is minimized by Polak–Ribière conjugate gradients, with a diagonal
//! preconditioner refreshed at every restart, central-difference
//! derivatives and an Armijo backtracking line search. The search runs in
//! unconstrained coordinates
//! `(ln(R - 1), logit(L), ln alpha, ln beta, ln kappa)`, so every iterate
//! satisfies the parameter constraints.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::model::LotkaVolterraParams;

pub const PARAM_NAMES: [&str; 5] = ["R", "L", "alpha", "beta", "kappa"];
pub const DEFAULT_RELATIVE_STEP: f64 = 1e-5;

const ARMIJO_C: f64 = 1e-4;
const BACKTRACK_FACTOR: f64 = 0.5;
const MAX_BACKTRACKS: usize = 60;
const RESTART_EVERY: usize = 5;

/// Yearly biomass and catch observations with residual weights.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSeries {
    pub years: Vec<i64>,
    pub y_obs: Vec<f64>,
    pub z_obs: Vec<f64>,
    pub catch_y: Vec<f64>,
    pub catch_z: Vec<f64>,
    pub weights_y: Vec<f64>,
    pub weights_z: Vec<f64>,
}

impl ObservationSeries {
    /// Builds a series with the default relative weights `1 / obs^2`.
    pub fn new(
        years: Vec<i64>,
        y_obs: Vec<f64>,
        z_obs: Vec<f64>,
        catch_y: Vec<f64>,
        catch_z: Vec<f64>,
    ) -> Result<Self> {
        let weights_y = y_obs.iter().map(|&y| default_weight(y)).collect();
        let weights_z = z_obs.iter().map(|&z| default_weight(z)).collect();
        Self::with_weights(years, y_obs, z_obs, catch_y, catch_z, weights_y, weights_z)
    }

    pub fn with_weights(
        years: Vec<i64>,
        y_obs: Vec<f64>,
        z_obs: Vec<f64>,
        catch_y: Vec<f64>,
        catch_z: Vec<f64>,
        weights_y: Vec<f64>,
        weights_z: Vec<f64>,
    ) -> Result<Self> {
        let obs = Self {
            years,
            y_obs,
            z_obs,
            catch_y,
            catch_z,
            weights_y,
            weights_z,
        };
        obs.validate()?;
        Ok(obs)
    }

    pub fn len(&self) -> usize {
        self.years.len()
    }

    pub fn is_empty(&self) -> bool {
        self.years.is_empty()
    }

    fn validate(&self) -> Result<()> {
        let n = self.years.len();
        let columns: [(&str, &Vec<f64>); 6] = [
            ("y_obs", &self.y_obs),
            ("z_obs", &self.z_obs),
            ("catch_y", &self.catch_y),
            ("catch_z", &self.catch_z),
            ("weight_y", &self.weights_y),
            ("weight_z", &self.weights_z),
        ];
        for (name, col) in columns {
            if col.len() != n {
                return Err(Error::Data {
                    row: col.len().min(n),
                    column: name.into(),
                    message: format!("column has {} entries, expected {n}", col.len()),
                });
            }
            if let Some(t) = col.iter().position(|x| !x.is_finite() || *x < 0.0) {
                return Err(Error::Data {
                    row: t + 1,
                    column: name.into(),
                    message: format!("value {} must be finite and >= 0", col[t]),
                });
            }
        }
        if n < 3 {
            return Err(Error::Data {
                row: n,
                column: "year".into(),
                message: format!("need at least 3 observations, got {n}"),
            });
        }
        for t in 0..n {
            if self.catch_y[t] > 0.0 && self.y_obs[t] <= 0.0 {
                return Err(zero_biomass(t + 1, "y_obs"));
            }
            if self.catch_z[t] > 0.0 && self.z_obs[t] <= 0.0 {
                return Err(zero_biomass(t + 1, "z_obs"));
            }
        }
        Ok(())
    }

    /// Reads `year,y_obs,z_obs,catch_y,catch_z[,weight_y,weight_z]`. Without
    /// the weight columns the default weighting applies. Rows are numbered
    /// from 1 after the header in errors.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr.headers()?.clone();
        let required = ["year", "y_obs", "z_obs", "catch_y", "catch_z"];
        let position = |name: &str| headers.iter().position(|h| h == name);
        let mut idx = Vec::with_capacity(7);
        for name in required {
            idx.push(position(name).ok_or_else(|| Error::Data {
                row: 0,
                column: name.into(),
                message: "missing column in header".into(),
            })?);
        }
        let weights = match (position("weight_y"), position("weight_z")) {
            (Some(a), Some(b)) => Some((a, b)),
            (None, None) => None,
            _ => {
                return Err(Error::Data {
                    row: 0,
                    column: "weight_y/weight_z".into(),
                    message: "weight columns must be given together".into(),
                })
            }
        };

        let mut years = Vec::new();
        let mut cols: [Vec<f64>; 6] = Default::default();
        for (r, record) in rdr.records().enumerate() {
            let row = r + 1;
            let record = record?;
            let field = |k: usize, name: &str| -> Result<&str> {
                record.get(k).ok_or_else(|| Error::Data {
                    row,
                    column: name.into(),
                    message: "missing field".into(),
                })
            };
            let year = field(idx[0], "year")?;
            years.push(year.parse::<i64>().map_err(|e| Error::Data {
                row,
                column: "year".into(),
                message: format!("`{year}`: {e}"),
            })?);
            let mut spots: Vec<(usize, &str)> = required[1..]
                .iter()
                .enumerate()
                .map(|(c, n)| (idx[c + 1], *n))
                .collect();
            if let Some((a, b)) = weights {
                spots.push((a, "weight_y"));
                spots.push((b, "weight_z"));
            }
            for (c, (k, name)) in spots.into_iter().enumerate() {
                let raw = field(k, name)?;
                cols[c].push(raw.parse::<f64>().map_err(|e| Error::Data {
                    row,
                    column: name.into(),
                    message: format!("`{raw}`: {e}"),
                })?);
            }
        }
        let [y_obs, z_obs, catch_y, catch_z, wy, wz] = cols;
        if weights.is_some() {
            Self::with_weights(years, y_obs, z_obs, catch_y, catch_z, wy, wz)
        } else {
            Self::new(years, y_obs, z_obs, catch_y, catch_z)
        }
    }

    /// Writes all seven columns, weights included.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "year", "y_obs", "z_obs", "catch_y", "catch_z", "weight_y", "weight_z",
        ])?;
        for t in 0..self.len() {
            w.write_record([
                self.years[t].to_string(),
                self.y_obs[t].to_string(),
                self.z_obs[t].to_string(),
                self.catch_y[t].to_string(),
                self.catch_z[t].to_string(),
                self.weights_y[t].to_string(),
                self.weights_z[t].to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn zero_biomass(row: usize, column: &str) -> Error {
    Error::Data {
        row,
        column: column.into(),
        message: "positive catch recorded at zero biomass".into(),
    }
}

fn default_weight(obs: f64) -> f64 {
    if obs > 0.0 {
        1.0 / (obs * obs)
    } else {
        0.0
    }
}

/// Per-year efforts `(catch_y / y_obs, catch_z / z_obs)`.
pub fn efforts_from_observations(obs: &ObservationSeries) -> Result<Vec<(f64, f64)>> {
    (0..obs.len())
        .map(|t| {
            let v = ratio(obs.catch_y[t], obs.y_obs[t]).ok_or_else(|| zero_biomass(t, "y_obs"))?;
            let w = ratio(obs.catch_z[t], obs.z_obs[t]).ok_or_else(|| zero_biomass(t, "z_obs"))?;
            Ok((v, w))
        })
        .collect()
}

fn ratio(catch: f64, biomass: f64) -> Option<f64> {
    if catch == 0.0 {
        Some(0.0)
    } else if biomass > 0.0 {
        Some(catch / biomass)
    } else {
        None
    }
}

/// Objective on raw `[R, L, alpha, beta, kappa]`, without validation.
fn ssr_raw(theta: &[f64; 5], obs: &ObservationSeries, efforts: &[(f64, f64)]) -> f64 {
    let [r, l, alpha, beta, kappa] = *theta;
    let mut total = 0.0;
    for t in 0..obs.len() - 1 {
        let (y, z) = (obs.y_obs[t], obs.z_obs[t]);
        let (v, w) = efforts[t];
        let y_pred = y * (r - r / kappa * y - alpha * z - v);
        let z_pred = z * (l + beta * y - w);
        let ry = y_pred - obs.y_obs[t + 1];
        let rz = z_pred - obs.z_obs[t + 1];
        total += obs.weights_y[t + 1] * ry * ry + obs.weights_z[t + 1] * rz * rz;
    }
    total
}

/// Weighted sum of squared one-step-ahead prediction residuals.
pub fn weighted_ssr(p: &LotkaVolterraParams, obs: &ObservationSeries) -> Result<f64> {
    let efforts = efforts_from_observations(obs)?;
    Ok(ssr_raw(&p.to_array(), obs, &efforts))
}

fn feasible(theta: &[f64; 5]) -> bool {
    let [r, l, alpha, beta, kappa] = *theta;
    r > 1.0
        && l > 0.0
        && l < 1.0
        && alpha > 0.0
        && beta > 0.0
        && kappa > 0.0
        && theta.iter().all(|x| x.is_finite())
}

/// Central-difference gradient with respect to `[R, L, alpha, beta, kappa]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub values: [f64; 5],
    /// Absolute step used per component.
    pub steps: [f64; 5],
    /// Components whose step was shrunk to stay inside the parameter domain.
    pub shrunk: Vec<usize>,
}

impl Gradient {
    pub fn inf_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, g| m.max(g.abs()))
    }
}

/// Central differences with step `h * |p_i|` per component, halved as
/// needed to keep both probes feasible.
pub fn central_gradient(
    obs: &ObservationSeries,
    p: &LotkaVolterraParams,
    h: f64,
) -> Result<Gradient> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::Precondition(format!(
            "relative step must be > 0, got {h}"
        )));
    }
    let efforts = efforts_from_observations(obs)?;
    Ok(gradient_raw(&p.to_array(), obs, &efforts, h))
}

fn gradient_raw(
    theta: &[f64; 5],
    obs: &ObservationSeries,
    efforts: &[(f64, f64)],
    h: f64,
) -> Gradient {
    let mut values = [0.0; 5];
    let mut steps = [0.0; 5];
    let mut shrunk = Vec::new();
    for i in 0..5 {
        let scale = theta[i].abs().max(f64::MIN_POSITIVE);
        let mut step = h * scale;
        let (mut plus, mut minus) = (*theta, *theta);
        loop {
            plus[i] = theta[i] + step;
            minus[i] = theta[i] - step;
            if feasible(&plus) && feasible(&minus) {
                break;
            }
            step *= 0.5;
            if !shrunk.contains(&i) {
                shrunk.push(i);
            }
        }
        values[i] = (ssr_raw(&plus, obs, efforts) - ssr_raw(&minus, obs, efforts)) / (2.0 * step);
        steps[i] = step;
    }
    Gradient {
        values,
        steps,
        shrunk,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    /// Stop when the gradient's infinity norm in search coordinates is at
    /// most this.
    pub tol: f64,
    pub max_iter: usize,
    /// Relative central-difference step.
    pub h: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 500,
            h: DEFAULT_RELATIVE_STEP,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub params: LotkaVolterraParams,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Infinity norm of the gradient in search coordinates.
    pub gradient_norm: f64,
    /// Objective after each accepted step, starting with the initial value.
    pub history: Vec<f64>,
}

fn to_search(theta: &[f64; 5]) -> [f64; 5] {
    let [r, l, alpha, beta, kappa] = *theta;
    [
        (r - 1.0).ln(),
        (l / (1.0 - l)).ln(),
        alpha.ln(),
        beta.ln(),
        kappa.ln(),
    ]
}

fn from_search(phi: &[f64; 5]) -> [f64; 5] {
    [
        1.0 + phi[0].exp(),
        1.0 / (1.0 + (-phi[1]).exp()),
        phi[2].exp(),
        phi[3].exp(),
        phi[4].exp(),
    ]
}

/// `d theta_i / d phi_i` at `theta`.
fn jacobian_diag(theta: &[f64; 5]) -> [f64; 5] {
    let [r, l, alpha, beta, kappa] = *theta;
    [r - 1.0, l * (1.0 - l), alpha, beta, kappa]
}

fn dot(a: &[f64; 5], b: &[f64; 5]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(a: &[f64; 5]) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Fits the five parameters to `obs` starting from `init`.
pub fn fit_conjugate_gradient(
    obs: &ObservationSeries,
    init: &LotkaVolterraParams,
    opts: &FitOptions,
) -> Result<FitResult> {
    let efforts = efforts_from_observations(obs)?;
    let objective = |phi: &[f64; 5]| ssr_raw(&from_search(phi), obs, &efforts);
    let search_gradient = |phi: &[f64; 5]| {
        let theta = from_search(phi);
        let g = gradient_raw(&theta, obs, &efforts, opts.h);
        let jac = jacobian_diag(&theta);
        let mut out = [0.0; 5];
        for i in 0..5 {
            out[i] = g.values[i] * jac[i];
        }
        out
    };

    let mut phi = to_search(&init.to_array());
    let mut f = objective(&phi);
    let mut g = search_gradient(&phi);
    if !f.is_finite() || g.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite(format!(
            "objective {f} with gradient {g:?} at the initial parameters {:?}",
            init.to_array()
        )));
    }
    let mut history = vec![f];
    let mut scaling = diagonal_scaling(&objective, &phi, f);
    let mut z = precondition(&scaling, &g);
    let mut d = z.map(|x| -x);
    let mut iterations = 0;
    let mut since_restart = 0;
    let mut last_step: f64 = 1.0;

    while iterations < opts.max_iter && inf_norm(&g) > opts.tol {
        let mut slope = dot(&g, &d);
        if !(slope < 0.0) {
            d = z.map(|x| -x);
            slope = dot(&g, &d);
            since_restart = 0;
        }

        // First trial: minimizer of the parabola through f, the slope and a
        // probe at twice the previous step; then plain backtracking.
        let probe = (2.0 * last_step).min(1.0 / inf_norm(&d).max(f64::MIN_POSITIVE));
        let f_probe = objective(&add_scaled(&phi, probe, &d));
        let curvature = f_probe - f - slope * probe;
        let mut t = if f_probe.is_finite() && curvature > 0.0 {
            (-slope * probe * probe / (2.0 * curvature)).min(4.0 * probe)
        } else {
            probe
        };
        let mut accepted = None;
        for _ in 0..=MAX_BACKTRACKS {
            let cand = add_scaled(&phi, t, &d);
            let f_cand = objective(&cand);
            if f_cand.is_finite() && f_cand <= f + ARMIJO_C * t * slope {
                accepted = Some((cand, f_cand));
                break;
            }
            t *= BACKTRACK_FACTOR;
        }
        let Some((phi_new, f_new)) = accepted else {
            if since_restart == 0 {
                // no progress along the restart direction either
                break;
            }
            scaling = diagonal_scaling(&objective, &phi, f);
            z = precondition(&scaling, &g);
            d = z.map(|x| -x);
            since_restart = 0;
            continue;
        };
        debug_assert!(f_new <= f);

        let g_new = search_gradient(&phi_new);
        if g_new.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite(format!(
                "gradient {g_new:?} at parameters {:?} after {iterations} iterations (objective trace {history:?})",
                from_search(&phi_new)
            )));
        }
        iterations += 1;
        since_restart += 1;
        last_step = t;
        phi = phi_new;
        f = f_new;
        history.push(f);

        if since_restart >= RESTART_EVERY {
            scaling = diagonal_scaling(&objective, &phi, f);
        }
        let z_new = precondition(&scaling, &g_new);
        let y: [f64; 5] = std::array::from_fn(|i| g_new[i] - g[i]);
        let beta_pr = (dot(&z_new, &y) / dot(&z, &g)).max(0.0);
        g = g_new;
        z = z_new;
        if since_restart >= RESTART_EVERY || !beta_pr.is_finite() {
            d = z.map(|x| -x);
            since_restart = 0;
        } else {
            d = std::array::from_fn(|i| -z[i] + beta_pr * d[i]);
        }
    }

    let gradient_norm = inf_norm(&g);
    Ok(FitResult {
        params: LotkaVolterraParams::from_array(from_search(&phi))?,
        objective: f,
        iterations,
        converged: gradient_norm <= opts.tol,
        gradient_norm,
        history,
    })
}

/// Diagonal of the objective's Hessian in search coordinates by second
/// differences, used as a Jacobi preconditioner. Non-positive or vanishing
/// entries are lifted to a small fraction of the largest one.
fn diagonal_scaling<F: Fn(&[f64; 5]) -> f64>(objective: &F, phi: &[f64; 5], f: f64) -> [f64; 5] {
    const STEP: f64 = 1e-3;
    let mut diag = [0.0; 5];
    for i in 0..5 {
        let (mut a, mut b) = (*phi, *phi);
        a[i] += STEP;
        b[i] -= STEP;
        let d2 = (objective(&a) - 2.0 * f + objective(&b)) / (STEP * STEP);
        diag[i] = if d2.is_finite() { d2 } else { 0.0 };
    }
    let top = diag.iter().fold(0.0f64, |m, x| m.max(*x));
    if top <= 0.0 {
        return [1.0; 5];
    }
    diag.map(|x| x.max(top * 1e-12))
}

fn precondition(scaling: &[f64; 5], g: &[f64; 5]) -> [f64; 5] {
    std::array::from_fn(|i| g[i] / scaling[i])
}

fn add_scaled(a: &[f64; 5], t: f64, d: &[f64; 5]) -> [f64; 5] {
    std::array::from_fn(|i| a[i] + t * d[i])
}

/// Noise-free observations generated by the model itself: `efforts[t]` is
/// applied at year `t`, and the catch recorded is effort times biomass.
pub fn synthesize_observations(
    p: &LotkaVolterraParams,
    s0: (f64, f64),
    efforts: &[(f64, f64)],
    first_year: i64,
) -> Result<ObservationSeries> {
    let n = efforts.len();
    let (mut y, mut z) = s0;
    let mut years = Vec::with_capacity(n);
    let mut ys = Vec::with_capacity(n);
    let mut zs = Vec::with_capacity(n);
    let mut cy = Vec::with_capacity(n);
    let mut cz = Vec::with_capacity(n);
    for (t, &(v, w)) in efforts.iter().enumerate() {
        years.push(first_year + t as i64);
        ys.push(y);
        zs.push(z);
        cy.push(v * y);
        cz.push(w * z);
        let next = (y * p.r1(y, z, v), z * p.r2(y, w));
        y = next.0;
        z = next.1;
    }
    ObservationSeries::new(years, ys, zs, cy, cz)
}
