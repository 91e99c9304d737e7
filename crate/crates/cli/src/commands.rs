//! The four subcommands. Each returns a [`RunReport`] carrying its exit code;
//! errors are reserved for bad input and I/O failures.

use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use anyhow::{bail, Context, Result};
use viability::estimation::{fit_conjugate_gradient, FitResult, ObservationSeries, PARAM_NAMES};
use viability::export::{write_boundary_csv, write_raster_csv, write_trajectory_csv};
use viability::kernel_analytic::{
    check_conditions_generic, check_conditions_lv, lv_kernel_boundary, lv_kernel_raster,
    lv_max_catch_thresholds, lv_max_predator_floor, lv_min_prey_floor, lv_threshold_conditions,
    ConditionReport,
};
use viability::kernel_grid::{
    compare_rasters, compute_v0_grid, iterate_kernel, KernelGrid, RasterComparison,
};
use viability::viable_control::{simulate, FeedbackPolicy};
use viability::{GrowthModel, LotkaVolterraParams, State, Thresholds};

use crate::config::{ConfigError, ModelConfig, RunConfig};
use crate::format::sig6;
use crate::svg::Plot;

pub const EXIT_OK: u8 = 0;
pub const EXIT_CONDITION: u8 = 1;
pub const EXIT_NONCONVERGENCE: u8 = 2;
pub const EXIT_USAGE: u8 = 64;

/// Largest disagreement between the grid and closed-form rasters accepted
/// as agreement.
pub const AGREEMENT_MAX_FRACTION: f64 = 0.02;
pub const AGREEMENT_MAX_DISTANCE: usize = 2;

pub const RASTER_FILE: &str = "kernel_raster.csv";
pub const BOUNDARY_FILE: &str = "kernel_boundary.csv";
pub const AGREEMENT_FILE: &str = "kernel_agreement.txt";
pub const KERNEL_SVG_FILE: &str = "kernel.svg";
pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const TRAJECTORY_SVG_FILE: &str = "trajectory.svg";
pub const FIT_FILE: &str = "fit_result.txt";
pub const FIT_LOG_FILE: &str = "fit_log.csv";

const BOUNDARY_SAMPLES: usize = 201;

/// Where files go.
#[derive(Debug, Clone)]
pub struct OutputOptions {
    pub dir: PathBuf,
    pub svg: bool,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub command: &'static str,
    pub exit_code: u8,
    /// Printed `key = value` lines.
    pub summary: Vec<(String, String)>,
    pub notes: Vec<String>,
    pub files: Vec<PathBuf>,
    pub elapsed: Duration,
}

impl RunReport {
    fn new(command: &'static str) -> Self {
        Self {
            command,
            exit_code: EXIT_OK,
            summary: Vec::new(),
            notes: Vec::new(),
            files: Vec::new(),
            elapsed: Duration::ZERO,
        }
    }

    fn put(&mut self, key: &str, value: impl fmt::Display) {
        self.summary.push((key.to_string(), value.to_string()));
    }

    fn num(&mut self, key: &str, x: f64) {
        self.put(key, sig6(x));
    }

    /// The printed value of `key`, if present.
    pub fn get(&self, key: &str) -> Option<&str> {
        self.summary
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    fn fail(&mut self, code: u8, note: String) {
        self.exit_code = self.exit_code.max(code);
        self.notes.push(note);
    }
}

impl fmt::Display for RunReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "command = {}", self.command)?;
        for (k, v) in &self.summary {
            writeln!(f, "{k} = {v}")?;
        }
        for n in &self.notes {
            writeln!(f, "note: {n}")?;
        }
        for p in &self.files {
            writeln!(f, "wrote {}", p.display())?;
        }
        writeln!(f, "elapsed_ms = {}", sig6(self.elapsed.as_secs_f64() * 1e3))?;
        write!(f, "exit_code = {}", self.exit_code)
    }
}

fn model_for(cfg: &RunConfig) -> Result<GrowthModel> {
    let mut y_max = cfg.thresholds.y_min;
    if let Some(p) = cfg.model.lv_params() {
        y_max = y_max.max(p.kappa());
    }
    if let Some(g) = &cfg.grid {
        y_max = y_max.max(g.spec.y_hi);
    }
    if let Some(s) = &cfg.simulate {
        y_max = y_max.max(s.s0.y);
    }
    Ok(cfg.model.growth_model(y_max)?)
}

fn create(out: &OutputOptions, name: &str, report: &mut RunReport) -> Result<BufWriter<File>> {
    std::fs::create_dir_all(&out.dir).with_context(|| format!("creating {}", out.dir.display()))?;
    let path = out.dir.join(name);
    let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    report.files.push(path);
    Ok(BufWriter::new(file))
}

fn put_conditions(report: &mut RunReport, c: &ConditionReport) {
    report.put("proposition", c.which_proposition);
    report.num("r1_at_floor", c.r1_at_floor);
    report.num("r2_at_floor", c.r2_at_floor);
    report.put("conditions_satisfied", c.satisfied);
    if c.r1_at_floor < 1.0 {
        report.fail(
            EXIT_CONDITION,
            format!(
                "violation: r1 at the floor point is {} < 1",
                sig6(c.r1_at_floor)
            ),
        );
    }
    if c.r2_at_floor < 1.0 {
        report.fail(
            EXIT_CONDITION,
            format!(
                "violation: r2 at the floor point is {} < 1",
                sig6(c.r2_at_floor)
            ),
        );
    }
}

/// Growth conditions at the floor point, and for the Lotka–Volterra model
/// the admissible floor ranges and largest catch floors.
pub fn cmd_check(cfg: &RunConfig) -> Result<RunReport> {
    let start = Instant::now();
    let mut report = RunReport::new("check");
    let th = &cfg.thresholds;
    let conditions = match &cfg.model {
        ModelConfig::LotkaVolterra(p) => check_conditions_lv(p, th),
        ModelConfig::Identity => check_conditions_generic(&model_for(cfg)?, th),
    };
    match conditions {
        Ok(c) => put_conditions(&mut report, &c),
        Err(viability::Error::Domain(msg)) => {
            report.put("conditions_satisfied", false);
            report.fail(EXIT_CONDITION, format!("violation: {msg}"));
        }
        Err(e) => return Err(e.into()),
    }

    if let ModelConfig::LotkaVolterra(p) = &cfg.model {
        let floors_ok = lv_threshold_conditions(p, th.y_min, th.z_min);
        report.num("y_min_lower_limit", lv_min_prey_floor(p));
        report.num("z_min_upper_limit", lv_max_predator_floor(p));
        report.put("threshold_conditions", floors_ok);
        if !floors_ok {
            report.fail(
                EXIT_CONDITION,
                format!(
                    "violation: need y_min >= {} and z_min <= {}",
                    sig6(lv_min_prey_floor(p)),
                    sig6(lv_max_predator_floor(p))
                ),
            );
        }
        let star = lv_max_catch_thresholds(p, th.y_min, th.z_min);
        report.num("c1_star", star.c1_star);
        report.num("c2_star", star.c2_star);
        report.num("catch1_min", th.catch1_min);
        report.num("catch2_min", th.catch2_min);
        if th.catch1_min > star.c1_star {
            report.fail(
                EXIT_CONDITION,
                format!(
                    "violation: catch1_min {} exceeds c1_star {}",
                    sig6(th.catch1_min),
                    sig6(star.c1_star)
                ),
            );
        }
        if th.catch2_min > star.c2_star {
            report.fail(
                EXIT_CONDITION,
                format!(
                    "violation: catch2_min {} exceeds c2_star {}",
                    sig6(th.catch2_min),
                    sig6(star.c2_star)
                ),
            );
        }
    }
    report.elapsed = start.elapsed();
    Ok(report)
}

/// Closed-form kernel outline closed along the floors, for plotting.
fn region_outline(p: &LotkaVolterraParams, th: &Thresholds) -> Result<Vec<State>> {
    let b = lv_kernel_boundary(p, th, BOUNDARY_SAMPLES)?;
    if b.points.is_empty() {
        return Ok(Vec::new());
    }
    let mut pts = vec![State::new(th.y_min, th.z_min)];
    pts.extend(&b.points);
    pts.push(State::new(b.points.last().expect("non-empty").y, th.z_min));
    Ok(pts)
}

/// Text form of a raster comparison.
pub fn agreement_text(c: &RasterComparison, grid: &KernelGrid, analytic: &KernelGrid) -> String {
    let within =
        c.fraction <= AGREEMENT_MAX_FRACTION && c.max_boundary_distance <= AGREEMENT_MAX_DISTANCE;
    format!(
        "cells = {}\ngrid_members = {}\nanalytic_members = {}\ndisagreements = {}\nfraction = {}\nmax_boundary_distance_cells = {}\nwithin_tolerance = {within}\n",
        c.cells,
        grid.member_count(),
        analytic.member_count(),
        c.disagreements,
        c.fraction,
        c.max_boundary_distance
    )
}

/// Grid kernel, closed-form boundary and their agreement.
pub fn cmd_kernel(cfg: &RunConfig, out: &OutputOptions) -> Result<RunReport> {
    let start = Instant::now();
    let mut report = RunReport::new("kernel");
    let Some(grid_cfg) = &cfg.grid else {
        bail!(ConfigError::Missing("grid section".into()));
    };
    let th = &cfg.thresholds;
    let model = model_for(cfg)?;
    let spec = &grid_cfg.spec;

    let t = Instant::now();
    let v0 = compute_v0_grid(spec, th)?;
    let grid = iterate_kernel(spec, &model, th, grid_cfg.max_iter)?;
    let grid_time = t.elapsed();
    report.put("cells", spec.cell_count());
    report.put("v0_members", v0.member_count());
    report.put("kernel_members", grid.member_count());
    report.put("iterations", grid.iterations);
    report.put("converged", grid.converged);
    report.put("equals_v0", grid.member == v0.member);
    report.put("grid_ms", sig6(grid_time.as_secs_f64() * 1e3));
    if grid.is_empty() {
        report.notes.push("the kernel raster is empty: no cell center satisfies the biomass floors inside the box".into());
    }
    write_raster_csv(&grid, create(out, RASTER_FILE, &mut report)?)?;

    let mut region = Vec::new();
    if let ModelConfig::LotkaVolterra(p) = &cfg.model {
        match lv_kernel_raster(p, th, spec) {
            Ok(analytic) => {
                let boundary = lv_kernel_boundary(p, th, BOUNDARY_SAMPLES)?;
                if let Some(n) = &boundary.note {
                    report.notes.push(n.clone());
                }
                write_boundary_csv(&boundary.points, create(out, BOUNDARY_FILE, &mut report)?)?;
                let c = compare_rasters(&grid, &analytic)?;
                report.put("analytic_members", analytic.member_count());
                report.put("disagreements", c.disagreements);
                report.num("disagreement_fraction", c.fraction);
                report.put("max_boundary_distance_cells", c.max_boundary_distance);
                let mut f = create(out, AGREEMENT_FILE, &mut report)?;
                f.write_all(agreement_text(&c, &grid, &analytic).as_bytes())?;
                f.flush()?;
                region = region_outline(p, th)?;
            }
            Err(viability::Error::Precondition(msg)) => {
                report
                    .notes
                    .push(format!("closed-form kernel not applicable: {msg}"));
            }
            Err(e) => return Err(e.into()),
        }
    }

    if out.svg {
        let plot = Plot {
            raster: Some(&grid),
            region,
            floors: Some((th.y_min, th.z_min)),
            ..Plot::default()
        };
        let mut f = create(out, KERNEL_SVG_FILE, &mut report)?;
        f.write_all(plot.render().as_bytes())?;
        f.flush()?;
    }

    if !grid.converged {
        report.fail(
            EXIT_NONCONVERGENCE,
            format!(
                "grid iteration did not converge within {} refinements",
                grid_cfg.max_iter
            ),
        );
    }
    report.elapsed = start.elapsed();
    Ok(report)
}

/// Closed-loop simulation under the configured feedback policy.
pub fn cmd_simulate(cfg: &RunConfig, out: &OutputOptions) -> Result<RunReport> {
    let start = Instant::now();
    let mut report = RunReport::new("simulate");
    let Some(sim) = &cfg.simulate else {
        bail!(ConfigError::Missing("simulate section".into()));
    };
    let th = &cfg.thresholds;
    let model = model_for(cfg)?;
    let traj = simulate(
        &model,
        th,
        &FeedbackPolicy::new(sim.policy),
        sim.s0,
        sim.horizon,
    )?;

    report.put("policy", sim.policy);
    report.put("horizon", sim.horizon);
    report.put("y0", sig6(sim.s0.y));
    report.put("z0", sig6(sim.s0.z));
    let last = traj.states.last().expect("horizon >= 1");
    report.put("y_final", sig6(last.y));
    report.put("z_final", sig6(last.z));
    match traj.first_violation() {
        Some(t) => report.put("first_violation", t),
        None => report.put("result", "viable over horizon"),
    }
    write_trajectory_csv(&traj, create(out, TRAJECTORY_FILE, &mut report)?)?;

    if out.svg {
        let region = match &cfg.model {
            ModelConfig::LotkaVolterra(p) if lv_kernel_raster_ok(p, th) => region_outline(p, th)?,
            _ => Vec::new(),
        };
        let plot = Plot {
            window: cfg
                .grid
                .map(|g| (g.spec.y_lo, g.spec.y_hi, g.spec.z_lo, g.spec.z_hi)),
            region,
            trajectory: traj.states.clone(),
            floors: Some((th.y_min, th.z_min)),
            ..Plot::default()
        };
        let mut f = create(out, TRAJECTORY_SVG_FILE, &mut report)?;
        f.write_all(plot.render().as_bytes())?;
        f.flush()?;
    }
    report.elapsed = start.elapsed();
    Ok(report)
}

fn lv_kernel_raster_ok(p: &LotkaVolterraParams, th: &Thresholds) -> bool {
    viability::kernel_analytic::lv_kernel_member(p, th, State::new(th.y_min, th.z_min)).is_ok()
}

/// Key-value text form of a fit, at full precision.
pub fn fit_text(fit: &FitResult) -> String {
    let mut s = String::new();
    for (name, value) in PARAM_NAMES.iter().zip(fit.params.to_array()) {
        s.push_str(&format!("{name} = {value}\n"));
    }
    s.push_str(&format!("K = {}\n", fit.params.carrying_capacity()));
    s.push_str(&format!("objective = {}\n", fit.objective));
    s.push_str(&format!("iterations = {}\n", fit.iterations));
    s.push_str(&format!("converged = {}\n", fit.converged));
    s.push_str(&format!("gradient_norm = {}\n", fit.gradient_norm));
    s
}

/// Parameter fit to an observation file; `data` overrides `fit.data`.
pub fn cmd_fit(cfg: &RunConfig, data: Option<&Path>, out: &OutputOptions) -> Result<RunReport> {
    let start = Instant::now();
    let mut report = RunReport::new("fit");
    let Some(fit_cfg) = &cfg.fit else {
        bail!(ConfigError::Missing("fit section".into()));
    };
    let Some(path) = data.or(fit_cfg.data.as_deref()) else {
        bail!(ConfigError::Missing("fit.data".into()));
    };
    let init = match (&fit_cfg.init, cfg.model.lv_params()) {
        (Some(p), _) | (None, Some(p)) => *p,
        (None, None) => bail!(ConfigError::Missing("fit.init.R".into())),
    };
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let obs =
        ObservationSeries::from_csv(file).with_context(|| format!("reading {}", path.display()))?;
    let fit = fit_conjugate_gradient(&obs, &init, &fit_cfg.options)?;

    report.put("observations", obs.len());
    for (name, value) in PARAM_NAMES.iter().zip(fit.params.to_array()) {
        report.num(name, value);
    }
    report.num("K", fit.params.carrying_capacity());
    report.num("objective", fit.objective);
    report.put("iterations", fit.iterations);
    report.put("converged", fit.converged);
    report.num("gradient_norm", fit.gradient_norm);

    let mut f = create(out, FIT_FILE, &mut report)?;
    f.write_all(fit_text(&fit).as_bytes())?;
    f.flush()?;
    let mut log = csv::Writer::from_writer(create(out, FIT_LOG_FILE, &mut report)?);
    log.write_record(["iteration", "objective"])?;
    for (k, v) in fit.history.iter().enumerate() {
        log.write_record([k.to_string(), v.to_string()])?;
    }
    log.flush()?;

    if !fit.converged {
        report.fail(
            EXIT_NONCONVERGENCE,
            format!(
                "fit stopped after {} iterations without meeting tol",
                fit.iterations
            ),
        );
    }
    report.elapsed = start.elapsed();
    Ok(report)
}

/// Exit code for an error raised before or during a command.
pub fn error_exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.downcast_ref::<ConfigError>().is_some() {
            return EXIT_USAGE;
        }
        if let Some(e) = cause.downcast_ref::<viability::Error>() {
            use viability::Error::*;
            return match e {
                InvalidParameters(_)
                | InvalidGrid(_)
                | Domain(_)
                | Misuse(_)
                | Data { .. }
                | Csv(_)
                | Policy(_) => EXIT_USAGE,
                Precondition(_) | NoSolution(_) => EXIT_CONDITION,
                Io(_) => EX_IOERR,
                _ => EX_SOFTWARE,
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return EX_IOERR;
        }
    }
    EX_SOFTWARE
}

/// Internal failure (sysexits `EX_SOFTWARE`).
pub const EX_SOFTWARE: u8 = 70;
/// File-system failure (sysexits `EX_IOERR`).
pub const EX_IOERR: u8 = 74;
