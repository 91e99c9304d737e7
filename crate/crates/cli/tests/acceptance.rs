//! Acceptance criteria, one PASS/FAIL line each. Runs without the libtest
//! harness so every line is printed; exits non-zero if any criterion fails.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use viability::estimation::{
    central_gradient, fit_conjugate_gradient, synthesize_observations, FitOptions,
};
use viability::kernel_analytic::*;
use viability::kernel_grid::{compare_rasters, iterate_kernel_traced};
use viability::viable_control::*;
use viability::{
    config_acceptable, lv_model, state_in_v0, GrowthModel, LotkaVolterraParams, State, Thresholds,
};
use viability_cli::commands::{BOUNDARY_FILE, RASTER_FILE};
use viability_cli::RunConfig;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn peru() -> (LotkaVolterraParams, Thresholds, GrowthModel) {
    let p = LotkaVolterraParams::peru();
    (p, Thresholds::peru(), lv_model(&p, 2e7).unwrap())
}

fn kernel_member<R: Rng>(rng: &mut R, p: &LotkaVolterraParams, th: &Thresholds) -> State {
    let b = lv_kernel_boundary(p, th, 2).unwrap();
    let y = rng.gen_range(th.y_min..=b.points[1].y);
    let top = lv_predator_bound(p, th, y).max(th.z_min);
    State::new(y, rng.gen_range(th.z_min..=top))
}

fn viab(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_viab"))
        .args(args)
        .output()
        .expect("run viab")
}

fn field<'a>(stdout: &'a str, key: &str) -> Option<&'a str> {
    stdout
        .lines()
        .find_map(|l| l.strip_prefix(key)?.strip_prefix(" = "))
}

fn max_catches() -> Outcome {
    let p = LotkaVolterraParams::peru();
    let s = lv_max_catch_thresholds(&p, 7e6, 2e5);
    let pass = (s.c1_star - 5_399_000.0).abs() <= 1_000.0 && (s.c2_star - 56_800.0).abs() <= 100.0;
    outcome(
        pass,
        format!("c1_star = {:.1} t, c2_star = {:.1} t", s.c1_star, s.c2_star),
    )
}

fn conditions() -> Outcome {
    let cfg = configs().join("peru.cfg");
    let out = viab(&["check", "--config", cfg.to_str().unwrap()]);
    let stdout = String::from_utf8_lossy(&out.stdout);
    let r = |k| field(&stdout, k).and_then(|v| v.parse::<f64>().ok());
    let (r1, r2) = (r("r1_at_floor"), r("r2_at_floor"));
    let pass = out.status.code() == Some(0)
        && r1.is_some_and(|x| x >= 1.0)
        && r2.is_some_and(|x| x >= 1.0);
    outcome(
        pass,
        format!(
            "exit {:?}, r1 at floor {r1:?}, r2 at floor {r2:?}",
            out.status.code()
        ),
    )
}

fn peru_grid_config() -> RunConfig {
    RunConfig::load(&configs().join("peru.cfg")).unwrap()
}

fn stationarity_at_one() -> Outcome {
    let cfg = peru_grid_config();
    let g = cfg.grid.unwrap();
    let (_, th, m) = peru();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap();
    let start = Instant::now();
    let (grid, trace) =
        pool.install(|| iterate_kernel_traced(&g.spec, &m, &th, g.max_iter).unwrap());
    let secs = start.elapsed().as_secs_f64();
    let sized = g.spec.ny == 200
        && g.spec.nz == 200
        && g.spec.control_samples_v >= 32
        && g.spec.control_samples_w >= 32;
    let equal = trace.len() >= 3 && trace[1] == trace[2];
    let pass = sized && equal && grid.converged && grid.iterations == 2 && secs < 30.0;
    outcome(
        pass,
        format!(
            "{}x{} grid, {}x{} samples: V1 == V2 {equal}, converged {} after {} refinements, {secs:.2} s on one thread",
            g.spec.ny, g.spec.nz, g.spec.control_samples_v, g.spec.control_samples_w, grid.converged, grid.iterations
        ),
    )
}

fn grid_vs_analytic() -> Outcome {
    let g = peru_grid_config().grid.unwrap();
    let (p, th, m) = peru();
    let (grid, _) = iterate_kernel_traced(&g.spec, &m, &th, g.max_iter).unwrap();
    let analytic = lv_kernel_raster(&p, &th, &g.spec).unwrap();
    let c = compare_rasters(&grid, &analytic).unwrap();
    let pass = c.fraction <= 0.02 && c.max_boundary_distance <= 2;
    outcome(
        pass,
        format!(
            "{} of {} cells differ ({:.3}%), farthest {} cell(s) from the closed-form boundary",
            c.disagreements,
            c.cells,
            100.0 * c.fraction,
            c.max_boundary_distance
        ),
    )
}

fn invariance() -> Outcome {
    let (p, th, m) = peru();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut runs, mut violations, mut exits) = (0, 0, 0);
    for _ in 0..100 {
        let s0 = kernel_member(&mut rng, &p, &th);
        for kind in PolicyKind::ALL {
            let t = simulate(&m, &th, &FeedbackPolicy::new(kind), s0, 100).unwrap();
            runs += 1;
            violations += t
                .states
                .iter()
                .zip(&t.controls)
                .filter(|(s, u)| !config_acceptable(&th, **s, **u))
                .count();
            exits += t
                .states
                .iter()
                .filter(|s| !lv_kernel_member(&p, &th, **s).unwrap())
                .count();
        }
    }
    outcome(
        violations == 0 && exits == 0,
        format!("{runs} simulations of 100 steps: {violations} unacceptable configurations, {exits} states outside the kernel"),
    )
}

fn viable_control_contracts() -> Outcome {
    let (p, th, m) = peru();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut root_bad, mut floor_bad, mut hat_bad) = (0, 0, 0);
    let mut example = None;
    for _ in 0..1_000 {
        let s = kernel_member(&mut rng, &p, &th);
        let (v, _) = hat_controls(&m, &th, s).unwrap();
        if (s.y * m.r1(s.y, s.z, v) - th.y_min).abs() > 1e-6 * th.y_min {
            root_bad += 1;
        }
        if !viable_control_member(&m, &th, s, th.floor_control(s)).unwrap() {
            floor_bad += 1;
            example.get_or_insert(s);
        }
        let b = control_box(&m, &th, s).unwrap();
        let next = m.step(s, b.hat()).unwrap();
        if (next.y / th.y_min - 1.0).abs() > 1e-6 || (next.z / th.z_min - 1.0).abs() > 1e-6 {
            hat_bad += 1;
        }
    }
    let mut detail = format!(
        "1000 members: root contract misses {root_bad}, floor control not viable at {floor_bad}, max-effort successor off the floor point {hat_bad}"
    );
    if let Some(s) = example {
        detail.push_str(&format!(
            " (e.g. ({:.0}, {:.0}); the floor control is not always viable, a known gap in this criterion)",
            s.y, s.z
        ));
    }
    outcome(root_bad == 0 && floor_bad == 0 && hat_bad == 0, detail)
}

fn redundancy() -> Outcome {
    let (_, th, m) = peru();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let (mut disagree, mut members) = (0, 0);
    for _ in 0..10_000 {
        let s = State::new(rng.gen_range(th.y_min..4e7), rng.gen_range(th.z_min..1.5e6));
        debug_assert!(state_in_v0(&th, s));
        let a = kernel_member_no_dd(&m, &th, s).unwrap();
        let b = kernel_member_generic(&m, &th, s).unwrap();
        disagree += (a != b) as usize;
        members += b as usize;
    }
    outcome(
        disagree == 0,
        format!("10000 states in V0 ({members} members): {disagree} disagreements"),
    )
}

fn fixture_efforts() -> Vec<(f64, f64)> {
    (0..11)
        .map(|t| {
            let t = t as f64;
            (0.45 + 0.25 * (0.9 * t).sin(), 0.12 + 0.08 * (0.7 * t).cos())
        })
        .collect()
}

/// Every parameter moved by 20%; `L` moves by 20% of `1 - L` upward, since
/// `1.2 L` would exceed 1.
fn perturb(p: &LotkaVolterraParams, signs: [f64; 5]) -> LotkaVolterraParams {
    let a = p.to_array();
    let l = if signs[1] < 0.0 {
        a[1] * 0.8
    } else {
        1.0 - (1.0 - a[1]) * 0.8
    };
    LotkaVolterraParams::from_array([
        a[0] * (1.0 + 0.2 * signs[0]),
        l,
        a[2] * (1.0 + 0.2 * signs[2]),
        a[3] * (1.0 + 0.2 * signs[3]),
        a[4] * (1.0 + 0.2 * signs[4]),
    ])
    .unwrap()
}

fn estimation_round_trip() -> Outcome {
    let truth = LotkaVolterraParams::peru();
    let obs = synthesize_observations(&truth, (1.6e7, 4e5), &fixture_efforts(), 1971).unwrap();
    let (mut worst_err, mut worst_iter, mut failures) = (0.0f64, 0, 0);
    for mask in 0..32u32 {
        let signs: [f64; 5] = std::array::from_fn(|i| if mask >> i & 1 == 1 { 1.0 } else { -1.0 });
        let fit =
            fit_conjugate_gradient(&obs, &perturb(&truth, signs), &FitOptions::default()).unwrap();
        let err = fit
            .params
            .to_array()
            .iter()
            .zip(truth.to_array())
            .map(|(e, t)| (e / t - 1.0).abs())
            .fold(0.0, f64::max);
        worst_err = worst_err.max(err);
        worst_iter = worst_iter.max(fit.iterations);
        if !(fit.converged && fit.iterations <= 500 && err <= 0.01) {
            failures += 1;
        }
    }
    outcome(
        failures == 0 && obs.len() == 11,
        format!(
            "32 starts at +/-20%: {failures} failures, worst relative error {worst_err:.2e}, at most {worst_iter} iterations"
        ),
    )
}

fn gradient_soundness() -> Outcome {
    let truth = LotkaVolterraParams::peru();
    let obs = synthesize_observations(&truth, (1.6e7, 4e5), &fixture_efforts(), 1971).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let (hs, names) = ([1e-2, 5e-3, 2.5e-3], viability::estimation::PARAM_NAMES);
    let (mut tested, mut exact, mut bad) = (0, 0, Vec::new());
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for _ in 0..100 {
        let a = truth.to_array();
        let mut f = || 1.0 + rng.gen_range(-0.2..0.2);
        let p = LotkaVolterraParams::from_array([
            1.0 + (a[0] - 1.0) * f(),
            1.0 - (1.0 - a[1]) * f(),
            a[2] * f(),
            a[3] * f(),
            a[4] * f(),
        ])
        .unwrap();
        let g: Vec<_> = hs
            .iter()
            .map(|&h| central_gradient(&obs, &p, h).unwrap())
            .collect();
        for i in 0..5 {
            if g.iter().any(|gr| gr.shrunk.contains(&i)) {
                continue;
            }
            let (d1, d2) = (
                g[0].values[i] - g[1].values[i],
                g[1].values[i] - g[2].values[i],
            );
            // The objective is quadratic in R, L, alpha and beta: their
            // central differences are exact up to rounding.
            if d1.abs() <= 1e-9 * g[2].values[i].abs().max(1e-12) {
                exact += 1;
                continue;
            }
            tested += 1;
            let ratio = d1 / d2;
            lo = lo.min(ratio);
            hi = hi.max(ratio);
            if !(3.0..=5.0).contains(&ratio) {
                bad.push(format!("{}: {ratio:.3}", names[i]));
            }
        }
    }
    outcome(
        bad.is_empty() && tested >= 100,
        format!(
            "100 points, h = 1e-2/5e-3/2.5e-3: {tested} components ratio-tested (range {lo:.3}..{hi:.3}), {exact} exact, {} outside [3, 5]{}",
            bad.len(),
            if bad.is_empty() { String::new() } else { format!(" ({})", bad.join(", ")) }
        ),
    )
}

fn determinism() -> Outcome {
    let cfg = configs().join("peru.cfg");
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for d in &dirs {
        let out = viab(&[
            "kernel",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            d.path().to_str().unwrap(),
        ]);
        if out.status.code() != Some(0) {
            return outcome(false, format!("kernel run exited {:?}", out.status.code()));
        }
    }
    let mut same = true;
    for name in [RASTER_FILE, BOUNDARY_FILE] {
        let a = std::fs::read(dirs[0].path().join(name)).unwrap();
        let b = std::fs::read(dirs[1].path().join(name)).unwrap();
        same &= !a.is_empty() && a == b;
    }
    outcome(
        same,
        format!("{RASTER_FILE} and {BOUNDARY_FILE} byte-identical across two runs: {same}"),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("maximal catch thresholds", max_catches),
        ("growth conditions on the bundled config", conditions),
        (
            "grid iteration stationary after one refinement",
            stationarity_at_one,
        ),
        ("grid kernel matches the closed form", grid_vs_analytic),
        ("feedback policies keep trajectories viable", invariance),
        ("viable control contracts", viable_control_contracts),
        ("predator condition is redundant", redundancy),
        ("estimation round trip", estimation_round_trip),
        (
            "central-difference gradient is second order",
            gradient_soundness,
        ),
        ("kernel output is deterministic", determinism),
    ];
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = run();
        failed += !o.pass as usize;
        println!(
            "criterion {:>2} {}: {} ({:.2} s) - {}",
            k + 1,
            if o.pass { "PASS" } else { "FAIL" },
            name,
            start.elapsed().as_secs_f64(),
            o.detail
        );
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
