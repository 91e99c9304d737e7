mod common;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use viability::kernel_analytic::{
    check_conditions_generic, kernel_member_generic, lv_kernel_member,
};
use viability::viable_control::*;
use viability::{config_acceptable, GrowthModel, ModelShape, State, Thresholds};

#[test]
fn closed_form_and_bisection_agree() {
    let (p, th, m) = common::peru();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..1_000 {
        let s = common::kernel_member(&mut rng, &p, &th);
        let (v, w) = hat_controls(&m, &th, s).unwrap();
        let (vb, wb) = hat_controls_by_bisection(&m, &th, s).unwrap();
        assert!(
            (v - vb).abs() <= 1e-6 && (w - wb).abs() <= 1e-6,
            "{s:?}: ({v}, {w}) vs ({vb}, {wb})"
        );
    }
}

#[test]
fn maximal_efforts_land_on_the_floors() {
    let (p, th, m) = common::peru();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..1_000 {
        let s = common::kernel_member(&mut rng, &p, &th);
        let b = control_box(&m, &th, s).unwrap();
        assert!(b.v_lo <= b.v_hi && b.w_lo <= b.w_hi, "empty box at {s:?}");
        let next = m.step(s, b.hat()).unwrap();
        assert!((next.y - th.y_min).abs() <= 1e-9 * th.y_min, "{next:?}");
        assert!((next.z - th.z_min).abs() <= 1e-9 * th.z_min, "{next:?}");
    }
}

#[test]
fn policies_return_viable_controls_and_keep_trajectories_in_the_kernel() {
    let (p, th, m) = common::peru();
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..30 {
        let s0 = common::kernel_member(&mut rng, &p, &th);
        for kind in PolicyKind::ALL {
            let policy = FeedbackPolicy::new(kind);
            let u = feedback(&policy, &m, &th, s0).unwrap();
            assert!(
                viable_control_member(&m, &th, s0, u).unwrap(),
                "{kind} at {s0:?}"
            );
            let t = simulate(&m, &th, &policy, s0, 100).unwrap();
            assert_eq!(t.first_violation(), None, "{kind} from {s0:?}");
            assert!(t
                .states
                .iter()
                .all(|&s| lv_kernel_member(&p, &th, s).unwrap()));
        }
    }
}

#[test]
fn max_effort_reaches_the_floor_point_in_one_step() {
    let (p, th, m) = common::peru();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let s0 = common::kernel_member(&mut rng, &p, &th);
    let t = simulate(&m, &th, &FeedbackPolicy::new(PolicyKind::MaxEffort), s0, 20).unwrap();
    for s in &t.states[1..] {
        assert!(
            (s.y / th.y_min - 1.0).abs() <= 1e-6 && (s.z / th.z_min - 1.0).abs() <= 1e-6,
            "{s:?}"
        );
    }
}

#[test]
fn outside_v0_the_first_step_is_a_violation() {
    let (_, th, m) = common::peru();
    let t = simulate(
        &m,
        &th,
        &FeedbackPolicy::new(PolicyKind::MinEffort),
        State::new(5e6, 3e5),
        5,
    )
    .unwrap();
    assert_eq!(t.first_violation(), Some(0));
    assert_eq!(t.states.len(), 6);
}

/// Density-dependent predator, nonlinear in the efforts: only the bisection
/// path applies.
fn nonlinear_model() -> GrowthModel {
    GrowthModel::new(
        |y, z, v| 2.0 / (1.0 + y / 4e7) - 4e-7 * z - v - 0.1 * v * v,
        |y, z, w| 0.9 + 3e-8 * y - 2e-7 * z - w - 0.1 * w * w,
        ModelShape {
            r2_increasing_in_y: true,
            ..ModelShape::GENERIC
        },
        20.0,
    )
    .unwrap()
}

#[test]
fn bisection_roots_meet_the_contract_for_a_nonlinear_model() {
    let m = nonlinear_model();
    let th = Thresholds::new(5e6, 1e5, 1e6, 2e3).unwrap();
    assert!(check_conditions_generic(&m, &th).unwrap().satisfied);
    let mut members = 0;
    for i in 0..40 {
        for j in 0..40 {
            let s = State::new(5e6 + i as f64 * 5e5, 1e5 + j as f64 * 3e4);
            if !kernel_member_generic(&m, &th, s).unwrap() {
                continue;
            }
            members += 1;
            let (v, w) = hat_controls(&m, &th, s).unwrap();
            // Residual allowed by the effort tolerance of the bisection.
            let allowed = |biomass: f64, slope: f64, e: f64, floor: f64| {
                (1e-9 * floor).max(biomass * slope.abs() * BISECTION_REL_TOL * e.max(1.0))
            };
            let h = 1e-6;
            let slope_v = (m.r1(s.y, s.z, v + h) - m.r1(s.y, s.z, v - h)) / (2.0 * h);
            let slope_w = (m.r2(s.y, s.z, w + h) - m.r2(s.y, s.z, w - h)) / (2.0 * h);
            let y_next = s.y * m.r1(s.y, s.z, v);
            let z_next = s.z * m.r2(s.y, s.z, w);
            assert!(
                (y_next - th.y_min).abs() <= allowed(s.y, slope_v, v, th.y_min),
                "{s:?}: {y_next}"
            );
            assert!(
                (z_next - th.z_min).abs() <= allowed(s.z, slope_w, w, th.z_min),
                "{s:?}: {z_next}"
            );
            for kind in PolicyKind::ALL {
                let u = feedback(&FeedbackPolicy::new(kind), &m, &th, s).unwrap();
                assert!(config_acceptable(&th, s, u));
                assert!(viable_control_member(&m, &th, s, u).unwrap());
            }
        }
    }
    assert!(members > 50, "{members} members");
}
