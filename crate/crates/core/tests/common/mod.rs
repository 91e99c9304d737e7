#![allow(dead_code)]

use rand::Rng;
use viability::estimation::{synthesize_observations, ObservationSeries};
use viability::kernel_analytic::{lv_kernel_boundary, lv_predator_bound};
use viability::{lv_model, GrowthModel, LotkaVolterraParams, State, Thresholds};

pub fn peru() -> (LotkaVolterraParams, Thresholds, GrowthModel) {
    let p = LotkaVolterraParams::peru();
    (p, Thresholds::peru(), lv_model(&p, 2e7).unwrap())
}

/// Uniform draw from the closed-form kernel: `y` on `[y_min, y_right]`, then
/// `z` between `z_min` and the predator bound.
pub fn kernel_member<R: Rng>(rng: &mut R, p: &LotkaVolterraParams, th: &Thresholds) -> State {
    let b = lv_kernel_boundary(p, th, 2).unwrap();
    let y = rng.gen_range(th.y_min..=b.points[1].y);
    let top = lv_predator_bound(p, th, y).max(th.z_min);
    State::new(y, rng.gen_range(th.z_min..=top))
}

/// Eleven yearly observations generated by the model with varying efforts.
pub fn synthetic_series(p: &LotkaVolterraParams) -> ObservationSeries {
    let efforts: Vec<(f64, f64)> = (0..11)
        .map(|t| {
            let t = t as f64;
            (0.45 + 0.25 * (0.9 * t).sin(), 0.12 + 0.08 * (0.7 * t).cos())
        })
        .collect();
    synthesize_observations(p, (1.6e7, 4e5), &efforts, 1971).unwrap()
}
