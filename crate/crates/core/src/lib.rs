//! Viability kernels for harvested two-species ecosystems.
//!
//! Two routes to the kernel are provided and cross-checked against each
//! other:
//!
//! * [`kernel_grid`]: the generic decreasing set iteration on a raster of the
//!   state box with sampled efforts;
//! * [`kernel_analytic`]: closed-form kernels for monotone growth models and
//!   for the discrete Lotka–Volterra system.
//!
//! [`viable_control`] turns kernel membership into harvesting policies and
//! trajectories, and [`estimation`] fits Lotka–Volterra parameters to
//! biomass/catch series.

pub mod error;
pub mod estimation;
pub mod export;
pub mod kernel_analytic;
pub mod kernel_grid;
pub mod model;
pub mod viable_control;

pub use error::{Error, Result};
pub use model::{
    config_acceptable, lv_model, state_in_v0, step, Control, GrowthModel, LotkaVolterraParams,
    ModelShape, State, Thresholds,
};
