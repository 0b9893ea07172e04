//! Sensitivity sweeps over imputed datasets: Rubin pooling, tipping-point
//! detection, plausibility anchors and pooled KM curves.

mod anchors;
mod km_pool;
mod rubin;
mod sweep;

pub use anchors::{anchor_hr, compute_j2r_delta, kappa_event_rate_anchor};
pub use km_pool::{pool_km_curves, union_grid, PooledKmCurve};
pub use rubin::{rubin_pool, PooledEstimate};
pub use sweep::{
    evaluate_point, find_tipping_point, fit_imputations, run_sweep, Criterion, SensitivitySweep, StressDirection,
    SweepOptions, TippingPoint,
};
