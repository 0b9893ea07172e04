use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::km_pool::{pool_km_curves, PooledKmCurve};
use crate::analysis::rubin::{rubin_pool, PooledEstimate};
use crate::error::{invalid, Error, Result};
use crate::imputation::{check_sensitivity, impute, ImputationSpec, ImputedDataset};
use crate::survival::{cox_fit_observations, km_from_pairs, Arm, HrEstimate, TrialDataset};

/// Fraction of Cox fits that must succeed at a sweep point.
const MIN_FIT_SUCCESS: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    /// Upper 95% limit of the pooled HR reaches 1.
    #[default]
    UpperCi,
    /// Pooled HR reaches 1.
    PointEstimate,
}

impl Criterion {
    pub fn value(self, p: &PooledEstimate) -> f64 {
        match self {
            Criterion::UpperCi => p.ci_high,
            Criterion::PointEstimate => p.pooled_hr,
        }
    }
}

/// Order in which the grid is scanned when looking for the tipping point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StressDirection {
    /// kappa sweeps and hazard inflation: scan upward.
    Increasing,
    /// hazard deflation: scan downward from 1.
    Decreasing,
}

impl StressDirection {
    /// Model-based sweeps on the control arm deflate; everything else stresses
    /// by increasing the parameter.
    pub fn for_spec(spec: &ImputationSpec) -> Self {
        if spec.method.is_model_based() && spec.selection.target_arm == Arm::Control {
            StressDirection::Decreasing
        } else {
            StressDirection::Increasing
        }
    }

    /// Grid indices in scan order.
    pub fn order(self, len: usize) -> Vec<usize> {
        match self {
            StressDirection::Increasing => (0..len).collect(),
            StressDirection::Decreasing => (0..len).rev().collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TippingPoint {
    pub value: f64,
    /// Grid value scanned just before `value`; `None` when the very first
    /// scanned value already tips.
    pub previous: Option<f64>,
    pub criterion: Criterion,
}

#[derive(Debug, Clone, Default)]
pub struct SweepOptions {
    pub criterion: Criterion,
    /// Overrides [`StressDirection::for_spec`].
    pub direction: Option<StressDirection>,
    /// Evaluate grid points in scan order and stop at the first tip.
    pub stop_at_tipping: bool,
    /// Pool KM curves of this arm at every sweep point.
    pub km_arm: Option<Arm>,
}

#[derive(Debug, Clone)]
pub struct SensitivitySweep {
    pub spec: ImputationSpec,
    /// Ascending; with `stop_at_tipping` only the evaluated values.
    pub grid: Vec<f64>,
    pub points: Vec<PooledEstimate>,
    pub tipping: Option<TippingPoint>,
    pub criterion: Criterion,
    pub direction: StressDirection,
    /// Cox fits dropped at each point.
    pub failed_fits: Vec<usize>,
    /// Parallel to `points` when KM pooling was requested.
    pub km_curves: Vec<PooledKmCurve>,
}

fn validate_grid(spec: &ImputationSpec, grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(invalid("sensitivity grid is empty"));
    }
    if grid
        .windows(2)
        .any(|w| w[0].partial_cmp(&w[1]) != Some(std::cmp::Ordering::Less))
    {
        return Err(invalid("sensitivity grid must be strictly ascending"));
    }
    for &v in grid {
        check_sensitivity(spec.method, v)?;
    }
    Ok(())
}

/// Cox fit of every imputed dataset; failures are dropped as long as at least
/// 90% (and at least two) succeed.
pub fn fit_imputations(param: f64, imputed: &[ImputedDataset<'_>]) -> Result<(Vec<HrEstimate>, usize)> {
    // all-untouched imputations are the same dataset: fit once
    if imputed.iter().all(|d| d.replacements().is_empty()) {
        if let Some(first) = imputed.first() {
            let est = cox_fit_observations(&first.base().observations())?;
            return Ok((vec![est; imputed.len()], 0));
        }
    }
    let results: Vec<Result<HrEstimate>> = imputed
        .par_iter()
        .map(|d| cox_fit_observations(&d.observations()))
        .collect();
    let attempted = results.len();
    let estimates: Vec<HrEstimate> = results.into_iter().filter_map(|r| r.ok()).collect();
    let failed = attempted - estimates.len();
    if estimates.len() < 2 || (estimates.len() as f64) < MIN_FIT_SUCCESS * attempted as f64 {
        return Err(Error::SweepPointFailed {
            param,
            succeeded: estimates.len(),
            attempted,
        });
    }
    if failed > 0 {
        warn!("sensitivity {param}: dropped {failed} of {attempted} Cox fits");
    }
    Ok((estimates, failed))
}

/// Impute, fit and pool at a single sensitivity value.
pub fn evaluate_point(
    dataset: &TrialDataset,
    spec: &ImputationSpec,
    point: u32,
    km_arm: Option<Arm>,
) -> Result<(PooledEstimate, usize, Option<PooledKmCurve>)> {
    let imputed = impute(dataset, spec, point)?;
    let (estimates, failed) = fit_imputations(spec.sensitivity, &imputed)?;
    let pooled = rubin_pool(spec.sensitivity, &estimates)?;
    let km = match km_arm {
        Some(arm) => {
            let curves = imputed
                .par_iter()
                .map(|d| km_from_pairs(&d.arm_pairs(arm)))
                .collect::<Result<Vec<_>>>()?;
            Some(pool_km_curves(&curves, None, false))
        }
        None => None,
    };
    Ok((pooled, failed, km))
}

/// Run the imputation/analysis pipeline at every grid value and locate the
/// tipping point.
///
/// Grid value `i` always uses substream index `i`, so a truncated sweep
/// reproduces the corresponding points of the full one.
pub fn run_sweep(
    dataset: &TrialDataset,
    template: &ImputationSpec,
    grid: &[f64],
    options: &SweepOptions,
) -> Result<SensitivitySweep> {
    validate_grid(template, grid)?;
    template.with_sensitivity(grid[0]).validate()?;
    let direction = options.direction.unwrap_or_else(|| StressDirection::for_spec(template));

    let mut evaluated: Vec<(usize, PooledEstimate, usize, Option<PooledKmCurve>)> = Vec::new();
    for i in direction.order(grid.len()) {
        let spec = template.with_sensitivity(grid[i]);
        let (pooled, failed, km) = evaluate_point(dataset, &spec, i as u32, options.km_arm)?;
        let tipped = options.criterion.value(&pooled) >= 1.0;
        evaluated.push((i, pooled, failed, km));
        if options.stop_at_tipping && tipped {
            break;
        }
    }
    evaluated.sort_by_key(|e| e.0);

    let mut sweep = SensitivitySweep {
        spec: template.clone(),
        grid: evaluated.iter().map(|e| grid[e.0]).collect(),
        points: evaluated.iter().map(|e| e.1).collect(),
        tipping: None,
        criterion: options.criterion,
        direction,
        failed_fits: evaluated.iter().map(|e| e.2).collect(),
        km_curves: evaluated.into_iter().filter_map(|e| e.3).collect(),
    };
    sweep.tipping = find_tipping_point(&sweep, options.criterion);
    Ok(sweep)
}

/// First grid value, scanning in the sweep's stress direction, whose
/// criterion value is at least 1. No interpolation.
pub fn find_tipping_point(sweep: &SensitivitySweep, criterion: Criterion) -> Option<TippingPoint> {
    let mut previous = None;
    for i in sweep.direction.order(sweep.points.len()) {
        if criterion.value(&sweep.points[i]) >= 1.0 {
            return Some(TippingPoint {
                value: sweep.grid[i],
                previous,
                criterion,
            });
        }
        previous = Some(sweep.grid[i]);
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imputation::{Method, SelectionCriteria};

    fn fake_sweep(grid: &[f64], values: &[f64], direction: StressDirection, criterion: Criterion) -> SensitivitySweep {
        let points = grid
            .iter()
            .zip(values)
            .map(|(&param, &v)| PooledEstimate {
                param,
                pooled_log_hr: v.ln(),
                within_var: 0.0,
                between_var: 0.0,
                total_var: 0.0,
                pooled_hr: v,
                ci_low: v,
                ci_high: v,
                m: 2,
            })
            .collect();
        SensitivitySweep {
            spec: ImputationSpec::new(
                Method::DeterministicAssign,
                SelectionCriteria::dropouts(Arm::Control),
                0.0,
                2,
                0,
            ),
            grid: grid.to_vec(),
            points,
            tipping: None,
            criterion,
            direction,
            failed_fits: vec![0; grid.len()],
            km_curves: Vec::new(),
        }
    }

    #[test]
    fn upward_scan() {
        let s = fake_sweep(
            &[1.0, 1.2, 1.4],
            &[0.90, 0.98, 1.01],
            StressDirection::Increasing,
            Criterion::UpperCi,
        );
        let tp = find_tipping_point(&s, Criterion::UpperCi).unwrap();
        assert_eq!(tp.value, 1.4);
        assert_eq!(tp.previous, Some(1.2));
    }

    #[test]
    fn never_tips() {
        let s = fake_sweep(
            &[1.0, 1.2, 1.4],
            &[0.90, 0.95, 0.99],
            StressDirection::Increasing,
            Criterion::UpperCi,
        );
        assert!(find_tipping_point(&s, Criterion::UpperCi).is_none());
    }

    #[test]
    fn deflation_scans_downward() {
        // HRs listed in scan order 0.8 -> 0.5 -> 0.2
        let s = fake_sweep(
            &[0.2, 0.5, 0.8],
            &[1.05, 1.00, 0.95],
            StressDirection::Decreasing,
            Criterion::PointEstimate,
        );
        let tp = find_tipping_point(&s, Criterion::PointEstimate).unwrap();
        assert_eq!(tp.value, 0.5);
        assert_eq!(tp.previous, Some(0.8));
    }

    #[test]
    fn already_tipped_at_first_scanned_value() {
        let s = fake_sweep(
            &[0.2, 0.5, 1.0],
            &[1.3, 1.2, 1.1],
            StressDirection::Decreasing,
            Criterion::UpperCi,
        );
        let tp = find_tipping_point(&s, Criterion::UpperCi).unwrap();
        assert_eq!(tp.value, 1.0);
        assert_eq!(tp.previous, None);
    }

    #[test]
    fn grid_validation() {
        let spec = ImputationSpec::new(
            Method::ModelBasedExponential,
            SelectionCriteria::dropouts(Arm::Control),
            1.0,
            2,
            0,
        );
        assert!(validate_grid(&spec, &[]).is_err());
        assert!(validate_grid(&spec, &[0.5, 0.5]).is_err());
        assert!(validate_grid(&spec, &[0.0, 0.5]).is_err());
        assert!(validate_grid(&spec, &[0.5, 1.0, 2.0]).is_ok());
        let kspec = ImputationSpec::new(
            Method::DonorSample,
            SelectionCriteria::dropouts(Arm::Control),
            0.0,
            2,
            0,
        );
        assert!(validate_grid(&kspec, &[0.0, 1.2]).is_err());
    }

    #[test]
    fn direction_from_spec() {
        let mut spec = ImputationSpec::new(
            Method::ModelBasedWeibull,
            SelectionCriteria::dropouts(Arm::Control),
            1.0,
            2,
            0,
        );
        assert_eq!(StressDirection::for_spec(&spec), StressDirection::Decreasing);
        spec.selection.target_arm = Arm::Experimental;
        assert_eq!(StressDirection::for_spec(&spec), StressDirection::Increasing);
        spec.method = Method::DeterministicAssign;
        spec.selection.target_arm = Arm::Control;
        assert_eq!(StressDirection::for_spec(&spec), StressDirection::Increasing);
    }
}
