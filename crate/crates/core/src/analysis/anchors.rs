//! Reference values for judging how extreme a tipping point is.

use crate::error::{invalid, Error, Result};
use crate::imputation::{select_indices, SelectionCriteria};
use crate::survival::{Arm, Family, ParametricFit, TrialDataset};

/// Hazard ratio of imputed subjects against the opposite arm.
///
/// `delta` is their hazard ratio against their own arm's non-imputed
/// subjects and `reference_hr` the observed between-arm HR, so under
/// proportional hazards the implied cross-arm ratio is `delta / reference_hr`.
pub fn anchor_hr(delta: f64, reference_hr: f64) -> Result<f64> {
    if !(delta > 0.0 && delta.is_finite() && reference_hr > 0.0 && reference_hr.is_finite()) {
        return Err(invalid(format!(
            "anchor needs positive delta and reference HR, got ({delta}, {reference_hr})"
        )));
    }
    Ok(delta / reference_hr)
}

/// The hazard inflation that makes imputed experimental-arm subjects follow
/// the control arm's constant hazard.
pub fn compute_j2r_delta(fit_experimental: &ParametricFit, fit_control: &ParametricFit) -> Result<f64> {
    for (name, fit) in [("experimental", fit_experimental), ("control", fit_control)] {
        if fit.family != Family::Exponential {
            return Err(Error::FamilyMismatch(format!(
                "jump-to-reference anchor needs exponential fits, {name} arm is {:?}",
                fit.family
            )));
        }
    }
    Ok(fit_control.rate / fit_experimental.rate)
}

/// Kappa that makes the event rate among the imputed subjects match the
/// observed event rate of `reference` (events-at-censoring imputation turns a
/// fraction kappa of the all-censored selected set into events).
pub fn kappa_event_rate_anchor(dataset: &TrialDataset, selection: &SelectionCriteria, reference: Arm) -> Result<f64> {
    if select_indices(dataset, selection).is_empty() {
        return Err(Error::EmptySelection);
    }
    Ok(dataset.event_rate(reference)?.clamp(0.0, 1.0))
}
