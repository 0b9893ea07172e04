use rand::Rng;
use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::imputation::{select_indices, truncate, ImputationSpec, ImputedDataset, Method, Replacement};
use crate::rng::{self, Domain};
use crate::survival::{fit_family, sample_conditional_event_time, Arm, Family, ParametricFit, TrialDataset};

/// Fit `family` to one arm, leaving out the records at `excluded` (sorted).
pub fn fit_excluding(dataset: &TrialDataset, arm: Arm, family: Family, excluded: &[usize]) -> Result<ParametricFit> {
    let kept: Vec<_> = dataset
        .records()
        .iter()
        .enumerate()
        .filter(|(i, r)| r.arm == arm && excluded.binary_search(i).is_err())
        .map(|(_, r)| r)
        .collect();
    fit_family(family, kept.iter().copied())
}

/// Uniform draw on the open interval (0, 1).
pub(crate) fn open_uniform(rng: &mut impl Rng) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return u;
        }
    }
}

/// Delta-adjusted model-based imputation.
///
/// Each arm that has subjects to impute gets one parametric fit on its
/// records outside the imputed set. Every selected subject then receives an
/// event time drawn past its censoring time under `delta` times the fitted
/// hazard, truncated at the cutoff.
pub fn impute_model_based<'a>(
    dataset: &'a TrialDataset,
    spec: &ImputationSpec,
    point: u32,
) -> Result<Vec<ImputedDataset<'a>>> {
    let family = match spec.method {
        Method::ModelBasedExponential => Family::Exponential,
        Method::ModelBasedWeibull => Family::Weibull,
        other => return Err(invalid(format!("{} is not a model-based method", other.label()))),
    };
    spec.validate()?;

    // (record index, delta)
    let mut targets: Vec<(usize, f64)> = select_indices(dataset, &spec.selection)
        .into_iter()
        .map(|i| (i, spec.sensitivity))
        .collect();
    if let Some(c) = &spec.companion {
        for i in select_indices(dataset, &c.selection) {
            if !targets.iter().any(|&(j, _)| j == i) {
                targets.push((i, c.delta));
            }
        }
    }
    targets.sort_by_key(|&(i, _)| i);
    let excluded: Vec<usize> = targets.iter().map(|&(i, _)| i).collect();

    let mut fits: [Option<ParametricFit>; 2] = [None, None];
    for &(i, _) in &targets {
        let arm = dataset.records()[i].arm;
        let slot = &mut fits[arm.indicator() as usize];
        if slot.is_none() {
            *slot = Some(fit_excluding(dataset, arm, family, &excluded)?);
        }
    }

    let cutoff = dataset.cutoff();
    (1..=spec.m_imputations)
        .into_par_iter()
        .map(|m| {
            let mut stream = rng::stream(spec.seed, Domain::Imputation, point, m as u32);
            let replacements = targets
                .iter()
                .map(|&(i, delta)| {
                    let rec = &dataset.records()[i];
                    let fit = fits[rec.arm.indicator() as usize].as_ref().expect("fitted above");
                    let u = open_uniform(&mut stream);
                    let t = sample_conditional_event_time(fit, rec.time, delta, u)?;
                    let (time, event) = truncate(t, true, cutoff);
                    Ok(Replacement { index: i, time, event })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(ImputedDataset::new(dataset, replacements, m))
        })
        .collect()
}
