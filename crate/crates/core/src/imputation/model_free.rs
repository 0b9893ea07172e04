use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::imputation::{select_indices, truncate, ImputationSpec, ImputedDataset, Method, Replacement};
use crate::rng::{self, Domain};
use crate::survival::{Arm, TrialDataset};

/// Slack for `kappa * n` products that land a hair off an integer or half-integer.
const ROUNDING_SLACK: f64 = 1e-9;

/// `round(kappa * n)`, halves rounded up.
pub(crate) fn subset_size(kappa: f64, n: usize) -> usize {
    ((kappa * n as f64 + 0.5 + ROUNDING_SLACK).floor() as usize).min(n)
}

/// `ceil(kappa * n)`.
pub(crate) fn pool_size(kappa: f64, n: usize) -> usize {
    ((kappa * n as f64 - ROUNDING_SLACK).ceil().max(1.0) as usize).min(n)
}

/// Deterministic model-free imputation.
///
/// Each imputation draws a fresh uniformly random subset of
/// `round(kappa * |selected|)` subjects. Experimental-arm subjects in the
/// subset become events at their censoring time; control-arm subjects become
/// censored at the cutoff.
pub fn impute_deterministic<'a>(
    dataset: &'a TrialDataset,
    spec: &ImputationSpec,
    point: u32,
) -> Result<Vec<ImputedDataset<'a>>> {
    if spec.method != Method::DeterministicAssign {
        return Err(invalid(format!(
            "{} is not deterministic assignment",
            spec.method.label()
        )));
    }
    spec.validate()?;
    let selected = select_indices(dataset, &spec.selection);
    let k = subset_size(spec.sensitivity, selected.len());
    let cutoff = dataset.cutoff();

    Ok((1..=spec.m_imputations)
        .into_par_iter()
        .map(|m| {
            if k == 0 {
                return ImputedDataset::new(dataset, Vec::new(), m);
            }
            let mut stream = rng::stream(spec.seed, Domain::Imputation, point, m as u32);
            let replacements = index::sample(&mut stream, selected.len(), k)
                .into_iter()
                .map(|j| {
                    let i = selected[j];
                    let rec = &dataset.records()[i];
                    match rec.arm {
                        Arm::Experimental => Replacement {
                            index: i,
                            time: rec.time,
                            event: true,
                        },
                        Arm::Control => Replacement {
                            index: i,
                            time: cutoff,
                            event: false,
                        },
                    }
                })
                .collect();
            ImputedDataset::new(dataset, replacements, m)
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DonorDirection {
    /// Shortest observed times.
    Worst,
    /// Longest observed times.
    Best,
}

impl DonorDirection {
    /// Worst donors stress the experimental arm, best donors the control arm.
    pub fn for_target(arm: Arm) -> Self {
        match arm {
            Arm::Experimental => DonorDirection::Worst,
            Arm::Control => DonorDirection::Best,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Donor {
    pub index: usize,
    pub time: f64,
    pub event: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DonorPool {
    pub direction: DonorDirection,
    pub kappa: f64,
    /// Sorted by (time, id).
    pub donors: Vec<Donor>,
}

/// The `ceil(kappa * N)` records with the smallest (`Worst`) or largest
/// (`Best`) observed times among records not in `excluded`, both arms
/// pooled, event or not. Ties are ordered by subject id.
pub fn build_donor_pool(
    dataset: &TrialDataset,
    excluded: &[usize],
    direction: DonorDirection,
    kappa: f64,
) -> Result<DonorPool> {
    if !(kappa > 0.0 && kappa <= 1.0) {
        return Err(invalid(format!("donor kappa must be in (0, 1], got {kappa}")));
    }
    let records = dataset.records();
    let mut eligible: Vec<usize> = (0..records.len())
        .filter(|i| excluded.binary_search(i).is_err())
        .collect();
    if eligible.is_empty() {
        return Err(Error::EmptyDonorPool);
    }
    eligible.sort_by(|&a, &b| {
        records[a]
            .time
            .total_cmp(&records[b].time)
            .then_with(|| records[a].id.cmp(&records[b].id))
    });
    let size = pool_size(kappa, eligible.len());
    let chosen = match direction {
        DonorDirection::Worst => &eligible[..size],
        DonorDirection::Best => &eligible[eligible.len() - size..],
    };
    Ok(DonorPool {
        direction,
        kappa,
        donors: chosen
            .iter()
            .map(|&i| Donor {
                index: i,
                time: records[i].time,
                event: records[i].event,
            })
            .collect(),
    })
}

/// Donor-sampling model-free imputation.
///
/// Every selected subject independently copies the outcome of a donor drawn
/// uniformly with replacement from the pool. Experimental-arm targets sample
/// the worst pool, control-arm targets the best. `kappa = 0` leaves the data
/// untouched.
pub fn impute_donor_sampling<'a>(
    dataset: &'a TrialDataset,
    spec: &ImputationSpec,
    point: u32,
) -> Result<Vec<ImputedDataset<'a>>> {
    if spec.method != Method::DonorSample {
        return Err(invalid(format!("{} is not donor sampling", spec.method.label())));
    }
    spec.validate()?;
    let selected = select_indices(dataset, &spec.selection);
    if spec.sensitivity == 0.0 || selected.is_empty() {
        return Ok((1..=spec.m_imputations)
            .map(|m| ImputedDataset::new(dataset, Vec::new(), m))
            .collect());
    }
    let direction = DonorDirection::for_target(spec.selection.target_arm);
    let pool = build_donor_pool(dataset, &selected, direction, spec.sensitivity)?;
    let cutoff = dataset.cutoff();

    Ok((1..=spec.m_imputations)
        .into_par_iter()
        .map(|m| {
            let mut stream = rng::stream(spec.seed, Domain::Imputation, point, m as u32);
            let replacements = selected
                .iter()
                .filter_map(|&i| {
                    let candidates = if spec.coherent_donors {
                        let c = dataset.records()[i].time;
                        let first = pool.donors.partition_point(|d| d.time <= c);
                        &pool.donors[first..]
                    } else {
                        &pool.donors[..]
                    };
                    if candidates.is_empty() {
                        return None;
                    }
                    let donor = candidates[stream.random_range(0..candidates.len())];
                    let (time, event) = truncate(donor.time, donor.event, cutoff);
                    Some(Replacement { index: i, time, event })
                })
                .collect();
            ImputedDataset::new(dataset, replacements, m)
        })
        .collect())
}
