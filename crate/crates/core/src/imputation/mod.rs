//! Multiple imputation of informatively censored subjects.
//!
//! An [`ImputationSpec`] names an engine, the subjects it may touch (a
//! [`SelectionCriteria`]) and a sensitivity value: the hazard multiplier
//! `delta` for the model-based engines, or the fraction `kappa` for the
//! model-free ones. [`impute`] produces `M` [`ImputedDataset`]s, each a set of
//! replacements layered over the untouched base dataset.
//!
//! Imputation `m` at sweep point `p` draws from its own counter-based stream
//! `(seed, p, m)`, so output never depends on scheduling.

mod model_based;
mod model_free;
mod selection;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::survival::{Arm, CensorReason, Observation, SubjectRecord, TrialDataset};

pub use model_based::{fit_excluding, impute_model_based};
pub use model_free::{build_donor_pool, impute_deterministic, impute_donor_sampling, Donor, DonorDirection, DonorPool};
pub use selection::{select_imputable, select_indices, SelectionCriteria};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ModelBasedExponential,
    ModelBasedWeibull,
    DeterministicAssign,
    DonorSample,
}

impl Method {
    pub fn is_model_based(self) -> bool {
        matches!(self, Method::ModelBasedExponential | Method::ModelBasedWeibull)
    }

    pub fn label(self) -> &'static str {
        match self {
            Method::ModelBasedExponential => "model_based_exponential",
            Method::ModelBasedWeibull => "model_based_weibull",
            Method::DeterministicAssign => "deterministic_assign",
            Method::DonorSample => "donor_sample",
        }
    }
}

/// Extra selection imputed alongside the main one with its own fixed delta,
/// for arm-specific model-based sweeps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompanionSelection {
    pub selection: SelectionCriteria,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImputationSpec {
    pub method: Method,
    pub selection: SelectionCriteria,
    /// delta (> 0) for model-based methods, kappa in [0, 1] otherwise
    pub sensitivity: f64,
    pub m_imputations: usize,
    pub seed: u64,
    /// Donor sampling only: restrict donors to times beyond the recipient's
    /// censoring time.
    #[serde(default)]
    pub coherent_donors: bool,
    /// Model-based only.
    #[serde(default)]
    pub companion: Option<CompanionSelection>,
}

impl ImputationSpec {
    pub fn new(
        method: Method,
        selection: SelectionCriteria,
        sensitivity: f64,
        m_imputations: usize,
        seed: u64,
    ) -> Self {
        ImputationSpec {
            method,
            selection,
            sensitivity,
            m_imputations,
            seed,
            coherent_donors: false,
            companion: None,
        }
    }

    pub fn with_sensitivity(&self, sensitivity: f64) -> Self {
        ImputationSpec {
            sensitivity,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.selection.validate()?;
        check_sensitivity(self.method, self.sensitivity)?;
        if self.m_imputations == 0 {
            return Err(invalid("number of imputations must be positive"));
        }
        if let Some(c) = &self.companion {
            if !self.method.is_model_based() {
                return Err(invalid("companion selections apply to model-based methods only"));
            }
            c.selection.validate()?;
            check_sensitivity(self.method, c.delta)?;
        }
        Ok(())
    }
}

pub(crate) fn check_sensitivity(method: Method, value: f64) -> Result<()> {
    if method.is_model_based() {
        if !(value > 0.0 && value.is_finite()) {
            return Err(invalid(format!("delta must be in (0, inf), got {value}")));
        }
    } else if !(0.0..=1.0).contains(&value) {
        return Err(invalid(format!("kappa must be in [0, 1], got {value}")));
    }
    Ok(())
}

/// New outcome for one record of the base dataset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Replacement {
    pub index: usize,
    pub time: f64,
    pub event: bool,
}

/// One imputed copy of a dataset, stored as replacements over the base.
#[derive(Debug, Clone, PartialEq)]
pub struct ImputedDataset<'a> {
    base: &'a TrialDataset,
    replacements: Vec<Replacement>,
    imputation_index: usize,
}

impl<'a> ImputedDataset<'a> {
    pub(crate) fn new(base: &'a TrialDataset, mut replacements: Vec<Replacement>, imputation_index: usize) -> Self {
        replacements.sort_by_key(|r| r.index);
        ImputedDataset {
            base,
            replacements,
            imputation_index,
        }
    }

    pub fn base(&self) -> &'a TrialDataset {
        self.base
    }

    pub fn replacements(&self) -> &[Replacement] {
        &self.replacements
    }

    /// 1-based position among the M imputations.
    pub fn imputation_index(&self) -> usize {
        self.imputation_index
    }

    /// `(id, new time, new event flag)` for every replaced subject.
    pub fn replaced(&self) -> impl Iterator<Item = (&'a str, f64, bool)> + '_ {
        self.replacements
            .iter()
            .map(|r| (self.base.records()[r.index].id.as_str(), r.time, r.event))
    }

    pub fn observations(&self) -> Vec<Observation> {
        let mut obs = self.base.observations();
        for r in &self.replacements {
            obs[r.index].time = r.time;
            obs[r.index].event = r.event;
        }
        obs
    }

    /// Full dataset with replacements applied. Records newly censored at the
    /// cutoff are marked administrative.
    pub fn materialize(&self) -> TrialDataset {
        let mut records: Vec<SubjectRecord> = self.base.records().to_vec();
        for r in &self.replacements {
            let rec = &mut records[r.index];
            rec.time = r.time;
            rec.event = r.event;
            if !r.event && r.time >= self.base.cutoff() {
                rec.reason = CensorReason::Administrative;
            }
        }
        TrialDataset::new(records, self.base.cutoff()).expect("replacements keep the dataset valid")
    }

    /// `(time, event)` pairs for one arm, for KM curves.
    pub fn arm_pairs(&self, arm: Arm) -> Vec<(f64, bool)> {
        self.observations()
            .into_iter()
            .filter(|o| o.arm == arm)
            .map(|o| (o.time, o.event))
            .collect()
    }
}

/// Apply the cutoff truncation step: anything past the cutoff becomes a
/// censoring at the cutoff.
pub(crate) fn truncate(time: f64, event: bool, cutoff: f64) -> (f64, bool) {
    if time > cutoff {
        (cutoff, false)
    } else {
        (time, event)
    }
}

/// Run the engine named in `spec`. `point` identifies the sweep point and
/// selects the random substreams.
pub fn impute<'a>(dataset: &'a TrialDataset, spec: &ImputationSpec, point: u32) -> Result<Vec<ImputedDataset<'a>>> {
    spec.validate()?;
    match spec.method {
        Method::ModelBasedExponential | Method::ModelBasedWeibull => impute_model_based(dataset, spec, point),
        Method::DeterministicAssign => impute_deterministic(dataset, spec, point),
        Method::DonorSample => impute_donor_sampling(dataset, spec, point),
    }
}
