use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::survival::{Arm, CensorReason, TrialDataset};

/// Which censored subjects are eligible for imputation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelectionCriteria {
    pub target_arm: Arm,
    #[serde(default = "default_reasons")]
    pub reason_filter: BTreeSet<CensorReason>,
    /// Only censorings at or before this time (months) qualify.
    #[serde(default)]
    pub early_window: Option<f64>,
}

fn default_reasons() -> BTreeSet<CensorReason> {
    BTreeSet::from([CensorReason::Dropout])
}

impl SelectionCriteria {
    /// Dropouts in `target_arm`, no window.
    pub fn dropouts(target_arm: Arm) -> Self {
        SelectionCriteria {
            target_arm,
            reason_filter: default_reasons(),
            early_window: None,
        }
    }

    pub fn with_window(mut self, months: f64) -> Self {
        self.early_window = Some(months);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.reason_filter.is_empty() {
            return Err(invalid("reason filter must not be empty"));
        }
        if let Some(w) = self.early_window {
            if !(w > 0.0 && w.is_finite()) {
                return Err(invalid(format!("early window must be positive, got {w}")));
            }
        }
        Ok(())
    }
}

/// Indices (ascending) of records eligible for imputation.
pub fn select_indices(dataset: &TrialDataset, criteria: &SelectionCriteria) -> Vec<usize> {
    dataset
        .records()
        .iter()
        .enumerate()
        .filter(|(_, r)| {
            !r.event
                && r.arm == criteria.target_arm
                && criteria.reason_filter.contains(&r.reason)
                && criteria.early_window.is_none_or(|w| r.time <= w)
        })
        .map(|(i, _)| i)
        .collect()
}

/// Ids of records eligible for imputation, in dataset order.
pub fn select_imputable(dataset: &TrialDataset, criteria: &SelectionCriteria) -> Vec<String> {
    select_indices(dataset, criteria)
        .into_iter()
        .map(|i| dataset.records()[i].id.clone())
        .collect()
}
