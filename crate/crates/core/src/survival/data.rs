use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arm {
    Control,
    Experimental,
}

impl Arm {
    /// 0 = control, 1 = experimental.
    pub fn indicator(self) -> u8 {
        match self {
            Arm::Control => 0,
            Arm::Experimental => 1,
        }
    }

    pub fn from_indicator(value: u8) -> Option<Arm> {
        match value {
            0 => Some(Arm::Control),
            1 => Some(Arm::Experimental),
            _ => None,
        }
    }

    pub fn other(self) -> Arm {
        match self {
            Arm::Control => Arm::Experimental,
            Arm::Experimental => Arm::Control,
        }
    }
}

/// Why a record was censored. Ignored when the record is an event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CensorReason {
    Administrative,
    Dropout,
}

/// One patient's observed outcome. Times are in months.
#[derive(Debug, Clone, PartialEq)]
pub struct SubjectRecord {
    pub id: String,
    pub arm: Arm,
    pub time: f64,
    pub event: bool,
    pub reason: CensorReason,
    pub covariate: Option<f64>,
}

impl SubjectRecord {
    pub fn new(id: impl Into<String>, arm: Arm, time: f64, event: bool, reason: CensorReason) -> Self {
        SubjectRecord {
            id: id.into(),
            arm,
            time,
            event,
            reason,
            covariate: None,
        }
    }

    pub fn with_covariate(mut self, x: f64) -> Self {
        self.covariate = Some(x);
        self
    }

    /// Censored for the given reason (always false for events).
    pub fn is_censored_for(&self, reason: CensorReason) -> bool {
        !self.event && self.reason == reason
    }

    pub fn observation(&self) -> Observation {
        Observation {
            time: self.time,
            event: self.event,
            arm: self.arm,
        }
    }
}

/// The minimal `(time, event, arm)` triple the estimators work on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub time: f64,
    pub event: bool,
    pub arm: Arm,
}

/// A validated two-arm trial with a single administrative cutoff.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialDataset {
    records: Vec<SubjectRecord>,
    cutoff: f64,
}

impl TrialDataset {
    pub fn new(records: Vec<SubjectRecord>, cutoff: f64) -> Result<Self> {
        if !(cutoff.is_finite() && cutoff > 0.0) {
            return Err(invalid(format!("cutoff must be positive and finite, got {cutoff}")));
        }
        let mut seen = HashSet::with_capacity(records.len());
        for r in &records {
            if !seen.insert(r.id.as_str()) {
                return Err(invalid(format!("duplicate subject id {:?}", r.id)));
            }
            if !(r.time.is_finite() && r.time >= 0.0) {
                return Err(invalid(format!(
                    "subject {:?}: time must be nonnegative, got {}",
                    r.id, r.time
                )));
            }
            if r.time > cutoff {
                return Err(invalid(format!(
                    "subject {:?}: time {} exceeds cutoff {}",
                    r.id, r.time, cutoff
                )));
            }
            if let Some(x) = r.covariate {
                if !x.is_finite() {
                    return Err(invalid(format!("subject {:?}: non-finite covariate", r.id)));
                }
            }
        }
        Ok(TrialDataset { records, cutoff })
    }

    pub fn records(&self) -> &[SubjectRecord] {
        &self.records
    }

    pub fn cutoff(&self) -> f64 {
        self.cutoff
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn arm_records(&self, arm: Arm) -> impl Iterator<Item = &SubjectRecord> {
        self.records.iter().filter(move |r| r.arm == arm)
    }

    pub fn observations(&self) -> Vec<Observation> {
        self.records.iter().map(SubjectRecord::observation).collect()
    }

    pub fn has_both_arms(&self) -> bool {
        let mut control = false;
        let mut experimental = false;
        for r in &self.records {
            match r.arm {
                Arm::Control => control = true,
                Arm::Experimental => experimental = true,
            }
        }
        control && experimental
    }

    /// Percentage of an arm's records censored for `Dropout`.
    pub fn dropout_pct(&self, arm: Arm) -> f64 {
        let (n, d) = self.arm_records(arm).fold((0usize, 0usize), |(n, d), r| {
            (n + 1, d + usize::from(r.is_censored_for(CensorReason::Dropout)))
        });
        if n == 0 {
            0.0
        } else {
            100.0 * d as f64 / n as f64
        }
    }

    /// Events / records within an arm.
    pub fn event_rate(&self, arm: Arm) -> Result<f64> {
        let (n, d) = self
            .arm_records(arm)
            .fold((0usize, 0usize), |(n, d), r| (n + 1, d + usize::from(r.event)));
        if n == 0 {
            return Err(Error::SingleArm);
        }
        Ok(d as f64 / n as f64)
    }

    /// Copy of the dataset with arm labels swapped.
    pub fn relabeled(&self) -> TrialDataset {
        let records = self
            .records
            .iter()
            .map(|r| SubjectRecord {
                arm: r.arm.other(),
                ..r.clone()
            })
            .collect();
        TrialDataset {
            records,
            cutoff: self.cutoff,
        }
    }
}
