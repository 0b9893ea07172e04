//! Product-limit (Kaplan-Meier) estimation.

use crate::error::{Error, Result};
use crate::survival::data::SubjectRecord;

/// A right-continuous step function estimate of survival.
///
/// `survival[i]` holds on `[times[i], times[i + 1])`; before `times[0]` the
/// estimate is 1.
#[derive(Debug, Clone, PartialEq)]
pub struct KmCurve {
    pub times: Vec<f64>,
    pub survival: Vec<f64>,
    /// Greenwood standard errors. Zero once the estimate reaches zero.
    pub se: Vec<f64>,
    pub at_risk: Vec<usize>,
    pub n_events: Vec<usize>,
}

impl KmCurve {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Survival at `t`, evaluated right-continuously.
    pub fn survival_at(&self, t: f64) -> f64 {
        // number of event times <= t
        let k = self.times.partition_point(|&s| s <= t);
        if k == 0 {
            1.0
        } else {
            self.survival[k - 1]
        }
    }

    /// Median survival: first event time where the estimate drops to 0.5 or below.
    pub fn median(&self) -> Option<f64> {
        self.times
            .iter()
            .zip(&self.survival)
            .find(|(_, &s)| s <= 0.5)
            .map(|(&t, _)| t)
    }
}

/// Kaplan-Meier estimate from records.
pub fn km_fit<'a>(records: impl IntoIterator<Item = &'a SubjectRecord>) -> Result<KmCurve> {
    let pairs: Vec<(f64, bool)> = records.into_iter().map(|r| (r.time, r.event)).collect();
    km_from_pairs(&pairs)
}

/// KM estimate of the censoring-time distribution: censored records count as
/// events and events as censorings.
pub fn reverse_km<'a>(records: impl IntoIterator<Item = &'a SubjectRecord>) -> Result<KmCurve> {
    let pairs: Vec<(f64, bool)> = records.into_iter().map(|r| (r.time, !r.event)).collect();
    km_from_pairs(&pairs)
}

/// Kaplan-Meier estimate from `(time, event)` pairs.
pub fn km_from_pairs(pairs: &[(f64, bool)]) -> Result<KmCurve> {
    if pairs.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if let Some(&(t, _)) = pairs.iter().find(|(t, _)| !(t.is_finite() && *t >= 0.0)) {
        return Err(Error::InvalidInput(format!("time must be nonnegative, got {t}")));
    }
    let mut sorted = pairs.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut curve = KmCurve {
        times: Vec::new(),
        survival: Vec::new(),
        se: Vec::new(),
        at_risk: Vec::new(),
        n_events: Vec::new(),
    };
    let mut s = 1.0;
    let mut greenwood = 0.0;
    let mut at_risk = sorted.len();
    let mut i = 0;
    while i < sorted.len() {
        let t = sorted[i].0;
        let mut j = i;
        let mut d = 0usize;
        while j < sorted.len() && sorted[j].0 == t {
            d += usize::from(sorted[j].1);
            j += 1;
        }
        if d > 0 {
            let n = at_risk as f64;
            let df = d as f64;
            s *= 1.0 - df / n;
            let se = if d < at_risk {
                greenwood += df / (n * (n - df));
                s * greenwood.sqrt()
            } else {
                0.0
            };
            curve.times.push(t);
            curve.survival.push(s);
            curve.se.push(se);
            curve.at_risk.push(at_risk);
            curve.n_events.push(d);
        }
        at_risk -= j - i;
        i = j;
    }
    Ok(curve)
}
