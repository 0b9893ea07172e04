//! Exponential and Weibull models for right-censored data.
//!
//! Both use the proportional-hazards parameterization
//! `S(t) = exp(-rate * t^shape)`, `h(t) = shape * rate * t^(shape - 1)`,
//! with the exponential as the `shape = 1` case.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::survival::data::SubjectRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Exponential,
    Weibull,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParametricFit {
    pub family: Family,
    pub shape: f64,
    pub rate: f64,
    pub loglik: f64,
    pub n_used: usize,
}

const SHAPE_LO: f64 = 1e-3;
const SHAPE_HI: f64 = 1e3;
const SHAPE_TOL: f64 = 1e-8;
const MAX_ITER: usize = 100;

fn check_time(t: f64) -> Result<()> {
    if t.is_nan() || t < 0.0 {
        Err(invalid(format!("time must be nonnegative, got {t}")))
    } else {
        Ok(())
    }
}

impl ParametricFit {
    /// Construct a model directly (e.g. the generating model of a simulation).
    pub fn weibull(shape: f64, rate: f64) -> Result<Self> {
        if !(shape > 0.0 && shape.is_finite() && rate > 0.0 && rate.is_finite()) {
            return Err(invalid(format!(
                "Weibull needs positive shape and rate, got ({shape}, {rate})"
            )));
        }
        Ok(ParametricFit {
            family: Family::Weibull,
            shape,
            rate,
            loglik: f64::NAN,
            n_used: 0,
        })
    }

    pub fn exponential(rate: f64) -> Result<Self> {
        let mut fit = Self::weibull(1.0, rate)?;
        fit.family = Family::Exponential;
        Ok(fit)
    }

    pub fn cumhaz(&self, t: f64) -> Result<f64> {
        check_time(t)?;
        Ok(self.cumhaz_unchecked(t))
    }

    pub fn survival(&self, t: f64) -> Result<f64> {
        check_time(t)?;
        Ok((-self.cumhaz_unchecked(t)).exp())
    }

    pub fn hazard(&self, t: f64) -> Result<f64> {
        check_time(t)?;
        if self.shape == 1.0 {
            return Ok(self.rate);
        }
        Ok(self.shape * self.rate * t.powf(self.shape - 1.0))
    }

    fn cumhaz_unchecked(&self, t: f64) -> f64 {
        if self.shape == 1.0 {
            self.rate * t
        } else {
            self.rate * t.powf(self.shape)
        }
    }

    /// Right-censored log-likelihood at this model's parameters.
    pub fn loglik_of<'a>(&self, records: impl IntoIterator<Item = &'a SubjectRecord>) -> f64 {
        weibull_loglik(self.shape, self.rate, records)
    }
}

pub fn survival_eval(fit: &ParametricFit, t: f64) -> Result<f64> {
    fit.survival(t)
}

pub fn hazard_eval(fit: &ParametricFit, t: f64) -> Result<f64> {
    fit.hazard(t)
}

pub fn cumhaz_eval(fit: &ParametricFit, t: f64) -> Result<f64> {
    fit.cumhaz(t)
}

/// `sum_events [log(shape * rate) + (shape - 1) log t] - sum_all rate * t^shape`.
pub fn weibull_loglik<'a>(shape: f64, rate: f64, records: impl IntoIterator<Item = &'a SubjectRecord>) -> f64 {
    let (log_shape, log_rate) = (shape.ln(), rate.ln());
    records.into_iter().fold(0.0, |acc, r| {
        let cum = if r.time == 0.0 { 0.0 } else { rate * r.time.powf(shape) };
        let ev = if r.event {
            log_shape + log_rate + (shape - 1.0) * r.time.ln()
        } else {
            0.0
        };
        acc + ev - cum
    })
}

/// Closed-form exponential MLE: events / total follow-up.
pub fn fit_exponential<'a>(records: impl IntoIterator<Item = &'a SubjectRecord>) -> Result<ParametricFit> {
    let mut events = 0usize;
    let mut total = 0.0;
    let mut n = 0usize;
    for r in records {
        check_time(r.time)?;
        events += usize::from(r.event);
        total += r.time;
        n += 1;
    }
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    if total <= 0.0 {
        return Err(Error::ZeroFollowUp);
    }
    if events == 0 {
        return Err(Error::NoEvents);
    }
    let d = events as f64;
    let rate = d / total;
    Ok(ParametricFit {
        family: Family::Exponential,
        shape: 1.0,
        rate,
        loglik: d * rate.ln() - rate * total,
        n_used: n,
    })
}

/// Sufficient pieces of the profile likelihood, on times scaled by their max
/// so `t^shape` stays bounded for large shapes.
struct Profile {
    /// (scaled time, log scaled time) for every record with positive time
    all: Vec<(f64, f64)>,
    /// sum of log scaled times over events
    sum_log_events: f64,
    events: f64,
    scale: f64,
}

impl Profile {
    /// Returns (sum s^g, sum s^g log s, sum s^g log^2 s).
    fn moments(&self, shape: f64) -> (f64, f64, f64) {
        self.all.iter().fold((0.0, 0.0, 0.0), |(a, b, c), &(s, ls)| {
            let p = s.powf(shape);
            (a + p, b + p * ls, c + p * ls * ls)
        })
    }

    /// Derivative and second derivative of the profile log-likelihood in shape.
    fn score(&self, shape: f64) -> (f64, f64) {
        let d = self.events;
        let (m0, m1, m2) = self.moments(shape);
        let mean = m1 / m0;
        let var = (m2 / m0 - mean * mean).max(0.0);
        (
            d / shape - d * mean + self.sum_log_events,
            -d / (shape * shape) - d * var,
        )
    }

    /// Rate in original time units at a given shape.
    fn rate(&self, shape: f64) -> f64 {
        let (m0, _, _) = self.moments(shape);
        // sum t^g = scale^g * sum s^g
        self.events / m0 * self.scale.powf(-shape)
    }
}

/// Weibull MLE by safeguarded Newton on the profile likelihood in shape,
/// with the rate profiled out as `events / sum t^shape`.
pub fn fit_weibull<'a>(records: impl IntoIterator<Item = &'a SubjectRecord> + Clone) -> Result<ParametricFit> {
    let mut event_times: Vec<f64> = Vec::new();
    let mut n = 0usize;
    let mut scale: f64 = 0.0;
    for r in records.clone() {
        check_time(r.time)?;
        if r.event {
            if r.time == 0.0 {
                return Err(invalid("event at time zero has zero Weibull density"));
            }
            event_times.push(r.time);
        }
        scale = scale.max(r.time);
        n += 1;
    }
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    event_times.sort_by(f64::total_cmp);
    event_times.dedup();
    if event_times.len() < 2 {
        return Err(Error::TooFewEventTimes(event_times.len()));
    }

    let mut profile = Profile {
        all: Vec::with_capacity(n),
        sum_log_events: 0.0,
        events: 0.0,
        scale,
    };
    for r in records.clone() {
        if r.time > 0.0 {
            let s = r.time / scale;
            profile.all.push((s, s.ln()));
            if r.event {
                profile.sum_log_events += s.ln();
                profile.events += 1.0;
            }
        }
    }

    // The profile score is strictly decreasing, so keep a sign bracket and
    // fall back to bisection whenever Newton leaves it.
    let (mut lo, mut hi) = (SHAPE_LO, SHAPE_HI);
    let (g_lo, _) = profile.score(lo);
    let (g_hi, _) = profile.score(hi);
    if g_lo <= 0.0 || g_hi >= 0.0 {
        return Err(Error::NonConvergence {
            iterations: 0,
            last_shape: if g_lo <= 0.0 { lo } else { hi },
        });
    }

    let mut shape = 1.0;
    for iter in 1..=MAX_ITER {
        let (g, h) = profile.score(shape);
        if g > 0.0 {
            lo = shape;
        } else {
            hi = shape;
        }
        let newton = shape - g / h;
        let next = if h < 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        let step = (next - shape).abs();
        shape = next;
        if step < SHAPE_TOL {
            let rate = profile.rate(shape);
            let loglik = weibull_loglik(shape, rate, records);
            return Ok(ParametricFit {
                family: Family::Weibull,
                shape,
                rate,
                loglik,
                n_used: n,
            });
        }
        if iter == MAX_ITER {
            break;
        }
    }
    Err(Error::NonConvergence {
        iterations: MAX_ITER,
        last_shape: shape,
    })
}

/// Fit the requested family.
pub fn fit_family<'a>(
    family: Family,
    records: impl IntoIterator<Item = &'a SubjectRecord> + Clone,
) -> Result<ParametricFit> {
    match family {
        Family::Exponential => fit_exponential(records),
        Family::Weibull => fit_weibull(records),
    }
}
