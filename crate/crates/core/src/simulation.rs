//! Two-arm trials with Weibull event times, a prognostic covariate and
//! covariate-dependent exponential dropout, plus the experiment drivers that
//! run many of them.
//!
//! Event hazard for subject `i`:
//!
//! ```text
//! h_i(t) = gamma * lambda * t^(gamma - 1) * exp(log(true_hr) * A_i + covariate_log_hr * X_i)
//! ```
//!
//! Dropout hazard (constant in time) by scenario:
//!
//! ```text
//! ControlHeavyDropout:      lambda * exp(log(0.5) * A + log(2) * X)
//! ExperimentalHeavyDropout: lambda * exp(log(2) * A + log(0.5) * A * X)
//! NonInformative:           lambda
//! ```
//!
//! each multiplied by `dropout_scale`. Follow-up ends administratively at
//! `t_max`.

use log::warn;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{run_sweep, Criterion, StressDirection, SweepOptions};
use crate::error::{invalid, Result};
use crate::imputation::ImputationSpec;
use crate::rng::{self, Domain};
use crate::survival::{cox_fit, Arm, CensorReason, HrEstimate, SubjectRecord, TrialDataset};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CensoringScenario {
    ControlHeavyDropout,
    ExperimentalHeavyDropout,
    /// Dropout hazard independent of arm and covariate.
    NonInformative,
}

impl CensoringScenario {
    /// Log-linear predictor of the dropout hazard.
    fn linear_predictor(self, arm: Arm, x: f64) -> f64 {
        let a = arm.indicator() as f64;
        match self {
            CensoringScenario::ControlHeavyDropout => 0.5f64.ln() * a + 2.0f64.ln() * x,
            // the X main effect has coefficient log(1) = 0
            CensoringScenario::ExperimentalHeavyDropout => 2.0f64.ln() * a + 0.5f64.ln() * a * x,
            CensoringScenario::NonInformative => 0.0,
        }
    }
}

fn default_dropout_scale() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    /// Subjects per trial, split 1:1.
    pub n: usize,
    pub true_hr: f64,
    pub gamma: f64,
    pub lambda: f64,
    pub covariate_log_hr: f64,
    pub scenario: CensoringScenario,
    pub t_max: f64,
    pub n_trials: usize,
    pub seed: u64,
    /// Multiplier on the dropout hazard; 0 disables dropout.
    #[serde(default = "default_dropout_scale")]
    pub dropout_scale: f64,
}

impl SimulationConfig {
    /// Defaults of the published design: N = 2000, lambda = log(2)/8,
    /// covariate effect log(0.75), 15 months of follow-up, 100 trials.
    pub fn standard(scenario: CensoringScenario, gamma: f64, true_hr: f64) -> Self {
        SimulationConfig {
            n: 2000,
            true_hr,
            gamma,
            lambda: 2.0f64.ln() / 8.0,
            covariate_log_hr: 0.75f64.ln(),
            scenario,
            t_max: 15.0,
            n_trials: 100,
            seed: 20240101,
            dropout_scale: 1.0,
        }
    }

    /// Numbered scenario of the standard 20-cell design (1-based): scenarios
    /// 1-10 have heavier control dropout, 11-20 heavier experimental dropout;
    /// within each half the first five use gamma = 0.6 and the next five
    /// gamma = 1.5, each over true HR 0.7, 0.8, 0.9, 1.0, 1.1.
    pub fn numbered(scenario: usize) -> Result<Self> {
        if !(1..=20).contains(&scenario) {
            return Err(invalid(format!("scenario number must be in 1..=20, got {scenario}")));
        }
        let k = scenario - 1;
        let censoring = if k < 10 {
            CensoringScenario::ControlHeavyDropout
        } else {
            CensoringScenario::ExperimentalHeavyDropout
        };
        let gamma = if (k % 10) < 5 { 0.6 } else { 1.5 };
        let true_hr = [0.7, 0.8, 0.9, 1.0, 1.1][k % 5];
        Ok(Self::standard(censoring, gamma, true_hr))
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || !self.n.is_multiple_of(2) {
            return Err(invalid(format!("n must be positive and even, got {}", self.n)));
        }
        for (name, v) in [
            ("true_hr", self.true_hr),
            ("gamma", self.gamma),
            ("lambda", self.lambda),
            ("t_max", self.t_max),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if !self.covariate_log_hr.is_finite() {
            return Err(invalid("covariate_log_hr must be finite"));
        }
        if !(self.dropout_scale >= 0.0 && self.dropout_scale.is_finite()) {
            return Err(invalid(format!(
                "dropout_scale must be nonnegative, got {}",
                self.dropout_scale
            )));
        }
        if self.n_trials == 0 {
            return Err(invalid("n_trials must be at least 1"));
        }
        Ok(())
    }

    /// Event-time rate multiplier `lambda * exp(linear predictor)`.
    pub fn event_rate(&self, arm: Arm, x: f64) -> f64 {
        let a = arm.indicator() as f64;
        self.lambda * (self.true_hr.ln() * a + self.covariate_log_hr * x).exp()
    }

    pub fn dropout_rate(&self, arm: Arm, x: f64) -> f64 {
        self.dropout_scale * self.lambda * self.scenario.linear_predictor(arm, x).exp()
    }

    /// Inverse-transform event time for a uniform draw `u` in (0, 1).
    pub fn event_time(&self, arm: Arm, x: f64, u: f64) -> f64 {
        (-u.ln() / self.event_rate(arm, x)).powf(self.gamma.recip())
    }
}

/// Uncensored event time, dropout time and covariate of one subject.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatentSubject {
    pub arm: Arm,
    pub x: f64,
    pub event_time: f64,
    pub dropout_time: f64,
}

impl LatentSubject {
    /// Observed record. Ties go to the event over dropout and to dropout over
    /// the administrative cutoff.
    pub fn observe(&self, id: String, t_max: f64) -> SubjectRecord {
        let (time, event, reason) = if self.event_time <= self.dropout_time && self.event_time <= t_max {
            (self.event_time, true, CensorReason::Administrative)
        } else if self.dropout_time <= t_max {
            (self.dropout_time, false, CensorReason::Dropout)
        } else {
            (t_max, false, CensorReason::Administrative)
        };
        SubjectRecord::new(id, self.arm, time, event, reason).with_covariate(self.x)
    }
}

fn open_uniform(rng: &mut impl Rng) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return u;
        }
    }
}

/// Latent times for trial `trial` (0-based). The first `n/2` subjects are
/// control, the rest experimental.
pub fn simulate_latent(config: &SimulationConfig, trial: u32) -> Result<Vec<LatentSubject>> {
    config.validate()?;
    let mut stream = rng::stream(config.seed, Domain::Trial, trial, 0);
    Ok((0..config.n)
        .map(|i| {
            let arm = if i < config.n / 2 {
                Arm::Control
            } else {
                Arm::Experimental
            };
            let x: f64 = stream.sample(StandardNormal);
            let event_time = config.event_time(arm, x, open_uniform(&mut stream));
            let rate = config.dropout_rate(arm, x);
            let e = -open_uniform(&mut stream).ln();
            let dropout_time = if rate > 0.0 { e / rate } else { f64::INFINITY };
            LatentSubject {
                arm,
                x,
                event_time,
                dropout_time,
            }
        })
        .collect())
}

fn subject_id(i: usize) -> String {
    format!("S{:05}", i + 1)
}

/// One simulated trial as observed data.
pub fn simulate_trial(config: &SimulationConfig, trial: u32) -> Result<TrialDataset> {
    let records = simulate_latent(config, trial)?
        .iter()
        .enumerate()
        .map(|(i, s)| s.observe(subject_id(i), config.t_max))
        .collect();
    TrialDataset::new(records, config.t_max)
}

/// The same trial without dropout: every subject followed to event or cutoff.
pub fn simulate_complete_trial(config: &SimulationConfig, trial: u32) -> Result<TrialDataset> {
    let records = simulate_latent(config, trial)?
        .iter()
        .enumerate()
        .map(|(i, s)| {
            LatentSubject {
                dropout_time: f64::INFINITY,
                ..*s
            }
            .observe(subject_id(i), config.t_max)
        })
        .collect();
    TrialDataset::new(records, config.t_max)
}

/// Per-trial statistics feeding a [`ScenarioSummary`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialStats {
    pub estimate: HrEstimate,
    pub dropout_ctr_pct: f64,
    pub dropout_exp_pct: f64,
}

pub fn trial_stats(dataset: &TrialDataset) -> Result<TrialStats> {
    Ok(TrialStats {
        estimate: cox_fit(dataset)?,
        dropout_ctr_pct: dataset.dropout_pct(Arm::Control),
        dropout_exp_pct: dataset.dropout_pct(Arm::Experimental),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScenarioSummary {
    /// exp(mean log HR) over trials.
    pub mean_obs_hr: f64,
    /// Trials whose upper 95% limit is below 1.
    pub signif_pct: f64,
    pub dropout_ctr_pct: f64,
    pub dropout_exp_pct: f64,
    pub n_trials: usize,
    /// Trials whose Cox fit failed; excluded from the other fields.
    pub n_failed: usize,
}

pub fn summarize_scenario(config: &SimulationConfig) -> Result<ScenarioSummary> {
    config.validate()?;
    let results: Vec<Result<TrialStats>> = (0..config.n_trials as u32)
        .into_par_iter()
        .map(|t| trial_stats(&simulate_trial(config, t)?))
        .collect();
    let mut stats = Vec::with_capacity(results.len());
    let mut n_failed = 0;
    for (t, r) in results.into_iter().enumerate() {
        match r {
            Ok(s) => stats.push(s),
            Err(e) => {
                warn!("trial {t}: dropped ({e})");
                n_failed += 1;
            }
        }
    }
    if stats.is_empty() {
        return Err(invalid("every simulated trial failed to fit"));
    }
    let k = stats.len() as f64;
    let mean = |f: &dyn Fn(&TrialStats) -> f64| stats.iter().map(f).sum::<f64>() / k;
    Ok(ScenarioSummary {
        mean_obs_hr: mean(&|s| s.estimate.log_hr).exp(),
        signif_pct: 100.0 * stats.iter().filter(|s| s.estimate.ci_high < 1.0).count() as f64 / k,
        dropout_ctr_pct: mean(&|s| s.dropout_ctr_pct),
        dropout_exp_pct: mean(&|s| s.dropout_exp_pct),
        n_trials: stats.len(),
        n_failed,
    })
}

/// Where one trial tipped.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TrialTipping {
    /// Tipped at this grid value; `already` when it was the first value
    /// scanned (nothing to tip).
    At { value: f64, already: bool },
    /// Never tipped within the grid.
    NotReached,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TippingDistribution {
    pub per_trial: Vec<TrialTipping>,
    pub direction: StressDirection,
    /// Quartiles with not-reached trials placed beyond the grid's stress end
    /// (`+inf` for upward sweeps, `-inf` for downward ones).
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub n_not_reached: usize,
    pub n_already: usize,
}

/// Linear-interpolation quantile of sorted values (type 7).
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let (lo, hi) = (h.floor() as usize, h.ceil() as usize);
    if lo == hi || sorted[lo] == sorted[hi] {
        return sorted[lo];
    }
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Simulate `n_trials` trials and find each one's tipping point on `grid`.
///
/// Trial `t` uses imputation seed `child_seed(template.seed, t)`.
pub fn run_tipping_experiment(
    config: &SimulationConfig,
    template: &ImputationSpec,
    grid: &[f64],
    criterion: Criterion,
) -> Result<TippingDistribution> {
    config.validate()?;
    let direction = StressDirection::for_spec(template);
    let options = SweepOptions {
        criterion,
        direction: Some(direction),
        stop_at_tipping: true,
        km_arm: None,
    };
    let per_trial = (0..config.n_trials as u32)
        .into_par_iter()
        .map(|t| {
            let dataset = simulate_trial(config, t)?;
            let spec = ImputationSpec {
                seed: rng::child_seed(template.seed, t as u64),
                ..template.clone()
            };
            let sweep = run_sweep(&dataset, &spec, grid, &options)?;
            Ok(match sweep.tipping {
                Some(tp) => TrialTipping::At {
                    value: tp.value,
                    already: tp.previous.is_none(),
                },
                None => TrialTipping::NotReached,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let beyond = match direction {
        StressDirection::Increasing => f64::INFINITY,
        StressDirection::Decreasing => f64::NEG_INFINITY,
    };
    let mut values: Vec<f64> = per_trial
        .iter()
        .map(|t| match t {
            TrialTipping::At { value, .. } => *value,
            TrialTipping::NotReached => beyond,
        })
        .collect();
    values.sort_by(f64::total_cmp);
    Ok(TippingDistribution {
        q1: quantile(&values, 0.25),
        median: quantile(&values, 0.5),
        q3: quantile(&values, 0.75),
        n_not_reached: per_trial
            .iter()
            .filter(|t| matches!(t, TrialTipping::NotReached))
            .count(),
        n_already: per_trial
            .iter()
            .filter(|t| matches!(t, TrialTipping::At { already: true, .. }))
            .count(),
        per_trial,
        direction,
    })
}
