//! Single-covariate (arm) Cox proportional hazards with Efron ties.

use crate::error::{Error, Result};
use crate::survival::data::{Arm, Observation, TrialDataset};

const Z95: f64 = 1.96;
const BETA_TOL: f64 = 1e-9;
const MAX_ITER: usize = 50;
/// |log HR| beyond this is treated as a diverging (monotone) likelihood.
const BETA_BOUND: f64 = 25.0;

/// Log hazard ratio (experimental vs control) with a 95% Wald interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HrEstimate {
    pub log_hr: f64,
    pub se: f64,
    pub hr: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl HrEstimate {
    pub fn new(log_hr: f64, se: f64) -> Result<Self> {
        if !log_hr.is_finite() || !(se.is_finite() && se > 0.0) {
            return Err(Error::NonFiniteMle);
        }
        let hr = log_hr.exp();
        Ok(HrEstimate {
            log_hr,
            se,
            hr,
            ci_low: hr * (-Z95 * se).exp(),
            ci_high: hr * (Z95 * se).exp(),
        })
    }
}

/// Risk-set summary at one distinct event time.
#[derive(Debug, Clone, Copy)]
struct EventTime {
    at_risk: [f64; 2],
    deaths: [f64; 2],
}

/// Collapse observations into per-event-time risk and death counts by arm.
fn risk_table(obs: &mut [Observation]) -> Vec<EventTime> {
    obs.sort_by(|a, b| b.time.total_cmp(&a.time));
    let mut table = Vec::new();
    let mut at_risk = [0.0f64; 2];
    let mut i = 0;
    while i < obs.len() {
        let t = obs[i].time;
        let mut deaths = [0.0f64; 2];
        while i < obs.len() && obs[i].time == t {
            let a = obs[i].arm.indicator() as usize;
            at_risk[a] += 1.0;
            if obs[i].event {
                deaths[a] += 1.0;
            }
            i += 1;
        }
        if deaths[0] + deaths[1] > 0.0 {
            table.push(EventTime { at_risk, deaths });
        }
    }
    table
}

/// Efron partial log-likelihood, score and information at `beta`.
fn efron_terms(table: &[EventTime], beta: f64) -> (f64, f64, f64) {
    let r = beta.exp();
    let (mut ll, mut score, mut info) = (0.0, 0.0, 0.0);
    for et in table {
        let d = et.deaths[0] + et.deaths[1];
        // x is the arm indicator, so S1 = S2 = n1 * exp(beta)
        let s0 = et.at_risk[0] + et.at_risk[1] * r;
        let s1 = et.at_risk[1] * r;
        let d0 = et.deaths[0] + et.deaths[1] * r;
        let d1 = et.deaths[1] * r;
        ll += beta * et.deaths[1];
        score += et.deaths[1];
        let k = d as usize;
        for l in 0..k {
            let f = l as f64 / d;
            let a0 = s0 - f * d0;
            let a1 = s1 - f * d1;
            let m = a1 / a0;
            ll -= a0.ln();
            score -= m;
            // a2 == a1 for a binary covariate
            info += m - m * m;
        }
    }
    (ll, score, info)
}

/// Partial log-likelihood (Efron) at a given log hazard ratio.
pub fn partial_loglik(observations: &[Observation], beta: f64) -> f64 {
    let mut obs = observations.to_vec();
    efron_terms(&risk_table(&mut obs), beta).0
}

pub fn cox_fit(dataset: &TrialDataset) -> Result<HrEstimate> {
    cox_fit_observations(&dataset.observations())
}

/// Newton-Raphson from 0 with step halving, convergence on `|step| < 1e-9`.
pub fn cox_fit_observations(observations: &[Observation]) -> Result<HrEstimate> {
    let mut obs = observations.to_vec();
    if !obs.iter().any(|o| o.arm == Arm::Control) || !obs.iter().any(|o| o.arm == Arm::Experimental) {
        return Err(Error::SingleArm);
    }
    if !obs.iter().any(|o| o.event) {
        return Err(Error::NoEvents);
    }
    let table = risk_table(&mut obs);

    let mut beta = 0.0;
    let (mut ll, mut score, mut info) = efron_terms(&table, beta);
    for _ in 0..MAX_ITER {
        if !(info > 0.0 && info.is_finite()) {
            return Err(Error::NonFiniteMle);
        }
        let mut step = score / info;
        let mut next = beta + step;
        let (mut ll_next, mut score_next, mut info_next) = efron_terms(&table, next);
        let mut halvings = 0;
        while !(ll_next.is_finite() && ll_next >= ll - 1e-12 * ll.abs().max(1.0)) && halvings < 30 {
            step *= 0.5;
            next = beta + step;
            (ll_next, score_next, info_next) = efron_terms(&table, next);
            halvings += 1;
        }
        beta = next;
        (ll, score, info) = (ll_next, score_next, info_next);
        if beta.abs() > BETA_BOUND {
            return Err(Error::NonFiniteMle);
        }
        if step.abs() < BETA_TOL {
            if !(info > 0.0 && info.is_finite()) {
                return Err(Error::NonFiniteMle);
            }
            return HrEstimate::new(beta, info.sqrt().recip());
        }
    }
    Err(Error::NonFiniteMle)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn obs(t: f64, event: bool, arm: Arm) -> Observation {
        Observation { time: t, event, arm }
    }

    #[test]
    fn ci_matches_se() {
        let e = HrEstimate::new(-0.3, 0.1).unwrap();
        assert!((e.ci_high - e.hr * (1.96f64 * 0.1).exp()).abs() < 1e-12);
        assert!(e.ci_low < e.hr && e.hr < e.ci_high);
    }

    #[test]
    fn monotone_likelihood_is_error() {
        // every experimental subject outlives every control event
        let data = vec![
            obs(1.0, true, Arm::Control),
            obs(2.0, true, Arm::Control),
            obs(3.0, false, Arm::Experimental),
            obs(4.0, false, Arm::Experimental),
        ];
        assert_eq!(cox_fit_observations(&data), Err(Error::NonFiniteMle));
    }

    #[test]
    fn degenerate_inputs() {
        let one_arm = vec![obs(1.0, true, Arm::Control), obs(2.0, true, Arm::Control)];
        assert_eq!(cox_fit_observations(&one_arm), Err(Error::SingleArm));
        let no_events = vec![obs(1.0, false, Arm::Control), obs(2.0, false, Arm::Experimental)];
        assert_eq!(cox_fit_observations(&no_events), Err(Error::NoEvents));
    }

    #[test]
    fn efron_matches_hand_computation_with_tie() {
        // at t=1 both subjects (one per arm) die out of a risk set of 3 + 1 more control
        let data = vec![
            obs(1.0, true, Arm::Control),
            obs(1.0, true, Arm::Experimental),
            obs(2.0, true, Arm::Control),
            obs(3.0, false, Arm::Experimental),
        ];
        let beta: f64 = 0.4;
        let r = beta.exp();
        // t=1: risk {C,E,C,E}: s0 = 2 + 2r; tie deaths d0 = 1 + r
        let t1 = beta - (2.0 + 2.0 * r).ln() - (2.0 + 2.0 * r - 0.5 * (1.0 + r)).ln();
        // t=2: risk {C,E}: s0 = 1 + r
        let t2 = -(1.0 + r).ln();
        assert!((partial_loglik(&data, beta) - (t1 + t2)).abs() < 1e-14);
    }
}
