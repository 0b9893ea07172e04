//! Choosing which arm to stress and how, from the dropout imbalance.

use std::fmt;

use anyhow::{bail, Result};
use serde::Serialize;

use tipping_core::imputation::Method;
use tipping_core::survival::{Arm, TrialDataset};

/// Default relative tolerance: rates within 10% of the larger one are balanced.
pub const DEFAULT_TOLERANCE: f64 = 0.10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Imbalance {
    ControlHeavier,
    ExperimentalHeavier,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Recommendation {
    pub method: Method,
    pub target_arm: Arm,
    /// Parameter range to sweep, in scan order.
    pub sweep: &'static str,
    pub rationale: &'static str,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlanRecommendation {
    pub imbalance: Imbalance,
    pub dropout_control_pct: f64,
    pub dropout_experimental_pct: f64,
    pub recommended: Vec<Recommendation>,
}

impl fmt::Display for PlanRecommendation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "dropout: control {:.1}%, experimental {:.1}% -> {:?}",
            self.dropout_control_pct, self.dropout_experimental_pct, self.imbalance
        )?;
        for (i, r) in self.recommended.iter().enumerate() {
            writeln!(
                f,
                "{}. {} on the {:?} arm, sweep {}: {}",
                i + 1,
                r.method.label(),
                r.target_arm,
                r.sweep,
                r.rationale
            )?;
        }
        Ok(())
    }
}

fn control_heavier() -> Vec<Recommendation> {
    vec![
        Recommendation {
            method: Method::DeterministicAssign,
            target_arm: Arm::Control,
            sweep: "kappa 0 -> 1",
            rationale: "extend a growing share of control dropouts to the cutoff event-free",
        },
        Recommendation {
            method: Method::ModelBasedWeibull,
            target_arm: Arm::Control,
            sweep: "delta 1 -> 0",
            rationale: "deflate the post-dropout hazard of control dropouts",
        },
        Recommendation {
            method: Method::DonorSample,
            target_arm: Arm::Control,
            sweep: "kappa 0 -> 1",
            rationale: "give control dropouts outcomes drawn from the best observed outcomes",
        },
    ]
}

fn experimental_heavier() -> Vec<Recommendation> {
    vec![
        Recommendation {
            method: Method::DeterministicAssign,
            target_arm: Arm::Experimental,
            sweep: "kappa 0 -> 1",
            rationale: "turn a growing share of experimental dropouts into events at dropout",
        },
        Recommendation {
            method: Method::ModelBasedWeibull,
            target_arm: Arm::Experimental,
            sweep: "delta 1 -> up",
            rationale: "inflate the post-dropout hazard of experimental dropouts",
        },
        Recommendation {
            method: Method::DonorSample,
            target_arm: Arm::Experimental,
            sweep: "kappa 0 -> 1",
            rationale: "give experimental dropouts outcomes drawn from the worst observed outcomes",
        },
    ]
}

/// Recommend a stress direction from arm-wise dropout percentages.
///
/// The rates count as balanced when they differ by at most `tolerance` times
/// the larger one; that case is an error, since neither arm is the natural
/// one to stress.
pub fn plan(dropout_control_pct: f64, dropout_experimental_pct: f64, tolerance: f64) -> Result<PlanRecommendation> {
    for v in [dropout_control_pct, dropout_experimental_pct] {
        if !(0.0..=100.0).contains(&v) {
            bail!("dropout percentage must be in [0, 100], got {v}");
        }
    }
    if !(0.0..1.0).contains(&tolerance) {
        bail!("tolerance must be in [0, 1), got {tolerance}");
    }
    let larger = dropout_control_pct.max(dropout_experimental_pct);
    if (dropout_control_pct - dropout_experimental_pct).abs() <= tolerance * larger {
        bail!(
            "dropout is balanced ({dropout_control_pct}% vs {dropout_experimental_pct}%): justify any single-arm stress \
             choice, or run both directions"
        );
    }
    let (imbalance, recommended) = if dropout_control_pct > dropout_experimental_pct {
        (Imbalance::ControlHeavier, control_heavier())
    } else {
        (Imbalance::ExperimentalHeavier, experimental_heavier())
    };
    Ok(PlanRecommendation {
        imbalance,
        dropout_control_pct,
        dropout_experimental_pct,
        recommended,
    })
}

pub fn plan_dataset(dataset: &TrialDataset, tolerance: f64) -> Result<PlanRecommendation> {
    plan(
        dataset.dropout_pct(Arm::Control),
        dataset.dropout_pct(Arm::Experimental),
        tolerance,
    )
}
