//! Survival-analysis building blocks: the trial data model, Kaplan-Meier,
//! parametric MLE, Cox regression and conditional event-time sampling.

pub mod cox;
pub mod data;
pub mod km;
pub mod parametric;
pub mod sampling;

pub use cox::{cox_fit, cox_fit_observations, partial_loglik, HrEstimate};
pub use data::{Arm, CensorReason, Observation, SubjectRecord, TrialDataset};
pub use km::{km_fit, km_from_pairs, reverse_km, KmCurve};
pub use parametric::{
    cumhaz_eval, fit_exponential, fit_family, fit_weibull, hazard_eval, survival_eval, weibull_loglik, Family,
    ParametricFit,
};
pub use sampling::sample_conditional_event_time;
