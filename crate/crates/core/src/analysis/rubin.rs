use crate::error::{Error, Result};
use crate::survival::HrEstimate;

const Z95: f64 = 1.96;

/// Rubin-pooled log hazard ratio at one sensitivity value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PooledEstimate {
    pub param: f64,
    pub pooled_log_hr: f64,
    pub within_var: f64,
    pub between_var: f64,
    pub total_var: f64,
    pub pooled_hr: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub m: usize,
}

impl PooledEstimate {
    pub fn pooled_se(&self) -> f64 {
        self.total_var.sqrt()
    }
}

/// Pool per-imputation log hazard ratios with Rubin's rules.
///
/// The between-imputation variance is taken on the log-HR scale, the same
/// scale as the pooled point estimate.
pub fn rubin_pool(param: f64, estimates: &[HrEstimate]) -> Result<PooledEstimate> {
    let m = estimates.len();
    if m < 2 {
        return Err(Error::TooFewImputations(m));
    }
    if estimates.iter().any(|e| !e.log_hr.is_finite() || !e.se.is_finite()) {
        return Err(Error::NonFiniteMle);
    }
    let mf = m as f64;
    let first = estimates[0];
    let identical = estimates
        .iter()
        .all(|e| e.log_hr.to_bits() == first.log_hr.to_bits() && e.se.to_bits() == first.se.to_bits());

    let (mean, within, between) = if identical {
        (first.log_hr, first.se * first.se, 0.0)
    } else {
        let mean = estimates.iter().map(|e| e.log_hr).sum::<f64>() / mf;
        let within = estimates.iter().map(|e| e.se * e.se).sum::<f64>() / mf;
        let between = estimates.iter().map(|e| (e.log_hr - mean).powi(2)).sum::<f64>() / (mf - 1.0);
        (mean, within, between)
    };
    let total = within + (1.0 + 1.0 / mf) * between;
    let half = Z95 * total.sqrt();
    Ok(PooledEstimate {
        param,
        pooled_log_hr: mean,
        within_var: within,
        between_var: between,
        total_var: total,
        pooled_hr: mean.exp(),
        ci_low: (mean - half).exp(),
        ci_high: (mean + half).exp(),
        m,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn est(log_hr: f64, se: f64) -> HrEstimate {
        HrEstimate::new(log_hr, se).unwrap()
    }

    #[test]
    fn identical_estimates() {
        let p = rubin_pool(0.0, &vec![est(0.3, 0.1); 7]).unwrap();
        assert_eq!(p.pooled_log_hr, 0.3);
        assert_eq!(p.between_var, 0.0);
        assert_eq!(p.total_var, 0.1 * 0.1);
        assert!((p.total_var - 0.01).abs() < 1e-15);
    }

    #[test]
    fn symmetric_pair() {
        let p = rubin_pool(0.0, &[est(0.5f64.ln(), 0.2), est(2.0f64.ln(), 0.2)]).unwrap();
        assert_eq!(p.pooled_hr, 1.0);
    }

    #[test]
    fn five_estimates_by_hand() {
        let es: Vec<_> = [-0.2, -0.1, 0.0, 0.1, 0.2].iter().map(|&l| est(l, 0.15)).collect();
        let p = rubin_pool(0.0, &es).unwrap();
        assert!((p.within_var - 0.0225).abs() < 1e-12);
        assert!((p.between_var - 0.025).abs() < 1e-12);
        assert!((p.total_var - 0.0525).abs() < 1e-12);
        let half = 1.96 * p.total_var.sqrt();
        assert!((p.ci_high - (p.pooled_log_hr + half).exp()).abs() < 1e-12);
    }

    #[test]
    fn one_estimate_is_error() {
        assert_eq!(rubin_pool(0.0, &[est(0.1, 0.1)]), Err(Error::TooFewImputations(1)));
    }
}
