use crate::error::{invalid, Result};
use crate::survival::parametric::ParametricFit;

/// Inverse-transform draw of an event time beyond `censor_time` under a
/// hazard scaled by `delta`.
///
/// The conditional survival past `c` is `exp(-delta * (H(t) - H(c)))`, so
/// `t = ((rate * c^shape - log(u) / delta) / rate)^(1 / shape)`. The result is
/// strictly greater than `c` for every `u < 1`.
pub fn sample_conditional_event_time(fit: &ParametricFit, censor_time: f64, delta: f64, u: f64) -> Result<f64> {
    if !(censor_time.is_finite() && censor_time >= 0.0) {
        return Err(invalid(format!(
            "censoring time must be nonnegative, got {censor_time}"
        )));
    }
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(invalid(format!("delta must be in (0, inf), got {delta}")));
    }
    if !(u > 0.0 && u < 1.0) {
        return Err(invalid(format!("uniform draw must be in (0, 1), got {u}")));
    }
    // extra cumulative hazard to accumulate beyond c
    let extra = -u.ln() / (delta * fit.rate);
    let t = if censor_time > 0.0 {
        // c * (1 + extra / c^shape)^(1/shape), written to keep precision when extra is tiny
        let base = censor_time.powf(fit.shape);
        censor_time * ((extra / base).ln_1p() / fit.shape).exp()
    } else {
        extra.powf(fit.shape.recip())
    };
    Ok(if t > censor_time { t } else { censor_time.next_up() })
}
