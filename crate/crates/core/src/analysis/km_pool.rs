use crate::survival::KmCurve;

const CLAMP: f64 = 1e-10;

/// Survival curve pooled across imputations on the cloglog scale.
#[derive(Debug, Clone, PartialEq)]
pub struct PooledKmCurve {
    pub times: Vec<f64>,
    pub survival: Vec<f64>,
    pub per_imputation: Option<Vec<KmCurve>>,
}

impl PooledKmCurve {
    /// Step evaluation, right-continuous, 1 before the first grid time.
    pub fn survival_at(&self, t: f64) -> f64 {
        let k = self.times.partition_point(|&s| s <= t);
        if k == 0 {
            1.0
        } else {
            self.survival[k - 1]
        }
    }
}

/// Sorted union of all event times across curves.
pub fn union_grid(curves: &[KmCurve]) -> Vec<f64> {
    let mut grid: Vec<f64> = curves.iter().flat_map(|c| c.times.iter().copied()).collect();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    grid
}

fn cloglog(s: f64) -> f64 {
    (-s.clamp(CLAMP, 1.0 - CLAMP).ln()).ln()
}

/// Pool curves at each grid time: average `log(-log S)` and back-transform
/// with `exp(-exp(.))`. Values are clamped to `[1e-10, 1 - 1e-10]` before
/// transforming; a time where every curve agrees exactly keeps that value.
/// `grid = None` uses the union of event times.
pub fn pool_km_curves(curves: &[KmCurve], grid: Option<&[f64]>, keep_individual: bool) -> PooledKmCurve {
    let times = match grid {
        Some(g) => g.to_vec(),
        None => union_grid(curves),
    };
    let survival = times
        .iter()
        .map(|&t| {
            let values: Vec<f64> = curves.iter().map(|c| c.survival_at(t)).collect();
            match values.first() {
                None => 1.0,
                Some(&v0) if values.iter().all(|&v| v == v0) => v0,
                Some(_) => {
                    let mean = values.iter().map(|&s| cloglog(s)).sum::<f64>() / values.len() as f64;
                    (-mean.exp()).exp()
                }
            }
        })
        .collect();
    PooledKmCurve {
        times,
        survival,
        per_imputation: keep_individual.then(|| curves.to_vec()),
    }
}
