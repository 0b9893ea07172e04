//! JSON run configuration. Unknown keys are rejected at every level.
//!
//! ```json
//! {
//!   "seed": 7,
//!   "dataset": { "path": "trial.csv" },
//!   "imputation": {
//!     "method": "model_based_weibull",
//!     "selection": { "target_arm": "control" },
//!     "sensitivity": 1.0,
//!     "m_imputations": 100,
//!     "seed": 7
//!   },
//!   "grid": { "start": 0.05, "stop": 1.0, "step": 0.05 },
//!   "outputs": { "sweep_csv": "sweep.csv", "km_svg": "km.svg" }
//! }
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Deserialize;

use tipping_core::analysis::Criterion;
use tipping_core::imputation::ImputationSpec;
use tipping_core::simulation::SimulationConfig;
use tipping_core::survival::Arm;

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Overrides the seeds inside `simulation` and `imputation`.
    pub seed: Option<u64>,
    pub dataset: Option<DatasetSource>,
    pub simulation: Option<SimulationConfig>,
    /// Template for sweeps; its `sensitivity` is replaced by each grid value.
    pub imputation: Option<ImputationSpec>,
    pub grid: Option<GridSpec>,
    #[serde(default)]
    pub criterion: Criterion,
    /// Arm whose pooled KM curves are written; defaults to the target arm.
    pub km_arm: Option<Arm>,
    #[serde(default)]
    pub stop_at_tipping: bool,
    #[serde(default)]
    pub outputs: OutputPaths,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSource {
    pub path: PathBuf,
    /// Overrides the file's cutoff directive.
    pub cutoff: Option<f64>,
}

/// Either explicit `values` or an inclusive `start`/`stop`/`step` range.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub values: Option<Vec<f64>>,
    pub start: Option<f64>,
    pub stop: Option<f64>,
    pub step: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputPaths {
    pub sweep_csv: Option<PathBuf>,
    pub km_csv: Option<PathBuf>,
    pub km_svg: Option<PathBuf>,
    pub table_csv: Option<PathBuf>,
    pub dataset_csv: Option<PathBuf>,
}

impl GridSpec {
    /// Ascending grid values. Range points are rounded to 12 decimals so
    /// `0.1 + 2 * 0.1` comes out as `0.3`.
    pub fn values(&self) -> Result<Vec<f64>> {
        let mut grid = match (&self.values, self.start, self.stop, self.step) {
            (Some(v), None, None, None) => v.clone(),
            (None, Some(start), Some(stop), Some(step)) => {
                if !(step > 0.0 && step.is_finite() && start.is_finite() && stop >= start) {
                    bail!("grid: need finite start <= stop and step > 0");
                }
                let n = ((stop - start) / step + 1e-9).floor() as usize;
                if n > 100_000 {
                    bail!("grid: {} points is too many", n + 1);
                }
                (0..=n)
                    .map(|i| ((start + i as f64 * step) * 1e12).round() / 1e12)
                    .collect()
            }
            _ => bail!("grid: give either 'values' or all of 'start', 'stop' and 'step'"),
        };
        grid.sort_by(f64::total_cmp);
        grid.dedup();
        if grid.is_empty() {
            bail!("grid is empty");
        }
        Ok(grid)
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let mut config: RunConfig = serde_json::from_str(text).context("parsing config")?;
        config.apply_seed();
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_json(&text).with_context(|| path.display().to_string())
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.seed = Some(seed);
        self.apply_seed();
    }

    fn apply_seed(&mut self) {
        if let Some(seed) = self.seed {
            if let Some(sim) = &mut self.simulation {
                sim.seed = seed;
            }
            if let Some(spec) = &mut self.imputation {
                spec.seed = seed;
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(sim) = &self.simulation {
            sim.validate().context("simulation")?;
        }
        if let Some(spec) = &self.imputation {
            spec.selection.validate().context("imputation.selection")?;
            if spec.m_imputations < 2 {
                bail!("imputation: m_imputations must be at least 2");
            }
        }
        if let Some(grid) = &self.grid {
            grid.values()?;
        }
        if let Some(ds) = &self.dataset {
            if let Some(c) = ds.cutoff {
                if !(c > 0.0 && c.is_finite()) {
                    bail!("dataset.cutoff must be positive, got {c}");
                }
            }
        }
        Ok(())
    }
}
