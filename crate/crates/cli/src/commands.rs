//! The work behind each subcommand, returning text so the binary only has to
//! parse arguments and print.

use std::fmt::Write as _;

use anyhow::{Context, Result};

use tipping_core::analysis::{
    anchor_hr, compute_j2r_delta, kappa_event_rate_anchor, run_sweep, SensitivitySweep, SweepOptions,
};
use tipping_core::imputation::{ImputationSpec, SelectionCriteria};
use tipping_core::simulation::{simulate_trial, summarize_scenario, SimulationConfig};
use tipping_core::survival::{cox_fit, fit_exponential, fit_weibull, km_fit, reverse_km, Arm, TrialDataset};

use crate::report::{km_csv, km_svg, summary_csv, sweep_csv, NamedCurve};

fn arm_name(arm: Arm) -> &'static str {
    match arm {
        Arm::Control => "control",
        Arm::Experimental => "experimental",
    }
}

/// Summary block for the `fit` subcommand.
pub fn fit_text(dataset: &TrialDataset) -> Result<String> {
    let mut out = String::new();
    let cox = cox_fit(dataset).context("cox fit")?;
    writeln!(out, "n={} cutoff={}", dataset.len(), dataset.cutoff())?;
    writeln!(
        out,
        "cox hr={} ci_low={} ci_high={} log_hr={} se={}",
        cox.hr, cox.ci_low, cox.ci_high, cox.log_hr, cox.se
    )?;
    for arm in [Arm::Control, Arm::Experimental] {
        let records: Vec<_> = dataset.arm_records(arm).collect();
        let events = records.iter().filter(|r| r.event).count();
        writeln!(
            out,
            "{} n={} events={} dropout_pct={}",
            arm_name(arm),
            records.len(),
            events,
            dataset.dropout_pct(arm)
        )?;
        match fit_exponential(records.iter().copied()) {
            Ok(f) => writeln!(out, "{} exponential rate={} loglik={}", arm_name(arm), f.rate, f.loglik)?,
            Err(e) => writeln!(out, "{} exponential unavailable: {e}", arm_name(arm))?,
        }
        match fit_weibull(records.iter().copied()) {
            Ok(f) => writeln!(
                out,
                "{} weibull shape={} rate={} loglik={}",
                arm_name(arm),
                f.shape,
                f.rate,
                f.loglik
            )?,
            Err(e) => writeln!(out, "{} weibull unavailable: {e}", arm_name(arm))?,
        }
    }
    Ok(out)
}

/// Per-arm KM curves, or reverse KM (censoring distribution) curves.
pub fn km_curves(dataset: &TrialDataset, reverse: bool) -> Result<Vec<NamedCurve>> {
    [Arm::Control, Arm::Experimental]
        .into_iter()
        .map(|arm| {
            let records = dataset.arm_records(arm);
            let (curve, tag) = if reverse {
                (reverse_km(records)?, format!("reverse:{}", arm_name(arm)))
            } else {
                (km_fit(records)?, arm_name(arm).to_string())
            };
            Ok(NamedCurve::from_km(tag, &curve))
        })
        .collect()
}

/// Anchor values for judging a tipping point. `tipping_delta` adds the
/// implied cross-arm HR of imputed subjects.
pub fn anchors_text(dataset: &TrialDataset, target_arm: Arm, tipping_delta: Option<f64>) -> Result<String> {
    let mut out = String::new();
    let reference = cox_fit(dataset).context("cox fit")?.hr;
    writeln!(out, "anchor reference_hr={reference}")?;
    if let Some(delta) = tipping_delta {
        writeln!(
            out,
            "anchor hr_vs_other_arm delta={delta} value={}",
            anchor_hr(delta, reference)?
        )?;
    }
    let j2r = fit_exponential(dataset.arm_records(Arm::Experimental))
        .and_then(|e| compute_j2r_delta(&e, &fit_exponential(dataset.arm_records(Arm::Control))?));
    match j2r {
        Ok(d) => writeln!(out, "anchor j2r_delta={d}")?,
        Err(e) => writeln!(out, "anchor j2r_delta=NA reason={e}")?,
    }
    let selection = SelectionCriteria::dropouts(target_arm);
    for reference_arm in [Arm::Control, Arm::Experimental] {
        match kappa_event_rate_anchor(dataset, &selection, reference_arm) {
            Ok(k) => writeln!(
                out,
                "anchor kappa_event_rate target={} reference={} value={k}",
                arm_name(target_arm),
                arm_name(reference_arm)
            )?,
            Err(e) => writeln!(
                out,
                "anchor kappa_event_rate target={} reference={} value=NA reason={e}",
                arm_name(target_arm),
                arm_name(reference_arm)
            )?,
        }
    }
    Ok(out)
}

/// Everything a `tip` run produces.
#[derive(Debug, Clone)]
pub struct TipOutput {
    pub sweep: SensitivitySweep,
    /// Sweep table, tipping bracket and anchors.
    pub text: String,
    pub sweep_csv: String,
    pub km_csv: String,
    pub km_svg: String,
}

pub fn tip(
    dataset: &TrialDataset,
    template: &ImputationSpec,
    grid: &[f64],
    options: &SweepOptions,
) -> Result<TipOutput> {
    let km_arm = options.km_arm.unwrap_or(template.selection.target_arm);
    let options = SweepOptions {
        km_arm: Some(km_arm),
        ..options.clone()
    };
    let sweep = run_sweep(dataset, template, grid, &options)?;
    let table = sweep_csv(&sweep);

    let mut text = table.clone();
    match sweep.tipping {
        Some(tp) => {
            let previous = tp.previous.map_or("none".to_string(), |p| p.to_string());
            writeln!(
                text,
                "tipping method={} criterion={:?} value={} previous={previous}",
                template.method.label(),
                tp.criterion,
                tp.value
            )?;
        }
        None => writeln!(
            text,
            "tipping method={} value=none (not reached within grid)",
            template.method.label()
        )?,
    }
    let tip_delta = sweep
        .tipping
        .filter(|_| template.method.is_model_based())
        .map(|tp| tp.value);
    text.push_str(&anchors_text(dataset, template.selection.target_arm, tip_delta)?);

    let original = vec![NamedCurve::from_km(
        format!("original:{}", arm_name(km_arm)),
        &km_fit(dataset.arm_records(km_arm))?,
    )];
    let pooled: Vec<NamedCurve> = sweep
        .grid
        .iter()
        .zip(&sweep.km_curves)
        .map(|(g, c)| NamedCurve::from_pooled(format!("pooled:{g}"), c))
        .collect();
    let tipping_curve = sweep.tipping.and_then(|tp| {
        let k = sweep.grid.iter().position(|&g| g == tp.value)?;
        Some(NamedCurve::from_pooled(
            format!("tipping:{}", tp.value),
            &sweep.km_curves[k],
        ))
    });
    let mut all = original.clone();
    all.extend(pooled.iter().cloned());
    all.extend(tipping_curve.iter().cloned());

    Ok(TipOutput {
        km_csv: km_csv(&all),
        km_svg: km_svg(&original, &pooled, tipping_curve.as_ref(), dataset.cutoff()),
        sweep_csv: table,
        text,
        sweep,
    })
}

/// Scenario summary CSV for a list of labelled scenario configs.
pub fn summarize(configs: &[(String, SimulationConfig)]) -> Result<String> {
    let rows = configs
        .iter()
        .map(|(label, cfg)| {
            Ok((
                label.clone(),
                cfg.clone(),
                summarize_scenario(cfg).with_context(|| label.clone())?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(summary_csv(&rows))
}

/// Simulated trial `trial` of `config`.
pub fn simulate(config: &SimulationConfig, trial: u32) -> Result<TrialDataset> {
    Ok(simulate_trial(config, trial)?)
}
