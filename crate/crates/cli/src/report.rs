//! CSV and SVG artifacts.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::Result;

use tipping_core::analysis::{PooledKmCurve, SensitivitySweep};
use tipping_core::simulation::{ScenarioSummary, SimulationConfig};
use tipping_core::survival::KmCurve;

use crate::io::write_file;

/// A survival step function tagged with where it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct NamedCurve {
    pub source: String,
    pub times: Vec<f64>,
    pub survival: Vec<f64>,
}

impl NamedCurve {
    pub fn from_km(source: impl Into<String>, curve: &KmCurve) -> Self {
        NamedCurve {
            source: source.into(),
            times: curve.times.clone(),
            survival: curve.survival.clone(),
        }
    }

    pub fn from_pooled(source: impl Into<String>, curve: &PooledKmCurve) -> Self {
        NamedCurve {
            source: source.into(),
            times: curve.times.clone(),
            survival: curve.survival.clone(),
        }
    }
}

/// `param,pooled_hr,ci_low,ci_high,tipped`, one row per evaluated grid value.
pub fn sweep_csv(sweep: &SensitivitySweep) -> String {
    let mut out = String::from("param,pooled_hr,ci_low,ci_high,tipped\n");
    for p in &sweep.points {
        let tipped = sweep.criterion.value(p) >= 1.0;
        writeln!(
            out,
            "{},{},{},{},{}",
            p.param,
            p.pooled_hr,
            p.ci_low,
            p.ci_high,
            u8::from(tipped)
        )
        .unwrap();
    }
    out
}

pub fn emit_sweep_csv(sweep: &SensitivitySweep, path: &Path) -> Result<()> {
    write_file(path, sweep_csv(sweep).as_bytes())
}

/// Long format `source,time,survival`.
pub fn km_csv(curves: &[NamedCurve]) -> String {
    let mut out = String::from("source,time,survival\n");
    for c in curves {
        for (t, s) in c.times.iter().zip(&c.survival) {
            writeln!(out, "{},{},{}", c.source, t, s).unwrap();
        }
    }
    out
}

pub fn emit_km_csv(curves: &[NamedCurve], path: &Path) -> Result<()> {
    write_file(path, km_csv(curves).as_bytes())
}

pub const SUMMARY_HEADER: &str =
    "label,censoring,gamma,true_hr,n,n_trials,mean_obs_hr,signif_pct,dropout_ctr_pct,dropout_exp_pct,n_failed\n";

/// One scenario summary row: mean observed HR, share of significant trials
/// and arm-wise dropout.
pub fn summary_row(label: &str, config: &SimulationConfig, s: &ScenarioSummary) -> String {
    let censoring = serde_json::to_value(config.scenario)
        .ok()
        .and_then(|v| v.as_str().map(str::to_owned))
        .unwrap_or_default();
    format!(
        "{label},{censoring},{},{},{},{},{:.4},{:.1},{:.1},{:.1},{}\n",
        config.gamma,
        config.true_hr,
        config.n,
        s.n_trials,
        s.mean_obs_hr,
        s.signif_pct,
        s.dropout_ctr_pct,
        s.dropout_exp_pct,
        s.n_failed
    )
}

/// Header plus one row per `(label, config, summary)`.
pub fn summary_csv(rows: &[(String, SimulationConfig, ScenarioSummary)]) -> String {
    let mut out = SUMMARY_HEADER.to_string();
    for (label, config, summary) in rows {
        out.push_str(&summary_row(label, config, summary));
    }
    out
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 50.0;

/// Style of a curve in the KM figure.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurveRole {
    Original,
    SweepPoint,
    Tipping,
}

impl CurveRole {
    fn style(self) -> &'static str {
        match self {
            CurveRole::Original => r##"stroke="#000000" stroke-width="2""##,
            CurveRole::SweepPoint => r##"stroke="#9a9a9a" stroke-width="1" stroke-opacity="0.7""##,
            CurveRole::Tipping => r##"stroke="#c0392b" stroke-width="2.5" stroke-dasharray="6 3""##,
        }
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Step-function KM figure: original curves, pooled curves at each sweep
/// point and the pooled curve at the tipping point, one `<path>` each.
pub fn km_svg(
    original: &[NamedCurve],
    sweep_points: &[NamedCurve],
    tipping: Option<&NamedCurve>,
    t_max: f64,
) -> String {
    let plot_w = WIDTH - 2.0 * MARGIN;
    let plot_h = HEIGHT - 2.0 * MARGIN;
    let x = |t: f64| MARGIN + plot_w * (t / t_max).clamp(0.0, 1.0);
    let y = |s: f64| MARGIN + plot_h * (1.0 - s.clamp(0.0, 1.0));

    let mut out = String::new();
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    )
    .unwrap();
    writeln!(out, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#).unwrap();
    let (x0, x1, y0, y1) = (x(0.0), x(t_max), y(0.0), y(1.0));
    writeln!(out, r#"<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>"#).unwrap();
    writeln!(out, r#"<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>"#).unwrap();
    writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle" font-size="12">months</text>"#,
        (x0 + x1) / 2.0,
        y0 + 35.0
    )
    .unwrap();
    writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="end" font-size="12">1</text>"#,
        x0 - 5.0,
        y1 + 4.0
    )
    .unwrap();
    writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="end" font-size="12">0</text>"#,
        x0 - 5.0,
        y0 + 4.0
    )
    .unwrap();
    writeln!(
        out,
        r#"<text x="{}" y="{}" font-size="12">{}</text>"#,
        x1 - 20.0,
        y0 + 18.0,
        t_max
    )
    .unwrap();

    let curves = original
        .iter()
        .map(|c| (c, CurveRole::Original))
        .chain(sweep_points.iter().map(|c| (c, CurveRole::SweepPoint)))
        .chain(tipping.map(|c| (c, CurveRole::Tipping)));
    for (curve, role) in curves {
        let mut d = format!("M{:.3} {:.3}", x(0.0), y(1.0));
        for (&t, &s) in curve.times.iter().zip(&curve.survival) {
            write!(d, " H{:.3} V{:.3}", x(t), y(s)).unwrap();
        }
        write!(d, " H{:.3}", x(t_max)).unwrap();
        writeln!(
            out,
            r#"<path d="{d}" fill="none" {}><title>{}</title></path>"#,
            role.style(),
            escape(&curve.source)
        )
        .unwrap();
    }
    out.push_str("</svg>\n");
    out
}

pub fn emit_km_svg(
    original: &[NamedCurve],
    sweep_points: &[NamedCurve],
    tipping: Option<&NamedCurve>,
    t_max: f64,
    path: &Path,
) -> Result<()> {
    write_file(path, km_svg(original, sweep_points, tipping, t_max).as_bytes())
}
