//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.
//!
//! Run with `cargo test -p tipping-cli --test acceptance`.

use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::{Command, ExitCode};
use std::time::Instant;

use anyhow::{ensure, Context, Result};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};

use tipping_cli::commands;
use tipping_core::analysis::{anchor_hr, compute_j2r_delta, rubin_pool, run_sweep, Criterion, SweepOptions};
use tipping_core::imputation::{impute, ImputationSpec, Method, SelectionCriteria};
use tipping_core::simulation::{
    run_tipping_experiment, simulate_trial, summarize_scenario, CensoringScenario, SimulationConfig,
};
use tipping_core::survival::{
    cox_fit, cox_fit_observations, fit_exponential, fit_weibull, km_fit, weibull_loglik, Arm, CensorReason, HrEstimate,
    Observation, SubjectRecord,
};

/// Outcome of one criterion: `Ok(detail)` passes, `Err` fails with a reason.
type Check = fn() -> Result<String>;

// ---------------------------------------------------------------------------
// 1. Scenario summaries against the published reference rows

fn scenario_reference() -> Result<String> {
    // (scenario, mean observed HR, control dropout %, experimental dropout %)
    let reference = [
        (1, 0.67, 40.3, 18.8),
        (9, 0.91, 26.9, 11.5),
        (11, 0.61, 18.0, 38.9),
        (16, 0.66, 9.1, 24.5),
    ];
    let mut details = Vec::new();
    let mut misses = Vec::new();
    for (k, hr, ctr, exp) in reference {
        let mut cfg = SimulationConfig::numbered(k)?;
        cfg.n = 2000;
        cfg.n_trials = 20;
        let s = summarize_scenario(&cfg)?;
        let line = format!(
            "s{k}: hr {:.3} (ref {hr}) dropout {:.1}/{:.1} (ref {ctr}/{exp})",
            s.mean_obs_hr, s.dropout_ctr_pct, s.dropout_exp_pct
        );
        if (s.mean_obs_hr - hr).abs() > 0.03
            || (s.dropout_ctr_pct - ctr).abs() > 2.0
            || (s.dropout_exp_pct - exp).abs() > 2.0
        {
            misses.push(line.clone());
        }
        details.push(line);
    }
    ensure!(misses.is_empty(), "outside tolerance: {}", misses.join("; "));
    Ok(details.join("; "))
}

// ---------------------------------------------------------------------------
// 2. Qualitative trends of the tipping-point distribution

const TREND_TRIALS: usize = 10;
const TREND_M: usize = 100;

fn delta_grid() -> Vec<f64> {
    (1..=20).map(|i| i as f64 / 20.0).collect()
}

fn kappa_grid() -> Vec<f64> {
    (0..=20).map(|i| i as f64 / 20.0).collect()
}

fn median_tipping(scenario: usize, method: Method, target: Arm, grid: &[f64]) -> Result<f64> {
    let mut cfg = SimulationConfig::numbered(scenario)?;
    cfg.n_trials = TREND_TRIALS;
    let spec = ImputationSpec::new(method, SelectionCriteria::dropouts(target), grid[0], TREND_M, 2024);
    let dist = run_tipping_experiment(&cfg, &spec, grid, Criterion::UpperCi)?;
    Ok(dist.median)
}

fn trends() -> Result<String> {
    let deltas = delta_grid();
    let weibull = |k| median_tipping(k, Method::ModelBasedWeibull, Arm::Control, &deltas);
    let exponential = |k| median_tipping(k, Method::ModelBasedExponential, Arm::Control, &deltas);
    let kappa = |k| median_tipping(k, Method::DeterministicAssign, Arm::Experimental, &kappa_grid());

    // (a) scenario 1 is trueHR 0.7, scenario 4 trueHR 1.0; deflation means smaller delta
    let (a07, a10) = (weibull(1)?, weibull(4)?);
    // (b) scenario 1 has shape 0.6, scenario 6 shape 1.5, both trueHR 0.7
    let (w06, e06) = (a07, exponential(1)?);
    let (w15, e15) = (weibull(6)?, exponential(6)?);
    // (c) experimental-heavy dropout at trueHR 0.7: scenario 11 shape 0.6, scenario 16 shape 1.5
    let (k06, k15) = (kappa(11)?, kappa(16)?);

    let detail = format!(
        "(a) weibull delta {a07:.3} at HR0.7 vs {a10:.3} at HR1.0; (b) g0.6 exp {e06:.3} vs weib {w06:.3}, \
         g1.5 exp {e15:.3} vs weib {w15:.3}; (c) kappa {k06:.3} at g0.6 vs {k15:.3} at g1.5"
    );
    ensure!(a07 < a10, "(a) ordering wrong: {detail}");
    ensure!(e06 < w06 && e15 > w15, "(b) ordering wrong: {detail}");
    ensure!(k06 < k15, "(c) ordering wrong: {detail}");
    Ok(detail)
}

// ---------------------------------------------------------------------------
// 3. Extreme deltas reach the deterministic rules

fn extreme_equivalences() -> Result<String> {
    let ds = simulate_trial(&SimulationConfig::numbered(1)?, 0)?;
    let m = 200;
    let options = SweepOptions::default();

    let exp = SelectionCriteria::dropouts(Arm::Experimental);
    let huge = ImputationSpec::new(Method::ModelBasedWeibull, exp.clone(), 1e9, m, 31);
    let events = ImputationSpec::new(Method::DeterministicAssign, exp, 1.0, m, 31);
    let a = run_sweep(&ds, &huge, &[1e9], &options)?.points[0];
    let b = run_sweep(&ds, &events, &[1.0], &options)?.points[0];
    let diff = (a.pooled_log_hr - b.pooled_log_hr).abs();
    ensure!(
        diff <= 0.01,
        "delta 1e9 log-HR {} vs kappa 1 {} (diff {diff})",
        a.pooled_log_hr,
        b.pooled_log_hr
    );

    let ctrl = SelectionCriteria::dropouts(Arm::Control);
    let tiny = ImputationSpec::new(Method::ModelBasedWeibull, ctrl.clone(), 1e-9, m, 32);
    let extend = ImputationSpec::new(Method::DeterministicAssign, ctrl, 1.0, m, 32);
    let x = impute(&ds, &tiny, 0)?;
    let y = impute(&ds, &extend, 0)?;
    ensure!(x.len() == m && y.len() == m, "expected {m} imputations");
    let same = x
        .iter()
        .zip(&y)
        .filter(|(p, q)| p.materialize() == q.materialize())
        .count();
    ensure!(
        same == m,
        "delta 1e-9 matched extend-to-cutoff in {same} of {m} imputations"
    );
    Ok(format!(
        "log-HR diff {diff:.2e}; {same}/{m} identical extend-to-cutoff datasets"
    ))
}

// ---------------------------------------------------------------------------
// 4. Estimation oracles

fn control_records(pairs: &[(f64, bool)]) -> Vec<SubjectRecord> {
    pairs
        .iter()
        .enumerate()
        .map(|(i, &(t, e))| SubjectRecord::new(format!("r{i}"), Arm::Control, t, e, CensorReason::Dropout))
        .collect()
}

/// KM by enumerating the risk set at every distinct event time.
fn brute_km(pairs: &[(f64, bool)]) -> Vec<(f64, f64)> {
    let mut times: Vec<f64> = pairs.iter().filter(|p| p.1).map(|p| p.0).collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    let mut s = 1.0;
    times
        .into_iter()
        .map(|t| {
            let n = pairs.iter().filter(|p| p.0 >= t).count();
            let d = pairs.iter().filter(|p| p.1 && p.0 == t).count();
            s *= 1.0 - d as f64 / n as f64;
            (t, s)
        })
        .collect()
}

/// Efron partial log-likelihood written out subject by subject; `x` is the arm indicator.
fn naive_efron(obs: &[(f64, bool, f64)], beta: f64) -> f64 {
    let mut times: Vec<f64> = obs.iter().filter(|o| o.1).map(|o| o.0).collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    let mut ll = 0.0;
    for t in times {
        let risk: f64 = obs.iter().filter(|o| o.0 >= t).map(|o| (beta * o.2).exp()).sum();
        let dead: Vec<f64> = obs.iter().filter(|o| o.1 && o.0 == t).map(|o| o.2).collect();
        let tied: f64 = dead.iter().map(|&x| (beta * x).exp()).sum();
        let d = dead.len() as f64;
        for (l, &x) in dead.iter().enumerate() {
            ll += beta * x - (risk - l as f64 / d * tied).ln();
        }
    }
    ll
}

fn golden_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    while hi - lo > 1e-11 {
        let a = hi - g * (hi - lo);
        let b = lo + g * (hi - lo);
        if f(a) < f(b) {
            lo = a;
        } else {
            hi = b;
        }
    }
    0.5 * (lo + hi)
}

fn oracles() -> Result<String> {
    // exponential: closed form d / total time, bit for bit
    let trial = simulate_trial(&SimulationConfig::numbered(6)?, 0)?;
    let mut exp_checked = 0;
    for arm in [Arm::Control, Arm::Experimental] {
        let recs: Vec<&SubjectRecord> = trial.arm_records(arm).collect();
        let d = recs.iter().filter(|r| r.event).count() as f64;
        let total: f64 = recs.iter().map(|r| r.time).sum();
        let fit = fit_exponential(recs.iter().copied())?;
        ensure!(fit.rate == d / total, "exponential rate {} vs {}", fit.rate, d / total);
        exp_checked += 1;
    }

    // weibull: central-difference gradient in (log shape, log rate) at the fit
    let mut worst_grad = 0.0f64;
    for k in [1, 6, 11, 16] {
        let ds = simulate_trial(&SimulationConfig::numbered(k)?, 1)?;
        for arm in [Arm::Control, Arm::Experimental] {
            let recs: Vec<SubjectRecord> = ds.arm_records(arm).cloned().collect();
            let fit = fit_weibull(&recs)?;
            let h = 1e-5;
            let f = |a: f64, b: f64| weibull_loglik(a.exp(), b.exp(), &recs);
            let (a, b) = (fit.shape.ln(), fit.rate.ln());
            let ga = (f(a + h, b) - f(a - h, b)) / (2.0 * h);
            let gb = (f(a, b + h) - f(a, b - h)) / (2.0 * h);
            worst_grad = worst_grad.max(ga.abs()).max(gb.abs());
        }
    }
    ensure!(worst_grad < 1e-6, "weibull gradient {worst_grad:e}");

    // cox: 1-D search of the written-out partial likelihood on 6 subjects
    let obs = [
        (1.0, true, 0.0),
        (2.0, true, 1.0),
        (3.0, false, 0.0),
        (4.0, true, 1.0),
        (5.0, true, 0.0),
        (6.0, false, 1.0),
    ];
    let beta = golden_max(|b| naive_efron(&obs, b), -10.0, 10.0);
    let observations: Vec<Observation> = obs
        .iter()
        .map(|&(time, event, x)| Observation {
            time,
            event,
            arm: if x == 1.0 { Arm::Experimental } else { Arm::Control },
        })
        .collect();
    let cox = cox_fit_observations(&observations)?;
    let cox_diff = (cox.log_hr - beta).abs();
    ensure!(cox_diff < 1e-6, "cox log-HR {} vs search {beta}", cox.log_hr);

    // km: 200 random datasets of at most 25 records, tie-heavy times
    let mut runner = TestRunner::new(Config {
        cases: 200,
        failure_persistence: None,
        ..Config::default()
    });
    let strategy = prop::collection::vec((0u32..12, any::<bool>()), 1..=25);
    runner
        .run(&strategy, |raw| {
            let pairs: Vec<(f64, bool)> = raw.into_iter().map(|(t, e)| (f64::from(t) * 0.5, e)).collect();
            let curve = km_fit(&control_records(&pairs)).unwrap();
            let expected = brute_km(&pairs);
            prop_assert_eq!(curve.times.len(), expected.len());
            for (k, &(t, s)) in expected.iter().enumerate() {
                prop_assert_eq!(curve.times[k], t);
                prop_assert_eq!(curve.survival[k], s);
            }
            Ok(())
        })
        .map_err(|e| anyhow::anyhow!("km: {e}"))?;

    Ok(format!(
        "exponential exact on {exp_checked} arms; weibull max |grad| {worst_grad:.1e}; cox diff {cox_diff:.1e}; km 200/200"
    ))
}

// ---------------------------------------------------------------------------
// 5. Rubin's rules

fn rubin() -> Result<String> {
    let est = |l: f64, s: f64| HrEstimate::new(l, s);
    let same = rubin_pool(0.0, &[est(0.3, 0.1)?, est(0.3, 0.1)?, est(0.3, 0.1)?])?;
    ensure!(
        same.pooled_log_hr == 0.3 && same.between_var == 0.0,
        "identical: {same:?}"
    );
    ensure!(same.total_var == 0.1 * 0.1, "identical total_var {}", same.total_var);

    let sym = rubin_pool(0.0, &[est(0.5f64.ln(), 0.2)?, est(2.0f64.ln(), 0.2)?])?;
    ensure!(sym.pooled_hr == 1.0, "symmetric pooled HR {}", sym.pooled_hr);

    let five: Vec<HrEstimate> = [-0.2, -0.1, 0.0, 0.1, 0.2]
        .iter()
        .map(|&l| est(l, 0.15))
        .collect::<Result<_, _>>()?;
    let p = rubin_pool(0.0, &five)?;
    let err = (p.total_var - 0.0525).abs();
    ensure!(err < 1e-12, "total_var {} (error {err:e})", p.total_var);
    Ok(format!("identical exact; symmetric HR 1; total_var error {err:.1e}"))
}

// ---------------------------------------------------------------------------
// 6. Null calibration

fn null_calibration() -> Result<String> {
    // no dropout hazard, so follow-up ends only at the cut-off
    let mut cfg = SimulationConfig::standard(CensoringScenario::NonInformative, 0.6, 0.8);
    cfg.dropout_scale = 0.0;
    let ds = simulate_trial(&cfg, 1)?;
    ensure!(ds
        .records()
        .iter()
        .all(|r| r.event || r.reason == CensorReason::Administrative));
    let complete = cox_fit(&ds)?;

    let mut selection = SelectionCriteria::dropouts(Arm::Control);
    selection.reason_filter = [CensorReason::Administrative].into();
    let spec = ImputationSpec::new(Method::ModelBasedWeibull, selection, 1.0, 200, 8);
    let p = run_sweep(&ds, &spec, &[1.0], &SweepOptions::default())?.points[0];
    let mc_se = (p.between_var * (1.0 + 1.0 / p.m as f64)).sqrt();
    let diff = (p.pooled_log_hr - complete.log_hr).abs();
    ensure!(
        diff <= 3.0 * mc_se,
        "pooled HR {} vs complete {} (MC SE {mc_se:e})",
        p.pooled_hr,
        complete.hr
    );
    // draws past the cut-off are censored there again, so the imputations reproduce the data
    Ok(format!(
        "pooled HR {:.4} vs complete-data {:.4}, |diff| {diff:.1e} <= 3 x MC SE {mc_se:.1e}",
        p.pooled_hr, complete.hr
    ))
}

// ---------------------------------------------------------------------------
// 7. Anchors

fn anchors() -> Result<String> {
    let a = anchor_hr(0.51, 0.66)?;
    ensure!((a - 0.7727).abs() <= 1e-4, "anchor_hr(0.51, 0.66) = {a}");

    let mut cfg = SimulationConfig::standard(CensoringScenario::NonInformative, 1.0, 0.7);
    cfg.covariate_log_hr = 0.0;
    let ds = simulate_trial(&cfg, 0)?;
    let fe = fit_exponential(ds.arm_records(Arm::Experimental))?;
    let fc = fit_exponential(ds.arm_records(Arm::Control))?;
    let delta = compute_j2r_delta(&fe, &fc)?;
    let events = |arm| ds.arm_records(arm).filter(|r| r.event).count() as f64;
    // delta is a ratio of two rate MLEs, so its log has variance 1/d_c + 1/d_e
    let se_log = (1.0 / events(Arm::Control) + 1.0 / events(Arm::Experimental)).sqrt();
    let z = (delta / 1.43).ln() / se_log;
    ensure!(z.abs() <= 3.0, "j2r delta {delta} ({z:.2} SEs from 1.43)");
    Ok(format!("anchor_hr {a:.5}; j2r delta {delta:.4} ({z:.2} SEs from 1.43)"))
}

// ---------------------------------------------------------------------------
// 9. Determinism across worker counts

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .unwrap()
        .install(f)
}

fn pipeline_artifacts() -> Result<Vec<String>> {
    let mut sim = SimulationConfig::numbered(1)?;
    sim.n = 600;
    sim.n_trials = 4;
    let dataset = commands::simulate(&sim, 2)?;
    let mut out = vec![tipping_cli::io::format_dataset(&dataset)];
    out.push(commands::summarize(&[("s1".to_string(), sim.clone())])?);
    out.push(commands::fit_text(&dataset)?);
    let specs = [
        (
            ImputationSpec::new(
                Method::ModelBasedWeibull,
                SelectionCriteria::dropouts(Arm::Control),
                1.0,
                20,
                9,
            ),
            delta_grid(),
        ),
        (
            ImputationSpec::new(
                Method::DonorSample,
                SelectionCriteria::dropouts(Arm::Control),
                0.0,
                20,
                9,
            ),
            kappa_grid(),
        ),
    ];
    for (spec, grid) in &specs {
        let tip = commands::tip(&dataset, spec, grid, &SweepOptions::default())?;
        out.extend([tip.text, tip.sweep_csv, tip.km_csv, tip.km_svg]);
    }
    Ok(out)
}

fn binary_artifacts(workers: &str, dir: &std::path::Path) -> Result<Vec<Vec<u8>>> {
    let config = dir.join("run.json");
    let sub = dir.join(format!("w{workers}"));
    fs::create_dir_all(&sub)?;
    let path = |f: &str| sub.join(f).to_string_lossy().into_owned();
    let bin = env!("CARGO_BIN_EXE_tipping");
    let runs: [Vec<String>; 3] = [
        vec![
            "tip".into(),
            "--config".into(),
            config.to_string_lossy().into_owned(),
            "--sweep-csv".into(),
            path("sweep.csv"),
            "--km-csv".into(),
            path("km.csv"),
            "--km-svg".into(),
            path("km.svg"),
        ],
        vec![
            "summarize".into(),
            "--scenario".into(),
            "1,16".into(),
            "--trials".into(),
            "3".into(),
            "--n".into(),
            "400".into(),
        ],
        vec![
            "simulate".into(),
            "--scenario".into(),
            "11".into(),
            "--trial".into(),
            "4".into(),
        ],
    ];
    let mut out = Vec::new();
    for args in runs {
        let o = Command::new(bin).arg("--workers").arg(workers).args(&args).output()?;
        ensure!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
        out.push(o.stdout);
    }
    for f in ["sweep.csv", "km.csv", "km.svg"] {
        out.push(fs::read(sub.join(f)).with_context(|| f.to_string())?);
    }
    Ok(out)
}

fn determinism() -> Result<String> {
    let reference = in_pool(1, pipeline_artifacts)?;
    for threads in [2, 8] {
        let again = in_pool(threads, pipeline_artifacts)?;
        ensure!(
            again == reference,
            "library artifacts differ between 1 and {threads} threads"
        );
    }
    ensure!(
        pipeline_artifacts()? == reference,
        "library artifacts differ on the default pool"
    );

    let dir = tempfile::tempdir()?;
    fs::write(
        dir.path().join("run.json"),
        r#"{"seed": 11,
            "simulation": {"n": 600, "true_hr": 0.7, "gamma": 1.5, "lambda": 0.0866, "covariate_log_hr": -0.2877,
                           "scenario": "experimental_heavy_dropout", "t_max": 15, "n_trials": 1, "seed": 0},
            "imputation": {"method": "donor_sample", "selection": {"target_arm": "experimental"},
                           "sensitivity": 0.0, "m_imputations": 30, "seed": 0},
            "grid": {"start": 0.0, "stop": 1.0, "step": 0.1}}"#,
    )?;
    let bin_reference = binary_artifacts("1", dir.path())?;
    for workers in ["2", "8"] {
        ensure!(
            binary_artifacts(workers, dir.path())? == bin_reference,
            "binary artifacts differ at --workers {workers}"
        );
    }
    let bytes: usize =
        reference.iter().map(String::len).sum::<usize>() + bin_reference.iter().map(Vec::len).sum::<usize>();
    Ok(format!(
        "{} library and {} binary artifacts identical at 1/2/8 workers ({bytes} bytes)",
        reference.len(),
        bin_reference.len()
    ))
}

// ---------------------------------------------------------------------------

fn main() -> ExitCode {
    let criteria: [(u32, &str, Option<Check>); 9] = [
        (1, "scenario summary reference", Some(scenario_reference)),
        (2, "tipping trends", Some(trends)),
        (3, "extreme-parameter equivalences", Some(extreme_equivalences)),
        (4, "estimation oracles", Some(oracles)),
        (5, "rubin's rules", Some(rubin)),
        (6, "null calibration", Some(null_calibration)),
        (7, "anchors", Some(anchors)),
        (8, "case-study numbers", None),
        (9, "determinism", Some(determinism)),
    ];
    // keep panic messages out of the report; they are captured below
    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = Vec::new();
    for (n, name, check) in criteria {
        let Some(check) = check else {
            println!(
                "criterion {n} [{name}]: SKIP depends on reconstructed patient data; not reproducible, context only"
            );
            continue;
        };
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(anyhow::anyhow!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {n} [{name}]: PASS ({secs:.1}s) {detail}"),
            Err(e) => {
                println!("criterion {n} [{name}]: FAIL ({secs:.1}s) {e:#}");
                failed.push(n);
            }
        }
    }
    if failed.is_empty() {
        println!("acceptance: all criteria pass");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failing criteria {failed:?}");
        ExitCode::FAILURE
    }
}
