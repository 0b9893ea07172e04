use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use tipping_cli::commands;
use tipping_cli::config::RunConfig;
use tipping_cli::io::{read_dataset, write_dataset};
use tipping_cli::plan::{plan, plan_dataset, DEFAULT_TOLERANCE};
use tipping_cli::report::km_svg;
use tipping_core::analysis::SweepOptions;
use tipping_core::simulation::SimulationConfig;
use tipping_core::survival::{Arm, TrialDataset};

#[derive(Parser)]
#[command(
    name = "tipping",
    version,
    about = "Tipping-point sensitivity analysis for time-to-event trials"
)]
struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Log progress to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct DataArgs {
    /// Dataset CSV.
    #[arg(long)]
    data: PathBuf,
    /// Data cut-off in months, overriding the file's directive.
    #[arg(long)]
    cutoff: Option<f64>,
}

impl DataArgs {
    fn load(&self) -> Result<TrialDataset> {
        read_dataset(&self.data, self.cutoff)
    }
}

type LabelledConfigs = Vec<(String, SimulationConfig)>;

#[derive(Args)]
struct ScenarioArgs {
    /// JSON run config with a `simulation` section.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Numbered scenarios of the standard design (1-20), comma separated.
    #[arg(long, value_delimiter = ',')]
    scenario: Vec<usize>,
    /// Subjects per trial.
    #[arg(long)]
    n: Option<usize>,
    /// Trials per scenario.
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

impl ScenarioArgs {
    /// Labelled configs with flag overrides applied, plus the run config if any.
    fn configs(&self) -> Result<(LabelledConfigs, Option<RunConfig>)> {
        let run = self.config.as_deref().map(RunConfig::load).transpose()?;
        let mut configs = Vec::new();
        if let Some(sim) = run.as_ref().and_then(|r| r.simulation.clone()) {
            configs.push(("config".to_string(), sim));
        }
        for &k in &self.scenario {
            configs.push((format!("scenario{k}"), SimulationConfig::numbered(k)?));
        }
        if configs.is_empty() {
            bail!("no scenario: pass --scenario or a --config with a simulation section");
        }
        for (_, cfg) in &mut configs {
            if let Some(n) = self.n {
                cfg.n = n;
            }
            if let Some(t) = self.trials {
                cfg.n_trials = t;
            }
            if let Some(s) = self.seed {
                cfg.seed = s;
            }
            cfg.validate()?;
        }
        Ok((configs, run))
    }
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one trial and write it as a dataset CSV.
    Simulate {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Trial index within the scenario.
        #[arg(long, default_value_t = 0)]
        trial: u32,
        /// Output file (default: stdout).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Simulate many trials per scenario and write one summary row each.
    Summarize {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Cox and parametric fits of a dataset.
    Fit {
        #[command(flatten)]
        data: DataArgs,
    },
    /// Kaplan-Meier curves per arm.
    Km {
        #[command(flatten)]
        data: DataArgs,
        /// Censoring-time distribution instead of survival.
        #[arg(long)]
        reverse: bool,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Recommend which arm to stress and how.
    Plan {
        #[arg(long, conflicts_with_all = ["dropout_control", "dropout_experimental"])]
        data: Option<PathBuf>,
        #[arg(long)]
        cutoff: Option<f64>,
        /// Declared control dropout percentage.
        #[arg(long, requires = "dropout_experimental")]
        dropout_control: Option<f64>,
        /// Declared experimental dropout percentage.
        #[arg(long, requires = "dropout_control")]
        dropout_experimental: Option<f64>,
        /// Relative difference below which dropout counts as balanced.
        #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
        tolerance: f64,
        #[arg(long)]
        json: bool,
    },
    /// Run a sensitivity sweep and report the tipping point.
    Tip {
        /// JSON run config with `imputation` and `grid` sections.
        #[arg(long)]
        config: PathBuf,
        /// Dataset CSV, overriding the config's dataset.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        cutoff: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        /// Grid values, comma separated, overriding the config's grid.
        #[arg(long, value_delimiter = ',')]
        grid: Vec<f64>,
        #[arg(long)]
        sweep_csv: Option<PathBuf>,
        #[arg(long)]
        km_csv: Option<PathBuf>,
        #[arg(long)]
        km_svg: Option<PathBuf>,
    },
    /// Reference values for judging a tipping point.
    Anchors {
        #[command(flatten)]
        data: DataArgs,
        /// Arm whose dropouts are imputed.
        #[arg(long, value_parser = parse_arm, default_value = "experimental")]
        target_arm: Arm,
        /// Sensitivity delta to translate into a cross-arm hazard ratio.
        #[arg(long)]
        delta: Option<f64>,
    },
}

fn parse_arm(s: &str) -> Result<Arm, String> {
    match s {
        "control" | "0" => Ok(Arm::Control),
        "experimental" | "1" => Ok(Arm::Experimental),
        _ => Err(format!("unknown arm {s:?} (control or experimental)")),
    }
}

fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { scenario, trial, out } => {
            let (configs, run) = scenario.configs()?;
            let [(_, config)] = configs.as_slice() else {
                bail!("simulate takes exactly one scenario");
            };
            let dataset = commands::simulate(config, trial)?;
            let out = out.or_else(|| run.and_then(|r| r.outputs.dataset_csv));
            match out {
                Some(path) => write_dataset(&dataset, &path)?,
                None => emit(None, &tipping_cli::io::format_dataset(&dataset))?,
            }
        }
        Command::Summarize { scenario, out } => {
            let (configs, run) = scenario.configs()?;
            let table = commands::summarize(&configs)?;
            let out = out.or_else(|| run.and_then(|r| r.outputs.table_csv));
            emit(out.as_deref(), &table)?;
        }
        Command::Fit { data } => emit(None, &commands::fit_text(&data.load()?)?)?,
        Command::Km {
            data,
            reverse,
            out,
            svg,
        } => {
            let dataset = data.load()?;
            let curves = commands::km_curves(&dataset, reverse)?;
            if let Some(path) = svg {
                emit(Some(&path), &km_svg(&curves, &[], None, dataset.cutoff()))?;
            }
            emit(out.as_deref(), &tipping_cli::report::km_csv(&curves))?;
        }
        Command::Plan {
            data,
            cutoff,
            dropout_control,
            dropout_experimental,
            tolerance,
            json,
        } => {
            let recommendation = match (data, dropout_control, dropout_experimental) {
                (Some(path), _, _) => plan_dataset(&read_dataset(&path, cutoff)?, tolerance)?,
                (None, Some(c), Some(e)) => plan(c, e, tolerance)?,
                _ => bail!("plan needs --data or both --dropout-control and --dropout-experimental"),
            };
            if json {
                emit(None, &(serde_json::to_string_pretty(&recommendation)? + "\n"))?;
            } else {
                emit(None, &recommendation.to_string())?;
            }
        }
        Command::Tip {
            config,
            data,
            cutoff,
            seed,
            grid,
            sweep_csv,
            km_csv,
            km_svg,
        } => {
            let mut run = RunConfig::load(&config)?;
            if let Some(s) = seed {
                run.set_seed(s);
            }
            let dataset = match (data, &run.dataset, &run.simulation) {
                (Some(path), _, _) => read_dataset(&path, cutoff)?,
                (None, Some(src), _) => {
                    // relative dataset paths are taken from the config's directory
                    let base = config.parent().unwrap_or(Path::new("."));
                    read_dataset(&base.join(&src.path), cutoff.or(src.cutoff))?
                }
                (None, None, Some(sim)) => commands::simulate(sim, 0)?,
                (None, None, None) => bail!("tip needs a dataset: --data, or dataset/simulation in the config"),
            };
            let template = run
                .imputation
                .clone()
                .ok_or_else(|| anyhow!("config has no imputation section"))?;
            let grid = if grid.is_empty() {
                run.grid
                    .as_ref()
                    .ok_or_else(|| anyhow!("config has no grid and --grid not given"))?
                    .values()?
            } else {
                grid
            };
            let options = SweepOptions {
                criterion: run.criterion,
                direction: None,
                stop_at_tipping: run.stop_at_tipping,
                km_arm: run.km_arm,
            };
            let output = commands::tip(&dataset, &template, &grid, &options)?;
            let outputs = &run.outputs;
            for (path, text) in [
                (sweep_csv.or(outputs.sweep_csv.clone()), &output.sweep_csv),
                (km_csv.or(outputs.km_csv.clone()), &output.km_csv),
                (km_svg.or(outputs.km_svg.clone()), &output.km_svg),
            ] {
                if let Some(p) = path {
                    emit(Some(&p), text)?;
                }
            }
            emit(None, &output.text)?;
        }
        Command::Anchors {
            data,
            target_arm,
            delta,
        } => {
            emit(None, &commands::anchors_text(&data.load()?, target_arm, delta)?)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new()
        .filter_level(if cli.verbose {
            log::LevelFilter::Info
        } else {
            log::LevelFilter::Warn
        })
        .init();
    if let Some(n) = cli.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: worker pool: {e}");
            return ExitCode::FAILURE;
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let message = format!("{e:#}").replace('\n', " ");
            eprintln!("error: {message}");
            ExitCode::FAILURE
        }
    }
}
