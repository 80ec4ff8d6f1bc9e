//! Command-line driver for the archsim experiments.
//!
//! Exit codes: 0 success, 1 failed verdicts under `--strict` (or an invalid ACC document),
//! 2 configuration or I/O error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use archsim::architectures::{validate_acc, AccDocument};
use archsim::calibration::calibrate;
use archsim::experiments::{Experiment, ExperimentReport, Harness, HarnessConfig, OutputFormat};
use archsim::taskgen::generate_task_set;
use archsim::{Error, Result};

#[derive(Parser)]
#[command(
    name = "archsim",
    version,
    about = "Monte Carlo comparison of enterprise multi-agent architectures"
)]
struct Cli {
    /// Harness configuration file. Without one, built-in defaults are used.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the master and task generator seeds.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; overrides the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Exit with status 1 if any verdict or check fails.
    #[arg(long, global = true)]
    strict: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the task set and write it as CSV.
    GenTasks,
    RunComparison,
    RunAblation,
    RunSweep,
    RunStress,
    /// Run every configured experiment over one task set.
    RunAll,
    /// Fit the configured free parameters to the targets and write a model file.
    Calibrate {
        /// Where to write the fitted model (default: `calibration.output` of the config).
        #[arg(long)]
        output: Option<PathBuf>,
        /// Evaluation budget of every stage, overriding the config.
        #[arg(long)]
        budget: Option<usize>,
    },
    /// Check an agent capability contract document.
    ValidateAcc {
        file: PathBuf,
    },
    /// Run experiments and print their reports to stdout.
    Report {
        /// Experiments to include (default: those of the config).
        #[arg(long = "experiment")]
        experiments: Vec<String>,
        /// json, markdown or csv.
        #[arg(long, default_value = "json")]
        format: String,
    },
}

enum Outcome {
    Ok,
    Failed,
}

fn load_config(cli: &Cli) -> Result<HarnessConfig> {
    let mut config = match &cli.config {
        Some(path) => HarnessConfig::load(path)?,
        None => {
            log::warn!("no --config given; using built-in defaults and the uncalibrated model");
            HarnessConfig::default()
        }
    };
    if let Some(seed) = cli.seed {
        config = config.with_seed(seed);
    }
    if let Some(out) = &cli.out {
        config.output_dir = std::path::absolute(out).map_err(|e| Error::io(out, e))?;
    }
    if cli.jobs.is_some() {
        config.jobs = cli.jobs;
    }
    config.validate()?;
    Ok(config)
}

fn emit(report: &ExperimentReport, dir: &Path) -> Result<()> {
    for format in OutputFormat::ALL {
        for path in report.emit(dir, format)? {
            log::info!("wrote {}", path.display());
        }
    }
    for v in report.failed_verdicts() {
        log::warn!(
            "{} {}:{} simulated {:.3}, target {} +/- {}",
            report.experiment,
            v.profile_id,
            v.metric,
            v.simulated,
            v.target,
            v.tolerance
        );
    }
    for c in report.failed_checks() {
        log::warn!(
            "{} check {} failed: {}",
            report.experiment,
            c.name,
            c.detail
        );
    }
    Ok(())
}

fn run_experiments(config: HarnessConfig, experiments: &[Experiment]) -> Result<Outcome> {
    let dir = config.output_path();
    let harness = Harness::new(config)?;
    let mut ok = true;
    for &e in experiments {
        let report = harness.run(e)?;
        emit(&report, &dir)?;
        let passed = report.verdicts.iter().filter(|v| v.passed).count();
        let checks = report.checks.iter().filter(|c| c.passed).count();
        println!(
            "{:<10} targets {passed:>3}/{:<3} checks {checks:>2}/{:<2} {}",
            e.name(),
            report.verdicts.len(),
            report.checks.len(),
            if report.passed() { "PASS" } else { "FAIL" }
        );
        ok &= report.passed();
    }
    Ok(if ok { Outcome::Ok } else { Outcome::Failed })
}

fn execute(cli: &Cli) -> Result<Outcome> {
    if let Command::ValidateAcc { file } = &cli.command {
        let doc = AccDocument::load(file)?;
        let report = validate_acc(&doc);
        if report.is_valid() {
            println!("{}: valid", file.display());
            return Ok(Outcome::Ok);
        }
        for finding in &report.findings {
            println!("{}: {finding}", file.display());
        }
        return Ok(Outcome::Failed);
    }

    let config = load_config(cli)?;
    match &cli.command {
        Command::GenTasks => {
            let tasks = generate_task_set(&config.task_set)?;
            let dir = config.output_path();
            std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
            let path = dir.join("tasks.csv");
            let file = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
            tasks.write_csv(std::io::BufWriter::new(file))?;
            println!("wrote {} tasks to {}", tasks.len(), path.display());
            Ok(Outcome::Ok)
        }
        Command::RunComparison => run_experiments(config, &[Experiment::Comparison]),
        Command::RunAblation => run_experiments(config, &[Experiment::Ablation]),
        Command::RunSweep => run_experiments(config, &[Experiment::Sweep]),
        Command::RunStress => run_experiments(config, &[Experiment::Stress]),
        Command::RunAll => {
            let experiments = config.experiments.clone();
            run_experiments(config, &experiments)
        }
        Command::Calibrate { output, budget } => {
            let mut model = config.load_model()?;
            let targets = config.load_targets()?;
            let tasks = generate_task_set(&config.task_set)?;
            let mut plan = config.calibration.plan()?;
            if let Some(b) = budget {
                for stage in &mut plan {
                    stage.1 = *b;
                }
            }
            log::info!(
                "calibrating against {} targets in {} stages",
                targets.len(),
                plan.len()
            );
            let mut result = None;
            for (name, budget, params) in &plan {
                let r = calibrate(&model, params, &targets, &tasks, *budget, config.seed)?;
                log::info!(
                    "stage {name}: {} parameters, {} evaluations, loss {:.4}",
                    params.len(),
                    r.evaluations,
                    r.total_loss
                );
                model = r.model.clone();
                result = Some(r);
            }
            let result = result.expect("plan has at least one stage");
            let path = match output {
                Some(p) => p.clone(),
                None => config.resolve(&config.calibration.output),
            };
            result.model.save(&path)?;
            for r in &result.residuals {
                if r.normalized.abs() > 1.0 {
                    log::warn!(
                        "{}:{}:{} simulated {:.3}, target {} ({:+.2} tolerances)",
                        r.target.experiment,
                        r.target.profile_id,
                        r.target.metric,
                        r.simulated,
                        r.target.value,
                        r.normalized
                    );
                }
            }
            let within = result
                .residuals
                .iter()
                .filter(|r| r.normalized.abs() <= 1.0)
                .count();
            println!(
                "loss {:.4}; {within}/{} targets within tolerance; wrote {}",
                result.total_loss,
                result.residuals.len(),
                path.display()
            );
            Ok(if result.converged {
                Outcome::Ok
            } else {
                Outcome::Failed
            })
        }
        Command::Report {
            experiments,
            format,
        } => {
            let selected = if experiments.is_empty() {
                config.experiments.clone()
            } else {
                experiments
                    .iter()
                    .map(|s| s.parse())
                    .collect::<Result<Vec<Experiment>>>()?
            };
            let harness = Harness::new(config)?;
            let reports = selected
                .iter()
                .map(|&e| harness.run(e))
                .collect::<Result<Vec<_>>>()?;
            match format.as_str() {
                "json" => println!(
                    "{}",
                    serde_json::to_string_pretty(&reports).expect("reports serialize")
                ),
                "markdown" | "md" => {
                    for r in &reports {
                        print!("{}", r.to_markdown());
                    }
                }
                "csv" => {
                    for r in &reports {
                        print!("{}", r.to_csv());
                    }
                }
                other => {
                    return Err(Error::validation(
                        "format",
                        format!("unknown report format `{other}`"),
                    ))
                }
            }
            let ok = reports.iter().all(ExperimentReport::passed);
            Ok(if ok { Outcome::Ok } else { Outcome::Failed })
        }
        Command::ValidateAcc { .. } => unreachable!("handled above"),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::Failed) => {
            if cli.strict || matches!(cli.command, Command::ValidateAcc { .. }) {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            log::error!("{e}");
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
