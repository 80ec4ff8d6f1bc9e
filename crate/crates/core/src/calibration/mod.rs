//! Fitting free model parameters to published aggregate metrics.
//!
//! The objective simulates every referenced run with one fixed seed (common random
//! numbers), so it is a deterministic function of the parameters. Trial draws are cached
//! per stream key and reused across evaluations.

mod search;

pub use search::{minimize, SearchOptions, SearchOutcome};

use std::collections::HashMap;
use std::io::Read;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiments::{resolve_run, Experiment, RunSpec};
use crate::metrics::{aggregate_iter, Metric, MetricsSummary};
use crate::model::Model;
use crate::outcome::{PreparedProfile, TaskOutcome, TrialDraws};
use crate::taskgen::{Task, TaskSet};

/// The published values, bundled so reports work without extra files.
pub const PAPER_TARGETS_CSV: &str = include_str!("../../../../data/paper_targets.csv");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationTarget {
    pub experiment: Experiment,
    pub profile_id: String,
    pub metric: Metric,
    pub value: f64,
    pub weight: f64,
    pub tolerance: f64,
}

impl CalibrationTarget {
    pub fn validate(&self) -> Result<()> {
        let field = || {
            format!(
                "target {}:{}:{}",
                self.experiment, self.profile_id, self.metric
            )
        };
        if !self.value.is_finite() {
            return Err(Error::validation(field(), "value must be finite"));
        }
        if !(self.weight.is_finite() && self.weight >= 0.0) {
            return Err(Error::validation(field(), "weight must be >= 0"));
        }
        if !(self.tolerance.is_finite() && self.tolerance > 0.0) {
            return Err(Error::validation(field(), "tolerance must be > 0"));
        }
        Ok(())
    }
}

pub fn read_targets<R: Read>(reader: R, origin: &Path) -> Result<Vec<CalibrationTarget>> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut out = Vec::new();
    for row in rdr.deserialize() {
        let target: CalibrationTarget = row.map_err(|e| Error::parse(origin, e))?;
        target.validate()?;
        out.push(target);
    }
    Ok(out)
}

pub fn load_targets(path: &Path) -> Result<Vec<CalibrationTarget>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_targets(file, path)
}

pub fn paper_targets() -> Vec<CalibrationTarget> {
    read_targets(
        PAPER_TARGETS_CSV.as_bytes(),
        Path::new("data/paper_targets.csv"),
    )
    .expect("bundled targets parse")
}

/// A free parameter with its search box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FreeParam {
    pub path: String,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Residual {
    pub target: CalibrationTarget,
    pub simulated: f64,
    /// `simulated - target`.
    pub error: f64,
    /// `error / tolerance`.
    pub normalized: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationResult {
    pub model: Model,
    pub residuals: Vec<Residual>,
    pub total_loss: f64,
    pub evaluations: usize,
    /// Every normalized residual is within `[-1, 1]`.
    pub converged: bool,
}

/// Simulated summaries for the runs a target list references.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub summaries: HashMap<(Experiment, String), MetricsSummary>,
    pub residuals: Vec<Residual>,
    pub loss: f64,
}

/// Deterministic objective over a fixed task set, seed and target list.
pub struct Evaluator<'a> {
    tasks: &'a [Task],
    stress_mask: Vec<bool>,
    targets: Vec<CalibrationTarget>,
    /// Distinct (experiment, profile id) pairs in first-appearance order.
    runs: Vec<(Experiment, String)>,
    draws: HashMap<String, Vec<TrialDraws>>,
}

impl<'a> Evaluator<'a> {
    pub fn new(
        model: &Model,
        targets: &[CalibrationTarget],
        task_set: &'a TaskSet,
        seed: u64,
    ) -> Result<Self> {
        if targets.is_empty() {
            return Err(Error::validation("targets", "no calibration targets"));
        }
        if task_set.is_empty() {
            return Err(Error::validation("task_set", "no tasks to simulate"));
        }
        let mut runs: Vec<(Experiment, String)> = Vec::new();
        let mut draws = HashMap::new();
        for t in targets {
            t.validate()?;
            let key = (t.experiment, t.profile_id.clone());
            if runs.contains(&key) {
                continue;
            }
            let run = resolve_run(&model.catalog, t.experiment, &t.profile_id)?;
            crate::outcome::check_profile(&run.profile, &model.coefficients)?;
            let stream = run.profile.stream_key.clone();
            draws.entry(stream.clone()).or_insert_with(|| {
                task_set
                    .tasks
                    .par_iter()
                    .map(|task| TrialDraws::for_trial(seed, &stream, task.id))
                    .collect::<Vec<_>>()
            });
            runs.push(key);
        }
        let stress_mask: Vec<bool> = task_set.iter().map(Task::is_stress).collect();
        if targets.iter().any(|t| t.experiment == Experiment::Stress)
            && !stress_mask.contains(&true)
        {
            return Err(Error::validation(
                "task_set",
                "stress targets but no stress tasks",
            ));
        }
        Ok(Self {
            tasks: &task_set.tasks,
            stress_mask,
            targets: targets.to_vec(),
            runs,
            draws,
        })
    }

    pub fn targets(&self) -> &[CalibrationTarget] {
        &self.targets
    }

    fn simulate(&self, model: &Model, run: &RunSpec) -> Vec<TaskOutcome> {
        let prepared = PreparedProfile::new(&run.profile, &model.coefficients);
        let draws = &self.draws[&run.profile.stream_key];
        self.tasks
            .iter()
            .zip(draws)
            .map(|(task, d)| prepared.evaluate(task, d))
            .collect()
    }

    pub fn evaluate(&self, model: &Model) -> Result<Evaluation> {
        let specs = self
            .runs
            .iter()
            .map(|(e, id)| resolve_run(&model.catalog, *e, id))
            .collect::<Result<Vec<_>>>()?;
        let summaries = specs
            .par_iter()
            .map(|run| {
                let outcomes = self.simulate(model, run);
                if run.stress {
                    aggregate_iter(
                        outcomes
                            .iter()
                            .zip(&self.stress_mask)
                            .filter_map(|(o, keep)| keep.then_some(o)),
                    )
                } else {
                    aggregate_iter(&outcomes)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let summaries: HashMap<_, _> = self.runs.iter().cloned().zip(summaries).collect();
        let residuals: Vec<Residual> = self
            .targets
            .iter()
            .map(|t| {
                let simulated = summaries[&(t.experiment, t.profile_id.clone())].get(t.metric);
                let error = simulated - t.value;
                Residual {
                    target: t.clone(),
                    simulated,
                    error,
                    normalized: error / t.tolerance,
                }
            })
            .collect();
        let loss = weighted_loss(&residuals);
        Ok(Evaluation {
            summaries,
            residuals,
            loss,
        })
    }
}

/// Weighted sum of squared normalized residuals, accumulated in target order.
pub fn weighted_loss(residuals: &[Residual]) -> f64 {
    residuals
        .iter()
        .map(|r| r.target.weight * r.normalized * r.normalized)
        .sum()
}

pub fn loss(
    model: &Model,
    targets: &[CalibrationTarget],
    task_set: &TaskSet,
    seed: u64,
) -> Result<f64> {
    Ok(Evaluator::new(model, targets, task_set, seed)?
        .evaluate(model)?
        .loss)
}

/// Checks each free parameter against its sign constraint and the initial point against the box.
fn resolve_box(initial: &Model, params: &[FreeParam]) -> Result<Vec<(f64, f64)>> {
    params
        .iter()
        .map(|p| {
            let bound = initial.bound(&p.path)?;
            let (slo, shi) = bound.interval();
            if !(p.lo.is_finite() && p.hi.is_finite() && p.lo < p.hi) {
                return Err(Error::validation(
                    &p.path,
                    format!("invalid box [{}, {}]", p.lo, p.hi),
                ));
            }
            if p.lo < slo || p.hi > shi {
                return Err(Error::validation(
                    &p.path,
                    format!("box [{}, {}] exceeds {bound:?} constraint", p.lo, p.hi),
                ));
            }
            let x = initial.get(&p.path)?;
            if !(p.lo..=p.hi).contains(&x) {
                return Err(Error::validation(
                    &p.path,
                    format!("initial value {x} outside box [{}, {}]", p.lo, p.hi),
                ));
            }
            Ok((p.lo, p.hi))
        })
        .collect()
}

fn apply(
    initial: &Model,
    params: &[FreeParam],
    unit: &[f64],
    boxes: &[(f64, f64)],
) -> Result<Model> {
    let values: Vec<(&str, f64)> = params
        .iter()
        .zip(unit)
        .zip(boxes)
        .map(|((p, u), (lo, hi))| (p.path.as_str(), lo + u.clamp(0.0, 1.0) * (hi - lo)))
        .collect();
    initial.with_params(&values)
}

/// Derivative-free search over `params` within their boxes. At most `budget` objective
/// evaluations; the first evaluates the initial model.
pub fn calibrate(
    initial: &Model,
    params: &[FreeParam],
    targets: &[CalibrationTarget],
    task_set: &TaskSet,
    budget: usize,
    seed: u64,
) -> Result<CalibrationResult> {
    calibrate_with(
        initial,
        params,
        targets,
        task_set,
        seed,
        &SearchOptions::with_budget(budget),
    )
}

pub fn calibrate_with(
    initial: &Model,
    params: &[FreeParam],
    targets: &[CalibrationTarget],
    task_set: &TaskSet,
    seed: u64,
    options: &SearchOptions,
) -> Result<CalibrationResult> {
    if options.budget == 0 {
        return Err(Error::validation("budget", "must be >= 1"));
    }
    let evaluator = Evaluator::new(initial, targets, task_set, seed)?;
    let boxes = resolve_box(initial, params)?;
    let x0: Vec<f64> = params
        .iter()
        .zip(&boxes)
        .map(|(p, (lo, hi))| Ok((initial.get(&p.path)? - lo) / (hi - lo)))
        .collect::<Result<_>>()?;

    let mut failure: Option<Error> = None;
    let objective = |unit: &[f64]| -> f64 {
        match apply(initial, params, unit, &boxes).and_then(|m| evaluator.evaluate(&m)) {
            Ok(eval) => eval.loss,
            Err(e) => {
                failure.get_or_insert(e);
                f64::INFINITY
            }
        }
    };
    let found = minimize(objective, &x0, options);
    if let Some(e) = failure {
        return Err(e);
    }
    let model = if found.value < found.initial_value {
        apply(initial, params, &found.x, &boxes)?
    } else {
        initial.clone()
    };
    let eval = evaluator.evaluate(&model)?;
    let converged = eval.residuals.iter().all(|r| r.normalized.abs() <= 1.0);
    Ok(CalibrationResult {
        model,
        total_loss: eval.loss,
        residuals: eval.residuals,
        evaluations: found.evaluations,
        converged,
    })
}
