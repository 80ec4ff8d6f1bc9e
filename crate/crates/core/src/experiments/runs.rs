//! Running the experiments and judging them against targets and structural claims.

use rayon::prelude::*;

use super::config::HarnessConfig;
use super::report::{Check, ExperimentReport, ReportRow, Verdict};
use super::{resolve_run, Experiment, RunSpec};
use crate::architectures::{AblationTag, SweepFamily, SWEEP_AGENT_COUNTS};
use crate::calibration::CalibrationTarget;
use crate::error::{Error, Result};
use crate::metrics::{aggregate, aggregate_iter, compare, Metric, MetricsSummary};
use crate::model::Model;
use crate::outcome::{check_profile, simulate_run};
use crate::taskgen::{generate_task_set, Task, TaskSet};

/// Safe-success ordering of the comparison and stress tables, best first.
pub const EXPECTED_SAFE_ORDER: [&str; 5] = ["a4", "a2", "a3", "a0", "a1"];

/// A validated configuration with its model, targets and generated task set.
pub struct Harness {
    pub config: HarnessConfig,
    pub model: Model,
    pub targets: Vec<CalibrationTarget>,
    pub tasks: TaskSet,
    stress_mask: Vec<bool>,
    fingerprint: String,
    pool: Option<rayon::ThreadPool>,
}

struct RunResult {
    label: String,
    summary: MetricsSummary,
    /// Full-set summary of a stress run.
    full: Option<MetricsSummary>,
}

impl Harness {
    pub fn new(config: HarnessConfig) -> Result<Self> {
        config.validate()?;
        let model = config.load_model()?;
        let targets = config.load_targets()?;
        Self::with_model(config, model, targets)
    }

    pub fn with_model(
        config: HarnessConfig,
        model: Model,
        targets: Vec<CalibrationTarget>,
    ) -> Result<Self> {
        config.validate()?;
        let pool = match config.jobs {
            Some(n) => Some(
                rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build()
                    .map_err(|e| Error::validation("jobs", e.to_string()))?,
            ),
            None => None,
        };
        let tasks = generate_task_set(&config.task_set)?;
        let stress_mask = tasks.iter().map(Task::is_stress).collect();
        let fingerprint = config.fingerprint(&model, &targets);
        log::info!(
            "generated {} tasks (seed {}), model {}, fingerprint {}",
            tasks.len(),
            config.task_set.seed,
            &model.digest()[..12],
            &fingerprint[..12]
        );
        Ok(Self {
            config,
            model,
            targets,
            tasks,
            stress_mask,
            fingerprint,
            pool,
        })
    }

    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    fn install<R: Send>(&self, f: impl FnOnce() -> R + Send) -> R {
        match &self.pool {
            Some(pool) => pool.install(f),
            None => f(),
        }
    }

    fn label(experiment: Experiment, run: &RunSpec) -> String {
        match experiment {
            Experiment::Ablation => AblationTag::ALL
                .into_iter()
                .find(|t| run.profile.id.ends_with(&format!("-no-{}", t.slug())))
                .map(|t| t.label().to_string())
                .unwrap_or_else(|| "CEAD full".to_string()),
            _ => run.profile.name.clone(),
        }
    }

    fn simulate(&self, experiment: Experiment) -> Result<Vec<RunResult>> {
        let specs = experiment
            .profile_ids()
            .iter()
            .map(|id| resolve_run(&self.model.catalog, experiment, id))
            .collect::<Result<Vec<_>>>()?;
        for run in &specs {
            check_profile(&run.profile, &self.model.coefficients)?;
        }
        if experiment == Experiment::Stress && !self.stress_mask.contains(&true) {
            return Err(Error::validation(
                "task_set",
                "no task falls in the stress subset",
            ));
        }
        let seed = self.config.seed;
        self.install(|| {
            specs
                .par_iter()
                .map(|run| {
                    let outcomes = simulate_run(
                        &self.tasks.tasks,
                        &run.profile,
                        &self.model.coefficients,
                        seed,
                    );
                    let full = aggregate(&outcomes)?;
                    let (summary, full) = if run.stress {
                        let stressed = aggregate_iter(
                            outcomes
                                .iter()
                                .zip(&self.stress_mask)
                                .filter_map(|(o, keep)| keep.then_some(o)),
                        )?;
                        (stressed, Some(full))
                    } else {
                        (full, None)
                    };
                    log::debug!(
                        "{experiment} {}: safe {:.1}%",
                        run.profile.id,
                        summary.safe_pct
                    );
                    Ok(RunResult {
                        label: Self::label(experiment, run),
                        summary,
                        full,
                    })
                })
                .collect()
        })
    }

    pub fn run(&self, experiment: Experiment) -> Result<ExperimentReport> {
        log::info!(
            "running {experiment} ({} runs)",
            experiment.profile_ids().len()
        );
        let results = self.simulate(experiment)?;
        let summaries: Vec<MetricsSummary> = results.iter().map(|r| r.summary.clone()).collect();
        let find = |id: &str| summaries.iter().find(|s| s.arch_id == id);

        let mut verdicts = Vec::new();
        for t in self.targets.iter().filter(|t| t.experiment == experiment) {
            let s = find(&t.profile_id)
                .ok_or_else(|| Error::UnknownProfile(format!("{experiment}:{}", t.profile_id)))?;
            verdicts.push(Verdict::new(
                &t.profile_id,
                t.metric,
                t.value,
                s.get(t.metric),
                t.tolerance,
            ));
        }

        let checks = match experiment {
            Experiment::Comparison => vec![safe_order_check(&summaries)],
            Experiment::Ablation => ablation_checks(&summaries),
            Experiment::Sweep => sweep_checks(&summaries),
            Experiment::Stress => {
                let full: Vec<MetricsSummary> =
                    results.iter().filter_map(|r| r.full.clone()).collect();
                let mut checks = vec![safe_order_check(&summaries)];
                checks.extend(stress_checks(&summaries, &full));
                checks
            }
        };

        let report = ExperimentReport {
            experiment,
            seed: self.config.seed,
            task_seed: self.config.task_set.seed,
            task_count: self.tasks.len(),
            fingerprint: self.fingerprint.clone(),
            model_digest: self.model.digest(),
            rows: results
                .into_iter()
                .map(|r| ReportRow {
                    label: r.label,
                    summary: r.summary,
                })
                .collect(),
            verdicts,
            checks,
        };
        let passed = report.verdicts.iter().filter(|v| v.passed).count();
        let checks_passed = report.checks.iter().filter(|c| c.passed).count();
        log::info!(
            "{experiment}: {passed}/{} targets, {checks_passed}/{} checks",
            report.verdicts.len(),
            report.checks.len()
        );
        Ok(report)
    }

    /// The configured experiments, in configuration order.
    pub fn run_all(&self) -> Result<Vec<ExperimentReport>> {
        self.config
            .experiments
            .iter()
            .map(|&e| self.run(e))
            .collect()
    }
}

fn check(name: &str, passed: bool, detail: String) -> Check {
    Check {
        name: name.to_string(),
        detail,
        passed,
    }
}

fn value(summaries: &[MetricsSummary], id: &str, metric: Metric) -> f64 {
    summaries
        .iter()
        .find(|s| s.arch_id == id)
        .map(|s| s.get(metric))
        .unwrap_or(f64::NAN)
}

fn safe_order_check(summaries: &[MetricsSummary]) -> Check {
    let ranking = compare(summaries, Some(&EXPECTED_SAFE_ORDER));
    let order = &ranking.ranking(Metric::SafePct).order;
    check(
        "safe_order",
        ranking.safe_order_matches == Some(true),
        format!(
            "observed {} expected {}",
            order.join(" > "),
            EXPECTED_SAFE_ORDER.join(" > ")
        ),
    )
}

fn ratio_check(
    summaries: &[MetricsSummary],
    tag: AblationTag,
    metric: Metric,
    lo: f64,
    hi: f64,
) -> Check {
    let full = value(summaries, "a4", metric);
    let ablated = value(summaries, &format!("a4-no-{}", tag.slug()), metric);
    let ratio = ablated / full;
    check(
        &format!("{}_{}_ratio", tag.slug(), metric.name()),
        (lo..=hi).contains(&ratio),
        format!("{ablated:.2} / {full:.2} = {ratio:.3}, expected in [{lo}, {hi}]"),
    )
}

fn ablation_checks(s: &[MetricsSummary]) -> Vec<Check> {
    let gates = format!("a4-no-{}", AblationTag::HumanGates.slug());
    let verifier = format!("a4-no-{}", AblationTag::VerifierGates.slug());
    let gate_escalation = value(s, &gates, Metric::EscalationPct);
    let audit_drop = value(s, "a4", Metric::AuditPct) - value(s, &gates, Metric::AuditPct);
    let functional_drop =
        value(s, "a4", Metric::FunctionalPct) - value(s, &verifier, Metric::FunctionalPct);
    vec![
        ratio_check(
            s,
            AblationTag::RuntimePolicy,
            Metric::ViolationsPer1k,
            1.6,
            2.3,
        ),
        ratio_check(
            s,
            AblationTag::MemoryGovernance,
            Metric::PoisonPer1k,
            1.6,
            2.4,
        ),
        check(
            "gates_escalation_below_8",
            gate_escalation < 8.0,
            format!("escalation without gates {gate_escalation:.2}%"),
        ),
        check(
            "gates_audit_drop_5",
            audit_drop >= 5.0,
            format!("audit coverage drops {audit_drop:.2} pp"),
        ),
        check(
            "verifier_functional_drop_3",
            functional_drop >= 3.0,
            format!("functional success drops {functional_drop:.2} pp"),
        ),
    ]
}

fn curve(s: &[MetricsSummary], family: SweepFamily, metric: Metric) -> Vec<(u32, f64)> {
    SWEEP_AGENT_COUNTS
        .iter()
        .map(|&n| (n, value(s, &format!("{}_{n}", family.key()), metric)))
        .collect()
}

fn fmt_curve(points: &[(u32, f64)]) -> String {
    points
        .iter()
        .map(|(n, v)| format!("{n}:{v:.2}"))
        .collect::<Vec<_>>()
        .join(" ")
}

fn sweep_checks(s: &[MetricsSummary]) -> Vec<Check> {
    let mut checks = Vec::new();
    for family in SweepFamily::ALL {
        let safe: Vec<(u32, f64)> = curve(s, family, Metric::SafePct)
            .into_iter()
            .filter(|(n, _)| *n >= 8)
            .collect();
        checks.push(check(
            &format!("{}_safe_nonincreasing_from_8", family.key()),
            safe.windows(2).all(|w| w[1].1 <= w[0].1),
            fmt_curve(&safe),
        ));
        let cost = curve(s, family, Metric::MeanCost);
        checks.push(check(
            &format!("{}_cost_nondecreasing", family.key()),
            cost.windows(2).all(|w| w[1].1 >= w[0].1),
            fmt_curve(&cost),
        ));
    }
    let at32 = value(s, "ungoverned_32", Metric::SafePct);
    let at64 = value(s, "ungoverned_64", Metric::SafePct);
    checks.push(check(
        "ungoverned_drop_32_64",
        at32 - at64 > 10.0,
        format!("{at32:.2} -> {at64:.2} ({:.2} pp)", at32 - at64),
    ));
    checks
}

fn stress_checks(stressed: &[MetricsSummary], full: &[MetricsSummary]) -> Vec<Check> {
    stressed
        .iter()
        .zip(full)
        .map(|(st, fu)| {
            check(
                &format!("{}_stress_worse", st.arch_id),
                st.safe_pct < fu.safe_pct && st.violations_per_1k > fu.violations_per_1k,
                format!(
                    "safe {:.2} vs {:.2}, violations {:.2} vs {:.2}",
                    st.safe_pct, fu.safe_pct, st.violations_per_1k, fu.violations_per_1k
                ),
            )
        })
        .collect()
}

pub fn run_experiment(config: &HarnessConfig, experiment: Experiment) -> Result<ExperimentReport> {
    Harness::new(config.clone())?.run(experiment)
}

pub fn run_comparison(config: &HarnessConfig) -> Result<ExperimentReport> {
    run_experiment(config, Experiment::Comparison)
}

pub fn run_ablation(config: &HarnessConfig) -> Result<ExperimentReport> {
    run_experiment(config, Experiment::Ablation)
}

pub fn run_sweep(config: &HarnessConfig) -> Result<ExperimentReport> {
    run_experiment(config, Experiment::Sweep)
}

pub fn run_stress(config: &HarnessConfig) -> Result<ExperimentReport> {
    run_experiment(config, Experiment::Stress)
}

/// All configured experiments over one generated task set.
pub fn run_all(config: &HarnessConfig) -> Result<Vec<ExperimentReport>> {
    Harness::new(config.clone())?.run_all()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::OutputFormat;

    fn small() -> HarnessConfig {
        let mut c = HarnessConfig::default();
        c.task_set.n_tasks = 1_500;
        c
    }

    #[test]
    fn every_target_gets_a_verdict() {
        let h = Harness::new(small()).unwrap();
        for e in Experiment::ALL {
            let r = h.run(e).unwrap();
            let expected = h.targets.iter().filter(|t| t.experiment == e).count();
            assert_eq!(r.verdicts.len(), expected);
            assert_eq!(r.rows.len(), e.profile_ids().len());
        }
    }

    #[test]
    fn full_cead_row_matches_comparison_a4() {
        let h = Harness::new(small()).unwrap();
        let cmp = h.run(Experiment::Comparison).unwrap();
        let abl = h.run(Experiment::Ablation).unwrap();
        let a = cmp.summary("a4").unwrap();
        let b = abl.summary("a4").unwrap();
        assert_eq!(a, b);
        assert_eq!(abl.rows[0].label, "CEAD full");
    }

    #[test]
    fn worker_count_does_not_change_output() {
        let one = Harness::new(HarnessConfig {
            jobs: Some(1),
            ..small()
        })
        .unwrap();
        let four = Harness::new(HarnessConfig {
            jobs: Some(4),
            ..small()
        })
        .unwrap();
        for e in [Experiment::Comparison, Experiment::Stress] {
            let a = one.run(e).unwrap();
            let b = four.run(e).unwrap();
            assert_eq!(a.to_csv(), b.to_csv());
            assert_eq!(a.to_markdown(), b.to_markdown());
        }
    }

    #[test]
    fn zero_tasks_fail_before_simulation() {
        let mut c = small();
        c.task_set.n_tasks = 0;
        assert!(matches!(run_comparison(&c), Err(Error::Validation { .. })));
    }

    #[test]
    fn emitted_files_are_byte_stable() {
        let dir = tempfile::tempdir().unwrap();
        let h = Harness::new(small()).unwrap();
        let r = h.run(Experiment::Sweep).unwrap();
        let first: Vec<_> = OutputFormat::ALL
            .iter()
            .flat_map(|&f| r.emit(dir.path(), f).unwrap())
            .map(|p| std::fs::read(p).unwrap())
            .collect();
        let again = h.run(Experiment::Sweep).unwrap();
        let second: Vec<_> = OutputFormat::ALL
            .iter()
            .flat_map(|&f| again.emit(dir.path(), f).unwrap())
            .map(|p| std::fs::read(p).unwrap())
            .collect();
        assert_eq!(first.len(), 5);
        assert_eq!(first, second);
    }
}
