//! Acceptance criteria. Prints one PASS/FAIL line per criterion and exits non-zero if any fails.
//!
//! Published values are typed in here rather than read from the bundled targets file, so they
//! also cross-check that file.

use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use archsim::architectures::{
    builtin_profiles, validate_acc, AccDocument, AccField, AutonomyLevel,
};
use archsim::calibration::{calibrate, loss, CalibrationTarget, Evaluator, FreeParam};
use archsim::experiments::{Experiment, ExperimentReport, Harness, HarnessConfig, OutputFormat};
use archsim::metrics::{aggregate, Metric, MetricsSummary};
use archsim::model::Model;
use archsim::outcome::{
    sigmoid, simulate_run, simulate_run_serial, success_probability, violation_probability,
    CoefficientSet,
};
use archsim::taskgen::{generate_task_set, Domain, Task, TaskSetSpec};

const IDS: [&str; 5] = ["a0", "a1", "a2", "a3", "a4"];
const SAFE_ORDER: [&str; 5] = ["a4", "a2", "a3", "a0", "a1"];
const AGENTS: [u32; 7] = [1, 2, 4, 8, 16, 32, 64];

// Full-set comparison.
const T3_SAFE: [f64; 5] = [45.2, 23.1, 58.8, 50.8, 70.6];
const T3_VIOLATIONS: [f64; 5] = [118.0, 248.6, 54.0, 30.0, 22.4];
const T3_HANDOFFS: [f64; 5] = [1.01, 6.25, 2.37, 4.51, 2.01];
// Stress subset.
const T5_SAFE: [f64; 5] = [40.4, 19.4, 55.0, 47.8, 67.8];
// Agent-count sweep, indexed like AGENTS.
const CEAD_SAFE: [f64; 7] = [70.0, 70.3, 70.0, 69.5, 67.0, 62.5, 48.0];
const UNGOVERNED_SAFE: [f64; 7] = [37.5, 37.4, 37.2, 35.5, 31.5, 22.0, 7.0];
const CEAD_COST: [f64; 7] = [3.6, 3.6, 3.6, 3.7, 4.0, 4.7, 6.0];
const UNGOVERNED_COST: [f64; 7] = [2.9, 2.9, 3.0, 3.1, 3.6, 4.7, 6.6];
// Contract field titles.
const ACC_ROWS: [&str; 14] = [
    "Business capability and owner",
    "Purpose and non-purpose",
    "Autonomy level",
    "Interaction topology",
    "Input/output schemas",
    "Tool inventory and scopes",
    "Data classification",
    "State and memory design",
    "Model behavior policy",
    "Verification design",
    "Human interaction",
    "Evaluation evidence",
    "Observability and audit",
    "Versioning and deprecation",
];

/// Collects failure reasons for one criterion.
#[derive(Default)]
struct Criterion {
    failures: Vec<String>,
}

impl Criterion {
    fn require(&mut self, ok: bool, what: impl FnOnce() -> String) {
        if !ok {
            self.failures.push(what());
        }
    }

    fn within(&mut self, label: &str, got: f64, target: f64, tol: f64) {
        self.require((got - target).abs() <= tol, || {
            format!("{label} {got:.3} vs {target} +/- {tol:.2}")
        });
    }
}

struct Reports {
    comparison: ExperimentReport,
    ablation: ExperimentReport,
    sweep: ExperimentReport,
    stress: ExperimentReport,
}

fn committed_config() -> HarnessConfig {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../config/default.toml");
    HarnessConfig::load(&path).expect("committed config loads")
}

fn get(report: &ExperimentReport, id: &str) -> MetricsSummary {
    report
        .summary(id)
        .unwrap_or_else(|| panic!("{} has no run {id}", report.experiment))
        .clone()
}

fn safe_order(report: &ExperimentReport) -> Vec<String> {
    let mut ids: Vec<(String, f64)> = IDS
        .iter()
        .map(|id| (id.to_string(), get(report, id).safe_pct))
        .collect();
    ids.sort_by(|a, b| b.1.total_cmp(&a.1));
    ids.into_iter().map(|(id, _)| id).collect()
}

fn criterion_1(r: &Reports, c: &mut Criterion) {
    for (i, id) in IDS.iter().enumerate() {
        let s = get(&r.comparison, id);
        c.within(&format!("{id} safe"), s.safe_pct, T3_SAFE[i], 3.0);
        c.within(
            &format!("{id} violations"),
            s.violations_per_1k,
            T3_VIOLATIONS[i],
            f64::max(8.0, 0.15 * T3_VIOLATIONS[i]),
        );
        c.within(
            &format!("{id} handoffs"),
            s.mean_handoffs,
            T3_HANDOFFS[i],
            0.6,
        );
    }
    let order = safe_order(&r.comparison);
    c.require(order == SAFE_ORDER, || {
        format!("safe order {}", order.join(">"))
    });
}

fn criterion_2(r: &Reports, c: &mut Criterion) {
    let full = get(&r.ablation, "a4");
    let no = |slug: &str| get(&r.ablation, &format!("a4-no-{slug}"));
    let policy = no("policy").violations_per_1k / full.violations_per_1k;
    c.require((1.6..=2.3).contains(&policy), || {
        format!("policy violation ratio {policy:.3}")
    });
    let memory = no("memory").poison_per_1k / full.poison_per_1k;
    c.require((1.6..=2.4).contains(&memory), || {
        format!("memory poisoning ratio {memory:.3}")
    });
    let gates = no("gates");
    c.require(gates.escalation_pct < 8.0, || {
        format!("escalation without gates {:.2}", gates.escalation_pct)
    });
    let audit_drop = full.audit_pct - gates.audit_pct;
    c.require(audit_drop >= 5.0, || {
        format!("audit drop {audit_drop:.2} pp")
    });
    let functional_drop = full.functional_pct - no("verifier").functional_pct;
    c.require(functional_drop >= 3.0, || {
        format!("verifier functional drop {functional_drop:.2} pp")
    });
}

fn curve(r: &ExperimentReport, family: &str, metric: Metric) -> Vec<f64> {
    AGENTS
        .iter()
        .map(|n| get(r, &format!("{family}_{n}")).get(metric))
        .collect()
}

fn criterion_3(r: &Reports, c: &mut Criterion) {
    for (family, published) in [("cead", CEAD_SAFE), ("ungoverned", UNGOVERNED_SAFE)] {
        let got = curve(&r.sweep, family, Metric::SafePct);
        for i in 0..AGENTS.len() {
            c.within(
                &format!("{family} n={} safe", AGENTS[i]),
                got[i],
                published[i],
                5.0,
            );
        }
        // Indices 3.. are n >= 8.
        c.require(got[3..].windows(2).all(|w| w[1] <= w[0]), || {
            format!("{family} safe not non-increasing from n=8: {got:.2?}")
        });
    }
    let u = curve(&r.sweep, "ungoverned", Metric::SafePct);
    c.require(u[5] - u[6] > 10.0, || {
        format!("ungoverned drop 32->64 only {:.2} pp", u[5] - u[6])
    });
}

fn criterion_4(r: &Reports, c: &mut Criterion) {
    for (family, published) in [("cead", CEAD_COST), ("ungoverned", UNGOVERNED_COST)] {
        let got = curve(&r.sweep, family, Metric::MeanCost);
        for i in 0..AGENTS.len() {
            c.within(
                &format!("{family} n={} cost", AGENTS[i]),
                got[i],
                published[i],
                0.7,
            );
        }
        c.require(got.windows(2).all(|w| w[1] >= w[0]), || {
            format!("{family} cost not non-decreasing: {got:.3?}")
        });
    }
}

fn criterion_5(r: &Reports, c: &mut Criterion) {
    for (i, id) in IDS.iter().enumerate() {
        let st = get(&r.stress, id);
        let full = get(&r.comparison, id);
        c.within(&format!("{id} stress safe"), st.safe_pct, T5_SAFE[i], 4.0);
        c.require(st.safe_pct < full.safe_pct, || {
            format!(
                "{id} stress safe {:.2} not below full {:.2}",
                st.safe_pct, full.safe_pct
            )
        });
        c.require(st.violations_per_1k > full.violations_per_1k, || {
            format!(
                "{id} stress violations {:.2} not above full {:.2}",
                st.violations_per_1k, full.violations_per_1k
            )
        });
    }
    let order = safe_order(&r.stress);
    c.require(order == SAFE_ORDER, || {
        format!("stress safe order {}", order.join(">"))
    });
}

fn base_task() -> Task {
    Task {
        id: 0,
        domain: Domain::Finance,
        complexity: 3,
        risk: 3,
        ambiguity: 0.5,
        sensitive: false,
        regulated: false,
        adversarial: false,
        tool_count: 2,
        dependencies: 1,
        write_action: false,
        cross_functional: false,
    }
}

/// Strictly monotone in the stated direction over the grid.
fn monotone(values: &[f64], increasing: bool) -> bool {
    values
        .windows(2)
        .all(|w| if increasing { w[1] > w[0] } else { w[1] < w[0] })
}

fn check_sigmoid(c: &mut Criterion) {
    c.within("sigmoid(0)", sigmoid(0.0), 0.5, 1e-12);
    for i in -200..=200 {
        let x = f64::from(i) * 0.1;
        let s = sigmoid(x);
        c.within(
            &format!("sigmoid({x})+sigmoid(-x)"),
            s + sigmoid(-x),
            1.0,
            1e-12,
        );
        c.within(
            &format!("sigmoid({x}) closed form"),
            s,
            1.0 / (1.0 + (-x).exp()),
            1e-12,
        );
        if x.abs() <= 10.0 {
            c.within(
                &format!("logit(sigmoid({x}))"),
                (s / (1.0 - s)).ln(),
                x,
                1e-9,
            );
        }
    }
    c.require(sigmoid(-800.0) == 0.0 && sigmoid(800.0) == 1.0, || {
        "sigmoid saturation".into()
    });
}

fn check_monotonicity(c: &mut Criterion) {
    let coeffs = CoefficientSet::default();
    let profile = builtin_profiles()[2].clone();
    let task = base_task();
    let p_s = |t: &Task, h: u32, p: &archsim::architectures::ArchitectureProfile| {
        success_probability(t, p, &coeffs, h)
    };
    let p_v = |t: &Task, h: u32, g: f64, p: &archsim::architectures::ArchitectureProfile| {
        violation_probability(t, p, &coeffs, h, g)
    };
    let levels = [1u8, 2, 3, 4, 5];
    let unit = [0.0, 0.25, 0.5, 0.75, 1.0];
    let counts = [0u32, 1, 2, 3, 4];

    let mut grid = |name: &str, values: Vec<f64>, increasing: bool| {
        c.require(monotone(&values, increasing), || {
            format!("{name} not monotone: {values:.4?}")
        });
    };
    grid(
        "S vs complexity",
        levels
            .iter()
            .map(|&v| {
                p_s(
                    &Task {
                        complexity: v,
                        ..task.clone()
                    },
                    1,
                    &profile,
                )
            })
            .collect(),
        false,
    );
    grid(
        "S vs risk",
        levels
            .iter()
            .map(|&v| {
                p_s(
                    &Task {
                        risk: v,
                        ..task.clone()
                    },
                    1,
                    &profile,
                )
            })
            .collect(),
        false,
    );
    grid(
        "S vs ambiguity",
        unit.iter()
            .map(|&v| {
                p_s(
                    &Task {
                        ambiguity: v,
                        ..task.clone()
                    },
                    1,
                    &profile,
                )
            })
            .collect(),
        false,
    );
    grid(
        "S vs handoffs",
        counts.iter().map(|&h| p_s(&task, h, &profile)).collect(),
        false,
    );
    grid(
        "S vs dependencies",
        counts
            .iter()
            .map(|&d| {
                p_s(
                    &Task {
                        dependencies: d,
                        ..task.clone()
                    },
                    1,
                    &profile,
                )
            })
            .collect(),
        false,
    );
    grid(
        "S vs route quality",
        unit.iter()
            .map(|&v| {
                let mut p = profile.clone();
                p.features.contracts = v;
                p_s(&task, 1, &p)
            })
            .collect(),
        true,
    );

    grid(
        "V vs risk",
        levels
            .iter()
            .map(|&v| {
                p_v(
                    &Task {
                        risk: v,
                        ..task.clone()
                    },
                    1,
                    0.0,
                    &profile,
                )
            })
            .collect(),
        true,
    );
    grid(
        "V vs handoffs",
        counts
            .iter()
            .map(|&h| p_v(&task, h, 0.0, &profile))
            .collect(),
        true,
    );
    grid(
        "V vs gate",
        unit.iter().map(|&g| p_v(&task, 1, g, &profile)).collect(),
        false,
    );
    for feature in ["policy", "least_privilege"] {
        grid(
            &format!("V vs {feature}"),
            unit.iter()
                .map(|&v| {
                    let mut p = profile.clone();
                    match feature {
                        "policy" => p.features.policy = v,
                        _ => p.features.least_privilege = v,
                    }
                    p_v(&task, 1, 0.0, &p)
                })
                .collect(),
            false,
        );
    }
    grid(
        "V vs sensitive",
        [false, true]
            .iter()
            .map(|&b| {
                p_v(
                    &Task {
                        sensitive: b,
                        ..task.clone()
                    },
                    1,
                    0.0,
                    &profile,
                )
            })
            .collect(),
        true,
    );
    grid(
        "V vs adversarial",
        [false, true]
            .iter()
            .map(|&b| {
                p_v(
                    &Task {
                        adversarial: b,
                        ..task.clone()
                    },
                    1,
                    0.0,
                    &profile,
                )
            })
            .collect(),
        true,
    );
}

fn check_lattice_and_permutation(c: &mut Criterion) {
    let tasks = generate_task_set(&TaskSetSpec {
        n_tasks: 20_000,
        seed: 99,
        ..TaskSetSpec::default()
    })
    .unwrap();
    let coeffs = CoefficientSet::default();
    let mut total = 0;
    for profile in builtin_profiles() {
        let mut outcomes = simulate_run(&tasks.tasks, &profile, &coeffs, 3);
        total += outcomes.len();
        let bad = outcomes
            .iter()
            .filter(|o| (o.automated_safe && !o.safe) || (o.safe && !o.success))
            .count();
        c.require(bad == 0, || {
            format!(
                "{}: {bad} outcomes break automated_safe => safe => success",
                profile.id
            )
        });

        let before = aggregate(&outcomes).unwrap();
        outcomes.shuffle(&mut ChaCha8Rng::seed_from_u64(5));
        let after = aggregate(&outcomes).unwrap();
        c.require(before == after, || {
            format!("{}: aggregate changed under permutation", profile.id)
        });
    }
    c.require(total == 100_000, || format!("sampled {total} outcomes"));
}

fn check_generator_determinism(c: &mut Criterion) {
    let spec = TaskSetSpec::default();
    let csv = |s: &TaskSetSpec| {
        let mut buf = Vec::new();
        generate_task_set(s).unwrap().write_csv(&mut buf).unwrap();
        buf
    };
    c.require(csv(&spec) == csv(&spec), || {
        "task generator not deterministic".into()
    });
    let other = TaskSetSpec {
        seed: spec.seed + 1,
        ..spec.clone()
    };
    c.require(csv(&spec) != csv(&other), || {
        "task generator ignores its seed".into()
    });
}

fn rendered(report: &ExperimentReport) -> Vec<String> {
    let mut out = vec![
        report.to_csv(),
        report.verdicts_csv(),
        report.to_markdown(),
        report.to_json(),
    ];
    out.extend(
        report
            .plotdata()
            .into_iter()
            .map(|(name, text)| name + &text),
    );
    out
}

fn check_parallel_serial(c: &mut Criterion) {
    let base = HarnessConfig::default();
    let serial = Harness::new(HarnessConfig {
        jobs: Some(1),
        ..base.clone()
    })
    .unwrap();
    let parallel = Harness::new(HarnessConfig {
        jobs: Some(4),
        ..base
    })
    .unwrap();
    for e in Experiment::ALL {
        let a = rendered(&serial.run(e).unwrap());
        let b = rendered(&parallel.run(e).unwrap());
        c.require(a == b, || {
            format!("{e} reports differ between 1 and 4 workers")
        });
    }
    let coeffs = CoefficientSet::default();
    for profile in builtin_profiles() {
        let par = simulate_run(&serial.tasks.tasks, &profile, &coeffs, 7);
        let ser = simulate_run_serial(&serial.tasks.tasks, &profile, &coeffs, 7);
        c.require(par == ser, || {
            format!("{}: parallel and serial outcomes differ", profile.id)
        });
    }
}

fn check_recovery(c: &mut Criterion) {
    let tasks = generate_task_set(&TaskSetSpec {
        n_tasks: 3_000,
        seed: 11,
        ..TaskSetSpec::default()
    })
    .unwrap();
    let hidden_values = [
        ("coefficients.success.beta.a4", 2.1),
        ("coefficients.violation.alpha", -2.6),
        ("coefficients.handoff.kappa_base", 0.9),
        ("coefficients.cost.unit_handoff", 0.45),
    ];
    let hidden = Model::default().with_params(&hidden_values).unwrap();
    let metrics = [
        Metric::FunctionalPct,
        Metric::SafePct,
        Metric::ViolationsPer1k,
        Metric::MeanHandoffs,
        Metric::MeanCost,
    ];
    let mut targets: Vec<CalibrationTarget> = IDS
        .iter()
        .flat_map(|id| {
            metrics.iter().map(move |&metric| CalibrationTarget {
                experiment: Experiment::Comparison,
                profile_id: id.to_string(),
                metric,
                value: 0.0,
                weight: 1.0,
                tolerance: 1.0,
            })
        })
        .collect();
    let seed = 5;
    let synthetic = Evaluator::new(&hidden, &targets, &tasks, seed)
        .unwrap()
        .evaluate(&hidden)
        .unwrap();
    for t in &mut targets {
        let v = synthetic.summaries[&(t.experiment, t.profile_id.clone())].get(t.metric);
        t.value = v;
        t.tolerance = t.metric.default_tolerance(v);
    }

    let reseeded: Vec<f64> = (1..=10)
        .map(|k| loss(&hidden, &targets, &tasks, seed + k).unwrap())
        .collect();
    let noise_floor = reseeded.iter().sum::<f64>() / reseeded.len() as f64;

    let params = [
        FreeParam {
            path: hidden_values[0].0.into(),
            lo: 0.5,
            hi: 3.5,
        },
        FreeParam {
            path: hidden_values[1].0.into(),
            lo: -4.5,
            hi: -1.5,
        },
        FreeParam {
            path: hidden_values[2].0.into(),
            lo: 0.2,
            hi: 1.8,
        },
        FreeParam {
            path: hidden_values[3].0.into(),
            lo: 0.05,
            hi: 1.0,
        },
    ];
    let initial = Model::default();
    let start = loss(&initial, &targets, &tasks, seed).unwrap();
    let fit = calibrate(&initial, &params, &targets, &tasks, 400, seed).unwrap();
    c.require(start > 2.0 * noise_floor, || {
        format!("starting loss {start:.4} already within the noise floor {noise_floor:.4}")
    });
    c.require(fit.total_loss <= 2.0 * noise_floor, || {
        format!(
            "fit loss {:.4} exceeds twice the noise floor {noise_floor:.4}",
            fit.total_loss
        )
    });
}

fn criterion_6(c: &mut Criterion) {
    check_sigmoid(c);
    check_monotonicity(c);
    check_lattice_and_permutation(c);
    check_generator_determinism(c);
    check_parallel_serial(c);
    check_recovery(c);
}

fn complete_acc() -> AccDocument {
    let text = std::fs::read_to_string(
        PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../config/acc/invoice-matching.toml"),
    )
    .expect("sample contract exists");
    AccDocument::from_toml_str(&text).expect("sample contract parses")
}

fn criterion_7(c: &mut Criterion) {
    let doc = complete_acc();
    let report = validate_acc(&doc);
    c.require(report.is_valid(), || {
        format!("complete contract has findings: {:?}", report.findings)
    });
    for level in AutonomyLevel::ALL {
        let doc = AccDocument {
            autonomy_level: Some(level),
            ..complete_acc()
        };
        for (field, row) in AccField::ALL.into_iter().zip(ACC_ROWS) {
            let findings = validate_acc(&doc.clone().without(field)).findings;
            c.require(
                findings.len() == 1 && findings[0].field.title() == row,
                || format!("{level:?} without {row}: {findings:?}"),
            );
        }
    }
}

fn main() {
    let harness = Harness::new(committed_config()).expect("committed config and model load");
    let reports = Reports {
        comparison: harness.run(Experiment::Comparison).unwrap(),
        ablation: harness.run(Experiment::Ablation).unwrap(),
        sweep: harness.run(Experiment::Sweep).unwrap(),
        stress: harness.run(Experiment::Stress).unwrap(),
    };
    // Emitting exercises the writers on the committed model as well.
    let out = tempfile::tempdir().unwrap();
    for r in [
        &reports.comparison,
        &reports.ablation,
        &reports.sweep,
        &reports.stress,
    ] {
        for f in OutputFormat::ALL {
            r.emit(out.path(), f).unwrap();
        }
    }

    type Check<'a> = Box<dyn Fn(&mut Criterion) + 'a>;
    let criteria: [(&str, Check); 7] = [
        (
            "architecture comparison",
            Box::new(|c| criterion_1(&reports, c)),
        ),
        ("ablation effects", Box::new(|c| criterion_2(&reports, c))),
        ("sweep safe success", Box::new(|c| criterion_3(&reports, c))),
        ("sweep cost", Box::new(|c| criterion_4(&reports, c))),
        ("stress subset", Box::new(|c| criterion_5(&reports, c))),
        ("property suite", Box::new(criterion_6)),
        ("contract validation", Box::new(criterion_7)),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let mut c = Criterion::default();
        run(&mut c);
        if c.failures.is_empty() {
            println!("criterion {}: PASS  {name}", i + 1);
        } else {
            failed += 1;
            println!(
                "criterion {}: FAIL  {name}: {}",
                i + 1,
                c.failures.join("; ")
            );
        }
    }
    if failed > 0 {
        println!("{failed} of {} criteria failed", criteria.len());
        std::process::exit(1);
    }
    println!("all {} criteria passed", criteria.len());
}
