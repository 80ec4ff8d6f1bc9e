//! Seeded enterprise task population and the high-risk stress subset.

use std::io::Write;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Domain {
    Finance,
    HR,
    Procurement,
    IT,
    Legal,
    Sales,
    CustomerOps,
}

impl Domain {
    pub const ALL: [Domain; 7] = [
        Domain::Finance,
        Domain::HR,
        Domain::Procurement,
        Domain::IT,
        Domain::Legal,
        Domain::Sales,
        Domain::CustomerOps,
    ];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Task {
    pub id: u32,
    pub domain: Domain,
    /// 1..=5
    pub complexity: u8,
    /// 1..=5
    pub risk: u8,
    /// [0, 1]
    pub ambiguity: f64,
    pub sensitive: bool,
    pub regulated: bool,
    pub adversarial: bool,
    pub tool_count: u32,
    pub dependencies: u32,
    pub write_action: bool,
    pub cross_functional: bool,
}

impl Task {
    /// Membership predicate of the stress subset.
    pub fn is_stress(&self) -> bool {
        self.risk >= 4 || self.regulated || self.adversarial
    }
}

/// Marginal distributions of the task attributes before boosting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Marginals {
    /// Probabilities of complexity levels 1..=5.
    pub complexity: [f64; 5],
    /// Probabilities of risk levels 1..=5 before the high-risk boost.
    pub risk: [f64; 5],
    /// Beta(alpha, beta) shape of the ambiguity score.
    pub ambiguity_alpha: f64,
    pub ambiguity_beta: f64,
    pub sensitive: f64,
    pub regulated: f64,
    pub adversarial: f64,
    pub write_action: f64,
    pub cross_functional: f64,
    /// Probabilities of tool counts 0, 1, 2, ...
    pub tool_count: Vec<f64>,
    /// Probabilities of dependency counts 0, 1, 2, ...
    pub dependencies: Vec<f64>,
    /// Logit shift per risk level (relative to risk 3) applied to the sensitive,
    /// regulated and write-action probabilities. Zero decouples them from risk.
    pub risk_coupling: f64,
}

impl Default for Marginals {
    fn default() -> Self {
        Self {
            complexity: [0.2; 5],
            risk: [0.2; 5],
            ambiguity_alpha: 2.0,
            ambiguity_beta: 3.0,
            sensitive: 0.25,
            regulated: 0.20,
            adversarial: 0.10,
            write_action: 0.30,
            cross_functional: 0.35,
            tool_count: vec![0.1, 0.2, 0.4, 0.2, 0.1],
            dependencies: vec![0.4, 0.3, 0.2, 0.1],
            risk_coupling: 0.3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TaskSetSpec {
    pub n_tasks: usize,
    pub seed: u64,
    /// Domain mixture in [`Domain::ALL`] order.
    pub domain_weights: [f64; 7],
    /// Risk levels 4 and 5 are sampled with weight multiplied by `1 + high_risk_boost`.
    pub high_risk_boost: f64,
    /// `cross_functional = true` is sampled with weight multiplied by `1 + cross_functional_boost`.
    pub cross_functional_boost: f64,
    pub marginals: Marginals,
}

impl Default for TaskSetSpec {
    fn default() -> Self {
        Self {
            n_tasks: 10_000,
            seed: 7,
            domain_weights: [1.0 / 7.0; 7],
            high_risk_boost: 1.0,
            cross_functional_boost: 0.5,
            marginals: Marginals::default(),
        }
    }
}

const SUM_TOLERANCE: f64 = 1e-9;

fn check_probability(field: &str, p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::validation(
            field,
            format!("probability {p} outside [0, 1]"),
        ));
    }
    Ok(())
}

fn check_distribution(field: &str, weights: &[f64]) -> Result<()> {
    if weights.is_empty() {
        return Err(Error::validation(field, "empty distribution"));
    }
    for (i, w) in weights.iter().enumerate() {
        check_probability(&format!("{field}[{i}]"), *w)?;
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > SUM_TOLERANCE {
        return Err(Error::validation(
            field,
            format!("weights sum to {total}, expected 1"),
        ));
    }
    Ok(())
}

impl TaskSetSpec {
    pub fn validate(&self) -> Result<()> {
        check_distribution("domain_weights", &self.domain_weights)?;
        for (name, boost) in [
            ("high_risk_boost", self.high_risk_boost),
            ("cross_functional_boost", self.cross_functional_boost),
        ] {
            if !(boost.is_finite() && boost >= 0.0) {
                return Err(Error::validation(
                    name,
                    format!("{boost} must be finite and >= 0"),
                ));
            }
        }
        let m = &self.marginals;
        check_distribution("marginals.complexity", &m.complexity)?;
        check_distribution("marginals.risk", &m.risk)?;
        check_distribution("marginals.tool_count", &m.tool_count)?;
        check_distribution("marginals.dependencies", &m.dependencies)?;
        for (name, p) in [
            ("marginals.sensitive", m.sensitive),
            ("marginals.regulated", m.regulated),
            ("marginals.adversarial", m.adversarial),
            ("marginals.write_action", m.write_action),
            ("marginals.cross_functional", m.cross_functional),
        ] {
            check_probability(name, p)?;
        }
        for (name, shape) in [
            ("marginals.ambiguity_alpha", m.ambiguity_alpha),
            ("marginals.ambiguity_beta", m.ambiguity_beta),
        ] {
            if !(shape.is_finite() && shape > 0.0) {
                return Err(Error::validation(
                    name,
                    format!("{shape} must be finite and > 0"),
                ));
            }
        }
        if !m.risk_coupling.is_finite() {
            return Err(Error::validation(
                "marginals.risk_coupling",
                "must be finite",
            ));
        }
        Ok(())
    }

    /// Risk distribution after the high-risk boost, levels 1..=5.
    pub fn boosted_risk(&self) -> [f64; 5] {
        let mut w = self.marginals.risk;
        w[3] *= 1.0 + self.high_risk_boost;
        w[4] *= 1.0 + self.high_risk_boost;
        let total: f64 = w.iter().sum();
        w.map(|x| x / total)
    }

    pub fn boosted_cross_functional(&self) -> f64 {
        let yes = self.marginals.cross_functional * (1.0 + self.cross_functional_boost);
        let no = 1.0 - self.marginals.cross_functional;
        if yes + no == 0.0 {
            0.0
        } else {
            yes / (yes + no)
        }
    }

    /// Probability of a risk-coupled flag for a task at the given risk level.
    pub fn coupled_probability(&self, base: f64, risk: u8) -> f64 {
        if base <= 0.0 || base >= 1.0 || self.marginals.risk_coupling == 0.0 {
            return base;
        }
        let logit = (base / (1.0 - base)).ln();
        let shifted = logit + self.marginals.risk_coupling * (f64::from(risk) - 3.0);
        1.0 / (1.0 + (-shifted).exp())
    }
}

/// How a task set was produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TaskSetView {
    Generated,
    /// A subset of a generated set; task ids are those of the source set.
    Filtered {
        predicate: String,
        source_len: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSet {
    pub spec: TaskSetSpec,
    pub view: TaskSetView,
    pub tasks: Vec<Task>,
}

impl TaskSet {
    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Task> {
        self.tasks.iter()
    }

    /// One row per task, columns in [`Task`] field order, with a header row.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for task in &self.tasks {
            w.serialize(task)
                .map_err(|e| Error::validation("task csv", e.to_string()))?;
        }
        w.flush().map_err(|e| Error::io("<task csv>", e))?;
        Ok(())
    }
}

fn categorical(rng: &mut ChaCha8Rng, weights: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    // Rounding slack in the cumulative sum; fall back to the last positive weight.
    weights.iter().rposition(|w| *w > 0.0).unwrap_or(0)
}

pub fn generate_task_set(spec: &TaskSetSpec) -> Result<TaskSet> {
    spec.validate()?;
    let m = &spec.marginals;
    let risk = spec.boosted_risk();
    let cross_functional = spec.boosted_cross_functional();
    let ambiguity = Beta::new(m.ambiguity_alpha, m.ambiguity_beta)
        .map_err(|e| Error::validation("marginals.ambiguity", e.to_string()))?;

    let mut rng = rng::sequential(spec.seed);
    let mut tasks = Vec::with_capacity(spec.n_tasks);
    for id in 0..spec.n_tasks {
        let domain = Domain::ALL[categorical(&mut rng, &spec.domain_weights)];
        let complexity = categorical(&mut rng, &m.complexity) as u8 + 1;
        let risk_level = categorical(&mut rng, &risk) as u8 + 1;
        let ambiguity_score: f64 = ambiguity.sample(&mut rng).clamp(0.0, 1.0);
        let sensitive = rng.random_bool(spec.coupled_probability(m.sensitive, risk_level));
        let regulated = rng.random_bool(spec.coupled_probability(m.regulated, risk_level));
        let adversarial = rng.random_bool(m.adversarial);
        let tool_count = categorical(&mut rng, &m.tool_count) as u32;
        let dependencies = categorical(&mut rng, &m.dependencies) as u32;
        let write_action = rng.random_bool(spec.coupled_probability(m.write_action, risk_level));
        let cross = rng.random_bool(cross_functional);
        tasks.push(Task {
            id: id as u32,
            domain,
            complexity,
            risk: risk_level,
            ambiguity: ambiguity_score,
            sensitive,
            regulated,
            adversarial,
            tool_count,
            dependencies,
            write_action,
            cross_functional: cross,
        });
    }
    Ok(TaskSet {
        spec: spec.clone(),
        view: TaskSetView::Generated,
        tasks,
    })
}

pub const STRESS_PREDICATE: &str = "risk >= 4 || regulated || adversarial";

/// Tasks with risk >= 4, or regulated, or adversarial; order and ids preserved.
pub fn stress_subset(set: &TaskSet) -> TaskSet {
    let source_len = match &set.view {
        TaskSetView::Filtered { source_len, .. } => *source_len,
        TaskSetView::Generated => set.len(),
    };
    TaskSet {
        spec: set.spec.clone(),
        view: TaskSetView::Filtered {
            predicate: STRESS_PREDICATE.to_string(),
            source_len,
        },
        tasks: set
            .tasks
            .iter()
            .filter(|t| t.is_stress())
            .cloned()
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(n: usize, seed: u64) -> TaskSetSpec {
        TaskSetSpec {
            n_tasks: n,
            seed,
            ..TaskSetSpec::default()
        }
    }

    #[test]
    fn empty_spec_gives_empty_set() {
        let set = generate_task_set(&small(0, 1)).unwrap();
        assert!(set.is_empty());
    }

    #[test]
    fn ids_are_contiguous_and_attributes_in_range() {
        let set = generate_task_set(&small(2000, 3)).unwrap();
        for (i, t) in set.iter().enumerate() {
            assert_eq!(t.id as usize, i);
            assert!((1..=5).contains(&t.complexity));
            assert!((1..=5).contains(&t.risk));
            assert!((0.0..=1.0).contains(&t.ambiguity));
            assert!(t.tool_count <= 4);
            assert!(t.dependencies <= 3);
        }
    }

    #[test]
    fn domain_weights_must_sum_to_one() {
        let mut spec = small(10, 1);
        spec.domain_weights[0] += 0.01;
        let err = generate_task_set(&spec).unwrap_err();
        assert!(err.to_string().contains("domain_weights"), "{err}");
    }

    #[test]
    fn probability_out_of_range_names_field() {
        let mut spec = small(10, 1);
        spec.marginals.adversarial = 1.5;
        let err = generate_task_set(&spec).unwrap_err();
        assert!(err.to_string().contains("marginals.adversarial"), "{err}");
    }

    #[test]
    fn boost_renormalizes() {
        let spec = TaskSetSpec::default();
        let r = spec.boosted_risk();
        assert!((r.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((r[3] - 2.0 / 7.0).abs() < 1e-12);
    }

    #[test]
    fn zero_coupling_leaves_flags_untouched() {
        let mut spec = TaskSetSpec::default();
        spec.marginals.risk_coupling = 0.0;
        assert_eq!(spec.coupled_probability(0.2, 5), 0.2);
        spec.marginals.risk_coupling = 0.3;
        assert!(spec.coupled_probability(0.2, 5) > 0.2);
        assert!(spec.coupled_probability(0.2, 1) < 0.2);
        assert!((spec.coupled_probability(0.2, 3) - 0.2).abs() < 1e-12);
    }

    #[test]
    fn stress_predicate_cases() {
        let mut t = generate_task_set(&small(1, 1)).unwrap().tasks[0].clone();
        t.risk = 5;
        t.regulated = false;
        t.adversarial = false;
        assert!(t.is_stress());
        t.risk = 1;
        assert!(!t.is_stress());
        t.adversarial = true;
        assert!(t.is_stress());
    }

    #[test]
    fn csv_has_header_and_one_row_per_task() {
        let set = generate_task_set(&small(5, 2)).unwrap();
        let mut buf = Vec::new();
        set.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines.len(), 6);
        assert_eq!(
            lines[0],
            "id,domain,complexity,risk,ambiguity,sensitive,regulated,adversarial,\
             tool_count,dependencies,write_action,cross_functional"
        );
    }
}
