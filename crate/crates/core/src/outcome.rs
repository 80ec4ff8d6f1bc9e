//! Per-trial stochastic outcome model.
//!
//! A trial is one task run under one architecture. Functional success and policy
//! violation follow the two logistic models; poisoning, handoffs, escalation, audit,
//! cost and latency are supporting models with the same shape. All randomness of a trial
//! is drawn up front into [`TrialDraws`], so evaluating a trial is a pure function of its
//! draws and can be replayed against other coefficients (common random numbers).

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::architectures::{ArchitectureProfile, Topology};
use crate::error::{Error, Result};
use crate::rng;
use crate::taskgen::Task;

pub fn sigmoid(x: f64) -> f64 {
    // Branching keeps exp() from overflowing for large |x|.
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RouteWeights {
    pub contracts: f64,
    pub registry: f64,
    pub specialization: f64,
    pub policy: f64,
    pub verifier: f64,
    pub protocol: f64,
}

impl RouteWeights {
    pub fn uniform(w: f64) -> Self {
        Self {
            contracts: w,
            registry: w,
            specialization: w,
            policy: w,
            verifier: w,
            protocol: w,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuccessCoefficients {
    pub gamma_c: f64,
    pub gamma_r: f64,
    pub gamma_u: f64,
    pub gamma_h: f64,
    pub gamma_d: f64,
    /// Base competence per profile family.
    pub beta: BTreeMap<String, f64>,
    pub route_weights: RouteWeights,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ViolationCoefficients {
    pub alpha: f64,
    pub lambda_r: f64,
    pub lambda_s: f64,
    pub lambda_x: f64,
    pub lambda_h: f64,
    pub lambda_p: f64,
    pub lambda_l: f64,
    pub lambda_g: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoisoningCoefficients {
    pub mu_base: f64,
    pub mu_adv: f64,
    pub mu_h: f64,
    pub mu_mem: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HandoffCoefficients {
    pub kappa_base: f64,
    pub kappa_agents: f64,
    pub kappa_dep: f64,
    pub kappa_acc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EscalationCoefficients {
    pub eta_base: f64,
    pub eta_risk: f64,
    pub eta_amb: f64,
    /// Share of the escalation propensity controlled by human gates, in `[0, 1]`.
    /// A profile without gates keeps `1 - eta_gate` of it.
    pub eta_gate: f64,
    /// Multiplier on the violation probability of escalated trials, in `[0, 1]`.
    pub violation_suppression: f64,
    /// Success-logit shift for escalated trials (completed at reduced autonomy).
    pub success_shift: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditCoefficients {
    pub audit_base: f64,
    pub audit_gain: f64,
    pub audit_policy: f64,
    pub audit_escalation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostCoefficients {
    pub unit_step: f64,
    pub unit_handoff: f64,
    pub unit_verify: f64,
    pub unit_escalation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatencyCoefficients {
    pub base: f64,
    pub per_handoff: f64,
    pub per_escalation: f64,
    /// Lognormal noise: `noise_scale * exp(noise_sigma * z)`.
    pub noise_scale: f64,
    pub noise_sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GateCoefficients {
    /// Gate relevance of tasks that are neither write, regulated nor high-risk.
    pub low_relevance: f64,
}

/// Every free parameter of the outcome model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientSet {
    pub success: SuccessCoefficients,
    pub violation: ViolationCoefficients,
    pub poisoning: PoisoningCoefficients,
    pub handoff: HandoffCoefficients,
    pub escalation: EscalationCoefficients,
    pub audit: AuditCoefficients,
    pub cost: CostCoefficients,
    pub latency: LatencyCoefficients,
    pub gate: GateCoefficients,
}

/// Sign/range constraint of a coefficient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bound {
    Free,
    NonNegative,
    Unit,
}

impl Bound {
    pub fn admits(self, v: f64) -> bool {
        v.is_finite()
            && match self {
                Bound::Free => true,
                Bound::NonNegative => v >= 0.0,
                Bound::Unit => (0.0..=1.0).contains(&v),
            }
    }

    pub fn interval(self) -> (f64, f64) {
        match self {
            Bound::Free => (f64::NEG_INFINITY, f64::INFINITY),
            Bound::NonNegative => (0.0, f64::INFINITY),
            Bound::Unit => (0.0, 1.0),
        }
    }
}

impl CoefficientSet {
    /// `(path, value, bound)` for every scalar coefficient, in a fixed order.
    pub fn entries(&self) -> Vec<(String, f64, Bound)> {
        use Bound::*;
        let s = &self.success;
        let rw = &s.route_weights;
        let v = &self.violation;
        let p = &self.poisoning;
        let h = &self.handoff;
        let e = &self.escalation;
        let a = &self.audit;
        let c = &self.cost;
        let l = &self.latency;
        let mut out: Vec<(String, f64, Bound)> = [
            ("success.gamma_c", s.gamma_c, NonNegative),
            ("success.gamma_r", s.gamma_r, NonNegative),
            ("success.gamma_u", s.gamma_u, NonNegative),
            ("success.gamma_h", s.gamma_h, NonNegative),
            ("success.gamma_d", s.gamma_d, NonNegative),
            ("success.route_weights.contracts", rw.contracts, NonNegative),
            ("success.route_weights.registry", rw.registry, NonNegative),
            (
                "success.route_weights.specialization",
                rw.specialization,
                NonNegative,
            ),
            ("success.route_weights.policy", rw.policy, NonNegative),
            ("success.route_weights.verifier", rw.verifier, NonNegative),
            ("success.route_weights.protocol", rw.protocol, NonNegative),
            ("violation.alpha", v.alpha, Free),
            ("violation.lambda_r", v.lambda_r, NonNegative),
            ("violation.lambda_s", v.lambda_s, NonNegative),
            ("violation.lambda_x", v.lambda_x, NonNegative),
            ("violation.lambda_h", v.lambda_h, NonNegative),
            ("violation.lambda_p", v.lambda_p, NonNegative),
            ("violation.lambda_l", v.lambda_l, NonNegative),
            ("violation.lambda_g", v.lambda_g, NonNegative),
            ("poisoning.mu_base", p.mu_base, Free),
            ("poisoning.mu_adv", p.mu_adv, NonNegative),
            ("poisoning.mu_h", p.mu_h, NonNegative),
            ("poisoning.mu_mem", p.mu_mem, NonNegative),
            ("handoff.kappa_base", h.kappa_base, NonNegative),
            ("handoff.kappa_agents", h.kappa_agents, NonNegative),
            ("handoff.kappa_dep", h.kappa_dep, NonNegative),
            ("handoff.kappa_acc", h.kappa_acc, NonNegative),
            ("escalation.eta_base", e.eta_base, Free),
            ("escalation.eta_risk", e.eta_risk, NonNegative),
            ("escalation.eta_amb", e.eta_amb, NonNegative),
            ("escalation.eta_gate", e.eta_gate, Unit),
            (
                "escalation.violation_suppression",
                e.violation_suppression,
                Unit,
            ),
            ("escalation.success_shift", e.success_shift, Free),
            ("audit.audit_base", a.audit_base, Free),
            ("audit.audit_gain", a.audit_gain, NonNegative),
            ("audit.audit_policy", a.audit_policy, NonNegative),
            ("audit.audit_escalation", a.audit_escalation, NonNegative),
            ("cost.unit_step", c.unit_step, NonNegative),
            ("cost.unit_handoff", c.unit_handoff, NonNegative),
            ("cost.unit_verify", c.unit_verify, NonNegative),
            ("cost.unit_escalation", c.unit_escalation, NonNegative),
            ("latency.base", l.base, NonNegative),
            ("latency.per_handoff", l.per_handoff, NonNegative),
            ("latency.per_escalation", l.per_escalation, NonNegative),
            ("latency.noise_scale", l.noise_scale, NonNegative),
            ("latency.noise_sigma", l.noise_sigma, NonNegative),
            ("gate.low_relevance", self.gate.low_relevance, Unit),
        ]
        .into_iter()
        .map(|(k, v, b)| (k.to_string(), v, b))
        .collect();
        for (family, beta) in &s.beta {
            out.push((format!("success.beta.{family}"), *beta, Free));
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        for (path, value, bound) in self.entries() {
            if !bound.admits(value) {
                return Err(Error::validation(
                    format!("coefficients.{path}"),
                    format!("{value} violates {bound:?} constraint"),
                ));
            }
        }
        Ok(())
    }

    pub fn beta(&self, family: &str) -> Result<f64> {
        self.success.beta.get(family).copied().ok_or_else(|| {
            Error::validation(format!("coefficients.success.beta.{family}"), "missing")
        })
    }
}

impl Default for CoefficientSet {
    /// Uncalibrated starting point with plausible magnitudes.
    fn default() -> Self {
        let beta = [
            ("a0", 1.5),
            ("a1", 1.0),
            ("a2", 1.5),
            ("a3", 1.5),
            ("a4", 1.5),
            ("cead", 1.5),
            ("ungoverned", 1.5),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
        Self {
            success: SuccessCoefficients {
                gamma_c: 0.2,
                gamma_r: 0.15,
                gamma_u: 0.5,
                gamma_h: 0.15,
                gamma_d: 0.1,
                beta,
                route_weights: RouteWeights::uniform(0.2),
            },
            violation: ViolationCoefficients {
                alpha: -3.0,
                lambda_r: 0.2,
                lambda_s: 0.3,
                lambda_x: 0.8,
                lambda_h: 0.1,
                lambda_p: 0.8,
                lambda_l: 0.8,
                lambda_g: 0.1,
            },
            poisoning: PoisoningCoefficients {
                mu_base: -3.5,
                mu_adv: 1.0,
                mu_h: 0.08,
                mu_mem: 1.0,
            },
            handoff: HandoffCoefficients {
                kappa_base: 0.7,
                kappa_agents: 0.05,
                kappa_dep: 0.3,
                kappa_acc: 0.1,
            },
            escalation: EscalationCoefficients {
                eta_base: -2.0,
                eta_risk: 0.5,
                eta_amb: 1.0,
                eta_gate: 0.9,
                violation_suppression: 0.3,
                success_shift: 0.0,
            },
            audit: AuditCoefficients {
                audit_base: 0.05,
                audit_gain: 0.6,
                audit_policy: 0.2,
                audit_escalation: 0.5,
            },
            cost: CostCoefficients {
                unit_step: 0.85,
                unit_handoff: 0.3,
                unit_verify: 0.3,
                unit_escalation: 0.8,
            },
            latency: LatencyCoefficients {
                base: 8.0,
                per_handoff: 1.0,
                per_escalation: 5.0,
                noise_scale: 3.0,
                noise_sigma: 0.6,
            },
            gate: GateCoefficients { low_relevance: 0.2 },
        }
    }
}

/// One simulated task x architecture trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskOutcome {
    pub task_id: u32,
    pub arch_id: Arc<str>,
    pub handoffs: u32,
    pub escalated: bool,
    pub success: bool,
    pub violation: bool,
    pub poisoned: bool,
    pub safe: bool,
    pub automated_safe: bool,
    pub audit_covered: bool,
    pub cost: f64,
    pub latency: f64,
}

/// Weighted sum of the six routing-relevant feature strengths.
pub fn route_quality(profile: &ArchitectureProfile, coeffs: &CoefficientSet) -> f64 {
    let f = &profile.features;
    let w = &coeffs.success.route_weights;
    w.contracts * f.contracts
        + w.registry * f.registry
        + w.specialization * f.specialization
        + w.policy * f.policy
        + w.verifier * f.verifier
        + w.protocol * f.protocol_guards
}

/// Handoff intensity of a sweep variant with `n_agents`, scaled linearly from a template
/// calibrated at `template_agents`.
pub fn scaled_handoff_base(template_base: f64, template_agents: u32, n_agents: u32) -> f64 {
    template_base * f64::from(n_agents) / f64::from(template_agents.max(1))
}

pub fn handoff_mean(task: &Task, profile: &ArchitectureProfile, coeffs: &CoefficientSet) -> f64 {
    let k = &coeffs.handoff;
    let m = k.kappa_base * profile.handoff_base
        + k.kappa_agents * f64::from(profile.agent_count.max(1)).log2()
        + k.kappa_dep * f64::from(task.dependencies)
        - k.kappa_acc * profile.features.capability_map_acc;
    let m = m.max(0.0);
    if profile.topology == Topology::MonoAgent && task.tool_count > 0 {
        m.max(1.0)
    } else {
        m
    }
}

const POISSON_MAX: u32 = 10_000;

/// Inverse-CDF Poisson draw from a single uniform, so the draw is monotone in the mean.
pub fn poisson_quantile(mean: f64, u: f64) -> u32 {
    if mean <= 0.0 {
        return 0;
    }
    let mut k = 0u32;
    let mut p = (-mean).exp();
    let mut cdf = p;
    while u >= cdf && k < POISSON_MAX {
        k += 1;
        p *= mean / f64::from(k);
        cdf += p;
        if p == 0.0 && cdf < u {
            // Underflow in the far tail of very large means; fall back to a normal approximation.
            return (mean + mean.sqrt() * approx_normal_quantile(u))
                .round()
                .max(0.0) as u32;
        }
    }
    k
}

fn approx_normal_quantile(u: f64) -> f64 {
    // Logistic approximation of the probit, adequate for the tail fallback only.
    let u = u.clamp(1e-12, 1.0 - 1e-12);
    (u / (1.0 - u)).ln() / 1.702
}

pub fn sample_handoffs<R: Rng + ?Sized>(
    task: &Task,
    profile: &ArchitectureProfile,
    coeffs: &CoefficientSet,
    rng: &mut R,
) -> u32 {
    poisson_quantile(handoff_mean(task, profile, coeffs), rng.random())
}

fn success_logit(task: &Task, coeffs: &CoefficientSet, base: f64, handoffs: u32) -> f64 {
    let s = &coeffs.success;
    base - s.gamma_c * f64::from(task.complexity)
        - s.gamma_r * f64::from(task.risk)
        - s.gamma_u * task.ambiguity
        - s.gamma_h * f64::from(handoffs)
        - s.gamma_d * f64::from(task.dependencies)
}

/// Functional-success probability. Unknown families use a base competence of zero.
pub fn success_probability(
    task: &Task,
    profile: &ArchitectureProfile,
    coeffs: &CoefficientSet,
    handoffs: u32,
) -> f64 {
    let beta = coeffs.beta(&profile.family).unwrap_or(0.0);
    sigmoid(success_logit(
        task,
        coeffs,
        beta + route_quality(profile, coeffs),
        handoffs,
    ))
}

/// Human-gate strength that applies to this task.
pub fn gate_applicability(
    task: &Task,
    profile: &ArchitectureProfile,
    coeffs: &CoefficientSet,
) -> f64 {
    let relevance = if task.write_action || task.regulated || task.risk >= 4 {
        1.0
    } else {
        coeffs.gate.low_relevance
    };
    (profile.features.human_gates * relevance).clamp(0.0, 1.0)
}

pub fn violation_probability(
    task: &Task,
    profile: &ArchitectureProfile,
    coeffs: &CoefficientSet,
    handoffs: u32,
    gate_strength: f64,
) -> f64 {
    let v = &coeffs.violation;
    let f = &profile.features;
    sigmoid(
        v.alpha
            + v.lambda_r * f64::from(task.risk)
            + v.lambda_s * f64::from(u8::from(task.sensitive))
            + v.lambda_x * f64::from(u8::from(task.adversarial))
            + v.lambda_h * f64::from(handoffs)
            - v.lambda_p * f.policy
            - v.lambda_l * f.least_privilege
            - v.lambda_g * gate_strength,
    )
}

pub fn poisoning_probability(
    task: &Task,
    profile: &ArchitectureProfile,
    coeffs: &CoefficientSet,
    handoffs: u32,
) -> f64 {
    let m = &coeffs.poisoning;
    sigmoid(
        m.mu_base + m.mu_adv * f64::from(u8::from(task.adversarial)) + m.mu_h * f64::from(handoffs)
            - m.mu_mem * profile.features.memory_governance,
    )
}

pub fn escalation_probability(
    task: &Task,
    profile: &ArchitectureProfile,
    coeffs: &CoefficientSet,
) -> f64 {
    let e = &coeffs.escalation;
    let propensity =
        sigmoid(e.eta_base + e.eta_risk * f64::from(task.risk) + e.eta_amb * task.ambiguity);
    let gate_scale = (1.0 - e.eta_gate) + e.eta_gate * profile.features.human_gates;
    (propensity * gate_scale).clamp(0.0, 1.0)
}

pub fn audit_probability(
    profile: &ArchitectureProfile,
    coeffs: &CoefficientSet,
    escalated: bool,
) -> f64 {
    let a = &coeffs.audit;
    let f = &profile.features;
    let p = a.audit_base
        + a.audit_gain * (f.audit_instrumentation + f.contracts) / 2.0
        + a.audit_policy * f.policy
        + if escalated { a.audit_escalation } else { 0.0 };
    p.clamp(0.0, 1.0)
}

/// Every random number one trial consumes, drawn in a fixed order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialDraws {
    pub handoff: f64,
    pub escalation: f64,
    pub success: f64,
    pub violation: f64,
    pub poisoning: f64,
    pub audit: f64,
    pub latency_z: f64,
}

impl TrialDraws {
    pub fn sample<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Self {
            handoff: rng.random(),
            escalation: rng.random(),
            success: rng.random(),
            violation: rng.random(),
            poisoning: rng.random(),
            audit: rng.random(),
            latency_z: StandardNormal.sample(rng),
        }
    }

    pub fn for_trial(master_seed: u64, stream_key: &str, task_id: u32) -> Self {
        Self::sample(&mut rng::substream(
            master_seed,
            stream_key,
            u64::from(task_id),
        ))
    }
}

/// Profile-level quantities that are constant across the tasks of one run.
#[derive(Debug, Clone)]
pub struct PreparedProfile<'a> {
    pub profile: &'a ArchitectureProfile,
    pub coeffs: &'a CoefficientSet,
    arch_id: Arc<str>,
    success_base: f64,
    escalation_scale: f64,
    audit_plain: f64,
    audit_escalated: f64,
}

impl<'a> PreparedProfile<'a> {
    pub fn new(profile: &'a ArchitectureProfile, coeffs: &'a CoefficientSet) -> Self {
        let beta = coeffs.beta(&profile.family).unwrap_or(0.0);
        let e = &coeffs.escalation;
        Self {
            profile,
            coeffs,
            arch_id: Arc::from(profile.id.as_str()),
            success_base: beta + route_quality(profile, coeffs),
            escalation_scale: (1.0 - e.eta_gate) + e.eta_gate * profile.features.human_gates,
            audit_plain: audit_probability(profile, coeffs, false),
            audit_escalated: audit_probability(profile, coeffs, true),
        }
    }

    /// Deterministic trial evaluation from pre-drawn randomness.
    pub fn evaluate(&self, task: &Task, draws: &TrialDraws) -> TaskOutcome {
        let (profile, coeffs) = (self.profile, self.coeffs);
        let e = &coeffs.escalation;

        let handoffs = poisson_quantile(handoff_mean(task, profile, coeffs), draws.handoff);

        let propensity =
            sigmoid(e.eta_base + e.eta_risk * f64::from(task.risk) + e.eta_amb * task.ambiguity);
        let escalated = draws.escalation < (propensity * self.escalation_scale).clamp(0.0, 1.0);

        let mut logit = success_logit(task, coeffs, self.success_base, handoffs);
        if escalated {
            logit += e.success_shift;
        }
        let success = draws.success < sigmoid(logit);

        let gate = gate_applicability(task, profile, coeffs);
        let mut p_violation = violation_probability(task, profile, coeffs, handoffs, gate);
        if escalated {
            p_violation *= e.violation_suppression;
        }
        let violation = draws.violation < p_violation;
        let poisoned = draws.poisoning < poisoning_probability(task, profile, coeffs, handoffs);

        let safe = success && !violation && !poisoned;
        let automated_safe = safe && !escalated;
        let p_audit = if escalated {
            self.audit_escalated
        } else {
            self.audit_plain
        };
        let audit_covered = draws.audit < p_audit;

        let c = &coeffs.cost;
        let h = f64::from(handoffs);
        let esc = f64::from(u8::from(escalated));
        let cost = c.unit_step * (1.0 + f64::from(task.tool_count))
            + c.unit_handoff * h
            + c.unit_verify * profile.features.verifier
            + c.unit_escalation * esc;
        let l = &coeffs.latency;
        let noise = l.noise_scale * (l.noise_sigma * draws.latency_z).exp();
        let latency = (l.base + l.per_handoff * h + l.per_escalation * esc + noise).max(0.0);

        TaskOutcome {
            task_id: task.id,
            arch_id: Arc::clone(&self.arch_id),
            handoffs,
            escalated,
            success,
            violation,
            poisoned,
            safe,
            automated_safe,
            audit_covered,
            cost: cost.max(0.0),
            latency,
        }
    }
}

pub fn simulate_task<R: Rng + ?Sized>(
    task: &Task,
    profile: &ArchitectureProfile,
    coeffs: &CoefficientSet,
    rng: &mut R,
) -> TaskOutcome {
    PreparedProfile::new(profile, coeffs).evaluate(task, &TrialDraws::sample(rng))
}

/// Simulates `profile` over every task. Trials run on the current rayon pool; the output is in
/// task order and independent of the pool size.
pub fn simulate_run(
    tasks: &[Task],
    profile: &ArchitectureProfile,
    coeffs: &CoefficientSet,
    master_seed: u64,
) -> Vec<TaskOutcome> {
    let prepared = PreparedProfile::new(profile, coeffs);
    tasks
        .par_iter()
        .map(|t| {
            prepared.evaluate(
                t,
                &TrialDraws::for_trial(master_seed, &profile.stream_key, t.id),
            )
        })
        .collect()
}

/// Serial counterpart of [`simulate_run`].
pub fn simulate_run_serial(
    tasks: &[Task],
    profile: &ArchitectureProfile,
    coeffs: &CoefficientSet,
    master_seed: u64,
) -> Vec<TaskOutcome> {
    let prepared = PreparedProfile::new(profile, coeffs);
    tasks
        .iter()
        .map(|t| {
            prepared.evaluate(
                t,
                &TrialDraws::for_trial(master_seed, &profile.stream_key, t.id),
            )
        })
        .collect()
}

/// Fails if the profile's family has no base competence.
pub fn check_profile(profile: &ArchitectureProfile, coeffs: &CoefficientSet) -> Result<()> {
    coeffs.beta(&profile.family).map(|_| ())
}
