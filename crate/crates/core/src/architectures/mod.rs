//! Architecture profiles, autonomy levels, ablations and proliferation-sweep variants.

mod acc;

pub use acc::{validate_acc, AccDocument, AccField, Finding, FindingKind, ValidationReport};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::outcome::scaled_handoff_base;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum AutonomyLevel {
    #[serde(rename = "L0")]
    L0Observe,
    #[serde(rename = "L1")]
    L1Draft,
    #[serde(rename = "L2")]
    L2Prepare,
    #[serde(rename = "L3")]
    L3BoundedExecute,
    #[serde(rename = "L4")]
    L4HighAutonomy,
}

impl AutonomyLevel {
    pub const ALL: [AutonomyLevel; 5] = [
        AutonomyLevel::L0Observe,
        AutonomyLevel::L1Draft,
        AutonomyLevel::L2Prepare,
        AutonomyLevel::L3BoundedExecute,
        AutonomyLevel::L4HighAutonomy,
    ];

    pub fn code(self) -> &'static str {
        match self {
            AutonomyLevel::L0Observe => "L0",
            AutonomyLevel::L1Draft => "L1",
            AutonomyLevel::L2Prepare => "L2",
            AutonomyLevel::L3BoundedExecute => "L3",
            AutonomyLevel::L4HighAutonomy => "L4",
        }
    }
}

impl FromStr for AutonomyLevel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let code = s.trim().get(..2).unwrap_or("").to_ascii_uppercase();
        AutonomyLevel::ALL
            .into_iter()
            .find(|l| l.code() == code)
            .ok_or_else(|| {
                Error::validation("autonomy_level", format!("`{s}` is not one of L0..L4"))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Topology {
    MonoAgent,
    Swarm,
    Brokered,
    Grid,
    CapabilityAligned,
}

/// Control and design feature strengths, each in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Features {
    pub contracts: f64,
    pub registry: f64,
    pub specialization: f64,
    pub policy: f64,
    pub verifier: f64,
    pub protocol_guards: f64,
    pub least_privilege: f64,
    pub memory_governance: f64,
    pub human_gates: f64,
    pub capability_map_acc: f64,
    pub audit_instrumentation: f64,
}

impl Features {
    pub const NAMES: [&'static str; 11] = [
        "contracts",
        "registry",
        "specialization",
        "policy",
        "verifier",
        "protocol_guards",
        "least_privilege",
        "memory_governance",
        "human_gates",
        "capability_map_acc",
        "audit_instrumentation",
    ];

    pub fn uniform(v: f64) -> Self {
        Self {
            contracts: v,
            registry: v,
            specialization: v,
            policy: v,
            verifier: v,
            protocol_guards: v,
            least_privilege: v,
            memory_governance: v,
            human_gates: v,
            capability_map_acc: v,
            audit_instrumentation: v,
        }
    }

    pub fn values(&self) -> [f64; 11] {
        [
            self.contracts,
            self.registry,
            self.specialization,
            self.policy,
            self.verifier,
            self.protocol_guards,
            self.least_privilege,
            self.memory_governance,
            self.human_gates,
            self.capability_map_acc,
            self.audit_instrumentation,
        ]
    }

    pub fn validate(&self, profile: &str) -> Result<()> {
        for (name, v) in Self::NAMES.iter().zip(self.values()) {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::validation(
                    format!("profiles.{profile}.features.{name}"),
                    format!("{v} outside [0, 1]"),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchitectureProfile {
    pub id: String,
    pub name: String,
    /// Selects the base-competence coefficient.
    pub family: String,
    /// Substream key for trial randomness. Variants derived from one base share its key so
    /// their comparisons use common random numbers.
    pub stream_key: String,
    pub agent_count: u32,
    pub topology: Topology,
    pub max_autonomy: AutonomyLevel,
    pub handoff_base: f64,
    pub features: Features,
}

impl ArchitectureProfile {
    pub fn validate(&self) -> Result<()> {
        if self.agent_count == 0 {
            return Err(Error::validation(
                format!("profiles.{}.agent_count", self.id),
                "must be >= 1",
            ));
        }
        if !(self.handoff_base.is_finite() && self.handoff_base >= 0.0) {
            return Err(Error::validation(
                format!("profiles.{}.handoff_base", self.id),
                "must be finite and >= 0",
            ));
        }
        self.features.validate(&self.id)
    }
}

pub const BUILTIN_IDS: [&str; 5] = ["a0", "a1", "a2", "a3", "a4"];

/// Pre-calibration strengths. Calibrated values ship in the model file.
pub fn default_profiles() -> Vec<ArchitectureProfile> {
    let profile =
        |id: &str, name: &str, agents, topology, autonomy, hb, features| ArchitectureProfile {
            id: id.to_string(),
            name: name.to_string(),
            family: id.to_string(),
            stream_key: id.to_string(),
            agent_count: agents,
            topology,
            max_autonomy: autonomy,
            handoff_base: hb,
            features,
        };
    vec![
        profile(
            "a0",
            "A0 Prompt-first mono-agent",
            1,
            Topology::MonoAgent,
            AutonomyLevel::L3BoundedExecute,
            1.0,
            Features {
                contracts: 0.1,
                registry: 0.0,
                specialization: 0.1,
                policy: 0.3,
                verifier: 0.1,
                protocol_guards: 0.1,
                least_privilege: 0.1,
                memory_governance: 0.2,
                human_gates: 0.15,
                capability_map_acc: 0.0,
                audit_instrumentation: 0.3,
            },
        ),
        profile(
            "a1",
            "A1 Role-based micro-agent swarm",
            32,
            Topology::Swarm,
            AutonomyLevel::L4HighAutonomy,
            4.0,
            Features {
                contracts: 0.05,
                registry: 0.1,
                specialization: 0.6,
                policy: 0.05,
                verifier: 0.1,
                protocol_guards: 0.1,
                least_privilege: 0.05,
                memory_governance: 0.05,
                human_gates: 0.05,
                capability_map_acc: 0.05,
                audit_instrumentation: 0.1,
            },
        ),
        profile(
            "a2",
            "A2 SOA-brokered agents",
            6,
            Topology::Brokered,
            AutonomyLevel::L3BoundedExecute,
            1.5,
            Features {
                contracts: 0.85,
                registry: 0.9,
                specialization: 0.5,
                policy: 0.8,
                verifier: 0.5,
                protocol_guards: 0.7,
                least_privilege: 0.6,
                memory_governance: 0.4,
                human_gates: 0.5,
                capability_map_acc: 0.5,
                audit_instrumentation: 0.6,
            },
        ),
        profile(
            "a3",
            "A3 Governance-first design-poor grid",
            24,
            Topology::Grid,
            AutonomyLevel::L2Prepare,
            3.0,
            Features {
                contracts: 0.5,
                registry: 0.5,
                specialization: 0.2,
                policy: 0.9,
                verifier: 0.6,
                protocol_guards: 0.6,
                least_privilege: 0.9,
                memory_governance: 0.6,
                human_gates: 0.9,
                capability_map_acc: 0.2,
                audit_instrumentation: 0.9,
            },
        ),
        profile(
            "a4",
            "A4 CEAD proposed",
            8,
            Topology::CapabilityAligned,
            AutonomyLevel::L3BoundedExecute,
            1.5,
            Features::uniform(0.9),
        ),
    ]
}

/// The loaded set of built-in profiles A0..A4.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileCatalog {
    profiles: Vec<ArchitectureProfile>,
}

impl Default for ProfileCatalog {
    fn default() -> Self {
        Self {
            profiles: default_profiles(),
        }
    }
}

impl ProfileCatalog {
    pub fn new(profiles: Vec<ArchitectureProfile>) -> Result<Self> {
        let ids: Vec<&str> = profiles.iter().map(|p| p.id.as_str()).collect();
        if ids != BUILTIN_IDS {
            return Err(Error::validation(
                "profiles",
                format!("expected profiles {BUILTIN_IDS:?} in order, got {ids:?}"),
            ));
        }
        for p in &profiles {
            p.validate()?;
            if p.agent_count == 1 && p.topology != Topology::MonoAgent {
                return Err(Error::validation(
                    format!("profiles.{}.topology", p.id),
                    "a single-agent built-in profile must be MonoAgent",
                ));
            }
        }
        Ok(Self { profiles })
    }

    pub fn builtin_profiles(&self) -> &[ArchitectureProfile] {
        &self.profiles
    }

    pub fn get(&self, id: &str) -> Option<&ArchitectureProfile> {
        self.profiles.iter().find(|p| p.id == id)
    }

    pub fn get_mut(&mut self, id: &str) -> Option<&mut ArchitectureProfile> {
        self.profiles.iter_mut().find(|p| p.id == id)
    }

    pub fn cead(&self) -> &ArchitectureProfile {
        &self.profiles[4]
    }

    pub fn sweep_profile(&self, family: SweepFamily, n_agents: u32) -> Result<ArchitectureProfile> {
        if !SWEEP_AGENT_COUNTS.contains(&n_agents) {
            return Err(Error::validation(
                "n_agents",
                format!("{n_agents} not in {SWEEP_AGENT_COUNTS:?}"),
            ));
        }
        let template = match family {
            SweepFamily::Cead => &self.profiles[4],
            SweepFamily::Ungoverned => &self.profiles[1],
        };
        let key = family.key();
        Ok(ArchitectureProfile {
            id: format!("{key}_{n_agents}"),
            name: format!("{} n={n_agents}", family.label()),
            family: key.to_string(),
            stream_key: key.to_string(),
            agent_count: n_agents,
            topology: match family {
                SweepFamily::Cead => template.topology,
                SweepFamily::Ungoverned => Topology::Swarm,
            },
            max_autonomy: template.max_autonomy,
            handoff_base: scaled_handoff_base(
                template.handoff_base,
                template.agent_count,
                n_agents,
            ),
            features: template.features.clone(),
        })
    }
}

/// The built-in profiles A0..A4 with pre-calibration strengths.
pub fn builtin_profiles() -> Vec<ArchitectureProfile> {
    default_profiles()
}

pub const SWEEP_AGENT_COUNTS: [u32; 7] = [1, 2, 4, 8, 16, 32, 64];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SweepFamily {
    Cead,
    Ungoverned,
}

impl SweepFamily {
    pub const ALL: [SweepFamily; 2] = [SweepFamily::Cead, SweepFamily::Ungoverned];

    pub fn key(self) -> &'static str {
        match self {
            SweepFamily::Cead => "cead",
            SweepFamily::Ungoverned => "ungoverned",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            SweepFamily::Cead => "CEAD",
            SweepFamily::Ungoverned => "Ungoverned",
        }
    }
}

/// Sweep variant of the default catalog.
pub fn sweep_profile(family: SweepFamily, n_agents: u32) -> Result<ArchitectureProfile> {
    ProfileCatalog::default().sweep_profile(family, n_agents)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AblationTag {
    CapabilityMapAcc,
    RuntimePolicy,
    VerifierGates,
    LeastPrivilege,
    MemoryGovernance,
    HumanGates,
}

impl AblationTag {
    pub const ALL: [AblationTag; 6] = [
        AblationTag::CapabilityMapAcc,
        AblationTag::RuntimePolicy,
        AblationTag::VerifierGates,
        AblationTag::LeastPrivilege,
        AblationTag::MemoryGovernance,
        AblationTag::HumanGates,
    ];

    pub fn slug(self) -> &'static str {
        match self {
            AblationTag::CapabilityMapAcc => "acc",
            AblationTag::RuntimePolicy => "policy",
            AblationTag::VerifierGates => "verifier",
            AblationTag::LeastPrivilege => "least-privilege",
            AblationTag::MemoryGovernance => "memory",
            AblationTag::HumanGates => "gates",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            AblationTag::CapabilityMapAcc => "- Capability map and ACCs",
            AblationTag::RuntimePolicy => "- Runtime policy engine",
            AblationTag::VerifierGates => "- Verifier/critic gates",
            AblationTag::LeastPrivilege => "- Least-privilege tool scopes",
            AblationTag::MemoryGovernance => "- Memory governance",
            AblationTag::HumanGates => "- Human approval gates",
        }
    }
}

impl fmt::Display for AblationTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.slug())
    }
}

/// Copy of `profile` with the tagged control switched off. Id and name record the
/// ablation; family and stream key are inherited.
pub fn ablated(profile: &ArchitectureProfile, tag: AblationTag) -> ArchitectureProfile {
    let mut out = profile.clone();
    let f = &mut out.features;
    match tag {
        AblationTag::CapabilityMapAcc => {
            f.capability_map_acc = 0.0;
            f.contracts = 0.0;
        }
        AblationTag::RuntimePolicy => f.policy = 0.0,
        AblationTag::VerifierGates => f.verifier = 0.0,
        AblationTag::LeastPrivilege => f.least_privilege = 0.0,
        AblationTag::MemoryGovernance => f.memory_governance = 0.0,
        AblationTag::HumanGates => f.human_gates = 0.0,
    }
    let suffix = format!("-no-{}", tag.slug());
    if !out.id.ends_with(&suffix) {
        out.id.push_str(&suffix);
        out.name = format!("{} {}", profile.name, tag.label());
    }
    out
}
