//! Agent Capability Contract documents and their completeness check.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize};

use super::AutonomyLevel;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AccField {
    CapabilityOwner,
    PurposeNonpurpose,
    AutonomyLevel,
    InteractionTopology,
    IoSchemas,
    ToolScopes,
    DataClassification,
    StateMemoryDesign,
    ModelBehaviorPolicy,
    VerificationDesign,
    HumanInteraction,
    EvaluationEvidence,
    ObservabilityAudit,
    VersioningDeprecation,
}

impl AccField {
    pub const ALL: [AccField; 14] = [
        AccField::CapabilityOwner,
        AccField::PurposeNonpurpose,
        AccField::AutonomyLevel,
        AccField::InteractionTopology,
        AccField::IoSchemas,
        AccField::ToolScopes,
        AccField::DataClassification,
        AccField::StateMemoryDesign,
        AccField::ModelBehaviorPolicy,
        AccField::VerificationDesign,
        AccField::HumanInteraction,
        AccField::EvaluationEvidence,
        AccField::ObservabilityAudit,
        AccField::VersioningDeprecation,
    ];

    /// Key used in structured-text documents.
    pub fn key(self) -> &'static str {
        match self {
            AccField::CapabilityOwner => "capability_owner",
            AccField::PurposeNonpurpose => "purpose_nonpurpose",
            AccField::AutonomyLevel => "autonomy_level",
            AccField::InteractionTopology => "interaction_topology",
            AccField::IoSchemas => "io_schemas",
            AccField::ToolScopes => "tool_scopes",
            AccField::DataClassification => "data_classification",
            AccField::StateMemoryDesign => "state_memory_design",
            AccField::ModelBehaviorPolicy => "model_behavior_policy",
            AccField::VerificationDesign => "verification_design",
            AccField::HumanInteraction => "human_interaction",
            AccField::EvaluationEvidence => "evaluation_evidence",
            AccField::ObservabilityAudit => "observability_audit",
            AccField::VersioningDeprecation => "versioning_deprecation",
        }
    }

    /// Human-readable contract row name.
    pub fn title(self) -> &'static str {
        match self {
            AccField::CapabilityOwner => "Business capability and owner",
            AccField::PurposeNonpurpose => "Purpose and non-purpose",
            AccField::AutonomyLevel => "Autonomy level",
            AccField::InteractionTopology => "Interaction topology",
            AccField::IoSchemas => "Input/output schemas",
            AccField::ToolScopes => "Tool inventory and scopes",
            AccField::DataClassification => "Data classification",
            AccField::StateMemoryDesign => "State and memory design",
            AccField::ModelBehaviorPolicy => "Model behavior policy",
            AccField::VerificationDesign => "Verification design",
            AccField::HumanInteraction => "Human interaction",
            AccField::EvaluationEvidence => "Evaluation evidence",
            AccField::ObservabilityAudit => "Observability and audit",
            AccField::VersioningDeprecation => "Versioning and deprecation",
        }
    }
}

fn autonomy_from_text<'de, D>(de: D) -> std::result::Result<Option<AutonomyLevel>, D::Error>
where
    D: Deserializer<'de>,
{
    let raw: Option<String> = Option::deserialize(de)?;
    match raw.as_deref().map(str::trim) {
        None | Some("") => Ok(None),
        Some(s) => s.parse().map(Some).map_err(serde::de::Error::custom),
    }
}

/// One capability contract. Absent text fields are empty strings.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AccDocument {
    pub capability_owner: String,
    pub purpose_nonpurpose: String,
    #[serde(deserialize_with = "autonomy_from_text")]
    pub autonomy_level: Option<AutonomyLevel>,
    pub interaction_topology: String,
    pub io_schemas: String,
    pub tool_scopes: String,
    pub data_classification: String,
    pub state_memory_design: String,
    pub model_behavior_policy: String,
    pub verification_design: String,
    pub human_interaction: String,
    pub evaluation_evidence: String,
    pub observability_audit: String,
    pub versioning_deprecation: String,
}

impl AccDocument {
    pub fn text(&self, field: AccField) -> Option<&str> {
        let s = match field {
            AccField::AutonomyLevel => return self.autonomy_level.map(AutonomyLevel::code),
            AccField::CapabilityOwner => &self.capability_owner,
            AccField::PurposeNonpurpose => &self.purpose_nonpurpose,
            AccField::InteractionTopology => &self.interaction_topology,
            AccField::IoSchemas => &self.io_schemas,
            AccField::ToolScopes => &self.tool_scopes,
            AccField::DataClassification => &self.data_classification,
            AccField::StateMemoryDesign => &self.state_memory_design,
            AccField::ModelBehaviorPolicy => &self.model_behavior_policy,
            AccField::VerificationDesign => &self.verification_design,
            AccField::HumanInteraction => &self.human_interaction,
            AccField::EvaluationEvidence => &self.evaluation_evidence,
            AccField::ObservabilityAudit => &self.observability_audit,
            AccField::VersioningDeprecation => &self.versioning_deprecation,
        };
        Some(s.as_str())
    }

    /// Clears one field.
    pub fn without(mut self, field: AccField) -> Self {
        match field {
            AccField::AutonomyLevel => self.autonomy_level = None,
            AccField::CapabilityOwner => self.capability_owner.clear(),
            AccField::PurposeNonpurpose => self.purpose_nonpurpose.clear(),
            AccField::InteractionTopology => self.interaction_topology.clear(),
            AccField::IoSchemas => self.io_schemas.clear(),
            AccField::ToolScopes => self.tool_scopes.clear(),
            AccField::DataClassification => self.data_classification.clear(),
            AccField::StateMemoryDesign => self.state_memory_design.clear(),
            AccField::ModelBehaviorPolicy => self.model_behavior_policy.clear(),
            AccField::VerificationDesign => self.verification_design.clear(),
            AccField::HumanInteraction => self.human_interaction.clear(),
            AccField::EvaluationEvidence => self.evaluation_evidence.clear(),
            AccField::ObservabilityAudit => self.observability_audit.clear(),
            AccField::VersioningDeprecation => self.versioning_deprecation.clear(),
        }
        self
    }

    pub fn from_toml_str(text: &str) -> std::result::Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| Error::parse(path, e))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FindingKind {
    Missing,
    /// Autonomy at L3 or above without declared human-approval triggers.
    Inconsistent,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Finding {
    pub field: AccField,
    pub kind: FindingKind,
    pub message: String,
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field.title(), self.message)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub findings: Vec<Finding>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.findings.is_empty()
    }
}

/// Reports each missing field by contract row name. An empty human-interaction field on a
/// document at L3 or above is reported once, as an inconsistency.
pub fn validate_acc(doc: &AccDocument) -> ValidationReport {
    let executes = doc
        .autonomy_level
        .is_some_and(|l| l >= AutonomyLevel::L3BoundedExecute);
    let mut findings = Vec::new();
    for field in AccField::ALL {
        let present = doc.text(field).is_some_and(|s| !s.trim().is_empty());
        if present {
            continue;
        }
        if field == AccField::HumanInteraction && executes {
            findings.push(Finding {
                field,
                kind: FindingKind::Inconsistent,
                message: format!(
                    "autonomy level {} executes actions but declares no human approval triggers",
                    doc.autonomy_level
                        .map(AutonomyLevel::code)
                        .unwrap_or_default()
                ),
            });
        } else {
            findings.push(Finding {
                field,
                kind: FindingKind::Missing,
                message: "missing or empty".to_string(),
            });
        }
    }
    ValidationReport { findings }
}
