//! The four experiments, their configuration and report output.

pub mod config;
pub mod report;
mod runs;

pub use config::{CalibrationConfig, CalibrationStage, HarnessConfig, ProfileOverride};
pub use report::{table_metrics, Check, ExperimentReport, OutputFormat, ReportRow, Verdict};
pub use runs::{
    run_ablation, run_all, run_comparison, run_experiment, run_stress, run_sweep, Harness,
    EXPECTED_SAFE_ORDER,
};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::architectures::{
    ablated, AblationTag, ArchitectureProfile, ProfileCatalog, SweepFamily, BUILTIN_IDS,
    SWEEP_AGENT_COUNTS,
};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Comparison,
    Ablation,
    Sweep,
    Stress,
}

impl Experiment {
    pub const ALL: [Experiment; 4] = [
        Experiment::Comparison,
        Experiment::Ablation,
        Experiment::Sweep,
        Experiment::Stress,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Comparison => "comparison",
            Experiment::Ablation => "ablation",
            Experiment::Sweep => "sweep",
            Experiment::Stress => "stress",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            Experiment::Comparison => "Architecture comparison",
            Experiment::Ablation => "Ablation of design and support controls",
            Experiment::Sweep => "Proliferation sweep",
            Experiment::Stress => "High-risk, regulated or adversarial stress subset",
        }
    }

    /// Profile ids of the experiment's runs, in table order.
    pub fn profile_ids(self) -> Vec<String> {
        match self {
            Experiment::Comparison | Experiment::Stress => {
                BUILTIN_IDS.iter().map(|s| s.to_string()).collect()
            }
            Experiment::Ablation => std::iter::once("a4".to_string())
                .chain(
                    AblationTag::ALL
                        .iter()
                        .map(|t| format!("a4-no-{}", t.slug())),
                )
                .collect(),
            Experiment::Sweep => SweepFamily::ALL
                .iter()
                .flat_map(|f| {
                    SWEEP_AGENT_COUNTS
                        .iter()
                        .map(move |n| format!("{}_{n}", f.key()))
                })
                .collect(),
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s.trim())
            .ok_or_else(|| Error::validation("experiment", format!("unknown experiment `{s}`")))
    }
}

/// What to simulate for one report row.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub profile: ArchitectureProfile,
    /// Restrict the task set to the stress subset.
    pub stress: bool,
}

/// Maps an experiment-scoped profile id to the profile it denotes.
pub fn resolve_run(
    catalog: &ProfileCatalog,
    experiment: Experiment,
    profile_id: &str,
) -> Result<RunSpec> {
    let unknown = || Error::UnknownProfile(format!("{experiment}:{profile_id}"));
    let profile = match experiment {
        Experiment::Comparison | Experiment::Stress => {
            catalog.get(profile_id).cloned().ok_or_else(unknown)?
        }
        Experiment::Ablation => {
            let base = catalog.cead();
            if profile_id == base.id {
                base.clone()
            } else {
                let slug = profile_id
                    .strip_prefix(&format!("{}-no-", base.id))
                    .ok_or_else(unknown)?;
                let tag = AblationTag::ALL
                    .into_iter()
                    .find(|t| t.slug() == slug)
                    .ok_or_else(unknown)?;
                ablated(base, tag)
            }
        }
        Experiment::Sweep => {
            let (family, n) = profile_id.rsplit_once('_').ok_or_else(unknown)?;
            let family = SweepFamily::ALL
                .into_iter()
                .find(|f| f.key() == family)
                .ok_or_else(unknown)?;
            let n: u32 = n.parse().map_err(|_| unknown())?;
            catalog.sweep_profile(family, n)?
        }
    };
    Ok(RunSpec {
        profile,
        stress: experiment == Experiment::Stress,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_listed_id_resolves() {
        let catalog = ProfileCatalog::default();
        for e in Experiment::ALL {
            let ids = e.profile_ids();
            assert!(!ids.is_empty());
            for id in ids {
                let run = resolve_run(&catalog, e, &id).unwrap();
                assert_eq!(run.profile.id, id);
                assert_eq!(run.stress, e == Experiment::Stress);
            }
        }
        assert_eq!(Experiment::Sweep.profile_ids().len(), 14);
        assert_eq!(Experiment::Ablation.profile_ids().len(), 7);
    }

    #[test]
    fn unknown_ids_fail() {
        let catalog = ProfileCatalog::default();
        assert!(resolve_run(&catalog, Experiment::Comparison, "a9").is_err());
        assert!(resolve_run(&catalog, Experiment::Ablation, "a4-no-coffee").is_err());
        assert!(resolve_run(&catalog, Experiment::Sweep, "cead_3").is_err());
        assert!(resolve_run(&catalog, Experiment::Sweep, "swarm_8").is_err());
    }
}
