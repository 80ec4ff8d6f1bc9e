//! Harness configuration file.
//!
//! Relative paths inside a config file resolve against the file's directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::Experiment;
use crate::architectures::{AutonomyLevel, Features, ProfileCatalog};
use crate::calibration::{load_targets, paper_targets, CalibrationTarget, FreeParam};
use crate::error::{Error, Result};
use crate::model::Model;
use crate::taskgen::TaskSetSpec;

/// Per-profile adjustments applied on top of the model file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileOverride {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub agent_count: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub handoff_base: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_autonomy: Option<AutonomyLevel>,
    /// Feature strengths by name.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub features: BTreeMap<String, f64>,
}

/// A block of free parameters searched together, holding the others fixed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationStage {
    pub name: String,
    /// Evaluation budget of this stage.
    pub budget: usize,
    /// Path prefixes selecting entries of `free`.
    pub params: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrationConfig {
    /// Evaluation budget when no stages are given.
    pub budget: usize,
    /// Passes over the stage list.
    pub rounds: usize,
    /// Where `calibrate` writes the fitted model.
    pub output: PathBuf,
    pub free: Vec<FreeParam>,
    pub stages: Vec<CalibrationStage>,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self {
            budget: 400,
            rounds: 1,
            output: PathBuf::from("calibrated.toml"),
            free: Vec::new(),
            stages: Vec::new(),
        }
    }
}

impl CalibrationConfig {
    /// The stages to run in order, each with its free parameters. Without configured stages
    /// this is one stage over every free parameter.
    pub fn plan(&self) -> Result<Vec<(String, usize, Vec<FreeParam>)>> {
        if self.free.is_empty() {
            return Err(Error::validation(
                "calibration.free",
                "no free parameters configured",
            ));
        }
        if self.stages.is_empty() {
            return Ok(vec![("all".to_string(), self.budget, self.free.clone())]);
        }
        let mut plan = Vec::new();
        for _ in 0..self.rounds.max(1) {
            for stage in &self.stages {
                let params: Vec<FreeParam> = self
                    .free
                    .iter()
                    .filter(|p| {
                        stage
                            .params
                            .iter()
                            .any(|prefix| p.path.starts_with(prefix.as_str()))
                    })
                    .cloned()
                    .collect();
                if params.is_empty() {
                    return Err(Error::validation(
                        format!("calibration.stages.{}", stage.name),
                        "selects no free parameter",
                    ));
                }
                plan.push((stage.name.clone(), stage.budget, params));
            }
        }
        Ok(plan)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HarnessConfig {
    /// Master seed for the trial substreams.
    pub seed: u64,
    pub output_dir: PathBuf,
    /// Model file. `None` uses the built-in uncalibrated model.
    pub model: Option<PathBuf>,
    /// Target CSV. `None` uses the bundled published targets.
    pub targets: Option<PathBuf>,
    /// Worker threads; `None` lets rayon decide.
    pub jobs: Option<usize>,
    pub experiments: Vec<Experiment>,
    pub task_set: TaskSetSpec,
    pub profiles: Vec<ProfileOverride>,
    pub calibration: CalibrationConfig,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Default for HarnessConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            output_dir: PathBuf::from("out"),
            model: None,
            targets: None,
            jobs: None,
            experiments: Experiment::ALL.to_vec(),
            task_set: TaskSetSpec::default(),
            profiles: Vec::new(),
            calibration: CalibrationConfig::default(),
            base_dir: PathBuf::new(),
        }
    }
}

/// The inputs that determine report contents. Output location and worker count are left out.
#[derive(Serialize)]
struct FingerprintInput<'a> {
    seed: u64,
    task_set: &'a TaskSetSpec,
    profiles: &'a [ProfileOverride],
    model_digest: &'a str,
    targets: &'a [CalibrationTarget],
}

impl HarnessConfig {
    pub fn from_toml_str(text: &str, origin: &Path) -> Result<Self> {
        let mut config: HarnessConfig =
            toml::from_str(text).map_err(|e| Error::parse(origin, e))?;
        config.base_dir = origin.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text, path)
    }

    /// Sets both the master seed and the task generator seed.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.task_set.seed = seed;
        self
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }

    pub fn output_path(&self) -> PathBuf {
        self.resolve(&self.output_dir)
    }

    pub fn validate(&self) -> Result<()> {
        if self.task_set.n_tasks == 0 {
            return Err(Error::validation("task_set.n_tasks", "must be >= 1"));
        }
        self.task_set.validate()?;
        if self.experiments.is_empty() {
            return Err(Error::validation(
                "experiments",
                "select at least one experiment",
            ));
        }
        if self.jobs == Some(0) {
            return Err(Error::validation("jobs", "must be >= 1"));
        }
        for p in &self.profiles {
            for name in p.features.keys() {
                if !Features::NAMES.contains(&name.as_str()) {
                    return Err(Error::validation(
                        format!("profiles.{}.features", p.id),
                        format!("unknown feature `{name}`"),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Loads the model file (or the built-in model) and applies the profile overrides.
    pub fn load_model(&self) -> Result<Model> {
        let model = match &self.model {
            Some(path) => {
                let path = self.resolve(path);
                if !path.is_file() {
                    return Err(Error::validation(
                        "model",
                        format!("model file {} not found", path.display()),
                    ));
                }
                Model::load(&path)?
            }
            None => Model::default(),
        };
        self.apply_overrides(model)
    }

    pub fn apply_overrides(&self, model: Model) -> Result<Model> {
        if self.profiles.is_empty() {
            return Ok(model);
        }
        let mut profiles = model.catalog.builtin_profiles().to_vec();
        for o in &self.profiles {
            let p = profiles
                .iter_mut()
                .find(|p| p.id == o.id)
                .ok_or_else(|| Error::UnknownProfile(o.id.clone()))?;
            if let Some(name) = &o.name {
                p.name = name.clone();
            }
            if let Some(n) = o.agent_count {
                p.agent_count = n;
            }
            if let Some(h) = o.handoff_base {
                p.handoff_base = h;
            }
            if let Some(level) = o.max_autonomy {
                p.max_autonomy = level;
            }
            if !o.features.is_empty() {
                let mut value = serde_json::to_value(&p.features).expect("features serialize");
                for (name, v) in &o.features {
                    value[name.as_str()] = serde_json::json!(v);
                }
                p.features = serde_json::from_value(value).map_err(|e| {
                    Error::validation(format!("profiles.{}.features", o.id), e.to_string())
                })?;
            }
        }
        Model::new(model.coefficients, ProfileCatalog::new(profiles)?)
    }

    pub fn load_targets(&self) -> Result<Vec<CalibrationTarget>> {
        match &self.targets {
            Some(path) => load_targets(&self.resolve(path)),
            None => Ok(paper_targets()),
        }
    }

    /// SHA-256 over the seed, task set, overrides, model digest and targets.
    pub fn fingerprint(&self, model: &Model, targets: &[CalibrationTarget]) -> String {
        let digest = model.digest();
        let input = FingerprintInput {
            seed: self.seed,
            task_set: &self.task_set,
            profiles: &self.profiles,
            model_digest: &digest,
            targets,
        };
        let bytes = serde_json::to_vec(&input).expect("fingerprint input serializes");
        hex::encode(Sha256::digest(bytes))
    }
}
