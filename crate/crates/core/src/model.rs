//! The model file: outcome coefficients plus the architecture strengths they were fitted with.
//!
//! Scalars are addressed by dotted paths, e.g. `coefficients.violation.lambda_p` or
//! `profiles.a3.features.human_gates`; the calibrator searches over a list of such paths.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::architectures::{ArchitectureProfile, ProfileCatalog};
use crate::error::{Error, Result};
use crate::outcome::{Bound, CoefficientSet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    coefficients: CoefficientSet,
    profiles: Vec<ArchitectureProfile>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Model {
    pub coefficients: CoefficientSet,
    pub catalog: ProfileCatalog,
}

impl Model {
    pub fn new(coefficients: CoefficientSet, catalog: ProfileCatalog) -> Result<Self> {
        coefficients.validate()?;
        for p in catalog.builtin_profiles() {
            coefficients.beta(&p.family)?;
        }
        Ok(Self {
            coefficients,
            catalog,
        })
    }

    fn to_file(&self) -> ModelFile {
        ModelFile {
            coefficients: self.coefficients.clone(),
            profiles: self.catalog.builtin_profiles().to_vec(),
        }
    }

    fn from_file(file: ModelFile) -> Result<Self> {
        Self::new(file.coefficients, ProfileCatalog::new(file.profiles)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(&self.to_file()).expect("model serializes to TOML")
    }

    pub fn from_toml(text: &str, origin: &Path) -> Result<Self> {
        let file: ModelFile = toml::from_str(text).map_err(|e| Error::parse(origin, e))?;
        Self::from_file(file)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text, path)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text =
            String::from("# archsim model file: outcome coefficients and profile strengths\n");
        text.push_str(&self.to_toml());
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    /// SHA-256 of the canonical serialization.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml().as_bytes()))
    }

    fn to_value(&self) -> Value {
        serde_json::to_value(self.to_file()).expect("model serializes to JSON")
    }

    pub fn get(&self, path: &str) -> Result<f64> {
        let root = self.to_value();
        let slot = locate(&root, path)?;
        slot.as_f64()
            .ok_or_else(|| Error::validation(path, "not a numeric parameter"))
    }

    /// Returns a copy with the given parameters replaced. The result is re-validated.
    pub fn with_params(&self, params: &[(&str, f64)]) -> Result<Self> {
        let mut root = self.to_value();
        for (path, value) in params {
            let slot = locate_mut(&mut root, path)?;
            if !slot.is_number() {
                return Err(Error::validation(*path, "not a numeric parameter"));
            }
            *slot = serde_json::Number::from_f64(*value)
                .map(Value::Number)
                .ok_or_else(|| Error::validation(*path, format!("{value} is not finite")))?;
        }
        let file: ModelFile =
            serde_json::from_value(root).map_err(|e| Error::validation("model", e.to_string()))?;
        Self::from_file(file)
    }

    /// Sign/range constraint of a parameter path.
    pub fn bound(&self, path: &str) -> Result<Bound> {
        if let Some(rest) = path.strip_prefix("coefficients.") {
            return self
                .coefficients
                .entries()
                .into_iter()
                .find(|(p, _, _)| p == rest)
                .map(|(_, _, b)| b)
                .ok_or_else(|| Error::validation(path, "unknown coefficient"));
        }
        let parts: Vec<&str> = path.split('.').collect();
        match parts.as_slice() {
            ["profiles", _, "features", _] => {
                self.get(path)?;
                Ok(Bound::Unit)
            }
            ["profiles", _, "handoff_base"] => {
                self.get(path)?;
                Ok(Bound::NonNegative)
            }
            _ => Err(Error::validation(path, "not a calibratable parameter")),
        }
    }
}

fn step<'a>(node: &'a Value, key: &str, path: &str) -> Result<&'a Value> {
    match node {
        Value::Object(map) => map.get(key),
        Value::Array(items) => items
            .iter()
            .find(|item| item.get("id").and_then(Value::as_str) == Some(key)),
        _ => None,
    }
    .ok_or_else(|| Error::validation(path, format!("no entry `{key}`")))
}

fn locate<'a>(root: &'a Value, path: &str) -> Result<&'a Value> {
    path.split('.')
        .try_fold(root, |node, key| step(node, key, path))
}

fn locate_mut<'a>(root: &'a mut Value, path: &str) -> Result<&'a mut Value> {
    let mut node = root;
    for key in path.split('.') {
        node = match node {
            Value::Object(map) => map.get_mut(key),
            Value::Array(items) => items
                .iter_mut()
                .find(|item| item.get("id").and_then(Value::as_str) == Some(key)),
            _ => None,
        }
        .ok_or_else(|| Error::validation(path, format!("no entry `{key}`")))?;
    }
    Ok(node)
}
