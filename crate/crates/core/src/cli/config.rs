//! Run configuration files.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::estimation::{FitOptions, ModelKind};
use crate::model::LikelihoodMode;
use crate::simgen::SimCondition;

/// Which estimator a command uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelChoice {
    #[default]
    Full,
    Reduced,
    Linear,
    Quadratic,
    /// Fit every model and rank them by AIC.
    Compare,
    /// Simulation-only stub that reports the population values.
    Truth,
}

impl ModelChoice {
    pub fn kind(self) -> Option<ModelKind> {
        match self {
            ModelChoice::Full => Some(ModelKind::Full),
            ModelChoice::Reduced => Some(ModelKind::Reduced),
            ModelChoice::Linear => Some(ModelKind::Linear),
            ModelChoice::Quadratic => Some(ModelKind::Quadratic),
            ModelChoice::Compare | ModelChoice::Truth => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ConditionSpec {
    One(SimCondition),
    Grid(Vec<SimCondition>),
}

impl ConditionSpec {
    pub fn conditions(&self) -> Vec<SimCondition> {
        match self {
            ConditionSpec::One(c) => vec![c.clone()],
            ConditionSpec::Grid(v) => v.clone(),
        }
    }
}

fn default_ci() -> f64 {
    0.95
}

fn default_attempts() -> usize {
    10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub model: ModelChoice,
    #[serde(default)]
    pub mode: LikelihoodMode,
    #[serde(default = "default_ci")]
    pub ci_level: f64,
    #[serde(default = "default_attempts")]
    pub max_attempts: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub condition: Option<ConditionSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    #[serde(rename = "S", default, skip_serializing_if = "Option::is_none")]
    pub s: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            model: ModelChoice::Full,
            mode: LikelihoodMode::Marginal,
            ci_level: default_ci(),
            max_attempts: default_attempts(),
            master_seed: 0,
            condition: None,
            workers: None,
            s: None,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn fit_options(&self) -> FitOptions {
        FitOptions {
            mode: self.mode,
            max_attempts: self.max_attempts,
            ci_level: self.ci_level,
            seed: self.master_seed,
            ..FitOptions::default()
        }
    }

    pub fn conditions(&self) -> Vec<SimCondition> {
        self.condition
            .as_ref()
            .map(ConditionSpec::conditions)
            .unwrap_or_default()
    }

    /// SHA-256 of the configuration with the worker count removed.
    pub fn hash(&self) -> String {
        let canonical = RunConfig {
            workers: None,
            ..self.clone()
        };
        let text = serde_json::to_string(&canonical).expect("config serializes");
        Sha256::digest(text.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}
