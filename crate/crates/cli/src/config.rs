//! Flat run configuration shared by every command.

use std::path::Path;

use coca_core::encoders::Arch;
use coca_core::evalkit::CorpusSpec;
use coca_core::explainer::{ExplainMode, ExplainerConfig};
use coca_core::training::{LossMode, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Every tunable of the pipeline in one flat table. Unknown keys are
/// rejected when loading.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,

    // graphs and encoder
    /// Hashed token feature width `d`.
    pub feature_dim: usize,
    pub arch: Arch,
    /// GCN layers or GGNN steps `T`; the architecture default when absent.
    pub layers: Option<usize>,
    pub hidden_dim: usize,

    // contrastive pretraining
    pub tau: f64,
    pub lambda: f64,
    pub loss: LossMode,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub labeled_fraction: f64,
    pub augment_probability: f64,

    // classifier on frozen embeddings
    pub classifier_learning_rate: f64,
    pub classifier_batch_size: usize,
    pub classifier_epochs: usize,

    // explainer
    pub alpha: f64,
    pub explainer_steps: usize,
    pub explainer_learning_rate: f64,
    pub threshold: f64,
    pub mode: ExplainMode,
    pub sparsity: f64,
    pub mask_features: bool,
    pub top_k: Option<usize>,

    // synthetic corpus
    pub n_samples: usize,
    pub vulnerable_ratio: f64,
    pub min_distractors: usize,
    pub max_distractors: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let t = TrainConfig::default();
        let e = ExplainerConfig::default();
        let c = CorpusSpec::default();
        Self {
            seed: c.seed,
            feature_dim: t.feature_dim,
            arch: t.arch,
            layers: t.layers,
            hidden_dim: t.hidden_dim,
            tau: t.tau,
            lambda: t.lambda,
            loss: t.loss,
            batch_size: t.batch_size,
            learning_rate: t.learning_rate,
            max_epochs: t.max_epochs,
            patience: t.patience,
            labeled_fraction: t.labeled_fraction,
            augment_probability: t.augment_probability,
            classifier_learning_rate: t.classifier_learning_rate,
            classifier_batch_size: t.classifier_batch_size,
            classifier_epochs: t.classifier_epochs,
            alpha: e.alpha,
            explainer_steps: e.steps,
            explainer_learning_rate: e.learning_rate,
            threshold: e.threshold,
            mode: e.mode,
            sparsity: e.sparsity,
            mask_features: e.mask_features,
            top_k: e.top_k,
            n_samples: c.n_samples,
            vulnerable_ratio: c.vulnerable_ratio,
            min_distractors: c.distractors.0,
            max_distractors: c.distractors.1,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("flat config always serializes")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.train_config().validate().map_err(|e| CliError::Config(e.to_string()))?;
        self.explainer_config().validate().map_err(|e| CliError::Config(e.to_string()))?;
        if !(0.0..=1.0).contains(&self.vulnerable_ratio) {
            return Err(CliError::Config("vulnerable_ratio must lie in [0, 1]".into()));
        }
        if self.min_distractors > self.max_distractors {
            return Err(CliError::Config("min_distractors exceeds max_distractors".into()));
        }
        if self.feature_dim == 0 || self.hidden_dim == 0 {
            return Err(CliError::Config("feature_dim and hidden_dim must be positive".into()));
        }
        Ok(())
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            arch: self.arch,
            hidden_dim: self.hidden_dim,
            layers: self.layers,
            feature_dim: self.feature_dim,
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            max_epochs: self.max_epochs,
            patience: self.patience,
            labeled_fraction: self.labeled_fraction,
            tau: self.tau,
            lambda: self.lambda,
            loss: self.loss,
            augment_probability: self.augment_probability,
            classifier_learning_rate: self.classifier_learning_rate,
            classifier_batch_size: self.classifier_batch_size,
            classifier_epochs: self.classifier_epochs,
            seed: self.seed,
        }
    }

    pub fn explainer_config(&self) -> ExplainerConfig {
        ExplainerConfig {
            alpha: self.alpha,
            steps: self.explainer_steps,
            learning_rate: self.explainer_learning_rate,
            threshold: self.threshold,
            mode: self.mode,
            sparsity: self.sparsity,
            mask_features: self.mask_features,
            top_k: self.top_k,
        }
    }

    pub fn corpus_spec(&self) -> CorpusSpec {
        CorpusSpec {
            n_samples: self.n_samples,
            vulnerable_ratio: self.vulnerable_ratio,
            distractors: (self.min_distractors, self.max_distractors),
            seed: self.seed,
        }
    }
}
