use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::ExperimentError;
use crate::classifier::TrainConfig;
use crate::cohort::DEFAULT_TRAIN_FRACTION;
use crate::corpus::{Specialty, DEFAULT_MAX_TOKENS};
use crate::embedding::EmbeddingSource;
use crate::projection::TsneConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusPaths {
    /// JSON-lines notes, one `{"doc_id","note_type","text"}` per line.
    pub notes: PathBuf,
    /// JSON-lines `{"sentence_id","label"}` annotations.
    pub annotations: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProjectionConfig {
    /// Rows sampled to fit the PCA rotation.
    pub background_size: usize,
    pub tsne: TsneConfig,
}

impl Default for ProjectionConfig {
    fn default() -> Self {
        ProjectionConfig { background_size: 1004, tsne: TsneConfig::default() }
    }
}

fn default_max_tokens() -> usize {
    DEFAULT_MAX_TOKENS
}

fn default_train_fraction() -> f64 {
    DEFAULT_TRAIN_FRACTION
}

fn default_recall_floor() -> f64 {
    0.9
}

/// Experiment configuration, stored as TOML. Relative paths resolve against
/// the directory holding the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    pub output_dir: PathBuf,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: usize,
    #[serde(default = "default_train_fraction")]
    pub train_fraction: f64,
    /// Recall floor for the precision operating point.
    #[serde(default = "default_recall_floor")]
    pub recall_floor: f64,
    pub corpus: CorpusPaths,
    /// Lexicon file per specialty name.
    pub lexicons: BTreeMap<String, PathBuf>,
    pub embedding: EmbeddingSource,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub projection: ProjectionConfig,
}

fn resolve(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self, ExperimentError> {
        let mut cfg: ExperimentConfig = toml::from_str(text).map_err(|e| ExperimentError::Config(e.to_string()))?;
        resolve(base_dir, &mut cfg.output_dir);
        resolve(base_dir, &mut cfg.corpus.notes);
        resolve(base_dir, &mut cfg.corpus.annotations);
        for p in cfg.lexicons.values_mut() {
            resolve(base_dir, p);
        }
        if let EmbeddingSource::File { path } = &mut cfg.embedding {
            resolve(base_dir, path);
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ExperimentError> {
        let text = std::fs::read_to_string(path).map_err(|_| ExperimentError::MissingPath {
            field: "config".into(),
            path: path.to_path_buf(),
        })?;
        Self::from_toml(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn to_toml(&self) -> Result<String, ExperimentError> {
        toml::to_string(self).map_err(|e| ExperimentError::Config(e.to_string()))
    }

    /// Specialties in lexicon order, paired with their lexicon paths.
    pub fn specialties(&self) -> Result<Vec<(Specialty, &Path)>, ExperimentError> {
        self.lexicons
            .iter()
            .map(|(name, path)| {
                let s: Specialty = name.parse().map_err(|e| ExperimentError::Config(format!("lexicons: {e}")))?;
                Ok((s, path.as_path()))
            })
            .collect()
    }

    /// Checks values and that every referenced input exists.
    pub fn validate(&self) -> Result<(), ExperimentError> {
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(ExperimentError::Config(format!("train_fraction {} not in (0, 1)", self.train_fraction)));
        }
        if self.max_tokens == 0 {
            return Err(ExperimentError::Config("max_tokens must be positive".into()));
        }
        if !(self.recall_floor > 0.0 && self.recall_floor <= 1.0) {
            return Err(ExperimentError::Config(format!("recall_floor {} not in (0, 1]", self.recall_floor)));
        }
        if self.lexicons.is_empty() {
            return Err(ExperimentError::Config("no lexicons configured".into()));
        }
        self.train.validate().map_err(|e| ExperimentError::Config(e.to_string()))?;
        let mut required: Vec<(String, &Path)> = vec![
            ("corpus.notes".into(), &self.corpus.notes),
            ("corpus.annotations".into(), &self.corpus.annotations),
        ];
        for (s, path) in self.specialties()? {
            required.push((format!("lexicons.{}", s.name()), path));
        }
        if let EmbeddingSource::File { path } = &self.embedding {
            required.push(("embedding.path".into(), path));
        }
        for (field, path) in required {
            if !path.exists() {
                return Err(ExperimentError::MissingPath { field, path: path.to_path_buf() });
            }
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form of the resolved config.
    pub fn digest(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("serializable");
        hex::encode(Sha256::digest(&canonical))
    }
}
