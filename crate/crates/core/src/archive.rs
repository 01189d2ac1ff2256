//! Versioned JSON container for a trained cascade.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::{FittedCascade, HierarchyPlan};
use crate::features::FeatureSchema;
use crate::models::{Prediction, RankingMethod};
use crate::pipeline::{FeatureModel, PipelineConfig};
use crate::site::{Grade, Site};

pub const ARCHIVE_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchiveMetadata {
    pub crate_version: String,
    pub seed: u64,
    pub ranking: RankingMethod,
    pub training_samples: usize,
    pub grade_histogram: [usize; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelArchive {
    pub format_version: u32,
    pub site: Site,
    pub feature_model: FeatureModel,
    pub plan: HierarchyPlan,
    pub schema: FeatureSchema,
    pub schema_hash: String,
    pub pipeline: PipelineConfig,
    pub cascade: FittedCascade,
    pub metadata: ArchiveMetadata,
}

/// Cascade output for one vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CascadePrediction {
    pub grades: Vec<Grade>,
    pub step1: Prediction,
    /// Present when step 1 routed the sample to step 2.
    pub step2: Option<Prediction>,
}

impl ModelArchive {
    pub fn new(
        site: Site,
        feature_model: FeatureModel,
        plan: HierarchyPlan,
        schema: FeatureSchema,
        pipeline: PipelineConfig,
        cascade: FittedCascade,
        metadata: ArchiveMetadata,
    ) -> Self {
        Self {
            format_version: ARCHIVE_FORMAT_VERSION,
            site,
            feature_model,
            plan,
            schema_hash: schema.hash(),
            schema,
            pipeline,
            cascade,
            metadata,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: serde_json::Value = serde_json::from_str(text)?;
        match raw.get("format_version").and_then(serde_json::Value::as_u64) {
            Some(v) if v == u64::from(ARCHIVE_FORMAT_VERSION) => {}
            Some(v) => {
                return Err(Error::Archive(format!(
                    "format version {v} is not supported (expected {ARCHIVE_FORMAT_VERSION})"
                )))
            }
            None => return Err(Error::Archive("missing format_version".into())),
        }
        let archive: ModelArchive = serde_json::from_value(raw)?;
        if archive.schema.hash() != archive.schema_hash {
            return Err(Error::Archive("stored schema hash does not match the stored schema".into()));
        }
        for step in archive.cascade.steps() {
            if step.model.input_dim != archive.schema.len() {
                return Err(Error::Archive("step model width differs from the schema".into()));
            }
        }
        archive.plan.validate()?;
        Ok(archive)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::MissingFile(path.to_path_buf()),
            _ => Error::Io(e),
        })?;
        Self::from_json(&text)
    }

    /// Rejects feature data laid out under a different schema.
    pub fn check_schema(&self, schema: &FeatureSchema) -> Result<()> {
        if schema.hash() != self.schema_hash {
            return Err(Error::SchemaMismatch(format!(
                "archive expects {} {} features (schema {}), input has {} (schema {})",
                self.schema.len(),
                self.feature_model,
                &self.schema_hash[..12],
                schema.len(),
                &schema.hash()[..12]
            )));
        }
        Ok(())
    }

    pub fn predict_values(&self, values: &[f64]) -> Result<CascadePrediction> {
        let step1 = self.cascade.step1.model.predict_values(values)?;
        if step1.label {
            return Ok(CascadePrediction {
                grades: self.plan.step1.0.clone(),
                step1,
                step2: None,
            });
        }
        let step2 = self.cascade.step2.model.predict_values(values)?;
        Ok(CascadePrediction {
            grades: self.plan.outcome(false, step2.label).to_vec(),
            step1,
            step2: Some(step2),
        })
    }
}
