//! Feature ranking, the classifier families and grid-search model selection.

mod knn;
mod linear;
mod ranking;
mod selection;
mod tree;

pub use ranking::{rank_chi_squared, rank_f_score, rank_mutual_info, RankedFeatures, RankingMethod, DEFAULT_BINS};
pub use selection::{default_grid, default_grids, grid_search_select, validation_error, Selection, PREFIX_SIZES};
pub use tree::{Node, Tree};

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureEntry, FeatureSchema, FeatureVector, Statistic};
use crate::site::Grade;

/// Binary-labeled samples sharing one schema. `labels[i]` is true for the positive class.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    pub schema: FeatureSchema,
    pub samples: Vec<Vec<f64>>,
    pub labels: Vec<bool>,
}

impl TrainingSet {
    pub fn new(schema: FeatureSchema, samples: Vec<Vec<f64>>, labels: Vec<bool>) -> Result<Self> {
        if samples.len() != labels.len() {
            return Err(Error::DegenerateData(format!(
                "{} samples but {} labels",
                samples.len(),
                labels.len()
            )));
        }
        if let Some(row) = samples.iter().find(|r| r.len() != schema.len()) {
            return Err(Error::SchemaMismatch(format!(
                "sample has {} values, schema has {}",
                row.len(),
                schema.len()
            )));
        }
        if samples.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::DegenerateData("non-finite feature value".into()));
        }
        Ok(Self { schema, samples, labels })
    }

    /// Rows without named features; columns are called `x.f<j>.max`.
    pub fn from_rows(samples: Vec<Vec<f64>>, labels: Vec<bool>) -> Result<Self> {
        let dim = samples.first().map_or(0, Vec::len);
        Self::new(anonymous_schema(dim), samples, labels)
    }

    /// Vectors whose grade is in `positive` become positives, every other graded vector a negative.
    pub fn from_vectors(schema: &FeatureSchema, vectors: &[FeatureVector], positive: &[Grade]) -> Result<Self> {
        let mut samples = Vec::with_capacity(vectors.len());
        let mut labels = Vec::with_capacity(vectors.len());
        for v in vectors {
            let grade = v
                .grade
                .ok_or_else(|| Error::DegenerateData(format!("{} has no grade", v.image_id)))?;
            samples.push(v.values.clone());
            labels.push(positive.contains(&grade));
        }
        Self::new(schema.clone(), samples, labels)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.schema.len()
    }

    pub fn positive_count(&self) -> usize {
        self.labels.iter().filter(|&&l| l).count()
    }

    pub fn has_both_classes(&self) -> bool {
        let p = self.positive_count();
        p > 0 && p < self.len()
    }

    /// Rows at `rows`, in that order.
    pub fn subset_rows(&self, rows: &[usize]) -> TrainingSet {
        TrainingSet {
            schema: self.schema.clone(),
            samples: rows.iter().map(|&i| self.samples[i].clone()).collect(),
            labels: rows.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    /// Columns at `features`, in that order.
    pub fn select_features(&self, features: &[usize]) -> TrainingSet {
        TrainingSet {
            schema: self.schema.subset(features),
            samples: self
                .samples
                .iter()
                .map(|r| features.iter().map(|&j| r[j]).collect())
                .collect(),
            labels: self.labels.clone(),
        }
    }
}

fn anonymous_schema(dim: usize) -> FeatureSchema {
    FeatureSchema {
        entries: (0..dim)
            .map(|j| FeatureEntry {
                region: "x".into(),
                plane: format!("f{j}"),
                statistic: Statistic::Max,
            })
            .collect(),
    }
}

/// Classifier families, declared in canonical tie-break order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelFamily {
    LogisticRegression,
    LinearSvm,
    KNearestNeighbors,
    DecisionForest,
    BoostedDecisionTree,
}

impl ModelFamily {
    pub const ALL: [ModelFamily; 5] = [
        ModelFamily::LogisticRegression,
        ModelFamily::LinearSvm,
        ModelFamily::KNearestNeighbors,
        ModelFamily::DecisionForest,
        ModelFamily::BoostedDecisionTree,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelFamily::LogisticRegression => "logistic_regression",
            ModelFamily::LinearSvm => "linear_svm",
            ModelFamily::KNearestNeighbors => "k_nearest_neighbors",
            ModelFamily::DecisionForest => "decision_forest",
            ModelFamily::BoostedDecisionTree => "boosted_decision_tree",
        }
    }

    /// Hyperparameter names and whether each must be a positive integer.
    pub fn hyperparameters(self) -> &'static [(&'static str, bool)] {
        match self {
            ModelFamily::LogisticRegression => &[("l2", false)],
            ModelFamily::LinearSvm => &[("c", false)],
            ModelFamily::KNearestNeighbors => &[("k", true)],
            ModelFamily::DecisionForest => &[("trees", true), ("depth", true)],
            ModelFamily::BoostedDecisionTree => &[("rounds", true), ("depth", true), ("shrinkage", false)],
        }
    }

    fn uses_standardization(self) -> bool {
        matches!(
            self,
            ModelFamily::LogisticRegression | ModelFamily::LinearSvm | ModelFamily::KNearestNeighbors
        )
    }
}

impl fmt::Display for ModelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelFamily::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown model family {s:?}")))
    }
}

/// A family with concrete hyperparameters and a seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub family: ModelFamily,
    pub hyperparameters: BTreeMap<String, f64>,
    pub seed: u64,
}

impl ModelSpec {
    pub fn new(family: ModelFamily, params: &[(&str, f64)], seed: u64) -> Result<Self> {
        let spec = Self {
            family,
            hyperparameters: params.iter().map(|&(k, v)| (k.to_string(), v)).collect(),
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let expected = self.family.hyperparameters();
        if self.hyperparameters.len() != expected.len() {
            return Err(Error::InvalidConfig(format!(
                "{} takes {:?}, got {:?}",
                self.family,
                expected.iter().map(|e| e.0).collect::<Vec<_>>(),
                self.hyperparameters.keys().collect::<Vec<_>>()
            )));
        }
        for &(name, integer) in expected {
            let v = *self
                .hyperparameters
                .get(name)
                .ok_or_else(|| Error::InvalidConfig(format!("{} is missing {name}", self.family)))?;
            if !(v.is_finite() && v > 0.0) || (integer && v.fract() != 0.0) {
                return Err(Error::InvalidConfig(format!("{} has invalid {name} = {v}", self.family)));
            }
        }
        Ok(())
    }

    pub fn param(&self, name: &str) -> f64 {
        self.hyperparameters[name]
    }

    fn count(&self, name: &str) -> usize {
        self.param(name) as usize
    }
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.family)?;
        for (i, (k, v)) in self.hyperparameters.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{k}={v}")?;
        }
        f.write_str(")")
    }
}

/// Per-feature z-score constants; zero-variance features get unit scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(samples: &[Vec<f64>]) -> Self {
        let d = samples.first().map_or(0, Vec::len);
        let n = samples.len() as f64;
        let mut mean = vec![0.0; d];
        for r in samples {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for r in samples {
            for ((s, v), m) in var.iter_mut().zip(r).zip(&mean) {
                *s += (v - m).powi(2);
            }
        }
        let scale = var
            .into_iter()
            .map(|s| {
                let sd = (s / n).sqrt();
                if sd > 1e-12 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Self { mean, scale }
    }

    pub fn apply(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(&self.mean)
            .zip(&self.scale)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    }
}

/// Family-specific fitted parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FittedState {
    Linear { weights: Vec<f64>, bias: f64 },
    Knn { k: usize, samples: Vec<Vec<f64>>, labels: Vec<bool> },
    Forest { trees: Vec<Tree> },
    Boosted { base: f64, shrinkage: f64, trees: Vec<Tree> },
}

/// A fitted classifier over a chosen subset of its input schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub spec: ModelSpec,
    pub input_dim: usize,
    pub selected_feature_indices: Vec<usize>,
    pub standardizer: Option<Standardizer>,
    pub state: FittedState,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub label: bool,
    pub score: f64,
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Fits `spec` on every feature of `data`.
pub fn train(spec: &ModelSpec, data: &TrainingSet) -> Result<TrainedModel> {
    let all: Vec<usize> = (0..data.dim()).collect();
    train_selected(spec, data, &all)
}

/// Fits `spec` on the columns `features` of `data`; predictions still take full-width vectors.
pub fn train_selected(spec: &ModelSpec, data: &TrainingSet, features: &[usize]) -> Result<TrainedModel> {
    spec.validate()?;
    if data.is_empty() {
        return Err(Error::DegenerateData("empty training set".into()));
    }
    if features.is_empty() || features.iter().any(|&j| j >= data.dim()) {
        return Err(Error::InvalidConfig(format!(
            "feature selection {features:?} does not fit {} columns",
            data.dim()
        )));
    }
    if spec.family != ModelFamily::KNearestNeighbors && !data.has_both_classes() {
        return Err(Error::DegenerateData(format!("{} needs both classes", spec.family)));
    }
    let raw: Vec<Vec<f64>> = data
        .samples
        .iter()
        .map(|r| features.iter().map(|&j| r[j]).collect())
        .collect();
    let standardizer = spec.family.uses_standardization().then(|| Standardizer::fit(&raw));
    let x = match &standardizer {
        Some(s) => raw.iter().map(|r| s.apply(r)).collect(),
        None => raw,
    };
    let y = &data.labels;
    let state = match spec.family {
        ModelFamily::LogisticRegression => linear::fit_logistic(&x, y, spec.param("l2")),
        ModelFamily::LinearSvm => linear::fit_svm(&x, y, spec.param("c")),
        ModelFamily::KNearestNeighbors => knn::fit(&x, y, spec.count("k"))?,
        ModelFamily::DecisionForest => tree::fit_forest(&x, y, spec.count("trees"), spec.count("depth"), spec.seed),
        ModelFamily::BoostedDecisionTree => {
            tree::fit_boosted(&x, y, spec.count("rounds"), spec.count("depth"), spec.param("shrinkage"))
        }
    };
    Ok(TrainedModel {
        spec: spec.clone(),
        input_dim: data.dim(),
        selected_feature_indices: features.to_vec(),
        standardizer,
        state,
    })
}

impl TrainedModel {
    /// Score in [0, 1] and the hard label `score ≥ 0.5` for a full-width input row.
    pub fn predict_values(&self, values: &[f64]) -> Result<Prediction> {
        if values.len() != self.input_dim {
            return Err(Error::SchemaMismatch(format!(
                "model expects {} features, got {}",
                self.input_dim,
                values.len()
            )));
        }
        let picked: Vec<f64> = self.selected_feature_indices.iter().map(|&j| values[j]).collect();
        let x = match &self.standardizer {
            Some(s) => s.apply(&picked),
            None => picked,
        };
        let score = match &self.state {
            FittedState::Linear { weights, bias } => {
                sigmoid(weights.iter().zip(&x).map(|(w, v)| w * v).sum::<f64>() + bias)
            }
            FittedState::Knn { k, samples, labels } => knn::score(samples, labels, *k, &x),
            FittedState::Forest { trees } => trees.iter().map(|t| t.evaluate(&x)).sum::<f64>() / trees.len() as f64,
            FittedState::Boosted { base, shrinkage, trees } => {
                sigmoid(base + shrinkage * trees.iter().map(|t| t.evaluate(&x)).sum::<f64>())
            }
        };
        let score = score.clamp(0.0, 1.0);
        Ok(Prediction {
            label: score >= 0.5,
            score,
        })
    }

    pub fn predict_set(&self, data: &TrainingSet) -> Result<Vec<Prediction>> {
        data.samples.iter().map(|r| self.predict_values(r)).collect()
    }
}

pub fn predict(model: &TrainedModel, vector: &FeatureVector) -> Result<Prediction> {
    model.predict_values(&vector.values)
}
