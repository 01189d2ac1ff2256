//! Double cross-validation of the two-step cascade, and per-plane classification rates.

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureSchema, FeatureVector, PlaneKey};
use crate::models::{train_selected, ModelSpec, RankingMethod, TrainedModel, TrainingSet, PREFIX_SIZES};
use crate::site::Grade;

use super::folds::{make_stratified_folds, FoldPlan};
use super::hierarchy::HierarchyPlan;
use super::metrics::{compute_auc, compute_metrics, ConfusionMatrix};
use super::report::{EvaluationReport, FoldSummary, PlaneRate, SamplePrediction, StepChoice, StepReport};

/// A step classifier chosen by inner cross-validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedStep {
    pub model: TrainedModel,
    pub prefix: usize,
    /// Pooled accuracy over the inner validation folds for the chosen (prefix, candidate).
    pub inner_accuracy: f64,
}

/// Prefix lengths of a ranked list over `dim` features: the standard sizes up to `dim`, plus
/// `dim` itself when it falls below the largest standard size.
pub fn prefix_sizes(dim: usize) -> Vec<usize> {
    let mut sizes: Vec<usize> = PREFIX_SIZES.iter().copied().filter(|&p| p <= dim).collect();
    let largest = PREFIX_SIZES[PREFIX_SIZES.len() - 1];
    if dim < largest && sizes.last() != Some(&dim) {
        sizes.push(dim);
    }
    sizes
}

/// Chooses the ranked-prefix length and the candidate jointly by pooled accuracy over
/// `inner_k` stratified folds of `data`, then refits that choice on all of `data`.
///
/// Ties prefer the shorter prefix, then the canonical family order, then the earlier candidate.
/// Inner folds whose training part lacks a class are skipped; a candidate that cannot be
/// trained on a fold scores nothing there.
pub fn fit_step(
    data: &TrainingSet,
    method: RankingMethod,
    candidates: &[ModelSpec],
    prefixes: &[usize],
    inner_k: usize,
    seed: u64,
) -> Result<FittedStep> {
    if !data.has_both_classes() {
        return Err(Error::SingleClassData);
    }
    if candidates.is_empty() || prefixes.is_empty() {
        return Err(Error::InvalidConfig("empty candidate or prefix list".into()));
    }
    let inner = if inner_k >= 2 && inner_k <= data.len() {
        Some(make_stratified_folds(&data.labels, inner_k, seed)?)
    } else {
        None
    };
    // (ranking order, training rows, validation rows) of every usable inner fold.
    let mut splits = Vec::new();
    if let Some(plan) = &inner {
        for f in 0..plan.k {
            let (tr, va) = (plan.train_indices(f), plan.test_indices(f));
            let train = data.subset_rows(&tr);
            if va.is_empty() || !train.has_both_classes() {
                continue;
            }
            splits.push((method.rank(&train)?.order, train, data.subset_rows(&va)));
        }
    }
    let jobs: Vec<(usize, usize, usize)> = (0..splits.len())
        .flat_map(|s| (0..prefixes.len()).flat_map(move |p| (0..candidates.len()).map(move |c| (s, p, c))))
        .collect();
    let outcomes: Vec<usize> = jobs
        .par_iter()
        .map(|&(s, p, c)| {
            let (order, train, val) = &splits[s];
            let features = &order[..prefixes[p].min(order.len())];
            match train_selected(&candidates[c], train, features) {
                Ok(m) => Ok(m
                    .predict_set(val)?
                    .iter()
                    .zip(&val.labels)
                    .filter(|(pr, &l)| pr.label == l)
                    .count()),
                Err(Error::DegenerateData(_)) => Ok(0),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<_>>()?;
    let mut correct = vec![vec![0usize; candidates.len()]; prefixes.len()];
    for (&(_, p, c), n) in jobs.iter().zip(outcomes) {
        correct[p][c] += n;
    }
    let evaluated: usize = splits.iter().map(|s| s.2.len()).sum();
    let mut ranked: Vec<(usize, usize)> = (0..prefixes.len())
        .flat_map(|p| (0..candidates.len()).map(move |c| (p, c)))
        .collect();
    ranked.sort_by(|&(pa, ca), &(pb, cb)| {
        correct[pb][cb]
            .cmp(&correct[pa][ca])
            .then(prefixes[pa].cmp(&prefixes[pb]))
            .then(candidates[ca].family.cmp(&candidates[cb].family))
            .then(ca.cmp(&cb))
    });
    let order = method.rank(data)?.order;
    for (p, c) in ranked {
        let prefix = prefixes[p].min(order.len());
        match train_selected(&candidates[c], data, &order[..prefix]) {
            Ok(model) => {
                return Ok(FittedStep {
                    model,
                    prefix,
                    inner_accuracy: if evaluated == 0 {
                        0.0
                    } else {
                        correct[p][c] as f64 / evaluated as f64
                    },
                })
            }
            Err(Error::DegenerateData(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(Error::DegenerateData("no candidate could be trained".into()))
}

pub(crate) fn grades_of(vectors: &[FeatureVector]) -> Result<Vec<Grade>> {
    vectors
        .iter()
        .map(|v| {
            v.grade
                .ok_or_else(|| Error::DegenerateData(format!("{} has no grade", v.image_id)))
        })
        .collect()
}

/// Both cascade steps fitted on one training portion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedCascade {
    pub step1: FittedStep,
    pub step2: FittedStep,
}

impl FittedCascade {
    pub fn steps(&self) -> [&FittedStep; 2] {
        [&self.step1, &self.step2]
    }
}

/// Settings shared by the double cross-validation entry points.
#[derive(Debug, Clone, PartialEq)]
pub struct CvConfig {
    pub ranking: RankingMethod,
    pub candidates: Vec<ModelSpec>,
    pub seed: u64,
}

/// Fits the two steps of `plan` on `rows` of `vectors` with inner `inner_k`-fold selection.
pub fn fit_cascade(
    schema: &FeatureSchema,
    vectors: &[FeatureVector],
    rows: &[usize],
    plan: &HierarchyPlan,
    config: &CvConfig,
    inner_k: usize,
) -> Result<FittedCascade> {
    let grades = grades_of(vectors)?;
    let picked: Vec<FeatureVector> = rows.iter().map(|&i| vectors[i].clone()).collect();
    let step1_data = TrainingSet::from_vectors(schema, &picked, &plan.step1.0)?;
    let second: Vec<FeatureVector> = rows
        .iter()
        .filter(|&&i| plan.step1.1.contains(&grades[i]))
        .map(|&i| vectors[i].clone())
        .collect();
    let step2_data = TrainingSet::from_vectors(schema, &second, &plan.step2.0)?;
    for (name, d) in [(plan.step1_name(), &step1_data), (plan.step2_name(), &step2_data)] {
        if !d.has_both_classes() {
            return Err(Error::DegenerateData(format!("step {name} training data lacks a class")));
        }
    }
    let prefixes = prefix_sizes(schema.len());
    let step1 = fit_step(&step1_data, config.ranking, &config.candidates, &prefixes, inner_k, config.seed)?;
    let step2 = fit_step(
        &step2_data,
        config.ranking,
        &config.candidates,
        &prefixes,
        inner_k,
        config.seed.wrapping_add(1),
    )?;
    Ok(FittedCascade { step1, step2 })
}

/// Outer-fold evaluation of the cascade. Test-fold samples never reach ranking, prefix choice,
/// standardization or model selection. Metrics are pooled over the concatenated test predictions;
/// step 2 is scored on the test samples whose true grade lies on its side of step 1.
pub fn run_hierarchical_cv(
    schema: &FeatureSchema,
    vectors: &[FeatureVector],
    plan: &HierarchyPlan,
    folds: &FoldPlan,
    config: &CvConfig,
) -> Result<EvaluationReport> {
    plan.validate()?;
    if folds.len() != vectors.len() {
        return Err(Error::InvalidConfig(format!(
            "fold plan covers {} samples, {} given",
            folds.len(),
            vectors.len()
        )));
    }
    if let Some(v) = vectors.iter().find(|v| v.values.len() != schema.len()) {
        return Err(Error::SchemaMismatch(format!("{} does not match the schema", v.image_id)));
    }
    let grades = grades_of(vectors)?;
    let inner_k = folds.k.saturating_sub(1).max(2);
    let per_fold: Vec<(FoldSummary, Vec<SamplePrediction>)> = (0..folds.k)
        .into_par_iter()
        .map(|f| {
            let test = folds.test_indices(f);
            let fold_config = CvConfig {
                seed: config.seed.wrapping_add(100 + 2 * f as u64),
                ..config.clone()
            };
            let cascade = match fit_cascade(schema, vectors, &folds.train_indices(f), plan, &fold_config, inner_k) {
                Ok(c) => c,
                Err(Error::DegenerateData(reason)) => {
                    let err = Error::DegenerateFold { fold: f, reason };
                    warn!("{err}; fold skipped");
                    return Ok((FoldSummary::skipped(f, test.len(), err.to_string()), Vec::new()));
                }
                Err(e) => return Err(e),
            };
            let mut preds = Vec::with_capacity(test.len());
            for &i in &test {
                let v = &vectors[i];
                let s1 = cascade.step1.model.predict_values(&v.values)?;
                let s2 = cascade.step2.model.predict_values(&v.values)?;
                preds.push(SamplePrediction {
                    index: i,
                    image_id: v.image_id.clone(),
                    grade: grades[i],
                    fold: f,
                    step1_score: s1.score,
                    step1_label: s1.label,
                    step2_score: s2.score,
                    step2_label: s2.label,
                    predicted: plan
                        .outcome(s1.label, s2.label)
                        .iter()
                        .map(Grade::to_string)
                        .collect::<Vec<_>>()
                        .join(","),
                });
            }
            let choices = cascade
                .steps()
                .map(|s| StepChoice {
                    model: s.model.spec.to_string(),
                    prefix: s.prefix,
                    inner_accuracy: s.inner_accuracy,
                })
                .to_vec();
            Ok((FoldSummary::evaluated(f, test.len(), choices), preds))
        })
        .collect::<Result<_>>()?;

    let mut summaries = Vec::with_capacity(folds.k);
    let mut predictions = Vec::new();
    let mut warnings = Vec::new();
    for (summary, preds) in per_fold {
        if let Some(w) = &summary.skipped {
            warnings.push(w.clone());
        }
        summaries.push(summary);
        predictions.extend(preds);
    }
    if predictions.is_empty() {
        return Err(Error::DegenerateFold {
            fold: 0,
            reason: format!("every outer fold was skipped: {}", warnings.join("; ")),
        });
    }
    predictions.sort_by_key(|p| p.index);

    let step1_pairs: Vec<(bool, bool, f64)> = predictions
        .iter()
        .map(|p| (plan.step1.0.contains(&p.grade), p.step1_label, p.step1_score))
        .collect();
    let step2_pairs: Vec<(bool, bool, f64)> = predictions
        .iter()
        .filter(|p| plan.step1.1.contains(&p.grade))
        .map(|p| (plan.step2.0.contains(&p.grade), p.step2_label, p.step2_score))
        .collect();
    let steps = vec![
        step_report(plan.step1_name(), &plan.step1, &step1_pairs),
        step_report(plan.step2_name(), &plan.step2, &step2_pairs),
    ];
    Ok(EvaluationReport {
        label: String::new(),
        ranking: config.ranking,
        plan: plan.clone(),
        folds: folds.clone(),
        steps,
        fold_summaries: summaries,
        predictions,
        warnings,
        plane_rates: None,
    })
}

fn step_report(name: String, sides: &(Vec<Grade>, Vec<Grade>), rows: &[(bool, bool, f64)]) -> StepReport {
    let confusion = ConfusionMatrix::from_pairs(rows.iter().map(|r| (r.0, r.1)));
    let scores: Vec<f64> = rows.iter().map(|r| r.2).collect();
    let truth: Vec<bool> = rows.iter().map(|r| r.0).collect();
    StepReport {
        name,
        positive: sides.0.clone(),
        negative: sides.1.clone(),
        confusion,
        metrics: compute_metrics(&confusion).ok(),
        auc: compute_auc(&scores, &truth).ok(),
    }
}

/// Cross-validated accuracy of a classifier restricted to each of the 36 planes' three
/// statistics, for the binary task `positive` vs the other grades. Sorted by descending
/// accuracy; equal accuracies keep the canonical plane order.
pub fn per_plane_classification_rates(
    schema: &FeatureSchema,
    vectors: &[FeatureVector],
    positive: &[Grade],
    folds: &FoldPlan,
    config: &CvConfig,
) -> Result<Vec<PlaneRate>> {
    if folds.len() != vectors.len() {
        return Err(Error::InvalidConfig("fold plan does not cover the vectors".into()));
    }
    let data = TrainingSet::from_vectors(schema, vectors, positive)?;
    let keys = PlaneKey::all();
    let inner_k = folds.k.saturating_sub(1).max(2);
    let mut rates: Vec<PlaneRate> = keys
        .par_iter()
        .map(|key| {
            let name = key.to_string();
            let cols: Vec<usize> = (0..schema.len()).filter(|&j| schema.entries[j].plane == name).collect();
            if cols.is_empty() {
                return Err(Error::SchemaMismatch(format!("no features for plane {name}")));
            }
            let plane_data = data.select_features(&cols);
            let mut correct = 0;
            let mut evaluated = 0;
            for f in 0..folds.k {
                let train = plane_data.subset_rows(&folds.train_indices(f));
                if !train.has_both_classes() {
                    let err = Error::DegenerateFold {
                        fold: f,
                        reason: "training portion lacks a class".into(),
                    };
                    warn!("{name}: {err}; fold skipped");
                    continue;
                }
                let step = fit_step(
                    &train,
                    config.ranking,
                    &config.candidates,
                    &[cols.len()],
                    inner_k,
                    config.seed.wrapping_add(100 + 2 * f as u64),
                )?;
                let test = plane_data.subset_rows(&folds.test_indices(f));
                correct += step
                    .model
                    .predict_set(&test)?
                    .iter()
                    .zip(&test.labels)
                    .filter(|(p, &l)| p.label == l)
                    .count();
                evaluated += test.len();
            }
            if evaluated == 0 {
                return Err(Error::DegenerateFold {
                    fold: 0,
                    reason: format!("no fold of plane {name} could be evaluated"),
                });
            }
            Ok(PlaneRate {
                plane: name,
                accuracy: correct as f64 / evaluated as f64,
                evaluated,
            })
        })
        .collect::<Result<_>>()?;
    rates.sort_by(|a, b| b.accuracy.total_cmp(&a.accuracy));
    Ok(rates)
}
