//! Stratified folds, the two-step hierarchical cascade under double cross-validation, and
//! PR/RE/Acc/AUC reporting.

mod cv;
mod folds;
mod hierarchy;
mod metrics;
mod report;

pub use cv::{
    fit_cascade, fit_step, per_plane_classification_rates, prefix_sizes, run_hierarchical_cv, CvConfig,
    FittedCascade, FittedStep,
};
pub use folds::{make_stratified_folds, FoldPlan};
pub use hierarchy::HierarchyPlan;
pub use metrics::{compute_auc, compute_metrics, ConfusionMatrix, Metrics};
pub use report::{EvaluationReport, FoldSummary, PlaneRate, SamplePrediction, StepChoice, StepReport};
