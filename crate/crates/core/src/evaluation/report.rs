use std::fmt::Write as _;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::models::RankingMethod;
use crate::site::Grade;

use super::folds::FoldPlan;
use super::hierarchy::HierarchyPlan;
use super::metrics::{ConfusionMatrix, Metrics};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    pub name: String,
    pub positive: Vec<Grade>,
    pub negative: Vec<Grade>,
    pub confusion: ConfusionMatrix,
    /// None when the step saw no test samples.
    pub metrics: Option<Metrics>,
    /// None when the step's test samples hold a single class.
    pub auc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepChoice {
    pub model: String,
    pub prefix: usize,
    pub inner_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldSummary {
    pub fold: usize,
    pub test_size: usize,
    pub steps: Vec<StepChoice>,
    pub skipped: Option<String>,
}

impl FoldSummary {
    pub fn evaluated(fold: usize, test_size: usize, steps: Vec<StepChoice>) -> Self {
        Self {
            fold,
            test_size,
            steps,
            skipped: None,
        }
    }

    pub fn skipped(fold: usize, test_size: usize, reason: String) -> Self {
        Self {
            fold,
            test_size,
            steps: Vec::new(),
            skipped: Some(reason),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplePrediction {
    pub index: usize,
    pub image_id: String,
    pub grade: Grade,
    pub fold: usize,
    pub step1_score: f64,
    pub step1_label: bool,
    pub step2_score: f64,
    pub step2_label: bool,
    /// Grade set the cascade routes the sample to, e.g. `"1"` or `"0,2"`.
    pub predicted: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlaneRate {
    pub plane: String,
    pub accuracy: f64,
    pub evaluated: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    /// Free-form run label such as `"eye m1"`.
    pub label: String,
    pub ranking: RankingMethod,
    pub plan: HierarchyPlan,
    pub folds: FoldPlan,
    pub steps: Vec<StepReport>,
    pub fold_summaries: Vec<FoldSummary>,
    pub predictions: Vec<SamplePrediction>,
    pub warnings: Vec<String>,
    pub plane_rates: Option<Vec<PlaneRate>>,
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.3}"))
}

impl EvaluationReport {
    pub fn step(&self, name: &str) -> Option<&StepReport> {
        self.steps.iter().find(|s| s.name == name)
    }

    /// Human-readable table: one column per hierarchical step, rows PR, RE, Acc and AUC.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let evaluated = self.fold_summaries.iter().filter(|f| f.skipped.is_none()).count();
        if !self.label.is_empty() {
            let _ = writeln!(out, "{}", self.label);
        }
        let _ = writeln!(
            out,
            "metrics pooled over the test predictions of {evaluated}/{} outer folds; ranking {}",
            self.folds.k,
            self.ranking.name()
        );
        let _ = writeln!(out);
        let _ = write!(out, "{:<6}", "");
        for s in &self.steps {
            let _ = write!(out, "{:>10}", s.name);
        }
        let _ = writeln!(out);
        let rows: [(&str, fn(&StepReport) -> Option<f64>); 4] = [
            ("PR", |s| s.metrics.map(|m| m.precision)),
            ("RE", |s| s.metrics.map(|m| m.recall)),
            ("Acc", |s| s.metrics.map(|m| m.accuracy)),
            ("AUC", |s| s.auc),
        ];
        for (name, get) in rows {
            let _ = write!(out, "{name:<6}");
            for s in &self.steps {
                let _ = write!(out, "{:>10}", cell(get(s)));
            }
            let _ = writeln!(out);
        }
        let _ = writeln!(out);
        for s in &self.steps {
            let c = s.confusion;
            let _ = writeln!(out, "{}: tp={} fp={} tn={} fn={}", s.name, c.tp, c.fp, c.tn, c.fn_);
        }
        let _ = writeln!(out);
        for f in &self.fold_summaries {
            match &f.skipped {
                Some(reason) => {
                    let _ = writeln!(out, "fold {} ({} test): skipped, {reason}", f.fold, f.test_size);
                }
                None => {
                    let steps: Vec<String> = f
                        .steps
                        .iter()
                        .zip(&self.steps)
                        .map(|(c, s)| format!("{} -> {} top {}", s.name, c.model, c.prefix))
                        .collect();
                    let _ = writeln!(out, "fold {} ({} test): {}", f.fold, f.test_size, steps.join("; "));
                }
            }
        }
        if let Some(rates) = &self.plane_rates {
            let _ = writeln!(out);
            let _ = writeln!(out, "per-plane classification rate ({})", self.steps[0].name);
            for r in rates {
                let _ = writeln!(out, "{:<28}{:.3}", r.plane, r.accuracy);
            }
        }
        for w in &self.warnings {
            let _ = writeln!(out, "warning: {w}");
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn write_predictions_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record([
            "image_id",
            "grade",
            "fold",
            "step1_score",
            "step1_label",
            "step2_score",
            "step2_label",
            "predicted",
        ])?;
        for p in &self.predictions {
            w.write_record([
                p.image_id.clone(),
                p.grade.to_string(),
                p.fold.to_string(),
                format!("{:?}", p.step1_score),
                u8::from(p.step1_label).to_string(),
                format!("{:?}", p.step2_score),
                u8::from(p.step2_label).to_string(),
                p.predicted.clone(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}
