//! Univariate feature ranking: Fisher F-score, mutual information and chi-squared.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::TrainingSet;

const F_SCORE_EPS: f64 = 1e-12;
pub const DEFAULT_BINS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankingMethod {
    FScore,
    MutualInfo,
    ChiSquared,
}

impl RankingMethod {
    pub const ALL: [RankingMethod; 3] = [RankingMethod::FScore, RankingMethod::MutualInfo, RankingMethod::ChiSquared];

    pub fn name(self) -> &'static str {
        match self {
            RankingMethod::FScore => "f_score",
            RankingMethod::MutualInfo => "mutual_info",
            RankingMethod::ChiSquared => "chi_squared",
        }
    }

    pub fn rank(self, data: &TrainingSet) -> Result<RankedFeatures> {
        match self {
            RankingMethod::FScore => rank_f_score(data),
            RankingMethod::MutualInfo => rank_mutual_info(data, DEFAULT_BINS),
            RankingMethod::ChiSquared => rank_chi_squared(data, DEFAULT_BINS),
        }
    }
}

impl std::str::FromStr for RankingMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        RankingMethod::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown ranking method {s:?}")))
    }
}

/// Features sorted by descending score; ties keep the lower index first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedFeatures {
    pub order: Vec<usize>,
    pub scores: Vec<f64>,
    pub method: RankingMethod,
}

impl RankedFeatures {
    fn from_scores(scores: Vec<f64>, method: RankingMethod) -> Self {
        let mut order: Vec<usize> = (0..scores.len()).collect();
        order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
        Self { order, scores, method }
    }

    pub fn top(&self, k: usize) -> Vec<usize> {
        self.order.iter().take(k).copied().collect()
    }
}

fn require_both_classes(data: &TrainingSet) -> Result<()> {
    let pos = data.positive_count();
    if pos == 0 || pos == data.len() {
        return Err(Error::SingleClassData);
    }
    Ok(())
}

/// `(μ₊ − μ₋)² / (σ₊² + σ₋² + ε)` with population variances.
pub fn rank_f_score(data: &TrainingSet) -> Result<RankedFeatures> {
    require_both_classes(data)?;
    let scores = (0..data.dim())
        .map(|j| {
            let (mut pos, mut neg) = (Vec::new(), Vec::new());
            for (row, &label) in data.samples.iter().zip(&data.labels) {
                if label {
                    pos.push(row[j]);
                } else {
                    neg.push(row[j]);
                }
            }
            let (mp, vp) = mean_var(&pos);
            let (mn, vn) = mean_var(&neg);
            (mp - mn).powi(2) / (vp + vn + F_SCORE_EPS)
        })
        .collect();
    Ok(RankedFeatures::from_scores(scores, RankingMethod::FScore))
}

fn mean_var(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var)
}

/// Equal-width bin index of every sample of feature `j` over its observed range.
fn bin_feature(data: &TrainingSet, j: usize, bins: usize) -> Vec<usize> {
    let (lo, hi) = data
        .samples
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), r| (l.min(r[j]), h.max(r[j])));
    let width = hi - lo;
    data.samples
        .iter()
        .map(|r| {
            if width <= 0.0 {
                0
            } else {
                (((r[j] - lo) / width * bins as f64) as usize).min(bins - 1)
            }
        })
        .collect()
}

/// Bin × label contingency table, `table[bin][label as usize]`.
fn contingency(data: &TrainingSet, j: usize, bins: usize) -> Vec<[f64; 2]> {
    let mut table = vec![[0.0; 2]; bins];
    for (b, &label) in bin_feature(data, j, bins).into_iter().zip(&data.labels) {
        table[b][usize::from(label)] += 1.0;
    }
    table
}

fn check_bins(bins: usize) -> Result<()> {
    if bins < 2 {
        return Err(Error::InvalidConfig(format!("need at least 2 bins, got {bins}")));
    }
    Ok(())
}

/// Mutual information (nats) between the binned feature and the label.
pub fn rank_mutual_info(data: &TrainingSet, bins: usize) -> Result<RankedFeatures> {
    require_both_classes(data)?;
    check_bins(bins)?;
    let n = data.len() as f64;
    let scores = (0..data.dim())
        .map(|j| {
            let table = contingency(data, j, bins);
            let col = [0, 1].map(|c| table.iter().map(|r| r[c]).sum::<f64>());
            let mut mi = 0.0;
            for row in &table {
                let row_sum = row[0] + row[1];
                for c in 0..2 {
                    if row[c] > 0.0 {
                        mi += row[c] / n * (row[c] * n / (row_sum * col[c])).ln();
                    }
                }
            }
            mi.max(0.0)
        })
        .collect();
    Ok(RankedFeatures::from_scores(scores, RankingMethod::MutualInfo))
}

/// Pearson chi-squared statistic of the bin × label table; zero-expectation cells skipped.
pub fn rank_chi_squared(data: &TrainingSet, bins: usize) -> Result<RankedFeatures> {
    require_both_classes(data)?;
    check_bins(bins)?;
    let n = data.len() as f64;
    let scores = (0..data.dim())
        .map(|j| {
            let table = contingency(data, j, bins);
            let col = [0, 1].map(|c| table.iter().map(|r| r[c]).sum::<f64>());
            let mut chi = 0.0;
            for row in &table {
                let row_sum = row[0] + row[1];
                for c in 0..2 {
                    let expected = row_sum * col[c] / n;
                    if expected > 0.0 {
                        chi += (row[c] - expected).powi(2) / expected;
                    }
                }
            }
            chi
        })
        .collect();
    Ok(RankedFeatures::from_scores(scores, RankingMethod::ChiSquared))
}
