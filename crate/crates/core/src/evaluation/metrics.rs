use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl ConfusionMatrix {
    pub fn new(tp: usize, fp: usize, tn: usize, fn_: usize) -> Self {
        Self { tp, fp, tn, fn_ }
    }

    /// Tallies `(truth, predicted)` pairs.
    pub fn from_pairs<I: IntoIterator<Item = (bool, bool)>>(pairs: I) -> Self {
        let mut cm = Self::default();
        for (truth, pred) in pairs {
            match (truth, pred) {
                (true, true) => cm.tp += 1,
                (false, true) => cm.fp += 1,
                (false, false) => cm.tn += 1,
                (true, false) => cm.fn_ += 1,
            }
        }
        cm
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub precision: f64,
    pub recall: f64,
    pub accuracy: f64,
    /// Set when `tp + fp = 0` and precision was reported as 0.
    pub precision_undefined: bool,
    /// Set when `tp + fn = 0` and recall was reported as 0.
    pub recall_undefined: bool,
}

pub fn compute_metrics(cm: &ConfusionMatrix) -> Result<Metrics> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::EmptyMatrix);
    }
    let ratio = |num: usize, den: usize| if den == 0 { (0.0, true) } else { (num as f64 / den as f64, false) };
    let (precision, precision_undefined) = ratio(cm.tp, cm.tp + cm.fp);
    let (recall, recall_undefined) = ratio(cm.tp, cm.tp + cm.fn_);
    Ok(Metrics {
        precision,
        recall,
        accuracy: (cm.tp + cm.tn) as f64 / total as f64,
        precision_undefined,
        recall_undefined,
    })
}

/// Mann–Whitney AUC: the fraction of positive/negative pairs ordered correctly, ties counting half.
pub fn compute_auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::DegenerateData(format!(
            "{} scores but {} labels",
            scores.len(),
            labels.len()
        )));
    }
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClassData);
    }
    // Midranks over the sorted scores.
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut ranks = vec![0.0; scores.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let mid = (i + j) as f64 / 2.0 + 1.0;
        for &o in &order[i..=j] {
            ranks[o] = mid;
        }
        i = j + 1;
    }
    let rank_sum: f64 = ranks.iter().zip(labels).filter(|(_, &l)| l).map(|(r, _)| r).sum();
    let u = rank_sum - (pos * (pos + 1)) as f64 / 2.0;
    Ok(u / (pos * neg) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn metric_examples() {
        let m = compute_metrics(&ConfusionMatrix::new(2, 1, 6, 1)).unwrap();
        assert_abs_diff_eq!(m.precision, 2.0 / 3.0);
        assert_abs_diff_eq!(m.recall, 2.0 / 3.0);
        assert_abs_diff_eq!(m.accuracy, 0.8);

        let m = compute_metrics(&ConfusionMatrix::new(4, 0, 3, 0)).unwrap();
        assert_eq!((m.precision, m.recall, m.accuracy), (1.0, 1.0, 1.0));

        let m = compute_metrics(&ConfusionMatrix::new(0, 0, 5, 3)).unwrap();
        assert_eq!(m.recall, 0.0);
        assert!(m.precision_undefined && !m.recall_undefined);

        assert!(matches!(compute_metrics(&ConfusionMatrix::default()), Err(Error::EmptyMatrix)));
    }

    #[test]
    fn auc_examples() {
        assert_eq!(compute_auc(&[0.9, 0.4, 0.35, 0.8], &[true, false, false, true]).unwrap(), 1.0);
        assert_eq!(compute_auc(&[0.9, 0.4, 0.35, 0.3], &[true, false, false, true]).unwrap(), 0.5);
        assert_eq!(compute_auc(&[0.9, 0.4, 0.85, 0.8], &[true, false, false, true]).unwrap(), 0.75);
        assert_eq!(compute_auc(&[0.5; 6], &[true, false, true, false, false, true]).unwrap(), 0.5);
        assert!(matches!(compute_auc(&[0.1, 0.2], &[true, true]), Err(Error::SingleClassData)));
    }

    #[test]
    fn from_pairs_counts() {
        let cm = ConfusionMatrix::from_pairs([(true, true), (true, false), (false, false), (false, true), (true, true)]);
        assert_eq!(cm, ConfusionMatrix::new(2, 1, 1, 1));
    }

    fn pair_auc(scores: &[f64], labels: &[bool]) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for (i, &li) in labels.iter().enumerate() {
            for (j, &lj) in labels.iter().enumerate() {
                if li && !lj {
                    den += 1.0;
                    num += match scores[i].total_cmp(&scores[j]) {
                        std::cmp::Ordering::Greater => 1.0,
                        std::cmp::Ordering::Equal => 0.5,
                        std::cmp::Ordering::Less => 0.0,
                    };
                }
            }
        }
        num / den
    }

    proptest! {
        #[test]
        fn auc_matches_pairs_and_is_rank_invariant(
            data in proptest::collection::vec((0u8..6, any::<bool>()), 2..40),
        ) {
            let scores: Vec<f64> = data.iter().map(|d| f64::from(d.0) / 5.0).collect();
            let mut labels: Vec<bool> = data.iter().map(|d| d.1).collect();
            labels[0] = true;
            labels[1] = false;
            let auc = compute_auc(&scores, &labels).unwrap();
            prop_assert!((auc - pair_auc(&scores, &labels)).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&auc));
            let warped: Vec<f64> = scores.iter().map(|s| (3.0 * s).exp() - 7.0).collect();
            prop_assert!((compute_auc(&warped, &labels).unwrap() - auc).abs() < 1e-12);
        }

        #[test]
        fn metric_identities(tp in 0usize..20, fp in 0usize..20, tn in 0usize..20, fn_ in 0usize..20) {
            let cm = ConfusionMatrix::new(tp, fp, tn, fn_);
            prop_assume!(cm.total() > 0);
            let m = compute_metrics(&cm).unwrap();
            prop_assert_eq!(m.accuracy, (tp + tn) as f64 / cm.total() as f64);
            if tp + fp > 0 {
                prop_assert_eq!(m.precision, tp as f64 / (tp + fp) as f64);
            }
            if tp + fn_ > 0 {
                prop_assert_eq!(m.recall, tp as f64 / (tp + fn_) as f64);
            }
        }
    }
}
