use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fold index of every sample.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub assignments: Vec<usize>,
    pub stratified: bool,
}

impl FoldPlan {
    pub fn len(&self) -> usize {
        self.assignments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty()
    }

    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.assignments[i] == fold).collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.assignments[i] != fold).collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &a in &self.assignments {
            sizes[a] += 1;
        }
        sizes
    }
}

/// Shuffles each class with a seeded RNG, then deals the classes (in sorted class order)
/// round-robin onto the folds with one running counter, so fold sizes and per-class counts
/// both differ by at most one.
pub fn make_stratified_folds<T: Ord + Copy>(labels: &[T], k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 || k > labels.len() {
        return Err(Error::TooFewSamples { n: labels.len(), k });
    }
    let mut classes: Vec<T> = labels.to_vec();
    classes.sort();
    classes.dedup();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignments = vec![0; labels.len()];
    let mut counter = 0;
    for class in classes {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        members.shuffle(&mut rng);
        for i in members {
            assignments[i] = counter % k;
            counter += 1;
        }
    }
    Ok(FoldPlan {
        k,
        assignments,
        stratified: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sorted_sizes(plan: &FoldPlan) -> Vec<usize> {
        let mut s = plan.fold_sizes();
        s.sort_unstable_by(|a, b| b.cmp(a));
        s
    }

    #[test]
    fn corpus_fold_sizes() {
        let eye: Vec<u8> = [vec![0; 6], vec![1; 7], vec![2; 14]].concat();
        assert_eq!(sorted_sizes(&make_stratified_folds(&eye, 5, 1).unwrap()), vec![6, 6, 5, 5, 5]);
        let tongue: Vec<u8> = [vec![0; 18], vec![1; 3], vec![2; 35]].concat();
        assert_eq!(sorted_sizes(&make_stratified_folds(&tongue, 3, 1).unwrap()), vec![19, 19, 18]);
    }

    #[test]
    fn three_members_three_folds() {
        let labels = [0u8, 1, 1, 0, 1, 0, 2, 2, 2];
        let plan = make_stratified_folds(&labels, 3, 9).unwrap();
        for class in 0..3u8 {
            let mut folds: Vec<usize> = (0..9).filter(|&i| labels[i] == class).map(|i| plan.assignments[i]).collect();
            folds.sort_unstable();
            assert_eq!(folds, vec![0, 1, 2]);
        }
    }

    #[test]
    fn too_few_samples() {
        assert!(matches!(make_stratified_folds(&[0u8, 1], 3, 0), Err(Error::TooFewSamples { n: 2, k: 3 })));
        assert!(make_stratified_folds(&[0u8, 1], 1, 0).is_err());
    }

    proptest! {
        #[test]
        fn stratification_bounds(labels in proptest::collection::vec(0u8..3, 10..80), k in 2usize..6, seed: u64) {
            let plan = make_stratified_folds(&labels, k, seed).unwrap();
            let sizes = plan.fold_sizes();
            prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
            for class in 0..3u8 {
                let mut per = vec![0usize; k];
                for (i, &l) in labels.iter().enumerate() {
                    if l == class {
                        per[plan.assignments[i]] += 1;
                    }
                }
                prop_assert!(per.iter().max().unwrap() - per.iter().min().unwrap() <= 1);
            }
            // Test folds partition the samples; no sample is in its own training fold.
            let mut seen = vec![0; labels.len()];
            for f in 0..k {
                for i in plan.test_indices(f) {
                    seen[i] += 1;
                    prop_assert!(!plan.train_indices(f).contains(&i));
                }
            }
            prop_assert!(seen.iter().all(|&c| c == 1));
        }

        #[test]
        fn folds_are_seed_deterministic(labels in proptest::collection::vec(0u8..3, 10..40), seed: u64) {
            prop_assert_eq!(make_stratified_folds(&labels, 3, seed).unwrap(), make_stratified_folds(&labels, 3, seed).unwrap());
        }
    }
}
