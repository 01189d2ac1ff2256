//! Hyperparameter grids and selection by lowest validation error.

use rayon::prelude::*;

use crate::error::{Error, Result};

use super::{train_selected, ModelFamily, ModelSpec, TrainedModel, TrainingSet};

/// Ranked-prefix lengths tried when choosing how many features to keep.
pub const PREFIX_SIZES: [usize; 6] = [5, 10, 15, 20, 27, 54];

/// The built-in grid of `family`, in grid-point order.
pub fn default_grid(family: ModelFamily, seed: u64) -> Vec<ModelSpec> {
    let points: Vec<Vec<(&str, f64)>> = match family {
        ModelFamily::LogisticRegression => [0.01, 0.1, 1.0].iter().map(|&v| vec![("l2", v)]).collect(),
        ModelFamily::LinearSvm => [0.1, 1.0, 10.0].iter().map(|&v| vec![("c", v)]).collect(),
        ModelFamily::KNearestNeighbors => [1.0, 3.0, 5.0].iter().map(|&v| vec![("k", v)]).collect(),
        ModelFamily::DecisionForest => [16.0, 64.0]
            .iter()
            .flat_map(|&t| [4.0, 8.0].map(|d| vec![("trees", t), ("depth", d)]))
            .collect(),
        ModelFamily::BoostedDecisionTree => [50.0, 200.0]
            .iter()
            .flat_map(|&r| [2.0, 3.0].map(|d| vec![("rounds", r), ("depth", d), ("shrinkage", 0.1)]))
            .collect(),
    };
    points
        .iter()
        .map(|p| ModelSpec::new(family, p, seed).expect("built-in grid is valid"))
        .collect()
}

/// Every family's default grid, concatenated in canonical order.
pub fn default_grids(seed: u64) -> Vec<ModelSpec> {
    ModelFamily::ALL.into_iter().flat_map(|f| default_grid(f, seed)).collect()
}

/// Fraction of `data` misclassified by `model`.
pub fn validation_error(model: &TrainedModel, data: &TrainingSet) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::DegenerateData("empty validation set".into()));
    }
    let preds = model.predict_set(data)?;
    let wrong = preds.iter().zip(&data.labels).filter(|(p, &l)| p.label != l).count();
    Ok(wrong as f64 / data.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub model: TrainedModel,
    pub validation_error: f64,
    /// Position of the winner in the candidate list.
    pub candidate: usize,
}

/// Trains every candidate on `train` (columns `features`), scores it on `validation`, and
/// returns the lowest error. Ties go to the earlier family in canonical order, then to the
/// earlier candidate. Candidates the data cannot support (e.g. k above the sample count) are skipped.
pub fn grid_search_select(
    candidates: &[ModelSpec],
    train: &TrainingSet,
    validation: &TrainingSet,
    features: &[usize],
) -> Result<Selection> {
    if !train.has_both_classes() {
        return Err(Error::DegenerateData("training split lacks a class".into()));
    }
    let fitted: Vec<Option<(TrainedModel, f64)>> = candidates
        .par_iter()
        .map(|spec| match train_selected(spec, train, features) {
            Ok(m) => validation_error(&m, validation).map(|e| Some((m, e))),
            Err(Error::DegenerateData(_)) => Ok(None),
            Err(e) => Err(e),
        })
        .collect::<Result<_>>()?;
    fitted
        .into_iter()
        .enumerate()
        .filter_map(|(i, f)| f.map(|(m, e)| (i, m, e)))
        .min_by(|a, b| {
            a.2.total_cmp(&b.2)
                .then(a.1.spec.family.cmp(&b.1.spec.family))
                .then(a.0.cmp(&b.0))
        })
        .map(|(candidate, model, validation_error)| Selection {
            model,
            validation_error,
            candidate,
        })
        .ok_or_else(|| Error::DegenerateData("no candidate could be trained".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::tests::{blobs, xor};

    #[test]
    fn grid_sizes() {
        let sizes: Vec<usize> = ModelFamily::ALL.iter().map(|&f| default_grid(f, 0).len()).collect();
        assert_eq!(sizes, vec![3, 3, 3, 4, 4]);
        assert_eq!(default_grids(0).len(), 17);
    }

    #[test]
    fn singleton_grid_returns_its_candidate() {
        let spec = default_grid(ModelFamily::LinearSvm, 0).remove(1);
        let s = grid_search_select(std::slice::from_ref(&spec), &blobs(20, 1), &blobs(20, 2), &[0, 1]).unwrap();
        assert_eq!(s.model.spec, spec);
        assert_eq!(s.candidate, 0);
    }

    #[test]
    fn lower_error_wins() {
        let (train, val) = (xor(10, 1), xor(10, 2));
        // Boosting solves XOR, logistic regression cannot; the later family must win.
        let cands = [
            default_grid(ModelFamily::LogisticRegression, 0).remove(0),
            default_grid(ModelFamily::BoostedDecisionTree, 0).remove(0),
        ];
        let lr = train_selected(&cands[0], &train, &[0, 1]).unwrap();
        let lr_error = validation_error(&lr, &val).unwrap();
        let s = grid_search_select(&cands, &train, &val, &[0, 1]).unwrap();
        assert_eq!(s.model.spec.family, ModelFamily::BoostedDecisionTree);
        assert_eq!(s.candidate, 1);
        assert!(s.validation_error <= 0.1 && s.validation_error < lr_error);
    }

    #[test]
    fn ties_resolve_to_canonical_order() {
        let (train, val) = (blobs(30, 3), blobs(30, 4));
        let mut cands = default_grids(5);
        cands.reverse();
        let a = grid_search_select(&cands, &train, &val, &[0, 1]).unwrap();
        let b = grid_search_select(&cands, &train, &val, &[0, 1]).unwrap();
        assert_eq!(a, b);
        // Every candidate separates the blobs; the earliest logistic candidate in the list wins.
        assert_eq!(a.validation_error, 0.0);
        assert_eq!(a.model.spec.family, ModelFamily::LogisticRegression);
        assert_eq!(a.candidate, cands.len() - 1 - 2);
    }

    #[test]
    fn oversized_k_is_skipped() {
        let train = TrainingSet::from_rows(vec![vec![0.0], vec![1.0], vec![4.0]], vec![false, false, true]).unwrap();
        let only_knn = default_grid(ModelFamily::KNearestNeighbors, 0);
        let s = grid_search_select(&only_knn, &train, &train, &[0]).unwrap();
        assert_eq!(s.model.spec.param("k"), 1.0);
        let too_big = vec![only_knn[2].clone()];
        assert!(matches!(
            grid_search_select(&too_big, &train, &train, &[0]),
            Err(Error::DegenerateData(_))
        ));
    }
}
