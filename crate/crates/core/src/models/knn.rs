//! Euclidean k-nearest neighbors.

use crate::error::{Error, Result};

use super::FittedState;

pub(super) fn fit(x: &[Vec<f64>], y: &[bool], k: usize) -> Result<FittedState> {
    if k > x.len() {
        return Err(Error::DegenerateData(format!("k = {k} exceeds {} samples", x.len())));
    }
    Ok(FittedState::Knn {
        k,
        samples: x.to_vec(),
        labels: y.to_vec(),
    })
}

/// Fraction of positives among the `k` nearest samples; equal distances favor the lower index.
pub(super) fn score(samples: &[Vec<f64>], labels: &[bool], k: usize, x: &[f64]) -> f64 {
    let mut dist: Vec<(f64, usize)> = samples
        .iter()
        .enumerate()
        .map(|(i, s)| (s.iter().zip(x).map(|(a, b)| (a - b).powi(2)).sum::<f64>(), i))
        .collect();
    dist.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    dist[..k].iter().filter(|&&(_, i)| labels[i]).count() as f64 / k as f64
}
