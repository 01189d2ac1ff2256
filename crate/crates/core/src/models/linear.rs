//! L2 logistic regression (accelerated gradient descent) and linear SVM (subgradient descent).

use super::{sigmoid, FittedState};

const LOGISTIC_TOLERANCE: f64 = 1e-6;
const LOGISTIC_MAX_ITER: usize = 10_000;
const SVM_ITERATIONS: usize = 2_000;
const SVM_STEP: f64 = 0.5;

fn margin(w: &[f64], b: f64, x: &[f64]) -> f64 {
    w.iter().zip(x).map(|(a, v)| a * v).sum::<f64>() + b
}

/// Mean log-loss plus `l2/2 ‖w‖²` (bias unpenalized) and its gradient.
fn logistic_objective(x: &[Vec<f64>], y: &[bool], l2: f64, w: &[f64], b: f64, grad: &mut [f64]) -> (f64, f64) {
    let n = x.len() as f64;
    grad.iter_mut().zip(w).for_each(|(g, wj)| *g = l2 * wj);
    let mut gb = 0.0;
    let mut loss = 0.0;
    for (row, &label) in x.iter().zip(y) {
        let z = margin(w, b, row);
        let t = f64::from(u8::from(label));
        // log(1 + e^z) − t·z, computed stably
        loss += z.max(0.0) + (-z.abs()).exp().ln_1p() - t * z;
        let r = (sigmoid(z) - t) / n;
        for (g, v) in grad.iter_mut().zip(row) {
            *g += r * v;
        }
        gb += r;
    }
    let reg = 0.5 * l2 * w.iter().map(|v| v * v).sum::<f64>();
    (loss / n + reg, gb)
}

pub(super) fn fit_logistic(x: &[Vec<f64>], y: &[bool], l2: f64) -> FittedState {
    let d = x[0].len();
    let n = x.len() as f64;
    // Lipschitz bound on the gradient: trace of the augmented Gram matrix / 4n, plus l2.
    let lipschitz = 0.25 * (1.0 + x.iter().flatten().map(|v| v * v).sum::<f64>() / n) + l2;
    let step = 1.0 / lipschitz;
    let (mut w, mut b) = (vec![0.0; d], 0.0);
    let (mut w_prev, mut b_prev) = (w.clone(), b);
    let mut grad = vec![0.0; d];
    let mut momentum = 0.0f64;
    let (mut current, _) = logistic_objective(x, y, l2, &w, b, &mut grad);
    for _ in 0..LOGISTIC_MAX_ITER {
        let beta = momentum / (momentum + 3.0);
        let wy: Vec<f64> = w.iter().zip(&w_prev).map(|(a, p)| a + beta * (a - p)).collect();
        let by = b + beta * (b - b_prev);
        let (_, gb) = logistic_objective(x, y, l2, &wy, by, &mut grad);
        let norm = (grad.iter().map(|g| g * g).sum::<f64>() + gb * gb).sqrt();
        if norm < LOGISTIC_TOLERANCE {
            w = wy;
            b = by;
            break;
        }
        let w_next: Vec<f64> = wy.iter().zip(&grad).map(|(a, g)| a - step * g).collect();
        let b_next = by - step * gb;
        let (next, _) = logistic_objective(x, y, l2, &w_next, b_next, &mut grad);
        w_prev = std::mem::replace(&mut w, w_next);
        b_prev = std::mem::replace(&mut b, b_next);
        if next > current {
            // Adaptive restart: drop the momentum when the objective goes up.
            momentum = 0.0;
        } else {
            momentum += 1.0;
        }
        current = next;
    }
    let bias = tune_bias(x, y, &w, b);
    FittedState::Linear { weights: w, bias }
}

fn training_errors(margins: &[f64], y: &[bool], theta: f64) -> usize {
    margins.iter().zip(y).filter(|(&m, &l)| (m >= theta) != l).count()
}

/// Moves the intercept to the training-error minimizer nearest the fitted one, so the hard
/// labels never do worse than the constant-majority rule.
fn tune_bias(x: &[Vec<f64>], y: &[bool], w: &[f64], b: f64) -> f64 {
    let margins: Vec<f64> = x.iter().map(|r| margin(w, 0.0, r)).collect();
    let mut sorted = margins.clone();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    let theta0 = -b;
    let mut candidates = vec![theta0, sorted[0] - 1.0, sorted[sorted.len() - 1] + 1.0];
    candidates.extend(sorted.windows(2).map(|p| p[0] + (p[1] - p[0]) / 2.0));
    let best = candidates
        .into_iter()
        .map(|t| (training_errors(&margins, y, t), (t - theta0).abs(), t))
        .min_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)).then(a.2.total_cmp(&b.2)))
        .expect("candidate list is non-empty");
    -best.2
}

fn svm_objective(x: &[Vec<f64>], s: &[f64], lambda: f64, w: &[f64], b: f64) -> f64 {
    let hinge: f64 = x.iter().zip(s).map(|(r, &t)| (1.0 - t * margin(w, b, r)).max(0.0)).sum();
    0.5 * lambda * w.iter().map(|v| v * v).sum::<f64>() + hinge / x.len() as f64
}

/// Minimizes `λ/2 ‖w‖² + mean hinge` with `λ = 1/(C n)`; keeps the best iterate seen.
pub(super) fn fit_svm(x: &[Vec<f64>], y: &[bool], c: f64) -> FittedState {
    let d = x[0].len();
    let n = x.len() as f64;
    let lambda = 1.0 / (c * n);
    let s: Vec<f64> = y.iter().map(|&l| if l { 1.0 } else { -1.0 }).collect();
    let (mut w, mut b) = (vec![0.0; d], 0.0);
    let mut best = (svm_objective(x, &s, lambda, &w, b), w.clone(), b);
    let mut grad = vec![0.0; d];
    for t in 0..SVM_ITERATIONS {
        grad.iter_mut().zip(&w).for_each(|(g, wj)| *g = lambda * wj);
        let mut gb = 0.0;
        for (row, &t_i) in x.iter().zip(&s) {
            if t_i * margin(&w, b, row) < 1.0 {
                for (g, v) in grad.iter_mut().zip(row) {
                    *g -= t_i * v / n;
                }
                gb -= t_i / n;
            }
        }
        let eta = SVM_STEP / ((t + 1) as f64).sqrt();
        w.iter_mut().zip(&grad).for_each(|(wj, g)| *wj -= eta * g);
        b -= eta * gb;
        let obj = svm_objective(x, &s, lambda, &w, b);
        if obj < best.0 {
            best = (obj, w.clone(), b);
        }
    }
    let bias = tune_bias(x, y, &best.1, best.2);
    FittedState::Linear { weights: best.1, bias }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn logistic_reaches_stationary_point() {
        let x = vec![vec![-1.5], vec![-0.5], vec![0.2], vec![0.4], vec![1.0], vec![1.4]];
        let y = vec![false, true, false, true, true, true];
        let FittedState::Linear { weights, bias } = fit_logistic(&x, &y, 0.1) else {
            unreachable!()
        };
        // Training error is already minimal at the optimum here, so the intercept is untouched.
        let mut grad = vec![0.0];
        let (_, gb) = logistic_objective(&x, &y, 0.1, &weights, bias, &mut grad);
        assert!((grad[0].powi(2) + gb * gb).sqrt() < 1e-6);
    }

    #[test]
    fn bias_tuning_beats_majority() {
        // Margins 0..5 with labels F F T T T T: any threshold in (1, 2] is error-free.
        let x: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64]).collect();
        let y = vec![false, false, true, true, true, true];
        let b = tune_bias(&x, &y, &[1.0], -4.2);
        assert_eq!(b, -1.5);
        // Already optimal: untouched.
        assert_eq!(tune_bias(&x, &y, &[1.0], -1.8), -1.8);
    }

    #[test]
    fn svm_objective_drops_below_start() {
        let x = vec![vec![-2.0, 0.1], vec![-1.0, -0.3], vec![1.2, 0.2], vec![2.0, 0.0]];
        let y = vec![false, false, true, true];
        let s = [-1.0, -1.0, 1.0, 1.0];
        let FittedState::Linear { weights, bias } = fit_svm(&x, &y, 1.0) else {
            unreachable!()
        };
        let lambda = 1.0 / 4.0;
        assert!(svm_objective(&x, &s, lambda, &weights, bias) < svm_objective(&x, &s, lambda, &[0.0, 0.0], 0.0));
        assert!(weights[0] > 0.0);
    }
}
