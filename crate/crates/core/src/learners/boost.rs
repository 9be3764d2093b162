//! Gradient-boosted tree ensembles: squared-error regression and 3-class
//! softmax (multinomial deviance) classification.

use serde::{Deserialize, Serialize};

use super::matrix::Matrix;
use super::tree::{fit_tree_presorted, RegressionTree, SortedColumns, TreeParams};
use crate::error::{DpcError, Result};
use crate::stats::mean;

pub const N_CLASSES: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoostParams {
    pub n_estimators: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub lambda: f64,
    pub min_child_weight: f64,
}

impl Default for BoostParams {
    fn default() -> Self {
        BoostParams {
            n_estimators: 1000,
            learning_rate: 0.1,
            max_depth: 6,
            lambda: 1.0,
            min_child_weight: 1.0,
        }
    }
}

impl BoostParams {
    fn tree_params(&self) -> TreeParams {
        TreeParams {
            max_depth: self.max_depth,
            lambda: self.lambda,
            min_child_weight: self.min_child_weight,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(DpcError::InvalidConfig(format!(
                "learning rate must be finite and non-negative, got {}",
                self.learning_rate
            )));
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(DpcError::InvalidConfig(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if !(self.min_child_weight.is_finite() && self.min_child_weight >= 0.0) {
            return Err(DpcError::InvalidConfig(format!(
                "min_child_weight must be >= 0, got {}",
                self.min_child_weight
            )));
        }
        Ok(())
    }
}

fn check_rows(x: &Matrix, n: usize) -> Result<()> {
    if x.n_rows() == 0 {
        return Err(DpcError::EmptyDataset);
    }
    if x.n_rows() != n {
        return Err(DpcError::DimensionMismatch {
            expected: x.n_rows(),
            actual: n,
        });
    }
    Ok(())
}

fn check_width(expected: usize, row: &[f64]) -> Result<()> {
    if row.len() != expected {
        return Err(DpcError::DimensionMismatch {
            expected,
            actual: row.len(),
        });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostedRegressor {
    pub n_features: usize,
    pub base_score: f64,
    pub params: BoostParams,
    pub trees: Vec<RegressionTree>,
    /// Training MSE before any tree (index 0) and after each round.
    pub train_loss: Vec<f64>,
}

impl BoostedRegressor {
    pub fn predict(&self, row: &[f64]) -> Result<f64> {
        check_width(self.n_features, row)?;
        Ok(self.predict_unchecked(row))
    }

    pub(crate) fn predict_unchecked(&self, row: &[f64]) -> f64 {
        let sum: f64 = self.trees.iter().map(|t| t.predict(row)).sum();
        self.base_score + self.params.learning_rate * sum
    }
}

fn mse(pred: &[f64], y: &[f64]) -> f64 {
    pred.iter().zip(y).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / y.len() as f64
}

/// Squared-error boosting: base score `mean(y)`, then one tree per round on
/// `g = pred - y`, `h = 1`.
pub fn fit_boosted_regressor(x: &Matrix, y: &[f64], params: &BoostParams) -> Result<BoostedRegressor> {
    check_rows(x, y.len())?;
    params.validate()?;
    let base_score = mean(y);
    let tree_params = params.tree_params();
    let sorted = SortedColumns::new(x);
    let mut pred = vec![base_score; y.len()];
    let hess = vec![1.0; y.len()];
    let mut grad = vec![0.0; y.len()];
    let mut train_loss = Vec::with_capacity(params.n_estimators + 1);
    train_loss.push(mse(&pred, y));
    let mut trees = Vec::with_capacity(params.n_estimators);
    for _ in 0..params.n_estimators {
        for ((g, p), t) in grad.iter_mut().zip(&pred).zip(y) {
            *g = p - t;
        }
        let fitted = fit_tree_presorted(x, &sorted, &grad, &hess, &tree_params)?;
        for (p, out) in pred.iter_mut().zip(&fitted.row_outputs) {
            *p += params.learning_rate * out;
        }
        train_loss.push(mse(&pred, y));
        trees.push(fitted.tree);
    }
    Ok(BoostedRegressor {
        n_features: x.n_cols(),
        base_score,
        params: *params,
        trees,
        train_loss,
    })
}

pub fn softmax(scores: &[f64; N_CLASSES]) -> [f64; N_CLASSES] {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps = scores.map(|s| (s - max).exp());
    let total: f64 = exps.iter().sum();
    exps.map(|e| e / total)
}

/// `-log softmax(scores)[label]`, computed stably.
pub fn cross_entropy(scores: &[f64; N_CLASSES], label: usize) -> f64 {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + scores.iter().map(|s| (s - max).exp()).sum::<f64>().ln();
    lse - scores[label]
}

/// Index of the largest score; the lowest index wins ties.
pub fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostedClassifier {
    pub n_features: usize,
    pub base_scores: [f64; N_CLASSES],
    pub params: BoostParams,
    /// One tree per class per round.
    pub rounds: Vec<[RegressionTree; N_CLASSES]>,
    /// Weighted mean training cross-entropy before any round and after each.
    pub train_loss: Vec<f64>,
}

impl BoostedClassifier {
    pub fn predict_raw(&self, row: &[f64]) -> Result<[f64; N_CLASSES]> {
        check_width(self.n_features, row)?;
        Ok(self.raw_unchecked(row))
    }

    pub fn predict_proba(&self, row: &[f64]) -> Result<[f64; N_CLASSES]> {
        Ok(softmax(&self.predict_raw(row)?))
    }

    pub(crate) fn raw_unchecked(&self, row: &[f64]) -> [f64; N_CLASSES] {
        let mut sums = [0.0; N_CLASSES];
        for group in &self.rounds {
            for (s, tree) in sums.iter_mut().zip(group) {
                *s += tree.predict(row);
            }
        }
        let lr = self.params.learning_rate;
        let mut out = self.base_scores;
        for (o, s) in out.iter_mut().zip(sums) {
            *o += lr * s;
        }
        out
    }
}

/// Per-class starting scores `log((count_c + 1) / (n + 3))`.
pub fn smoothed_log_priors(labels: &[usize]) -> [f64; N_CLASSES] {
    let mut counts = [0usize; N_CLASSES];
    for &l in labels {
        counts[l] += 1;
    }
    let n = labels.len() as f64;
    counts.map(|c| ((c as f64 + 1.0) / (n + N_CLASSES as f64)).ln())
}

fn weighted_ce(raw: &[[f64; N_CLASSES]], labels: &[usize], weights: &[f64], total_w: f64) -> f64 {
    raw.iter()
        .zip(labels)
        .zip(weights)
        .map(|((s, &l), w)| w * cross_entropy(s, l))
        .sum::<f64>()
        / total_w
}

pub fn fit_boosted_classifier(
    x: &Matrix,
    labels: &[usize],
    params: &BoostParams,
) -> Result<BoostedClassifier> {
    fit_boosted_classifier_weighted(x, labels, None, params)
}

/// Multinomial-deviance boosting. Each round fits one tree per class `c` on
/// `g = w (p_c - [label = c])`, `h = w p_c (1 - p_c)`, all three from the
/// same probabilities.
pub fn fit_boosted_classifier_weighted(
    x: &Matrix,
    labels: &[usize],
    weights: Option<&[f64]>,
    params: &BoostParams,
) -> Result<BoostedClassifier> {
    check_rows(x, labels.len())?;
    params.validate()?;
    if let Some(&bad) = labels.iter().find(|&&l| l >= N_CLASSES) {
        return Err(DpcError::InvalidConfig(format!("class label {bad} out of range")));
    }
    let n = labels.len();
    let unit = vec![1.0; n];
    let weights = match weights {
        Some(w) => {
            check_rows(x, w.len())?;
            if w.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(DpcError::InvalidConfig("sample weights must be finite and >= 0".into()));
            }
            w
        }
        None => &unit[..],
    };
    let total_w: f64 = weights.iter().sum();
    if total_w <= 0.0 {
        return Err(DpcError::InvalidConfig("sample weights sum to zero".into()));
    }

    let base_scores = smoothed_log_priors(labels);
    let tree_params = params.tree_params();
    let sorted = SortedColumns::new(x);
    let mut raw = vec![base_scores; n];
    let mut grad = vec![vec![0.0; n]; N_CLASSES];
    let mut hess = vec![vec![0.0; n]; N_CLASSES];
    let mut train_loss = Vec::with_capacity(params.n_estimators + 1);
    train_loss.push(weighted_ce(&raw, labels, weights, total_w));
    let mut rounds = Vec::with_capacity(params.n_estimators);

    for _ in 0..params.n_estimators {
        for i in 0..n {
            let p = softmax(&raw[i]);
            for c in 0..N_CLASSES {
                let target = if labels[i] == c { 1.0 } else { 0.0 };
                grad[c][i] = weights[i] * (p[c] - target);
                hess[c][i] = weights[i] * p[c] * (1.0 - p[c]);
            }
        }
        let mut group = Vec::with_capacity(N_CLASSES);
        for c in 0..N_CLASSES {
            let fitted = fit_tree_presorted(x, &sorted, &grad[c], &hess[c], &tree_params)?;
            for (r, out) in raw.iter_mut().zip(&fitted.row_outputs) {
                r[c] += params.learning_rate * out;
            }
            group.push(fitted.tree);
        }
        train_loss.push(weighted_ce(&raw, labels, weights, total_w));
        rounds.push(group.try_into().expect("one tree per class"));
    }
    Ok(BoostedClassifier {
        n_features: x.n_cols(),
        base_scores,
        params: *params,
        rounds,
        train_loss,
    })
}
