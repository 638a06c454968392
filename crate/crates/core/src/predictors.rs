//! Built-in logistic-regression predictor with k-fold out-of-sample scoring,
//! so an audit can run end to end without externally supplied risk scores.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::effort::sigmoid;
use crate::error::{Error, Result};
use crate::ingest::Panel;
use crate::rng::SeededRng;

/// Feature matrix with aligned binary labels.
#[derive(Debug, Clone, PartialEq)]
pub struct SupervisedDataset {
    pub subject_ids: Vec<String>,
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<u8>,
    pub feature_names: Vec<String>,
}

impl SupervisedDataset {
    pub fn new(
        subject_ids: Vec<String>,
        features: Vec<Vec<f64>>,
        labels: Vec<u8>,
        feature_names: Vec<String>,
    ) -> Result<Self> {
        if features.len() != labels.len() {
            return Err(Error::LengthMismatch {
                rows: features.len(),
                labels: labels.len(),
            });
        }
        for (row, values) in features.iter().enumerate() {
            for (col, v) in values.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::NonFiniteFeature { row, col });
                }
            }
        }
        Ok(SupervisedDataset {
            subject_ids,
            features,
            labels,
            feature_names,
        })
    }

    /// Dataset whose features are the panel's raw time-step values, joined
    /// with labels by subject id. Subjects without a label are dropped.
    pub fn from_panel(panel: &Panel, labels: &BTreeMap<String, u8>) -> Result<Self> {
        let mut ids = Vec::new();
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for subject in &panel.subjects {
            if let Some(&label) = labels.get(&subject.id) {
                ids.push(subject.id.clone());
                rows.push(subject.values.clone());
                y.push(label);
            }
        }
        let names = (0..panel.time_steps).map(|t| format!("x{t}")).collect();
        Self::new(ids, rows, y, names)
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }
}

/// Gradient-descent settings. The learning rate only sets the starting step:
/// it is halved whenever a step would increase the loss.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FitConfig {
    pub learning_rate: f64,
    pub max_iter: usize,
    pub l2: f64,
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            learning_rate: 1.0,
            max_iter: 5_000,
            l2: 1e-4,
            seed: 0,
        }
    }
}

/// Fitted logistic model. Weights are expressed in the original feature
/// space (standardization happens inside the fit and is folded back out), so
/// `predict` is a plain sigmoid of the affine score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFit {
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub iterations: usize,
    pub final_loss: f64,
    pub seed: u64,
}

impl ModelFit {
    /// Assemble a fit directly from weights, mostly for tests and scripted
    /// scenarios.
    pub fn from_weights(weights: Vec<f64>, intercept: f64) -> Self {
        ModelFit {
            weights,
            intercept,
            iterations: 0,
            final_loss: f64::NAN,
            seed: 0,
        }
    }
}

fn standardize(features: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>, Vec<Vec<f64>>) {
    let cols = features.first().map(Vec::len).unwrap_or(0);
    let n = features.len() as f64;
    let mut means = vec![0.0; cols];
    for row in features {
        for (m, v) in means.iter_mut().zip(row) {
            *m += v;
        }
    }
    for m in &mut means {
        *m /= n;
    }
    let mut scales = vec![0.0; cols];
    for row in features {
        for (s, (v, m)) in scales.iter_mut().zip(row.iter().zip(&means)) {
            *s += (v - m) * (v - m);
        }
    }
    for s in &mut scales {
        *s = (*s / n).sqrt();
        if *s < 1e-12 {
            *s = 1.0; // constant column: leave it centered but unscaled
        }
    }
    let standardized = features
        .iter()
        .map(|row| {
            row.iter()
                .zip(means.iter().zip(&scales))
                .map(|(v, (m, s))| (v - m) / s)
                .collect()
        })
        .collect();
    (means, scales, standardized)
}

/// Mean logistic loss plus an L2 penalty on the (standardized) weights.
/// The intercept is not penalized.
fn loss(x: &[Vec<f64>], y: &[u8], w: &[f64], b: f64, l2: f64) -> f64 {
    let n = x.len() as f64;
    let data: f64 = x
        .iter()
        .zip(y)
        .map(|(row, &label)| {
            let z: f64 = row.iter().zip(w).map(|(xi, wi)| xi * wi).sum::<f64>() + b;
            let margin = if label == 1 { z } else { -z };
            // softplus(-margin), stable for any magnitude
            (-margin).max(0.0) + (-(-margin).abs()).exp().ln_1p()
        })
        .sum::<f64>()
        / n;
    data + 0.5 * l2 * w.iter().map(|wi| wi * wi).sum::<f64>()
}

fn gradient(x: &[Vec<f64>], y: &[u8], w: &[f64], b: f64, l2: f64) -> (Vec<f64>, f64) {
    let n = x.len() as f64;
    let mut grad_w = vec![0.0; w.len()];
    let mut grad_b = 0.0;
    for (row, &label) in x.iter().zip(y) {
        let z: f64 = row.iter().zip(w).map(|(xi, wi)| xi * wi).sum::<f64>() + b;
        let err = sigmoid(z) - label as f64;
        for (g, xi) in grad_w.iter_mut().zip(row) {
            *g += err * xi;
        }
        grad_b += err;
    }
    for (g, wi) in grad_w.iter_mut().zip(w) {
        *g = *g / n + l2 * wi;
    }
    (grad_w, grad_b / n)
}

const GRAD_TOL: f64 = 1e-8;

/// Fit by full-batch gradient descent on the standardized features.
/// Deterministic: zero initialization, fixed iteration order, step halving on
/// any loss increase. Converged when the gradient max-norm drops below 1e-8.
pub fn fit_logistic(data: &SupervisedDataset, config: &FitConfig) -> Result<ModelFit> {
    if data.len() < 2 {
        return Err(Error::TooFewRows {
            rows: data.len(),
            k: 2,
        });
    }
    let positives = data.labels.iter().filter(|&&l| l == 1).count();
    if positives == 0 || positives == data.len() {
        return Err(Error::SingleClass);
    }

    let (means, scales, x) = standardize(&data.features);
    let cols = means.len();
    let mut w = vec![0.0; cols];
    let mut b = 0.0;
    let mut lr = config.learning_rate;
    let mut current = loss(&x, &data.labels, &w, b, config.l2);
    let mut iterations = 0;

    for _ in 0..config.max_iter {
        let (gw, gb) = gradient(&x, &data.labels, &w, b, config.l2);
        let grad_norm = gw
            .iter()
            .chain(std::iter::once(&gb))
            .fold(0.0f64, |acc, g| acc.max(g.abs()));
        if grad_norm < GRAD_TOL {
            break;
        }
        // backtracking: halve the step until the loss stops increasing
        loop {
            let cand_w: Vec<f64> = w.iter().zip(&gw).map(|(wi, gi)| wi - lr * gi).collect();
            let cand_b = b - lr * gb;
            let cand_loss = loss(&x, &data.labels, &cand_w, cand_b, config.l2);
            if cand_loss <= current || lr < 1e-14 {
                w = cand_w;
                b = cand_b;
                current = cand_loss;
                break;
            }
            lr *= 0.5;
        }
        iterations += 1;
        if lr < 1e-14 {
            break;
        }
    }

    // fold the standardization back into original-space weights
    let mut weights = Vec::with_capacity(cols);
    let mut intercept = b;
    for ((wi, m), s) in w.iter().zip(&means).zip(&scales) {
        weights.push(wi / s);
        intercept -= wi * m / s;
    }

    Ok(ModelFit {
        weights,
        intercept,
        iterations,
        final_loss: current,
        seed: config.seed,
    })
}

/// Risk scores for feature rows: sigmoid of the affine score, strictly inside
/// (0,1).
pub fn predict(fit: &ModelFit, rows: &[Vec<f64>]) -> Result<Vec<f64>> {
    rows.iter()
        .map(|row| {
            if row.len() != fit.weights.len() {
                return Err(Error::ArityMismatch {
                    expected: fit.weights.len(),
                    got: row.len(),
                });
            }
            let z: f64 = row.iter().zip(&fit.weights).map(|(x, w)| x * w).sum::<f64>() + fit.intercept;
            Ok(sigmoid(z))
        })
        .collect()
}

/// Deterministic fold assignment: seeded shuffle, then contiguous folds whose
/// sizes differ by at most one (the first `n % k` folds take the extra row).
fn fold_assignments(n: usize, k: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    SeededRng::derive(seed, 0xF01D).shuffle(&mut order);
    let base = n / k;
    let extras = n % k;
    let mut folds = Vec::with_capacity(k);
    let mut cursor = 0;
    for fold in 0..k {
        let size = base + usize::from(fold < extras);
        folds.push(order[cursor..cursor + size].to_vec());
        cursor += size;
    }
    folds
}

/// Out-of-sample scores by k-fold rotation: each subject is scored exactly
/// once, by a model trained on the other k-1 folds. Folds train in parallel;
/// the output map is keyed by id so assembly order is irrelevant.
pub fn kfold_oos(
    data: &SupervisedDataset,
    k: usize,
    seed: u64,
    config: &FitConfig,
) -> Result<BTreeMap<String, f64>> {
    if k < 2 {
        return Err(Error::BadFoldCount(k));
    }
    if data.len() < k {
        return Err(Error::TooFewRows { rows: data.len(), k });
    }
    let folds = fold_assignments(data.len(), k, seed);
    let per_fold: Vec<Result<Vec<(String, f64)>>> = folds
        .par_iter()
        .map(|held_out| {
            let held: std::collections::BTreeSet<usize> = held_out.iter().copied().collect();
            let mut train_rows = Vec::with_capacity(data.len() - held.len());
            let mut train_labels = Vec::with_capacity(data.len() - held.len());
            for idx in 0..data.len() {
                if !held.contains(&idx) {
                    train_rows.push(data.features[idx].clone());
                    train_labels.push(data.labels[idx]);
                }
            }
            let train = SupervisedDataset::new(
                Vec::new(),
                train_rows,
                train_labels,
                data.feature_names.clone(),
            )?;
            let fit = fit_logistic(&train, config)?;
            let rows: Vec<Vec<f64>> = held_out.iter().map(|&i| data.features[i].clone()).collect();
            let scores = predict(&fit, &rows)?;
            Ok(held_out
                .iter()
                .zip(scores)
                .map(|(&i, s)| (data.subject_ids[i].clone(), s))
                .collect())
        })
        .collect();

    let mut out = BTreeMap::new();
    for fold in per_fold {
        for (id, score) in fold? {
            out.insert(id, score);
        }
    }
    Ok(out)
}

/// Nearest-rank percentile: the ceil(pct/100 * n)-th smallest value, with
/// pct=0 mapping to the minimum.
pub fn percentile_threshold(scores: &[f64], pct: f64) -> Result<f64> {
    if scores.is_empty() {
        return Err(Error::EmptyInput);
    }
    if !(0.0..=100.0).contains(&pct) {
        return Err(Error::BadPercentile(pct));
    }
    let mut sorted = scores.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let rank = ((pct / 100.0) * sorted.len() as f64).ceil() as usize;
    Ok(sorted[rank.max(1) - 1])
}

/// Confusion-matrix metrics at a score threshold (score >= threshold predicts
/// the positive class).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierEval {
    pub accuracy: f64,
    pub weighted_f1: f64,
    /// F1 for class 0 and class 1.
    pub per_class_f1: [f64; 2],
    /// [[tn, fp], [fn, tp]]
    pub confusion: [[usize; 2]; 2],
}

pub fn eval_classifier(scores: &[f64], labels: &[u8], threshold: f64) -> Result<ClassifierEval> {
    if scores.len() != labels.len() {
        return Err(Error::LengthMismatch {
            rows: scores.len(),
            labels: labels.len(),
        });
    }
    if scores.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut confusion = [[0usize; 2]; 2];
    for (&score, &label) in scores.iter().zip(labels) {
        let predicted = usize::from(score >= threshold);
        confusion[label as usize][predicted] += 1;
    }
    let n = scores.len() as f64;
    let accuracy = (confusion[0][0] + confusion[1][1]) as f64 / n;

    let f1_for = |class: usize| -> f64 {
        let tp = confusion[class][class] as f64;
        let fp = confusion[1 - class][class] as f64;
        let fn_ = confusion[class][1 - class] as f64;
        let denom = 2.0 * tp + fp + fn_;
        if denom == 0.0 {
            0.0
        } else {
            2.0 * tp / denom
        }
    };
    let per_class_f1 = [f1_for(0), f1_for(1)];
    let support_0 = (confusion[0][0] + confusion[0][1]) as f64;
    let support_1 = (confusion[1][0] + confusion[1][1]) as f64;
    let weighted_f1 = (support_0 * per_class_f1[0] + support_1 * per_class_f1[1]) / n;

    Ok(ClassifierEval {
        accuracy,
        weighted_f1,
        per_class_f1,
        confusion,
    })
}
