//! Truth-serum scoring for multiple-choice responses.
//!
//! Each participant answers a K-choice question and predicts how often every
//! choice will be picked by the others. A participant's score is an
//! information term (high when their chosen answer is more common than the
//! geometric-mean prediction of it) plus a prediction term (a non-positive
//! log-score of their frequency forecast). All frequencies are
//! Laplace-smoothed before any logarithm so zero counts stay finite.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-cell Laplace smoothing applied to counts and predictions.
pub const SMOOTHING_EPSILON: f64 = 0.01;

/// One participant's answer and frequency forecast.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BtsResponse {
    pub participant: String,
    /// Chosen answer, 0-based over the K choices.
    pub answer: usize,
    /// Predicted frequency of every choice; must sum to 1 within 1e-9.
    pub prediction: Vec<f64>,
}

/// A whole question's responses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BtsResponseSet {
    pub choice_count: usize,
    pub responses: Vec<BtsResponse>,
}

impl BtsResponseSet {
    pub fn validate(&self) -> Result<()> {
        if self.responses.len() < 2 || self.choice_count < 2 {
            return Err(Error::TooFewResponses {
                participants: self.responses.len(),
                choices: self.choice_count,
            });
        }
        for response in &self.responses {
            if response.answer >= self.choice_count {
                return Err(Error::AnswerOutOfRange {
                    participant: response.participant.clone(),
                    answer: response.answer,
                    choices: self.choice_count,
                });
            }
            if response.prediction.len() != self.choice_count {
                return Err(Error::PredictionNotNormalized {
                    participant: response.participant.clone(),
                    sum: f64::NAN,
                });
            }
            let sum: f64 = response.prediction.iter().sum();
            if (sum - 1.0).abs() > 1e-9 || response.prediction.iter().any(|p| *p < 0.0) {
                return Err(Error::PredictionNotNormalized {
                    participant: response.participant.clone(),
                    sum,
                });
            }
        }
        Ok(())
    }
}

/// Smooth a probability vector: (p_k + eps) / (1 + K eps).
pub fn smooth(prediction: &[f64], epsilon: f64) -> Vec<f64> {
    let k = prediction.len() as f64;
    prediction
        .iter()
        .map(|p| (p + epsilon) / (1.0 + k * epsilon))
        .collect()
}

/// Smoothed empirical answer frequencies: (count_k + eps) / (n + K eps).
pub fn smoothed_empirical_frequencies(set: &BtsResponseSet, epsilon: f64) -> Vec<f64> {
    let mut counts = vec![0usize; set.choice_count];
    for response in &set.responses {
        counts[response.answer] += 1;
    }
    let n = set.responses.len() as f64;
    let k = set.choice_count as f64;
    counts
        .iter()
        .map(|&c| (c as f64 + epsilon) / (n + k * epsilon))
        .collect()
}

/// Log-score of one forecast against the smoothed empirical frequencies:
/// weight * sum_k xbar_k * ln(ytilde_k / xbar_k). Non-positive, and zero only
/// when the smoothed forecast equals the smoothed frequencies.
pub fn prediction_score(
    prediction: &[f64],
    smoothed_frequencies: &[f64],
    epsilon: f64,
    weight: f64,
) -> f64 {
    let smoothed = smooth(prediction, epsilon);
    weight
        * smoothed_frequencies
            .iter()
            .zip(&smoothed)
            .map(|(x, y)| x * (y / x).ln())
            .sum::<f64>()
}

/// One participant's score decomposition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BtsScore {
    pub participant: String,
    pub info: f64,
    pub prediction: f64,
    pub total: f64,
}

/// Scores in input order plus the descending-total ranking.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BtsOutcome {
    pub scores: Vec<BtsScore>,
    /// Indices into `scores`, best total first; ties break on input order.
    pub ranking: Vec<usize>,
}

impl BtsOutcome {
    /// Flags, in input order, for the top `percent` of participants by total
    /// (at least one participant is always flagged).
    pub fn top_flags(&self, percent: f64) -> Vec<bool> {
        let n = self.scores.len();
        let cutoff = ((percent / 100.0) * n as f64).ceil().max(1.0) as usize;
        let mut flags = vec![false; n];
        for &idx in self.ranking.iter().take(cutoff.min(n)) {
            flags[idx] = true;
        }
        flags
    }
}

/// Score every participant. `prediction_weight` scales the prediction term
/// (1 by default in callers).
pub fn bts_scores(set: &BtsResponseSet, prediction_weight: f64) -> Result<BtsOutcome> {
    set.validate()?;
    let epsilon = SMOOTHING_EPSILON;
    let xbar = smoothed_empirical_frequencies(set, epsilon);

    // geometric mean of smoothed predictions, per choice
    let n = set.responses.len() as f64;
    let mut log_sum = vec![0.0; set.choice_count];
    for response in &set.responses {
        for (acc, y) in log_sum.iter_mut().zip(smooth(&response.prediction, epsilon)) {
            *acc += y.ln();
        }
    }
    let ybar_geo: Vec<f64> = log_sum.iter().map(|s| (s / n).exp()).collect();

    let scores: Vec<BtsScore> = set
        .responses
        .iter()
        .map(|response| {
            let info = (xbar[response.answer] / ybar_geo[response.answer]).ln();
            let prediction = prediction_score(&response.prediction, &xbar, epsilon, prediction_weight);
            BtsScore {
                participant: response.participant.clone(),
                info,
                prediction,
                total: info + prediction,
            }
        })
        .collect();

    let mut ranking: Vec<usize> = (0..scores.len()).collect();
    ranking.sort_by(|&a, &b| {
        scores[b]
            .total
            .partial_cmp(&scores[a].total)
            .unwrap()
            .then(a.cmp(&b))
    });

    Ok(BtsOutcome { scores, ranking })
}
