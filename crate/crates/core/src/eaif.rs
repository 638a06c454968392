//! Effort-aware individual fairness.
//!
//! Each subject is reduced to two bounded coordinates: effort E in (0,1) and
//! an aggregate feature S in [0,1). A model's score is the mean, over all
//! unordered subject pairs, of `1 - max(0, D - d)` where D is the absolute
//! risk-score gap and d the weighted Euclidean distance between the two
//! coordinate pairs. A score of 1 means the Lipschitz condition D <= d holds
//! on every pair.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::effort::sigmoid;
use crate::error::{Error, Result};
use crate::sum::CompensatedSum;

/// Convex weights between the effort gap and the aggregate gap in the input
/// distance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceWeights {
    pub effort: f64,
    pub aggregate: f64,
}

impl DistanceWeights {
    /// Validated constructor; components must be non-negative and sum to 1
    /// within 1e-9.
    pub fn new(effort: f64, aggregate: f64) -> Result<Self> {
        if !(effort >= 0.0 && aggregate >= 0.0 && (effort + aggregate - 1.0).abs() <= 1e-9) {
            return Err(Error::BadWeights);
        }
        Ok(DistanceWeights { effort, aggregate })
    }

    pub fn equal() -> Self {
        DistanceWeights {
            effort: 0.5,
            aggregate: 0.5,
        }
    }

    /// Normalize raw regression coefficients into convex weights. This is how
    /// the shipped human-study presets are derived from their source
    /// coefficients rather than hard-coded.
    pub fn normalized(coef_effort: f64, coef_aggregate: f64) -> Result<Self> {
        if coef_effort < 0.0 || coef_aggregate < 0.0 || coef_effort + coef_aggregate == 0.0 {
            return Err(Error::BadWeights);
        }
        let total = coef_effort + coef_aggregate;
        Ok(DistanceWeights {
            effort: coef_effort / total,
            aggregate: coef_aggregate / total,
        })
    }
}

/// The two input-space coordinates of one subject.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectFeatures {
    pub subject_id: String,
    /// Effort in (0,1).
    pub effort: f64,
    /// Aggregate feature in [0,1).
    pub aggregate: f64,
}

/// Bounded aggregate of a whole series: `2*sigmoid(total/lambda) - 1`.
///
/// The transform keeps the aggregate in [0,1) and makes a fixed gap count for
/// more at the low end of the scale than at the high end. `lambda` sets the
/// scale in feature units (20 ten-thousand-dollar units for income, 1 arrest
/// for criminal histories).
pub fn aggregate_feature(values: &[f64], lambda: f64) -> Result<f64> {
    if !lambda.is_finite() || lambda <= 0.0 {
        return Err(Error::NonPositiveLambda(lambda));
    }
    let mut total = 0.0;
    for &v in values {
        if v < 0.0 {
            return Err(Error::NegativeAggregateInput(v));
        }
        total += v;
    }
    Ok(2.0 * sigmoid(total / lambda) - 1.0)
}

/// Weighted Euclidean distance between two subjects' (effort, aggregate)
/// coordinates. Symmetric, zero at identical inputs, and bounded by 1 because
/// both coordinates live in [0,1] and the weights are convex.
pub fn pairwise_distance(a: &SubjectFeatures, b: &SubjectFeatures, w: &DistanceWeights) -> f64 {
    let de = a.effort - b.effort;
    let ds = a.aggregate - b.aggregate;
    (w.effort * de * de + w.aggregate * ds * ds).sqrt()
}

/// Pairwise fairness score `1 - max(0, D - d)`: 1 when the pair satisfies the
/// Lipschitz condition, sliding toward 0 with the size of the violation.
pub fn pairwise_fairness(output_distance: f64, input_distance: f64) -> Result<f64> {
    for (name, value) in [("D", output_distance), ("d", input_distance)] {
        if !(0.0..=1.0).contains(&value) || !value.is_finite() {
            return Err(Error::DistanceOutOfRange { name, value });
        }
    }
    Ok(1.0 - (output_distance - input_distance).max(0.0))
}

/// Model-level effort-aware individual fairness: the mean pairwise fairness
/// score over all n*(n-1)/2 unordered pairs.
///
/// Pairs are accumulated with compensated summation in fixed (i<j) order; the
/// pair space is chunked by row for parallelism and the per-row partials are
/// folded serially in row order, so the reported value does not depend on the
/// parallel schedule.
pub fn eaif_score(
    features: &[SubjectFeatures],
    scores: &BTreeMap<String, f64>,
    weights: &DistanceWeights,
) -> Result<f64> {
    if features.len() < 2 {
        return Err(Error::TooFewSubjects(features.len()));
    }
    let risks: Vec<f64> = features
        .iter()
        .map(|f| {
            scores
                .get(&f.subject_id)
                .copied()
                .ok_or_else(|| Error::MissingScore {
                    model: "<scores>".to_string(),
                    subject: f.subject_id.clone(),
                })
        })
        .collect::<Result<_>>()?;
    for (f, &risk) in features.iter().zip(&risks) {
        if !(0.0..=1.0).contains(&risk) || !risk.is_finite() {
            return Err(Error::RiskScoreOutOfRange {
                model: "<scores>".to_string(),
                subject: f.subject_id.clone(),
                score: risk,
            });
        }
    }

    let n = features.len();
    let row_sums: Vec<f64> = (0..n - 1)
        .into_par_iter()
        .map(|i| {
            let mut acc = CompensatedSum::new();
            for j in i + 1..n {
                let d = pairwise_distance(&features[i], &features[j], weights);
                let big_d = (risks[i] - risks[j]).abs();
                acc.add(1.0 - (big_d - d).max(0.0));
            }
            acc.value()
        })
        .collect();

    let total = CompensatedSum::sum_iter(row_sums);
    let pairs = (n * (n - 1) / 2) as f64;
    Ok(total / pairs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeededRng;
    use proptest::prelude::*;

    #[test]
    fn aggregate_feature_known_points() {
        assert_eq!(aggregate_feature(&[0.0, 0.0], 20.0).unwrap(), 0.0);
        let at_lambda = aggregate_feature(&[10.0, 10.0], 20.0).unwrap();
        assert!((at_lambda - 0.46211715726000974).abs() < 1e-12);
        // four prior arrests against a one-arrest scale
        let arrests = aggregate_feature(&[1.0, 1.0, 1.0, 1.0], 1.0).unwrap();
        assert!((arrests - 0.9640275800758169).abs() < 1e-12);
    }

    #[test]
    fn aggregate_feature_rejects_bad_input() {
        assert!(matches!(
            aggregate_feature(&[1.0], 0.0),
            Err(Error::NonPositiveLambda(_))
        ));
        assert!(matches!(
            aggregate_feature(&[-1.0], 1.0),
            Err(Error::NegativeAggregateInput(_))
        ));
    }

    #[test]
    fn weight_normalization_reproduces_presets() {
        let shed = DistanceWeights::normalized(0.6114, 0.3182).unwrap();
        assert!((shed.effort - 0.6577).abs() < 1e-4);
        assert!((shed.aggregate - 0.3423).abs() < 1e-4);
        let clue = DistanceWeights::normalized(0.5454, 0.3580).unwrap();
        assert!((clue.effort - 0.6037).abs() < 1e-4);
        assert!((clue.aggregate - 0.3963).abs() < 1e-4);
        let even = DistanceWeights::normalized(0.5, 0.5).unwrap();
        assert_eq!(even, DistanceWeights::equal());
        assert!(matches!(
            DistanceWeights::normalized(0.0, 0.0),
            Err(Error::BadWeights)
        ));
    }

    fn subject(id: &str, effort: f64, aggregate: f64) -> SubjectFeatures {
        SubjectFeatures {
            subject_id: id.to_string(),
            effort,
            aggregate,
        }
    }

    #[test]
    fn distance_known_points() {
        let w = DistanceWeights::new(0.6577, 0.3423).unwrap();
        let a = subject("a", 0.5, 0.4);
        let b = subject("b", 0.3, 0.3);
        let d = pairwise_distance(&a, &b, &w);
        assert!((d - 0.172427).abs() < 1e-5);

        let all_effort = DistanceWeights::new(1.0, 0.0).unwrap();
        let d = pairwise_distance(&subject("a", 0.8, 0.9), &subject("b", 0.5, 0.1), &all_effort);
        assert!((d - 0.3).abs() < 1e-12);
        assert_eq!(pairwise_distance(&a, &a, &w), 0.0);
    }

    #[test]
    fn fairness_score_known_points() {
        assert_eq!(pairwise_fairness(0.3, 0.5).unwrap(), 1.0);
        assert_eq!(pairwise_fairness(0.4, 0.4).unwrap(), 1.0);
        assert!((pairwise_fairness(0.5, 0.3).unwrap() - 0.8).abs() < 1e-12);
        assert!(matches!(
            pairwise_fairness(1.2, 0.3),
            Err(Error::DistanceOutOfRange { .. })
        ));
    }

    #[test]
    fn eaif_constant_scores_are_perfectly_fair() {
        let features = vec![
            subject("a", 0.2, 0.1),
            subject("b", 0.7, 0.8),
            subject("c", 0.4, 0.5),
        ];
        let scores: BTreeMap<String, f64> =
            [("a", 0.6), ("b", 0.6), ("c", 0.6)].map(|(k, v)| (k.to_string(), v)).into();
        let score = eaif_score(&features, &scores, &DistanceWeights::equal()).unwrap();
        assert_eq!(score, 1.0);
    }

    #[test]
    fn eaif_hand_worked_three_subjects() {
        // identical coordinates, risks (0.3, 0.9, 0.3):
        // pairs score 0.4, 1.0, 0.4 -> mean 0.6
        let features = vec![
            subject("a", 0.5, 0.5),
            subject("b", 0.5, 0.5),
            subject("c", 0.5, 0.5),
        ];
        let scores: BTreeMap<String, f64> =
            [("a", 0.3), ("b", 0.9), ("c", 0.3)].map(|(k, v)| (k.to_string(), v)).into();
        let score = eaif_score(&features, &scores, &DistanceWeights::equal()).unwrap();
        assert!((score - 0.6).abs() < 1e-15);
    }

    #[test]
    fn eaif_errors() {
        let features = vec![subject("a", 0.5, 0.5)];
        let scores: BTreeMap<String, f64> = [("a".to_string(), 0.3)].into();
        assert!(matches!(
            eaif_score(&features, &scores, &DistanceWeights::equal()),
            Err(Error::TooFewSubjects(1))
        ));
        let features = vec![subject("a", 0.5, 0.5), subject("b", 0.5, 0.5)];
        assert!(matches!(
            eaif_score(&features, &scores, &DistanceWeights::equal()),
            Err(Error::MissingScore { .. })
        ));
    }

    /// Naive serial oracle: plain double loop, plain accumulation.
    fn eaif_oracle(features: &[SubjectFeatures], risks: &BTreeMap<String, f64>, w: &DistanceWeights) -> f64 {
        let n = features.len();
        let mut sum = 0.0;
        let mut count = 0usize;
        for i in 0..n {
            for j in i + 1..n {
                let de = features[i].effort - features[j].effort;
                let ds = features[i].aggregate - features[j].aggregate;
                let d = (w.effort * de * de + w.aggregate * ds * ds).sqrt();
                let big_d = (risks[&features[i].subject_id] - risks[&features[j].subject_id]).abs();
                sum += 1.0 - (big_d - d).max(0.0);
                count += 1;
            }
        }
        sum / count as f64
    }

    fn random_instance(n: usize, seed: u64) -> (Vec<SubjectFeatures>, BTreeMap<String, f64>) {
        let mut rng = SeededRng::new(seed);
        let features: Vec<SubjectFeatures> = (0..n)
            .map(|i| SubjectFeatures {
                subject_id: format!("s{i:04}"),
                effort: 0.999 * rng.next_f64() + 0.0005,
                aggregate: 0.999 * rng.next_f64(),
            })
            .collect();
        let scores = features
            .iter()
            .map(|f| (f.subject_id.clone(), rng.next_f64()))
            .collect();
        (features, scores)
    }

    #[test]
    fn eaif_matches_brute_force_oracle() {
        for seed in 0..10 {
            let (features, scores) = random_instance(50 + (seed as usize * 13) % 151, seed);
            let w = DistanceWeights::normalized(0.6114, 0.3182).unwrap();
            let fast = eaif_score(&features, &scores, &w).unwrap();
            let slow = eaif_oracle(&features, &scores, &w);
            assert!((fast - slow).abs() < 1e-12, "seed {seed}: {fast} vs {slow}");
        }
    }

    #[test]
    fn eaif_deterministic_across_thread_counts() {
        let (features, scores) = random_instance(150, 99);
        let w = DistanceWeights::equal();
        let wide = eaif_score(&features, &scores, &w).unwrap();
        let narrow = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| eaif_score(&features, &scores, &w).unwrap());
        assert_eq!(wide.to_bits(), narrow.to_bits());
    }

    proptest! {
        #[test]
        fn distance_symmetric_and_bounded(
            e1 in 0.0f64..1.0, s1 in 0.0f64..1.0,
            e2 in 0.0f64..1.0, s2 in 0.0f64..1.0,
            alpha in 0.0f64..=1.0,
        ) {
            let w = DistanceWeights::new(alpha, 1.0 - alpha).unwrap();
            let a = subject("a", e1, s1);
            let b = subject("b", e2, s2);
            let ab = pairwise_distance(&a, &b, &w);
            let ba = pairwise_distance(&b, &a, &w);
            prop_assert_eq!(ab.to_bits(), ba.to_bits());
            prop_assert!((0.0..=1.0).contains(&ab));
        }

        #[test]
        fn eaif_in_unit_interval_and_permutation_invariant(seed in 0u64..300) {
            let n = 3 + (seed as usize % 10);
            let (mut features, scores) = random_instance(n, seed);
            let w = DistanceWeights::equal();
            let base = eaif_score(&features, &scores, &w).unwrap();
            prop_assert!((0.0..=1.0).contains(&base));
            features.reverse();
            let permuted = eaif_score(&features, &scores, &w).unwrap();
            prop_assert!((base - permuted).abs() < 1e-12);
        }

        #[test]
        fn eaif_continuous_in_alpha(seed in 0u64..100, alpha in 0.0f64..0.99, delta in 1e-6f64..0.01) {
            // |sqrt(a) - sqrt(b)| <= sqrt(|a - b|) bounds the distance shift,
            // and the pairwise score is 1-Lipschitz in the distance
            let (features, scores) = random_instance(12, seed);
            let w1 = DistanceWeights::new(alpha, 1.0 - alpha).unwrap();
            let w2 = DistanceWeights::new(alpha + delta, 1.0 - alpha - delta).unwrap();
            let a = eaif_score(&features, &scores, &w1).unwrap();
            let b = eaif_score(&features, &scores, &w2).unwrap();
            prop_assert!((a - b).abs() <= delta.sqrt() + 1e-12);
        }

        #[test]
        fn constant_scores_dominate(seed in 0u64..100) {
            // replacing any score vector with a constant cannot lower EaIF
            let (features, scores) = random_instance(8, seed);
            let w = DistanceWeights::equal();
            let base = eaif_score(&features, &scores, &w).unwrap();
            let constant: BTreeMap<String, f64> =
                scores.keys().map(|k| (k.clone(), 0.5)).collect();
            let flat = eaif_score(&features, &constant, &w).unwrap();
            prop_assert!(flat >= base);
            prop_assert_eq!(flat, 1.0);
        }
    }
}
