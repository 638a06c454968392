//! Rank correlation and tests for comparing dependent correlations.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SeededRng;
use crate::stats::distributions::{normal_two_sided_p, t_two_sided_p};

/// Average ranks (ties get the mean of the ranks they span), 1-based.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        // positions i..=j share the mean rank
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = rank;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    let n = x.len() as f64;
    let mean_x = x.iter().sum::<f64>() / n;
    let mean_y = y.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var_x = 0.0;
    let mut var_y = 0.0;
    for (xi, yi) in x.iter().zip(y) {
        let dx = xi - mean_x;
        let dy = yi - mean_y;
        cov += dx * dy;
        var_x += dx * dx;
        var_y += dy * dy;
    }
    if var_x == 0.0 || var_y == 0.0 {
        return Err(Error::ZeroRankVariance);
    }
    Ok(cov / (var_x * var_y).sqrt())
}

/// Spearman rank correlation: Pearson correlation of the average-ranked data.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::SeriesLengthMismatch(x.len(), y.len()));
    }
    if x.len() < 3 {
        return Err(Error::SampleTooSmall(x.len(), 3));
    }
    pearson(&average_ranks(x), &average_ranks(y))
}

/// One-sample significance of a correlation against zero:
/// t = r * sqrt((n-2)/(1-r^2)) on n-2 degrees of freedom.
pub fn correlation_t_test(r: f64, n: usize) -> Result<(f64, f64)> {
    if n < 3 {
        return Err(Error::SampleTooSmall(n, 3));
    }
    if r.abs() >= 1.0 {
        return Ok((f64::INFINITY, 0.0));
    }
    let df = (n - 2) as f64;
    let t = r * (df / (1.0 - r * r)).sqrt();
    Ok((t, t_two_sided_p(t, df)))
}

/// Fisher's z transform, atanh(r).
pub fn fisher_z(r: f64) -> Result<f64> {
    if r.abs() >= 1.0 {
        return Err(Error::CorrelationOutOfRange(r));
    }
    Ok(r.atanh())
}

/// Two correlations sharing one variable: r12 = corr(1,2), r13 = corr(1,3),
/// r23 = corr(2,3), measured on the same n subjects.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationTriple {
    pub r12: f64,
    pub r13: f64,
    pub r23: f64,
    pub n: usize,
}

impl CorrelationTriple {
    pub fn new(r12: f64, r13: f64, r23: f64, n: usize) -> Result<Self> {
        for r in [r12, r13, r23] {
            if !(-1.0..=1.0).contains(&r) || !r.is_finite() {
                return Err(Error::CorrelationOutOfRange(r));
            }
        }
        if n < 4 {
            return Err(Error::SampleTooSmall(n, 4));
        }
        let triple = CorrelationTriple { r12, r13, r23, n };
        if triple.determinant() < 0.0 {
            return Err(Error::BadCorrelationTriple {
                det: triple.determinant(),
            });
        }
        Ok(triple)
    }

    /// Determinant of the implied 3x3 correlation matrix.
    pub fn determinant(&self) -> f64 {
        1.0 - self.r12 * self.r12 - self.r13 * self.r13 - self.r23 * self.r23
            + 2.0 * self.r12 * self.r13 * self.r23
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HotellingResult {
    pub t: f64,
    pub p_two_sided: f64,
    pub df: usize,
}

/// Hotelling's t for the difference between two dependent correlations
/// sharing variable 1:
/// t = (r12 - r13) * sqrt((n-3)(1+r23) / (2 det)), df = n-3.
pub fn hotelling_t(c: &CorrelationTriple) -> Result<HotellingResult> {
    let det = c.determinant();
    if det <= 0.0 {
        return Err(Error::BadCorrelationTriple { det });
    }
    let df = c.n - 3;
    let t = (c.r12 - c.r13) * ((df as f64 * (1.0 + c.r23)) / (2.0 * det)).sqrt();
    Ok(HotellingResult {
        t,
        p_two_sided: t_two_sided_p(t, df as f64),
        df,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SteigerResult {
    pub z: f64,
    pub p_two_sided: f64,
}

/// Steiger's Z for the same comparison, via Fisher-transformed correlations:
/// z = (atanh(r12) - atanh(r13)) * sqrt((n-3) / (2 (1-r23) h)) with
/// rbar^2 = (r12^2 + r13^2)/2, f = min(1, (1-r23)/(2(1-rbar^2))),
/// h = (1 - f rbar^2) / (1 - rbar^2).
pub fn steiger_z(c: &CorrelationTriple) -> Result<SteigerResult> {
    let z12 = fisher_z(c.r12)?;
    let z13 = fisher_z(c.r13)?;
    let rbar2 = (c.r12 * c.r12 + c.r13 * c.r13) / 2.0;
    if rbar2 >= 1.0 {
        return Err(Error::CorrelationOutOfRange(rbar2));
    }
    let f = ((1.0 - c.r23) / (2.0 * (1.0 - rbar2))).min(1.0);
    let h = (1.0 - f * rbar2) / (1.0 - rbar2);
    let z = (z12 - z13) * ((c.n as f64 - 3.0) / (2.0 * (1.0 - c.r23) * h)).sqrt();
    Ok(SteigerResult {
        z,
        p_two_sided: normal_two_sided_p(z),
    })
}

/// Percentile bootstrap CI for a difference of Spearman correlations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapCi {
    pub lo: f64,
    pub hi: f64,
    pub resamples: usize,
    /// Degenerate resamples that had to be redrawn.
    pub redraws: usize,
}

/// 95% percentile CI for spearman(x, y1) - spearman(x, y2) over B seeded
/// resamples with replacement.
///
/// Resample i draws from its own derived stream (seed, i), so the interval is
/// identical whether the resamples run serially or in parallel. A resample
/// whose ranks collapse to zero variance is redrawn from the same stream; the
/// whole procedure aborts once total redraws exceed 10*B.
pub fn bootstrap_corr_diff(
    x: &[f64],
    y1: &[f64],
    y2: &[f64],
    b: usize,
    seed: u64,
) -> Result<BootstrapCi> {
    if x.len() != y1.len() || x.len() != y2.len() {
        return Err(Error::SeriesLengthMismatch(x.len(), y1.len().min(y2.len())));
    }
    if x.len() < 10 {
        return Err(Error::SampleTooSmall(x.len(), 10));
    }
    if b < 100 {
        return Err(Error::TooFewResamples(b));
    }
    let n = x.len();
    let max_attempts_per_resample = 10; // 10*B failures across B streams

    let stats: Vec<Result<(f64, usize)>> = (0..b as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = SeededRng::derive(seed, i + 1);
            let mut redraws = 0usize;
            loop {
                let mut bx = Vec::with_capacity(n);
                let mut by1 = Vec::with_capacity(n);
                let mut by2 = Vec::with_capacity(n);
                for _ in 0..n {
                    let idx = rng.below(n);
                    bx.push(x[idx]);
                    by1.push(y1[idx]);
                    by2.push(y2[idx]);
                }
                match (spearman(&bx, &by1), spearman(&bx, &by2)) {
                    (Ok(r1), Ok(r2)) => return Ok((r1 - r2, redraws)),
                    _ => {
                        redraws += 1;
                        if redraws >= max_attempts_per_resample {
                            return Err(Error::DegenerateBootstrap { failures: redraws });
                        }
                    }
                }
            }
        })
        .collect();

    let mut diffs = Vec::with_capacity(b);
    let mut redraws = 0;
    for stat in stats {
        let (diff, r) = stat?;
        diffs.push(diff);
        redraws += r;
    }
    diffs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let rank = |pct: f64| -> f64 {
        let r = ((pct / 100.0) * b as f64).ceil() as usize;
        diffs[r.max(1) - 1]
    };
    Ok(BootstrapCi {
        lo: rank(2.5),
        hi: rank(97.5),
        resamples: b,
        redraws,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn ranks_with_ties() {
        assert_eq!(average_ranks(&[10.0, 20.0, 30.0]), vec![1.0, 2.0, 3.0]);
        assert_eq!(average_ranks(&[1.0, 1.0, 2.0]), vec![1.5, 1.5, 3.0]);
        assert_eq!(average_ranks(&[5.0, 5.0, 5.0]), vec![2.0, 2.0, 2.0]);
    }

    #[test]
    fn spearman_known_points() {
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]).unwrap(), 1.0);
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[30.0, 20.0, 10.0]).unwrap(), -1.0);
        let r = spearman(&[1.0, 2.0, 3.0], &[2.0, 1.0, 3.0]).unwrap();
        assert!((r - 0.5).abs() < 1e-15);
        assert!(matches!(
            spearman(&[1.0, 2.0], &[1.0, 2.0, 3.0]),
            Err(Error::SeriesLengthMismatch(2, 3))
        ));
        assert!(matches!(
            spearman(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]),
            Err(Error::ZeroRankVariance)
        ));
    }

    #[test]
    fn one_sample_t_test_behaves() {
        let (t, p) = correlation_t_test(0.0, 30).unwrap();
        assert_eq!(t, 0.0);
        assert_eq!(p, 1.0);
        // r = 0.5, n = 30: t = 0.5 * sqrt(28 / 0.75)
        let (t, p) = correlation_t_test(0.5, 30).unwrap();
        assert!((t - 0.5 * (28.0f64 / 0.75).sqrt()).abs() < 1e-12);
        assert!(p < 0.01 && p > 0.0);
        // stronger correlations are more significant
        let (_, p_weak) = correlation_t_test(0.2, 30).unwrap();
        assert!(p_weak > p);
    }

    #[test]
    fn fisher_z_known_points() {
        assert_eq!(fisher_z(0.0).unwrap(), 0.0);
        assert!((fisher_z(0.5).unwrap() - 0.5493061443340549).abs() < 1e-12);
        assert_eq!(fisher_z(0.5).unwrap(), -fisher_z(-0.5).unwrap());
        assert!(matches!(fisher_z(1.0), Err(Error::CorrelationOutOfRange(_))));
    }

    #[test]
    fn hotelling_formula_point() {
        let c = CorrelationTriple::new(0.7, 0.5, 0.2, 100).unwrap();
        assert!((c.determinant() - 0.36).abs() < 1e-12);
        let result = hotelling_t(&c).unwrap();
        assert!((result.t - 2.5430).abs() < 1e-3, "t = {}", result.t);
        assert_eq!(result.df, 97);
        assert!(result.p_two_sided < 0.05);
    }

    #[test]
    fn steiger_formula_point() {
        let c = CorrelationTriple::new(0.7, 0.5, 0.2, 100).unwrap();
        let result = steiger_z(&c).unwrap();
        assert!((result.z - 2.2468).abs() < 1e-3, "z = {}", result.z);
        assert!(result.p_two_sided < 0.05);
    }

    #[test]
    fn tests_are_zero_at_equal_correlations() {
        let c = CorrelationTriple::new(0.6, 0.6, 0.3, 50).unwrap();
        assert_eq!(hotelling_t(&c).unwrap().t, 0.0);
        assert_eq!(hotelling_t(&c).unwrap().p_two_sided, 1.0);
        assert_eq!(steiger_z(&c).unwrap().z, 0.0);
    }

    #[test]
    fn minimal_sample_size_still_defined() {
        let c = CorrelationTriple::new(0.3, 0.1, 0.2, 4).unwrap();
        let result = hotelling_t(&c).unwrap();
        assert_eq!(result.df, 1);
        assert!(result.t.is_finite());
    }

    #[test]
    fn invalid_triples_rejected() {
        assert!(matches!(
            CorrelationTriple::new(0.9, -0.9, 0.9, 50),
            Err(Error::BadCorrelationTriple { .. })
        ));
        assert!(matches!(
            CorrelationTriple::new(1.5, 0.0, 0.0, 50),
            Err(Error::CorrelationOutOfRange(_))
        ));
    }

    #[test]
    fn bootstrap_identical_series_is_degenerate_zero() {
        let mut rng = SeededRng::new(1);
        let x: Vec<f64> = (0..50).map(|_| rng.next_f64()).collect();
        let y: Vec<f64> = (0..50).map(|_| rng.next_f64()).collect();
        let ci = bootstrap_corr_diff(&x, &y, &y, 200, 7).unwrap();
        assert_eq!(ci.lo, 0.0);
        assert_eq!(ci.hi, 0.0);
    }

    #[test]
    fn bootstrap_deterministic_and_schedule_independent() {
        let mut rng = SeededRng::new(2);
        let x: Vec<f64> = (0..60).map(|_| rng.next_f64()).collect();
        let y1: Vec<f64> = x.iter().map(|v| v + 0.1 * rng.normal()).collect();
        let y2: Vec<f64> = (0..60).map(|_| rng.next_f64()).collect();
        let a = bootstrap_corr_diff(&x, &y1, &y2, 300, 42).unwrap();
        let b = bootstrap_corr_diff(&x, &y1, &y2, 300, 42).unwrap();
        assert_eq!(a, b);
        let serial = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| bootstrap_corr_diff(&x, &y1, &y2, 300, 42).unwrap());
        assert_eq!(a, serial);
    }

    #[test]
    fn bootstrap_detects_real_difference() {
        // y1 tracks x, y2 is independent noise: the CI must exclude zero
        let mut rng = SeededRng::new(3);
        let x: Vec<f64> = (0..200).map(|_| rng.next_f64()).collect();
        let y1: Vec<f64> = x.iter().map(|v| v + 0.2 * rng.normal()).collect();
        let y2: Vec<f64> = (0..200).map(|_| rng.next_f64()).collect();
        let ci = bootstrap_corr_diff(&x, &y1, &y2, 2000, 11).unwrap();
        assert!(ci.lo > 0.0, "ci = [{}, {}]", ci.lo, ci.hi);
    }

    proptest! {
        #[test]
        fn spearman_invariant_under_monotone_transform(seed in 0u64..200) {
            let mut rng = SeededRng::new(seed);
            let x: Vec<f64> = (0..30).map(|_| rng.next_f64() * 10.0).collect();
            let y: Vec<f64> = (0..30).map(|_| rng.next_f64() * 10.0).collect();
            let base = spearman(&x, &y).unwrap();
            let tx: Vec<f64> = x.iter().map(|v| v.exp()).collect();
            let ty: Vec<f64> = y.iter().map(|v| v * 3.0 + 7.0).collect();
            let transformed = spearman(&tx, &ty).unwrap();
            prop_assert!((base - transformed).abs() < 1e-12);
        }

        #[test]
        fn dependent_tests_antisymmetric(seed in 0u64..200) {
            let mut rng = SeededRng::new(seed);
            let r12 = rng.next_f64() * 1.2 - 0.6;
            let r13 = rng.next_f64() * 1.2 - 0.6;
            let r23 = rng.next_f64() * 0.5;
            if let Ok(c) = CorrelationTriple::new(r12, r13, r23, 80) {
                let flipped = CorrelationTriple::new(r13, r12, r23, 80).unwrap();
                let t = hotelling_t(&c).unwrap().t;
                let t_flipped = hotelling_t(&flipped).unwrap().t;
                prop_assert!((t + t_flipped).abs() < 1e-12);
                let z = steiger_z(&c).unwrap().z;
                let z_flipped = steiger_z(&flipped).unwrap().z;
                prop_assert!((z + z_flipped).abs() < 1e-12);
            }
        }
    }
}
