//! Ordinary least squares with classical standard errors, Wald tests, and
//! multiple-comparison correction.

// index loops over matrix rows/columns read better than iterator chains here
#![allow(clippy::needless_range_loop)]

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::distributions::{chi_square_sf, f_sf};

/// A fitted linear model. The design matrix is expected to carry its own
/// intercept column; coefficient order follows the column order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionFit {
    pub coefficients: Vec<f64>,
    pub standard_errors: Vec<f64>,
    /// Coefficient covariance matrix (row-major, p x p).
    pub covariance: Vec<Vec<f64>>,
    pub r_squared: f64,
    pub adj_r_squared: f64,
    /// F statistic against the intercept-only model, with its p-value.
    pub f_statistic: f64,
    pub f_p_value: f64,
    pub residual_df: usize,
    /// Estimated residual variance (RSS / residual_df).
    pub residual_variance: f64,
}

/// Householder QR in place. Returns the factored matrix (R in the upper
/// triangle, reflectors below) and applies the same transforms to `y`.
fn householder_qr(a: &mut [Vec<f64>], y: &mut [f64]) -> Result<()> {
    let n = a.len();
    let p = a[0].len();
    for k in 0..p {
        // norm of the k-th column below the diagonal
        let mut norm = 0.0;
        for row in a.iter().take(n).skip(k) {
            norm += row[k] * row[k];
        }
        let norm = norm.sqrt();
        if norm < 1e-12 {
            return Err(Error::RankDeficient { col: k });
        }
        let alpha = if a[k][k] > 0.0 { -norm } else { norm };
        let mut v = vec![0.0; n - k];
        v[0] = a[k][k] - alpha;
        for i in k + 1..n {
            v[i - k] = a[i][k];
        }
        let v_norm2: f64 = v.iter().map(|x| x * x).sum();
        if v_norm2 < 1e-300 {
            // column already aligned; nothing to reflect
            a[k][k] = alpha;
            continue;
        }
        // apply I - 2 v v^T / (v^T v) to the remaining columns and to y
        for col in k..p {
            let mut dot = 0.0;
            for i in k..n {
                dot += v[i - k] * a[i][col];
            }
            let scale = 2.0 * dot / v_norm2;
            for i in k..n {
                a[i][col] -= scale * v[i - k];
            }
        }
        let mut dot = 0.0;
        for i in k..n {
            dot += v[i - k] * y[i];
        }
        let scale = 2.0 * dot / v_norm2;
        for i in k..n {
            y[i] -= scale * v[i - k];
        }
        a[k][k] = alpha;
        for i in k + 1..n {
            a[i][k] = 0.0;
        }
    }
    Ok(())
}

fn back_substitute(r: &[Vec<f64>], rhs: &[f64], p: usize) -> Vec<f64> {
    let mut x = vec![0.0; p];
    for i in (0..p).rev() {
        let mut acc = rhs[i];
        for j in i + 1..p {
            acc -= r[i][j] * x[j];
        }
        x[i] = acc / r[i][i];
    }
    x
}

/// Inverse of the upper-triangular R, column by column.
fn invert_upper(r: &[Vec<f64>], p: usize) -> Vec<Vec<f64>> {
    let mut inv = vec![vec![0.0; p]; p];
    for col in 0..p {
        let mut e = vec![0.0; p];
        e[col] = 1.0;
        let x = back_substitute(r, &e, p);
        for row in 0..p {
            inv[row][col] = x[row];
        }
    }
    inv
}

/// Fit y = X b by QR decomposition. `x` is row-major with an explicit
/// intercept column if one is wanted; R^2 and the F test are computed against
/// the mean of y, so they are meaningful when an intercept is present.
pub fn ols_fit(x: &[Vec<f64>], y: &[f64]) -> Result<RegressionFit> {
    let n = x.len();
    if n == 0 || n != y.len() {
        return Err(Error::LengthMismatch {
            rows: n,
            labels: y.len(),
        });
    }
    let p = x[0].len();
    if n <= p {
        return Err(Error::UnderdeterminedSystem { rows: n, cols: p });
    }

    let mut work = x.to_vec();
    let mut qty = y.to_vec();
    householder_qr(&mut work, &mut qty)?;
    let coefficients = back_substitute(&work, &qty, p);

    // residuals against the original system
    let residuals: Vec<f64> = x
        .iter()
        .zip(y)
        .map(|(row, &yi)| yi - row.iter().zip(&coefficients).map(|(a, b)| a * b).sum::<f64>())
        .collect();
    let rss: f64 = residuals.iter().map(|r| r * r).sum();
    let mean_y = y.iter().sum::<f64>() / n as f64;
    let tss: f64 = y.iter().map(|yi| (yi - mean_y) * (yi - mean_y)).sum();

    let residual_df = n - p;
    let residual_variance = rss / residual_df as f64;

    let r_inv = invert_upper(&work, p);
    // (X^T X)^-1 = R^-1 R^-T
    let mut covariance = vec![vec![0.0; p]; p];
    for i in 0..p {
        for j in 0..p {
            let mut acc = 0.0;
            for k in 0..p {
                acc += r_inv[i][k] * r_inv[j][k];
            }
            covariance[i][j] = acc * residual_variance;
        }
    }
    let standard_errors: Vec<f64> = (0..p).map(|i| covariance[i][i].sqrt()).collect();

    let r_squared = if tss == 0.0 { 0.0 } else { 1.0 - rss / tss };
    let slope_count = p.saturating_sub(1);
    let adj_r_squared = if slope_count == 0 || tss == 0.0 {
        r_squared
    } else {
        1.0 - (1.0 - r_squared) * (n as f64 - 1.0) / residual_df as f64
    };
    let (f_statistic, f_p_value) = if slope_count == 0 || rss == 0.0 || tss == 0.0 {
        if rss == 0.0 && tss > 0.0 {
            (f64::INFINITY, 0.0)
        } else {
            (0.0, 1.0)
        }
    } else {
        let f = (r_squared / slope_count as f64) / ((1.0 - r_squared) / residual_df as f64);
        (f, f_sf(f, slope_count as f64, residual_df as f64))
    };

    Ok(RegressionFit {
        coefficients,
        standard_errors,
        covariance,
        r_squared,
        adj_r_squared,
        f_statistic,
        f_p_value,
        residual_df,
        residual_variance,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaldResult {
    pub chi2: f64,
    pub df: usize,
    pub p: f64,
}

/// Wald test of H0: the restricted coefficients are jointly zero.
/// chi2 = b_R^T Cov_R^-1 b_R with df = |R|.
pub fn wald_test(
    fit: &RegressionFit,
    covariance: &[Vec<f64>],
    restricted: &[usize],
) -> Result<WaldResult> {
    if restricted.is_empty() {
        return Ok(WaldResult {
            chi2: 0.0,
            df: 0,
            p: 1.0,
        });
    }
    if fit.residual_variance <= 1e-300 || fit.r_squared >= 1.0 - 1e-12 {
        return Err(Error::WaldUndefined);
    }
    let k = restricted.len();
    let beta: Vec<f64> = restricted.iter().map(|&i| fit.coefficients[i]).collect();
    let mut block = vec![vec![0.0; k]; k];
    for (bi, &i) in restricted.iter().enumerate() {
        for (bj, &j) in restricted.iter().enumerate() {
            block[bi][bj] = covariance[i][j];
        }
    }
    let solved = solve_spd(&block, &beta)?;
    let chi2: f64 = beta.iter().zip(&solved).map(|(b, s)| b * s).sum();
    Ok(WaldResult {
        chi2,
        df: k,
        p: chi_square_sf(chi2, k as f64),
    })
}

/// Solve A x = b for a small symmetric block via Gaussian elimination with
/// partial pivoting.
fn solve_spd(a: &[Vec<f64>], b: &[f64]) -> Result<Vec<f64>> {
    let n = b.len();
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .zip(b)
        .map(|(row, &rhs)| {
            let mut r = row.clone();
            r.push(rhs);
            r
        })
        .collect();
    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&i, &j| m[i][col].abs().partial_cmp(&m[j][col].abs()).unwrap())
            .unwrap();
        if m[pivot_row][col].abs() < 1e-300 {
            return Err(Error::SingularCovariance);
        }
        m.swap(col, pivot_row);
        for row in col + 1..n {
            let factor = m[row][col] / m[col][col];
            for k in col..=n {
                m[row][k] -= factor * m[col][k];
            }
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut acc = m[i][n];
        for j in i + 1..n {
            acc -= m[i][j] * x[j];
        }
        x[i] = acc / m[i][i];
    }
    Ok(x)
}

/// Bonferroni adjustment: each p-value becomes min(1, m * p).
pub fn bonferroni(p_values: &[f64], m: usize) -> Result<Vec<f64>> {
    if m < p_values.len() {
        return Err(Error::BadCorrectionCount {
            m,
            tests: p_values.len(),
        });
    }
    p_values
        .iter()
        .map(|&p| {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::BadPValue(p));
            }
            Ok((m as f64 * p).min(1.0))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeededRng;
    use proptest::prelude::*;

    fn design_with_intercept(xs: &[Vec<f64>]) -> Vec<Vec<f64>> {
        xs.iter()
            .map(|row| {
                let mut r = vec![1.0];
                r.extend_from_slice(row);
                r
            })
            .collect()
    }

    #[test]
    fn exact_linear_fit() {
        let x: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        let y: Vec<f64> = x.iter().map(|r| 1.0 + 2.0 * r[0]).collect();
        let fit = ols_fit(&design_with_intercept(&x), &y).unwrap();
        assert!((fit.coefficients[0] - 1.0).abs() < 1e-10);
        assert!((fit.coefficients[1] - 2.0).abs() < 1e-10);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_response_has_zero_slope() {
        let x: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        let y = vec![3.5; 10];
        let fit = ols_fit(&design_with_intercept(&x), &y).unwrap();
        assert!(fit.coefficients[1].abs() < 1e-12);
        assert_eq!(fit.r_squared, 0.0);
    }

    #[test]
    fn rank_deficiency_detected() {
        // second column duplicates the first
        let x: Vec<Vec<f64>> = (0..10).map(|i| vec![1.0, i as f64, i as f64]).collect();
        let y: Vec<f64> = (0..10).map(|i| i as f64).collect();
        assert!(matches!(ols_fit(&x, &y), Err(Error::RankDeficient { .. })));
    }

    /// Normal-equation oracle: (X^T X)^-1 X^T y via Gaussian elimination.
    fn normal_equation_oracle(x: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
        let p = x[0].len();
        let mut xtx = vec![vec![0.0; p]; p];
        let mut xty = vec![0.0; p];
        for (row, &yi) in x.iter().zip(y) {
            for i in 0..p {
                for j in 0..p {
                    xtx[i][j] += row[i] * row[j];
                }
                xty[i] += row[i] * yi;
            }
        }
        solve_spd(&xtx, &xty).unwrap()
    }

    #[test]
    fn qr_matches_normal_equation_oracle() {
        let mut rng = SeededRng::new(17);
        for _ in 0..20 {
            let x: Vec<Vec<f64>> = (0..50)
                .map(|_| vec![1.0, rng.normal(), rng.normal() * 2.0])
                .collect();
            let y: Vec<f64> = x
                .iter()
                .map(|r| 0.5 + 1.5 * r[1] - 0.7 * r[2] + 0.2 * rng.normal())
                .collect();
            let fit = ols_fit(&x, &y).unwrap();
            let oracle = normal_equation_oracle(&x, &y);
            for (a, b) in fit.coefficients.iter().zip(&oracle) {
                assert!((a - b).abs() < 1e-9, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn residuals_orthogonal_to_design() {
        let mut rng = SeededRng::new(23);
        let x: Vec<Vec<f64>> = (0..80).map(|_| vec![1.0, rng.normal(), rng.next_f64()]).collect();
        let y: Vec<f64> = x.iter().map(|r| r[1] - r[2] + rng.normal()).collect();
        let fit = ols_fit(&x, &y).unwrap();
        let residuals: Vec<f64> = x
            .iter()
            .zip(&y)
            .map(|(row, &yi)| yi - row.iter().zip(&fit.coefficients).map(|(a, b)| a * b).sum::<f64>())
            .collect();
        for col in 0..3 {
            let dot: f64 = x.iter().zip(&residuals).map(|(row, r)| row[col] * r).sum();
            assert!(dot.abs() < 1e-8 * y.len() as f64, "column {col}: {dot}");
        }
    }

    #[test]
    fn wald_single_restriction_is_squared_t() {
        let mut rng = SeededRng::new(31);
        let x: Vec<Vec<f64>> = (0..60).map(|_| vec![1.0, rng.normal()]).collect();
        let y: Vec<f64> = x.iter().map(|r| 0.3 + 0.8 * r[1] + rng.normal()).collect();
        let fit = ols_fit(&x, &y).unwrap();
        let wald = wald_test(&fit, &fit.covariance, &[1]).unwrap();
        let t = fit.coefficients[1] / fit.standard_errors[1];
        assert!((wald.chi2 - t * t).abs() < 1e-9);
        assert_eq!(wald.df, 1);
    }

    #[test]
    fn wald_zero_coefficients_give_zero_chi2() {
        let fit = RegressionFit {
            coefficients: vec![1.0, 0.0, 0.0],
            standard_errors: vec![0.1, 0.2, 0.2],
            covariance: vec![
                vec![0.01, 0.0, 0.0],
                vec![0.0, 0.04, 0.0],
                vec![0.0, 0.0, 0.04],
            ],
            r_squared: 0.5,
            adj_r_squared: 0.5,
            f_statistic: 1.0,
            f_p_value: 0.3,
            residual_df: 10,
            residual_variance: 1.0,
        };
        let wald = wald_test(&fit, &fit.covariance, &[1, 2]).unwrap();
        assert_eq!(wald.chi2, 0.0);
        assert_eq!(wald.p, 1.0);
    }

    #[test]
    fn wald_undefined_on_perfect_fit() {
        let x: Vec<Vec<f64>> = (0..10).map(|i| vec![1.0, i as f64]).collect();
        let y: Vec<f64> = x.iter().map(|r| 1.0 + 2.0 * r[1]).collect();
        let fit = ols_fit(&x, &y).unwrap();
        assert!(matches!(
            wald_test(&fit, &fit.covariance, &[1]),
            Err(Error::WaldUndefined)
        ));
    }

    #[test]
    fn bonferroni_known_points() {
        assert_eq!(bonferroni(&[0.01], 5).unwrap(), vec![0.05]);
        assert_eq!(bonferroni(&[0.4], 5).unwrap(), vec![1.0]);
        assert_eq!(bonferroni(&[0.001, 0.02], 2).unwrap(), vec![0.002, 0.04]);
        assert!(matches!(
            bonferroni(&[0.1, 0.2, 0.3], 2),
            Err(Error::BadCorrectionCount { .. })
        ));
        assert!(matches!(bonferroni(&[1.5], 2), Err(Error::BadPValue(_))));
    }

    proptest! {
        #[test]
        fn bonferroni_bounds(p in 0.0f64..=1.0, extra in 0usize..10) {
            let m = 1 + extra;
            let adjusted = bonferroni(&[p], m).unwrap()[0];
            prop_assert!(adjusted >= p);
            prop_assert!(adjusted <= 1.0);
        }
    }
}
