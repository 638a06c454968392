//! Compensated (error-tracking) summation.

/// Neumaier-variant Kahan accumulator. Tracks the rounding error of every
/// addition so long reductions stay accurate to within one ulp of the exact
/// sum, independent of how the pair space is later chunked.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, value: f64) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.compensation += (self.sum - t) + value;
        } else {
            self.compensation += (value - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }

    pub fn sum_iter<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
        let mut acc = Self::new();
        for v in iter {
            acc.add(v);
        }
        acc.value()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_cancellation() {
        // 1 + 1e100 - 1e100 loses the 1 in naive f64 summation
        let mut acc = CompensatedSum::new();
        acc.add(1.0);
        acc.add(1e100);
        acc.add(-1e100);
        assert_eq!(acc.value(), 1.0);
    }

    #[test]
    fn matches_exact_sum_on_small_input() {
        let values = [0.1, 0.2, 0.3, 0.4];
        assert!((CompensatedSum::sum_iter(values) - 1.0).abs() < 1e-15);
    }
}
