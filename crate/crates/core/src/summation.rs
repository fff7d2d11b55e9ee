//! Compensated summation.
//!
//! All reductions that feed a reported number go through [`CompensatedSum`]
//! with a fixed term order, so results are bit-identical across runs and
//! thread counts.

use std::iter::Sum;
use std::ops::AddAssign;

/// Neumaier's variant of Kahan summation.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub const fn new() -> Self {
        Self {
            sum: 0.0,
            compensation: 0.0,
        }
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

    /// Merge another partial sum (used to combine tiles in a fixed order).
    #[inline]
    pub fn merge(&mut self, other: &CompensatedSum) {
        self.add(other.sum);
        self.add(other.compensation);
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

impl AddAssign<f64> for CompensatedSum {
    fn add_assign(&mut self, rhs: f64) {
        self.add(rhs);
    }
}

impl Sum<f64> for CompensatedSum {
    fn sum<I: Iterator<Item = f64>>(iter: I) -> Self {
        let mut acc = CompensatedSum::new();
        for v in iter {
            acc.add(v);
        }
        acc
    }
}

/// Compensated sum of a slice, left to right.
pub fn compensated_sum(values: &[f64]) -> f64 {
    values.iter().copied().sum::<CompensatedSum>().value()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn recovers_small_terms_lost_by_naive_sum() {
        let mut values = vec![1.0e16];
        values.extend(std::iter::repeat_n(1.0, 1000));
        values.push(-1.0e16);
        let naive: f64 = values.iter().sum();
        assert_eq!(compensated_sum(&values), 1000.0);
        assert_ne!(naive, 1000.0);
    }

    #[test]
    fn merge_matches_single_pass() {
        let values: Vec<f64> = (1..=10_000).map(|i| 1.0 / i as f64).collect();
        let whole = compensated_sum(&values);
        let mut merged = CompensatedSum::new();
        for chunk in values.chunks(97) {
            let part: CompensatedSum = chunk.iter().copied().sum();
            merged.merge(&part);
        }
        assert!((whole - merged.value()).abs() <= 4.0 * f64::EPSILON * whole);
    }

    proptest! {
        #[test]
        fn close_to_exact_rational_sum(xs in proptest::collection::vec(-1.0e6f64..1.0e6, 1..400)) {
            // Integers times 2^-10 are exactly representable, so the true sum is exact in i128.
            let scaled: Vec<f64> = xs.iter().map(|x| (x * 1024.0).round() / 1024.0).collect();
            let exact: i128 = scaled.iter().map(|x| (x * 1024.0) as i128).sum();
            let exact = exact as f64 / 1024.0;
            prop_assert!((compensated_sum(&scaled) - exact).abs() <= 1e-9 * (1.0 + exact.abs()));
        }
    }
}
