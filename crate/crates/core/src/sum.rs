/// Neumaier-compensated accumulator.
///
/// Sums built from the same terms in a different order agree to a few ulps
/// of the total, which keeps tree evaluations reproducible.
#[derive(Debug, Clone, Copy, Default)]
pub struct NeumaierSum {
    sum: f64,
    compensation: f64,
}

impl NeumaierSum {
    pub const fn new() -> Self {
        Self {
            sum: 0.0,
            compensation: 0.0,
        }
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn merge(&mut self, other: &NeumaierSum) {
        self.add(other.sum);
        self.add(other.compensation);
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

impl core::iter::FromIterator<f64> for NeumaierSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = NeumaierSum::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_cancelled_small_terms() {
        let acc: NeumaierSum = [1.0, 1e100, 1.0, -1e100].into_iter().collect();
        assert_eq!(acc.value(), 2.0);
    }

    #[test]
    fn order_independent_for_mixed_magnitudes() {
        let terms: alloc::vec::Vec<f64> = (1..2000).map(|k| 1.0 / (k as f64 * k as f64)).collect();
        let fwd: NeumaierSum = terms.iter().copied().collect();
        let rev: NeumaierSum = terms.iter().rev().copied().collect();
        assert!((fwd.value() - rev.value()).abs() < 1e-15);
    }
}
