//! Compensated accumulation and binomial helpers for the alternating
//! sums that appear in every closed-form order-statistic expression.

#[allow(unused_imports)] // shadowed by inherent methods whenever std is linked
use num_traits::Float;

/// Neumaier (improved Kahan–Babuška) running sum.
///
/// Alongside the compensated total it tracks the sum of absolute values of
/// the terms, which bounds the cancellation suffered by the total.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
    magnitude: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, term: f64) {
        let t = self.sum + term;
        if self.sum.abs() >= term.abs() {
            self.compensation += (self.sum - t) + term;
        } else {
            self.compensation += (term - t) + self.sum;
        }
        self.sum = t;
        self.magnitude += term.abs();
    }

    pub fn total(&self) -> f64 {
        self.sum + self.compensation
    }

    /// Sum of |term| over everything added so far.
    pub fn magnitude(&self) -> f64 {
        self.magnitude
    }

    /// A conservative bound on the absolute rounding error of `total()`,
    /// assuming each term carries a relative error of `term_rel_err`.
    pub fn error_bound(&self, term_rel_err: f64) -> f64 {
        self.magnitude * (term_rel_err + 2.0 * f64::EPSILON)
    }
}

impl core::iter::FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = CompensatedSum::new();
        for t in iter {
            acc.add(t);
        }
        acc
    }
}

/// Σ_{ℓ=0}^{b−1} C(b−1, ℓ)·(−1)^ℓ·term(ℓ), accumulated with compensation.
pub fn alternating_binomial_sum(b: usize, mut term: impl FnMut(usize) -> f64) -> CompensatedSum {
    let row = binomial_row(b.saturating_sub(1));
    let mut acc = CompensatedSum::new();
    for (l, c) in row.iter().enumerate() {
        let t = c * term(l);
        acc.add(if l % 2 == 0 { t } else { -t });
    }
    acc
}

/// Relative accuracy demanded of a closed-form alternating sum before it is
/// trusted over numerical integration.
pub const CLOSED_FORM_TOL: f64 = 1e-11;

/// The compensated total if its cancellation-error bound is below
/// `CLOSED_FORM_TOL` (relative to max(1, |total|)), given that each term was
/// computed to relative accuracy `term_rel_err`.
pub fn trusted_total(acc: &CompensatedSum, term_rel_err: f64) -> Option<f64> {
    let total = acc.total();
    (total.is_finite() && acc.error_bound(term_rel_err) <= CLOSED_FORM_TOL * total.abs().max(1.0)).then_some(total)
}

/// Row `n` of Pascal's triangle as floats: C(n, 0), C(n, 1), ..., C(n, n).
///
/// Entries are exact while they stay below 2^53 (n ≤ 56 for every entry).
pub fn binomial_row(n: usize) -> alloc::vec::Vec<f64> {
    let mut row = alloc::vec::Vec::with_capacity(n + 1);
    let mut c = 1.0_f64;
    row.push(c);
    for k in 0..n {
        c = c * (n - k) as f64 / (k + 1) as f64;
        row.push(c.round());
    }
    row
}

/// Natural log of C(n, k).
pub fn ln_binomial(n: u64, k: u64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)
}

/// ln(n!) by direct summation for small n and Stirling's series beyond.
pub fn ln_factorial(n: u64) -> f64 {
    if n < 32 {
        let mut acc = 0.0_f64;
        for k in 2..=n {
            acc += (k as f64).ln();
        }
        return acc;
    }
    let x = (n + 1) as f64;
    // Stirling series for ln Γ(x), truncated after the x^-7 term.
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    (x - 0.5) * x.ln() - x
        + 0.5 * (2.0 * core::f64::consts::PI).ln()
        + inv * (1.0 / 12.0 - inv2 * (1.0 / 360.0 - inv2 * (1.0 / 1260.0 - inv2 / 1680.0)))
}

/// Harmonic number H_n = 1 + 1/2 + ... + 1/n.
pub fn harmonic(n: usize) -> f64 {
    (1..=n).rev().map(|k| 1.0 / k as f64).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn neumaier_recovers_cancelled_terms() {
        let acc: CompensatedSum = [1.0, 1e100, 1.0, -1e100].into_iter().collect();
        assert_eq!(acc.total(), 2.0);
        assert_eq!(acc.magnitude(), 2.0 + 2e100);
    }

    #[test]
    fn binomial_rows_are_exact() {
        assert_eq!(binomial_row(4), [1.0, 4.0, 6.0, 4.0, 1.0]);
        let row = binomial_row(40);
        assert_eq!(row[20], 137_846_528_820.0);
        assert_eq!(row.iter().sum::<f64>(), 2f64.powi(40));
    }

    #[test]
    fn ln_factorial_matches_product_across_switch() {
        for n in [0u64, 1, 5, 31, 32, 33, 60, 170] {
            let direct: f64 = (2..=n).map(|k| (k as f64).ln()).sum();
            assert!((ln_factorial(n) - direct).abs() < 1e-10 * direct.max(1.0), "n={n}");
        }
        assert!((ln_binomial(64, 32) - 1.832_624_140_942_590_5e18_f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn harmonic_numbers() {
        assert_eq!(harmonic(1), 1.0);
        assert!((harmonic(10) - 7381.0 / 2520.0).abs() < 1e-15);
    }
}
