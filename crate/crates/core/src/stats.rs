//! Relative entropy, χ² goodness of fit, binomial intervals and a
//! Kolmogorov-Smirnov test against the uniform distribution.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeHistogram {
    pub counts: Vec<u64>,
    pub expected: Vec<f64>,
}

impl OutcomeHistogram {
    pub fn new(counts: Vec<u64>, expected: Vec<f64>) -> Result<Self> {
        if counts.len() != expected.len() || counts.is_empty() {
            return Err(Error::config("expected", "needs one probability per category"));
        }
        if expected.iter().any(|p| !(*p >= 0.0)) {
            return Err(Error::config("expected", "probabilities must be non-negative"));
        }
        let total: f64 = expected.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::config("expected", format!("probabilities sum to {total}")));
        }
        if counts.iter().sum::<u64>() == 0 {
            return Err(Error::config("counts", "need at least one observation"));
        }
        Ok(Self { counts, expected })
    }

    /// Tallies zero-based outcome indices into `expected.len()` categories.
    pub fn from_outcomes(outcomes: impl IntoIterator<Item = usize>, expected: Vec<f64>) -> Result<Self> {
        let mut counts = vec![0u64; expected.len()];
        for o in outcomes {
            if o >= counts.len() {
                return Err(Error::config("outcome", format!("index {o} out of range")));
            }
            counts[o] += 1;
        }
        Self::new(counts, expected)
    }

    pub fn n_total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn frequencies(&self) -> Vec<f64> {
        let n = self.n_total() as f64;
        self.counts.iter().map(|c| *c as f64 / n).collect()
    }
}

/// `H(f|p) = Σ f_k ln(f_k/p_k)` with `0 ln 0 = 0`.
pub fn relative_entropy(hist: &OutcomeHistogram) -> Result<f64> {
    let mut h = 0.0;
    for (k, (f, p)) in hist.frequencies().iter().zip(&hist.expected).enumerate() {
        if *f == 0.0 {
            continue;
        }
        if *p == 0.0 {
            return Err(Error::Support(k));
        }
        h += f * (f / p).ln();
    }
    Ok(h.max(0.0))
}

/// `χ² = n Σ (f_k - p_k)²/p_k`.
pub fn chi_square_statistic(hist: &OutcomeHistogram) -> Result<f64> {
    let n = hist.n_total() as f64;
    let mut s = 0.0;
    for (k, (f, p)) in hist.frequencies().iter().zip(&hist.expected).enumerate() {
        if *p == 0.0 {
            return Err(Error::Support(k));
        }
        s += (f - p) * (f - p) / p;
    }
    Ok(n * s)
}

/// `ln Γ(x)` for `x > 0` (Lanczos, g = 7).
pub fn ln_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const C: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = C[0];
    let t = x + G + 0.5;
    for (i, c) in C.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// Regularized lower incomplete gamma `P(a, x)`: power series below
/// `x = a + 1`, Lentz continued fraction for `Q` above.
pub fn regularized_gamma_p(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let prefactor = (a * x.ln() - x - ln_gamma(a)).exp();
    if x < a + 1.0 {
        let mut term = 1.0 / a;
        let mut sum = term;
        let mut ap = a;
        for _ in 0..10_000 {
            ap += 1.0;
            term *= x / ap;
            sum += term;
            if term.abs() < sum.abs() * 1e-16 {
                break;
            }
        }
        (sum * prefactor).min(1.0)
    } else {
        let tiny = 1e-300;
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..10_000 {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < tiny {
                d = tiny;
            }
            c = b + an / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let del = d * c;
            h *= del;
            if (del - 1.0).abs() < 1e-16 {
                break;
            }
        }
        (1.0 - prefactor * h).max(0.0)
    }
}

pub fn chi_square_cdf(x: f64, dof: f64) -> f64 {
    regularized_gamma_p(0.5 * dof, 0.5 * x)
}

/// `Q_α` with `P(χ²_dof ≤ Q_α) = α`, by bisection on the CDF.
pub fn chi_square_quantile(dof: f64, alpha: f64) -> Result<f64> {
    if !(dof >= 1.0) {
        return Err(Error::config("dof", "must be at least 1"));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::config("alpha", "must lie in (0, 1)"));
    }
    let mut hi = dof.max(1.0);
    while chi_square_cdf(hi, dof) < alpha {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if chi_square_cdf(mid, dof) < alpha {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-13 * hi.max(1.0) {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Standard deviation `√(p(1-p)/n)` of a binomial fraction.
pub fn binomial_sigma(p: f64, n: u64) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

/// Whether `k/n` lies within `z` binomial standard deviations of `p`.
pub fn within_binomial(k: u64, n: u64, p: f64, z: f64) -> bool {
    (k as f64 / n as f64 - p).abs() <= z * binomial_sigma(p, n)
}

/// Wilson score interval for `k` successes in `n` trials.
pub fn wilson_interval(k: u64, n: u64, z: f64) -> (f64, f64) {
    let n = n as f64;
    let p = k as f64 / n;
    let z2 = z * z;
    let centre = (p + z2 / (2.0 * n)) / (1.0 + z2 / n);
    let half = z / (1.0 + z2 / n) * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// Kolmogorov-Smirnov p-value of `sample` against the uniform law on [0, 1].
/// Sorts `sample` in place.
pub fn ks_uniform_p_value(sample: &mut [f64]) -> f64 {
    sample.sort_by(f64::total_cmp);
    let n = sample.len() as f64;
    let d = sample
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let x = x.clamp(0.0, 1.0);
            (x - i as f64 / n).max((i as f64 + 1.0) / n - x)
        })
        .fold(0.0, f64::max);
    let sn = n.sqrt();
    kolmogorov_q((sn + 0.12 + 0.11 / sn) * d)
}

/// Survival function of the Kolmogorov distribution.
fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    for j in 1..=200 {
        let j = j as f64;
        let term = 2.0 * (-1f64).powi(j as i32 - 1) * (-2.0 * j * j * lambda * lambda).exp();
        sum += term;
        if term.abs() < 1e-16 {
            break;
        }
    }
    sum.clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use statrs::distribution::{ChiSquared, ContinuousCDF};

    fn hist(counts: &[u64], p: &[f64]) -> OutcomeHistogram {
        OutcomeHistogram::new(counts.to_vec(), p.to_vec()).unwrap()
    }

    #[test]
    fn relative_entropy_examples() {
        assert_eq!(relative_entropy(&hist(&[25, 75], &[0.25, 0.75])).unwrap(), 0.0);
        assert_relative_eq!(
            relative_entropy(&hist(&[10, 0], &[0.5, 0.5])).unwrap(),
            std::f64::consts::LN_2,
            epsilon = 1e-15
        );
        let v = relative_entropy(&hist(&[52, 48], &[0.5, 0.5])).unwrap();
        let direct = 0.52 * (0.52f64 / 0.5).ln() + 0.48 * (0.48f64 / 0.5).ln();
        assert_relative_eq!(v, direct, epsilon = 1e-15);
        assert!((v - 8.003e-4).abs() < 1e-7);
    }

    #[test]
    fn support_errors() {
        let h = hist(&[3, 1], &[1.0, 0.0]);
        assert_eq!(relative_entropy(&h), Err(Error::Support(1)));
        assert_eq!(chi_square_statistic(&h), Err(Error::Support(1)));
        let ok = hist(&[3, 0], &[1.0, 0.0]);
        assert_eq!(relative_entropy(&ok).unwrap(), 0.0);
    }

    #[test]
    fn chi_square_of_exact_frequencies_is_zero() {
        assert_eq!(chi_square_statistic(&hist(&[20, 30, 50], &[0.2, 0.3, 0.5])).unwrap(), 0.0);
    }

    #[test]
    fn quantile_table_value() {
        assert!((chi_square_quantile(4.0, 0.9).unwrap() - 7.779).abs() < 5e-4);
    }

    #[test]
    fn quantiles_match_reference_implementation() {
        for dof in 1..=12 {
            let reference = ChiSquared::new(dof as f64).unwrap();
            for alpha in [0.5, 0.9, 0.99, 0.999] {
                let q = chi_square_quantile(dof as f64, alpha).unwrap();
                let r = reference.inverse_cdf(alpha);
                assert!((q - r).abs() < 1e-6, "dof {dof} alpha {alpha}: {q} vs {r}");
            }
        }
    }

    #[test]
    fn ln_gamma_values() {
        assert_relative_eq!(ln_gamma(1.0), 0.0, epsilon = 1e-14);
        assert_relative_eq!(ln_gamma(5.0), 24f64.ln(), epsilon = 1e-13);
        assert_relative_eq!(ln_gamma(0.5), std::f64::consts::PI.sqrt().ln(), epsilon = 1e-13);
    }

    #[test]
    fn wilson_contains_estimate() {
        let (lo, hi) = wilson_interval(30, 100, 1.96);
        assert!(lo < 0.3 && 0.3 < hi);
        assert!((lo - 0.2189).abs() < 1e-3 && (hi - 0.3958).abs() < 1e-3);
        assert!(within_binomial(3000, 10_000, 0.3, 3.0));
        assert!(!within_binomial(3200, 10_000, 0.3, 3.0));
    }

    #[test]
    fn ks_detects_non_uniform() {
        let mut u: Vec<f64> = (0..1000).map(|i| (i as f64 + 0.5) / 1000.0).collect();
        assert!(ks_uniform_p_value(&mut u) > 0.99);
        let mut s: Vec<f64> = u.iter().map(|x| x * x).collect();
        assert!(ks_uniform_p_value(&mut s) < 1e-6);
    }

    proptest! {
        #[test]
        fn cdf_matches_reference(dof in 1u32..30, x in 0.01f64..80.0) {
            let r = ChiSquared::new(dof as f64).unwrap().cdf(x);
            prop_assert!((chi_square_cdf(x, dof as f64) - r).abs() < 1e-10);
        }

        #[test]
        fn chi_square_is_relabeling_invariant(counts in proptest::collection::vec(0u64..50, 4), rot in 0usize..4) {
            prop_assume!(counts.iter().sum::<u64>() > 0);
            let p = vec![0.1, 0.2, 0.3, 0.4];
            let a = chi_square_statistic(&hist(&counts, &p)).unwrap();
            let mut c2 = counts.clone();
            let mut p2 = p.clone();
            c2.rotate_left(rot);
            p2.rotate_left(rot);
            let b = chi_square_statistic(&OutcomeHistogram::new(c2, p2).unwrap()).unwrap();
            prop_assert!((a - b).abs() < 1e-9 * a.max(1.0));
        }

        #[test]
        fn relative_entropy_is_non_negative(counts in proptest::collection::vec(0u64..50, 3)) {
            prop_assume!(counts.iter().sum::<u64>() > 0);
            let h = relative_entropy(&hist(&counts, &[0.2, 0.5, 0.3])).unwrap();
            prop_assert!(h >= 0.0);
        }
    }
}
