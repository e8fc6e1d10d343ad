//! Closed-form tail-bound evaluators for Bernoulli sums and Laplace noise.
//!
//! These mirror the concentration inequalities the estimator's analysis rests on
//! and serve as oracles in the Monte-Carlo property tests. Natural log
//! throughout.

use crate::error::{Error, Result};
use crate::metrics::{kl_bernoulli, BernoulliPair};

/// Query for a Bernoulli-sum tail bound.
#[derive(Debug, Clone, Copy)]
pub struct TailQuery {
    /// Bernoulli mean, in (0, 1].
    pub p: f64,
    /// Number of i.i.d. samples.
    pub m: u64,
    /// Deviation: additive for Bernstein, multiplicative for Chernoff.
    pub deviation: f64,
}

impl TailQuery {
    pub fn new(p: f64, m: u64, deviation: f64) -> Result<Self> {
        if !(p > 0.0 && p <= 1.0) {
            return Err(Error::InvalidParameter(format!("p must be in (0,1]: {p}")));
        }
        if m == 0 {
            return Err(Error::InvalidParameter("m must be >= 1".into()));
        }
        if deviation < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "deviation must be nonnegative: {deviation}"
            )));
        }
        Ok(Self { p, m, deviation })
    }
}

/// Bernstein upper tail: Pr[mean >= p + eps] <= exp(-KL(p+eps || p) * m).
pub fn bernstein_upper_tail(q: &TailQuery) -> Result<f64> {
    if q.p + q.deviation > 1.0 {
        return Err(Error::InvalidParameter(format!(
            "p + deviation exceeds 1: {} + {}",
            q.p, q.deviation
        )));
    }
    let kl = kl_bernoulli(BernoulliPair {
        p: q.p + q.deviation,
        q: q.p,
    });
    Ok((-kl * q.m as f64).exp())
}

/// Bernstein lower tail: Pr[mean <= p - eps] <= exp(-KL(p-eps || p) * m).
///
/// When eps > p the event is impossible, so the bound is 0.
pub fn bernstein_lower_tail(q: &TailQuery) -> f64 {
    if q.deviation > q.p {
        return 0.0;
    }
    let kl = kl_bernoulli(BernoulliPair {
        p: q.p - q.deviation,
        q: q.p,
    });
    (-kl * q.m as f64).exp()
}

/// Multiplicative Chernoff: Pr[sum >= (1+delta) p m] <= exp(-delta^2 p m / (2+delta)).
pub fn chernoff_mult_tail(q: &TailQuery) -> f64 {
    let delta = q.deviation;
    (-delta * delta * q.p * q.m as f64 / (2.0 + delta)).exp()
}

/// Row-norm threshold for m rows from a binary product distribution over t
/// coordinates with marginals bounded by p: each row's l1 norm exceeds the
/// returned threshold with probability at most beta/m.
pub fn row_norm_threshold(p: f64, t: u64, m: u64, beta: f64) -> Result<f64> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::InvalidParameter(format!("p must be in (0,1]: {p}")));
    }
    if t == 0 || m == 0 {
        return Err(Error::InvalidParameter("t and m must be >= 1".into()));
    }
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "beta must be in (0,1): {beta}"
        )));
    }
    let log_term = (m as f64 / beta).ln();
    if log_term <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "m/beta must exceed 1 (got {})",
            m as f64 / beta
        )));
    }
    let pt = p * t as f64;
    // Boundary pt = 1 belongs to the first branch.
    if pt >= 1.0 {
        Ok(pt * (1.0 + 2.0 * log_term))
    } else {
        Ok(4.0 * log_term)
    }
}

/// Laplace concentration: Pr[|Z| > scale * ln(1/beta)] <= beta.
pub fn laplace_tail_threshold(scale: f64, beta: f64) -> Result<f64> {
    if scale <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "scale must be positive: {scale}"
        )));
    }
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "beta must be in (0,1): {beta}"
        )));
    }
    Ok(scale * (1.0 / beta).ln())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bernstein_examples() {
        let q = TailQuery::new(0.5, 100, 0.0).unwrap();
        assert_eq!(bernstein_upper_tail(&q).unwrap(), 1.0);

        let q = TailQuery::new(0.5, 1, 0.5).unwrap();
        assert!((bernstein_upper_tail(&q).unwrap() - 0.5).abs() < 1e-15);

        // Derived: evaluate the KL term independently.
        let q = TailQuery::new(0.1, 1000, 0.05).unwrap();
        let kl = 0.15f64 * (0.15f64 / 0.1).ln() + 0.85 * (0.85f64 / 0.9).ln();
        assert!((bernstein_upper_tail(&q).unwrap() - (-kl * 1000.0).exp()).abs() < 1e-12);

        let q = TailQuery::new(0.9, 10, 0.2).unwrap();
        assert!(bernstein_upper_tail(&q).is_err());
    }

    #[test]
    fn bernstein_lower_examples() {
        // eps > p: impossible event.
        let q = TailQuery::new(0.1, 50, 0.2).unwrap();
        assert_eq!(bernstein_lower_tail(&q), 0.0);
        // eps = p: bound equals (1-p)^m, the probability of all-zeros.
        let q = TailQuery::new(0.3, 20, 0.3).unwrap();
        assert!((bernstein_lower_tail(&q) - 0.7f64.powi(20)).abs() < 1e-15);
    }

    #[test]
    fn chernoff_examples() {
        let q = TailQuery::new(0.3, 10, 0.0).unwrap();
        assert_eq!(chernoff_mult_tail(&q), 1.0);
        let q = TailQuery::new(0.5, 2, 2.0).unwrap();
        assert!((chernoff_mult_tail(&q) - (-1.0f64).exp()).abs() < 1e-15);
        let q = TailQuery::new(0.1, 300, 1.0).unwrap();
        assert!((chernoff_mult_tail(&q) - (-10.0f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn row_norm_examples() {
        // ln(m/beta) = 1 with pt = 1 lands on the first branch: 1 * (1 + 2).
        let thr = row_norm_threshold(1.0, 1, 2, 2.0 / std::f64::consts::E).unwrap();
        assert!((thr - 3.0).abs() < 1e-12);

        // pt < 1 branch with ln(m/beta) = 2.
        let beta2 = 2.0 / std::f64::consts::E.powi(2);
        let thr = row_norm_threshold(0.001, 10, 2, beta2).unwrap();
        assert!((thr - 8.0).abs() < 1e-12);

        // pt >= 1 branch at p = 0.25, t = 8, m = 1000, beta = 0.1.
        let thr = row_norm_threshold(0.25, 8, 1000, 0.1).unwrap();
        let expected = 2.0 * (1.0 + 2.0 * (10_000.0f64).ln());
        assert!((thr - expected).abs() < 1e-12);

        // Invalid inputs are rejected.
        assert!(row_norm_threshold(0.5, 4, 0, 0.5).is_err());
        assert!(row_norm_threshold(0.5, 4, 10, 1.5).is_err());
        assert!(row_norm_threshold(0.0, 4, 10, 0.5).is_err());
    }

    #[test]
    fn laplace_threshold_examples() {
        let t = laplace_tail_threshold(1.0, 1.0 / std::f64::consts::E).unwrap();
        assert!((t - 1.0).abs() < 1e-12);
        let t = laplace_tail_threshold(2.0, 0.01).unwrap();
        assert!((t - 2.0 * 100.0f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn monotone_in_m_and_deviation() {
        for &p in &[0.1, 0.3, 0.5] {
            let mut prev = 1.0;
            for m in [10u64, 100, 1000] {
                let q = TailQuery::new(p, m, 0.05).unwrap();
                let b = bernstein_upper_tail(&q).unwrap();
                assert!(b <= prev + 1e-15);
                prev = b;
            }
            let mut prev = 1.0;
            for dev in [0.0, 0.1, 0.2, 0.4] {
                let q = TailQuery::new(p, 100, dev).unwrap();
                let b = chernoff_mult_tail(&q);
                assert!(b <= prev + 1e-15);
                prev = b;
            }
        }
    }
}
