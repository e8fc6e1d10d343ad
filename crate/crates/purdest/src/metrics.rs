//! Divergences between Bernoulli and binary product distributions.
//!
//! Everything here is exact arithmetic on marginal mean vectors: the
//! total-variation, chi-squared, and KL divergences for Bernoulli pairs,
//! their (sub-)additive extensions to product distributions, and a
//! brute-force enumeration of the true product TV for small dimensions.
//! Divergences that are infinite due to support mismatch return
//! `f64::INFINITY` rather than erroring, so callers can aggregate.

use crate::error::{Error, Result};

/// Largest dimension for which full-support enumeration is allowed (2^24 outcomes).
pub const ENUMERATION_CAP: usize = 24;

/// A pair of Bernoulli means.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BernoulliPair {
    pub p: f64,
    pub q: f64,
}

impl BernoulliPair {
    pub fn new(p: f64, q: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) || !(0.0..=1.0).contains(&q) {
            return Err(Error::InvalidParameter(format!(
                "Bernoulli means must lie in [0,1], got p={p}, q={q}"
            )));
        }
        Ok(Self { p, q })
    }
}

/// A binary product distribution, described by its vector of marginal means.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductDistribution {
    means: Vec<f64>,
}

impl ProductDistribution {
    pub fn new(means: Vec<f64>) -> Result<Self> {
        if means.is_empty() {
            return Err(Error::InvalidParameter(
                "product distribution needs at least one coordinate".into(),
            ));
        }
        for (j, &p) in means.iter().enumerate() {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidParameter(format!(
                    "marginal {j} out of [0,1]: {p}"
                )));
            }
        }
        Ok(Self { means })
    }

    pub fn dim(&self) -> usize {
        self.means.len()
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    /// Probability mass of one outcome, encoded as a bitmask over coordinates.
    pub fn mass(&self, mask: u64) -> f64 {
        self.means
            .iter()
            .enumerate()
            .map(|(j, &p)| if mask >> j & 1 == 1 { p } else { 1.0 - p })
            .product()
    }
}

fn check_dims(a: &ProductDistribution, b: &ProductDistribution) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            left: a.dim(),
            right: b.dim(),
        });
    }
    Ok(())
}

/// Total-variation distance between two Bernoulli distributions: |p - q|.
pub fn tv_bernoulli(pair: BernoulliPair) -> f64 {
    (pair.p - pair.q).abs()
}

/// Chi-squared divergence between Bernoulli(p) and Bernoulli(q).
///
/// Infinite when q is degenerate and p differs from it; zero whenever p = q.
pub fn chi2_bernoulli(pair: BernoulliPair) -> f64 {
    let BernoulliPair { p, q } = pair;
    if p == q {
        return 0.0;
    }
    if q <= 0.0 || q >= 1.0 {
        return f64::INFINITY;
    }
    let d = p - q;
    d * d / q + d * d / (1.0 - q)
}

/// KL divergence between Bernoulli(p) and Bernoulli(q), with 0 ln 0 = 0.
pub fn kl_bernoulli(pair: BernoulliPair) -> f64 {
    let BernoulliPair { p, q } = pair;
    if p == q {
        return 0.0;
    }
    let mut kl = 0.0;
    if p > 0.0 {
        if q <= 0.0 {
            return f64::INFINITY;
        }
        kl += p * (p / q).ln();
    }
    if p < 1.0 {
        if q >= 1.0 {
            return f64::INFINITY;
        }
        kl += (1.0 - p) * ((1.0 - p) / (1.0 - q)).ln();
    }
    // Rounding can leave a tiny negative residue near p = q.
    kl.max(0.0)
}

/// Sub-additive upper bound on the product TV distance: sum of marginal TVs.
pub fn tv_product_upper(a: &ProductDistribution, b: &ProductDistribution) -> Result<f64> {
    check_dims(a, b)?;
    Ok(a.means()
        .iter()
        .zip(b.means())
        .map(|(&p, &q)| (p - q).abs())
        .sum())
}

/// Exact product TV distance by enumeration of all 2^d outcomes.
pub fn tv_product_exact(a: &ProductDistribution, b: &ProductDistribution) -> Result<f64> {
    check_dims(a, b)?;
    let d = a.dim();
    if d > ENUMERATION_CAP {
        return Err(Error::EnumerationCapExceeded {
            dim: d,
            cap: ENUMERATION_CAP,
        });
    }
    let mut total = 0.0;
    for mask in 0..1u64 << d {
        total += (a.mass(mask) - b.mass(mask)).abs();
    }
    Ok(total / 2.0)
}

/// KL divergence between two binary product distributions (exact, by additivity).
pub fn kl_product(a: &ProductDistribution, b: &ProductDistribution) -> Result<f64> {
    check_dims(a, b)?;
    Ok(a.means()
        .iter()
        .zip(b.means())
        .map(|(&p, &q)| kl_bernoulli(BernoulliPair { p, q }))
        .sum())
}

/// Exact product chi-squared divergence via 1 + chi2 = prod_j (1 + chi2_j).
pub fn chi2_product_exact(a: &ProductDistribution, b: &ProductDistribution) -> Result<f64> {
    check_dims(a, b)?;
    let mut acc = 1.0f64;
    for (&p, &q) in a.means().iter().zip(b.means()) {
        acc *= 1.0 + chi2_bernoulli(BernoulliPair { p, q });
        if acc.is_infinite() {
            return Ok(f64::INFINITY);
        }
    }
    Ok(acc - 1.0)
}

/// Upper bound on TV implied by a KL value: sqrt(kl / 2).
pub fn pinsker_tv_bound(klvalue: f64) -> f64 {
    (klvalue / 2.0).sqrt()
}
