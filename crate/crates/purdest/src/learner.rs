//! Pluggable mean learners for the rescaled heavy coordinates.
//!
//! The dimension-optimal pure-DP sub-Gaussian learner is treated as a black
//! box behind this interface. Two reference implementations are provided:
//! a non-private oracle (exact empirical mean, test instrument) and a
//! pure-DP clipped-Laplace learner (l1 truncation + truncated mean +
//! Laplace noise). Neither reproduces the black box's dimension-optimal
//! accuracy; the oracle isolates non-privacy error, the clipped-Laplace
//! variant preserves the epsilon-DP contract.

use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};
use crate::mechanisms::{laplace_mechanism, tmean, AuditRecord, AuditTrail, NoiseSpec};

pub const ORACLE_LEARNER_ID: &str = "oracle";
pub const CLIPPED_LAPLACE_LEARNER_ID: &str = "clipped-laplace";

/// A request to estimate the mean of rows living in scaled space, where
/// column j holds values in {0, scales[j]}.
#[derive(Debug, Clone)]
pub struct LearnerRequest {
    /// Scaled rows; every row has length `scales.len()`.
    pub rows: Vec<Vec<f64>>,
    /// Per-column scale factor s_j (the nonzero value of that column).
    pub scales: Vec<f64>,
    /// Upper bound on each scaled column mean.
    pub mean_bounds: Vec<f64>,
    pub epsilon: f64,
    /// Target l2 accuracy.
    pub alpha: f64,
    /// Failure probability.
    pub beta: f64,
    /// Bound on the l2 norm of the true mean.
    pub norm_bound: f64,
}

impl LearnerRequest {
    pub fn dim(&self) -> usize {
        self.scales.len()
    }

    fn validate(&self) -> Result<()> {
        if self.dim() == 0 {
            return Ok(());
        }
        if self.rows.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if self.rows.iter().any(|r| r.len() != self.dim())
            || self.mean_bounds.len() != self.dim()
        {
            return Err(Error::DimensionMismatch {
                left: self.rows[0].len(),
                right: self.dim(),
            });
        }
        if !(self.epsilon > 0.0 && self.alpha > 0.0 && self.beta > 0.0 && self.beta < 1.0) {
            return Err(Error::InvalidParameter(
                "learner request needs epsilon, alpha > 0 and beta in (0,1)".into(),
            ));
        }
        Ok(())
    }
}

/// Result of a learner invocation, in scaled space.
#[derive(Debug, Clone, PartialEq)]
pub struct LearnerResult {
    pub mu_hat: Vec<f64>,
    pub learner_id: &'static str,
}

/// Interface contract for the pure-DP sub-Gaussian mean learner.
pub trait MeanLearner {
    fn id(&self) -> &'static str;

    fn learn(
        &self,
        req: &LearnerRequest,
        rng: &mut ChaCha12Rng,
        trail: &mut AuditTrail,
    ) -> Result<LearnerResult>;
}

/// Reference implementation A: the exact empirical mean. NOT private; used
/// in tests and only when explicitly selected.
pub struct OracleLearner;

impl MeanLearner for OracleLearner {
    fn id(&self) -> &'static str {
        ORACLE_LEARNER_ID
    }

    fn learn(
        &self,
        req: &LearnerRequest,
        _rng: &mut ChaCha12Rng,
        trail: &mut AuditTrail,
    ) -> Result<LearnerResult> {
        req.validate()?;
        if req.dim() == 0 {
            return Ok(LearnerResult {
                mu_hat: Vec::new(),
                learner_id: self.id(),
            });
        }
        let m = req.rows.len() as f64;
        let mut mu = vec![0.0f64; req.dim()];
        for row in &req.rows {
            for (a, v) in mu.iter_mut().zip(row) {
                *a += v;
            }
        }
        mu.iter_mut().for_each(|a| *a /= m);
        trail.push(AuditRecord {
            block: "learner:oracle(non-private)".to_string(),
            sensitivity: 0.0,
            epsilon: req.epsilon,
            scale: 0.0,
        });
        Ok(LearnerResult {
            mu_hat: mu,
            learner_id: self.id(),
        })
    }
}

/// Truncation radius used by the clipped-Laplace learner.
///
/// Applies the row-norm bound in scaled space: with expected row norm at
/// most E = sum of scaled column-mean bounds, a row exceeds
/// E(1 + 2 ln(m/beta)) with probability at most beta/m (4 s_max ln(m/beta)
/// when E is below a single entry's magnitude). Since no scaled row can
/// exceed sum_j s_j, the radius is capped there; at the cap truncation is
/// impossible and the mean stays unbiased.
pub fn clipped_laplace_radius(req: &LearnerRequest) -> f64 {
    let m = req.rows.len() as f64;
    let log_term = (m / req.beta).ln();
    let expected: f64 = req.mean_bounds.iter().sum();
    let s_max = req.scales.iter().cloned().fold(0.0f64, f64::max);
    let tail_radius = if expected >= s_max {
        expected * (1.0 + 2.0 * log_term)
    } else {
        4.0 * s_max * log_term
    };
    let max_norm: f64 = req.scales.iter().sum();
    tail_radius.min(max_norm)
}

/// Reference implementation B: l1 truncation + truncated mean + Laplace
/// noise scaled to B_L/(epsilon m). Pure epsilon-DP by the Laplace
/// mechanism.
pub struct ClippedLaplaceLearner;

impl MeanLearner for ClippedLaplaceLearner {
    fn id(&self) -> &'static str {
        CLIPPED_LAPLACE_LEARNER_ID
    }

    fn learn(
        &self,
        req: &LearnerRequest,
        rng: &mut ChaCha12Rng,
        trail: &mut AuditTrail,
    ) -> Result<LearnerResult> {
        req.validate()?;
        if req.dim() == 0 {
            return Ok(LearnerResult {
                mu_hat: Vec::new(),
                learner_id: self.id(),
            });
        }
        let m = req.rows.len();
        let radius = clipped_laplace_radius(req);
        let (mean, _truncated) = tmean(&req.rows, radius)?;
        let spec = NoiseSpec::new(radius / m as f64, req.epsilon)?;
        let mu_hat = laplace_mechanism(&mean, &spec, "learner:clipped-laplace", rng, trail);
        Ok(LearnerResult {
            mu_hat,
            learner_id: self.id(),
        })
    }
}

/// Learner registry keyed by the config string.
pub fn learner_by_id(id: &str) -> Result<Box<dyn MeanLearner>> {
    match id {
        ORACLE_LEARNER_ID => Ok(Box::new(OracleLearner)),
        CLIPPED_LAPLACE_LEARNER_ID => Ok(Box::new(ClippedLaplaceLearner)),
        other => Err(Error::UnknownLearner(other.to_string())),
    }
}
