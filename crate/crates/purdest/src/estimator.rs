//! The end-to-end pure-DP product distribution estimator: parameter
//! derivation, block splitting, partitioning rounds, the rescaled learner
//! phase, and the final round.
//!
//! Heavy coordinates are filtered out over up to R noisy-threshold rounds
//! with halving scale bounds, rescaled and handed to the configured mean
//! learner; the remaining light coordinates are estimated in one shot with
//! a small truncation radius. Every block of rows is consumed by exactly
//! one noise-bearing operation, so the whole run is epsilon-DP without
//! composition.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};
use crate::learner::{learner_by_id, LearnerRequest};
use crate::mechanisms::{
    laplace_mechanism, tmean_binary, AuditTrail, Dataset, DatasetView, NoiseSpec,
};
use crate::metrics::ProductDistribution;

/// Initial per-coordinate scale bound u_1.
const U_INITIAL: f64 = 0.5;
/// Threshold-to-scale ratio: tau_r = (3/8) u_r.
const TAU_RATIO: f64 = 3.0 / 8.0;

/// Configuration of one estimation run.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorConfig {
    pub d: usize,
    pub epsilon: f64,
    pub alpha: f64,
    pub beta: f64,
    /// Multiplier on the large constants in the sample-size formulas.
    /// Values below 1 leave the guarantee regime.
    pub c_scale: f64,
    /// Free constant in the learner block size (absorbs polylog(1/alpha)
    /// factors).
    pub c_alpha: f64,
    pub learner_id: String,
    pub seed: u64,
    pub flip_preprocess: bool,
}

impl EstimatorConfig {
    pub fn new(d: usize, epsilon: f64, alpha: f64, beta: f64) -> Self {
        Self {
            d,
            epsilon,
            alpha,
            beta,
            c_scale: 1.0,
            c_alpha: 1.0,
            learner_id: crate::learner::ORACLE_LEARNER_ID.to_string(),
            seed: 0,
            flip_preprocess: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d < 2 {
            return Err(Error::InvalidParameter(format!("d must be >= 2: {}", self.d)));
        }
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "epsilon must be in (0,1]: {}",
                self.epsilon
            )));
        }
        for (name, v) in [("alpha", self.alpha), ("beta", self.beta)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be in (0,1): {v}"
                )));
            }
        }
        if self.beta > 0.5 {
            return Err(Error::InvalidParameter(format!(
                "beta must be <= 1/2: {}",
                self.beta
            )));
        }
        if !(self.c_scale > 0.0 && self.c_scale <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "c_scale must be in (0,1]: {}",
                self.c_scale
            )));
        }
        if self.c_alpha <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "c_alpha must be positive: {}",
                self.c_alpha
            )));
        }
        learner_by_id(&self.learner_id)?;
        Ok(())
    }
}

/// Block sizes computed from the configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DerivedParams {
    /// Number of partitioning rounds R.
    pub rounds: usize,
    /// Rows per partitioning round.
    pub m: usize,
    /// Learner block size.
    pub m0: usize,
    /// Final-round block size.
    pub m1: usize,
    /// Flip-vote block size (0 when flip preprocessing is disabled).
    pub m_flip: usize,
    /// m * rounds + m1 + m0 (excludes the flip block).
    pub n_total: usize,
}

impl DerivedParams {
    /// Rows the input dataset must provide, including the flip block.
    pub fn required_samples(&self) -> usize {
        self.n_total + self.m_flip
    }
}

fn ceil_to_usize(value: f64, what: &str) -> Result<usize> {
    if !value.is_finite() || value < 0.0 || value >= usize::MAX as f64 {
        return Err(Error::ParameterOverflow(format!("{what} = {value}")));
    }
    Ok(value.ceil() as usize)
}

/// Derives (R, m, m0, m1) from the configuration. Natural log throughout;
/// all sizes are rounded up.
pub fn derive_params(cfg: &EstimatorConfig) -> Result<DerivedParams> {
    cfg.validate()?;
    let d = cfg.d as f64;
    let (eps, alpha, beta) = (cfg.epsilon, cfg.alpha, cfg.beta);
    let c = cfg.c_scale;

    // Largest R with 2^R <= d/2, i.e. floor(log2(d)) - 1; d >= 2 keeps it >= 0.
    let rounds = (cfg.d.ilog2() - 1) as usize;

    let m = ceil_to_usize(
        c * (2048.0 * d * (d / beta).ln() + 2048.0 * d * (d / (eps * beta)).ln() / eps),
        "m",
    )?;
    let m1 = ceil_to_usize(
        c * (128.0 * d * (d / beta).ln() / (alpha * alpha)
            + 256.0 * d * (d / (eps * alpha * beta)).ln() / (eps * alpha)),
        "m1",
    )?;
    let m0 = ceil_to_usize(
        c * cfg.c_alpha
            * ((d + (1.0 / beta).ln()) / (alpha * alpha)
                + (d + (1.0 / beta).ln()) / (alpha * eps)
                + d * d.ln() / eps),
        "m0",
    )?;
    let m_flip = if cfg.flip_preprocess {
        ceil_to_usize(
            c * (8.0 * (d / beta).ln() / eps + 32.0 * (d / beta).ln()),
            "m_flip",
        )?
    } else {
        0
    };

    let n_total = m
        .checked_mul(rounds)
        .and_then(|v| v.checked_add(m1))
        .and_then(|v| v.checked_add(m0))
        .ok_or_else(|| Error::ParameterOverflow("n_total".into()))?;

    Ok(DerivedParams {
        rounds,
        m,
        m0,
        m1,
        m_flip,
        n_total,
    })
}

/// The disjoint row blocks of one run, in input order:
/// flip block (optional), Y^1..Y^R, Y^F, Z.
pub struct Blocks<'a> {
    pub flip: Option<DatasetView<'a>>,
    pub partition: Vec<DatasetView<'a>>,
    pub final_block: DatasetView<'a>,
    pub learner_block: DatasetView<'a>,
    pub surplus: usize,
}

/// Deterministic contiguous in-order split of the dataset into the
/// algorithm's blocks. Surplus rows beyond the requirement are ignored.
pub fn split_dataset<'a>(x: &'a Dataset, params: &DerivedParams) -> Result<Blocks<'a>> {
    let required = params.required_samples();
    if x.rows() < required {
        return Err(Error::InsufficientSamples {
            required,
            actual: x.rows(),
        });
    }
    let mut offset = 0usize;
    let mut take = |len: usize| {
        let v = x.view(offset, len);
        offset += len;
        v
    };
    let flip = if params.m_flip > 0 {
        Some(take(params.m_flip))
    } else {
        None
    };
    let partition = (0..params.rounds).map(|_| take(params.m)).collect();
    let final_block = take(params.m1);
    let learner_block = take(params.m0);
    Ok(Blocks {
        flip,
        partition,
        final_block,
        learner_block,
        surplus: x.rows() - required,
    })
}

/// Everything observed in one partitioning round.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    pub r: usize,
    pub s_r: Vec<usize>,
    pub t_r: Vec<usize>,
    pub u_r: f64,
    pub tau_r: f64,
    pub b_r: f64,
    /// Noisy estimates, aligned with `s_r`.
    pub q_r: Vec<f64>,
    pub truncation_count: usize,
}

/// Trace of the partitioning phase.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionTrace {
    pub rounds: Vec<RoundRecord>,
    /// Coordinates left for the final round.
    pub s_final: Vec<usize>,
    /// Per coordinate: the scale bound u_r of the round that filtered it
    /// (None for coordinates in the final round).
    pub scale_registry: Vec<Option<f64>>,
    /// Scale bound u in effect when the loop exited.
    pub u_exit: f64,
}

impl PartitionTrace {
    /// Coordinates filtered during partitioning, ascending.
    pub fn t_partition(&self) -> Vec<usize> {
        self.scale_registry
            .iter()
            .enumerate()
            .filter_map(|(j, u)| u.map(|_| j))
            .collect()
    }
}

/// Runs the partitioning rounds over the per-round blocks.
pub fn partition_rounds(
    blocks: &[DatasetView<'_>],
    cfg: &EstimatorConfig,
    params: &DerivedParams,
    rng: &mut ChaCha12Rng,
    trail: &mut AuditTrail,
) -> PartitionTrace {
    let d = cfg.d;
    let m = params.m as f64;
    let total_partition_rows = m * params.rounds as f64;

    let mut s: Vec<usize> = (0..d).collect();
    let mut registry: Vec<Option<f64>> = vec![None; d];
    let mut rounds = Vec::new();
    let mut u = U_INITIAL;
    let mut tau = TAU_RATIO * U_INITIAL;
    let mut r = 1usize;

    while u * s.len() as f64 >= 1.0 && r <= params.rounds {
        let block = &blocks[r - 1];
        let b_r = 3.0 * u * s.len() as f64 * (total_partition_rows / cfg.beta).ln();
        let (mean, truncation_count) = tmean_binary(block, &s, b_r);
        let spec = NoiseSpec {
            sensitivity: b_r / m,
            epsilon: cfg.epsilon,
        };
        let q_r = laplace_mechanism(&mean, &spec, &format!("round-{r}"), rng, trail);

        let mut s_next = Vec::new();
        let mut t_r = Vec::new();
        for (k, &j) in s.iter().enumerate() {
            if q_r[k] < tau {
                s_next.push(j);
            } else {
                t_r.push(j);
                registry[j] = Some(u);
            }
        }
        rounds.push(RoundRecord {
            r,
            s_r: s.clone(),
            t_r,
            u_r: u,
            tau_r: tau,
            b_r,
            q_r,
            truncation_count,
        });
        s = s_next;
        u /= 2.0;
        tau /= 2.0;
        r += 1;
    }

    PartitionTrace {
        rounds,
        s_final: s,
        scale_registry: registry,
        u_exit: u,
    }
}

/// Invokes the configured learner on the rescaled heavy coordinates and
/// maps the result back to the original scale. Returns (coordinate, q[j])
/// pairs; empty when no coordinate was filtered.
pub fn learner_phase(
    z: &DatasetView<'_>,
    trace: &PartitionTrace,
    cfg: &EstimatorConfig,
    rng: &mut ChaCha12Rng,
    trail: &mut AuditTrail,
) -> Result<Vec<(usize, f64)>> {
    let t_p = trace.t_partition();
    if t_p.is_empty() {
        return Ok(Vec::new());
    }
    // Coordinate j filtered at scale u gets multiplied by 1/sqrt(u); the
    // scale factors are applied lazily here instead of rewriting Z.
    let scales: Vec<f64> = t_p
        .iter()
        .map(|&j| 1.0 / trace.scale_registry[j].unwrap().sqrt())
        .collect();
    let mean_bounds: Vec<f64> = t_p
        .iter()
        .map(|&j| trace.scale_registry[j].unwrap().sqrt())
        .collect();
    let rows: Vec<Vec<f64>> = (0..z.rows())
        .map(|i| {
            let row = z.row(i);
            t_p.iter()
                .zip(&scales)
                .map(|(&j, &s)| row[j] as f64 * s)
                .collect()
        })
        .collect();
    let req = LearnerRequest {
        rows,
        scales,
        mean_bounds,
        epsilon: cfg.epsilon,
        alpha: cfg.alpha / 5.0,
        beta: cfg.beta,
        norm_bound: (cfg.d as f64).sqrt(),
    };
    let learner = learner_by_id(&cfg.learner_id)?;
    let result = learner.learn(&req, rng, trail)?;
    Ok(t_p
        .iter()
        .zip(&result.mu_hat)
        .map(|(&j, &mu)| (j, trace.scale_registry[j].unwrap().sqrt() * mu))
        .collect())
}

/// One-shot noisy truncated mean over the light coordinates. Returns
/// (coordinate, q[j]) pairs and the truncation count; a no-op when S_F is
/// empty (no noise drawn).
pub fn final_round(
    y_f: &DatasetView<'_>,
    s_final: &[usize],
    cfg: &EstimatorConfig,
    params: &DerivedParams,
    rng: &mut ChaCha12Rng,
    trail: &mut AuditTrail,
) -> (Vec<(usize, f64)>, usize) {
    if s_final.is_empty() {
        return (Vec::new(), 0);
    }
    let m1 = params.m1 as f64;
    let b_f = 4.0 * (m1 / cfg.beta).ln();
    let (mean, truncation_count) = tmean_binary(y_f, s_final, b_f);
    let spec = NoiseSpec {
        sensitivity: b_f / m1,
        epsilon: cfg.epsilon,
    };
    let noisy = laplace_mechanism(&mean, &spec, "final", rng, trail);
    (
        s_final.iter().copied().zip(noisy).collect(),
        truncation_count,
    )
}

/// Per-coordinate flip vote on a dedicated block: flip coordinates whose
/// noisy mean exceeds 1/2 so the main pipeline sees marginals below 1/2.
pub fn flip_mask(
    block: &DatasetView<'_>,
    cfg: &EstimatorConfig,
    rng: &mut ChaCha12Rng,
    trail: &mut AuditTrail,
) -> Vec<bool> {
    let cols: Vec<usize> = (0..block.dim()).collect();
    let means = block.column_means(&cols);
    let spec = NoiseSpec {
        sensitivity: 1.0 / block.rows() as f64,
        epsilon: cfg.epsilon,
    };
    let noisy = laplace_mechanism(&means, &spec, "flip", rng, trail);
    noisy.iter().map(|&v| v > 0.5).collect()
}

/// Sample accounting per phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PhaseUsage {
    pub partition_allocated: usize,
    pub partition_used: usize,
    pub learner_rows: usize,
    pub final_rows: usize,
    pub flip_rows: usize,
    pub surplus: usize,
}

/// Output of one estimation run.
#[derive(Debug, Clone)]
pub struct EstimateReport {
    pub q: ProductDistribution,
    pub trace: PartitionTrace,
    pub params: DerivedParams,
    pub audit: AuditTrail,
    pub usage: PhaseUsage,
    pub final_truncation_count: usize,
    pub flip_mask: Option<Vec<bool>>,
    pub warnings: Vec<String>,
    /// Measured wall time; not part of the deterministic output.
    pub wall_ms: f64,
}

impl EstimateReport {
    /// Truncated rows across all noisy mean computations.
    pub fn total_truncations(&self) -> usize {
        self.trace
            .rounds
            .iter()
            .map(|r| r.truncation_count)
            .sum::<usize>()
            + self.final_truncation_count
    }
}

/// Runs the full estimator on a binary dataset.
pub fn estimate(x: &Dataset, cfg: &EstimatorConfig) -> Result<EstimateReport> {
    let start = Instant::now();
    cfg.validate()?;
    if x.dim() != cfg.d {
        return Err(Error::DimensionMismatch {
            left: x.dim(),
            right: cfg.d,
        });
    }
    let params = derive_params(cfg)?;
    let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed);
    let mut trail = AuditTrail::new();
    let mut warnings = Vec::new();

    // Flip preprocessing votes on its own block, then the main pipeline
    // runs on a flipped copy of the remaining rows.
    let (working, mask) = {
        let blocks = split_dataset(x, &params)?;
        match blocks.flip {
            Some(flip_block) => {
                let mask = flip_mask(&flip_block, cfg, &mut rng, &mut trail);
                let flipped = x.flipped(&mask)?;
                (flipped, Some(mask))
            }
            None => (x.clone(), None),
        }
    };
    let blocks = split_dataset(&working, &params)?;

    let trace = partition_rounds(&blocks.partition, cfg, &params, &mut rng, &mut trail);

    if trace.u_exit * trace.s_final.len() as f64 >= 1.0 && !trace.s_final.is_empty() {
        warnings.push(format!(
            "final round entered with u*|S_F| = {} >= 1; proceeding (truncation radius still dominates the expected row norm)",
            trace.u_exit * trace.s_final.len() as f64
        ));
    }

    let mut q = vec![0.0f64; cfg.d];
    for (j, v) in learner_phase(&blocks.learner_block, &trace, cfg, &mut rng, &mut trail)? {
        q[j] = v;
    }
    let (finals, final_truncation_count) = final_round(
        &blocks.final_block,
        &trace.s_final,
        cfg,
        &params,
        &mut rng,
        &mut trail,
    );
    for (j, v) in finals {
        q[j] = v;
    }

    for v in &mut q {
        *v = v.clamp(0.0, 1.0);
    }
    if let Some(mask) = &mask {
        for (j, &flip) in mask.iter().enumerate() {
            if flip {
                q[j] = 1.0 - q[j];
            }
        }
    }

    let usage = PhaseUsage {
        partition_allocated: params.m * params.rounds,
        partition_used: params.m * trace.rounds.len(),
        learner_rows: params.m0,
        final_rows: params.m1,
        flip_rows: params.m_flip,
        surplus: blocks.surplus,
    };

    Ok(EstimateReport {
        q: ProductDistribution::new(q)?,
        trace,
        params,
        audit: trail,
        usage,
        final_truncation_count,
        flip_mask: mask,
        warnings,
        wall_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{sample_dataset, MarginalProfile};
    use crate::learner::{CLIPPED_LAPLACE_LEARNER_ID, ORACLE_LEARNER_ID};

    fn cfg16() -> EstimatorConfig {
        let mut cfg = EstimatorConfig::new(16, 1.0, 0.25, 0.1);
        cfg.c_scale = 1.0 / 64.0;
        cfg
    }

    #[test]
    fn derive_params_examples() {
        let cfg = EstimatorConfig::new(32, 1.0, 0.25, 0.1);
        let p = derive_params(&cfg).unwrap();
        assert_eq!(p.rounds, 4);
        // Golden: ceil(2 * 2048 * 32 * ln(320)).
        assert_eq!(p.m, 756_066);
        assert_eq!(p.n_total, p.m * 4 + p.m1 + p.m0);

        let cfg = EstimatorConfig::new(2, 0.5, 0.2, 0.1);
        let p = derive_params(&cfg).unwrap();
        assert_eq!(p.rounds, 0);

        for (d, r) in [(2usize, 0usize), (3, 0), (4, 1), (5, 1), (16, 3), (64, 5)] {
            let cfg = EstimatorConfig::new(d, 1.0, 0.25, 0.1);
            assert_eq!(derive_params(&cfg).unwrap().rounds, r, "d = {d}");
        }
    }

    #[test]
    fn invalid_configs_rejected() {
        assert!(EstimatorConfig::new(1, 1.0 - 1e-9, 0.2, 0.1).validate().is_err());
        assert!(EstimatorConfig::new(4, 0.5, 0.2, 0.6).validate().is_err());
        let mut cfg = EstimatorConfig::new(4, 0.5, 0.2, 0.1);
        cfg.learner_id = "bogus".into();
        assert!(cfg.validate().is_err());
        cfg.learner_id = ORACLE_LEARNER_ID.into();
        cfg.c_scale = 1.5;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn split_is_exact_and_ordered() {
        let cfg = cfg16();
        let params = derive_params(&cfg).unwrap();
        let p = MarginalProfile::Uniform(0.1).generate(16, 1).unwrap();
        let x = sample_dataset(&p, params.n_total + 5, 7);
        let blocks = split_dataset(&x, &params).unwrap();
        assert_eq!(blocks.partition.len(), params.rounds);
        assert_eq!(blocks.final_block.rows(), params.m1);
        assert_eq!(blocks.learner_block.rows(), params.m0);
        assert_eq!(blocks.surplus, 5);

        let short = sample_dataset(&p, params.n_total - 1, 7);
        assert!(matches!(
            split_dataset(&short, &params),
            Err(Error::InsufficientSamples { .. })
        ));
    }

    #[test]
    fn d2_skips_partitioning() {
        let mut cfg = EstimatorConfig::new(2, 0.5, 0.2, 0.1);
        cfg.c_scale = 0.1;
        let params = derive_params(&cfg).unwrap();
        assert_eq!(params.rounds, 0);
        let p = MarginalProfile::Uniform(0.2).generate(2, 1).unwrap();
        let x = sample_dataset(&p, params.n_total, 3);
        let report = estimate(&x, &cfg).unwrap();
        assert!(report.trace.rounds.is_empty());
        assert_eq!(report.trace.s_final, vec![0, 1]);
        // Only the final round bears noise.
        assert_eq!(report.audit.records().len(), 1);
        assert_eq!(report.audit.records()[0].block, "final");
    }

    #[test]
    fn trace_invariants_hold() {
        let cfg = {
            let mut c = cfg16();
            c.learner_id = CLIPPED_LAPLACE_LEARNER_ID.into();
            c.seed = 11;
            c
        };
        let params = derive_params(&cfg).unwrap();
        let p = MarginalProfile::Mixed {
            heavy_count: 2,
            p_heavy: 0.5,
            p_light: 0.01,
        }
        .generate(16, 5)
        .unwrap();
        let x = sample_dataset(&p, params.n_total, 13);
        let report = estimate(&x, &cfg).unwrap();
        let trace = &report.trace;
        for (i, round) in trace.rounds.iter().enumerate() {
            assert_eq!(round.r, i + 1);
            assert!((round.u_r - U_INITIAL / 2f64.powi(i as i32)).abs() < 1e-15);
            assert!((round.tau_r - TAU_RATIO * round.u_r).abs() < 1e-15);
            // S_{r+1} and T_r partition S_r.
            let next: Vec<usize> = if i + 1 < trace.rounds.len() {
                trace.rounds[i + 1].s_r.clone()
            } else {
                trace.s_final.clone()
            };
            let mut merged: Vec<usize> = next.iter().chain(&round.t_r).copied().collect();
            merged.sort_unstable();
            assert_eq!(merged, round.s_r);
        }
        // Every coordinate is assigned exactly once.
        let mut all: Vec<usize> = trace.t_partition();
        all.extend(&trace.s_final);
        all.sort_unstable();
        assert_eq!(all, (0..16).collect::<Vec<_>>());
    }

    #[test]
    fn output_in_unit_interval_and_deterministic() {
        let mut cfg = cfg16();
        cfg.seed = 21;
        let params = derive_params(&cfg).unwrap();
        let p = MarginalProfile::Uniform(0.3).generate(16, 2).unwrap();
        let x = sample_dataset(&p, params.n_total, 17);
        let a = estimate(&x, &cfg).unwrap();
        let b = estimate(&x, &cfg).unwrap();
        assert!(a.q.means().iter().all(|&v| (0.0..=1.0).contains(&v)));
        assert_eq!(a.q, b.q);
        assert_eq!(a.trace, b.trace);
        assert_eq!(a.audit, b.audit);
    }

    #[test]
    fn noise_scale_matches_sensitivity_over_epsilon() {
        let mut cfg = cfg16();
        cfg.learner_id = CLIPPED_LAPLACE_LEARNER_ID.into();
        let params = derive_params(&cfg).unwrap();
        let p = MarginalProfile::Mixed {
            heavy_count: 3,
            p_heavy: 0.45,
            p_light: 0.02,
        }
        .generate(16, 9)
        .unwrap();
        let x = sample_dataset(&p, params.n_total, 23);
        let report = estimate(&x, &cfg).unwrap();
        for rec in report.audit.records() {
            assert_eq!(rec.scale, rec.sensitivity / rec.epsilon, "{}", rec.block);
        }
        // Each block appears at most once.
        let mut blocks: Vec<&str> = report
            .audit
            .records()
            .iter()
            .map(|r| r.block.as_str())
            .collect();
        let before = blocks.len();
        blocks.sort_unstable();
        blocks.dedup();
        assert_eq!(blocks.len(), before);
    }

    #[test]
    fn scaling_round_trip_with_oracle_learner() {
        // With the oracle learner, q[j] on T_P must equal the plain
        // empirical Z-column mean: the sqrt(u) factors cancel exactly.
        let mut cfg = cfg16();
        cfg.learner_id = ORACLE_LEARNER_ID.into();
        let params = derive_params(&cfg).unwrap();
        let p = MarginalProfile::Mixed {
            heavy_count: 2,
            p_heavy: 0.5,
            p_light: 0.01,
        }
        .generate(16, 3)
        .unwrap();
        for seed in 0..5u64 {
            cfg.seed = seed;
            let x = sample_dataset(&p, params.n_total, 100 + seed);
            let report = estimate(&x, &cfg).unwrap();
            let blocks = split_dataset(&x, &params).unwrap();
            let t_p = report.trace.t_partition();
            if t_p.is_empty() {
                continue;
            }
            let means = blocks.learner_block.column_means(&t_p);
            for (&j, mean) in t_p.iter().zip(means) {
                assert!(
                    (report.q.means()[j] - mean).abs() < 1e-12,
                    "coordinate {j}: {} vs {mean}",
                    report.q.means()[j]
                );
            }
        }
    }

    #[test]
    fn flip_preprocess_handles_heavy_marginals() {
        let mut cfg = EstimatorConfig::new(8, 1.0, 0.3, 0.1);
        cfg.c_scale = 1.0 / 16.0;
        cfg.flip_preprocess = true;
        let params = derive_params(&cfg).unwrap();
        assert!(params.m_flip > 0);
        // One marginal far above 1/2; flip should catch it.
        let means = vec![0.9, 0.1, 0.2, 0.1, 0.3, 0.2, 0.1, 0.25];
        let p = ProductDistribution::new(means.clone()).unwrap();
        let mut flipped_runs = 0;
        let mut recovered = 0;
        for seed in 0..20u64 {
            cfg.seed = seed;
            let x = sample_dataset(&p, params.required_samples(), 300 + seed);
            let report = estimate(&x, &cfg).unwrap();
            if report.flip_mask.as_ref().unwrap()[0] {
                flipped_runs += 1;
            }
            // Estimate should land near the true (un-flipped) marginal.
            if report.q.means()[0] > 0.5 {
                recovered += 1;
            }
        }
        assert!(flipped_runs >= 17, "flip triggered in {flipped_runs}/20 runs");
        assert!(recovered >= 17, "marginal recovered in {recovered}/20 runs");
    }

    #[test]
    fn flip_is_involution_on_dataset() {
        let p = MarginalProfile::Uniform(0.4).generate(6, 1).unwrap();
        let x = sample_dataset(&p, 50, 4);
        let mask = vec![true, false, true, true, false, false];
        let twice = x.flipped(&mask).unwrap().flipped(&mask).unwrap();
        assert_eq!(x, twice);
    }
}
