//! Experiment harness: marginal profiles, synthetic data generation,
//! multi-trial experiment runs, and report emission (JSON / CSV).
//!
//! All randomness is derived from a single master seed via splitmix64, so
//! a report is a pure function of its configuration.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimator::{derive_params, estimate, DerivedParams, EstimatorConfig};
use crate::mechanisms::{tmean_binary, AuditRecord, Dataset};
use crate::metrics::{tv_product_exact, tv_product_upper, ProductDistribution, ENUMERATION_CAP};

/// Family of true marginal vectors, parsed from strings like
/// `uniform:0.25`, `powerlaw:1.5,0.5`, `mixed:2,0.5,0.01`, or
/// `explicit:0.1,0.2,0.3`.
#[derive(Debug, Clone, PartialEq)]
pub enum MarginalProfile {
    /// Every coordinate has the same marginal.
    Uniform(f64),
    /// p_j = p_max * j^{-exponent}, descending in j = 1..=d.
    PowerLaw { exponent: f64, p_max: f64 },
    /// `heavy_count` coordinates at `p_heavy` in seed-shuffled positions,
    /// the rest at `p_light`.
    Mixed {
        heavy_count: usize,
        p_heavy: f64,
        p_light: f64,
    },
    /// Marginals given verbatim; the dimension must match.
    Explicit(Vec<f64>),
}

impl MarginalProfile {
    /// Instantiates the profile at dimension `d`. The seed only matters
    /// for `mixed`, which shuffles the heavy positions.
    pub fn generate(&self, d: usize, seed: u64) -> Result<ProductDistribution> {
        let check = |p: f64| -> Result<f64> {
            if p > 0.0 && p < 1.0 {
                Ok(p)
            } else {
                Err(Error::InvalidParameter(format!(
                    "profile marginal must be in (0,1): {p}"
                )))
            }
        };
        let means = match self {
            Self::Uniform(p) => vec![check(*p)?; d],
            Self::PowerLaw { exponent, p_max } => {
                check(*p_max)?;
                if *exponent < 0.0 {
                    return Err(Error::InvalidParameter(format!(
                        "power-law exponent must be non-negative: {exponent}"
                    )));
                }
                (1..=d)
                    .map(|j| check(p_max * (j as f64).powf(-exponent)))
                    .collect::<Result<Vec<_>>>()?
            }
            Self::Mixed {
                heavy_count,
                p_heavy,
                p_light,
            } => {
                if *heavy_count > d {
                    return Err(Error::InvalidParameter(format!(
                        "mixed profile has {heavy_count} heavy coordinates but d = {d}"
                    )));
                }
                check(*p_heavy)?;
                check(*p_light)?;
                let mut positions: Vec<usize> = (0..d).collect();
                let mut rng = ChaCha12Rng::seed_from_u64(seed);
                positions.shuffle(&mut rng);
                let mut means = vec![*p_light; d];
                for &j in &positions[..*heavy_count] {
                    means[j] = *p_heavy;
                }
                means
            }
            Self::Explicit(values) => {
                if values.len() != d {
                    return Err(Error::DimensionMismatch {
                        left: values.len(),
                        right: d,
                    });
                }
                values
                    .iter()
                    .map(|&p| check(p))
                    .collect::<Result<Vec<_>>>()?
            }
        };
        ProductDistribution::new(means)
    }
}

impl fmt::Display for MarginalProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Uniform(p) => write!(f, "uniform:{p}"),
            Self::PowerLaw { exponent, p_max } => write!(f, "powerlaw:{exponent},{p_max}"),
            Self::Mixed {
                heavy_count,
                p_heavy,
                p_light,
            } => write!(f, "mixed:{heavy_count},{p_heavy},{p_light}"),
            Self::Explicit(values) => {
                write!(f, "explicit:")?;
                for (i, v) in values.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{v}")?;
                }
                Ok(())
            }
        }
    }
}

impl FromStr for MarginalProfile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |msg: &str| Error::InvalidParameter(format!("profile '{s}': {msg}"));
        let (kind, args) = s
            .split_once(':')
            .ok_or_else(|| bad("expected '<kind>:<args>'"))?;
        let nums: Vec<&str> = args.split(',').collect();
        let parse_f64 = |t: &str| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| bad(&format!("bad number '{t}'")))
        };
        match kind {
            "uniform" => {
                if nums.len() != 1 {
                    return Err(bad("uniform takes one argument"));
                }
                Ok(Self::Uniform(parse_f64(nums[0])?))
            }
            "powerlaw" => {
                if nums.len() != 2 {
                    return Err(bad("powerlaw takes exponent,p_max"));
                }
                Ok(Self::PowerLaw {
                    exponent: parse_f64(nums[0])?,
                    p_max: parse_f64(nums[1])?,
                })
            }
            "mixed" => {
                if nums.len() != 3 {
                    return Err(bad("mixed takes heavy_count,p_heavy,p_light"));
                }
                let heavy_count = nums[0]
                    .trim()
                    .parse::<usize>()
                    .map_err(|_| bad(&format!("bad count '{}'", nums[0])))?;
                Ok(Self::Mixed {
                    heavy_count,
                    p_heavy: parse_f64(nums[1])?,
                    p_light: parse_f64(nums[2])?,
                })
            }
            "explicit" => Ok(Self::Explicit(
                nums.iter()
                    .map(|t| parse_f64(t))
                    .collect::<Result<Vec<_>>>()?,
            )),
            other => Err(bad(&format!("unknown kind '{other}'"))),
        }
    }
}

/// splitmix64 step; used to derive independent per-trial seeds from one
/// master seed.
pub fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for sub-stream `index` of master seed `master`.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    splitmix64(master ^ splitmix64(index))
}

/// Draws `rows` i.i.d. samples from a product distribution.
pub fn sample_dataset(p: &ProductDistribution, rows: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let d = p.dim();
    let mut data = Vec::with_capacity(rows * d);
    for _ in 0..rows {
        for &pj in p.means() {
            data.push(u8::from(rng.random::<f64>() < pj));
        }
    }
    Dataset::new(data, rows, d).expect("generated data is binary")
}

/// Configuration of a multi-trial experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub estimator: EstimatorConfig,
    pub profile: MarginalProfile,
    pub trials: usize,
    /// When false, emitted wall_ms fields are zeroed so reports are
    /// byte-identical across machines.
    pub timing: bool,
}

/// Outcome of one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    /// Exact total variation distance; None above the enumeration cap.
    pub tv_exact: Option<f64>,
    pub tv_upper: f64,
    pub success: bool,
    pub rounds: usize,
    pub truncations: usize,
    pub wall_ms: f64,
}

/// Aggregate statistics over an experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub trials: usize,
    pub successes: usize,
    pub success_rate: f64,
    pub tv_upper_mean: f64,
    pub tv_exact_mean: Option<f64>,
    pub wall_ms_total: f64,
}

/// Full experiment report.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub params: DerivedParams,
    pub trials: Vec<TrialRecord>,
    pub aggregate: Aggregate,
    /// Noise accounting from the first trial (identical in structure
    /// across trials).
    pub audit_trail: Vec<AuditRecord>,
    pub warnings: Vec<String>,
}

fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var("PURDEST_THREADS") {
        let n: usize = v.parse().map_err(|_| {
            Error::InvalidParameter(format!("PURDEST_THREADS must be a positive integer: '{v}'"))
        })?;
        if n == 0 {
            return Err(Error::InvalidParameter(
                "PURDEST_THREADS must be a positive integer: '0'".into(),
            ));
        }
        builder = builder.num_threads(n);
    }
    builder
        .build()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))
}

/// Runs `trials` independent estimation runs. Trial t draws a fresh
/// dataset and estimator stream from seeds derived from the master seed,
/// so the report does not depend on thread scheduling.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    if cfg.trials == 0 {
        return Err(Error::InvalidParameter("trials must be >= 1".into()));
    }
    cfg.estimator.validate()?;
    let params = derive_params(&cfg.estimator)?;
    let master = cfg.estimator.seed;
    let p = cfg.profile.generate(cfg.estimator.d, master)?;

    let pool = thread_pool()?;
    let results: Vec<Result<(TrialRecord, _)>> = pool.install(|| {
        (0..cfg.trials)
            .into_par_iter()
            .map(|t| {
                let trial_seed = derive_seed(master, t as u64);
                let data_seed = derive_seed(trial_seed, 0);
                let mut est_cfg = cfg.estimator.clone();
                est_cfg.seed = derive_seed(trial_seed, 1);
                let x = sample_dataset(&p, params.required_samples(), data_seed);
                let report = estimate(&x, &est_cfg)?;
                let tv_upper = tv_product_upper(&p, &report.q)?;
                let tv_exact = if cfg.estimator.d <= ENUMERATION_CAP {
                    Some(tv_product_exact(&p, &report.q)?)
                } else {
                    None
                };
                let success = tv_exact.unwrap_or(tv_upper) <= cfg.estimator.alpha;
                let record = TrialRecord {
                    trial: t,
                    seed: trial_seed,
                    tv_exact,
                    tv_upper,
                    success,
                    rounds: report.trace.rounds.len(),
                    truncations: report.total_truncations(),
                    wall_ms: report.wall_ms,
                };
                Ok((record, report))
            })
            .collect()
    });

    let mut trials = Vec::with_capacity(cfg.trials);
    let mut audit_trail = Vec::new();
    let mut warnings = Vec::new();
    for (t, res) in results.into_iter().enumerate() {
        let (record, report) = res?;
        if t == 0 {
            audit_trail = report.audit.records().to_vec();
            warnings = report.warnings.clone();
        }
        trials.push(record);
    }

    let successes = trials.iter().filter(|r| r.success).count();
    let tv_upper_mean =
        trials.iter().map(|r| r.tv_upper).sum::<f64>() / cfg.trials as f64;
    let tv_exact_mean = if trials.iter().all(|r| r.tv_exact.is_some()) {
        Some(trials.iter().map(|r| r.tv_exact.unwrap()).sum::<f64>() / cfg.trials as f64)
    } else {
        None
    };
    let wall_ms_total = trials.iter().map(|r| r.wall_ms).sum();
    let aggregate = Aggregate {
        trials: cfg.trials,
        successes,
        success_rate: successes as f64 / cfg.trials as f64,
        tv_upper_mean,
        tv_exact_mean,
        wall_ms_total,
    };

    Ok(ExperimentReport {
        config: cfg.clone(),
        params,
        trials,
        aggregate,
        audit_trail,
        warnings,
    })
}

// --- report emission ---------------------------------------------------
//
// JSON is written by hand so the byte layout is fully pinned: keys in a
// fixed order, floats always in scientific notation with 16 fractional
// digits (17 significant digits round-trips every f64).

fn json_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "\"nan\"".into()
    } else if v > 0.0 {
        "\"inf\"".into()
    } else {
        "\"-inf\"".into()
    }
}

fn json_string(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            '\r' => out.push_str("\\r"),
            c if (c as u32) < 0x20 => out.push_str(&format!("\\u{:04x}", c as u32)),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

/// Report output format.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(Self::Json),
            "csv" => Ok(Self::Csv),
            other => Err(Error::InvalidParameter(format!(
                "unknown format '{other}' (expected json or csv)"
            ))),
        }
    }
}

impl ExperimentReport {
    fn emitted_wall(&self, v: f64) -> f64 {
        if self.config.timing {
            v
        } else {
            0.0
        }
    }

    /// Canonical JSON rendering: deterministic byte-for-byte for a fixed
    /// configuration (wall times are zeroed unless timing is enabled).
    pub fn to_json(&self) -> String {
        let cfg = &self.config;
        let est = &cfg.estimator;
        let mut out = String::new();
        out.push_str("{\n  \"config\": {");
        out.push_str(&format!(
            "\"d\": {}, \"epsilon\": {}, \"alpha\": {}, \"beta\": {}, \"c_scale\": {}, \"c_alpha\": {}, \"learner\": {}, \"seed\": {}, \"flip\": {}, \"profile\": {}, \"trials\": {}, \"timing\": {}",
            est.d,
            json_f64(est.epsilon),
            json_f64(est.alpha),
            json_f64(est.beta),
            json_f64(est.c_scale),
            json_f64(est.c_alpha),
            json_string(&est.learner_id),
            est.seed,
            est.flip_preprocess,
            json_string(&cfg.profile.to_string()),
            cfg.trials,
            cfg.timing,
        ));
        out.push_str("},\n  \"params\": {");
        out.push_str(&format!(
            "\"rounds\": {}, \"m\": {}, \"m0\": {}, \"m1\": {}, \"m_flip\": {}, \"n_total\": {}",
            self.params.rounds,
            self.params.m,
            self.params.m0,
            self.params.m1,
            self.params.m_flip,
            self.params.n_total,
        ));
        out.push_str("},\n  \"trials\": [\n");
        for (i, t) in self.trials.iter().enumerate() {
            out.push_str(&format!(
                "    {{\"trial\": {}, \"seed\": {}, \"tv_exact\": {}, \"tv_upper\": {}, \"success\": {}, \"rounds\": {}, \"truncations\": {}, \"wall_ms\": {}}}{}\n",
                t.trial,
                t.seed,
                t.tv_exact.map_or_else(|| "null".into(), json_f64),
                json_f64(t.tv_upper),
                t.success,
                t.rounds,
                t.truncations,
                json_f64(self.emitted_wall(t.wall_ms)),
                if i + 1 < self.trials.len() { "," } else { "" },
            ));
        }
        out.push_str("  ],\n  \"aggregate\": {");
        out.push_str(&format!(
            "\"trials\": {}, \"successes\": {}, \"success_rate\": {}, \"tv_upper_mean\": {}, \"tv_exact_mean\": {}, \"wall_ms_total\": {}",
            self.aggregate.trials,
            self.aggregate.successes,
            json_f64(self.aggregate.success_rate),
            json_f64(self.aggregate.tv_upper_mean),
            self.aggregate
                .tv_exact_mean
                .map_or_else(|| "null".into(), json_f64),
            json_f64(self.emitted_wall(self.aggregate.wall_ms_total)),
        ));
        out.push_str("},\n  \"audit_trail\": [\n");
        for (i, rec) in self.audit_trail.iter().enumerate() {
            out.push_str(&format!(
                "    {{\"block\": {}, \"sensitivity\": {}, \"epsilon\": {}, \"scale\": {}}}{}\n",
                json_string(&rec.block),
                json_f64(rec.sensitivity),
                json_f64(rec.epsilon),
                json_f64(rec.scale),
                if i + 1 < self.audit_trail.len() { "," } else { "" },
            ));
        }
        out.push_str("  ],\n  \"warnings\": [");
        for (i, w) in self.warnings.iter().enumerate() {
            if i > 0 {
                out.push_str(", ");
            }
            out.push_str(&json_string(w));
        }
        out.push_str("]\n}\n");
        out
    }

    /// Per-trial CSV with a fixed header.
    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("trial,seed,tv_exact,tv_upper,success,rounds,truncations,wall_ms\n");
        for t in &self.trials {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                t.trial,
                t.seed,
                t.tv_exact
                    .map_or_else(String::new, |v| format!("{v:.16e}")),
                format_args!("{:.16e}", t.tv_upper),
                t.success,
                t.rounds,
                t.truncations,
                format_args!("{:.16e}", self.emitted_wall(t.wall_ms)),
            ));
        }
        out
    }

    /// Writes the report to `path` in the requested format.
    pub fn emit(&self, path: &Path, format: ReportFormat) -> Result<()> {
        let body = match format {
            ReportFormat::Json => self.to_json(),
            ReportFormat::Csv => self.to_csv(),
        };
        fs::write(path, body).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })
    }
}

/// Result of an empirical sensitivity audit of the truncated mean.
#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityAudit {
    pub pairs: usize,
    pub bound: f64,
    pub max_observed: f64,
}

/// Empirically checks the l1 sensitivity claim radius/m of the truncated
/// mean on random neighboring binary datasets. Each pair differs in one
/// row whose contribution is present on one side and absent (zero row) on
/// the other — the coupling under which the radius/m bound is tight; a
/// general two-row substitution can move the truncated mean by up to twice
/// that.
pub fn audit_sensitivity(
    m: usize,
    dim: usize,
    radius: f64,
    pairs: usize,
    seed: u64,
) -> Result<SensitivityAudit> {
    if m == 0 || dim == 0 || pairs == 0 {
        return Err(Error::InvalidParameter(
            "audit requires m, dim, pairs >= 1".into(),
        ));
    }
    if radius <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "radius must be positive: {radius}"
        )));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let cols: Vec<usize> = (0..dim).collect();
    let mut max_observed = 0.0f64;
    for _ in 0..pairs {
        let mut data = Vec::with_capacity(m * dim);
        for _ in 0..m * dim {
            data.push(u8::from(rng.random::<bool>()));
        }
        let a = Dataset::new(data.clone(), m, dim).unwrap();
        let row = rng.random_range(0..m);
        data[row * dim..(row + 1) * dim].fill(0);
        let b = Dataset::new(data, m, dim).unwrap();
        let (ma, _) = tmean_binary(&a.full_view(), &cols, radius);
        let (mb, _) = tmean_binary(&b.full_view(), &cols, radius);
        let diff: f64 = ma.iter().zip(&mb).map(|(x, y)| (x - y).abs()).sum();
        max_observed = max_observed.max(diff);
    }
    Ok(SensitivityAudit {
        pairs,
        bound: radius / m as f64,
        max_observed,
    })
}
