//! Command-line front end: single estimates, multi-trial experiments,
//! empirical sensitivity audits, and divergence computations.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use purdest::error::Error;
use purdest::estimator::EstimatorConfig;
use purdest::harness::{
    audit_sensitivity, run_experiment, ExperimentConfig, MarginalProfile, ReportFormat,
};
use purdest::metrics::{
    kl_product, tv_product_exact, tv_product_upper, ProductDistribution, ENUMERATION_CAP,
};

#[derive(Parser)]
#[command(name = "purdest", about = "Pure-DP product distribution estimation", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct EstimatorArgs {
    /// Dimension of the product distribution.
    #[arg(long)]
    d: usize,
    /// Privacy budget.
    #[arg(long)]
    eps: f64,
    /// Target total variation accuracy.
    #[arg(long)]
    alpha: f64,
    /// Failure probability.
    #[arg(long)]
    beta: f64,
    /// Multiplier on the sample-size constants.
    #[arg(long, default_value_t = 1.0)]
    c_scale: f64,
    /// Constant in the learner block size.
    #[arg(long, default_value_t = 1.0)]
    c_alpha: f64,
    /// Mean learner: "oracle" or "clipped-laplace".
    #[arg(long, default_value = "oracle")]
    learner: String,
    /// Enable the coordinate-flip preprocessing block.
    #[arg(long)]
    flip: bool,
    /// Master seed for data generation and noise.
    #[arg(long)]
    seed: u64,
    /// True marginal profile, e.g. uniform:0.25, powerlaw:1.5,0.5,
    /// mixed:2,0.5,0.01, explicit:0.1,0.2.
    #[arg(long)]
    profile: MarginalProfile,
    /// Output file.
    #[arg(long)]
    out: PathBuf,
    /// Output format: json or csv.
    #[arg(long, default_value = "json")]
    format: ReportFormat,
    /// Emit measured wall times (off by default so reports are
    /// byte-reproducible).
    #[arg(long)]
    timing: bool,
}

impl EstimatorArgs {
    fn experiment_config(&self, trials: usize) -> ExperimentConfig {
        let mut est = EstimatorConfig::new(self.d, self.eps, self.alpha, self.beta);
        est.c_scale = self.c_scale;
        est.c_alpha = self.c_alpha;
        est.learner_id = self.learner.clone();
        est.flip_preprocess = self.flip;
        est.seed = self.seed;
        ExperimentConfig {
            estimator: est,
            profile: self.profile.clone(),
            trials,
            timing: self.timing,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run a single estimation trial and write a report.
    Estimate {
        #[command(flatten)]
        args: EstimatorArgs,
    },
    /// Run a multi-trial experiment and write a report.
    Experiment {
        #[command(flatten)]
        args: EstimatorArgs,
        /// Number of independent trials.
        #[arg(long)]
        trials: usize,
    },
    /// Empirically audit the l1 sensitivity of the truncated mean on
    /// random neighboring binary datasets.
    Audit {
        /// Rows per dataset.
        #[arg(long)]
        m: usize,
        /// Columns per dataset.
        #[arg(long)]
        dim: usize,
        /// Truncation radius.
        #[arg(long)]
        radius: f64,
        /// Number of neighboring pairs to test.
        #[arg(long)]
        pairs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Compute divergences between two explicit product distributions.
    Metrics {
        /// Compute the exact total variation distance by enumeration
        /// (requires dimension <= 24); otherwise only bounds are printed.
        #[arg(long)]
        exact_tv: bool,
        /// Comma-separated marginals of the first distribution.
        dist_a: String,
        /// Comma-separated marginals of the second distribution.
        dist_b: String,
    },
}

fn parse_means(s: &str) -> Result<ProductDistribution, Error> {
    let means = s
        .split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidParameter(format!("bad marginal '{t}'")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    ProductDistribution::new(means)
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Estimate { args } => {
            let cfg = args.experiment_config(1);
            let report = run_experiment(&cfg)?;
            report.emit(&args.out, args.format)?;
            let t = &report.trials[0];
            println!(
                "estimate: d={} n={} tv_upper={:.6}{} -> {}",
                args.d,
                report.params.required_samples(),
                t.tv_upper,
                t.tv_exact
                    .map_or_else(String::new, |v| format!(" tv_exact={v:.6}")),
                args.out.display()
            );
            Ok(())
        }
        Command::Experiment { args, trials } => {
            let cfg = args.experiment_config(trials);
            let report = run_experiment(&cfg)?;
            report.emit(&args.out, args.format)?;
            println!(
                "experiment: {} trials, {} successes (rate {:.3}) -> {}",
                report.aggregate.trials,
                report.aggregate.successes,
                report.aggregate.success_rate,
                args.out.display()
            );
            Ok(())
        }
        Command::Audit {
            m,
            dim,
            radius,
            pairs,
            seed,
        } => {
            let audit = audit_sensitivity(m, dim, radius, pairs, seed)?;
            println!(
                "sensitivity audit: pairs={} bound={:.6e} max_observed={:.6e} -> {}",
                audit.pairs,
                audit.bound,
                audit.max_observed,
                if audit.max_observed <= audit.bound + 1e-12 {
                    "within bound"
                } else {
                    "VIOLATION"
                }
            );
            Ok(())
        }
        Command::Metrics {
            exact_tv,
            dist_a,
            dist_b,
        } => {
            let p = parse_means(&dist_a)?;
            let q = parse_means(&dist_b)?;
            println!("tv_upper = {:.12}", tv_product_upper(&p, &q)?);
            println!("kl = {:.12}", kl_product(&p, &q)?);
            if exact_tv {
                if p.dim() > ENUMERATION_CAP {
                    return Err(Error::EnumerationCapExceeded {
                        dim: p.dim(),
                        cap: ENUMERATION_CAP,
                    });
                }
                println!("tv_exact = {:.12}", tv_product_exact(&p, &q)?);
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
