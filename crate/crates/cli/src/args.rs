//! Command-line arguments and their merge into a [`RunConfig`].

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::{FitSection, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "pyramid", version, about = "Bayesian pyramid models for multivariate categorical data")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory, created when missing.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[arg(long, short, global = true)]
    pub verbose: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw a dataset from a pyramid and write it with its latents and truth.
    Simulate(SimulateArgs),
    /// Run the Gibbs sampler on a dataset.
    Fit(FitArgs),
    /// Check identifiability of a constraint or graphical matrix.
    CheckId(CheckIdArgs),
    /// Compare a draws directory with a truth file.
    Evaluate(EvaluateArgs),
    /// Repeat simulate, fit and evaluate over sample sizes and seeds.
    Replicate(ReplicateArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate(_) => "simulate",
            Command::Fit(_) => "fit",
            Command::CheckId(_) => "check-id",
            Command::Evaluate(_) => "evaluate",
            Command::Replicate(_) => "replicate",
        }
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub n: Option<usize>,
    /// `paper` or a truth file.
    #[arg(long)]
    pub truth: Option<String>,
}

/// Sampler settings shared by `fit` and `replicate`.
#[derive(Debug, Args)]
pub struct SamplerArgs {
    /// Registered variance prior: fixed_K or csp.
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long)]
    pub k_upper: Option<usize>,
    /// Number of deep classes.
    #[arg(long)]
    pub b: Option<usize>,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub burn_in: Option<usize>,
    #[arg(long)]
    pub thin: Option<usize>,
    /// Drop the sign constraint on active coefficients.
    #[arg(long)]
    pub no_positivity: bool,
    #[arg(long)]
    pub mu0: Option<f64>,
    #[arg(long)]
    pub sigma0_sq: Option<f64>,
    #[arg(long)]
    pub v0: Option<f64>,
    #[arg(long)]
    pub a_sigma: Option<f64>,
    #[arg(long)]
    pub b_sigma: Option<f64>,
    #[arg(long)]
    pub alpha0: Option<f64>,
    #[arg(long)]
    pub theta_inf: Option<f64>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Dataset CSV with 1-based category codes.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// The dataset has no header row.
    #[arg(long)]
    pub no_header: bool,
    /// Common number of categories per variable.
    #[arg(long)]
    pub categories: Option<usize>,
    #[command(flatten)]
    pub sampler: SamplerArgs,
}

#[derive(Debug, Args)]
pub struct CheckIdArgs {
    /// strict-corollary, strict-theorem1, generic, multilayer or two-layer.
    #[arg(long)]
    pub checker: Option<String>,
    /// Constraint matrix CSV.
    #[arg(long)]
    pub matrix: Option<PathBuf>,
    /// Graphical matrix CSV; repeat for deeper layers, bottom first.
    #[arg(long = "graph")]
    pub graphs: Vec<PathBuf>,
    /// Class-conditional probability CSV; repeat once per variable.
    #[arg(long = "lambda")]
    pub lambdas: Vec<PathBuf>,
    /// `paper` or a truth file supplying graphs, coefficients and B.
    #[arg(long)]
    pub truth: Option<String>,
    #[arg(long)]
    pub deep_classes: Option<usize>,
    #[arg(long)]
    pub max_evaluations: Option<u64>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub draws: Option<PathBuf>,
    /// `paper` or a truth file.
    #[arg(long)]
    pub truth: Option<String>,
}

#[derive(Debug, Args)]
pub struct ReplicateArgs {
    /// Comma-separated sample sizes.
    #[arg(long, value_delimiter = ',')]
    pub n_values: Option<Vec<usize>>,
    #[arg(long)]
    pub replications: Option<usize>,
    #[arg(long)]
    pub truth: Option<String>,
    #[command(flatten)]
    pub sampler: SamplerArgs,
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

impl SamplerArgs {
    fn apply(&self, fit: &mut FitSection) {
        set(&mut fit.mode, self.mode.clone());
        set(&mut fit.k_upper, self.k_upper);
        set(&mut fit.b, self.b);
        set(&mut fit.iterations, self.iterations);
        set(&mut fit.burn_in, self.burn_in);
        set(&mut fit.thin, self.thin);
        if self.no_positivity {
            fit.positivity = false;
        }
        set(&mut fit.mu0, self.mu0);
        set(&mut fit.sigma0_sq, self.sigma0_sq);
        set(&mut fit.v0, self.v0);
        set(&mut fit.a_sigma, self.a_sigma);
        set(&mut fit.b_sigma, self.b_sigma);
        set(&mut fit.alpha0, self.alpha0);
        set(&mut fit.theta_inf, self.theta_inf);
    }
}

impl Cli {
    /// Folds flags over `base`.
    pub fn merge(&self, mut base: RunConfig) -> RunConfig {
        let g = &self.global;
        base.seed = g.seed.or(base.seed);
        base.out = g.out.clone().or(base.out);
        base.jobs = g.jobs.or(base.jobs);
        match &self.command {
            Command::Simulate(a) => {
                set(&mut base.simulate.n, a.n);
                set(&mut base.simulate.truth, a.truth.clone());
            }
            Command::Fit(a) => {
                base.fit.data = a.data.clone().or(base.fit.data);
                if a.no_header {
                    base.fit.header = false;
                }
                base.fit.categories = a.categories.or(base.fit.categories);
                a.sampler.apply(&mut base.fit);
            }
            Command::CheckId(a) => {
                let c = &mut base.check_id;
                set(&mut c.checker, a.checker.clone());
                c.matrix = a.matrix.clone().or(c.matrix.take());
                if !a.graphs.is_empty() {
                    c.graphs = a.graphs.clone();
                }
                if !a.lambdas.is_empty() {
                    c.lambdas = a.lambdas.clone();
                }
                c.truth = a.truth.clone().or(c.truth.take());
                c.deep_classes = a.deep_classes.or(c.deep_classes);
                set(&mut c.max_evaluations, a.max_evaluations);
            }
            Command::Evaluate(a) => {
                let e = &mut base.evaluate;
                e.draws = a.draws.clone().or(e.draws.take());
                e.truth = a.truth.clone().or(e.truth.take());
            }
            Command::Replicate(a) => {
                set(&mut base.replicate.n_values, a.n_values.clone());
                set(&mut base.replicate.replications, a.replications);
                set(&mut base.replicate.truth, a.truth.clone());
                a.sampler.apply(&mut base.fit);
            }
        }
        base
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn clap_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn flags_override_file_values() {
        let cli = Cli::parse_from([
            "pyramid", "fit", "--seed", "5", "--mode", "csp", "--k-upper", "7", "--no-positivity",
            "--data", "d.csv",
        ]);
        let mut base = RunConfig::default();
        base.seed = Some(1);
        base.fit.k_upper = 3;
        base.fit.iterations = 77;
        let c = cli.merge(base);
        assert_eq!(c.seed, Some(5));
        assert_eq!((c.fit.mode.as_str(), c.fit.k_upper, c.fit.iterations), ("csp", 7, 77));
        assert!(!c.fit.positivity);
        assert_eq!(c.fit.data, Some(PathBuf::from("d.csv")));
    }

    #[test]
    fn global_flags_follow_the_subcommand() {
        let cli = Cli::parse_from(["pyramid", "replicate", "--n-values", "500,2000", "--jobs", "2"]);
        let c = cli.merge(RunConfig::default());
        assert_eq!(c.replicate.n_values, vec![500, 2000]);
        assert_eq!(c.jobs, Some(2));
    }
}
