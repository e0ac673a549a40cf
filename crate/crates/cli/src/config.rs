//! Run configuration: a TOML document with one flat table per subcommand.
//! Flags override file values; the resolved document is echoed into every
//! output manifest.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use pyramid_core::gibbs::{Hyperparams, SamplerConfig};

use crate::error::{config_err, CliResult};

pub const DEFAULT_OUT: &str = "out";
/// Largest seed a TOML integer can hold.
pub const MAX_SEED: u64 = i64::MAX as u64;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub jobs: Option<usize>,
    /// Present in manifests; ignored on input.
    #[serde(skip_serializing)]
    pub command: Option<String>,
    #[serde(skip_serializing)]
    pub provenance: Option<toml::Table>,
    pub simulate: SimulateSection,
    pub fit: FitSection,
    pub replicate: ReplicateSection,
    pub check_id: CheckIdSection,
    pub evaluate: EvaluateSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateSection {
    pub n: usize,
    /// `paper` or the path of a truth file.
    pub truth: String,
}

impl Default for SimulateSection {
    fn default() -> Self {
        Self {
            n: 1000,
            truth: "paper".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitSection {
    pub data: Option<PathBuf>,
    pub header: bool,
    /// Common number of categories; inferred per column when absent.
    pub categories: Option<usize>,
    pub mode: String,
    pub k_upper: usize,
    pub b: usize,
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub positivity: bool,
    pub mu0: f64,
    pub sigma0_sq: f64,
    pub v0: f64,
    pub a_sigma: f64,
    pub b_sigma: f64,
    pub alpha0: f64,
    pub theta_inf: f64,
}

impl Default for FitSection {
    fn default() -> Self {
        let s = SamplerConfig::default();
        let h = s.hyper;
        Self {
            data: None,
            header: true,
            categories: None,
            mode: s.mode,
            k_upper: s.k_upper,
            b: s.b,
            iterations: s.iterations,
            burn_in: s.burn_in,
            thin: s.thin,
            positivity: s.positivity,
            mu0: h.mu0,
            sigma0_sq: h.sigma0_sq,
            v0: h.v0,
            a_sigma: h.a_sigma,
            b_sigma: h.b_sigma,
            alpha0: h.alpha0,
            theta_inf: h.theta_inf,
        }
    }
}

impl FitSection {
    pub fn sampler(&self, seed: u64) -> SamplerConfig {
        SamplerConfig {
            k_upper: self.k_upper,
            b: self.b,
            iterations: self.iterations,
            burn_in: self.burn_in,
            thin: self.thin,
            hyper: Hyperparams {
                mu0: self.mu0,
                sigma0_sq: self.sigma0_sq,
                v0: self.v0,
                a_sigma: self.a_sigma,
                b_sigma: self.b_sigma,
                alpha0: self.alpha0,
                theta_inf: self.theta_inf,
            },
            mode: self.mode.clone(),
            positivity: self.positivity,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReplicateSection {
    pub n_values: Vec<usize>,
    pub replications: usize,
    pub truth: String,
}

impl Default for ReplicateSection {
    fn default() -> Self {
        Self {
            n_values: vec![500, 1000, 1500, 2000],
            replications: 50,
            truth: "paper".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CheckIdSection {
    pub checker: String,
    /// Constraint matrix CSV.
    pub matrix: Option<PathBuf>,
    /// Graphical matrix CSVs, bottom layer first.
    pub graphs: Vec<PathBuf>,
    /// Class-conditional probability CSVs, one per observed variable.
    pub lambdas: Vec<PathBuf>,
    /// Truth file supplying graphs, coefficients and B.
    pub truth: Option<String>,
    pub deep_classes: Option<usize>,
    pub max_evaluations: u64,
    pub restarts: usize,
    pub max_flips: usize,
}

impl Default for CheckIdSection {
    fn default() -> Self {
        let b = pyramid_core::identify::SearchBudget::default();
        Self {
            checker: "generic".into(),
            matrix: None,
            graphs: Vec::new(),
            lambdas: Vec::new(),
            truth: None,
            deep_classes: None,
            max_evaluations: b.max_evaluations,
            restarts: b.restarts,
            max_flips: b.max_flips,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateSection {
    pub draws: Option<PathBuf>,
    pub truth: Option<String>,
}

impl RunConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .or_else(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
        toml::from_str(&text).or_else(|e| config_err(format!("{}: {e}", path.display())))
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
    }

    pub fn require_seed(&self, command: &str) -> CliResult<u64> {
        match self.seed {
            None => config_err(format!("{command} needs a seed (--seed or `seed` in the config)")),
            Some(s) if s > MAX_SEED => config_err(format!("seed must not exceed {MAX_SEED}")),
            Some(s) => Ok(s),
        }
    }
}

/// Fails when `path` does not exist.
pub fn require_file(path: &Path, what: &str) -> CliResult<()> {
    if path.exists() {
        Ok(())
    } else {
        config_err(format!("{what} not found: {}", path.display()))
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}
