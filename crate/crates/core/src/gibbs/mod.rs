//! Polya-Gamma augmented Gibbs sampler for the two-layer pyramid.
//!
//! One sweep updates, in order: the Polya-Gamma auxiliaries interleaved with
//! the regression coefficients, the graph and its inclusion probability, the
//! slab variances (through the selected [`VariancePrior`]), the deep-layer
//! parameters, and finally the subject latents. Each parallel block draws
//! from its own stream keyed by `(seed, tag, sweep, index)`, so output does
//! not depend on the size of the thread pool.

mod csp;
pub mod geweke;
mod pg;
mod truncnorm;
mod updates;

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Beta, Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lcm::Dataset;
use crate::rngs::{substream, StreamRng};

pub use csp::{slab_t_log_density, update_csp, zind_log_weights};
pub use pg::{pg_mean, pg_variance, sample_pg};
pub use truncnorm::sample_positive_normal;
pub use updates::{
    compute_phi_c, log_likelihood, update_a_z, update_beta, update_g, update_sigma_fixed_k,
    update_tau_eta, update_w, update_w_beta,
};

pub(crate) const TAG_INIT: u64 = 0x10;
pub(crate) const TAG_W: u64 = 0x11;
pub(crate) const TAG_BETA: u64 = 0x12;
pub(crate) const TAG_WB: u64 = 0x13;
pub(crate) const TAG_G: u64 = 0x14;
pub(crate) const TAG_GAMMA: u64 = 0x15;
pub(crate) const TAG_SIGMA: u64 = 0x16;
pub(crate) const TAG_TAU_ETA: u64 = 0x17;
pub(crate) const TAG_AZ: u64 = 0x18;
pub(crate) const TAG_CSP: u64 = 0x19;

/// Prior hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Hyperparams {
    /// Intercept prior mean.
    pub mu0: f64,
    /// Intercept prior variance.
    pub sigma0_sq: f64,
    /// Pseudo-prior standard deviation for coefficients without an edge.
    pub v0: f64,
    pub a_sigma: f64,
    pub b_sigma: f64,
    /// Stick-breaking concentration of the shrinkage prior.
    pub alpha0: f64,
    /// Spike variance.
    pub theta_inf: f64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            mu0: 0.0,
            sigma0_sq: 4.0,
            v0: 0.1,
            a_sigma: 2.0,
            b_sigma: 2.0,
            alpha0: 5.0,
            theta_inf: 0.07,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerConfig {
    pub k_upper: usize,
    pub b: usize,
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub hyper: Hyperparams,
    /// Name of a registered [`VariancePrior`]: `fixed_K` or `csp`.
    pub mode: String,
    pub positivity: bool,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            k_upper: 4,
            b: 2,
            iterations: 15_000,
            burn_in: 5_000,
            thin: 5,
            hyper: Hyperparams::default(),
            mode: "fixed_K".into(),
            positivity: true,
            seed: 0,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Usage(m.to_string()));
        if self.burn_in >= self.iterations {
            return bad("burn_in must be smaller than iterations");
        }
        if self.thin == 0 {
            return bad("thin must be at least 1");
        }
        if self.b == 0 {
            return bad("B must be at least 1");
        }
        let h = &self.hyper;
        if !(h.v0 > 0.0 && h.theta_inf > 0.0 && h.sigma0_sq > 0.0) {
            return bad("v0, theta_inf and sigma0_sq must be positive");
        }
        if !(h.a_sigma > 0.0 && h.b_sigma > 0.0 && h.alpha0 > 0.0) {
            return bad("a_sigma, b_sigma and alpha0 must be positive");
        }
        Ok(())
    }

    /// Number of retained draws.
    pub fn retained(&self) -> usize {
        self.iterations.saturating_sub(self.burn_in) / self.thin
    }
}

/// Observed responses as 0-based category indices with constant `d`.
#[derive(Debug, Clone, PartialEq)]
pub struct Responses {
    pub n: usize,
    pub p: usize,
    pub d: usize,
    /// `y[i * p + j]`; the last category `d − 1` is the baseline.
    pub y: Vec<u8>,
}

impl Responses {
    pub fn from_dataset(data: &Dataset) -> Result<Self> {
        let d = data.constant_cardinality().ok_or_else(|| {
            Error::Usage("the sampler needs the same number of categories for every variable".into())
        })?;
        if !(2..=255).contains(&d) {
            return Err(Error::Usage(format!("unsupported category count {d}")));
        }
        Ok(Self {
            n: data.n(),
            p: data.p(),
            d,
            y: data.values().iter().map(|&v| (v - 1) as u8).collect(),
        })
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> usize {
        self.y[i * self.p + j] as usize
    }
}

/// Stick-breaking state of the shrinkage prior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CspState {
    pub v: Vec<f64>,
    /// Cumulative spike probabilities, nondecreasing with `pi[K−1] = 1`.
    pub pi: Vec<f64>,
    /// 1-based stick index per column; column `k` (1-based) is in the slab
    /// iff `zind[k−1] > k`.
    pub zind: Vec<usize>,
}

impl CspState {
    pub fn is_slab(&self, k: usize) -> bool {
        self.zind[k] > k + 1
    }
}

/// Full Gibbs state. Flat layouts: `beta0[j*(d−1)+c]`,
/// `beta[(j*(d−1)+c)*K+k]`, `g[j*K+k]`, `sigma2[c*K+k]`, `eta[k*B+b]`,
/// `a[i*K+k]`, `w[(i*p+j)*(d−1)+c]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainState {
    pub n: usize,
    pub p: usize,
    pub d: usize,
    pub k: usize,
    pub b: usize,
    pub beta0: Vec<f64>,
    pub beta: Vec<f64>,
    pub g: Vec<u8>,
    pub sigma2: Vec<f64>,
    pub gamma: f64,
    pub tau: Vec<f64>,
    pub eta: Vec<f64>,
    pub a: Vec<u8>,
    /// 0-based deep class per subject.
    pub z: Vec<usize>,
    pub w: Vec<f64>,
    pub csp: Option<CspState>,
}

pub(crate) fn std_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

pub(crate) fn inverse_gamma<R: Rng + ?Sized>(shape: f64, scale: f64, rng: &mut R) -> f64 {
    let g: f64 = Gamma::new(shape, 1.0 / scale)
        .expect("positive gamma parameters")
        .sample(rng);
    1.0 / g
}

pub(crate) fn beta_draw<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> f64 {
    Beta::new(a, b).expect("positive beta parameters").sample(rng)
}

pub(crate) fn dirichlet_draw<R: Rng + ?Sized>(alpha: &[f64], rng: &mut R) -> Vec<f64> {
    let g: Vec<f64> = alpha
        .iter()
        .map(|&a| Gamma::new(a, 1.0).expect("positive shape").sample(rng))
        .collect();
    let s: f64 = g.iter().sum();
    g.into_iter().map(|v| v / s).collect()
}

impl ChainState {
    #[inline]
    pub fn cm1(&self) -> usize {
        self.d - 1
    }

    #[inline]
    pub fn beta_at(&self, j: usize, c: usize, k: usize) -> f64 {
        self.beta[(j * self.cm1() + c) * self.k + k]
    }

    #[inline]
    pub fn edge(&self, j: usize, k: usize) -> bool {
        self.g[j * self.k + k] == 1
    }

    /// Prior-consistent overdispersed start. The variance block is set by
    /// the selected prior.
    pub fn initialize(
        resp: &Responses,
        cfg: &SamplerConfig,
        prior: &dyn VariancePrior,
    ) -> Result<Self> {
        let (n, p, d, k, b) = (resp.n, resp.p, resp.d, cfg.k_upper, cfg.b);
        let cm1 = d - 1;
        let h = &cfg.hyper;
        let mut rng = substream(cfg.seed, &[TAG_INIT]);
        let gamma = beta_draw(1.0, 1.0, &mut rng);
        let g: Vec<u8> = (0..p * k).map(|_| (rng.random::<f64>() < 0.5) as u8).collect();
        let beta0: Vec<f64> = (0..p * cm1)
            .map(|_| h.mu0 + h.sigma0_sq.sqrt() * std_normal(&mut rng))
            .collect();
        let mut beta = vec![0.0; p * cm1 * k];
        for j in 0..p {
            for c in 0..cm1 {
                for kk in 0..k {
                    let e: f64 = StandardNormal.sample(&mut rng);
                    beta[(j * cm1 + c) * k + kk] = if g[j * k + kk] == 1 {
                        if cfg.positivity {
                            e.abs()
                        } else {
                            e
                        }
                    } else {
                        h.v0 * e
                    };
                }
            }
        }
        let tau = dirichlet_draw(&vec![1.0; b], &mut rng);
        let eta: Vec<f64> = (0..k * b).map(|_| beta_draw(1.0, 1.0, &mut rng)).collect();
        let a: Vec<u8> = (0..n * k).map(|_| (rng.random::<f64>() < 0.5) as u8).collect();
        let z: Vec<usize> = (0..n).map(|_| rng.random_range(0..b)).collect();
        let mut state = Self {
            n,
            p,
            d,
            k,
            b,
            beta0,
            beta,
            g,
            sigma2: vec![1.0; cm1 * k],
            gamma,
            tau,
            eta,
            a,
            z,
            w: vec![0.0; n * p * cm1],
            csp: None,
        };
        prior.initialize(&mut state, h, &mut rng);
        Ok(state)
    }
}

/// Counter key for one sweep; every block derives its own stream from it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SweepKey {
    pub seed: u64,
    pub sweep: u64,
}

impl SweepKey {
    pub fn rng(&self, tag: u64, index: usize) -> StreamRng {
        substream(self.seed, &[tag, self.sweep, index as u64])
    }
}

/// Prior over the per-column slab variances.
pub trait VariancePrior: Send + Sync {
    fn name(&self) -> &'static str;
    fn initialize(&self, state: &mut ChainState, hyper: &Hyperparams, rng: &mut StreamRng);
    fn update(&self, state: &mut ChainState, hyper: &Hyperparams, key: SweepKey) -> Result<()>;
}

/// Independent inverse-gamma slab variances with a fixed number of columns.
pub struct FixedK;

impl VariancePrior for FixedK {
    fn name(&self) -> &'static str {
        "fixed_K"
    }

    fn initialize(&self, state: &mut ChainState, hyper: &Hyperparams, rng: &mut StreamRng) {
        for s in state.sigma2.iter_mut() {
            *s = inverse_gamma(hyper.a_sigma, hyper.b_sigma, rng);
        }
        state.csp = None;
    }

    fn update(&self, state: &mut ChainState, hyper: &Hyperparams, key: SweepKey) -> Result<()> {
        update_sigma_fixed_k(state, hyper, key);
        Ok(())
    }
}

/// Cumulative shrinkage process over columns.
pub struct Csp;

impl VariancePrior for Csp {
    fn name(&self) -> &'static str {
        "csp"
    }

    fn initialize(&self, state: &mut ChainState, hyper: &Hyperparams, rng: &mut StreamRng) {
        csp::initialize(state, hyper, rng);
    }

    fn update(&self, state: &mut ChainState, hyper: &Hyperparams, key: SweepKey) -> Result<()> {
        update_csp(state, hyper, key)
    }
}

/// Name-keyed registry of variance priors.
pub struct PriorRegistry {
    priors: BTreeMap<&'static str, Box<dyn VariancePrior>>,
}

impl Default for PriorRegistry {
    fn default() -> Self {
        let mut r = Self {
            priors: BTreeMap::new(),
        };
        r.register(Box::new(FixedK));
        r.register(Box::new(Csp));
        r
    }
}

impl PriorRegistry {
    pub fn register(&mut self, prior: Box<dyn VariancePrior>) {
        self.priors.insert(prior.name(), prior);
    }

    pub fn get(&self, name: &str) -> Result<&dyn VariancePrior> {
        self.priors.get(name).map(|p| p.as_ref()).ok_or_else(|| {
            Error::Usage(format!(
                "unknown mode '{name}'; available: {}",
                self.names().join(", ")
            ))
        })
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.priors.keys().copied().collect()
    }
}

/// Per-iteration diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub log_lik: f64,
    pub gamma: f64,
    pub edges: usize,
    /// Number of slab columns (CSP mode), else `K`.
    pub slab_columns: usize,
}

/// Thinned post-burn-in draws.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorDraws {
    pub n: usize,
    pub p: usize,
    pub d: usize,
    pub k: usize,
    pub b: usize,
    pub mode: String,
    /// 1-based sweep index of each retained draw.
    pub iterations: Vec<usize>,
    pub g: Vec<Vec<u8>>,
    pub beta: Vec<Vec<f64>>,
    pub beta0: Vec<Vec<f64>>,
    pub sigma2: Vec<Vec<f64>>,
    pub gamma: Vec<f64>,
    pub tau: Vec<Vec<f64>>,
    pub eta: Vec<Vec<f64>>,
    pub a: Vec<Vec<u8>>,
    pub z: Vec<Vec<u16>>,
    pub csp: Vec<CspState>,
    pub trace: Vec<TraceRow>,
}

impl PosteriorDraws {
    fn new(state: &ChainState, mode: &str, capacity: usize) -> Self {
        Self {
            n: state.n,
            p: state.p,
            d: state.d,
            k: state.k,
            b: state.b,
            mode: mode.to_string(),
            iterations: Vec::with_capacity(capacity),
            g: Vec::with_capacity(capacity),
            beta: Vec::with_capacity(capacity),
            beta0: Vec::with_capacity(capacity),
            sigma2: Vec::with_capacity(capacity),
            gamma: Vec::with_capacity(capacity),
            tau: Vec::with_capacity(capacity),
            eta: Vec::with_capacity(capacity),
            a: Vec::with_capacity(capacity),
            z: Vec::with_capacity(capacity),
            csp: Vec::new(),
            trace: Vec::new(),
        }
    }

    fn record(&mut self, iteration: usize, s: &ChainState) {
        self.iterations.push(iteration);
        self.g.push(s.g.clone());
        self.beta.push(s.beta.clone());
        self.beta0.push(s.beta0.clone());
        self.sigma2.push(s.sigma2.clone());
        self.gamma.push(s.gamma);
        self.tau.push(s.tau.clone());
        self.eta.push(s.eta.clone());
        self.a.push(s.a.clone());
        self.z.push(s.z.iter().map(|&z| z as u16).collect());
        if let Some(c) = &s.csp {
            self.csp.push(c.clone());
        }
    }

    pub fn len(&self) -> usize {
        self.iterations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.iterations.is_empty()
    }

    /// Running mean of the log-likelihood trace.
    pub fn running_mean_log_lik(&self) -> Vec<f64> {
        let mut acc = 0.0;
        self.trace
            .iter()
            .enumerate()
            .map(|(t, r)| {
                acc += r.log_lik;
                acc / (t + 1) as f64
            })
            .collect()
    }
}

/// Posterior mean of `Σ_k (1 − π_k)` over retained shrinkage-prior draws.
pub fn estimate_k_star(draws: &PosteriorDraws) -> Result<f64> {
    if draws.csp.is_empty() {
        return Err(Error::Usage("no shrinkage-prior draws to summarize".into()));
    }
    let total: f64 = draws
        .csp
        .iter()
        .map(|c| c.pi.iter().map(|p| 1.0 - p).sum::<f64>())
        .sum();
    Ok(total / draws.csp.len() as f64)
}

/// Posterior mean of the number of slab columns, `Σ_k 1(zind_k > k)`.
pub fn estimate_k_star_indicator(draws: &PosteriorDraws) -> Result<f64> {
    if draws.csp.is_empty() {
        return Err(Error::Usage("no shrinkage-prior draws to summarize".into()));
    }
    let total: usize = draws
        .csp
        .iter()
        .map(|c| (0..c.zind.len()).filter(|&k| c.is_slab(k)).count())
        .sum();
    Ok(total as f64 / draws.csp.len() as f64)
}

/// One full sweep in the fixed order.
pub fn gibbs_sweep(
    state: &mut ChainState,
    resp: &Responses,
    cfg: &SamplerConfig,
    prior: &dyn VariancePrior,
    key: SweepKey,
) -> Result<()> {
    update_w_beta(state, resp, &cfg.hyper, cfg.positivity, key)?;
    update_g(state, resp, &cfg.hyper, cfg.positivity, key);
    prior.update(state, &cfg.hyper, key)?;
    update_tau_eta(state, key);
    update_a_z(state, resp, key);
    Ok(())
}

/// Runs the chain with the variance prior named by `cfg.mode`.
pub fn run_chain(data: &Dataset, cfg: &SamplerConfig) -> Result<PosteriorDraws> {
    run_chain_with(data, cfg, &PriorRegistry::default(), &mut |_| {})
}

/// Like [`run_chain`] with an explicit registry and a per-sweep callback.
pub fn run_chain_with(
    data: &Dataset,
    cfg: &SamplerConfig,
    registry: &PriorRegistry,
    progress: &mut dyn FnMut(usize),
) -> Result<PosteriorDraws> {
    cfg.validate()?;
    let prior = registry.get(&cfg.mode)?;
    let resp = Responses::from_dataset(data)?;
    let mut state = ChainState::initialize(&resp, cfg, prior)?;
    let mut draws = PosteriorDraws::new(&state, prior.name(), cfg.retained());
    for t in 1..=cfg.iterations {
        let key = SweepKey {
            seed: cfg.seed,
            sweep: t as u64,
        };
        gibbs_sweep(&mut state, &resp, cfg, prior, key).map_err(|e| match e {
            Error::Numerical { message, .. } => Error::Numerical {
                iteration: t,
                message,
            },
            other => other,
        })?;
        let ll = log_likelihood(&state, &resp);
        if !ll.is_finite() {
            return Err(Error::Numerical {
                iteration: t,
                message: "log-likelihood is not finite".into(),
            });
        }
        draws.trace.push(TraceRow {
            iteration: t,
            log_lik: ll,
            gamma: state.gamma,
            edges: state.g.iter().map(|&v| v as usize).sum(),
            slab_columns: state
                .csp
                .as_ref()
                .map_or(state.k, |c| (0..state.k).filter(|&k| c.is_slab(k)).count()),
        });
        if t > cfg.burn_in && (t - cfg.burn_in) % cfg.thin == 0 {
            draws.record(t, &state);
        }
        progress(t);
    }
    Ok(draws)
}
