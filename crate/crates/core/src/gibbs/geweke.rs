//! Joint-distribution ("getting it right") check of the fixed-K sampler.
//!
//! The marginal-conditional simulator draws parameters from the prior and
//! responses given them. The successive-conditional simulator alternates one
//! Gibbs sweep with a fresh response draw. Both target the same joint, so
//! test-function means must agree up to Monte Carlo error.

use rand::Rng;

use super::{
    beta_draw, dirichlet_draw, gibbs_sweep, inverse_gamma, std_normal, ChainState, FixedK,
    Hyperparams, Responses, SamplerConfig, SweepKey,
};
use crate::error::Result;
use crate::rngs::{substream, StreamRng};

const TAG_MARGINAL: u64 = 0x6e01;
const TAG_REDRAW: u64 = 0x6e02;

#[derive(Debug, Clone, PartialEq)]
pub struct GewekeConfig {
    pub n: usize,
    pub p: usize,
    pub d: usize,
    pub k: usize,
    pub b: usize,
    pub sweeps: usize,
    /// Batch length for the batch-means standard error of the chain.
    pub batch: usize,
    pub positivity: bool,
    pub hyper: Hyperparams,
    pub seed: u64,
}

impl Default for GewekeConfig {
    fn default() -> Self {
        Self {
            n: 4,
            p: 3,
            d: 2,
            k: 2,
            b: 2,
            sweeps: 100_000,
            batch: 1_000,
            positivity: true,
            hyper: Hyperparams::default(),
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GewekeReport {
    pub names: Vec<String>,
    pub marginal_means: Vec<f64>,
    pub successive_means: Vec<f64>,
    pub z: Vec<f64>,
}

impl GewekeReport {
    pub fn max_abs_z(&self) -> f64 {
        self.z.iter().fold(0.0f64, |m, z| m.max(z.abs()))
    }
}

/// One draw of every parameter and latent from the fixed-K prior.
pub fn prior_draw(cfg: &GewekeConfig, rng: &mut StreamRng) -> ChainState {
    let (n, p, d, k, b) = (cfg.n, cfg.p, cfg.d, cfg.k, cfg.b);
    let cm1 = d - 1;
    let h = &cfg.hyper;
    let gamma = beta_draw(1.0, 1.0, rng);
    let g: Vec<u8> = (0..p * k).map(|_| (rng.random::<f64>() < gamma) as u8).collect();
    let sigma2: Vec<f64> = (0..cm1 * k).map(|_| inverse_gamma(h.a_sigma, h.b_sigma, rng)).collect();
    let beta0: Vec<f64> = (0..p * cm1).map(|_| h.mu0 + h.sigma0_sq.sqrt() * std_normal(rng)).collect();
    let mut beta = vec![0.0; p * cm1 * k];
    for j in 0..p {
        for c in 0..cm1 {
            for kk in 0..k {
                let e = std_normal(rng);
                beta[(j * cm1 + c) * k + kk] = if g[j * k + kk] == 1 {
                    let v = sigma2[c * k + kk].sqrt() * e;
                    if cfg.positivity {
                        v.abs()
                    } else {
                        v
                    }
                } else {
                    h.v0 * e
                };
            }
        }
    }
    let tau = dirichlet_draw(&vec![1.0; b], rng);
    let eta: Vec<f64> = (0..k * b).map(|_| beta_draw(1.0, 1.0, rng)).collect();
    let z: Vec<usize> = (0..n).map(|_| categorical(&tau, rng)).collect();
    let a: Vec<u8> = (0..n * k)
        .map(|t| (rng.random::<f64>() < eta[(t % k) * b + z[t / k]]) as u8)
        .collect();
    ChainState {
        n,
        p,
        d,
        k,
        b,
        beta0,
        beta,
        g,
        sigma2,
        gamma,
        tau,
        eta,
        a,
        z,
        w: vec![0.0; n * p * cm1],
        csp: None,
    }
}

fn categorical(weights: &[f64], rng: &mut StreamRng) -> usize {
    let total: f64 = weights.iter().sum();
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for (l, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return l;
        }
    }
    weights.len() - 1
}

/// Responses drawn from the likelihood at the state's `β`, `G`, `A`.
pub fn redraw_responses(s: &ChainState, rng: &mut StreamRng) -> Responses {
    let cm1 = s.cm1();
    let mut lp = vec![0.0; cm1];
    let mut y = Vec::with_capacity(s.n * s.p);
    for i in 0..s.n {
        for j in 0..s.p {
            super::updates::predictors_into(s, i, j, &mut lp);
            let m = lp.iter().cloned().fold(0.0f64, f64::max);
            let mut probs: Vec<f64> = lp.iter().map(|v| (v - m).exp()).collect();
            probs.push((-m).exp());
            y.push(categorical(&probs, rng) as u8);
        }
    }
    Responses {
        n: s.n,
        p: s.p,
        d: s.d,
        y,
    }
}

/// Names of the scalar test functions, in output order.
pub fn test_function_names() -> Vec<String> {
    [
        "gamma",
        "edge_count",
        "g[1,1]",
        "g[3,2]",
        "g[1,1]*beta[1,1]",
        "g[2,2]*beta[2,2]",
        "(1-g[1,2])*beta[1,2]",
        "beta0[1]",
        "beta0[3]",
        "beta0[2]^2",
        "1/sigma2[1]",
        "ln sigma2[2]",
        "tau[1]",
        "eta[1,1]",
        "eta[2,2]",
        "mean a",
        "a[1,1]*a[2,2]",
        "mean z",
        "mean y",
        "y[1,1]*y[1,2]",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect()
}

/// Test functions of the joint draw; assumes `d = 2`, `K ≥ 2`, `p ≥ 3`, `n ≥ 2`.
pub fn test_functions(s: &ChainState, resp: &Responses) -> Vec<f64> {
    let k = s.k;
    let g = |j: usize, kk: usize| s.g[j * k + kk] as f64;
    let nk = (s.n * k) as f64;
    vec![
        s.gamma,
        s.g.iter().map(|&v| v as f64).sum(),
        g(0, 0),
        g(2, 1),
        g(0, 0) * s.beta_at(0, 0, 0),
        g(1, 1) * s.beta_at(1, 0, 1),
        (1.0 - g(0, 1)) * s.beta_at(0, 0, 1),
        s.beta0[0],
        s.beta0[2 * s.cm1()],
        s.beta0[s.cm1()].powi(2),
        1.0 / s.sigma2[0],
        s.sigma2[1].ln(),
        s.tau[0],
        s.eta[0],
        s.eta[s.b + 1],
        s.a.iter().map(|&v| v as f64).sum::<f64>() / nk,
        (s.a[0] * s.a[k + 1]) as f64,
        s.z.iter().sum::<usize>() as f64 / s.n as f64,
        resp.y.iter().map(|&v| v as f64).sum::<f64>() / resp.y.len() as f64,
        (resp.y[0] * resp.y[1]) as f64,
    ]
}

/// Runs both simulators for `cfg.sweeps` draws each and reports z-scores.
pub fn run_geweke(cfg: &GewekeConfig) -> Result<GewekeReport> {
    let names = test_function_names();
    let m = names.len();

    let mut rng = substream(cfg.seed, &[TAG_MARGINAL]);
    let mut sum = vec![0.0; m];
    let mut sumsq = vec![0.0; m];
    for _ in 0..cfg.sweeps {
        let s = prior_draw(cfg, &mut rng);
        let resp = redraw_responses(&s, &mut rng);
        for (l, v) in test_functions(&s, &resp).into_iter().enumerate() {
            sum[l] += v;
            sumsq[l] += v * v;
        }
    }
    let nf = cfg.sweeps as f64;
    let marginal_means: Vec<f64> = sum.iter().map(|s| s / nf).collect();
    let marginal_var: Vec<f64> = (0..m)
        .map(|l| (sumsq[l] / nf - marginal_means[l].powi(2)).max(0.0) / nf)
        .collect();

    let sampler = SamplerConfig {
        k_upper: cfg.k,
        b: cfg.b,
        iterations: cfg.sweeps,
        burn_in: 0,
        thin: 1,
        hyper: cfg.hyper,
        mode: "fixed_K".into(),
        positivity: cfg.positivity,
        seed: cfg.seed,
    };
    let mut init_rng = substream(cfg.seed, &[TAG_MARGINAL, 1]);
    let mut state = prior_draw(cfg, &mut init_rng);
    let mut resp = redraw_responses(&state, &mut init_rng);
    let batches = (cfg.sweeps / cfg.batch).max(1);
    let mut batch_means = vec![vec![0.0; m]; batches];
    for t in 0..batches * cfg.batch {
        let key = SweepKey {
            seed: cfg.seed,
            sweep: t as u64 + 1,
        };
        gibbs_sweep(&mut state, &resp, &sampler, &FixedK, key)?;
        let mut r = substream(cfg.seed, &[TAG_REDRAW, t as u64]);
        resp = redraw_responses(&state, &mut r);
        for (l, v) in test_functions(&state, &resp).into_iter().enumerate() {
            batch_means[t / cfg.batch][l] += v / cfg.batch as f64;
        }
    }
    let bf = batches as f64;
    let successive_means: Vec<f64> = (0..m)
        .map(|l| batch_means.iter().map(|b| b[l]).sum::<f64>() / bf)
        .collect();
    let z = (0..m)
        .map(|l| {
            let var_b = batch_means
                .iter()
                .map(|b| (b[l] - successive_means[l]).powi(2))
                .sum::<f64>()
                / (bf - 1.0).max(1.0);
            let se2 = var_b / bf + marginal_var[l];
            let diff = successive_means[l] - marginal_means[l];
            if se2 > 0.0 {
                diff / se2.sqrt()
            } else if diff == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        })
        .collect();
    Ok(GewekeReport {
        names,
        marginal_means,
        successive_means,
        z,
    })
}
