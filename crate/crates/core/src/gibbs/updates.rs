//! Full-conditional updates of the Gibbs sweep.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::pg::sample_pg;
use super::truncnorm::sample_positive_normal;
use super::{
    beta_draw, dirichlet_draw, inverse_gamma, std_normal, ChainState, Hyperparams, Responses, SweepKey,
    TAG_AZ, TAG_BETA, TAG_G, TAG_GAMMA, TAG_SIGMA, TAG_TAU_ETA, TAG_W, TAG_WB,
};
use crate::error::{Error, Result};
use crate::simgen::logistic;

/// Linear predictors `β0_{jc} + Σ_k β_{jck} g_{jk} a_{ik}` for one subject
/// and variable, written into `out` (length `d − 1`).
#[inline]
pub(crate) fn predictors_into(s: &ChainState, i: usize, j: usize, out: &mut [f64]) {
    let (cm1, k) = (s.cm1(), s.k);
    let a = &s.a[i * k..(i + 1) * k];
    let g = &s.g[j * k..(j + 1) * k];
    for (c, o) in out.iter_mut().enumerate() {
        let row = &s.beta[(j * cm1 + c) * k..(j * cm1 + c + 1) * k];
        let mut v = s.beta0[j * cm1 + c];
        for kk in 0..k {
            if g[kk] & a[kk] == 1 {
                v += row[kk];
            }
        }
        *o = v;
    }
}

/// Predictors for variable `j` across all subjects, `n × (d−1)` row-major.
fn variable_predictors(s: &ChainState, j: usize) -> Vec<f64> {
    let cm1 = s.cm1();
    let mut out = vec![0.0; s.n * cm1];
    for i in 0..s.n {
        predictors_into(s, i, j, &mut out[i * cm1..(i + 1) * cm1]);
    }
    out
}

/// `ln Σ exp` over the non-baseline predictors plus the baseline 0.
#[inline]
fn log_norm(lp: &[f64]) -> f64 {
    let m = lp.iter().cloned().fold(0.0f64, f64::max);
    let s: f64 = lp.iter().map(|&v| (v - m).exp()).sum::<f64>() + (-m).exp();
    m + s.ln()
}

/// `ln P(y = cat)` under predictors `lp` (baseline is category `lp.len()`).
#[inline]
pub(crate) fn log_prob(lp: &[f64], cat: usize) -> f64 {
    let top = if cat < lp.len() { lp[cat] } else { 0.0 };
    top - log_norm(lp)
}

/// `(φ, C)` for category `c`: `C` is the log-sum-exp of all other
/// categories' predictors (baseline 0 included) and `φ = lp_c − C`.
pub fn compute_phi_c(lp: &[f64], c: usize) -> (f64, f64) {
    let m = lp
        .iter()
        .enumerate()
        .filter(|&(l, _)| l != c)
        .map(|(_, &v)| v)
        .fold(0.0f64, f64::max);
    let s: f64 = lp
        .iter()
        .enumerate()
        .filter(|&(l, _)| l != c)
        .map(|(_, &v)| (v - m).exp())
        .sum::<f64>()
        + (-m).exp();
    let big_c = m + s.ln();
    (lp[c] - big_c, big_c)
}

/// Total log-likelihood of the responses given `β`, `G` and `A`.
pub fn log_likelihood(s: &ChainState, resp: &Responses) -> f64 {
    (0..s.n)
        .into_par_iter()
        .map(|i| {
            let mut lp = vec![0.0; s.cm1()];
            let mut acc = 0.0;
            for j in 0..s.p {
                predictors_into(s, i, j, &mut lp);
                acc += log_prob(&lp, resp.get(i, j));
            }
            acc
        })
        .collect::<Vec<f64>>()
        .iter()
        .sum()
}

/// Draws every `w_{ijc} ~ PG(1, φ_{ijc})` at the current coefficients.
pub fn update_w(s: &mut ChainState, _resp: &Responses, key: SweepKey) {
    let (p, cm1) = (s.p, s.cm1());
    let blocks: Vec<Vec<f64>> = (0..s.n)
        .into_par_iter()
        .map(|i| {
            let mut rng = key.rng(TAG_W, i);
            let mut lp = vec![0.0; cm1];
            let mut out = Vec::with_capacity(p * cm1);
            for j in 0..p {
                predictors_into(s, i, j, &mut lp);
                for c in 0..cm1 {
                    out.push(sample_pg(compute_phi_c(&lp, c).0, &mut rng));
                }
            }
            out
        })
        .collect();
    for (i, b) in blocks.into_iter().enumerate() {
        s.w[i * p * cm1..(i + 1) * p * cm1].copy_from_slice(&b);
    }
}

/// New intercept and coefficient row for `(j, c)`.
struct BlockDraw {
    beta0: f64,
    row: Vec<f64>,
}

/// Draws `β_{jc}` given weights `w` (length n) and offsets `big_c`.
#[allow(clippy::too_many_arguments)]
fn draw_beta_block<R: Rng + ?Sized>(
    s: &ChainState,
    resp: &Responses,
    j: usize,
    c: usize,
    w: &[f64],
    big_c: &[f64],
    current: (f64, &[f64]),
    hyper: &Hyperparams,
    positivity: bool,
    rng: &mut R,
) -> Result<BlockDraw> {
    let k = s.k;
    let active: Vec<usize> = (0..k).filter(|&kk| s.edge(j, kk)).collect();
    let m = active.len() + 1;
    let mut prec = DMatrix::<f64>::zeros(m, m);
    let mut rhs = DVector::<f64>::zeros(m);
    let mut design = vec![0.0; m];
    design[0] = 1.0;
    for i in 0..s.n {
        for (l, &kk) in active.iter().enumerate() {
            design[l + 1] = s.a[i * k + kk] as f64;
        }
        let kappa = if resp.get(i, j) == c { 0.5 } else { -0.5 };
        let t = kappa + w[i] * big_c[i];
        for r in 0..m {
            if design[r] == 0.0 {
                continue;
            }
            rhs[r] += t;
            for q in 0..m {
                if design[q] != 0.0 {
                    prec[(r, q)] += w[i];
                }
            }
        }
    }
    prec[(0, 0)] += 1.0 / hyper.sigma0_sq;
    rhs[0] += hyper.mu0 / hyper.sigma0_sq;
    for (l, &kk) in active.iter().enumerate() {
        prec[(l + 1, l + 1)] += 1.0 / s.sigma2[c * k + kk];
    }
    let chol = prec.clone().cholesky().ok_or_else(|| Error::Numerical {
        iteration: 0,
        message: format!("precision for variable {} category {} is not positive definite", j + 1, c + 1),
    })?;
    let mean = chol.solve(&rhs);
    let mut block = DVector::<f64>::zeros(m);
    if positivity && m > 1 {
        block[0] = current.0;
        for (l, &kk) in active.iter().enumerate() {
            // a newly switched-on coefficient may start outside the support
            block[l + 1] = current.1[kk].abs().max(f64::MIN_POSITIVE);
        }
        for l in 0..m {
            let pll = prec[(l, l)];
            let shift: f64 = (0..m)
                .filter(|&q| q != l)
                .map(|q| prec[(l, q)] * (block[q] - mean[q]))
                .sum();
            let cmean = mean[l] - shift / pll;
            let sd = 1.0 / pll.sqrt();
            block[l] = if l == 0 {
                cmean + sd * std_normal(rng)
            } else {
                sample_positive_normal(cmean, sd, rng)
            };
        }
    } else {
        let eps = DVector::<f64>::from_fn(m, |_, _| StandardNormal.sample(rng));
        // L Lᵀ = P, so L⁻ᵀ ε has covariance P⁻¹
        let dev = chol
            .l()
            .transpose()
            .solve_upper_triangular(&eps)
            .ok_or_else(|| Error::Numerical {
                iteration: 0,
                message: "triangular solve failed".into(),
            })?;
        block = mean + dev;
    }
    let mut row = vec![0.0; k];
    let mut next = 1;
    for (kk, slot) in row.iter_mut().enumerate() {
        if s.edge(j, kk) {
            *slot = block[next];
            next += 1;
        } else {
            *slot = hyper.v0 * std_normal(rng);
        }
    }
    Ok(BlockDraw {
        beta0: block[0],
        row,
    })
}

fn commit_variable(s: &mut ChainState, j: usize, beta0: &[f64], beta: &[f64]) {
    let (cm1, k) = (s.cm1(), s.k);
    s.beta0[j * cm1..(j + 1) * cm1].copy_from_slice(beta0);
    s.beta[j * cm1 * k..(j + 1) * cm1 * k].copy_from_slice(beta);
}

/// Draws every `β_{jc}` block given the stored Polya-Gamma weights.
pub fn update_beta(
    s: &mut ChainState,
    resp: &Responses,
    hyper: &Hyperparams,
    positivity: bool,
    key: SweepKey,
) -> Result<()> {
    let (n, p, cm1, k) = (s.n, s.p, s.cm1(), s.k);
    let snapshot = &*s;
    let results: Vec<Result<(Vec<f64>, Vec<f64>)>> = (0..p)
        .into_par_iter()
        .map(|j| {
            let mut rng = key.rng(TAG_BETA, j);
            let mut lp = variable_predictors(snapshot, j);
            let mut b0 = snapshot.beta0[j * cm1..(j + 1) * cm1].to_vec();
            let mut bj = snapshot.beta[j * cm1 * k..(j + 1) * cm1 * k].to_vec();
            let mut w = vec![0.0; n];
            let mut big_c = vec![0.0; n];
            for c in 0..cm1 {
                for i in 0..n {
                    w[i] = snapshot.w[(i * p + j) * cm1 + c];
                    big_c[i] = compute_phi_c(&lp[i * cm1..(i + 1) * cm1], c).1;
                }
                let draw = draw_beta_block(
                    snapshot,
                    resp,
                    j,
                    c,
                    &w,
                    &big_c,
                    (b0[c], &bj[c * k..(c + 1) * k]),
                    hyper,
                    positivity,
                    &mut rng,
                )?;
                b0[c] = draw.beta0;
                bj[c * k..(c + 1) * k].copy_from_slice(&draw.row);
                refresh_category(snapshot, j, c, &b0, &bj, &mut lp);
            }
            Ok((b0, bj))
        })
        .collect();
    for (j, r) in results.into_iter().enumerate() {
        let (b0, bj) = r?;
        commit_variable(s, j, &b0, &bj);
    }
    Ok(())
}

/// Recomputes column `c` of the `n × (d−1)` predictor block of variable `j`
/// from provisional coefficients.
fn refresh_category(s: &ChainState, j: usize, c: usize, b0: &[f64], bj: &[f64], lp: &mut [f64]) {
    let (cm1, k) = (s.cm1(), s.k);
    let row = &bj[c * k..(c + 1) * k];
    let g = &s.g[j * k..(j + 1) * k];
    for i in 0..s.n {
        let a = &s.a[i * k..(i + 1) * k];
        let mut v = b0[c];
        for kk in 0..k {
            if g[kk] & a[kk] == 1 {
                v += row[kk];
            }
        }
        lp[i * cm1 + c] = v;
    }
}

/// For each `(j, c)` in turn: draw `w_{·jc} ~ PG(1, φ_{·jc})`, then `β_{jc}`
/// given those weights. Later categories see the refreshed predictors.
pub fn update_w_beta(
    s: &mut ChainState,
    resp: &Responses,
    hyper: &Hyperparams,
    positivity: bool,
    key: SweepKey,
) -> Result<()> {
    let (n, p, cm1, k) = (s.n, s.p, s.cm1(), s.k);
    let snapshot = &*s;
    type VarDraw = (Vec<f64>, Vec<f64>, Vec<f64>);
    let results: Vec<Result<VarDraw>> = (0..p)
        .into_par_iter()
        .map(|j| {
            let mut rng = key.rng(TAG_WB, j);
            let mut lp = variable_predictors(snapshot, j);
            let mut b0 = snapshot.beta0[j * cm1..(j + 1) * cm1].to_vec();
            let mut bj = snapshot.beta[j * cm1 * k..(j + 1) * cm1 * k].to_vec();
            let mut wj = vec![0.0; n * cm1];
            let mut w = vec![0.0; n];
            let mut big_c = vec![0.0; n];
            for c in 0..cm1 {
                for i in 0..n {
                    let (phi, cc) = compute_phi_c(&lp[i * cm1..(i + 1) * cm1], c);
                    w[i] = sample_pg(phi, &mut rng);
                    big_c[i] = cc;
                    wj[i * cm1 + c] = w[i];
                }
                let draw = draw_beta_block(
                    snapshot,
                    resp,
                    j,
                    c,
                    &w,
                    &big_c,
                    (b0[c], &bj[c * k..(c + 1) * k]),
                    hyper,
                    positivity,
                    &mut rng,
                )?;
                b0[c] = draw.beta0;
                bj[c * k..(c + 1) * k].copy_from_slice(&draw.row);
                refresh_category(snapshot, j, c, &b0, &bj, &mut lp);
            }
            Ok((b0, bj, wj))
        })
        .collect();
    for (j, r) in results.into_iter().enumerate() {
        let (b0, bj, wj) = r?;
        commit_variable(s, j, &b0, &bj);
        for i in 0..n {
            s.w[(i * p + j) * cm1..(i * p + j + 1) * cm1]
                .copy_from_slice(&wj[i * cm1..(i + 1) * cm1]);
        }
    }
    Ok(())
}

#[inline]
fn ln_normal(x: f64, var: f64) -> f64 {
    -0.5 * (2.0 * std::f64::consts::PI * var).ln() - 0.5 * x * x / var
}

/// Log of the odds `O⁰¹_{jk}` against including edge `(j, k)`, evaluated at
/// the current coefficients. `on` is the edge's current value and `lp` the
/// variable's predictors under it. Under `positivity` the slab is the
/// half-normal, so a non-positive coefficient cannot carry an edge.
#[allow(clippy::too_many_arguments)]
pub(crate) fn log_edge_odds(
    s: &ChainState,
    resp: &Responses,
    hyper: &Hyperparams,
    positivity: bool,
    j: usize,
    kk: usize,
    on: bool,
    lp: &[f64],
) -> f64 {
    let (cm1, k) = (s.cm1(), s.k);
    let mut log_o = 0.0;
    for c in 0..cm1 {
        let b = s.beta_at(j, c, kk);
        if positivity {
            if b <= 0.0 {
                return f64::INFINITY;
            }
            log_o -= std::f64::consts::LN_2;
        }
        log_o += ln_normal(b, hyper.v0 * hyper.v0) - ln_normal(b, s.sigma2[c * k + kk]);
    }
    let mut with = vec![0.0; cm1];
    let mut without = vec![0.0; cm1];
    for i in 0..s.n {
        if s.a[i * k + kk] == 0 {
            continue;
        }
        for c in 0..cm1 {
            let b = s.beta_at(j, c, kk);
            let base = lp[i * cm1 + c] - if on { b } else { 0.0 };
            without[c] = base;
            with[c] = base + b;
        }
        let y = resp.get(i, j);
        log_o += log_prob(&without, y) - log_prob(&with, y);
    }
    log_o
}

/// Draws each `g_{jk}` from its Bernoulli full conditional, then `γ`.
pub fn update_g(
    s: &mut ChainState,
    resp: &Responses,
    hyper: &Hyperparams,
    positivity: bool,
    key: SweepKey,
) {
    let (p, k, cm1) = (s.p, s.k, s.cm1());
    let logit_gamma = s.gamma.ln() - (1.0 - s.gamma).ln();
    let snapshot = &*s;
    let rows: Vec<Vec<u8>> = (0..p)
        .into_par_iter()
        .map(|j| {
            let mut rng = key.rng(TAG_G, j);
            let mut local = snapshot.g[j * k..(j + 1) * k].to_vec();
            let mut lp = variable_predictors(snapshot, j);
            for kk in 0..k {
                let log_o = log_edge_odds(snapshot, resp, hyper, positivity, j, kk, local[kk] == 1, &lp);
                let p1 = logistic(logit_gamma - log_o);
                let draw = (rng.random::<f64>() < p1) as u8;
                if draw != local[kk] {
                    let sign = if draw == 1 { 1.0 } else { -1.0 };
                    for i in 0..snapshot.n {
                        if snapshot.a[i * k + kk] == 1 {
                            for c in 0..cm1 {
                                lp[i * cm1 + c] += sign * snapshot.beta_at(j, c, kk);
                            }
                        }
                    }
                    local[kk] = draw;
                }
            }
            local
        })
        .collect();
    for (j, r) in rows.into_iter().enumerate() {
        s.g[j * k..(j + 1) * k].copy_from_slice(&r);
    }
    let total: usize = s.g.iter().map(|&v| v as usize).sum();
    let mut rng = key.rng(TAG_GAMMA, 0);
    s.gamma = beta_draw(1.0 + total as f64, 1.0 + (p * k - total) as f64, &mut rng);
}

/// `σ²_{ck} ~ IG(a + ½Σ_j g_{jk}, b + ½Σ_j g_{jk} β²_{jck})`.
pub fn update_sigma_fixed_k(s: &mut ChainState, hyper: &Hyperparams, key: SweepKey) {
    let mut rng = key.rng(TAG_SIGMA, 0);
    for c in 0..s.cm1() {
        for kk in 0..s.k {
            let (shape, scale) = slab_posterior(s, hyper, c, kk);
            s.sigma2[c * s.k + kk] = inverse_gamma(shape, scale, &mut rng);
        }
    }
}

/// Inverse-gamma posterior parameters of `σ²_{ck}` under the slab.
pub(crate) fn slab_posterior(s: &ChainState, hyper: &Hyperparams, c: usize, kk: usize) -> (f64, f64) {
    let mut count = 0.0;
    let mut ss = 0.0;
    for j in 0..s.p {
        if s.edge(j, kk) {
            let b = s.beta_at(j, c, kk);
            count += 1.0;
            ss += b * b;
        }
    }
    (hyper.a_sigma + 0.5 * count, hyper.b_sigma + 0.5 * ss)
}

/// `τ ~ Dir(1 + counts)`, `η_{kb} ~ Beta(1 + Σ a z, 1 + Σ (1−a) z)`.
pub fn update_tau_eta(s: &mut ChainState, key: SweepKey) {
    let (k, b) = (s.k, s.b);
    let mut rng = key.rng(TAG_TAU_ETA, 0);
    let mut counts = vec![0.0; b];
    let mut ones = vec![0.0; k * b];
    for i in 0..s.n {
        let zi = s.z[i];
        counts[zi] += 1.0;
        for kk in 0..k {
            ones[kk * b + zi] += s.a[i * k + kk] as f64;
        }
    }
    let alpha: Vec<f64> = counts.iter().map(|c| 1.0 + c).collect();
    s.tau = dirichlet_draw(&alpha, &mut rng);
    for kk in 0..k {
        for bb in 0..b {
            let o = ones[kk * b + bb];
            s.eta[kk * b + bb] = beta_draw(1.0 + o, 1.0 + counts[bb] - o, &mut rng);
        }
    }
}

#[inline]
fn safe_ln(x: f64) -> f64 {
    x.max(f64::MIN_POSITIVE).ln()
}

/// Per subject: each `a_{ik}` from its Bernoulli full conditional, then the
/// deep class `z_i` given the new `a_i`.
pub fn update_a_z(s: &mut ChainState, resp: &Responses, key: SweepKey) {
    let (p, k, b, cm1) = (s.p, s.k, s.b, s.cm1());
    let snapshot = &*s;
    let draws: Vec<(Vec<u8>, usize)> = (0..s.n)
        .into_par_iter()
        .map(|i| {
            let mut rng = key.rng(TAG_AZ, i);
            let mut a = snapshot.a[i * k..(i + 1) * k].to_vec();
            let zi = snapshot.z[i];
            let mut lp = vec![0.0; p * cm1];
            for j in 0..p {
                predictors_into(snapshot, i, j, &mut lp[j * cm1..(j + 1) * cm1]);
            }
            // log P(y_ij) at the current a_i, refreshed when an attribute flips
            let mut current: Vec<f64> = (0..p)
                .map(|j| log_prob(&lp[j * cm1..(j + 1) * cm1], resp.get(i, j)))
                .collect();
            let mut flipped = vec![0.0; p];
            let mut alt = vec![0.0; cm1];
            for kk in 0..k {
                let eta = snapshot.eta[kk * b + zi];
                let on = a[kk] == 1;
                let sign = if on { -1.0 } else { 1.0 };
                let mut log_odds = safe_ln(eta) - safe_ln(1.0 - eta);
                for j in 0..p {
                    if !snapshot.edge(j, kk) {
                        continue;
                    }
                    for c in 0..cm1 {
                        alt[c] = lp[j * cm1 + c] + sign * snapshot.beta_at(j, c, kk);
                    }
                    flipped[j] = log_prob(&alt, resp.get(i, j));
                    let diff = current[j] - flipped[j];
                    log_odds += if on { diff } else { -diff };
                }
                let draw = (rng.random::<f64>() < logistic(log_odds)) as u8;
                if draw != a[kk] {
                    for j in 0..p {
                        if snapshot.edge(j, kk) {
                            for c in 0..cm1 {
                                lp[j * cm1 + c] += sign * snapshot.beta_at(j, c, kk);
                            }
                            current[j] = flipped[j];
                        }
                    }
                    a[kk] = draw;
                }
            }
            let logw: Vec<f64> = (0..b)
                .map(|bb| {
                    safe_ln(snapshot.tau[bb])
                        + (0..k)
                            .map(|kk| {
                                let e = snapshot.eta[kk * b + bb];
                                if a[kk] == 1 {
                                    safe_ln(e)
                                } else {
                                    safe_ln(1.0 - e)
                                }
                            })
                            .sum::<f64>()
                })
                .collect();
            let m = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let weights: Vec<f64> = logw.iter().map(|l| (l - m).exp()).collect();
            let total: f64 = weights.iter().sum();
            let u = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut z = b - 1;
            for (bb, wt) in weights.iter().enumerate() {
                acc += wt;
                if u < acc {
                    z = bb;
                    break;
                }
            }
            (a, z)
        })
        .collect();
    for (i, (a, z)) in draws.into_iter().enumerate() {
        s.a[i * k..(i + 1) * k].copy_from_slice(&a);
        s.z[i] = z;
    }
}
