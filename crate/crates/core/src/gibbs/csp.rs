//! Cumulative shrinkage process over latent columns.
//!
//! Column `k` is tied to stick `zind_k`; it sits in the spike (variance
//! pinned to `θ∞`) when `zind_k ≤ k` and in the inverse-gamma slab
//! otherwise. The sticks are drawn with `σ²` integrated out, so the slab
//! evidence is a multivariate Student-t density.

use rand::Rng;
use statrs::function::gamma::ln_gamma;

use super::updates::slab_posterior;
use super::{beta_draw, inverse_gamma, ChainState, CspState, Hyperparams, SweepKey, TAG_CSP};
use crate::error::{Error, Result};
use crate::rngs::StreamRng;

/// Stick weights `w_ℓ = v_ℓ Π_{m<ℓ} (1 − v_m)`.
pub(crate) fn stick_weights(v: &[f64]) -> Vec<f64> {
    let mut rest = 1.0;
    v.iter()
        .map(|&vl| {
            let w = vl * rest;
            rest *= 1.0 - vl;
            w
        })
        .collect()
}

/// `π_k = Σ_{ℓ≤k} w_ℓ`.
pub(crate) fn cumulative(weights: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    weights
        .iter()
        .map(|w| {
            acc += w;
            acc.min(1.0)
        })
        .collect()
}

/// Log density of a zero-mean multivariate Student-t with `nu` degrees of
/// freedom and scale matrix `scale · I`.
pub fn slab_t_log_density(x: &[f64], nu: f64, scale: f64) -> f64 {
    let p = x.len() as f64;
    if x.is_empty() {
        return 0.0;
    }
    let q: f64 = x.iter().map(|v| v * v).sum::<f64>() / scale;
    ln_gamma(0.5 * (nu + p)) - ln_gamma(0.5 * nu) - 0.5 * p * (nu * std::f64::consts::PI).ln()
        - 0.5 * p * scale.ln()
        - 0.5 * (nu + p) * (1.0 + q / nu).ln()
}

fn spike_log_density(x: &[f64], var: f64) -> f64 {
    x.iter()
        .map(|v| -0.5 * (2.0 * std::f64::consts::PI * var).ln() - 0.5 * v * v / var)
        .sum()
}

/// Active coefficients `β_{jck}` (edges `g_{jk} = 1`) of column `k`.
fn active_coefficients(s: &ChainState, c: usize, k: usize) -> Vec<f64> {
    (0..s.p)
        .filter(|&j| s.edge(j, k))
        .map(|j| s.beta_at(j, c, k))
        .collect()
}

/// Unnormalized log probabilities of `zind_k = ℓ` for `ℓ = 1..K`.
pub fn zind_log_weights(s: &ChainState, hyper: &Hyperparams, v: &[f64], k: usize) -> Vec<f64> {
    let weights = stick_weights(v);
    let mut spike = 0.0;
    let mut slab = 0.0;
    for c in 0..s.cm1() {
        let x = active_coefficients(s, c, k);
        spike += spike_log_density(&x, hyper.theta_inf);
        slab += slab_t_log_density(&x, 2.0 * hyper.a_sigma, hyper.b_sigma / hyper.a_sigma);
    }
    weights
        .iter()
        .enumerate()
        .map(|(l, &w)| {
            // ℓ = l + 1 is a spike stick for column k (0-based) iff ℓ ≤ k + 1
            let evidence = if l <= k { spike } else { slab };
            if w > 0.0 {
                w.ln() + evidence
            } else {
                f64::NEG_INFINITY
            }
        })
        .collect()
}

fn draw_from_log_weights(logw: &[f64], rng: &mut StreamRng) -> Option<usize> {
    let m = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return None;
    }
    let w: Vec<f64> = logw.iter().map(|l| (l - m).exp()).collect();
    let total: f64 = w.iter().sum();
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for (l, wl) in w.iter().enumerate() {
        acc += wl;
        if u < acc {
            return Some(l);
        }
    }
    Some(w.len() - 1)
}

fn draw_sticks(zind: &[usize], alpha: f64, rng: &mut StreamRng) -> Vec<f64> {
    let kk = zind.len();
    (1..=kk)
        .map(|k| {
            if k == kk {
                1.0
            } else {
                let eq = zind.iter().filter(|&&z| z == k).count() as f64;
                let gt = zind.iter().filter(|&&z| z > k).count() as f64;
                beta_draw(1.0 + eq, alpha + gt, rng)
            }
        })
        .collect()
}

/// Every column starts in the slab; sticks from the prior; slab variances
/// from the inverse-gamma prior.
pub(crate) fn initialize(s: &mut ChainState, hyper: &Hyperparams, rng: &mut StreamRng) {
    let k = s.k;
    let v: Vec<f64> = (1..=k)
        .map(|l| {
            if l == k {
                1.0
            } else {
                beta_draw(1.0, hyper.alpha0, rng)
            }
        })
        .collect();
    let pi = cumulative(&stick_weights(&v));
    for x in s.sigma2.iter_mut() {
        *x = inverse_gamma(hyper.a_sigma, hyper.b_sigma, rng);
    }
    s.csp = Some(CspState {
        v,
        pi,
        zind: vec![k; k],
    });
}

/// Updates stick indicators, stick lengths, cumulative spike probabilities
/// and slab variances, in that order.
pub fn update_csp(s: &mut ChainState, hyper: &Hyperparams, key: SweepKey) -> Result<()> {
    let Some(mut state) = s.csp.take() else {
        return Err(Error::Usage("shrinkage-prior update needs csp mode".into()));
    };
    let mut rng = key.rng(TAG_CSP, 0);
    let k = s.k;
    for kk in 0..k {
        let logw = zind_log_weights(s, hyper, &state.v, kk);
        let l = draw_from_log_weights(&logw, &mut rng).ok_or_else(|| Error::Numerical {
            iteration: 0,
            message: format!("stick weights for column {} are all zero", kk + 1),
        })?;
        state.zind[kk] = l + 1;
    }
    state.v = draw_sticks(&state.zind, hyper.alpha0, &mut rng);
    state.pi = cumulative(&stick_weights(&state.v));
    for c in 0..s.cm1() {
        for kk in 0..k {
            s.sigma2[c * k + kk] = if state.is_slab(kk) {
                let (shape, scale) = slab_posterior(s, hyper, c, kk);
                inverse_gamma(shape, scale, &mut rng)
            } else {
                hyper.theta_inf
            };
        }
    }
    s.csp = Some(state);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sticks_and_cumulative_sums() {
        let v = [0.5, 0.5, 1.0];
        let w = stick_weights(&v);
        assert_eq!(w, vec![0.5, 0.25, 0.25]);
        assert_eq!(cumulative(&w), vec![0.5, 0.75, 1.0]);
    }

    #[test]
    fn t_density_matches_product_of_univariate_in_one_dimension() {
        // univariate t with scale s: Γ((ν+1)/2)/(Γ(ν/2)√(νπs)) (1 + x²/(νs))^{−(ν+1)/2}
        let (nu, sc, x) = (4.0f64, 1.0f64, 0.7f64);
        let direct = ln_gamma(2.5) - ln_gamma(2.0) - 0.5 * (nu * std::f64::consts::PI * sc).ln()
            - 2.5 * (1.0 + x * x / (nu * sc)).ln();
        assert!((slab_t_log_density(&[x], nu, sc) - direct).abs() < 1e-12);
        assert_eq!(slab_t_log_density(&[], nu, sc), 0.0);
    }

    #[test]
    fn t_density_is_gamma_mixture_of_normals() {
        // ∫ N(x; 0, σ² I) IG(σ²; a, b) dσ² by quadrature over u = 1/σ²
        let (a, b) = (2.0f64, 2.0f64);
        let x = [0.4, -1.1];
        let ln_ig_norm = a * b.ln() - ln_gamma(a);
        let mut total = 0.0;
        let steps = 200_000;
        let upper = 60.0;
        let h = upper / steps as f64;
        for t in 1..steps {
            let u = t as f64 * h;
            let var = 1.0 / u;
            let ln_gamma_density = ln_ig_norm + (a - 1.0) * u.ln() - b * u;
            let ln_normal = spike_log_density(&x, var);
            total += (ln_gamma_density + ln_normal).exp() * h;
        }
        let t = slab_t_log_density(&x, 2.0 * a, b / a).exp();
        assert!((total - t).abs() / t < 1e-4, "{total} vs {t}");
    }
}
